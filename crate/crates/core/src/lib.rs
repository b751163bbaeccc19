//! Robustness audits for extractive machine reading comprehension under
//! entity renaming.
//!
//! The pipeline reads MRQA-style datasets ([`corpus`]), finds answer
//! entities and the sub-spans of their names that can be swapped
//! ([`annotate`]), draws replacement names from one of three sources
//! ([`namebank`]), and rewrites passages, questions and answers with exact
//! offset bookkeeping ([`perturber`]). Predictions on the rewritten sets are
//! scored with [`evaluator`], and [`masker`] produces mask plans for the four
//! masked-language-model policies used in continual pretraining experiments.
//!
//! Statistics are generic over [`num_traits::Float`]; the crate-root aliases
//! fix the scalar used by reports and the CLI.

pub mod annotate;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod masker;
pub mod namebank;
pub mod perturber;
pub mod seed;

pub use error::{Error, Result};

/// Scalar used for EM percentages, p-values and bias statistics.
pub type Score = f64;

/// Bias features at report precision.
pub type BiasFeatures = namebank::NameBiasFeatures<Score>;

/// Summary statistics at report precision.
pub type Summary = evaluator::stats::Summary<Score>;
