//! Seed derivation.
//!
//! Every random stream in the pipeline is keyed by a stable digest of its
//! parent seed and a label, so results do not depend on iteration order or
//! thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type PipelineRng = ChaCha8Rng;

fn digest_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let out = hasher.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 output is 32 bytes"))
}

/// Seed of the `index`-th perturbed copy of a run started from `base_seed`.
pub fn perturbation_seed(base_seed: u64, index: usize) -> u64 {
    digest_u64(&[
        b"perturbation-seed",
        &base_seed.to_le_bytes(),
        &(index as u64).to_le_bytes(),
    ])
}

/// Generator for one instance under one seed.
pub fn instance_rng(seed: u64, qid: &str) -> PipelineRng {
    PipelineRng::seed_from_u64(digest_u64(&[
        b"instance",
        &seed.to_le_bytes(),
        qid.as_bytes(),
    ]))
}

/// Generator for the `index`-th record of a streamed corpus.
pub fn sequence_rng(seed: u64, index: u64) -> PipelineRng {
    PipelineRng::seed_from_u64(digest_u64(&[
        b"sequence",
        &seed.to_le_bytes(),
        &index.to_le_bytes(),
    ]))
}

/// Generator for a named auxiliary task (audits, bootstrap, ...).
pub fn task_rng(seed: u64, label: &str) -> PipelineRng {
    PipelineRng::seed_from_u64(digest_u64(&[
        b"task",
        &seed.to_le_bytes(),
        label.as_bytes(),
    ]))
}
