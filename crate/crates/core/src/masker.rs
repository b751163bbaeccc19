//! Mask-position selection for four masked-language-model policies.
//!
//! Plans only say *which* token positions are masked; how masked tokens are
//! replaced (`[MASK]`, random, kept) is left to the trainer.
//!
//! Budget: `round(rate * len)` tokens with the default rate of 15%, held as
//! basis points so rounding is exact. Word-level policies keep adding units
//! (words, spans, entities) until the budget is reached, then drop the last
//! unit if that lands closer to the budget.

use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::sequence_rng;
use crate::{Error, Result};

pub const DEFAULT_RATE_BP: u32 = 1_500;
pub const DEFAULT_GEOMETRIC_P: f64 = 0.2;
pub const DEFAULT_MAX_SPAN: usize = 10;
pub const DEFAULT_ENTITY_PROB: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Token {
    Id(u64),
    Text(String),
}

/// A token sequence with its word partition and entity spans. Word ranges
/// are half-open token ranges; entity ranges are half-open word ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskableSequence {
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub words: Vec<(usize, usize)>,
    #[serde(default)]
    pub entities: Vec<(usize, usize)>,
}

impl MaskableSequence {
    /// One word per token, no entities.
    pub fn from_tokens(tokens: Vec<Token>) -> Self {
        let words = (0..tokens.len()).map(|i| (i, i + 1)).collect();
        Self {
            tokens,
            words,
            entities: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let mut expected = 0;
        for &(s, e) in &self.words {
            if s != expected || e <= s {
                return bad(format!(
                    "word range [{s}, {e}) breaks the partition at token {expected}"
                ));
            }
            expected = e;
        }
        if expected != self.tokens.len() {
            return bad(format!(
                "words cover {expected} of {} tokens",
                self.tokens.len()
            ));
        }
        let mut ents = self.entities.clone();
        ents.sort_unstable();
        let mut prev_end = 0;
        for (s, e) in ents {
            if e <= s || e > self.words.len() {
                return bad(format!("entity word range [{s}, {e}) is invalid"));
            }
            if s < prev_end {
                return bad(format!("entity word range [{s}, {e}) overlaps another"));
            }
            prev_end = e;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskingPolicy {
    Vanilla,
    WholeWord,
    Span {
        geometric_p: f64,
        max_span: usize,
    },
    Entity {
        entity_prob: f64,
        geometric_p: f64,
        max_span: usize,
        /// Decide entity-vs-span once per sequence instead of per selection.
        per_sequence: bool,
    },
}

impl MaskingPolicy {
    pub fn span() -> Self {
        MaskingPolicy::Span {
            geometric_p: DEFAULT_GEOMETRIC_P,
            max_span: DEFAULT_MAX_SPAN,
        }
    }

    pub fn entity() -> Self {
        MaskingPolicy::Entity {
            entity_prob: DEFAULT_ENTITY_PROB,
            geometric_p: DEFAULT_GEOMETRIC_P,
            max_span: DEFAULT_MAX_SPAN,
            per_sequence: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |p: f64, max: usize| {
            if !(p > 0.0 && p <= 1.0) || max == 0 {
                Err(Error::InvalidInput(format!(
                    "span sampling needs 0 < p <= 1 and max_span >= 1 (got p={p}, max_span={max})"
                )))
            } else {
                Ok(())
            }
        };
        match *self {
            MaskingPolicy::Vanilla | MaskingPolicy::WholeWord => Ok(()),
            MaskingPolicy::Span {
                geometric_p,
                max_span,
            } => check(geometric_p, max_span),
            MaskingPolicy::Entity {
                entity_prob,
                geometric_p,
                max_span,
                ..
            } => {
                if !(0.0..=1.0).contains(&entity_prob) {
                    return Err(Error::InvalidInput(format!(
                        "entity_prob {entity_prob} is not a probability"
                    )));
                }
                check(geometric_p, max_span)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskPlan {
    /// Sorted token indices.
    pub masked: Vec<usize>,
    pub policy: MaskingPolicy,
    pub budget: usize,
    /// Span lengths drawn (in words) before clipping to the sequence.
    pub span_lengths: Vec<usize>,
    /// Token count of the largest unit selected; bounds the distance from
    /// the budget.
    pub largest_unit: usize,
}

/// `round(len * rate)` with ties rounded up.
pub fn mask_budget(len: usize, rate_bp: u32) -> usize {
    (len * rate_bp as usize + 5_000) / 10_000
}

/// Truncated geometric distribution on `1..=max`.
pub fn span_length_distribution(p: f64, max: usize) -> WeightedIndex<f64> {
    let weights: Vec<f64> = (0..max).map(|k| p * (1.0 - p).powi(k as i32)).collect();
    WeightedIndex::new(weights).expect("valid geometric weights")
}

struct Selection<'a> {
    seq: &'a MaskableSequence,
    word_masked: Vec<bool>,
    count: usize,
    last_unit: Vec<usize>,
    largest_unit: usize,
}

impl<'a> Selection<'a> {
    fn new(seq: &'a MaskableSequence) -> Self {
        Self {
            seq,
            word_masked: vec![false; seq.words.len()],
            count: 0,
            last_unit: Vec::new(),
            largest_unit: 0,
        }
    }

    fn word_tokens(&self, w: usize) -> usize {
        let (s, e) = self.seq.words[w];
        e - s
    }

    /// Masks words `[start, end)`; returns the number of new tokens.
    fn add(&mut self, start: usize, end: usize) -> usize {
        self.last_unit.clear();
        let mut unit_tokens = 0;
        let mut added = 0;
        for w in start..end {
            unit_tokens += self.word_tokens(w);
            if !self.word_masked[w] {
                self.word_masked[w] = true;
                self.last_unit.push(w);
                added += self.word_tokens(w);
            }
        }
        self.count += added;
        self.largest_unit = self.largest_unit.max(unit_tokens);
        added
    }

    fn any_masked(&self, start: usize, end: usize) -> bool {
        self.word_masked[start..end].iter().any(|m| *m)
    }

    /// Drops the last unit when that ends closer to the budget.
    fn trim(&mut self, budget: usize) {
        let last: usize = self.last_unit.iter().map(|&w| self.word_tokens(w)).sum();
        let before = self.count - last;
        // Trimming never empties a plan whose budget is positive.
        if before > 0 && self.count > budget && budget.abs_diff(before) < self.count - budget {
            for w in std::mem::take(&mut self.last_unit) {
                self.word_masked[w] = false;
            }
            self.count = before;
        }
    }

    fn into_masked(self) -> Vec<usize> {
        self.word_masked
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .flat_map(|(w, _)| {
                let (s, e) = self.seq.words[w];
                s..e
            })
            .collect()
    }
}

fn span_event<R: Rng + ?Sized>(
    sel: &mut Selection<'_>,
    lengths: &WeightedIndex<f64>,
    drawn: &mut Vec<usize>,
    rng: &mut R,
) {
    let n_words = sel.word_masked.len();
    let len = lengths.sample(rng) + 1;
    drawn.push(len);
    let len = len.min(n_words);
    let start = rng.random_range(0..=n_words - len);
    sel.add(start, start + len);
}

pub fn mask<R: Rng + ?Sized>(
    seq: &MaskableSequence,
    policy: &MaskingPolicy,
    rng: &mut R,
) -> Result<MaskPlan> {
    mask_with_rate(seq, policy, DEFAULT_RATE_BP, rng)
}

/// Selects mask positions for `seq`. Sequences too short for the rate to
/// cover one whole token get an empty plan.
pub fn mask_with_rate<R: Rng + ?Sized>(
    seq: &MaskableSequence,
    policy: &MaskingPolicy,
    rate_bp: u32,
    rng: &mut R,
) -> Result<MaskPlan> {
    seq.validate()?;
    policy.validate()?;
    let len = seq.len();
    let mut plan = MaskPlan {
        masked: Vec::new(),
        policy: *policy,
        budget: 0,
        span_lengths: Vec::new(),
        largest_unit: 0,
    };
    if len * (rate_bp as usize) < 10_000 {
        log::warn!("sequence of {len} tokens is too short to mask");
        return Ok(plan);
    }
    let budget = mask_budget(len, rate_bp);
    plan.budget = budget;

    if let MaskingPolicy::Vanilla = policy {
        let mut idx = rand::seq::index::sample(rng, len, budget).into_vec();
        idx.sort_unstable();
        plan.masked = idx;
        plan.largest_unit = 1;
        return Ok(plan);
    }

    let mut sel = Selection::new(seq);
    match *policy {
        MaskingPolicy::Vanilla => unreachable!(),
        MaskingPolicy::WholeWord => {
            let mut order: Vec<usize> = (0..seq.words.len()).collect();
            order.shuffle(rng);
            for w in order {
                sel.add(w, w + 1);
                if sel.count >= budget {
                    break;
                }
            }
        }
        MaskingPolicy::Span {
            geometric_p,
            max_span,
        } => {
            let lengths = span_length_distribution(geometric_p, max_span);
            while sel.count < budget {
                span_event(&mut sel, &lengths, &mut plan.span_lengths, rng);
            }
        }
        MaskingPolicy::Entity {
            entity_prob,
            geometric_p,
            max_span,
            per_sequence,
        } => {
            let lengths = span_length_distribution(geometric_p, max_span);
            let sequence_choice = per_sequence.then(|| rng.random_bool(entity_prob));
            while sel.count < budget {
                let want_entity = match sequence_choice {
                    Some(choice) => choice,
                    None => rng.random_bool(entity_prob),
                };
                let free: Vec<(usize, usize)> = if want_entity {
                    seq.entities
                        .iter()
                        .copied()
                        .filter(|&(s, e)| !sel.any_masked(s, e))
                        .collect()
                } else {
                    Vec::new()
                };
                if let Some(&(s, e)) = free.get(if free.is_empty() {
                    0
                } else {
                    rng.random_range(0..free.len())
                }) {
                    sel.add(s, e);
                } else {
                    span_event(&mut sel, &lengths, &mut plan.span_lengths, rng);
                }
            }
        }
    }
    sel.trim(budget);
    plan.largest_unit = sel.largest_unit;
    plan.masked = sel.into_masked();
    Ok(plan)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EmitStats {
    pub records: usize,
    pub degenerate: usize,
}

/// Reads JSONL sequences and writes each record back with a `"masked"`
/// field. Record `i` draws from a generator keyed by `(seed, i)`.
pub fn emit_masked_corpus(
    input: impl BufRead,
    policy: &MaskingPolicy,
    rate_bp: u32,
    seed: u64,
    mut out: impl Write,
) -> Result<EmitStats> {
    policy.validate()?;
    let mut lines = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if !line.trim().is_empty() {
            lines.push((idx + 1, line));
        }
    }
    let records: Vec<Result<(String, bool)>> = lines
        .par_iter()
        .enumerate()
        .map(|(i, (lineno, line))| {
            let parse = |e: serde_json::Error| Error::parse("<input>", *lineno, e);
            let mut value: serde_json::Map<String, serde_json::Value> =
                serde_json::from_str(line).map_err(parse)?;
            let mut seq: MaskableSequence =
                serde_json::from_value(serde_json::Value::Object(value.clone())).map_err(parse)?;
            if !value.contains_key("words") {
                seq.words = (0..seq.tokens.len()).map(|t| (t, t + 1)).collect();
            }
            let plan = mask_with_rate(&seq, policy, rate_bp, &mut sequence_rng(seed, i as u64))
                .map_err(|e| Error::parse("<input>", *lineno, e))?;
            let degenerate = plan.budget == 0;
            value.insert(
                "masked".into(),
                serde_json::to_value(&plan.masked).expect("indices serialize"),
            );
            Ok((
                serde_json::to_string(&value).expect("map serializes"),
                degenerate,
            ))
        })
        .collect();
    let mut stats = EmitStats::default();
    for rec in records {
        let (line, degenerate) = rec?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io("<output>", e))?;
        stats.records += 1;
        stats.degenerate += usize::from(degenerate);
    }
    out.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(stats)
}
