//! Name substitution and seeded perturbed test sets.
//!
//! A [`PerturbationPlan`] maps each distinct perturbable surface of an
//! instance to one replacement, so repeated mentions stay consistent. Plans
//! are applied in a single left-to-right pass that matches whole tokens
//! only, trying longer originals first; replacements are never re-scanned.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{
    type_set_label, EntityMention, EntityType, InstanceMetadata, PerturbableSpan, SpanType,
};
use crate::corpus::{char_len, CharIndexed, Dataset, MrcInstance};
use crate::namebank::{sample_candidate, Candidate, PerturbationSource, SourceKind};
use crate::seed::{instance_rng, perturbation_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub original: String,
    pub replacement: String,
    pub stype: SpanType,
    pub etype: EntityType,
    /// Left as is by the source; `replacement == original`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationPlan {
    pub qid: String,
    /// Longest original first.
    pub mapping: Vec<PlanEntry>,
    pub seed: u64,
}

impl PerturbationPlan {
    pub fn active(&self) -> impl Iterator<Item = &PlanEntry> {
        self.mapping.iter().filter(|e| !e.skipped)
    }

    pub fn entity_types(&self) -> BTreeSet<EntityType> {
        self.mapping.iter().map(|e| e.etype).collect()
    }
}

/// Chooses replacements for every perturbable span of the requested entity
/// types in `meta`.
pub fn plan_perturbation<R: Rng + ?Sized>(
    inst: &MrcInstance,
    meta: &InstanceMetadata,
    types: &BTreeSet<EntityType>,
    src: &PerturbationSource,
    seed: u64,
    rng: &mut R,
) -> Result<PerturbationPlan> {
    let plan_error = |message: String| Error::Plan {
        qid: inst.qid.clone(),
        message,
    };
    if meta.qid != inst.qid {
        return Err(plan_error(format!("metadata belongs to {}", meta.qid)));
    }

    let mut seen = HashSet::new();
    let mut spans: Vec<(&PerturbableSpan, EntityType)> = meta
        .mentions
        .iter()
        .filter(|(m, _)| types.contains(&m.etype))
        .flat_map(|(m, spans)| spans.iter().map(move |s| (s, m.etype)))
        .filter(|(s, _)| seen.insert(s.surface.as_str()))
        .collect();
    if spans.is_empty() {
        return Err(plan_error(format!(
            "no perturbable span for {}",
            type_set_label(types)
        )));
    }
    spans.sort_by(|(a, _), (b, _)| {
        char_len(&b.surface)
            .cmp(&char_len(&a.surface))
            .then_with(|| a.surface.cmp(&b.surface))
    });

    let mut mapping = Vec::with_capacity(spans.len());
    for (span, etype) in spans {
        let candidate = sample_candidate(span.stype, src, &span.surface, rng)
            .map_err(|e| plan_error(e.to_string()))?;
        let (replacement, skipped) = match candidate {
            Candidate::Replace(r) => (r, false),
            Candidate::Skipped => (span.surface.clone(), true),
        };
        mapping.push(PlanEntry {
            original: span.surface.clone(),
            replacement,
            stype: span.stype,
            etype,
            skipped,
        });
    }
    Ok(PerturbationPlan {
        qid: inst.qid.clone(),
        mapping,
        seed,
    })
}

/// One replaced region, in chars, before and after rewriting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub orig_start: usize,
    pub orig_end: usize,
    pub new_start: usize,
    pub new_end: usize,
}

/// Monotone map from passage offsets before rewriting to offsets after.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetMap {
    pub edits: Vec<Edit>,
}

impl OffsetMap {
    fn shift_before(&self, pos: usize) -> (isize, Option<&Edit>) {
        let mut delta = 0isize;
        for e in &self.edits {
            if e.orig_end <= pos {
                delta += (e.new_end - e.new_start) as isize - (e.orig_end - e.orig_start) as isize;
            } else if e.orig_start < pos {
                return (delta, Some(e));
            } else {
                break;
            }
        }
        (delta, None)
    }

    /// Maps a start offset; positions inside an edit snap to its new start.
    pub fn map_start(&self, pos: usize) -> usize {
        match self.shift_before(pos) {
            (_, Some(e)) => e.new_start,
            (delta, None) => (pos as isize + delta) as usize,
        }
    }

    /// Maps an end offset; positions inside an edit snap to its new end.
    pub fn map_end(&self, pos: usize) -> usize {
        match self.shift_before(pos) {
            (_, Some(e)) => e.new_end,
            (delta, None) => (pos as isize + delta) as usize,
        }
    }

    pub fn map_span(&self, start: usize, end: usize) -> (usize, usize) {
        (self.map_start(start), self.map_end(end))
    }
}

struct Rewrite {
    text: String,
    edits: Vec<Edit>,
    hits: Vec<usize>,
}

fn boundary(chars: &[char], idx: usize) -> bool {
    chars.get(idx).is_none_or(|c| !c.is_alphanumeric())
}

/// Replaces whole-token occurrences of each pattern in one pass. Patterns
/// are tried in order at every position, so longer ones should come first.
fn rewrite(text: &str, patterns: &[(Vec<char>, &str)]) -> Rewrite {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut edits = Vec::new();
    let mut hits = vec![0; patterns.len()];
    let mut new_pos = 0;
    let mut i = 0;
    while i < chars.len() {
        let at_start = i == 0 || boundary(&chars, i - 1);
        let found = at_start
            .then(|| {
                patterns.iter().position(|(pat, _)| {
                    !pat.is_empty()
                        && chars[i..].starts_with(pat)
                        && boundary(&chars, i + pat.len())
                })
            })
            .flatten();
        match found {
            Some(k) => {
                let (pat, repl) = &patterns[k];
                let repl_len = char_len(repl);
                out.push_str(repl);
                edits.push(Edit {
                    orig_start: i,
                    orig_end: i + pat.len(),
                    new_start: new_pos,
                    new_end: new_pos + repl_len,
                });
                hits[k] += 1;
                new_pos += repl_len;
                i += pat.len();
            }
            None => {
                out.push(chars[i]);
                new_pos += 1;
                i += 1;
            }
        }
    }
    Rewrite {
        text: out,
        edits,
        hits,
    }
}

/// Result of applying a plan to one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub instance: MrcInstance,
    pub offset_map: OffsetMap,
    pub passage_replacements: usize,
    pub question_replacements: usize,
}

/// Rewrites passage, question, gold answers and aliases. Gold offsets are
/// carried through the returned [`OffsetMap`].
pub fn apply_plan(inst: &MrcInstance, plan: &PerturbationPlan) -> Result<Applied> {
    let entries: Vec<&PlanEntry> = plan.active().collect();
    let patterns: Vec<(Vec<char>, &str)> = entries
        .iter()
        .map(|e| (e.original.chars().collect(), e.replacement.as_str()))
        .collect();

    let passage = rewrite(&inst.passage, &patterns);
    if let Some(k) = passage.hits.iter().position(|&h| h == 0) {
        return Err(Error::Plan {
            qid: inst.qid.clone(),
            message: format!(
                "{:?} has no whole-token occurrence in the passage",
                entries[k].original
            ),
        });
    }
    let question = rewrite(&inst.question, &patterns);
    let offset_map = OffsetMap {
        edits: passage.edits,
    };

    let new_passage = CharIndexed::new(&passage.text);
    let mut gold_answers = Vec::with_capacity(inst.gold_answers.len());
    for a in &inst.gold_answers {
        let (s, e) = offset_map.map_span(a.char_start, a.char_end);
        let text = new_passage.slice(s, e).ok_or_else(|| Error::Plan {
            qid: inst.qid.clone(),
            message: format!(
                "answer {}..{} maps outside the rewritten passage",
                a.char_start, a.char_end
            ),
        })?;
        let span = crate::corpus::AnswerSpan::new(text, s, e);
        if !gold_answers.contains(&span) {
            gold_answers.push(span);
        }
    }
    let mut aliases: Vec<String> = Vec::new();
    for alias in &inst.aliases {
        let a = rewrite(alias, &patterns).text;
        if !aliases.contains(&a) && !gold_answers.iter().any(|g| g.text == a) {
            aliases.push(a);
        }
    }

    let instance = MrcInstance {
        qid: inst.qid.clone(),
        question: question.text,
        passage: passage.text,
        gold_answers,
        aliases,
        split_tag: inst.split_tag.clone(),
    };
    debug_assert!(instance.validate().is_ok());
    Ok(Applied {
        instance,
        passage_replacements: passage.hits.iter().sum(),
        question_replacements: question.hits.iter().sum(),
        offset_map,
    })
}

/// Carries mention and span offsets through a rewrite.
pub fn remap_metadata(
    meta: &InstanceMetadata,
    map: &OffsetMap,
    new_passage: &str,
) -> InstanceMetadata {
    let text = CharIndexed::new(new_passage);
    let surface = |s: usize, e: usize| text.slice(s, e).unwrap_or_default().to_string();
    let mentions = meta
        .mentions
        .iter()
        .map(|(m, spans)| {
            let (s, e) = map.map_span(m.char_start, m.char_end);
            let mention = EntityMention {
                etype: m.etype,
                char_start: s,
                char_end: e,
                surface: surface(s, e),
            };
            let spans = spans
                .iter()
                .map(|sp| {
                    let (s, e) = map.map_span(sp.char_start, sp.char_end);
                    PerturbableSpan {
                        stype: sp.stype,
                        char_start: s,
                        char_end: e,
                        surface: surface(s, e),
                    }
                })
                .collect();
            (mention, spans)
        })
        .collect();
    InstanceMetadata {
        qid: meta.qid.clone(),
        mentions,
    }
}

/// The test-only predictor that reads the first original gold span through
/// the offset map. It must score 100 EM on any correctly perturbed set.
pub fn span_transfer_oracle(
    original: &MrcInstance,
    map: &OffsetMap,
    perturbed: &MrcInstance,
) -> String {
    let Some(gold) = original.gold_answers.first() else {
        return String::new();
    };
    let (s, e) = map.map_span(gold.char_start, gold.char_end);
    CharIndexed::new(&perturbed.passage)
        .slice(s, e)
        .unwrap_or_default()
        .to_string()
}

#[derive(Debug, Clone)]
pub struct PerturbConfig {
    pub types: BTreeSet<EntityType>,
    pub n_seeds: usize,
    pub base_seed: u64,
    /// Largest tolerated fraction of failing instances.
    pub failure_budget: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            types: EntityType::ALL.into_iter().collect(),
            n_seeds: 5,
            base_seed: 0,
            failure_budget: 0.01,
        }
    }
}

/// One seeded perturbed copy of the perturbable subset.
#[derive(Debug, Clone)]
pub struct PerturbedDataset {
    pub base: Arc<Dataset>,
    pub index: usize,
    pub seed: u64,
    pub source: SourceKind,
    pub types: BTreeSet<EntityType>,
    pub instances: Dataset,
    pub plans: Vec<PerturbationPlan>,
    pub offset_maps: Vec<OffsetMap>,
    /// Metadata remapped onto the rewritten passages.
    pub metadata: Vec<InstanceMetadata>,
}

impl PerturbedDataset {
    /// `{stem}.{source}.{types}.seed{i}`
    pub fn file_stem(&self, stem: &str) -> String {
        output_stem(stem, self.source, &self.types, self.index)
    }

    /// Span-transfer oracle answers keyed by qid.
    pub fn oracle_predictions(&self) -> HashMap<String, String> {
        self.instances
            .instances
            .iter()
            .zip(&self.offset_maps)
            .map(|(p, map)| {
                let original = self
                    .base
                    .get(&p.qid)
                    .expect("perturbed qid comes from base");
                (p.qid.clone(), span_transfer_oracle(original, map, p))
            })
            .collect()
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        let name = self.file_stem(stem);
        crate::corpus::write_dataset(&self.instances, &dir.join(format!("{name}.jsonl")))?;
        crate::corpus::write_jsonl(&dir.join(format!("{name}.plans.jsonl")), &self.plans)?;
        crate::corpus::write_jsonl(&dir.join(format!("{name}.meta.jsonl")), &self.metadata)
    }
}

pub fn output_stem(
    stem: &str,
    source: SourceKind,
    types: &BTreeSet<EntityType>,
    index: usize,
) -> String {
    format!("{stem}.{source}.{}.seed{index}", type_set_label(types))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub qid: String,
    pub seed_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PerturbRun {
    pub sets: Vec<PerturbedDataset>,
    pub subset_size: usize,
    /// Every failure, per seed.
    pub skips: Vec<SkipRecord>,
    /// Instances removed from every seed because they failed in at least one.
    pub dropped_qids: Vec<String>,
    pub question_replacements: usize,
}

/// Builds `n_seeds` perturbed copies of the perturbable subset of `d`.
///
/// Each instance draws from a generator keyed by `(seed_i, qid)`, so the
/// output does not depend on iteration order. Instances that fail under any
/// seed are dropped from all seeds; the run errors when they exceed the
/// failure budget.
pub fn perturb_dataset(
    d: &Arc<Dataset>,
    meta: &[InstanceMetadata],
    src: &PerturbationSource,
    cfg: &PerturbConfig,
) -> Result<PerturbRun> {
    if cfg.n_seeds == 0 {
        return Err(Error::InvalidInput("n_seeds must be at least 1".into()));
    }
    let by_qid: HashMap<&str, &InstanceMetadata> =
        meta.iter().map(|m| (m.qid.as_str(), m)).collect();
    let subset: Vec<(&MrcInstance, &InstanceMetadata)> = d
        .instances
        .iter()
        .filter_map(|inst| {
            by_qid
                .get(inst.qid.as_str())
                .filter(|m| m.is_perturbable_for_any(&cfg.types))
                .map(|m| (inst, *m))
        })
        .collect();

    type Outcome = Result<(Applied, PerturbationPlan, InstanceMetadata)>;
    let per_seed: Vec<(u64, Vec<Outcome>)> = (0..cfg.n_seeds)
        .map(|i| {
            let seed = perturbation_seed(cfg.base_seed, i);
            let outcomes = subset
                .par_iter()
                .map(|(inst, m)| {
                    let mut rng = instance_rng(seed, &inst.qid);
                    let plan = plan_perturbation(inst, m, &cfg.types, src, seed, &mut rng)?;
                    let applied = apply_plan(inst, &plan)?;
                    let new_meta =
                        remap_metadata(m, &applied.offset_map, &applied.instance.passage);
                    Ok((applied, plan, new_meta))
                })
                .collect();
            (seed, outcomes)
        })
        .collect();

    let mut skips = Vec::new();
    let mut dropped = BTreeSet::new();
    for (i, (_, outcomes)) in per_seed.iter().enumerate() {
        for ((inst, _), outcome) in subset.iter().zip(outcomes) {
            if let Err(e) = outcome {
                skips.push(SkipRecord {
                    qid: inst.qid.clone(),
                    seed_index: i,
                    reason: e.to_string(),
                });
                dropped.insert(inst.qid.as_str());
            }
        }
    }
    let total = subset.len();
    if total > 0 && dropped.len() as f64 > cfg.failure_budget * total as f64 {
        return Err(Error::FailureBudget {
            failed: dropped.len(),
            total,
            budget: cfg.failure_budget,
            reasons: skips
                .iter()
                .map(|s| format!("{}: {}", s.qid, s.reason))
                .collect(),
        });
    }

    let mut question_replacements = 0;
    let sets = per_seed
        .into_iter()
        .enumerate()
        .map(|(index, (seed, outcomes))| {
            let mut instances = Vec::with_capacity(total);
            let mut plans = Vec::with_capacity(total);
            let mut offset_maps = Vec::with_capacity(total);
            let mut metadata = Vec::with_capacity(total);
            for ((inst, _), outcome) in subset.iter().zip(outcomes) {
                if dropped.contains(inst.qid.as_str()) {
                    continue;
                }
                let (applied, plan, new_meta) = outcome.expect("failures were dropped");
                question_replacements += applied.question_replacements;
                instances.push(applied.instance);
                offset_maps.push(applied.offset_map);
                plans.push(plan);
                metadata.push(new_meta);
            }
            PerturbedDataset {
                base: Arc::clone(d),
                index,
                seed,
                source: src.kind(),
                types: cfg.types.clone(),
                instances: Dataset::new(d.source_name.clone(), instances),
                plans,
                offset_maps,
                metadata,
            }
        })
        .collect();

    Ok(PerturbRun {
        sets,
        subset_size: total,
        skips,
        dropped_qids: dropped.into_iter().map(str::to_string).collect(),
        question_replacements,
    })
}

/// One row of a manual quality-check sheet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRow {
    pub original: MrcInstance,
    pub perturbed: MrcInstance,
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditSample {
    pub etype: EntityType,
    pub k: usize,
    pub seed_index: usize,
    pub rows: Vec<AuditRow>,
}

pub const AUDIT_SPAN_COLUMN: &str = "span_identification_ok";
pub const AUDIT_SUBSTITUTION_COLUMN: &str = "substitution_ok";

/// Uniform sample without replacement of `k` instances whose plan renames
/// an entity of type `etype`.
pub fn sample_audit<R: Rng + ?Sized>(
    pd: &PerturbedDataset,
    k: usize,
    etype: EntityType,
    rng: &mut R,
) -> Result<AuditSample> {
    sample_audit_from(
        &pd.base,
        &pd.instances.instances,
        &pd.plans,
        pd.index,
        k,
        etype,
        rng,
    )
}

/// [`sample_audit`] over a perturbed set read back from disk. `perturbed`
/// and `plans` are aligned by position.
pub fn sample_audit_from<R: Rng + ?Sized>(
    base: &Dataset,
    perturbed: &[MrcInstance],
    plans: &[PerturbationPlan],
    seed_index: usize,
    k: usize,
    etype: EntityType,
    rng: &mut R,
) -> Result<AuditSample> {
    if perturbed.len() != plans.len() {
        return Err(Error::InvalidInput(format!(
            "{} perturbed instances but {} plans",
            perturbed.len(),
            plans.len()
        )));
    }
    if let Some((i, p)) = perturbed.iter().zip(plans).find(|(i, p)| i.qid != p.qid) {
        return Err(Error::InvalidInput(format!(
            "plan for {} is aligned with instance {}",
            p.qid, i.qid
        )));
    }
    let eligible: Vec<usize> = plans
        .iter()
        .enumerate()
        .filter(|(_, p)| p.mapping.iter().any(|e| e.etype == etype))
        .map(|(i, _)| i)
        .collect();
    if k > eligible.len() {
        return Err(Error::InvalidInput(format!(
            "asked for {k} {etype} audit rows but only {} instances qualify",
            eligible.len()
        )));
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, eligible.len(), k)
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    picked.sort_unstable();
    let rows = picked
        .into_iter()
        .map(|i| {
            let perturbed = perturbed[i].clone();
            let original = base
                .get(&perturbed.qid)
                .cloned()
                .unwrap_or_else(|| perturbed.clone());
            let entries = plans[i]
                .mapping
                .iter()
                .filter(|e| e.etype == etype)
                .cloned()
                .collect();
            AuditRow {
                original,
                perturbed,
                entries,
            }
        })
        .collect();
    Ok(AuditSample {
        etype,
        k,
        seed_index,
        rows,
    })
}

fn highlight(text: &str, words: &[&str], open: &str, close: &str) -> String {
    let mut words: Vec<&str> = words.to_vec();
    words.sort_by_key(|w| std::cmp::Reverse(char_len(w)));
    let wrapped: Vec<String> = words.iter().map(|w| format!("{open}{w}{close}")).collect();
    let patterns: Vec<(Vec<char>, &str)> = words
        .iter()
        .zip(&wrapped)
        .map(|(w, r)| (w.chars().collect(), r.as_str()))
        .collect();
    rewrite(text, &patterns).text
}

fn tsv_cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

impl AuditSample {
    fn describe(entries: &[PlanEntry]) -> String {
        entries
            .iter()
            .map(|e| {
                if e.skipped {
                    format!("{} (kept) <{}>", e.original, e.stype)
                } else {
                    format!("{} -> {} <{}>", e.original, e.replacement, e.stype)
                }
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Tab-separated sheet with two empty columns for the annotator.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "row\tqid\tentity_type\tspans\toriginal_question\tperturbed_question\toriginal_answer\tperturbed_answer\toriginal_passage\tperturbed_passage\t{AUDIT_SPAN_COLUMN}\t{AUDIT_SUBSTITUTION_COLUMN}\n"
        );
        for (n, row) in self.rows.iter().enumerate() {
            let originals: Vec<&str> = row.entries.iter().map(|e| e.original.as_str()).collect();
            let replacements: Vec<&str> =
                row.entries.iter().map(|e| e.replacement.as_str()).collect();
            let answer = |i: &MrcInstance| {
                i.gold_answers
                    .first()
                    .map(|a| a.text.clone())
                    .unwrap_or_default()
            };
            let cells = [
                (n + 1).to_string(),
                row.original.qid.clone(),
                self.etype.to_string(),
                Self::describe(&row.entries),
                row.original.question.clone(),
                row.perturbed.question.clone(),
                answer(&row.original),
                answer(&row.perturbed),
                highlight(&row.original.passage, &originals, "[[", "]]"),
                highlight(&row.perturbed.passage, &replacements, "[[", "]]"),
                String::new(),
                String::new(),
            ];
            let cells: Vec<String> = cells.iter().map(|c| tsv_cell(c)).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "# {} audit, seed {} ({} instances)\n\nFor each instance answer two questions:\n\n\
             1. Are the perturbable spans and their span types all correct?\n\
             2. Did the substitution reach every mention of those spans in the passage?\n",
            self.etype,
            self.seed_index,
            self.rows.len()
        );
        for (n, row) in self.rows.iter().enumerate() {
            let originals: Vec<&str> = row.entries.iter().map(|e| e.original.as_str()).collect();
            let replacements: Vec<&str> =
                row.entries.iter().map(|e| e.replacement.as_str()).collect();
            let _ = write!(
                out,
                "\n## {}. `{}`\n\n**Spans:** {}\n\n**Question:** {}\n\n**Perturbed question:** {}\n\n\
                 **Original passage:** {}\n\n**Perturbed passage:** {}\n\n\
                 - [ ] spans and types correct\n- [ ] all mentions substituted\n",
                n + 1,
                row.original.qid,
                Self::describe(&row.entries),
                row.original.question,
                row.perturbed.question,
                highlight(&row.original.passage, &originals, "**", "**"),
                highlight(&row.perturbed.passage, &replacements, "**", "**"),
            );
        }
        out
    }
}

/// Accuracy read back from an annotated audit sheet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditSummary {
    pub rows: usize,
    pub span_identification_pct: Option<f64>,
    pub substitution_pct: Option<f64>,
}

fn parse_judgement(cell: &str) -> Option<bool> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "1" | "y" | "yes" | "true" | "x" | "ok" => Some(true),
        "0" | "n" | "no" | "false" | "-" => Some(false),
        _ => None,
    }
}

/// Percent-correct per judged column of a filled TSV sheet. A column left
/// completely blank reports `None`; a partly blank one is an error.
pub fn summarize_audit(tsv: &str) -> Result<AuditSummary> {
    let mut lines = tsv.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty audit sheet".into()))?
        .split('\t')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidInput(format!("audit sheet has no {name} column")))
    };
    let (span_col, sub_col) = (col(AUDIT_SPAN_COLUMN)?, col(AUDIT_SUBSTITUTION_COLUMN)?);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    if rows.is_empty() {
        return Err(Error::InvalidInput("audit sheet has no rows".into()));
    }
    let score = |c: usize| -> Result<Option<f64>> {
        let cells: Vec<&str> = rows
            .iter()
            .map(|r| r.get(c).copied().unwrap_or("").trim())
            .collect();
        if cells.iter().all(|c| c.is_empty()) {
            return Ok(None);
        }
        let mut correct = 0usize;
        for (i, cell) in cells.iter().enumerate() {
            match parse_judgement(cell) {
                Some(ok) => correct += usize::from(ok),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "audit row {} column {}: cannot read judgement {cell:?}",
                        i + 1,
                        header[c]
                    )))
                }
            }
        }
        Ok(Some(100.0 * correct as f64 / cells.len() as f64))
    };
    let summary = AuditSummary {
        rows: rows.len(),
        span_identification_pct: score(span_col)?,
        substitution_pct: score(sub_col)?,
    };
    if summary.span_identification_pct.is_none() && summary.substitution_pct.is_none() {
        return Err(Error::InvalidInput("audit sheet has no judgements".into()));
    }
    Ok(summary)
}
