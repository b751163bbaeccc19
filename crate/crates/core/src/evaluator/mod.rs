//! Exact-match scoring and the diagnostics built on it.

pub mod stats;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::{EntityType, InstanceMetadata};
use crate::corpus::{tokenize, Dataset, MrcInstance};
use crate::namebank::{bias_features, NameBank};
use crate::seed::task_rng;
use crate::{Error, Result, Score};

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace. Mirrors the MRQA/SQuAD scorer.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S]) -> bool {
    let p = normalize_answer(pred);
    golds.iter().any(|g| normalize_answer(g.as_ref()) == p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Correct,
    /// Wrong, but shares a normalized token with some gold answer.
    WrongBoundary,
    /// Wrong with no token overlap at all.
    WrongEntity,
}

fn token_set(s: &str) -> HashSet<String> {
    normalize_answer(s)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

pub fn classify_prediction<S: AsRef<str>>(pred: &str, golds: &[S]) -> ErrorClass {
    if exact_match(pred, golds) {
        return ErrorClass::Correct;
    }
    let ptoks = token_set(pred);
    let best_overlap = golds
        .iter()
        .map(|g| token_set(g.as_ref()).intersection(&ptoks).count())
        .max()
        .unwrap_or(0);
    if best_overlap > 0 {
        ErrorClass::WrongBoundary
    } else {
        ErrorClass::WrongEntity
    }
}

/// Predicted answer string per qid.
pub type Predictions = HashMap<String, String>;

pub fn load_predictions(path: &Path) -> Result<Predictions> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub correct: usize,
    pub wrong_entity: usize,
    pub wrong_boundary: usize,
}

impl ErrorCounts {
    fn add(&mut self, class: ErrorClass) {
        match class {
            ErrorClass::Correct => self.correct += 1,
            ErrorClass::WrongBoundary => self.wrong_boundary += 1,
            ErrorClass::WrongEntity => self.wrong_entity += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.correct + self.wrong_entity + self.wrong_boundary
    }
}

fn pct(part: usize, whole: usize) -> Score {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as Score / whole as Score
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub em: Score,
    pub n: usize,
    pub error_counts: ErrorCounts,
    /// Qids without a prediction; scored as wrong-entity errors.
    pub missing: usize,
    pub per_type_em: BTreeMap<EntityType, Score>,
    pub per_type_n: BTreeMap<EntityType, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_scores: Option<Vec<Score>>,
}

/// Per-instance outcome, in dataset order.
pub fn classify_dataset(d: &Dataset, p: &Predictions) -> Vec<ErrorClass> {
    d.instances
        .iter()
        .map(|inst| {
            let golds = inst.gold_texts();
            match p.get(&inst.qid) {
                Some(pred) => classify_prediction(pred, &golds),
                None => ErrorClass::WrongEntity,
            }
        })
        .collect()
}

/// EM, error taxonomy and, when `types` is given, EM per entity type.
pub fn evaluate(
    d: &Dataset,
    p: &Predictions,
    types: Option<&HashMap<String, BTreeSet<EntityType>>>,
) -> EvalReport {
    let classes = classify_dataset(d, p);
    let mut counts = ErrorCounts::default();
    let mut per_type: BTreeMap<EntityType, (usize, usize)> = BTreeMap::new();
    let mut missing = 0;
    for (inst, class) in d.instances.iter().zip(&classes) {
        counts.add(*class);
        missing += usize::from(!p.contains_key(&inst.qid));
        if let Some(ts) = types.and_then(|t| t.get(&inst.qid)) {
            for t in ts {
                let e = per_type.entry(*t).or_default();
                e.0 += usize::from(*class == ErrorClass::Correct);
                e.1 += 1;
            }
        }
    }
    if missing > 0 {
        log::warn!("{missing} of {} instances have no prediction", d.len());
    }
    EvalReport {
        em: pct(counts.correct, d.len()),
        n: d.len(),
        error_counts: counts,
        missing,
        per_type_em: per_type
            .iter()
            .map(|(t, (c, n))| (*t, pct(*c, *n)))
            .collect(),
        per_type_n: per_type.iter().map(|(t, (_, n))| (*t, *n)).collect(),
        seed_scores: None,
    }
}

/// Mean EM over seeded perturbed sets, plus the per-seed scores.
pub fn average_case_em(reports: &[EvalReport]) -> Result<(Score, Vec<Score>)> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidInput("no reports to average".into()))?;
    if let Some(r) = reports.iter().find(|r| r.n != first.n) {
        return Err(Error::InvalidInput(format!(
            "seed reports cover different instance counts ({} vs {})",
            first.n, r.n
        )));
    }
    let scores: Vec<Score> = reports.iter().map(|r| r.em).collect();
    let mean = stats::mean(&scores).expect("non-empty");
    Ok((mean, scores))
}

/// Share of test entity tokens absent from the training vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainShiftStats {
    pub unseen_vs_train_answers: Score,
    pub unseen_vs_train_passages: Score,
    pub test_tokens: usize,
}

/// Word tokens (anything with an alphanumeric char) of the given surfaces.
pub fn entity_tokens<'a>(surfaces: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    surfaces
        .into_iter()
        .flat_map(tokenize)
        .filter(|t| t.has_alphanumeric())
        .map(|t| t.text)
        .collect()
}

/// Percentage of test answer-entity tokens (mentions of `types`, counted
/// with multiplicity) never seen in training answer entities and in
/// training passage entities. Case-sensitive.
pub fn unseen_token_pct(
    test_meta: &[InstanceMetadata],
    types: &BTreeSet<EntityType>,
    train_answer_tokens: &HashSet<String>,
    train_passage_tokens: &HashSet<String>,
) -> Result<DomainShiftStats> {
    let tokens = entity_tokens(
        test_meta
            .iter()
            .flat_map(|m| &m.mentions)
            .filter(|(m, _)| types.contains(&m.etype))
            .map(|(m, _)| m.surface.as_str()),
    );
    if tokens.is_empty() {
        return Err(Error::InvalidInput(
            "test metadata has no entity tokens".into(),
        ));
    }
    let unseen = |vocab: &HashSet<String>| tokens.iter().filter(|t| !vocab.contains(*t)).count();
    Ok(DomainShiftStats {
        unseen_vs_train_answers: pct(unseen(train_answer_tokens), tokens.len()),
        unseen_vs_train_passages: pct(unseen(train_passage_tokens), tokens.len()),
        test_tokens: tokens.len(),
    })
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Two-sided paired bootstrap over instances.
///
/// `a[i][s]` is whether system A got instance `i` right under seed `s`; `b`
/// is aligned the same way. The statistic is the summed per-instance
/// difference in correct seeds. The p-value counts resamples whose
/// statistic deviates from the observed one by at least the observed
/// magnitude, with add-one smoothing.
pub fn paired_significance(
    a: &[Vec<bool>],
    b: &[Vec<bool>],
    resamples: usize,
    seed: u64,
) -> Result<Score> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "paired inputs cover {} and {} instances",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput(
            "paired test needs at least one instance".into(),
        ));
    }
    let seeds = a[0].len();
    let mut diffs = Vec::with_capacity(a.len());
    for (i, (ra, rb)) in a.iter().zip(b).enumerate() {
        if ra.len() != seeds || rb.len() != seeds {
            return Err(Error::InvalidInput(format!(
                "instance {i} has a different number of seeds"
            )));
        }
        let ca = ra.iter().filter(|x| **x).count() as i64;
        let cb = rb.iter().filter(|x| **x).count() as i64;
        diffs.push(ca - cb);
    }
    let observed: i64 = diffs.iter().sum();
    let mut rng = task_rng(seed, "paired-bootstrap");
    let n = diffs.len();
    let mut extreme = 0usize;
    for _ in 0..resamples {
        let s: i64 = (0..n).map(|_| diffs[rng.random_range(0..n)]).sum();
        if (s - observed).abs() >= observed.abs() {
            extreme += 1;
        }
    }
    Ok((extreme + 1) as Score / (resamples + 1) as Score)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasRow {
    pub name: String,
    /// `None` when the name is missing from the bank.
    pub gender_polarity: Option<Score>,
    pub popularity: Option<u64>,
    pub em: Score,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub rows: Vec<BiasRow>,
    pub top20_polarity_em: Option<Score>,
    pub bottom10_polarity_em: Option<Score>,
    pub top20_popularity_em: Option<Score>,
    pub bottom10_popularity_em: Option<Score>,
}

/// Joins per-name EM (from name-sweep runs) with the bank's bias features
/// and compares the mean EM of the top 20% against the bottom 10% by
/// polarity and by popularity.
pub fn bias_report(per_name_em: &BTreeMap<String, Score>, bank: &NameBank) -> Result<BiasReport> {
    if per_name_em.is_empty() {
        return Err(Error::InvalidInput("no per-name EM scores".into()));
    }
    let mut rows = Vec::with_capacity(per_name_em.len());
    for (name, &em) in per_name_em {
        let features = bank
            .first_name(name)
            .and_then(|r| bias_features::<Score>(r).ok());
        rows.push(BiasRow {
            name: name.clone(),
            gender_polarity: features.map(|f| f.gender_polarity),
            popularity: features.map(|f| f.popularity),
            em,
            flagged: features.is_none(),
        });
    }
    let known: Vec<&BiasRow> = rows.iter().filter(|r| !r.flagged).collect();

    let mut by_polarity = known.clone();
    by_polarity.sort_by(|x, y| {
        y.gender_polarity
            .partial_cmp(&x.gender_polarity)
            .expect("polarity is never NaN")
            .then_with(|| x.name.cmp(&y.name))
    });
    let polarity_em: Vec<Score> = by_polarity.iter().map(|r| r.em).collect();
    let mut by_popularity = known;
    by_popularity.sort_by(|x, y| {
        y.popularity
            .cmp(&x.popularity)
            .then_with(|| x.name.cmp(&y.name))
    });
    let popularity_em: Vec<Score> = by_popularity.iter().map(|r| r.em).collect();

    let pol = stats::head_tail_means(&polarity_em, 0.2, 0.1);
    let pop = stats::head_tail_means(&popularity_em, 0.2, 0.1);
    Ok(BiasReport {
        rows,
        top20_polarity_em: pol.map(|p| p.0),
        bottom10_polarity_em: pol.map(|p| p.1),
        top20_popularity_em: pop.map(|p| p.0),
        bottom10_popularity_em: pop.map(|p| p.1),
    })
}

/// Longest passage window the lexical baseline considers, in tokens.
pub const BASELINE_MAX_WINDOW: usize = 4;

/// Test-only predictor: the passage window (1 to 4 word tokens) sharing the
/// most distinct normalized tokens with the question. Ties go to the shorter
/// window, then the earlier one.
pub fn lexical_baseline_predict(inst: &MrcInstance) -> String {
    let question = token_set(&inst.question);
    let tokens: Vec<_> = tokenize(&inst.passage)
        .into_iter()
        .filter(|t| t.has_alphanumeric())
        .collect();
    let norms: Vec<String> = tokens.iter().map(|t| normalize_answer(&t.text)).collect();
    let mut best: Option<(usize, usize, usize)> = None; // (score, start, len)
    for len in 1..=BASELINE_MAX_WINDOW.min(tokens.len()) {
        for start in 0..=tokens.len() - len {
            let window: HashSet<&str> = norms[start..start + len]
                .iter()
                .map(String::as_str)
                .filter(|w| !w.is_empty())
                .collect();
            let score = window.iter().filter(|w| question.contains(**w)).count();
            let better = match best {
                None => true,
                Some((s, bs, bl)) => score > s || (score == s && (len, start) < (bl, bs)),
            };
            if better {
                best = Some((score, start, len));
            }
        }
    }
    let Some((_, start, len)) = best else {
        return String::new();
    };
    let passage = crate::corpus::CharIndexed::new(&inst.passage);
    passage
        .slice(tokens[start].char_start, tokens[start + len - 1].char_end)
        .unwrap_or_default()
        .to_string()
}
