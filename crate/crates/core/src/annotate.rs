//! Answer entity recognition and perturbable span identification.
//!
//! Entity recognition is pluggable: mentions either come from an external
//! annotation file (one JSON object per instance, see
//! [`AnnotationIndex::load`]) or from a small gazetteer tagger backed by the
//! [`NameBank`]. Either way only mentions whose range coincides with a gold
//! answer span survive.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, CharIndexed, Dataset, MrcInstance, TokenSpan};
use crate::namebank::NameBank;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityType {
    #[serde(rename = "PER")]
    Per,
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "GPE")]
    Gpe,
}

impl EntityType {
    pub const ALL: [EntityType; 3] = [EntityType::Per, EntityType::Org, EntityType::Gpe];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Per => "PER",
            EntityType::Org => "ORG",
            EntityType::Gpe => "GPE",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PER" | "PERSON" => Ok(EntityType::Per),
            "ORG" => Ok(EntityType::Org),
            "GPE" => Ok(EntityType::Gpe),
            other => Err(Error::InvalidInput(format!(
                "unknown entity type {other:?}"
            ))),
        }
    }
}

/// Parses `PER`, `ORG`, `GPE`, `MIX` or a comma/plus separated list.
pub fn parse_type_set(s: &str) -> Result<BTreeSet<EntityType>> {
    if s.trim().eq_ignore_ascii_case("mix") {
        return Ok(EntityType::ALL.into_iter().collect());
    }
    let set = s
        .split([',', '+'])
        .filter(|p| !p.trim().is_empty())
        .map(EntityType::from_str)
        .collect::<Result<BTreeSet<_>>>()?;
    if set.is_empty() {
        return Err(Error::InvalidInput("empty entity type set".into()));
    }
    Ok(set)
}

/// File-name label of a type set: `PER`, `PER+GPE`, or `MIX` for all three.
pub fn type_set_label(types: &BTreeSet<EntityType>) -> String {
    if types.len() == EntityType::ALL.len() {
        "MIX".to_string()
    } else {
        types
            .iter()
            .map(|t| t.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub etype: EntityType,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpanType {
    FirstNameMale,
    FirstNameFemale,
    FirstNameNeutral,
    LastName,
    Nnp,
    Rare,
    GpeCountry,
    GpeState,
    GpeCity,
}

impl SpanType {
    pub const ALL: [SpanType; 9] = [
        SpanType::FirstNameMale,
        SpanType::FirstNameFemale,
        SpanType::FirstNameNeutral,
        SpanType::LastName,
        SpanType::Nnp,
        SpanType::Rare,
        SpanType::GpeCountry,
        SpanType::GpeState,
        SpanType::GpeCity,
    ];

    pub fn is_first_name(self) -> bool {
        matches!(
            self,
            SpanType::FirstNameMale | SpanType::FirstNameFemale | SpanType::FirstNameNeutral
        )
    }

    pub fn is_gpe(self) -> bool {
        matches!(
            self,
            SpanType::GpeCountry | SpanType::GpeState | SpanType::GpeCity
        )
    }

    /// Which span types each entity type may carry.
    pub fn applicable_to(self, etype: EntityType) -> bool {
        match etype {
            EntityType::Per => self.is_first_name() || self == SpanType::LastName,
            EntityType::Gpe => self.is_gpe(),
            EntityType::Org => self.is_gpe() || matches!(self, SpanType::Nnp | SpanType::Rare),
        }
    }
}

impl fmt::Display for SpanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerturbableSpan {
    pub stype: SpanType,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMetadata {
    pub qid: String,
    pub mentions: Vec<(EntityMention, Vec<PerturbableSpan>)>,
}

impl InstanceMetadata {
    pub fn is_perturbable_for(&self, etype: EntityType) -> bool {
        self.mentions
            .iter()
            .any(|(m, spans)| m.etype == etype && !spans.is_empty())
    }

    pub fn is_perturbable_for_any(&self, types: &BTreeSet<EntityType>) -> bool {
        types.iter().any(|t| self.is_perturbable_for(*t))
    }

    pub fn perturbable_types(&self) -> BTreeSet<EntityType> {
        EntityType::ALL
            .into_iter()
            .filter(|t| self.is_perturbable_for(*t))
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct AnnotationLine {
    qid: String,
    mentions: Vec<RawMention>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawMention {
    #[serde(rename = "type")]
    etype: EntityType,
    char_start: usize,
    char_end: usize,
}

/// Externally produced entity mentions keyed by qid.
#[derive(Debug, Clone, Default)]
pub struct AnnotationIndex {
    by_qid: HashMap<String, Vec<RawMention>>,
}

impl AnnotationIndex {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut by_qid: HashMap<String, Vec<RawMention>> = HashMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationLine =
                serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e))?;
            by_qid.entry(rec.qid).or_default().extend(rec.mentions);
        }
        Ok(Self { by_qid })
    }

    pub fn insert(&mut self, qid: &str, etype: EntityType, char_start: usize, char_end: usize) {
        self.by_qid
            .entry(qid.to_string())
            .or_default()
            .push(RawMention {
                etype,
                char_start,
                char_end,
            });
    }

    pub fn contains(&self, qid: &str) -> bool {
        self.by_qid.contains_key(qid)
    }
}

/// Where answer entity types come from.
#[derive(Debug, Clone, Copy)]
pub enum EntitySource<'a> {
    Annotations(&'a AnnotationIndex),
    Builtin(&'a NameBank),
}

fn trim_range(passage: &CharIndexed<'_>, start: usize, end: usize) -> Option<(usize, usize)> {
    let text = passage.slice(start, end)?;
    let lead = text.chars().take_while(|c| c.is_whitespace()).count();
    let trail = text.chars().rev().take_while(|c| c.is_whitespace()).count();
    let (s, e) = (start + lead, end.saturating_sub(trail));
    (s < e).then_some((s, e))
}

fn gold_ranges(inst: &MrcInstance, passage: &CharIndexed<'_>) -> BTreeSet<(usize, usize)> {
    inst.gold_answers
        .iter()
        .filter_map(|a| trim_range(passage, a.char_start, a.char_end))
        .collect()
}

/// Typed mentions that coincide with gold answer spans. Returns `None` when
/// the annotation source has no entry for this qid.
pub fn recognize_answer_entities(
    inst: &MrcInstance,
    source: EntitySource<'_>,
) -> Option<Vec<EntityMention>> {
    let passage = CharIndexed::new(&inst.passage);
    let golds = gold_ranges(inst, &passage);
    let mut out = Vec::new();
    match source {
        EntitySource::Annotations(index) => {
            let raw = index.by_qid.get(&inst.qid)?;
            let mut seen = BTreeSet::new();
            for m in raw {
                let Some(range) = trim_range(&passage, m.char_start, m.char_end) else {
                    log::warn!(
                        "{}: annotation {}..{} is outside the passage",
                        inst.qid,
                        m.char_start,
                        m.char_end
                    );
                    continue;
                };
                if golds.contains(&range) && seen.insert(range) {
                    out.push(mention_at(&passage, m.etype, range));
                }
            }
        }
        EntitySource::Builtin(bank) => {
            for &range in &golds {
                let surface = passage.slice(range.0, range.1).unwrap_or_default();
                if let Some(etype) = builtin_entity_type(surface, bank) {
                    out.push(mention_at(&passage, etype, range));
                }
            }
        }
    }
    out.sort_by_key(|m| (m.char_start, m.char_end));
    Some(out)
}

fn mention_at(
    passage: &CharIndexed<'_>,
    etype: EntityType,
    (s, e): (usize, usize),
) -> EntityMention {
    EntityMention {
        etype,
        char_start: s,
        char_end: e,
        surface: passage.slice(s, e).unwrap_or_default().to_string(),
    }
}

const ORG_CUES: &[&str] = &[
    "Agency",
    "Airlines",
    "Association",
    "Band",
    "Bank",
    "Church",
    "Club",
    "Co",
    "College",
    "Committee",
    "Company",
    "Corp",
    "Corporation",
    "Council",
    "Department",
    "FC",
    "Foundation",
    "Group",
    "Hospital",
    "Inc",
    "Institute",
    "League",
    "Ltd",
    "Museum",
    "Orchestra",
    "Party",
    "Records",
    "School",
    "Society",
    "Team",
    "United",
    "University",
];

const NAME_FUNCTION_WORDS: &[&str] = &[
    "and", "de", "del", "der", "des", "di", "du", "for", "in", "la", "le", "of", "on", "the",
    "van", "von",
];

fn starts_upper(t: &TokenSpan) -> bool {
    t.text.chars().next().is_some_and(char::is_uppercase)
}

fn is_word(t: &TokenSpan) -> bool {
    t.text.chars().any(char::is_alphabetic)
}

/// Title-cased phrase: the first word is capitalized and every other word
/// is capitalized or a lowercase function word.
fn is_capitalized_phrase(tokens: &[TokenSpan]) -> bool {
    let mut words = tokens.iter().filter(|t| is_word(t));
    let Some(first) = words.next() else {
        return false;
    };
    starts_upper(first)
        && words.all(|w| starts_upper(w) || NAME_FUNCTION_WORDS.contains(&w.text.as_str()))
}

/// Gazetteer vote used when no external annotations are given.
/// Precedence is GPE, then PER, then ORG.
pub fn builtin_entity_type(surface: &str, bank: &NameBank) -> Option<EntityType> {
    if bank.gpe_level(surface).is_some() {
        return Some(EntityType::Gpe);
    }
    let tokens = tokenize(surface);
    let person = match tokens.as_slice() {
        [first] => starts_upper(first) && bank.first_name(&first.text).is_some(),
        [first, last] => {
            starts_upper(first)
                && starts_upper(last)
                && bank.first_name(&first.text).is_some()
                && bank.is_last_name(&last.text)
        }
        _ => false,
    };
    if person {
        return Some(EntityType::Per);
    }
    if is_capitalized_phrase(&tokens) {
        return Some(EntityType::Org);
    }
    let has_cue = tokens.iter().any(|t| ORG_CUES.contains(&t.text.as_str()));
    let has_name_word = !gazetteer_matches(surface, &tokens, bank).is_empty()
        || tokens
            .iter()
            .filter(|t| is_word(t))
            .any(|t| bank.is_nnp(&t.text) || !bank.in_ptb(&t.text));
    (has_cue && has_name_word).then_some(EntityType::Org)
}

/// Leftmost-longest gazetteer matches over whole tokens, as
/// `(first_token, end_token_exclusive, span_type)`.
fn gazetteer_matches(
    surface: &str,
    tokens: &[TokenSpan],
    bank: &NameBank,
) -> Vec<(usize, usize, SpanType)> {
    let text = CharIndexed::new(surface);
    let max = bank.gpe_max_tokens();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = (1..=max.min(tokens.len() - i)).rev().find_map(|len| {
            let phrase = text.slice(tokens[i].char_start, tokens[i + len - 1].char_end)?;
            bank.gpe_level(phrase).map(|level| (len, level.span_type()))
        });
        match longest {
            Some((len, stype)) => {
                out.push((i, i + len, stype));
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

/// Sub-spans of a mention that may be renamed.
///
/// * PER: one word is a first name, two words are first name + last name,
///   longer names yield nothing. First-name gender comes from the bank.
/// * GPE: gazetteer matches (leftmost-longest, country > state > city).
/// * ORG: gazetteer matches, then proper-noun words and words outside the
///   treebank vocabulary.
pub fn identify_perturbable_spans(m: &EntityMention, bank: &NameBank) -> Vec<PerturbableSpan> {
    let tokens = tokenize(&m.surface);
    let span = |stype: SpanType, start: usize, end: usize| {
        let text = CharIndexed::new(&m.surface);
        PerturbableSpan {
            stype,
            char_start: m.char_start + start,
            char_end: m.char_start + end,
            surface: text.slice(start, end).unwrap_or_default().to_string(),
        }
    };
    let tok_span = |stype: SpanType, t: &TokenSpan| span(stype, t.char_start, t.char_end);

    match m.etype {
        EntityType::Per => {
            if !tokens.iter().all(is_word) {
                return Vec::new();
            }
            match tokens.as_slice() {
                [first] => vec![tok_span(bank.gender_of(&first.text), first)],
                [first, last] => vec![
                    tok_span(bank.gender_of(&first.text), first),
                    tok_span(SpanType::LastName, last),
                ],
                _ => Vec::new(),
            }
        }
        EntityType::Gpe => gazetteer_matches(&m.surface, &tokens, bank)
            .into_iter()
            .map(|(a, b, stype)| span(stype, tokens[a].char_start, tokens[b - 1].char_end))
            .collect(),
        EntityType::Org => {
            let gpe = gazetteer_matches(&m.surface, &tokens, bank);
            let mut covered = vec![false; tokens.len()];
            for &(a, b, _) in &gpe {
                covered[a..b].iter_mut().for_each(|c| *c = true);
            }
            let mut out: Vec<PerturbableSpan> = gpe
                .into_iter()
                .map(|(a, b, stype)| span(stype, tokens[a].char_start, tokens[b - 1].char_end))
                .collect();
            for (t, _) in tokens
                .iter()
                .zip(&covered)
                .filter(|(t, c)| !**c && is_word(t))
            {
                if bank.is_nnp(&t.text) {
                    out.push(tok_span(SpanType::Nnp, t));
                } else if !bank.in_ptb(&t.text) {
                    out.push(tok_span(SpanType::Rare, t));
                }
            }
            out.sort_by_key(|s| s.char_start);
            out
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationOutcome {
    /// One entry per instance, in dataset order.
    pub metadata: Vec<InstanceMetadata>,
    /// Instances the annotation file did not cover.
    pub missing_qids: Vec<String>,
}

/// Runs recognition and span identification over a whole dataset.
pub fn annotate_dataset(
    d: &Dataset,
    source: EntitySource<'_>,
    bank: &NameBank,
) -> AnnotationOutcome {
    let results: Vec<(InstanceMetadata, bool)> = d
        .instances
        .par_iter()
        .map(|inst| {
            let found = recognize_answer_entities(inst, source);
            let missing = found.is_none();
            let mentions = found
                .unwrap_or_default()
                .into_iter()
                .map(|m| {
                    let spans = identify_perturbable_spans(&m, bank);
                    (m, spans)
                })
                .collect();
            (
                InstanceMetadata {
                    qid: inst.qid.clone(),
                    mentions,
                },
                missing,
            )
        })
        .collect();
    let mut outcome = AnnotationOutcome::default();
    for (meta, missing) in results {
        if missing {
            outcome.missing_qids.push(meta.qid.clone());
        }
        outcome.metadata.push(meta);
    }
    if !outcome.missing_qids.is_empty() {
        log::warn!(
            "{} instance(s) have no entry in the annotation file",
            outcome.missing_qids.len()
        );
    }
    outcome
}

/// Instances perturbable for at least one of `types`. Asking for all three
/// types gives the MIX subset.
pub fn filter_perturbable_subset(
    d: &Dataset,
    meta: &[InstanceMetadata],
    types: &BTreeSet<EntityType>,
) -> Dataset {
    let by_qid: HashMap<&str, &InstanceMetadata> =
        meta.iter().map(|m| (m.qid.as_str(), m)).collect();
    let instances = d
        .instances
        .iter()
        .filter(|inst| {
            by_qid
                .get(inst.qid.as_str())
                .is_some_and(|m| m.is_perturbable_for_any(types))
        })
        .cloned()
        .collect();
    Dataset::new(d.source_name.clone(), instances)
}

/// Sizes of the per-type and MIX perturbable subsets.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCounts {
    #[serde(rename = "PER")]
    pub per: usize,
    #[serde(rename = "ORG")]
    pub org: usize,
    #[serde(rename = "GPE")]
    pub gpe: usize,
    #[serde(rename = "MIX")]
    pub mix: usize,
}

pub fn subset_counts(meta: &[InstanceMetadata]) -> SubsetCounts {
    let mut c = SubsetCounts::default();
    for m in meta {
        let types = m.perturbable_types();
        c.per += usize::from(types.contains(&EntityType::Per));
        c.org += usize::from(types.contains(&EntityType::Org));
        c.gpe += usize::from(types.contains(&EntityType::Gpe));
        c.mix += usize::from(!types.is_empty());
    }
    c
}

/// Entity mentions anywhere in a passage, for passage-level vocabulary
/// statistics. With annotations every listed mention is used; the builtin
/// tagger classifies maximal runs of capitalized tokens.
pub fn passage_entities(inst: &MrcInstance, source: EntitySource<'_>) -> Vec<EntityMention> {
    let passage = CharIndexed::new(&inst.passage);
    match source {
        EntitySource::Annotations(index) => index
            .by_qid
            .get(&inst.qid)
            .into_iter()
            .flatten()
            .filter_map(|m| {
                trim_range(&passage, m.char_start, m.char_end)
                    .map(|r| mention_at(&passage, m.etype, r))
            })
            .collect(),
        EntitySource::Builtin(bank) => {
            let tokens = tokenize(&inst.passage);
            let mut out = Vec::new();
            let mut i = 0;
            while i < tokens.len() {
                if !(is_word(&tokens[i]) && starts_upper(&tokens[i])) {
                    i += 1;
                    continue;
                }
                let mut j = i + 1;
                while j < tokens.len() && is_word(&tokens[j]) && starts_upper(&tokens[j]) {
                    j += 1;
                }
                let range = (tokens[i].char_start, tokens[j - 1].char_end);
                let surface = passage.slice(range.0, range.1).unwrap_or_default();
                if let Some(etype) = builtin_entity_type(surface, bank) {
                    out.push(mention_at(&passage, etype, range));
                }
                i = j;
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnswerSpan;
    use crate::namebank::{GpeLevel, NameRecord};

    fn bank() -> NameBank {
        let mut b = NameBank::new("US");
        b.add_first_name(NameRecord::new("Morton", 900, 10));
        b.add_first_name(NameRecord::new("Oprah", 0, 500));
        b.add_first_name(NameRecord::new("Jack", 1000, 20));
        b.add_last_name("Winfrey");
        b.add_last_name("Higgins");
        b.add_gpe("Iceland", GpeLevel::Country);
        b.add_gpe("New Brunswick", GpeLevel::State);
        b.add_gpe("Boston", GpeLevel::City);
        b.add_gpe("New", GpeLevel::City);
        b.add_nnp("hufflepuff");
        for w in ["company", "of", "the", "new", "ltd", "iceland"] {
            b.add_ptb_word(w);
        }
        b
    }

    fn mention(etype: EntityType, surface: &str) -> EntityMention {
        EntityMention {
            etype,
            char_start: 0,
            char_end: surface.chars().count(),
            surface: surface.into(),
        }
    }

    fn instance(qid: &str, passage: &str, answer: &str) -> MrcInstance {
        let start = passage.find(answer).unwrap();
        let start = passage[..start].chars().count();
        MrcInstance {
            qid: qid.into(),
            question: "?".into(),
            passage: passage.into(),
            gold_answers: vec![AnswerSpan::new(
                answer,
                start,
                start + answer.chars().count(),
            )],
            aliases: vec![],
            split_tag: None,
        }
    }

    #[test]
    fn builtin_tagger_votes() {
        let b = bank();
        assert_eq!(builtin_entity_type("Iceland", &b), Some(EntityType::Gpe));
        assert_eq!(
            builtin_entity_type("Oprah Winfrey", &b),
            Some(EntityType::Per)
        );
        assert_eq!(
            builtin_entity_type("Pokemon Company of Boston", &b),
            Some(EntityType::Org)
        );
        assert_eq!(builtin_entity_type("1984", &b), None);
        assert_eq!(builtin_entity_type("the company", &b), None);
    }

    #[test]
    fn recognizes_gold_answer_from_gazetteer() {
        let b = bank();
        let inst = instance("q1", "He moved to Iceland in 1990.", "Iceland");
        let ms = recognize_answer_entities(&inst, EntitySource::Builtin(&b)).unwrap();
        assert_eq!(
            ms,
            vec![EntityMention {
                etype: EntityType::Gpe,
                char_start: 12,
                char_end: 19,
                surface: "Iceland".into()
            }]
        );
    }

    #[test]
    fn annotation_file_passthrough() {
        let inst = instance("q2", "Shares of Hufflepuff Ltd rose.", "Hufflepuff Ltd");
        let mut idx = AnnotationIndex::default();
        idx.insert("q2", EntityType::Org, 10, 24);
        // Not a gold range, dropped.
        idx.insert("q2", EntityType::Gpe, 0, 6);
        let ms = recognize_answer_entities(&inst, EntitySource::Annotations(&idx)).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(
            (ms[0].etype, ms[0].char_start, ms[0].char_end),
            (EntityType::Org, 10, 24)
        );
        assert_eq!(ms[0].surface, "Hufflepuff Ltd");
        let other = instance("q3", "Iceland", "Iceland");
        assert!(recognize_answer_entities(&other, EntitySource::Annotations(&idx)).is_none());
    }

    #[test]
    fn annotation_ranges_match_after_trimming() {
        let mut inst = instance("q", "Visit  Boston  now", "Boston");
        inst.gold_answers = vec![AnswerSpan::new(" Boston ", 6, 14)];
        let mut idx = AnnotationIndex::default();
        idx.insert("q", EntityType::Gpe, 7, 13);
        let ms = recognize_answer_entities(&inst, EntitySource::Annotations(&idx)).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].surface, "Boston");
    }

    #[test]
    fn person_spans() {
        let b = bank();
        let spans = identify_perturbable_spans(&mention(EntityType::Per, "Morton"), &b);
        assert_eq!(spans.len(), 1);
        assert_eq!(
            (spans[0].stype, spans[0].char_start, spans[0].char_end),
            (SpanType::FirstNameMale, 0, 6)
        );

        let spans = identify_perturbable_spans(&mention(EntityType::Per, "Oprah Winfrey"), &b);
        let got: Vec<_> = spans
            .iter()
            .map(|s| (s.stype, s.surface.as_str()))
            .collect();
        assert_eq!(
            got,
            [
                (SpanType::FirstNameFemale, "Oprah"),
                (SpanType::LastName, "Winfrey")
            ]
        );

        assert!(identify_perturbable_spans(
            &mention(EntityType::Per, "John Ronald Reuel Tolkien"),
            &b
        )
        .is_empty());
        // Unknown first names are neutral.
        let spans = identify_perturbable_spans(&mention(EntityType::Per, "Zorblax"), &b);
        assert_eq!(spans[0].stype, SpanType::FirstNameNeutral);
    }

    #[test]
    fn gpe_prefers_longest_match() {
        let b = bank();
        let spans = identify_perturbable_spans(&mention(EntityType::Gpe, "New Brunswick"), &b);
        assert_eq!(spans.len(), 1);
        assert_eq!(
            (spans[0].stype, spans[0].char_start, spans[0].char_end),
            (SpanType::GpeState, 0, 13)
        );
    }

    #[test]
    fn org_spans() {
        // "Pokemon": not NNP, not in PTB -> Rare. "Company", "of": in PTB, no span.
        // "Boston": gazetteer city.
        let b = bank();
        let m = EntityMention {
            etype: EntityType::Org,
            char_start: 4,
            char_end: 29,
            surface: "Pokemon Company of Boston".into(),
        };
        let spans = identify_perturbable_spans(&m, &b);
        let got: Vec<_> = spans
            .iter()
            .map(|s| (s.stype, s.surface.as_str(), s.char_start, s.char_end))
            .collect();
        assert_eq!(
            got,
            [
                (SpanType::Rare, "Pokemon", 4, 11),
                (SpanType::GpeCity, "Boston", 23, 29)
            ]
        );

        let spans = identify_perturbable_spans(&mention(EntityType::Org, "Hufflepuff Ltd"), &b);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].stype, SpanType::Nnp);
    }

    #[test]
    fn subset_filter_counts() {
        // 4 PER-only, 3 GPE-only, 3 without entities.
        let b = bank();
        let mut instances = Vec::new();
        for i in 0..4 {
            instances.push(instance(
                &format!("p{i}"),
                "Jack Higgins wrote it.",
                "Jack Higgins",
            ));
        }
        for i in 0..3 {
            instances.push(instance(&format!("g{i}"), "It is in Iceland.", "Iceland"));
        }
        for i in 0..3 {
            instances.push(instance(&format!("n{i}"), "It was 1984.", "1984"));
        }
        let d = Dataset::new("fixture", instances);
        let meta = annotate_dataset(&d, EntitySource::Builtin(&b), &b).metadata;
        let types: BTreeSet<_> = [EntityType::Per, EntityType::Gpe].into();
        assert_eq!(filter_perturbable_subset(&d, &meta, &types).len(), 7);
        let per_only: BTreeSet<_> = [EntityType::Per].into();
        assert!(filter_perturbable_subset(&d, &meta, &per_only)
            .instances
            .iter()
            .all(|i| i.qid.starts_with('p')));
        let c = subset_counts(&meta);
        assert_eq!(
            c,
            SubsetCounts {
                per: 4,
                org: 0,
                gpe: 3,
                mix: 7
            }
        );
    }

    #[test]
    fn mixed_instance_included_once() {
        let b = bank();
        let mut inst = instance("m", "Jack Higgins left Iceland.", "Jack Higgins");
        inst.gold_answers.push(AnswerSpan::new("Iceland", 18, 25));
        let d = Dataset::new("f", vec![inst]);
        let meta = annotate_dataset(&d, EntitySource::Builtin(&b), &b).metadata;
        let all: BTreeSet<_> = EntityType::ALL.into();
        assert_eq!(filter_perturbable_subset(&d, &meta, &all).len(), 1);
        assert_eq!(
            meta[0].perturbable_types(),
            all.iter()
                .copied()
                .filter(|t| *t != EntityType::Org)
                .collect()
        );
    }

    #[test]
    fn type_set_parsing_and_labels() {
        assert_eq!(type_set_label(&parse_type_set("MIX").unwrap()), "MIX");
        assert_eq!(
            type_set_label(&parse_type_set("gpe,per").unwrap()),
            "PER+GPE"
        );
        assert!(parse_type_set("LOC").is_err());
    }

    #[test]
    fn builtin_passage_scan() {
        let b = bank();
        let inst = instance("q", "Jack Higgins flew from Boston to Iceland.", "Iceland");
        let ms = passage_entities(&inst, EntitySource::Builtin(&b));
        let got: Vec<_> = ms.iter().map(|m| (m.etype, m.surface.as_str())).collect();
        assert_eq!(
            got,
            [
                (EntityType::Per, "Jack Higgins"),
                (EntityType::Gpe, "Boston"),
                (EntityType::Gpe, "Iceland")
            ]
        );
    }
}
