//! Candidate-name resources and the three substitution sources.
//!
//! A [`NameBank`] is loaded from five plain files in one directory:
//!
//! | file              | layout                                  |
//! |-------------------|-----------------------------------------|
//! | `first_names.csv` | `name,male_freq,female_freq` (header)   |
//! | `last_names.txt`  | one surname per line                    |
//! | `gpe.csv`         | `name,level` with level `country`, `state` or `city` (header) |
//! | `nnp.txt`         | one lowercased proper-noun word per line |
//! | `ptb_vocab.txt`   | one lowercased vocabulary word per line  |
//!
//! National-origin banks are just other directories (or other first/last
//! name files) with the same layout.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::{InstanceMetadata, SpanType};
use crate::corpus::tokenize;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameRecord {
    pub name: String,
    pub male_freq: u64,
    pub female_freq: u64,
}

impl NameRecord {
    pub fn new(name: impl Into<String>, male_freq: u64, female_freq: u64) -> Self {
        Self {
            name: name.into(),
            male_freq,
            female_freq,
        }
    }
}

/// Gender class of a first name: male or female when that frequency is at
/// least twice the other one, neutral otherwise.
pub fn classify_gender(r: &NameRecord) -> SpanType {
    let (m, f) = (r.male_freq as u128, r.female_freq as u128);
    let male = m >= 2 * f;
    let female = f >= 2 * m;
    match (male, female) {
        (true, false) => SpanType::FirstNameMale,
        (false, true) => SpanType::FirstNameFemale,
        // Both hold only for 0/0.
        _ => SpanType::FirstNameNeutral,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GpeLevel {
    // Declaration order is tie-break precedence.
    Country,
    State,
    City,
}

impl GpeLevel {
    pub fn span_type(self) -> SpanType {
        match self {
            GpeLevel::Country => SpanType::GpeCountry,
            GpeLevel::State => SpanType::GpeState,
            GpeLevel::City => SpanType::GpeCity,
        }
    }
}

impl FromStr for GpeLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "country" => Ok(GpeLevel::Country),
            "state" => Ok(GpeLevel::State),
            "city" => Ok(GpeLevel::City),
            other => Err(Error::NameBank(format!("unknown GPE level {other:?}"))),
        }
    }
}

/// Paths of the five bank files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameBankPaths {
    pub first_names: PathBuf,
    pub last_names: PathBuf,
    pub gpe: PathBuf,
    pub nnp: PathBuf,
    pub ptb_vocab: PathBuf,
}

impl NameBankPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            first_names: dir.join("first_names.csv"),
            last_names: dir.join("last_names.txt"),
            gpe: dir.join("gpe.csv"),
            nnp: dir.join("nnp.txt"),
            ptb_vocab: dir.join("ptb_vocab.txt"),
        }
    }

    pub fn all(&self) -> [&Path; 5] {
        [
            &self.first_names,
            &self.last_names,
            &self.gpe,
            &self.nnp,
            &self.ptb_vocab,
        ]
    }
}

#[derive(Debug, Clone, Default)]
pub struct NameBank {
    first_names: Vec<NameRecord>,
    first_index: HashMap<String, usize>,
    last_names: BTreeSet<String>,
    gpe: BTreeMap<String, BTreeSet<GpeLevel>>,
    gpe_max_tokens: usize,
    nnp: HashSet<String>,
    ptb_vocab: HashSet<String>,
    pub origin_tag: String,
}

impl NameBank {
    pub fn new(origin_tag: impl Into<String>) -> Self {
        Self {
            origin_tag: origin_tag.into(),
            ..Self::default()
        }
    }

    pub fn load_dir(dir: &Path, origin_tag: impl Into<String>) -> Result<Self> {
        Self::load(&NameBankPaths::in_dir(dir), origin_tag)
    }

    pub fn load(paths: &NameBankPaths, origin_tag: impl Into<String>) -> Result<Self> {
        let mut bank = NameBank::new(origin_tag);

        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&paths.first_names)
            .map_err(|e| csv_error(&paths.first_names, e))?;
        for (idx, row) in rdr.deserialize::<NameRecord>().enumerate() {
            let rec = row.map_err(|e| Error::parse(&paths.first_names, idx + 2, e))?;
            if rec.male_freq + rec.female_freq == 0 {
                return Err(Error::parse(
                    &paths.first_names,
                    idx + 2,
                    format!("{} has zero total frequency", rec.name),
                ));
            }
            bank.add_first_name(rec);
        }

        for name in read_lines(&paths.last_names)? {
            bank.add_last_name(name);
        }

        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&paths.gpe)
            .map_err(|e| csv_error(&paths.gpe, e))?;
        for (idx, row) in rdr.records().enumerate() {
            let line = idx + 2;
            let row = row.map_err(|e| Error::parse(&paths.gpe, line, e))?;
            let (Some(name), Some(level)) = (row.get(0), row.get(1)) else {
                return Err(Error::parse(&paths.gpe, line, "expected name,level"));
            };
            let level = level
                .parse()
                .map_err(|e: Error| Error::parse(&paths.gpe, line, e))?;
            bank.add_gpe(name, level);
        }

        for word in read_lines(&paths.nnp)? {
            bank.add_nnp(&word);
        }
        for word in read_lines(&paths.ptb_vocab)? {
            bank.add_ptb_word(&word);
        }

        bank.validate_pools()?;
        Ok(bank)
    }

    /// Later records for an existing name add to its frequencies.
    pub fn add_first_name(&mut self, rec: NameRecord) {
        match self.first_index.get(&rec.name) {
            Some(&i) => {
                let existing = &mut self.first_names[i];
                existing.male_freq += rec.male_freq;
                existing.female_freq += rec.female_freq;
            }
            None => {
                self.first_index
                    .insert(rec.name.clone(), self.first_names.len());
                self.first_names.push(rec);
            }
        }
    }

    pub fn add_last_name(&mut self, name: impl Into<String>) {
        self.last_names.insert(name.into());
    }

    pub fn add_gpe(&mut self, name: &str, level: GpeLevel) {
        let tokens = tokenize(name).len();
        self.gpe_max_tokens = self.gpe_max_tokens.max(tokens);
        self.gpe.entry(name.to_string()).or_default().insert(level);
    }

    pub fn add_nnp(&mut self, word: &str) {
        self.nnp.insert(word.to_lowercase());
    }

    pub fn add_ptb_word(&mut self, word: &str) {
        self.ptb_vocab.insert(word.to_lowercase());
    }

    pub fn first_names(&self) -> &[NameRecord] {
        &self.first_names
    }

    pub fn first_name(&self, name: &str) -> Option<&NameRecord> {
        self.first_index.get(name).map(|&i| &self.first_names[i])
    }

    pub fn is_last_name(&self, name: &str) -> bool {
        self.last_names.contains(name)
    }

    /// Highest-precedence level of a gazetteer entry (country > state > city).
    pub fn gpe_level(&self, name: &str) -> Option<GpeLevel> {
        self.gpe
            .get(name)
            .and_then(|levels| levels.first().copied())
    }

    /// Longest gazetteer entry, in tokens.
    pub fn gpe_max_tokens(&self) -> usize {
        self.gpe_max_tokens
    }

    pub fn is_nnp(&self, word: &str) -> bool {
        self.nnp.contains(&word.to_lowercase())
    }

    pub fn in_ptb(&self, word: &str) -> bool {
        self.ptb_vocab.contains(&word.to_lowercase())
    }

    /// First-name class of `name`; names missing from the bank are neutral.
    pub fn gender_of(&self, name: &str) -> SpanType {
        self.first_name(name)
            .map(classify_gender)
            .unwrap_or(SpanType::FirstNameNeutral)
    }

    /// Pools for the database source. Rare words have no pool.
    pub fn db_pools(&self) -> CandidatePools {
        let mut pools = CandidatePools::default();
        for rec in &self.first_names {
            pools.push(classify_gender(rec), &rec.name);
        }
        for name in &self.last_names {
            pools.push(SpanType::LastName, name);
        }
        for (name, levels) in &self.gpe {
            for level in levels {
                pools.push(level.span_type(), name);
            }
        }
        for word in &self.nnp {
            pools.push(SpanType::Nnp, word);
        }
        pools.finish();
        pools
    }

    /// Every span type except `Rare` must have at least one candidate.
    pub fn validate_pools(&self) -> Result<()> {
        let pools = self.db_pools();
        let empty: Vec<String> = SpanType::ALL
            .iter()
            .filter(|t| **t != SpanType::Rare && pools.get(**t).is_empty())
            .map(|t| t.to_string())
            .collect();
        if empty.is_empty() {
            Ok(())
        } else {
            Err(Error::NameBank(format!(
                "bank {:?} has no names for {}",
                self.origin_tag,
                empty.join(", ")
            )))
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, 0, format!("{other:?}")),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Sorted, deduplicated candidate surfaces per span type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidatePools {
    pools: BTreeMap<SpanType, Vec<String>>,
}

impl CandidatePools {
    /// Adds `surface` to the pool of `stype`, keeping the pool sorted and
    /// free of duplicates.
    pub fn insert(&mut self, stype: SpanType, surface: &str) {
        let pool = self.pools.entry(stype).or_default();
        if let Err(i) = pool.binary_search_by(|c| c.as_str().cmp(surface)) {
            pool.insert(i, surface.to_string());
        }
    }

    fn push(&mut self, stype: SpanType, surface: &str) {
        self.pools
            .entry(stype)
            .or_default()
            .push(surface.to_string());
    }

    fn finish(&mut self) {
        for pool in self.pools.values_mut() {
            pool.sort_unstable();
            pool.dedup();
        }
    }

    pub fn get(&self, stype: SpanType) -> &[String] {
        self.pools.get(&stype).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.pools.values().all(Vec::is_empty)
    }
}

/// Pools of every perturbable-span surface observed in a dataset's gold
/// answers, so the source introduces no name the dataset does not already
/// use.
pub fn build_indist_pool(meta: &[InstanceMetadata]) -> CandidatePools {
    let mut pools = CandidatePools::default();
    for m in meta {
        for (_, spans) in &m.mentions {
            for span in spans {
                pools.push(span.stype, &span.surface);
            }
        }
    }
    pools.finish();
    pools
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    #[serde(rename = "indistname")]
    InDistName,
    #[serde(rename = "dbname")]
    DbName,
    #[serde(rename = "randstr")]
    RandStr,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [
        SourceKind::InDistName,
        SourceKind::DbName,
        SourceKind::RandStr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::InDistName => "indistname",
            SourceKind::DbName => "dbname",
            SourceKind::RandStr => "randstr",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "indistname" | "indist" => Ok(SourceKind::InDistName),
            "dbname" | "db" => Ok(SourceKind::DbName),
            "randstr" | "random" => Ok(SourceKind::RandStr),
            other => Err(Error::InvalidInput(format!(
                "unknown perturbation source {other:?}"
            ))),
        }
    }
}

/// Where replacement names come from.
#[derive(Debug, Clone)]
pub enum PerturbationSource {
    InDistName(CandidatePools),
    DbName(CandidatePools),
    RandStr,
}

impl PerturbationSource {
    pub fn kind(&self) -> SourceKind {
        match self {
            PerturbationSource::InDistName(_) => SourceKind::InDistName,
            PerturbationSource::DbName(_) => SourceKind::DbName,
            PerturbationSource::RandStr => SourceKind::RandStr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Candidate {
    Replace(String),
    /// The source leaves this span untouched (rare words under the database
    /// source).
    Skipped,
}

/// Draws a replacement for `original` of type `stype`, never returning
/// `original` itself.
pub fn sample_candidate<R: Rng + ?Sized>(
    stype: SpanType,
    src: &PerturbationSource,
    original: &str,
    rng: &mut R,
) -> Result<Candidate> {
    let unsatisfiable = || Error::Unsatisfiable {
        stype,
        original: original.to_string(),
    };
    match src {
        PerturbationSource::RandStr => {
            if !original.chars().any(char::is_alphabetic) {
                return Err(unsatisfiable());
            }
            // Each attempt collides with probability at most 1/26.
            for _ in 0..64 {
                let s = rand_str(original, rng);
                if s != original {
                    return Ok(Candidate::Replace(s));
                }
            }
            Err(unsatisfiable())
        }
        PerturbationSource::DbName(_) if stype == SpanType::Rare => Ok(Candidate::Skipped),
        PerturbationSource::DbName(pools) if stype == SpanType::Nnp => {
            // Bank NNP words are lowercased; they take the original's casing.
            let pool = pools.get(stype);
            let excluded = pool
                .binary_search(&original.to_lowercase())
                .ok()
                .filter(|&i| match_casing(&pool[i], original) == original);
            draw_excluding(pool, excluded, rng)
                .map(|s| Candidate::Replace(match_casing(s, original)))
                .ok_or_else(unsatisfiable)
        }
        PerturbationSource::DbName(pools) | PerturbationSource::InDistName(pools) => {
            let pool = pools.get(stype);
            let excluded = pool.binary_search_by(|c| c.as_str().cmp(original)).ok();
            draw_excluding(pool, excluded, rng)
                .map(|s| Candidate::Replace(s.to_string()))
                .ok_or_else(unsatisfiable)
        }
    }
}

fn draw_excluding<'p, R: Rng + ?Sized>(
    pool: &'p [String],
    excluded: Option<usize>,
    rng: &mut R,
) -> Option<&'p str> {
    let n = pool.len() - usize::from(excluded.is_some());
    if n == 0 {
        return None;
    }
    let mut k = rng.random_range(0..n);
    if excluded.is_some_and(|e| k >= e) {
        k += 1;
    }
    Some(&pool[k])
}

/// Copies the casing pattern of `original` onto `word`: all caps, leading
/// capital, or unchanged.
pub fn match_casing(word: &str, original: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    let all_upper = letters.len() > 1 && letters.iter().all(|c| c.is_uppercase());
    if all_upper {
        return word.to_uppercase();
    }
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = word.chars();
        return match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        };
    }
    word.to_string()
}

/// A random ASCII string with the shape of `original`: uppercase letters map
/// to random uppercase letters, other alphabetic characters to random
/// lowercase letters, and everything else is kept in place.
pub fn rand_str<R: Rng + ?Sized>(original: &str, rng: &mut R) -> String {
    original
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                rng.random_range(b'A'..=b'Z') as char
            } else if c.is_alphabetic() {
                rng.random_range(b'a'..=b'z') as char
            } else {
                c
            }
        })
        .collect()
}

/// Gender polarity and popularity of a first name. Polarity is infinite when
/// one of the two frequencies is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NameBiasFeatures<F> {
    pub gender_polarity: F,
    pub popularity: u64,
}

pub fn bias_features<F: Float>(r: &NameRecord) -> Result<NameBiasFeatures<F>> {
    let (m, f) = (r.male_freq, r.female_freq);
    if m == 0 && f == 0 {
        return Err(Error::InvalidInput(format!(
            "{} has zero frequency",
            r.name
        )));
    }
    let gender_polarity = if m == 0 || f == 0 {
        F::infinity()
    } else {
        let (m, f) = (
            F::from(m).expect("u64 fits in a float"),
            F::from(f).expect("u64 fits in a float"),
        );
        (m / f).max(f / m)
    };
    Ok(NameBiasFeatures {
        gender_polarity,
        popularity: m + f,
    })
}
