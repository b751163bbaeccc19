//! MRQA-format datasets with character-offset bookkeeping.
//!
//! All offsets in this crate count Unicode scalar values (Rust `char`s), not
//! bytes, and ends are exclusive. MRQA `char_spans` carry inclusive ends and
//! are converted on load.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

impl AnswerSpan {
    pub fn new(text: impl Into<String>, char_start: usize, char_end: usize) -> Self {
        Self {
            text: text.into(),
            char_start,
            char_end,
        }
    }
}

/// One question over one passage with its gold answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MrcInstance {
    pub qid: String,
    pub question: String,
    pub passage: String,
    pub gold_answers: Vec<AnswerSpan>,
    /// Gold answer strings without passage offsets. They count for EM but are
    /// never used to locate entities.
    pub aliases: Vec<String>,
    pub split_tag: Option<String>,
}

impl MrcInstance {
    /// Distinct gold strings, offset-bearing answers first.
    pub fn gold_texts(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.gold_answers
            .iter()
            .map(|a| a.text.as_str())
            .chain(self.aliases.iter().map(String::as_str))
            .filter(|t| seen.insert(*t))
            .collect()
    }

    /// Checks the offset and non-emptiness invariants of a single instance.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Validation {
            qid: self.qid.clone(),
            message,
        };
        if self.qid.is_empty() {
            return Err(fail("empty qid".into()));
        }
        if self.gold_answers.is_empty() {
            return Err(fail("no gold answer spans".into()));
        }
        let passage = CharIndexed::new(&self.passage);
        for span in &self.gold_answers {
            if span.char_start >= span.char_end {
                return Err(fail(format!(
                    "empty or inverted span {}..{}",
                    span.char_start, span.char_end
                )));
            }
            match passage.slice(span.char_start, span.char_end) {
                Some(sub) if sub == span.text => {}
                Some(sub) => {
                    return Err(fail(format!(
                        "span {}..{} reads {:?}, answer text is {:?}",
                        span.char_start, span.char_end, sub, span.text
                    )))
                }
                None => {
                    return Err(fail(format!(
                        "span {}..{} outside passage of {} chars",
                        span.char_start,
                        span.char_end,
                        passage.len()
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub instances: Vec<MrcInstance>,
    pub source_name: String,
}

impl Dataset {
    pub fn new(source_name: impl Into<String>, instances: Vec<MrcInstance>) -> Self {
        Self {
            instances,
            source_name: source_name.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, qid: &str) -> Option<&MrcInstance> {
        self.instances.iter().find(|i| i.qid == qid)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.instances.len());
        for inst in &self.instances {
            inst.validate()?;
            if !seen.insert(inst.qid.as_str()) {
                return Err(Error::Validation {
                    qid: inst.qid.clone(),
                    message: "duplicate qid".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// Header line followed by one context per line with nested questions.
    MrqaJsonl,
    /// Header line followed by one flattened instance per line.
    PlainJsonl,
}

impl DatasetFormat {
    /// Guesses the format from the first two lines of a file.
    pub fn detect(path: &Path) -> Result<Self> {
        let reader = open_reader(path)?;
        let mut lines = reader.lines();
        let mut probe = |n: usize| -> Result<Option<serde_json::Value>> {
            match lines.next() {
                None => Ok(None),
                Some(line) => {
                    let line = line.map_err(|e| Error::io(path, e))?;
                    serde_json::from_str(&line)
                        .map(Some)
                        .map_err(|e| Error::parse(path, n, e))
                }
            }
        };
        let first = probe(1)?;
        let second = probe(2)?;
        let is_header =
            |v: &Option<serde_json::Value>| v.as_ref().and_then(|v| v.get("header")).is_some();
        let is_context =
            |v: &Option<serde_json::Value>| v.as_ref().and_then(|v| v.get("context")).is_some();
        if is_context(&second) || (!is_header(&first) && is_context(&first)) {
            return Ok(DatasetFormat::MrqaJsonl);
        }
        let header_format = first
            .as_ref()
            .and_then(|v| v.pointer("/header/format"))
            .and_then(|v| v.as_str());
        if is_header(&first) && header_format != Some(PLAIN_FORMAT_TAG) && second.is_none() {
            // A bare MRQA header with no contexts.
            return Ok(DatasetFormat::MrqaJsonl);
        }
        Ok(DatasetFormat::PlainJsonl)
    }
}

const PLAIN_FORMAT_TAG: &str = "plain_jsonl";

#[derive(Debug, Deserialize)]
struct MrqaHeaderLine {
    header: MrqaHeader,
}

#[derive(Debug, Default, Deserialize)]
struct MrqaHeader {
    #[serde(default)]
    dataset: Option<String>,
    #[serde(default)]
    split: Option<String>,
}

#[derive(Debug, Deserialize)]
struct MrqaContext {
    context: String,
    qas: Vec<MrqaQa>,
}

#[derive(Debug, Deserialize)]
struct MrqaQa {
    qid: String,
    question: String,
    #[serde(default)]
    detected_answers: Vec<MrqaDetected>,
    #[serde(default)]
    answers: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct MrqaDetected {
    text: String,
    char_spans: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlainHeaderLine {
    header: PlainHeader,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlainHeader {
    format: String,
    source: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlainRecord {
    qid: String,
    question: String,
    passage: String,
    answers: Vec<AnswerSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<String>,
}

fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Read> = if is_gzip(path) {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(inner)))
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext == "gz")
}

fn stem_name(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

/// Reads a dataset, transparently decompressing `.gz` files, and validates
/// every instance.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let reader = open_reader(path)?;
    let dataset = match format {
        DatasetFormat::MrqaJsonl => read_mrqa(reader, path)?,
        DatasetFormat::PlainJsonl => read_plain(reader, path)?,
    };
    dataset.validate()?;
    Ok(dataset)
}

fn read_mrqa(reader: impl BufRead, path: &Path) -> Result<Dataset> {
    let mut source_name = stem_name(path);
    let mut split_tag = None;
    let mut instances = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 1 {
            let header: MrqaHeaderLine =
                serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e))?;
            if let Some(name) = header.header.dataset {
                source_name = name;
            }
            split_tag = header.header.split;
            continue;
        }
        let ctx: MrqaContext =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e))?;
        for qa in ctx.qas {
            let mut gold_answers = Vec::new();
            for det in &qa.detected_answers {
                for &[start, end_inclusive] in &det.char_spans {
                    if end_inclusive < start {
                        return Err(Error::Validation {
                            qid: qa.qid.clone(),
                            message: format!("inverted char span [{start}, {end_inclusive}]"),
                        });
                    }
                    let span = AnswerSpan::new(det.text.clone(), start, end_inclusive + 1);
                    if !gold_answers.contains(&span) {
                        gold_answers.push(span);
                    }
                }
            }
            let aliases = qa
                .answers
                .into_iter()
                .filter(|a| !gold_answers.iter().any(|g| &g.text == a))
                .fold(Vec::new(), |mut acc, a| {
                    if !acc.contains(&a) {
                        acc.push(a);
                    }
                    acc
                });
            instances.push(MrcInstance {
                qid: qa.qid,
                question: qa.question,
                passage: ctx.context.clone(),
                gold_answers,
                aliases,
                split_tag: split_tag.clone(),
            });
        }
    }
    Ok(Dataset::new(source_name, instances))
}

fn read_plain(reader: impl BufRead, path: &Path) -> Result<Dataset> {
    let mut source_name = stem_name(path);
    let mut instances = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 1 {
            if let Ok(header) = serde_json::from_str::<PlainHeaderLine>(&line) {
                source_name = header.header.source;
                continue;
            }
        }
        let rec: PlainRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno, e))?;
        instances.push(MrcInstance {
            qid: rec.qid,
            question: rec.question,
            passage: rec.passage,
            gold_answers: rec.answers,
            aliases: rec.aliases,
            split_tag: rec.split,
        });
    }
    Ok(Dataset::new(source_name, instances))
}

/// Writes `d` as plain JSONL (header line first). A `.gz` suffix selects gzip.
pub fn write_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_plain(d, &mut enc).map_err(|e| Error::io(path, e))?;
        enc.finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| Error::io(path, e))
    } else {
        let mut w = BufWriter::new(file);
        write_plain(d, &mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Serializes `d` in the plain JSONL layout to any writer.
pub fn write_plain(d: &Dataset, w: &mut impl Write) -> std::io::Result<()> {
    let header = PlainHeaderLine {
        header: PlainHeader {
            format: PLAIN_FORMAT_TAG.into(),
            source: d.source_name.clone(),
        },
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for inst in &d.instances {
        let rec = PlainRecord {
            qid: inst.qid.clone(),
            question: inst.question.clone(),
            passage: inst.passage.clone(),
            answers: inst.gold_answers.clone(),
            aliases: inst.aliases.clone(),
            split: inst.split_tag.clone(),
        };
        serde_json::to_writer(&mut *w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes one JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = open_reader(path)?;
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e))?);
    }
    Ok(out)
}

/// A token with its character range in the parent string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

impl TokenSpan {
    pub fn has_alphanumeric(&self) -> bool {
        self.text.chars().any(char::is_alphanumeric)
    }
}

pub(crate) fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Whitespace tokenization with leading and trailing punctuation split off,
/// one character per punctuation token. Inner punctuation stays attached, so
/// `"U.S.-based!"` yields `["U.S.-based", "!"]`.
pub fn tokenize(s: &str) -> Vec<TokenSpan> {
    let chars: Vec<char> = s.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let end = i;
        let mut lo = start;
        while lo < end && is_punct(chars[lo]) {
            tokens.push(token_at(&chars, lo, lo + 1));
            lo += 1;
        }
        let mut hi = end;
        while hi > lo && is_punct(chars[hi - 1]) {
            hi -= 1;
        }
        if lo < hi {
            tokens.push(token_at(&chars, lo, hi));
        }
        for p in hi..end {
            tokens.push(token_at(&chars, p, p + 1));
        }
    }
    tokens
}

fn token_at(chars: &[char], start: usize, end: usize) -> TokenSpan {
    TokenSpan {
        text: chars[start..end].iter().collect(),
        char_start: start,
        char_end: end,
    }
}

/// A string with a precomputed char → byte table for repeated slicing by
/// character offsets.
#[derive(Debug, Clone)]
pub struct CharIndexed<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharIndexed<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        Self { text, bytes }
    }

    /// Length in chars.
    pub fn len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_str(&self) -> &'a str {
        self.text
    }

    pub fn byte_offset(&self, char_idx: usize) -> Option<usize> {
        self.bytes.get(char_idx).copied()
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.len() {
            return None;
        }
        Some(&self.text[self.bytes[start]..self.bytes[end]])
    }
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}
