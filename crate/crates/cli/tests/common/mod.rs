//! Synthetic name bank and datasets shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use renamebench::annotate::EntityType;
use renamebench::corpus::{write_dataset, AnswerSpan, Dataset, MrcInstance};
use renamebench::namebank::{GpeLevel, NameBank, NameRecord};

pub const FIRST_NAMES: &[(&str, u64, u64)] = &[
    ("Jack", 1000, 20),
    ("Morton", 900, 10),
    ("Henry", 800, 30),
    ("Samuel", 700, 5),
    ("Oprah", 0, 500),
    ("Alice", 10, 900),
    ("Grace", 15, 700),
    ("Maria", 5, 1000),
    ("Jordan", 300, 280),
    ("Taylor", 250, 300),
    ("Casey", 200, 210),
];

pub const LAST_NAMES: &[&str] = &[
    "Higgins", "Winfrey", "Baker", "Carter", "Lopez", "Nguyen", "Schmidt",
];

pub const GPES: &[(&str, GpeLevel)] = &[
    ("Iceland", GpeLevel::Country),
    ("Norway", GpeLevel::Country),
    ("Peru", GpeLevel::Country),
    ("Kenya", GpeLevel::Country),
    ("New Zealand", GpeLevel::Country),
    ("Georgia", GpeLevel::Country),
    ("Georgia", GpeLevel::State),
    ("Ohio", GpeLevel::State),
    ("Bavaria", GpeLevel::State),
    ("Quebec", GpeLevel::State),
    ("New Brunswick", GpeLevel::State),
    ("Boston", GpeLevel::City),
    ("Lyon", GpeLevel::City),
    ("Osaka", GpeLevel::City),
    ("Buenos Aires", GpeLevel::City),
];

pub const NNP_WORDS: &[&str] = &["zenith", "aurora", "vertex", "hufflepuff", "solstice"];

pub const RARE_WORDS: &[&str] = &[
    "Quixley", "Brontor", "Valtique", "Marnox", "Sivrel", "Dunquay",
];

pub const PTB_WORDS: &[&str] = &[
    "the",
    "of",
    "and",
    "a",
    "in",
    "to",
    "group",
    "company",
    "institute",
    "bank",
    "committee",
    "shares",
    "day",
    "city",
    "new",
];

pub fn bank() -> NameBank {
    let mut b = NameBank::new("fixture");
    for &(name, m, f) in FIRST_NAMES {
        b.add_first_name(NameRecord::new(name, m, f));
    }
    for &name in LAST_NAMES {
        b.add_last_name(name);
    }
    for &(name, level) in GPES {
        b.add_gpe(name, level);
    }
    for &w in NNP_WORDS {
        b.add_nnp(w);
    }
    for &w in PTB_WORDS {
        b.add_ptb_word(w);
    }
    b
}

pub fn write_bank(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let mut first = String::from("name,male_freq,female_freq\n");
    for (name, m, f) in FIRST_NAMES {
        writeln!(first, "{name},{m},{f}").unwrap();
    }
    std::fs::write(dir.join("first_names.csv"), first).unwrap();
    std::fs::write(dir.join("last_names.txt"), LAST_NAMES.join("\n")).unwrap();
    let mut gpe = String::from("name,level\n");
    for (name, level) in GPES {
        writeln!(gpe, "{name},{}", format!("{level:?}").to_lowercase()).unwrap();
    }
    std::fs::write(dir.join("gpe.csv"), gpe).unwrap();
    std::fs::write(dir.join("nnp.txt"), NNP_WORDS.join("\n")).unwrap();
    std::fs::write(dir.join("ptb_vocab.txt"), PTB_WORDS.join("\n")).unwrap();
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

fn instance(qid: String, question: String, passage: String, answer: &str) -> MrcInstance {
    let byte = passage.find(answer).expect("answer occurs in passage");
    let start = passage[..byte].chars().count();
    MrcInstance {
        qid,
        question,
        gold_answers: vec![AnswerSpan::new(
            answer,
            start,
            start + answer.chars().count(),
        )],
        passage,
        aliases: Vec::new(),
        split_tag: None,
    }
}

/// Instance `i` of a fixture whose answer is an entity of type `etype`.
/// Answers repeat in the passage and some questions mention them.
pub fn synthetic_instance(i: usize, etype: EntityType) -> MrcInstance {
    let qid = format!("{}-{i:05}", etype.as_str().to_lowercase());
    match etype {
        EntityType::Per => {
            let (first, _, _) = FIRST_NAMES[i % FIRST_NAMES.len()];
            let last = LAST_NAMES[(i / FIRST_NAMES.len() + i) % LAST_NAMES.len()];
            let city = GPES[11 + i % 4].0;
            if i.is_multiple_of(5) {
                let passage = format!(
                    "on day {i} the committee heard from {first} in {city}. later, {first} left early."
                );
                instance(
                    qid,
                    format!("who spoke to the committee on day {i}?"),
                    passage,
                    first,
                )
            } else {
                let name = format!("{first} {last}");
                let passage = format!(
                    "on day {i} the committee heard from {name} in {city}. later, {name} left early and the crowd cheered for {first}."
                );
                let question = if i % 4 == 1 {
                    format!("who spoke on day {i} before {last} left?")
                } else {
                    format!("who spoke to the committee on day {i}?")
                };
                instance(qid, question, passage, &name)
            }
        }
        EntityType::Org => {
            let nnp = capitalize(NNP_WORDS[i % NNP_WORDS.len()]);
            let rare = RARE_WORDS[(i / 2) % RARE_WORDS.len()];
            let country = GPES[i % 5].0;
            let org = match i % 4 {
                0 => format!("{nnp} Group"),
                1 => format!("{rare} Company"),
                2 => format!("Bank of {country}"),
                _ => format!("{nnp} {rare} Institute"),
            };
            let passage = format!(
                "shares of {org} rose sharply on day {i}. analysts expect {org} to expand again."
            );
            instance(
                qid,
                format!("which firm's shares rose on day {i}?"),
                passage,
                &org,
            )
        }
        EntityType::Gpe => {
            let gpe = GPES[i % GPES.len()].0;
            let passage = format!(
                "the delegation travelled to {gpe} on day {i} and stayed in {gpe} for a week."
            );
            instance(
                qid,
                format!("where did the delegation travel on day {i}?"),
                passage,
                gpe,
            )
        }
    }
}

/// `n` instances cycling through PER, ORG and GPE answers. Each type
/// counts its own instances so every type sees its whole vocabulary.
pub fn synthetic(n: usize) -> Dataset {
    let instances = (0..n)
        .map(|i| synthetic_instance(i / 3, EntityType::ALL[i % 3]))
        .collect();
    Dataset::new("synthetic", instances)
}

/// `n` instances whose answers all have type `etype`.
pub fn synthetic_of(n: usize, etype: EntityType) -> Dataset {
    Dataset::new(
        "synthetic",
        (0..n).map(|i| synthetic_instance(i, etype)).collect(),
    )
}

pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn with_bank(self) -> Self {
        write_bank(&self.path("bank"));
        self
    }

    pub fn write_dataset(&self, rel: &str, d: &Dataset) -> PathBuf {
        let p = self.path(rel);
        write_dataset(d, &p).unwrap();
        p
    }
}

pub fn renamebench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renamebench"))
        .args(args)
        .env_remove("RENAMEBENCH_DATA_DIR")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn assert_success(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(o),
        stderr(o)
    );
}

/// Every regular file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}
