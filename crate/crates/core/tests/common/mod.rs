#![allow(dead_code)]

use renamebench::corpus::{AnswerSpan, MrcInstance};
use renamebench::namebank::{GpeLevel, NameBank, NameRecord};

pub fn bank() -> NameBank {
    let mut b = NameBank::new("fixture");
    for (name, m, f) in [
        ("Jack", 900, 10),
        ("Morton", 400, 0),
        ("Oprah", 0, 300),
        ("Ada", 2, 500),
        ("Alice", 10, 800),
        ("Jordan", 100, 90),
        ("Casey", 40, 45),
    ] {
        b.add_first_name(NameRecord::new(name, m, f));
    }
    for name in ["Winfrey", "Lovelace", "Higgins", "Baker"] {
        b.add_last_name(name);
    }
    for (name, level) in [
        ("Iceland", GpeLevel::Country),
        ("Algeria", GpeLevel::Country),
        ("Georgia", GpeLevel::State),
        ("Georgia", GpeLevel::Country),
        ("Ohio", GpeLevel::State),
        ("New Brunswick", GpeLevel::State),
        ("Boston", GpeLevel::City),
        ("Denver", GpeLevel::City),
    ] {
        b.add_gpe(name, level);
    }
    for w in ["zenith", "aurora"] {
        b.add_nnp(w);
    }
    for w in ["the", "of", "company", "group", "in", "a"] {
        b.add_ptb_word(w);
    }
    b
}

/// Instance whose single gold answer is the first occurrence of `answer`.
pub fn instance(qid: &str, question: &str, passage: &str, answer: &str) -> MrcInstance {
    let byte = passage.find(answer).expect("answer occurs in passage");
    let start = passage[..byte].chars().count();
    MrcInstance {
        qid: qid.to_string(),
        question: question.to_string(),
        passage: passage.to_string(),
        gold_answers: vec![AnswerSpan::new(
            answer,
            start,
            start + answer.chars().count(),
        )],
        aliases: Vec::new(),
        split_tag: None,
    }
}
