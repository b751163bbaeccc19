mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use renamebench::annotate::{annotate_dataset, EntitySource, EntityType, SpanType};
use renamebench::corpus::{
    load_dataset, tokenize, write_dataset, AnswerSpan, Dataset, DatasetFormat, MrcInstance,
};
use renamebench::namebank::{classify_gender, rand_str, NameRecord, PerturbationSource};
use renamebench::perturber::{perturb_dataset, PerturbConfig};

fn mirror(t: SpanType) -> SpanType {
    match t {
        SpanType::FirstNameMale => SpanType::FirstNameFemale,
        SpanType::FirstNameFemale => SpanType::FirstNameMale,
        other => other,
    }
}

fn arb_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            4 => proptest::char::range('a', 'z'),
            2 => proptest::char::range('A', 'Z'),
            2 => Just(' '),
            1 => proptest::sample::select(vec!['.', ',', '-', '\'', '!', '(', ')', '"']),
            1 => proptest::sample::select(vec!['é', 'ß', 'Ø', '中', '\t', '\n', '7']),
        ],
        0..60,
    )
    .prop_map(|v| v.into_iter().collect())
}

fn arb_instance(i: usize) -> impl Strategy<Value = MrcInstance> {
    (
        arb_text(),
        arb_text(),
        "[A-Za-zé中]{1,8}",
        arb_text(),
        proptest::option::of("[a-z]{1,5}"),
    )
        .prop_map(move |(question, before, answer, after, split)| {
            let start = before.chars().count();
            let end = start + answer.chars().count();
            MrcInstance {
                qid: format!("q{i}"),
                question,
                passage: format!("{before}{answer}{after}"),
                gold_answers: vec![AnswerSpan::new(answer.clone(), start, end)],
                aliases: if i.is_multiple_of(2) {
                    vec![format!("{answer}!")]
                } else {
                    Vec::new()
                },
                split_tag: split,
            }
        })
}

proptest! {
    #[test]
    fn rand_str_keeps_shape(s in arb_text(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = rand_str(&s, &mut rng);
        let (a, b): (Vec<char>, Vec<char>) = (s.chars().collect(), out.chars().collect());
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            if x.is_alphabetic() {
                prop_assert!(y.is_ascii_alphabetic());
                prop_assert_eq!(x.is_uppercase(), y.is_uppercase());
            } else {
                prop_assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn tokens_are_exact_ordered_and_cover_non_space(s in arb_text()) {
        let chars: Vec<char> = s.chars().collect();
        let tokens = tokenize(&s);
        prop_assert_eq!(&tokens, &tokenize(&s));
        let mut last_end = 0;
        for t in &tokens {
            prop_assert!(t.char_start >= last_end && t.char_start < t.char_end);
            prop_assert_eq!(chars[t.char_start..t.char_end].iter().collect::<String>(), t.text.clone());
            prop_assert!(!t.text.chars().any(char::is_whitespace));
            last_end = t.char_end;
        }
        let joined: String = tokens.iter().map(|t| t.text.as_str()).collect();
        let dense: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, dense);
    }

    #[test]
    fn gender_rule_is_symmetric(m in 0u64..5000, f in 0u64..5000) {
        let a = classify_gender(&NameRecord::new("x", m, f));
        let b = classify_gender(&NameRecord::new("x", f, m));
        prop_assert_eq!(a, mirror(b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_is_identity(
        instances in (0usize..6).prop_flat_map(|n| {
            (0..n).map(arb_instance).collect::<Vec<_>>()
        }),
        gz in any::<bool>(),
    ) {
        let d = Dataset::new("prop", instances);
        d.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(if gz { "d.jsonl.gz" } else { "d.jsonl" });
        write_dataset(&d, &p).unwrap();
        prop_assert_eq!(load_dataset(&p, DatasetFormat::PlainJsonl).unwrap(), d);
    }

    #[test]
    fn perturbation_keeps_context_and_gold(
        picks in proptest::collection::vec((0usize..6, 0usize..4, 0usize..3), 1..12),
        base_seed in any::<u64>(),
        randstr in any::<bool>(),
    ) {
        const FIRST: [&str; 6] = ["Jack", "Morton", "Oprah", "Ada", "Alice", "Jordan"];
        const LAST: [&str; 4] = ["Winfrey", "Lovelace", "Higgins", "Baker"];
        let instances: Vec<MrcInstance> = picks
            .iter()
            .enumerate()
            .map(|(i, &(f, l, shape))| {
                let name = match shape {
                    0 => FIRST[f].to_string(),
                    _ => format!("{} {}", FIRST[f], LAST[l]),
                };
                let passage = if shape == 2 {
                    format!("Ms. {name} spoke; ({name}) and {}'s aide, Jackson, left.", FIRST[f])
                } else {
                    format!("{name} spoke first. Later {name} met Jackson again.")
                };
                common::instance(&format!("p{i}"), &format!("Did {} speak?", FIRST[f]), &passage, &name)
            })
            .collect();
        let d = Arc::new(Dataset::new("prop", instances));
        let b = common::bank();
        let meta = annotate_dataset(&d, EntitySource::Builtin(&b), &b).metadata;
        let src = if randstr {
            PerturbationSource::RandStr
        } else {
            PerturbationSource::DbName(b.db_pools())
        };
        let cfg = PerturbConfig {
            types: BTreeSet::from([EntityType::Per]),
            n_seeds: 2,
            base_seed,
            failure_budget: 0.0,
        };
        let run = perturb_dataset(&d, &meta, &src, &cfg).unwrap();
        prop_assert_eq!(run.subset_size, d.len());
        for set in &run.sets {
            for ((p, plan), map) in set.instances.instances.iter().zip(&set.plans).zip(&set.offset_maps) {
                let o = d.get(&p.qid).unwrap();
                p.validate().unwrap();
                for e in plan.active() {
                    prop_assert_ne!(&e.original, &e.replacement);
                }
                // Outside the edited regions both passages agree char for char.
                let (oc, pc): (Vec<char>, Vec<char>) = (o.passage.chars().collect(), p.passage.chars().collect());
                let (mut oi, mut pi) = (0, 0);
                let mut orig_rest = String::new();
                let mut new_rest = String::new();
                for e in &map.edits {
                    orig_rest.extend(&oc[oi..e.orig_start]);
                    new_rest.extend(&pc[pi..e.new_start]);
                    let before: String = oc[e.orig_start..e.orig_end].iter().collect();
                    let after: String = pc[e.new_start..e.new_end].iter().collect();
                    prop_assert!(plan.active().any(|x| x.original == before && x.replacement == after));
                    oi = e.orig_end;
                    pi = e.new_end;
                }
                orig_rest.extend(&oc[oi..]);
                new_rest.extend(&pc[pi..]);
                prop_assert_eq!(orig_rest, new_rest);
                prop_assert!(p.passage.contains("Jackson"));
            }
        }
    }
}
