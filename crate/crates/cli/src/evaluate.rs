use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use renamebench::annotate::{EntityType, InstanceMetadata};
use renamebench::corpus::{read_jsonl, Dataset};
use renamebench::evaluator::stats::{mean, summarize};
use renamebench::evaluator::{
    average_case_em, classify_dataset, evaluate, load_predictions, paired_significance, ErrorClass,
    ErrorCounts, EvalReport,
};
use renamebench::{Score, Summary};

use crate::commands::load;
use crate::{EvaluateArgs, FormatArg, UsageError};

struct SeedFile {
    name: String,
    data: Dataset,
    types: Option<HashMap<String, BTreeSet<EntityType>>>,
}

fn file_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    name.strip_suffix(".jsonl").unwrap_or(name).to_string()
}

fn load_seed_file(path: &Path) -> Result<SeedFile> {
    let name = file_stem(path);
    let data = load(path, FormatArg::Auto)?;
    let meta_path = path.with_file_name(format!("{name}.meta.jsonl"));
    let types = if meta_path.is_file() {
        let meta: Vec<InstanceMetadata> = read_jsonl(&meta_path)?;
        Some(
            meta.into_iter()
                .map(|m| {
                    let t = m.perturbable_types();
                    (m.qid, t)
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(SeedFile { name, data, types })
}

#[derive(Debug, Serialize)]
struct RunResult {
    predictions: String,
    average_em: Score,
    seed_em: Vec<Score>,
    reports: Vec<EvalReport>,
}

#[derive(Debug, Serialize)]
struct GroupResult {
    runs: Vec<RunResult>,
    em: Summary,
    em_display: String,
    error_counts: ErrorCounts,
    per_type_em: BTreeMap<EntityType, Score>,
    #[serde(skip)]
    correctness: Vec<Vec<bool>>,
}

#[derive(Debug, Serialize)]
struct Significance {
    p_value: Score,
    resamples: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    datasets: Vec<String>,
    system: GroupResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<GroupResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    significance: Option<Significance>,
}

fn display(s: &Summary) -> String {
    if s.n > 1 {
        format!("{:.1}±{:.1}", s.mean, s.std)
    } else {
        format!("{:.1}", s.mean)
    }
}

fn score_group(dirs: &[PathBuf], files: &[SeedFile]) -> Result<GroupResult> {
    // Instance order of the first seed file fixes the rows of the
    // correctness matrix; every cell is one (run, seed) pair.
    let order: Vec<&str> = files[0]
        .data
        .instances
        .iter()
        .map(|i| i.qid.as_str())
        .collect();
    let row_of: HashMap<&str, usize> = order.iter().enumerate().map(|(i, q)| (*q, i)).collect();
    let mut correctness = vec![Vec::new(); order.len()];
    let mut aligned = true;

    let mut runs = Vec::with_capacity(dirs.len());
    let mut counts = ErrorCounts::default();
    let mut per_type: BTreeMap<EntityType, Vec<Score>> = BTreeMap::new();
    for dir in dirs {
        let mut reports = Vec::with_capacity(files.len());
        for f in files {
            let path = dir.join(format!("{}.json", f.name));
            let preds = load_predictions(&path)?;
            let report = evaluate(&f.data, &preds, f.types.as_ref());
            counts.correct += report.error_counts.correct;
            counts.wrong_entity += report.error_counts.wrong_entity;
            counts.wrong_boundary += report.error_counts.wrong_boundary;
            for (t, em) in &report.per_type_em {
                per_type.entry(*t).or_default().push(*em);
            }
            let classes = classify_dataset(&f.data, &preds);
            if f.data.len() != order.len() {
                aligned = false;
            }
            for (inst, class) in f.data.instances.iter().zip(classes) {
                match row_of.get(inst.qid.as_str()) {
                    Some(&row) => correctness[row].push(class == ErrorClass::Correct),
                    None => aligned = false,
                }
            }
            reports.push(report);
        }
        let (average_em, seed_em) = average_case_em(&reports)?;
        runs.push(RunResult {
            predictions: dir.display().to_string(),
            average_em,
            seed_em,
            reports,
        });
    }
    let averages: Vec<Score> = runs.iter().map(|r| r.average_em).collect();
    let em = summarize(&averages).expect("at least one run");
    Ok(GroupResult {
        em_display: display(&em),
        em,
        error_counts: counts,
        per_type_em: per_type
            .into_iter()
            .map(|(t, v)| (t, mean(&v).expect("non-empty")))
            .collect(),
        runs,
        correctness: if aligned { correctness } else { Vec::new() },
    })
}

fn tsv_row(label: &str, g: &GroupResult, seeds: usize, p: Option<Score>) -> String {
    let per_type: Vec<String> = g
        .per_type_em
        .iter()
        .map(|(t, em)| format!("{t}={em:.1}"))
        .collect();
    format!(
        "{label}\t{}\t{seeds}\t{:.1}\t{:.1}\t{}\t{}\t{}\t{}\t{}\t{}",
        g.runs.len(),
        g.em.mean,
        g.em.std,
        g.em_display,
        g.error_counts.correct,
        g.error_counts.wrong_entity,
        g.error_counts.wrong_boundary,
        if per_type.is_empty() {
            "-".to_string()
        } else {
            per_type.join(",")
        },
        p.map_or_else(|| "-".to_string(), |p| format!("{p:.4}")),
    )
}

pub fn run(a: EvaluateArgs) -> Result<()> {
    let files = a
        .data
        .iter()
        .map(|p| load_seed_file(p))
        .collect::<Result<Vec<_>>>()?;
    let mut names = BTreeSet::new();
    for f in &files {
        if !names.insert(f.name.as_str()) {
            return Err(UsageError(format!("dataset {} given twice", f.name)).into());
        }
    }
    let system = score_group(&a.predictions, &files)?;
    let (compare, significance) = if a.compare.is_empty() {
        (None, None)
    } else {
        let other = score_group(&a.compare, &files)?;
        if system.correctness.is_empty() || other.correctness.is_empty() {
            bail!("seed files cover different instances; the paired test needs aligned seeds");
        }
        if a.predictions.len() != a.compare.len() {
            return Err(UsageError(format!(
                "paired test needs as many training runs per system ({} vs {})",
                a.predictions.len(),
                a.compare.len()
            ))
            .into());
        }
        let p = paired_significance(&system.correctness, &other.correctness, a.resamples, a.seed)?;
        (
            Some(other),
            Some(Significance {
                p_value: p,
                resamples: a.resamples,
                seed: a.seed,
            }),
        )
    };

    let p = significance.as_ref().map(|s| s.p_value);
    let mut tsv = String::from(
        "system\truns\tseeds\tem\tem_std\tem_display\tcorrect\twrong_entity\twrong_boundary\tper_type_em\tp_value\n",
    );
    tsv.push_str(&tsv_row("system", &system, files.len(), None));
    tsv.push('\n');
    if let Some(c) = &compare {
        tsv.push_str(&tsv_row("compare", c, files.len(), p));
        tsv.push('\n');
    }
    print!("{tsv}");

    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let evaluation = Evaluation {
            datasets: files.iter().map(|f| f.name.clone()).collect(),
            system,
            compare,
            significance,
        };
        let mut json = serde_json::to_string_pretty(&evaluation)?;
        json.push('\n');
        std::fs::write(out.join("evaluation.json"), json)
            .context("cannot write evaluation.json")?;
        std::fs::write(out.join("evaluation.tsv"), tsv).context("cannot write evaluation.tsv")?;
    }
    Ok(())
}
