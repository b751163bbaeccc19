use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::Serialize;

use renamebench::annotate::{
    annotate_dataset, parse_type_set, passage_entities, recognize_answer_entities, subset_counts,
    type_set_label, AnnotationIndex, EntitySource, EntityType, InstanceMetadata, SubsetCounts,
};
use renamebench::corpus::{
    load_dataset, read_jsonl, write_dataset, write_jsonl, Dataset, DatasetFormat,
};
use renamebench::evaluator::{
    bias_report, entity_tokens, lexical_baseline_predict, unseen_token_pct,
};
use renamebench::masker::{
    emit_masked_corpus, MaskingPolicy, DEFAULT_ENTITY_PROB, DEFAULT_GEOMETRIC_P, DEFAULT_MAX_SPAN,
};
use renamebench::namebank::{
    build_indist_pool, NameBank, NameBankPaths, PerturbationSource, SourceKind,
};
use renamebench::perturber::{
    perturb_dataset, sample_audit_from, summarize_audit, PerturbConfig, PerturbationPlan,
    SkipRecord,
};
use renamebench::seed::{perturbation_seed, task_rng};
use renamebench::Score;

use crate::config::ConfigFile;
use crate::{
    AuditSampleArgs, AuditSummarizeArgs, BiasArgs, DomainShiftArgs, FormatArg, MaskArgs,
    PerturbArgs, PolicyArg, PredictArgs, UsageError, DATA_DIR_ENV,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_types(s: &str) -> Result<BTreeSet<EntityType>> {
    parse_type_set(s).map_err(|e| usage(e.to_string()))
}

pub(crate) fn load(path: &Path, format: FormatArg) -> Result<Dataset> {
    if !path.is_file() {
        return Err(usage(format!("dataset file not found: {}", path.display())));
    }
    let format = match format {
        FormatArg::Mrqa => DatasetFormat::MrqaJsonl,
        FormatArg::Plain => DatasetFormat::PlainJsonl,
        FormatArg::Auto => DatasetFormat::detect(path)?,
    };
    Ok(load_dataset(path, format)?)
}

fn parse_format(s: &str) -> Result<FormatArg> {
    match s.to_ascii_lowercase().as_str() {
        "auto" => Ok(FormatArg::Auto),
        "mrqa" => Ok(FormatArg::Mrqa),
        "plain" => Ok(FormatArg::Plain),
        other => Err(usage(format!("unknown dataset format {other:?}"))),
    }
}

/// Resolves the name-bank directory and loads it. Missing files are usage
/// errors that name the path.
fn name_bank(flag: Option<PathBuf>, config: Option<PathBuf>) -> Result<NameBank> {
    let dir = flag
        .or(config)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| {
            usage(format!(
                "no name bank given (use --name-bank or set {DATA_DIR_ENV})"
            ))
        })?;
    let paths = NameBankPaths::in_dir(&dir);
    if let Some(missing) = paths.all().into_iter().find(|p| !p.is_file()) {
        return Err(usage(format!(
            "name bank file not found: {}",
            missing.display()
        )));
    }
    let origin = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "bank".into());
    Ok(NameBank::load(&paths, origin)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(
        || p.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn dataset_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    let name = name
        .strip_suffix(".jsonl")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(name);
    name.to_string()
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    dataset: String,
    dataset_source: String,
    perturbation_source: SourceKind,
    types: String,
    name_bank: String,
    annotations: Option<String>,
    base_seed: u64,
    n_seeds: usize,
    seeds: Vec<u64>,
    failure_budget: f64,
    instances: usize,
    annotation_missing: usize,
    subset_counts: SubsetCounts,
    subset_size: usize,
    output_size: usize,
    question_replacements: usize,
    files: Vec<String>,
    dropped_qids: Vec<String>,
    skips: Vec<SkipRecord>,
}

pub fn perturb(a: PerturbArgs) -> Result<()> {
    let cfg = ConfigFile::load_opt(a.config.as_deref())?;
    let dataset_path = a
        .dataset
        .or(cfg.dataset)
        .ok_or_else(|| usage("no dataset given (use --dataset or the config key `dataset`)"))?;
    let format = match (a.format, cfg.format) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_format(&s)?,
        (None, None) => FormatArg::Auto,
    };
    let types = parse_types(a.types.as_deref().or(cfg.types.as_deref()).unwrap_or("MIX"))?;
    let source: SourceKind = a
        .source
        .as_deref()
        .or(cfg.source.as_deref())
        .unwrap_or("dbname")
        .parse()
        .map_err(|e: renamebench::Error| usage(e.to_string()))?;
    let n_seeds = a.n_seeds.or(cfg.n_seeds).unwrap_or(5);
    if n_seeds == 0 {
        return Err(usage("n_seeds must be at least 1"));
    }
    let failure_budget = a.failure_budget.or(cfg.failure_budget).unwrap_or(0.01);
    if !(0.0..=1.0).contains(&failure_budget) {
        return Err(usage(format!(
            "failure budget {failure_budget} is not a fraction"
        )));
    }
    let base_seed = a.base_seed.or(cfg.base_seed).unwrap_or(0);
    let out = a.output_dir.or(cfg.output_dir).ok_or_else(|| {
        usage("no output directory given (use --out or the config key `output_dir`)")
    })?;
    let stem = a
        .stem
        .or(cfg.stem)
        .unwrap_or_else(|| dataset_stem(&dataset_path));
    let emit_oracle = a.emit_oracle || cfg.emit_oracle.unwrap_or(false);
    let annotations = a.annotations.or(cfg.annotations);
    let bank = name_bank(a.name_bank, cfg.name_bank)?;

    let dataset = Arc::new(load(&dataset_path, format)?);
    log::info!(
        "loaded {} instances from {}",
        dataset.len(),
        dataset_path.display()
    );
    let index = annotations
        .as_deref()
        .map(AnnotationIndex::load)
        .transpose()?;
    let entity_source = match &index {
        Some(idx) => EntitySource::Annotations(idx),
        None => EntitySource::Builtin(&bank),
    };
    let outcome = annotate_dataset(&dataset, entity_source, &bank);
    let counts = subset_counts(&outcome.metadata);
    log::info!("perturbable subsets: {counts:?}");

    let src = match source {
        SourceKind::InDistName => {
            PerturbationSource::InDistName(build_indist_pool(&outcome.metadata))
        }
        SourceKind::DbName => PerturbationSource::DbName(bank.db_pools()),
        SourceKind::RandStr => PerturbationSource::RandStr,
    };
    let config = PerturbConfig {
        types: types.clone(),
        n_seeds,
        base_seed,
        failure_budget,
    };
    let run = perturb_dataset(&dataset, &outcome.metadata, &src, &config)?;
    for s in &run.skips {
        log::warn!("seed {}: dropped {}: {}", s.seed_index, s.qid, s.reason);
    }

    create_dir(&out)?;
    let mut files = Vec::new();
    // The unperturbed subset, restricted to the instances kept in every seed.
    let kept: HashSet<&str> = run.sets[0]
        .instances
        .instances
        .iter()
        .map(|i| i.qid.as_str())
        .collect();
    let original_name = format!("{stem}.original.{}", type_set_label(&types));
    let original = Dataset::new(
        dataset.source_name.clone(),
        dataset
            .instances
            .iter()
            .filter(|i| kept.contains(i.qid.as_str()))
            .cloned()
            .collect(),
    );
    let original_meta: Vec<&InstanceMetadata> = outcome
        .metadata
        .iter()
        .filter(|m| kept.contains(m.qid.as_str()))
        .collect();
    write_dataset(&original, &out.join(format!("{original_name}.jsonl")))?;
    write_jsonl(
        &out.join(format!("{original_name}.meta.jsonl")),
        &original_meta,
    )?;
    files.push(format!("{original_name}.jsonl"));
    files.push(format!("{original_name}.meta.jsonl"));

    for set in &run.sets {
        set.write(&out, &stem)?;
        let name = set.file_stem(&stem);
        files.extend(["jsonl", "plans.jsonl", "meta.jsonl"].map(|ext| format!("{name}.{ext}")));
        if emit_oracle {
            let oracle: BTreeMap<String, String> = set.oracle_predictions().into_iter().collect();
            write_json(&out.join(format!("{name}.oracle.json")), &oracle)?;
            files.push(format!("{name}.oracle.json"));
        }
    }

    let manifest = Manifest {
        tool: "renamebench",
        version: env!("CARGO_PKG_VERSION"),
        dataset: file_name(&dataset_path),
        dataset_source: dataset.source_name.clone(),
        perturbation_source: source,
        types: type_set_label(&types),
        name_bank: bank_label(&bank),
        annotations: annotations.map(|p| file_name(&p)),
        base_seed,
        n_seeds,
        seeds: (0..n_seeds)
            .map(|i| perturbation_seed(base_seed, i))
            .collect(),
        failure_budget,
        instances: dataset.len(),
        annotation_missing: outcome.missing_qids.len(),
        subset_counts: counts,
        subset_size: run.subset_size,
        output_size: kept.len(),
        question_replacements: run.question_replacements,
        files,
        dropped_qids: run.dropped_qids.clone(),
        skips: run.skips.clone(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    println!(
        "{} of {} instances perturbed into {} seed(s) under {}",
        manifest.output_size,
        manifest.instances,
        n_seeds,
        out.display()
    );
    Ok(())
}

fn bank_label(bank: &NameBank) -> String {
    format!(
        "{} ({} first names)",
        bank.origin_tag,
        bank.first_names().len()
    )
}

fn seed_index_from_name(path: &Path) -> usize {
    let name = dataset_stem(path);
    name.rsplit('.')
        .find_map(|part| part.strip_prefix("seed").and_then(|n| n.parse().ok()))
        .unwrap_or(0)
}

pub fn audit_sample(a: AuditSampleArgs) -> Result<()> {
    let types = parse_types(&a.types)?;
    let base = load(&a.base, FormatArg::Auto)?;
    let perturbed = load(&a.perturbed, FormatArg::Plain)?;
    let plans_path = a.plans.unwrap_or_else(|| {
        a.perturbed
            .with_file_name(format!("{}.plans.jsonl", dataset_stem(&a.perturbed)))
    });
    let plans: Vec<PerturbationPlan> = read_jsonl(&plans_path)?;
    let seed_index = seed_index_from_name(&a.perturbed);
    create_dir(&a.out)?;
    for etype in types {
        let mut rng = task_rng(a.seed, &format!("audit-{etype}"));
        let sample = sample_audit_from(
            &base,
            &perturbed.instances,
            &plans,
            seed_index,
            a.k,
            etype,
            &mut rng,
        )?;
        let tsv = a.out.join(format!("audit.{etype}.tsv"));
        std::fs::write(&tsv, sample.to_tsv())
            .with_context(|| format!("cannot write {}", tsv.display()))?;
        let md = a.out.join(format!("audit.{etype}.md"));
        std::fs::write(&md, sample.to_markdown())
            .with_context(|| format!("cannot write {}", md.display()))?;
        println!("{}\t{} rows", tsv.display(), sample.rows.len());
    }
    Ok(())
}

fn fmt_pct(p: Option<f64>) -> String {
    p.map_or_else(|| "-".into(), |v| format!("{v:.1}"))
}

pub fn audit_summarize(a: AuditSummarizeArgs) -> Result<()> {
    println!("sheet\trows\tspan_identification_pct\tsubstitution_pct");
    for sheet in &a.sheets {
        let text = std::fs::read_to_string(sheet)
            .with_context(|| format!("cannot read {}", sheet.display()))?;
        let s = summarize_audit(&text).with_context(|| sheet.display().to_string())?;
        println!(
            "{}\t{}\t{}\t{}",
            sheet.display(),
            s.rows,
            fmt_pct(s.span_identification_pct),
            fmt_pct(s.substitution_pct)
        );
    }
    Ok(())
}

fn parse_policy(s: &str) -> Result<PolicyArg> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "vanilla" => Ok(PolicyArg::Vanilla),
        "whole_word" | "wholeword" => Ok(PolicyArg::WholeWord),
        "span" => Ok(PolicyArg::Span),
        "entity" => Ok(PolicyArg::Entity),
        other => Err(usage(format!("unknown masking policy {other:?}"))),
    }
}

pub fn mask(a: MaskArgs) -> Result<()> {
    let cfg = ConfigFile::load_opt(a.config.as_deref())?.mask;
    let input = a
        .input
        .or(cfg.input)
        .ok_or_else(|| usage("no input given (use --input)"))?;
    let output = a
        .output
        .or(cfg.output)
        .ok_or_else(|| usage("no output given (use --output)"))?;
    let policy = match (a.policy, cfg.policy) {
        (Some(p), _) => p,
        (None, Some(s)) => parse_policy(&s)?,
        (None, None) => return Err(usage("no masking policy given (use --policy)")),
    };
    let rate = a.rate.or(cfg.rate).unwrap_or(0.15);
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(usage(format!("masking rate {rate} must be in (0, 1]")));
    }
    let rate_bp = (rate * 10_000.0).round() as u32;
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let geometric_p = a
        .geometric_p
        .or(cfg.geometric_p)
        .unwrap_or(DEFAULT_GEOMETRIC_P);
    let max_span = a.max_span.or(cfg.max_span).unwrap_or(DEFAULT_MAX_SPAN);
    let policy = match policy {
        PolicyArg::Vanilla => MaskingPolicy::Vanilla,
        PolicyArg::WholeWord => MaskingPolicy::WholeWord,
        PolicyArg::Span => MaskingPolicy::Span {
            geometric_p,
            max_span,
        },
        PolicyArg::Entity => MaskingPolicy::Entity {
            entity_prob: a
                .entity_prob
                .or(cfg.entity_prob)
                .unwrap_or(DEFAULT_ENTITY_PROB),
            geometric_p,
            max_span,
            per_sequence: a.per_sequence || cfg.per_sequence.unwrap_or(false),
        },
    };
    policy.validate().map_err(|e| usage(e.to_string()))?;

    let reader = BufReader::new(
        File::open(&input).with_context(|| format!("cannot open {}", input.display()))?,
    );
    let writer = BufWriter::new(
        File::create(&output).with_context(|| format!("cannot create {}", output.display()))?,
    );
    let stats = emit_masked_corpus(reader, &policy, rate_bp, seed, writer)
        .with_context(|| format!("masking {}", input.display()))?;
    if stats.degenerate > 0 {
        log::warn!("{} sequence(s) too short to mask", stats.degenerate);
    }
    println!(
        "{} sequences written to {}",
        stats.records,
        output.display()
    );
    Ok(())
}

fn answer_and_passage_tokens(
    train: &Dataset,
    source: EntitySource<'_>,
    types: &BTreeSet<EntityType>,
) -> (HashSet<String>, HashSet<String>) {
    let mut answers = HashSet::new();
    let mut passages = HashSet::new();
    for inst in &train.instances {
        let found = recognize_answer_entities(inst, source).unwrap_or_default();
        answers.extend(entity_tokens(
            found
                .iter()
                .filter(|m| types.contains(&m.etype))
                .map(|m| m.surface.as_str()),
        ));
        let in_passage = passage_entities(inst, source);
        passages.extend(entity_tokens(
            in_passage
                .iter()
                .filter(|m| types.contains(&m.etype))
                .map(|m| m.surface.as_str()),
        ));
    }
    (answers, passages)
}

#[derive(Debug, Serialize)]
struct DomainShiftRow {
    test_meta: String,
    types: String,
    unseen_vs_train_answers: String,
    unseen_vs_train_passages: String,
    test_tokens: usize,
}

pub fn domain_shift(a: DomainShiftArgs) -> Result<()> {
    let types = parse_types(&a.types)?;
    let train = load(&a.train, a.train_format)?;
    let (answers, passages) = match &a.train_annotations {
        Some(path) => {
            let idx = AnnotationIndex::load(path)?;
            answer_and_passage_tokens(&train, EntitySource::Annotations(&idx), &types)
        }
        None => {
            let bank = name_bank(a.name_bank.clone(), None)?;
            answer_and_passage_tokens(&train, EntitySource::Builtin(&bank), &types)
        }
    };
    let mut rows = Vec::new();
    for path in &a.test_meta {
        let meta: Vec<InstanceMetadata> = read_jsonl(path)?;
        let s = unseen_token_pct(&meta, &types, &answers, &passages)
            .with_context(|| path.display().to_string())?;
        rows.push(DomainShiftRow {
            test_meta: path.display().to_string(),
            types: type_set_label(&types),
            unseen_vs_train_answers: format!("{:.1}", s.unseen_vs_train_answers),
            unseen_vs_train_passages: format!("{:.1}", s.unseen_vs_train_passages),
            test_tokens: s.test_tokens,
        });
    }
    println!("test_meta\ttypes\tunseen_vs_train_answers\tunseen_vs_train_passages\ttest_tokens");
    for r in &rows {
        println!(
            "{}\t{}\t{}\t{}\t{}",
            r.test_meta,
            r.types,
            r.unseen_vs_train_answers,
            r.unseen_vs_train_passages,
            r.test_tokens
        );
    }
    if let Some(out) = &a.out {
        write_json(out, &rows)?;
    }
    Ok(())
}

pub fn bias(a: BiasArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.per_name_em)
        .with_context(|| format!("cannot read {}", a.per_name_em.display()))?;
    let per_name: BTreeMap<String, Score> = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse {}", a.per_name_em.display()))?;
    let bank = name_bank(a.name_bank, None)?;
    let report = bias_report(&per_name, &bank)?;
    let flagged = report.rows.iter().filter(|r| r.flagged).count();
    if flagged > 0 {
        log::warn!("{flagged} name(s) are not in the name bank and were left out");
    }
    println!("ranking\ttop20_em\tbottom10_em");
    println!(
        "polarity\t{}\t{}",
        fmt_pct(report.top20_polarity_em),
        fmt_pct(report.bottom10_polarity_em)
    );
    println!(
        "popularity\t{}\t{}",
        fmt_pct(report.top20_popularity_em),
        fmt_pct(report.bottom10_popularity_em)
    );
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let d = load(&a.data, a.format)?;
    let preds: BTreeMap<&str, String> = d
        .instances
        .iter()
        .map(|i| (i.qid.as_str(), lexical_baseline_predict(i)))
        .collect();
    write_json(&a.out, &preds)?;
    println!("{} predictions written to {}", preds.len(), a.out.display());
    Ok(())
}
