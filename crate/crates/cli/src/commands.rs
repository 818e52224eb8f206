use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lexvote::experiment::{
    self, fit_with_params, read_combinations_csv, read_grid_csv, read_meta, read_run_accuracy_csv, stats_row,
    CombinationStats, Provenance, Report, RunAccuracy, SubsetAccuracy, DEFAULT_COMBINATION_CAP,
};
use lexvote::label_models::{Estimator, FitConfig, LabelModel, DEFAULT_MIN_MOMENT, ESTIMATOR_NAMES};
use lexvote::prompting::{
    Completer, HttpTransport, PromptType, RetryPolicy, RunConfig, RunRecord, RunStore, StoreFilter, Temperature,
    API_KEY_ENV,
};
use lexvote::votes::io::{gold_labels, read_dataset};
use lexvote::votes::{accuracy, build_vote_matrix, validate_matrix, EntailmentExample, Grouping, Labels, VoteMatrix};

use crate::config::{parse_sizes, split_list, Settings};
use crate::{lib_err, AggregateArgs, CliError, ReportArgs, SweepArgs, ValidateArgs};

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

fn load_dataset(path: &Path) -> Result<Vec<EntailmentExample>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("cannot read dataset {}: {e}", path.display())))?;
    read_dataset(BufReader::new(file)).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn open_store(path: &Path) -> Result<RunStore, CliError> {
    RunStore::open_existing(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn parse_temperatures(raw: Option<String>) -> Result<Option<Vec<Temperature>>, CliError> {
    raw.map(|r| split_list(&r).iter().map(|t| t.parse::<Temperature>().map_err(lib_err)).collect())
        .transpose()
}

fn prompt_type(settings: &Settings, flag: Option<String>) -> Result<PromptType, CliError> {
    settings
        .pick("prompt_type", flag)?
        .map_or(Ok(PromptType::ReasonThenAnswer), |p: String| p.parse().map_err(lib_err))
}

pub fn sweep(settings: &Settings, a: SweepArgs) -> Result<(), CliError> {
    let dataset_path: PathBuf = settings.require("dataset", a.dataset)?;
    let store_path: PathBuf = settings.require("store", a.store)?;
    let replay = settings.flag("replay_only", a.replay_only)?;
    let mut config = RunConfig::new(
        parse_temperatures(settings.pick("temperatures", a.temperatures)?)?.unwrap_or_else(Temperature::decile_grid),
        settings.pick("runs", a.runs)?.unwrap_or(10),
        settings.pick("model", a.model)?.unwrap_or_else(|| DEFAULT_MODEL.to_string()),
    );
    config.prompt_type = prompt_type(settings, a.prompt_type)?;
    if let Some(n) = settings.pick("max_parallel", a.max_parallel)? {
        config.max_parallel_requests = n;
    }
    if let Some(n) = settings.pick("max_attempts", a.max_attempts)? {
        config.retry = RetryPolicy { max_attempts: n, ..RetryPolicy::default() };
    }
    config.validate().map_err(lib_err)?;
    let base_url: Option<String> = settings.pick("base_url", a.base_url)?;
    if !replay && base_url.is_none() {
        return Err(CliError::Usage("live sweep needs --base-url (or pass --replay-only)".into()));
    }

    let dataset = load_dataset(&dataset_path)?;
    let store = Arc::new(if replay {
        open_store(&store_path)?
    } else {
        RunStore::open(&store_path).map_err(|e| CliError::Data(format!("{}: {e}", store_path.display())))?
    });
    let completer = match base_url.filter(|_| !replay) {
        None => Completer::replay(store),
        Some(url) => {
            let key = std::env::var(API_KEY_ENV).ok();
            let transport = HttpTransport::new(&url, key).map_err(|e| CliError::Transport(format!("{e:?}")))?;
            Completer::live(store, Box::new(transport), config.retry.clone())
        }
    };
    let outcome = experiment::sweep(&dataset, &config, &completer).map_err(CliError::from)?;
    println!("records: {} (new: {})", outcome.records.len(), outcome.new_records);
    Ok(())
}

/// Records of one model and prompt type, restricted to labelled examples.
fn select_records(
    store: &RunStore,
    model: Option<String>,
    prompt_type: PromptType,
    gold: &Labels,
) -> Result<Vec<RunRecord>, CliError> {
    let records = store.list(&StoreFilter { prompt_type: Some(prompt_type), model_name: model.clone(), ..Default::default() });
    let models: BTreeSet<&str> = records.iter().map(|r| r.model_name.as_str()).collect();
    if model.is_none() && models.len() > 1 {
        return Err(CliError::Usage(format!("store holds several models ({}); pass --model", models.into_iter().collect::<Vec<_>>().join(", "))));
    }
    let records: Vec<RunRecord> = records.into_iter().filter(|r| gold.contains_key(&r.example_id)).collect();
    if records.is_empty() {
        return Err(CliError::Data(format!("no {prompt_type} records for labelled examples in the store")));
    }
    Ok(records)
}

fn estimators(names: &[String], cfg: &FitConfig) -> Result<Vec<Estimator>, CliError> {
    names.iter().map(|n| Estimator::from_name(n, cfg).map_err(lib_err)).collect()
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), experiment::ExperimentError>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(lib_err)?;
    std::fs::write(path, buf).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn aggregate(settings: &Settings, a: AggregateArgs) -> Result<(), CliError> {
    let dataset_path: PathBuf = settings.require("dataset", a.dataset)?;
    let store_path: PathBuf = settings.require("store", a.store)?;
    let out: PathBuf = settings.require("out", a.out)?;
    let model: Option<String> = settings.pick("model", a.model)?;
    let prompt_type = prompt_type(settings, a.prompt_type)?;
    let only = parse_temperatures(settings.pick("temperatures", a.temperatures)?)?;
    let names = settings
        .pick::<String>("estimators", a.estimators)?
        .map_or_else(|| ESTIMATOR_NAMES.map(String::from).to_vec(), |s| split_list(&s));
    let focus: Temperature = settings
        .pick::<String>("focus_temperature", a.focus_temperature)?
        .map_or(Ok(Temperature::new(0.5).expect("valid")), |s| s.parse().map_err(lib_err))?;
    let combo_name: String =
        settings.pick("combination_estimator", a.combination_estimator)?.unwrap_or_else(|| "generative".into());
    let sizes = parse_sizes(&settings.pick("combination_sizes", a.combination_sizes)?.unwrap_or_else(|| "3-9".into()))?;
    let mut fit = FitConfig { seed: settings.pick("seed", a.seed)?.unwrap_or(0), ..FitConfig::default() };
    if let Some(n) = settings.pick("max_iterations", a.max_iterations)? {
        fit.max_iterations = n;
    }
    fit.validate().map_err(lib_err)?;
    let models = estimators(&names, &fit)?;
    let combo_model = Estimator::from_name(&combo_name, &fit).map_err(lib_err)?;

    let dataset = load_dataset(&dataset_path)?;
    let gold = gold_labels(&dataset);
    if gold.is_empty() {
        return Err(CliError::Data(format!("{} has no gold labels", dataset_path.display())));
    }
    let store = open_store(&store_path)?;
    if store.is_empty() {
        return Err(CliError::Data(format!("store {} is empty", store_path.display())));
    }
    let records = select_records(&store, model, prompt_type, &gold)?;
    let model_name = records[0].model_name.clone();

    let mut runs_at: BTreeMap<Temperature, BTreeSet<u32>> = BTreeMap::new();
    for r in &records {
        if only.as_ref().is_none_or(|ts| ts.contains(&r.temperature)) {
            runs_at.entry(r.temperature).or_default().insert(r.run_index);
        }
    }
    if runs_at.is_empty() {
        return Err(CliError::Data("no records at the requested temperatures".into()));
    }
    let mut matrices: BTreeMap<Temperature, VoteMatrix> = BTreeMap::new();
    let mut run_rows = Vec::new();
    for (&t, runs) in &runs_at {
        let m = build_vote_matrix(&records, Grouping::RunsAt(t)).map_err(lib_err)?;
        for (j, &run_index) in runs.iter().enumerate() {
            let acc = accuracy(&m.source_labels(j), &gold).map_err(lib_err)?;
            run_rows.push(RunAccuracy { temperature: t, run_index, correct: acc.correct, total: acc.total });
        }
        matrices.insert(t, m);
    }
    let focus_matrix = matrices
        .get(&focus)
        .ok_or_else(|| CliError::Data(format!("no records at focus temperature {focus}")))?;

    let refs: Vec<&dyn LabelModel> = models.iter().map(|m| m as &dyn LabelModel).collect();
    let grid = experiment::label_model_grid(&matrices, &gold, &refs).map_err(lib_err)?;

    let mut subsets = Vec::new();
    for &k in &sizes {
        let accs = experiment::subset_accuracies(focus_matrix, k, &combo_model, &gold, DEFAULT_COMBINATION_CAP)
            .map_err(lib_err)?;
        for (cols, acc) in accs {
            let sources = cols.iter().map(|&c| focus_matrix.source_ids()[c].clone()).collect();
            subsets.push(SubsetAccuracy { k, sources, correct: acc.correct, total: acc.total });
        }
    }

    std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    for est in &models {
        let (posteriors, params) = fit_with_params(est, focus_matrix).map_err(lib_err)?;
        write_file(&out.join(format!("posteriors_{}.csv", est.name())), |b| {
            experiment::write_posteriors_csv(b, focus_matrix, &posteriors)
        })?;
        write_file(&out.join(format!("params_{}.csv", est.name())), |b| experiment::write_params_csv(b, &params))?;
    }
    write_file(&out.join("run_accuracy.csv"), |b| experiment::write_run_accuracy_csv(b, &run_rows))?;
    write_file(&out.join("grid.csv"), |b| experiment::write_grid_csv(b, &grid))?;
    write_file(&out.join("combinations.csv"), |b| experiment::write_combinations_csv(b, &subsets))?;

    let mut meta = Provenance::default();
    meta.push("model_name", model_name);
    meta.push("prompt_type", prompt_type.as_str());
    meta.push("estimators", names.join(","));
    meta.push(
        "fit_config",
        format!(
            "max_iterations={} tolerance={:e} step_size={} class_balance={} min_moment={:e}",
            fit.max_iterations, fit.tolerance, fit.step_size, fit.class_balance, DEFAULT_MIN_MOMENT
        ),
    );
    meta.push("seed", fit.seed.to_string());
    meta.push("focus_temperature", focus.to_string());
    meta.push("combination_estimator", combo_model.name());
    meta.push("combination_sizes", sizes.iter().map(ToString::to_string).collect::<Vec<_>>().join(","));
    meta.push("labelled_items", gold.len().to_string());
    meta.push("store_hash", store.content_hash());
    write_file(&out.join("aggregate.meta"), |b| experiment::write_meta(b, &meta))?;
    println!("aggregate outputs written to {}", out.display());
    Ok(())
}

pub const AGGREGATE_FILES: [&str; 4] = ["aggregate.meta", "run_accuracy.csv", "grid.csv", "combinations.csv"];

fn open_input(dir: &Path, name: &str) -> Result<BufReader<File>, CliError> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

pub fn report(settings: &Settings, a: ReportArgs) -> Result<(), CliError> {
    let input: PathBuf = settings.require("input", a.input)?;
    let out: PathBuf = settings.pick("out", a.out)?.unwrap_or_else(|| input.clone());
    let missing: Vec<&str> = AGGREGATE_FILES.iter().copied().filter(|f| !input.join(f).is_file()).collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!("missing aggregate outputs in {}: {}", input.display(), missing.join(", "))));
    }
    let meta = read_meta(open_input(&input, "aggregate.meta")?).map_err(lib_err)?;
    let runs = read_run_accuracy_csv(open_input(&input, "run_accuracy.csv")?).map_err(lib_err)?;
    let grid = read_grid_csv(open_input(&input, "grid.csv")?).map_err(lib_err)?;
    let subsets = read_combinations_csv(open_input(&input, "combinations.csv")?).map_err(lib_err)?;

    let mut per_t: BTreeMap<Temperature, Vec<_>> = BTreeMap::new();
    for r in &runs {
        per_t.entry(r.temperature).or_default().push(r.result().fraction());
    }
    let run_stats = experiment::run_stats(&per_t).map_err(lib_err)?;
    let mut per_k: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for s in &subsets {
        per_k.entry(s.k).or_default().push(lexvote::votes::EvaluationResult::new(s.correct, s.total).fraction());
    }
    let combos = per_k
        .into_iter()
        .map(|(k, v)| Ok(CombinationStats { k, subsets: v.len(), stats: stats_row(&v).map_err(lib_err)? }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let combination_model = meta.get("combination_estimator").unwrap_or("generative").to_string();
    let report = Report { provenance: meta, run_stats, grid, combination_model, combos };
    let written = experiment::emit_report(&report, &out).map_err(lib_err)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn validate(settings: &Settings, a: ValidateArgs) -> Result<(), CliError> {
    let dataset: Option<PathBuf> = settings.pick("dataset", a.dataset)?;
    let store_path: Option<PathBuf> = settings.pick("store", a.store)?;
    if dataset.is_none() && store_path.is_none() {
        return Err(CliError::Usage("validate needs --dataset and/or --store".into()));
    }
    if let Some(path) = &dataset {
        let examples = load_dataset(path)?;
        let gold = gold_labels(&examples);
        let pos = gold.values().filter(|v| **v == lexvote::votes::Vote::Positive).count();
        println!("dataset {}: {} examples, {} labelled ({} Y / {} N)", path.display(), examples.len(), gold.len(), pos, gold.len() - pos);
    }
    if let Some(path) = &store_path {
        let store = open_store(path)?;
        let records = store.list(&StoreFilter::default());
        println!("store {}: {} records, hash {}", path.display(), records.len(), store.content_hash());
        let mut groups: BTreeMap<(String, PromptType), Vec<RunRecord>> = BTreeMap::new();
        for r in records {
            groups.entry((r.model_name.clone(), r.prompt_type)).or_default().push(r);
        }
        for ((model, pt), recs) in &groups {
            let temps: BTreeSet<Temperature> = recs.iter().map(|r| r.temperature).collect();
            for t in temps {
                let m = build_vote_matrix(recs, Grouping::RunsAt(t)).map_err(lib_err)?;
                let d = validate_matrix(&m);
                let flagged: Vec<&str> = d.flagged().map(|s| s.source_id.as_str()).collect();
                println!(
                    "  {model} {pt} t={t}: {} items x {} runs, abstain rate {:.4}, unlabeled items {}, low-coverage runs: {}",
                    d.n_items,
                    d.n_sources,
                    d.abstain_rate,
                    d.unlabeled_items,
                    if flagged.is_empty() { "none".to_string() } else { flagged.join(" ") }
                );
            }
        }
    }
    Ok(())
}
