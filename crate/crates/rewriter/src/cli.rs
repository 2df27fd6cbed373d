//! Command-line surface: datagen, train, calibrate, evaluate, solve,
//! report.

use crate::config::{defaults_for, load_config, Scenario, TrainConfig};
use crate::datagen::{
    build_selector_dataset, build_solver_dataset, build_test_set, selector_inputs,
    selector_records, solver_records, substream, test_records, DatasetRecord,
    DatasetSizes, Mode,
};
use crate::engine::{ReplacementPolicy, RunTrace, SelectorConfig};
use crate::eval::{
    calibrate_solver_threshold, calibrate_windowing_threshold, classify_error,
    default_solver_threshold, default_window_threshold, evaluate, report, write_solver_histogram_csv,
    write_window_csv, EngineHandle, Evaluation, Metrics, RunManifest,
};
use crate::models::{
    LeafProposer, NeuralProposer, NeuralSegmenter, NeuralSolver, OracleProposer,
    OracleSegmenter, OracleSolver, SegmentModel, SolveModel,
};
use crate::nn::{load_checkpoint, Transformer};
use crate::term::{parse, Domain, Vocabulary};
use crate::training::{
    select_model_on_ood, train_selector, train_solver, SelectorMode,
};
use anyhow::Context;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "rewriter", about = "Convergent term rewriting with neural modules")]
struct Cli {
    /// Master seed for every derived random stream.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Training config file; shipped defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write development and test datasets as JSONL.
    Datagen {
        #[arg(long)]
        domain: String,
    },
    /// Train a Selector or Solver and keep periodic checkpoints.
    Train {
        #[arg(long)]
        module: String,
        #[arg(long)]
        engine: String,
        #[arg(long)]
        domain: String,
    },
    /// Propose thresholds from confidence distributions.
    Calibrate {
        /// window (input-length threshold T) or solver (log-confidence θ).
        #[arg(long)]
        which: String,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Run a test set end to end and write the report bundle.
    Evaluate {
        #[arg(long)]
        engine: String,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        selector_dir: Option<PathBuf>,
        #[arg(long)]
        solver_dir: Option<PathBuf>,
    },
    /// Rewrite one expression (or @file with one per line) to its value.
    Solve {
        #[arg(long)]
        engine: String,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        selector_dir: Option<PathBuf>,
        #[arg(long)]
        solver_dir: Option<PathBuf>,
        #[arg(long)]
        input: String,
    },
    /// Rebuild the report bundle from stored traces.
    Report {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        tests: PathBuf,
    },
}

pub fn run() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Datagen { domain } => datagen_cmd(&domain, cli.seed, &cli.out),
        Cmd::Train { module, engine, domain } => {
            train_cmd(&module, &engine, &domain, cli.config.as_deref(), cli.seed, &cli.out)
        }
        Cmd::Calibrate { which, domain, checkpoint_dir } => {
            calibrate_cmd(&which, &domain, checkpoint_dir.as_deref(), cli.seed, &cli.out)
        }
        Cmd::Evaluate { engine, domain, selector_dir, solver_dir } => evaluate_cmd(
            &engine,
            &domain,
            selector_dir.as_deref(),
            solver_dir.as_deref(),
            cli.seed,
            &cli.out,
        ),
        Cmd::Solve { engine, domain, selector_dir, solver_dir, input } => solve_cmd(
            &engine,
            &domain,
            selector_dir.as_deref(),
            solver_dir.as_deref(),
            &input,
            cli.seed,
        ),
        Cmd::Report { traces, tests } => report_cmd(&traces, &tests, &cli.out),
    }
}

fn write_jsonl(path: &Path, records: &[DatasetRecord]) -> anyhow::Result<()> {
    let mut f = std::fs::File::create(path)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

fn datagen_cmd(domain: &str, seed: u64, out: &Path) -> anyhow::Result<()> {
    let scenario = Scenario::parse(domain)?;
    std::fs::create_dir_all(out)?;
    for d in scenario.domains() {
        let sizes = DatasetSizes::default();
        let sel = build_selector_dataset(d, &sizes, substream(seed, 1));
        let sol = build_solver_dataset(d, &sizes, substream(seed, 2));
        let dev = selector_inputs(&sel);
        let test = build_test_set(d, &sizes, substream(seed, 3), &dev);
        let prefix = |name: &str| out.join(format!("{}-{name}.jsonl", d.name()));
        write_jsonl(&prefix("selector-seq2seq"), &selector_records(&sel, Mode::Seq2Seq))?;
        write_jsonl(
            &prefix("selector-segmentation"),
            &selector_records(&sel, Mode::Segmentation),
        )?;
        write_jsonl(&prefix("solver"), &solver_records(&sol))?;
        write_jsonl(&prefix("test"), &test_records(d, &test))?;
        println!(
            "{}: wrote selector/solver/test JSONL ({} test records)",
            d.name(),
            test.len()
        );
    }
    Ok(())
}

fn scenario_vocab(s: Scenario, char_level: bool) -> Vocabulary {
    match (s, char_level) {
        (Scenario::Single(d), false) => Vocabulary::formula_level(d),
        (Scenario::Single(d), true) => Vocabulary::character_level(d),
        (Scenario::Multi, false) => Vocabulary::multi_domain(crate::term::VocabKind::Formula),
        (Scenario::Multi, true) => Vocabulary::multi_domain(crate::term::VocabKind::Character),
    }
}

fn train_cmd(
    module: &str,
    engine: &str,
    domain: &str,
    config: Option<&Path>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let scenario = Scenario::parse(domain)?;
    let cfg: TrainConfig = match config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => defaults_for(module, engine, scenario)?,
    };
    let sizes = DatasetSizes::default();
    std::fs::create_dir_all(out)?;
    crate::config::save_config(&cfg, &out.join("train-config.json"))?;
    let outcome = if module == "solver" {
        let datasets: Vec<_> = scenario
            .domains()
            .iter()
            .map(|&d| build_solver_dataset(d, &sizes, substream(seed, 2)))
            .collect();
        let refs: Vec<&_> = datasets.iter().collect();
        let vocab = scenario_vocab(scenario, true);
        train_solver::<f32>(&refs, &vocab, cfg.model, &cfg.optimizer, out, seed, 200, None)?
    } else {
        let datasets: Vec<_> = scenario
            .domains()
            .iter()
            .map(|&d| build_selector_dataset(d, &sizes, substream(seed, 1)))
            .collect();
        let refs: Vec<&_> = datasets.iter().collect();
        let vocab = scenario_vocab(scenario, false);
        let mode = match engine {
            "fastnrs" => SelectorMode::Segmentation,
            "nrs" => SelectorMode::Seq2Seq,
            other => anyhow::bail!("unknown engine {other:?}; expected nrs|fastnrs"),
        };
        train_selector::<f32>(&refs, &vocab, cfg.model, &cfg.optimizer, mode, out, seed, 200, None)?
    };
    if outcome.diverged {
        eprintln!("warning: loss diverged; keeping the last good checkpoint");
    }
    let best = select_model_on_ood(&outcome.checkpoints)?;
    println!(
        "best checkpoint: iter {} (id {:.4}, ood {:.4}) at {}",
        best.iteration,
        best.id_metric,
        best.ood_metric,
        best.dir.display()
    );
    std::fs::write(out.join("best.txt"), format!("{}\n", best.dir.display()))?;
    Ok(())
}

fn load_model(dir: &Path) -> anyhow::Result<(Transformer<f32>, crate::nn::CheckpointManifest)> {
    load_checkpoint::<f32>(dir).with_context(|| format!("loading checkpoint {}", dir.display()))
}

struct Loaded {
    proposer: Option<NeuralProposer>,
    segmenter: Option<NeuralSegmenter>,
    solver: Option<NeuralSolver>,
}

fn load_parts(
    domain: Domain,
    engine: &str,
    selector_dir: Option<&Path>,
    solver_dir: Option<&Path>,
) -> anyhow::Result<Loaded> {
    let formula_vocab = Vocabulary::formula_level(domain);
    let char_vocab = Vocabulary::character_level(domain);
    let mut loaded = Loaded { proposer: None, segmenter: None, solver: None };
    if let Some(dir) = selector_dir {
        let (model, manifest) = load_model(dir)?;
        anyhow::ensure!(
            manifest.vocab_hash == formula_vocab.content_hash(),
            "selector checkpoint vocabulary does not match {}",
            domain.name()
        );
        if engine == "fastnrs" {
            loaded.segmenter = Some(NeuralSegmenter { model, vocab: formula_vocab });
        } else {
            loaded.proposer =
                Some(NeuralProposer { model, vocab: formula_vocab, max_len: 64 });
        }
    }
    if let Some(dir) = solver_dir {
        let (model, manifest) = load_model(dir)?;
        anyhow::ensure!(
            manifest.vocab_hash == char_vocab.content_hash(),
            "solver checkpoint vocabulary does not match {}",
            domain.name()
        );
        loaded.solver = Some(NeuralSolver { model, vocab: char_vocab, max_len: 64 });
    }
    Ok(loaded)
}

fn run_handle<R>(
    domain: Domain,
    engine: &str,
    loaded: &Loaded,
    f: impl FnOnce(&EngineHandle) -> R,
) -> anyhow::Result<R> {
    let solver: &dyn SolveModel = match &loaded.solver {
        Some(s) => s,
        None => &OracleSolver,
    };
    let handle = match engine {
        "nrs" => {
            let proposer: &dyn LeafProposer = match &loaded.proposer {
                Some(p) => p,
                None => &OracleProposer,
            };
            EngineHandle::Nrs {
                proposer,
                solver,
                config: SelectorConfig { m: 10, t: default_window_threshold(domain) },
            }
        }
        "fastnrs" => {
            let segmenter: &dyn SegmentModel = match &loaded.segmenter {
                Some(s) => s,
                None => &OracleSegmenter,
            };
            EngineHandle::FastNrs {
                segmenter,
                solver,
                policy: ReplacementPolicy { theta: default_solver_threshold(domain) },
            }
        }
        other => anyhow::bail!("unknown engine {other:?}; expected nrs|fastnrs"),
    };
    Ok(f(&handle))
}

fn single_domain(domain: &str) -> anyhow::Result<Domain> {
    match Scenario::parse(domain)? {
        Scenario::Single(d) => Ok(d),
        Scenario::Multi => anyhow::bail!("this command needs a single domain"),
    }
}

fn evaluate_cmd(
    engine: &str,
    domain: &str,
    selector_dir: Option<&Path>,
    solver_dir: Option<&Path>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let d = single_domain(domain)?;
    let sizes = DatasetSizes::default();
    let sel = build_selector_dataset(d, &sizes, substream(seed, 1));
    let dev = selector_inputs(&sel);
    let test = build_test_set(d, &sizes, substream(seed, 3), &dev);
    let loaded = load_parts(d, engine, selector_dir, solver_dir)?;
    let ev = run_handle(d, engine, &loaded, |h| evaluate(h, &test, substream(seed, 4)))?;
    let manifest = RunManifest {
        engine: engine.to_string(),
        seed,
        checkpoints: [selector_dir, solver_dir]
            .iter()
            .flatten()
            .map(|p| p.display().to_string())
            .collect(),
        window_threshold: default_window_threshold(d),
        solver_threshold: Some(default_solver_threshold(d)),
        aggregate_accuracy: ev.metrics.aggregate_accuracy(),
    };
    report(&ev, &manifest, out)?;
    println!(
        "{} {}: aggregate sequence accuracy {:.4} over {} records; report in {}",
        engine,
        d.name(),
        ev.metrics.aggregate_accuracy(),
        test.len(),
        out.display()
    );
    Ok(())
}

fn solve_cmd(
    engine: &str,
    domain: &str,
    selector_dir: Option<&Path>,
    solver_dir: Option<&Path>,
    input: &str,
    seed: u64,
) -> anyhow::Result<()> {
    let d = single_domain(domain)?;
    let texts: Vec<String> = if let Some(path) = input.strip_prefix('@') {
        std::fs::read_to_string(path)?
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect()
    } else {
        vec![input.to_string()]
    };
    let loaded = load_parts(d, engine, selector_dir, solver_dir)?;
    for (i, text) in texts.iter().enumerate() {
        let f = parse(text, d).with_context(|| format!("parsing {text:?}"))?;
        let trace =
            run_handle(d, engine, &loaded, |h| h.run(&f, substream(seed, i as u64)))?;
        match &trace.output {
            Some(v) => println!("{text} = {v}"),
            None => println!("{text} -> {:?}", trace.status),
        }
    }
    Ok(())
}

fn calibrate_cmd(
    which: &str,
    domain: &str,
    checkpoint_dir: Option<&Path>,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    let d = single_domain(domain)?;
    let sizes = DatasetSizes::default();
    std::fs::create_dir_all(out)?;
    match which {
        "window" => {
            let sel = build_selector_dataset(d, &sizes, substream(seed, 1));
            let loaded = load_parts(d, "nrs", checkpoint_dir, None)?;
            let proposer: &dyn LeafProposer = match &loaded.proposer {
                Some(p) => p,
                None => &OracleProposer,
            };
            let mut samples = Vec::new();
            let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, 9));
            for r in sel.id_val.iter().chain(&sel.ood_val) {
                let f = crate::term::Formula { domain: d, tokens: r.tokens.clone() };
                let c = proposer.propose(&f, &mut rng).confidence();
                samples.push((f.tokens.len(), c));
            }
            let cal = calibrate_windowing_threshold(&samples, 25);
            write_window_csv(&cal, &out.join("window-confidence.csv"))?;
            println!(
                "{}: proposal {:?}, shipped default {:?}",
                d.name(),
                cal.proposal,
                default_window_threshold(d)
            );
        }
        "solver" => {
            let sol = build_solver_dataset(d, &sizes, substream(seed, 2));
            let loaded = load_parts(d, "fastnrs", None, checkpoint_dir)?;
            let solver: &dyn SolveModel = match &loaded.solver {
                Some(s) => s,
                None => &OracleSolver,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, 9));
            let scores: Vec<f64> = sol
                .train_leaf
                .iter()
                .filter_map(|r| {
                    let f = parse(&r.input, d).ok()?;
                    Some(solver.solve(&f, &mut rng).log_confidence)
                })
                .collect();
            let cal = calibrate_solver_threshold(&scores, Some(d));
            write_solver_histogram_csv(&cal, &out.join("solver-confidence.csv"))?;
            println!(
                "{}: quantile proposal {:.4}, shipped θ {:.4}",
                d.name(),
                cal.quantile_proposal,
                cal.theta
            );
        }
        other => anyhow::bail!("unknown calibration {other:?}; expected window|solver"),
    }
    Ok(())
}

fn report_cmd(traces_path: &Path, tests_path: &Path, out: &Path) -> anyhow::Result<()> {
    let traces: Vec<RunTrace> = std::fs::read_to_string(traces_path)?
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    let tests: Vec<DatasetRecord> = std::fs::read_to_string(tests_path)?
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    let by_input: std::collections::HashMap<&str, &DatasetRecord> =
        tests.iter().map(|r| (r.input.as_str(), r)).collect();
    let mut metrics = Metrics::default();
    let mut errors = Vec::with_capacity(traces.len());
    let mut engine = String::from("unknown");
    for t in &traces {
        engine = t.engine.clone();
        let rec = by_input
            .get(t.input.as_str())
            .with_context(|| format!("no test record for trace input {:?}", t.input))?;
        let err = classify_error(t, &rec.target);
        metrics.record_cell(rec.domain, rec.nesting, err.as_ref());
        errors.push(err);
    }
    let aggregate = metrics.aggregate_accuracy();
    let ev = Evaluation { metrics, traces, errors };
    let manifest = RunManifest {
        engine,
        seed: 0,
        checkpoints: vec![],
        window_threshold: None,
        solver_threshold: None,
        aggregate_accuracy: aggregate,
    };
    report(&ev, &manifest, out)?;
    println!("report rebuilt in {}", out.display());
    Ok(())
}
