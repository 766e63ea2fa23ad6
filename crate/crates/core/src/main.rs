use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abe_mopso::data::StandardizedDataset;
use abe_mopso::harness::{self, ExperimentConfig, LocalMode, Method, ReportFormat, RunSettings};
use abe_mopso::metrics::{self, BaselineMode};
use abe_mopso::mopso::MopsoConfig;
use abe_mopso::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "abe-mopso", version, about = "Analogy-based effort estimation with swarm-tuned adaptation")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Local tuning mode: oracle or honest.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured method on every configured dataset.
    Run,
    /// Tune one method on one dataset and print the chosen solutions.
    Tune {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        method: String,
    },
    /// Compare methods from existing prediction CSV files.
    Compare {
        #[arg(required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Check a config and the datasets it names.
    Validate,
}

fn load_config(cli: &Cli) -> Result<(ExperimentConfig, PathBuf)> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let (mut cfg, base) = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = &cli.mode {
        cfg.local_mode = mode.parse::<LocalMode>()?;
    }
    Ok((cfg, base))
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>, base: &Path) -> PathBuf {
    match (&cli.out, cfg.and_then(|c| c.output_dir.as_ref())) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("results"),
    }
}

fn cmd_run(cli: &Cli) -> Result<()> {
    let (cfg, base) = load_config(cli)?;
    let report = harness::run_experiment(&cfg, &base)?;
    let dir = out_dir(cli, Some(&cfg), &base);
    let files = harness::emit_report(&report, &dir, &[ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown])?;
    print!("{}", harness::markdown(&report));
    eprintln!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

fn cmd_tune(cli: &Cli, dataset: &str, method: &str) -> Result<()> {
    let (cfg, base) = load_config(cli)?;
    let method: Method = method.parse()?;
    let (index, dcfg) = cfg
        .datasets
        .iter()
        .enumerate()
        .find(|(_, d)| d.display_name() == dataset)
        .ok_or_else(|| Error::Config(format!("dataset '{dataset}' is not in the config")))?;
    let ds: StandardizedDataset = harness::load_configured(dcfg, &base)?;
    let seed = harness::derive_seed(cfg.seed, index, method);
    let settings = RunSettings {
        mopso: MopsoConfig { seed, ..cfg.mopso.clone() },
        baseline: match cfg.baseline {
            harness::BaselineSetting::Exact => BaselineMode::Exact,
            harness::BaselineSetting::Sampled(runs) => BaselineMode::Sampled { runs, seed },
        },
        local_mode: cfg.local_mode,
    };
    let run = harness::run_loocv(&ds, method, &settings)?;
    let baseline = metrics::random_guess_baseline(&ds.efforts(), settings.baseline)?;
    let suite = metrics::evaluate(&run.records, &baseline)?;
    println!("{dataset} {method}: n = {}, m = {}", ds.len(), ds.feature_count());
    if let Some(k) = run.best_k {
        println!("best k = {k}");
    }
    for (i, s) in run.solutions.iter().enumerate() {
        let label = if run.solutions.len() == 1 {
            "shared".to_string()
        } else {
            format!("project {}", i + 1)
        };
        println!("{label}: k = {}, mask = {} (v = {})", s.k, s.mask, s.mask_value);
    }
    println!("{}", serde_json::to_string_pretty(&suite)?);
    Ok(())
}

fn cmd_compare(cli: &Cli, files: &[PathBuf]) -> Result<()> {
    let mut rows = Vec::new();
    for f in files {
        rows.extend(harness::read_predictions(f)?);
    }
    let reports = harness::compare_predictions(&rows)?;
    for d in &reports {
        println!("{} (n = {})", d.name, d.n);
        for m in &d.methods {
            println!(
                "  {:<5} MAE {}  SA {}  MBRE {}  MIBRE {}  LSD {}",
                m.method.to_string(),
                harness::sig4(m.metrics.mae),
                m.metrics.sa.map(|v| harness::sig4(100.0 * v)).unwrap_or_else(|| "-".into()),
                harness::sig4(m.metrics.mbre),
                harness::sig4(m.metrics.mibre),
                harness::sig4(m.metrics.lsd)
            );
        }
        for c in &d.comparisons {
            println!("  {} vs {}: p = {}", c.method_a, c.method_b, harness::sig4(c.p_value));
        }
        for e in &d.win_tie_loss {
            println!("  {} {}: {}/{}/{}", e.measure, e.method, e.tally.win, e.tally.tie, e.tally.loss);
        }
    }
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
        let path = dir.join("comparison.json");
        std::fs::write(&path, serde_json::to_string_pretty(&reports)? + "\n")
            .map_err(|source| Error::Io { path, source })?;
    }
    Ok(())
}

fn cmd_validate(cli: &Cli) -> Result<()> {
    let (cfg, base) = load_config(cli)?;
    for d in &cfg.datasets {
        let ds = harness::load_configured(d, &base).map_err(|e| Error::Context {
            dataset: d.display_name(),
            method: "load".into(),
            source: Box::new(e),
        })?;
        println!("{}: n = {}, m = {}", ds.name(), ds.len(), ds.feature_count());
    }
    let methods: Vec<String> = cfg.methods.iter().map(|m| m.to_string()).collect();
    println!("methods: {}", methods.join(", "));
    println!("config ok");
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Tune { dataset, method } => cmd_tune(cli, dataset, method),
        Command::Compare { predictions } => cmd_compare(cli, predictions),
        Command::Validate => cmd_validate(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let validating = matches!(cli.command, Command::Validate);
    let threads = cli.threads;
    if threads == Some(0) {
        eprintln!("error: --threads must be positive");
        return ExitCode::from(1);
    }
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::InvalidArgument(format!("cannot start thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if validating || e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
