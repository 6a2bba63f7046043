use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use fogsim::experiment::{self, Figure, Job};
use fogsim::matching::verify::{fuzz_stability, CheckFile};
use fogsim::metrics::{self, ccdf_rows, default_ccdf_grid, SweepPoint};
use fogsim::{summarize, Engine, Scheme, ScenarioConfig};

#[derive(Parser)]
#[command(name = "fogsim", version, about = "Fog network caching and offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario for one or more seeds.
    Run(RunArgs),
    /// Run a scenario across values of one configuration key.
    Sweep(SweepArgs),
    /// Check deferred acceptance against brute-force stable matchings.
    FuzzStability(FuzzArgs),
    /// Run the sweep behind one of the figures.
    ReproduceFigure(FigureArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VAL")]
    overrides: Vec<String>,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
    /// Worker threads for multi-run commands.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct SeedArgs {
    /// Single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive seed range, e.g. `1..5`.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    seeds: SeedArgs,
    /// Also write clustering diagnostics and a per-slot matching trace.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    seeds: SeedArgs,
    /// Configuration key to vary; `proactiveness` sets the cache size as a
    /// fraction of the cacheable task set.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Schemes to run at each value (default: the configured scheme).
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<Scheme>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 6)]
    max_uns: usize,
    #[arg(long, default_value_t = 6)]
    max_cloudlets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check the matching in a JSON instance file instead of fuzzing.
    #[arg(long)]
    check: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    figure: Figure,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    seeds: SeedArgs,
}

/// Validation problems exit 1, invariant failures exit 2.
enum Failure {
    Validation(anyhow::Error),
    Invariant(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Validation(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn parse_seeds(args: &SeedArgs, default: &[u64]) -> anyhow::Result<Vec<u64>> {
    if let Some(s) = args.seed {
        return Ok(vec![s]);
    }
    let Some(range) = &args.seeds else {
        return Ok(default.to_vec());
    };
    let (a, b) = range
        .split_once("..")
        .ok_or_else(|| anyhow!("--seeds expects N..M, got `{range}`"))?;
    let a: u64 = a.trim().parse().with_context(|| format!("bad seed range `{range}`"))?;
    let b: u64 = b.trim().trim_start_matches('=').parse().with_context(|| format!("bad seed range `{range}`"))?;
    if b < a {
        bail!("empty seed range `{range}`");
    }
    Ok((a..=b).collect())
}

fn load_config(common: &Common) -> anyhow::Result<ScenarioConfig> {
    let base = match &common.config {
        Some(p) => ScenarioConfig::from_path(p).with_context(|| format!("reading {}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    Ok(base.with_overrides(&common.overrides)?)
}

fn prepare_out(dir: &Path, force: bool) -> anyhow::Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)?.next().is_some();
        if non_empty && !force {
            bail!("output directory {} is not empty; pass --force to overwrite", dir.display());
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes the resolved configuration and run metadata next to the outputs.
fn write_sidecar(dir: &Path, cfg: &ScenarioConfig, seeds: &[u64], command: &str, extra: serde_json::Value) -> anyhow::Result<()> {
    fs::write(dir.join("resolved_config.toml"), cfg.to_toml_string())?;
    let meta = serde_json::json!({
        "tool": "fogsim",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seeds": seeds,
        "config": cfg,
        "details": extra,
    });
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult {
    let cfg = load_config(&args.common)?;
    let seeds = parse_seeds(&args.seeds, &[cfg.seed])?;
    let out = &args.common.out;
    prepare_out(out, args.common.force)?;
    let grid = default_ccdf_grid();
    let mut summaries = Vec::new();
    let mut ccdf = Vec::new();
    let mut broken = Vec::new();
    for &seed in &seeds {
        let cfg = ScenarioConfig { seed, ..cfg.clone() };
        let mut engine = Engine::new(&cfg)?;
        if args.diagnostics {
            let dir = out.join("diagnostics").join(format!("seed_{seed}"));
            fs::create_dir_all(&dir)?;
            let trace = fs::File::create(dir.join("matching_trace.jsonl"))?;
            engine.set_trace(Box::new(std::io::BufWriter::new(trace)));
        }
        let result = engine.run()?;
        info!("seed {seed}: {} measured requests", result.records.len());
        if args.diagnostics {
            if let Some(t) = &result.training {
                let dir = out.join("diagnostics").join(format!("seed_{seed}"));
                fogsim::clustering::write_diagnostics(&dir, &t.similarity, &t.spectral, &t.popularity)?;
            }
        }
        let s = &result.stats;
        if s.generated != s.completed {
            broken.push(format!("seed {seed}: {} generated, {} completed", s.generated, s.completed));
        }
        if s.admission_violations > 0 {
            broken.push(format!("seed {seed}: {} admissions with negative slack", s.admission_violations));
        }
        let label = cfg.scheme.as_str();
        let log_name = if seeds.len() == 1 {
            "request_log.csv".to_string()
        } else {
            format!("request_log_seed{seed}.csv")
        };
        metrics::write_request_log(&out.join(log_name), &result.records)?;
        summaries.push(summarize(&result.records, label, cfg.scheme, seed, cfg.delay_threshold_s));
        if !result.records.is_empty() {
            ccdf.extend(ccdf_rows(&result.records, &grid, label, seed)?);
        }
    }
    metrics::write_summaries(&out.join("summary.csv"), &summaries)?;
    metrics::write_ccdf(&out.join("ccdf.csv"), &ccdf)?;
    write_sidecar(out, &cfg, &seeds, "run", serde_json::Value::Null)?;
    if !broken.is_empty() {
        return Err(Failure::Invariant(broken.join("; ")));
    }
    Ok(())
}

fn apply_axis(base: &ScenarioConfig, axis: &str, value: &str) -> anyhow::Result<(f64, ScenarioConfig)> {
    let numeric: f64 = value.parse().with_context(|| format!("axis value `{value}` is not numeric"))?;
    if axis == "proactiveness" {
        let mut cfg = base.clone();
        cfg.set_proactiveness(numeric);
        return Ok((numeric, cfg));
    }
    Ok((numeric, base.with_overrides(&[format!("{axis}={value}")])?))
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let base = load_config(&args.common)?;
    let seeds = parse_seeds(&args.seeds, &[1, 2, 3, 4, 5])?;
    let schemes = if args.schemes.is_empty() {
        vec![base.scheme]
    } else {
        args.schemes.clone()
    };
    let mut jobs = Vec::new();
    for &scheme in &schemes {
        for v in &args.values {
            let (value, config) = apply_axis(&ScenarioConfig { scheme, ..base.clone() }, &args.axis, v)?;
            jobs.push(Job {
                series: scheme.as_str().to_string(),
                value,
                config,
            });
        }
    }
    let out = &args.common.out;
    prepare_out(out, args.common.force)?;
    let summaries = experiment::summarize_jobs(&jobs, &seeds, args.common.jobs)?;
    metrics::write_summaries(&out.join("summary.csv"), &summaries)?;
    let points: Vec<SweepPoint> = experiment::group_points(&jobs, &seeds, summaries);
    let rows = metrics::sweep(&args.axis, &points)?;
    metrics::write_sweep(&out.join(format!("sweep_{}.csv", args.axis)), &rows)?;
    write_sidecar(
        out,
        &base,
        &seeds,
        "sweep",
        serde_json::json!({ "axis": args.axis, "values": args.values, "schemes": schemes }),
    )?;
    Ok(())
}

fn cmd_fuzz(args: FuzzArgs) -> CliResult {
    if let Some(path) = &args.check {
        let file = CheckFile::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let blocking = file.blocking_pairs()?;
        if blocking.is_empty() {
            println!("stable: no blocking pairs");
            return Ok(());
        }
        for (u, e) in &blocking {
            println!("blocking pair: UN {u}, cloudlet {e}");
        }
        return Err(Failure::Validation(anyhow!("matching in {} is unstable", path.display())));
    }
    if args.max_uns > 7 || args.max_cloudlets > 7 {
        return Err(Failure::Validation(anyhow!("instance bounds above 7x7 are too large to enumerate")));
    }
    let report = fuzz_stability(args.instances, args.max_uns, args.max_cloudlets, args.seed);
    println!("{} instances, {} failures", report.instances, report.failures.len());
    if let Some((i, msg)) = report.failures.first() {
        return Err(Failure::Invariant(format!("instance {i}: {msg}")));
    }
    Ok(())
}

fn cmd_figure(args: FigureArgs) -> CliResult {
    let base = load_config(&args.common)?;
    let seeds = parse_seeds(&args.seeds, &[1, 2, 3, 4, 5])?;
    let out = &args.common.out;
    prepare_out(out, args.common.force)?;
    let fig = experiment::reproduce(args.figure, &base, &seeds, args.common.jobs)?;
    metrics::write_summaries(&out.join("summary.csv"), &fig.summaries)?;
    if args.figure == Figure::Fig2 {
        metrics::write_ccdf(&out.join("ccdf.csv"), &fig.ccdf)?;
    }
    if let Some((axis, rows)) = &fig.sweep {
        metrics::write_sweep(&out.join(format!("sweep_{axis}.csv")), rows)?;
    }
    write_sidecar(
        out,
        &base,
        &seeds,
        "reproduce-figure",
        serde_json::json!({ "figure": args.figure.as_str() }),
    )?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::FuzzStability(a) => cmd_fuzz(a),
        Command::ReproduceFigure(a) => cmd_figure(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violated: {msg}");
            ExitCode::from(2)
        }
    }
}
