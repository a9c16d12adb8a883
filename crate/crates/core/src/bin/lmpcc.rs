use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lmpcc::mpcc::Variant;
use lmpcc::sim::{
    build_training_set, compare_report, compute_metrics, generate_training_runs, load_logs, metrics_csv, simulate,
    speed_sweep, sweep_speeds, sweep_table, ModelPaths, Outcome, RunConfig, RunLog, Sweep,
};
use lmpcc::stp::{Channel, ChannelModel, FitOptions, MismatchModels, Process, DEFAULT_M_MAX};
use lmpcc::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_SCENARIO: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "lmpcc", version, about = "Learning-based MPCC with Student-t process mismatch models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record the baseline training and test runs against the surrogate plant.
    GenerateData(Common),
    /// Fit one mismatch channel on recorded logs.
    TrainStp(TrainArgs),
    /// Run one closed-loop simulation.
    Run(RunArgs),
    /// Find the highest completing entry speed per variant.
    Sweep(SweepArgs),
    /// Compare variants on one scenario.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of run logs (`*.csv`).
    #[arg(long)]
    logs: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    channel: Channel,
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ProcessArg::Stp)]
    process: ProcessArg,
    /// Training rows kept after decimation.
    #[arg(long, default_value_t = DEFAULT_M_MAX)]
    m_max: usize,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProcessArg {
    Stp,
    Gp,
}

impl From<ProcessArg> for Process {
    fn from(p: ProcessArg) -> Self {
        match p {
            ProcessArg::Stp => Process::StudentT,
            ProcessArg::Gp => Process::Gaussian,
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    #[command(flatten)]
    common: Common,
    /// Entry speed, overriding the configured scenario speed.
    #[arg(long)]
    speed_kmh: Option<f64>,
    /// Directory with `<stp|gp>-<channel>.json` models, overriding `[models]`.
    #[arg(long)]
    models: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Variant to sweep; all three when omitted.
    #[arg(long)]
    variant: Option<Variant>,
    /// Comma-separated ascending speeds [km/h].
    #[arg(long, value_delimiter = ',')]
    speeds: Option<Vec<f64>>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Compare stored logs instead of running every variant.
    #[arg(long)]
    logs: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let result = match cli.command {
        Command::GenerateData(a) => generate_data(a),
        Command::TrainStp(a) => train_stp(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Singularity { .. } => EXIT_SOLVER,
                _ => EXIT_ERROR,
            })
        }
    }
}

fn load_config(common: &Common) -> lmpcc::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn scenario_config(args: &ScenarioArgs) -> lmpcc::Result<RunConfig> {
    let mut cfg = load_config(&args.common)?;
    if let Some(v) = args.speed_kmh {
        cfg.scenario.speed_kmh = v;
    }
    Ok(cfg)
}

/// Models for `variant`: `--models` wins over the config's `[models]` paths.
fn models_for(variant: Variant, cfg: &RunConfig, dir: Option<&Path>) -> lmpcc::Result<Option<MismatchModels>> {
    let Some(process) = variant.process() else {
        return Ok(None);
    };
    let models = match (dir, &cfg.models) {
        (Some(dir), _) => ModelPaths::in_dir(dir, process).load()?,
        (None, Some(paths)) => paths.load()?,
        (None, None) => {
            return Err(Error::InvalidInput(format!("variant {variant} needs --models or a [models] section")));
        }
    };
    if models.process() != process {
        return Err(Error::InvalidInput(format!("variant {variant} got {:?} models", models.process())));
    }
    Ok(Some(models))
}

fn outcome_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Completed => 0,
        Outcome::Divergence => EXIT_SOLVER,
        Outcome::Collision | Outcome::OffRoad | Outcome::Timeout => EXIT_SCENARIO,
    }
}

fn write(path: impl AsRef<Path>, text: &str) -> lmpcc::Result<()> {
    fs::write(path.as_ref(), text)?;
    println!("wrote {}", path.as_ref().display());
    Ok(())
}

fn generate_data(a: Common) -> lmpcc::Result<u8> {
    let cfg = load_config(&a)?;
    let data = generate_training_runs(&cfg, Some(&a.out))?;
    let mut code = 0;
    for (set, log) in data.train.iter().map(|l| ("train", l)).chain(data.test.iter().map(|l| ("test", l))) {
        println!("{set}/{} {} ({} ticks)", log.file_name(), log.meta.outcome, log.ticks.len());
        code = code.max(outcome_code(log.meta.outcome));
    }
    Ok(code)
}

fn train_stp(a: TrainArgs) -> lmpcc::Result<u8> {
    let logs = load_logs(&a.logs)?;
    if logs.is_empty() {
        return Err(Error::InvalidInput(format!("no *.csv logs in {}", a.logs.display())));
    }
    let dataset = build_training_set(&logs)?;
    let opts = FitOptions { restarts: a.restarts, seed: a.seed, ..Default::default() };
    let (model, report) = ChannelModel::fit(&dataset, a.channel, a.process.into(), a.m_max, &opts)?;
    let reg = model.regression();
    println!(
        "{}: {} rows of {}, log-likelihood {:.3} (restart {}), nu {}",
        a.channel,
        reg.n(),
        dataset.len(),
        report.log_likelihood,
        report.best_restart,
        reg.nu()
    );
    println!("lengthscales {:?}", reg.hyper().lengthscales);
    println!("signal variance {:.4e}, noise variance {:.4e}", reg.hyper().signal_variance, reg.hyper().noise_variance);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    model.save(&a.out)?;
    println!("wrote {}", a.out.display());
    Ok(0)
}

fn run(a: RunArgs) -> lmpcc::Result<u8> {
    let mut cfg = scenario_config(&a.scenario)?;
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    let models = models_for(cfg.variant, &cfg, a.scenario.models.as_deref())?;
    let scenario = cfg.scenario.build()?;
    let log = simulate(&cfg, &scenario, models.as_ref())?;
    let metrics = compute_metrics(&log, &scenario, 0.5 * cfg.vehicle.width)?;
    let out = &a.scenario.common.out;
    fs::create_dir_all(out)?;
    let stem = log.file_name().trim_end_matches(".csv").to_string();
    log.save(out.join(log.file_name()))?;
    println!("wrote {}", out.join(log.file_name()).display());
    write(out.join(format!("{stem}_metrics.csv")), &metrics_csv(std::slice::from_ref(&metrics))?)?;
    println!(
        "{} {}: {}, peak sideslip {:.4} rad, min clearance {:.3} m",
        log.meta.scenario, log.meta.variant, metrics.outcome, metrics.peak_sideslip, metrics.min_clearance
    );
    Ok(outcome_code(log.meta.outcome))
}

fn sweep(a: SweepArgs) -> lmpcc::Result<u8> {
    let cfg = scenario_config(&a.scenario)?;
    let variants = a.variant.map_or(Variant::ALL.to_vec(), |v| vec![v]);
    let speeds = a.speeds.unwrap_or_else(sweep_speeds);
    let out = &a.scenario.common.out;
    let log_dir = out.join("logs");
    fs::create_dir_all(&log_dir)?;
    let mut sweeps: Vec<Sweep> = Vec::new();
    for v in variants {
        let models = models_for(v, &cfg, a.scenario.models.as_deref())?;
        let (s, logs) = speed_sweep(&cfg, v, &speeds, models.as_ref())?;
        for log in &logs {
            log.save(log_dir.join(log.file_name()))?;
        }
        match s.max_speed_kmh {
            Some(max) => println!("{v}: max completing speed {max} km/h"),
            None => {
                let reasons: Vec<String> = s.rows.iter().map(|r| format!("{}: {}", r.speed_kmh, r.outcome)).collect();
                println!("{v}: no speed completes ({})", reasons.join(", "));
            }
        }
        sweeps.push(s);
    }
    let speed = |v: Variant| sweeps.iter().find(|s| s.variant == v).and_then(|s| s.max_speed_kmh);
    if let (Some(v0), Some(v1)) = (speed(Variant::Mpcc), speed(Variant::LmpccStp)) {
        println!("max speed ratio lmpcc-stp / mpcc = {:.4}", v1 / v0);
    }
    write(out.join("sweep.md"), &sweep_table(&sweeps))?;
    write(out.join("sweep.json"), &serde_json::to_string_pretty(&sweeps)?)?;
    Ok(if sweeps.iter().all(|s| s.max_speed_kmh.is_none()) { EXIT_SCENARIO } else { 0 })
}

fn compare(a: CompareArgs) -> lmpcc::Result<u8> {
    let cfg = scenario_config(&a.scenario)?;
    let scenario = cfg.scenario.build()?;
    let logs: Vec<RunLog> = match &a.logs {
        Some(dir) => load_logs(dir)?.into_iter().filter(|l| l.meta.scenario == scenario.name).collect(),
        None => Variant::ALL
            .into_iter()
            .map(|v| {
                let models = models_for(v, &cfg, a.scenario.models.as_deref())?;
                simulate(&RunConfig { variant: v, ..cfg.clone() }, &scenario, models.as_ref())
            })
            .collect::<lmpcc::Result<_>>()?,
    };
    let report = compare_report(&logs, &scenario, 0.5 * cfg.vehicle.width, &[])?;
    let out = &a.scenario.common.out;
    fs::create_dir_all(out)?;
    if a.logs.is_none() {
        for log in &logs {
            log.save(out.join(log.file_name()))?;
        }
    }
    let stem = &scenario.name;
    write(out.join(format!("{stem}_metrics.csv")), &report.metrics_csv()?)?;
    write(out.join(format!("{stem}_deltas.csv")), &report.deltas_csv()?)?;
    let md = report.markdown();
    write(out.join(format!("{stem}_report.md")), &md)?;
    print!("{md}");
    Ok(0)
}
