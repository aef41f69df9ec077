use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlrt::harness::{
    self, emit, write_summary, ExperimentConfig, ExperimentKind, OutputFormat, ReplicationSummary,
};
use nlrt::{Error, Result};

#[derive(Parser)]
#[command(
    name = "nlrt",
    version,
    about = "Perturbed random walks, renewal expansions and the rank SPRT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Renewal, expansion, variance and xi-scaling experiments.
    Simulate(Common),
    /// Expected sample size of the two-sample rank SPRT.
    Sprt(Common),
    /// Drift, h integral and C(eta), from a config or from flags.
    Constants(ConstantsArgs),
    /// Regularity diagnostics of a perturbation model.
    Diagnose(Common),
    /// Any experiment; writes the full summary and lists every check.
    Report(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "NLRT_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    exact_repro: bool,
}

#[derive(Args)]
struct ConstantsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long = "a", default_value_t = 1.0)]
    a_exp: f64,
    /// Defaults to (Delta - 1)/(Delta + 1).
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1600)]
    n_max: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    cfg.exact_repro |= common.exact_repro;
    Ok(cfg)
}

fn require_kind(cfg: &ExperimentConfig, command: &str, allowed: &[ExperimentKind]) -> Result<()> {
    if allowed.contains(&cfg.experiment) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "`{command}` cannot run experiment {:?}",
            cfg.experiment.name()
        )))
    }
}

fn constants_config(args: &ConstantsArgs) -> Result<ExperimentConfig> {
    if args.common.config.is_some() {
        return load(&args.common);
    }
    let delta = args
        .delta
        .ok_or_else(|| Error::Config("constants needs --config or --delta".into()))?;
    let mut text = format!(
        "experiment = \"constants\"\nreps = 1\nmaster_seed = {}\nexact_repro = {}\n\
         [constants]\ndelta = {delta:?}\na_exp = {:?}\nn_max = {}\n",
        args.common.seed.unwrap_or(0),
        args.common.exact_repro,
        args.a_exp,
        args.n_max
    );
    if let Some(eta) = args.eta {
        text.push_str(&format!("eta = {eta:?}\n"));
    }
    ExperimentConfig::from_toml_str(&text)
}

fn write_out(summary: &ReplicationSummary, out: Option<&Path>, format: OutputFormat) -> Result<()> {
    match out {
        Some(path) => emit(summary, path, format),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_summary(summary, format, &mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    use ExperimentKind::*;
    let (cfg, common, default_format, verbose) = match &cli.command {
        Command::Simulate(c) => {
            let cfg = load(c)?;
            require_kind(
                &cfg,
                "simulate",
                &[
                    LinearRenewal,
                    PerturbedExpansion,
                    Intermediate,
                    Variance,
                    XiScaling,
                ],
            )?;
            (cfg, c, OutputFormat::Csv, false)
        }
        Command::Sprt(c) => {
            let cfg = load(c)?;
            require_kind(&cfg, "sprt", &[RankSprtEt])?;
            (cfg, c, OutputFormat::Csv, false)
        }
        Command::Constants(a) => {
            let cfg = constants_config(a)?;
            require_kind(&cfg, "constants", &[Constants])?;
            (cfg, &a.common, OutputFormat::Json, false)
        }
        Command::Diagnose(c) => {
            let cfg = load(c)?;
            require_kind(&cfg, "diagnose", &[Diagnostics])?;
            (cfg, c, OutputFormat::Csv, false)
        }
        Command::Report(c) => (load(c)?, c, OutputFormat::Json, true),
    };
    let format = common
        .format
        .map(OutputFormat::from)
        .unwrap_or(default_format);

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let summary = pool.install(|| harness::run(&cfg))?;

    write_out(&summary, common.out.as_deref(), format)?;
    for check in &summary.checks {
        if verbose || !check.pass {
            let tag = if check.pass { "pass" } else { "FAIL" };
            eprintln!("[{tag}] {}: {}", check.name, check.detail);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
