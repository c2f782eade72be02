use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lattice_clt::config::{self, ExperimentConfig, ExperimentKind, PRESETS};
use lattice_clt::harness::{self, ExperimentResult};
use lattice_clt::innovations::parse_seed;
use lattice_clt::output::emit_outputs;
use lattice_clt::Error;

/// Monte Carlo and exact checks of limit theorems for weighted sums of
/// stationary Bernoulli random fields.
#[derive(Debug, Parser)]
#[command(name = "lattice-clt", version, arg_required_else_help = true)]
struct Cli {
    /// Base seed, decimal or 0x-prefixed hex. Overrides the config value.
    #[arg(long, global = true, value_parser = seed_arg)]
    seed: Option<u64>,

    /// Number of replications (at least 100). Overrides the config value.
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Directory receiving results.json, samples.csv, SVG plots and manifest.json.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// TOML experiment file.
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in experiment (see --list-presets).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Print the built-in presets and exit.
    #[arg(long)]
    list_presets: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weighted-sum CLT: KS normality and variance checks.
    Clt,
    /// Finite-dimensional covariances of set-indexed or product-linear sums.
    Fdd,
    /// Partial-sum paths on a grid.
    Paths,
    /// One of the two non-convergence constructions.
    Counterexample {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
    },
    /// Hannan and Wu coefficients and the long-run variance.
    Dependence,
    /// Exhaustive identity suite on small Rademacher windows.
    OracleCheck,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Clt => ExperimentKind::Clt,
            Command::Fdd => ExperimentKind::Fdd,
            Command::Paths => ExperimentKind::Paths,
            Command::Counterexample { which: 1 } => ExperimentKind::Counterexample1,
            Command::Counterexample { .. } => ExperimentKind::Counterexample2,
            Command::Dependence => ExperimentKind::Dependence,
            Command::OracleCheck => ExperimentKind::OracleCheck,
        }
    }

    /// Preset used when neither `--config` nor `--preset` is given.
    fn default_preset(&self) -> &'static str {
        match self.kind() {
            ExperimentKind::Clt => "clt-kernel-2d",
            ExperimentKind::Fdd => "fdd-set-indexed-lebesgue",
            ExperimentKind::Paths => "paths-iid-1d",
            ExperimentKind::Counterexample1 => "counterexample1",
            ExperimentKind::Counterexample2 => "counterexample2",
            ExperimentKind::Dependence => "dependence-volterra",
            ExperimentKind::OracleCheck => "oracle",
        }
    }
}

fn seed_arg(s: &str) -> Result<u64, String> {
    parse_seed(s).map_err(|e| e.to_string())
}

/// Failure classes mapped onto the process exit code.
enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.into()),
            other => Failure::Usage(other.into()),
        }
    }
}

fn load_config(cli: &Cli, command: &Command) -> Result<ExperimentConfig, Failure> {
    let mut cfg = if let Some(path) = &cli.config {
        config::parse_config(path)?
    } else {
        config::preset(cli.preset.as_deref().unwrap_or(command.default_preset()))?
    };
    if cfg.experiment != command.kind() {
        return Err(Failure::Usage(anyhow::anyhow!(
            "the configuration describes a `{}` experiment but the `{}` subcommand was given",
            cfg.experiment.name(),
            command.kind().name()
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = cli.reps {
        cfg.reps = reps;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg.validate()?)
}

fn report(result: &ExperimentResult) {
    println!("experiment {}  seed {}  reps {}  hash {}", result.experiment, result.seed, result.reps, &result.config_hash[..12]);
    for t in &result.tests {
        println!(
            "  {:<4} {:<44} statistic {:>12.6}  critical {:>12.6}",
            if t.passed { "ok" } else { "FAIL" },
            t.name,
            t.statistic,
            t.critical_value
        );
    }
    println!("{} in {:.2}s", if result.passed { "PASSED" } else { "FAILED" }, result.runtime.as_secs_f64());
}

fn execute(cli: &Cli, command: &Command) -> Result<bool, Failure> {
    let cfg = load_config(cli, command)?;
    let started = chrono::Utc::now();
    let result = harness::run(&cfg)?;
    let manifest = emit_outputs(&result, &cfg, &cli.out_dir, started)
        .map_err(|e| Failure::Io(anyhow::Error::from(e).context(format!("writing outputs to {}", cli.out_dir.display()))))?;
    report(&result);
    println!("wrote {} files to {}", manifest.files.len() + 1, cli.out_dir.display());
    Ok(result.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.list_presets {
        for p in PRESETS {
            println!("{:<26} {}", p.name, p.label);
        }
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!("error: a subcommand is required (try --help)");
        return ExitCode::from(2);
    };
    match execute(&cli, command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
