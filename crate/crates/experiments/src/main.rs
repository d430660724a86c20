use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssep_experiments::{emit, run, Experiment, ExperimentConfig, Format, Overrides, TvMethod};

/// Cutoff experiments for the symmetric exclusion process with reservoirs.
///
/// Exit status: 0 when every declared check passes, 1 when a check fails or
/// a computation breaks down, 2 for configuration and I/O errors.
#[derive(Debug, Parser)]
#[command(name = "ssep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file (TOML with sections); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// `csv` writes the table; `plot` also writes one data file per curve.
    #[arg(long, global = true, default_value = "csv")]
    format: Format,

    /// Lattice sizes, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Cutoff-window offsets, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    b: Option<Vec<f64>>,

    /// Times, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    t: Option<Vec<f64>>,

    /// Product total-variation method: auto, enum, grid or mc.
    #[arg(long, global = true)]
    method: Option<TvMethod>,

    /// Simulation replicas.
    #[arg(long, global = true)]
    replicas: Option<usize>,

    /// Record wall-clock times (outputs are then no longer byte-stable).
    #[arg(long, global = true)]
    walltime: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Product TV along the cutoff schedule against the Gaussian profile,
    /// with the exact chain where tractable.
    Cutoff,
    /// Exact entropy decay, distance and Yau's inequality.
    Entropy,
    /// Spectral lemmas, comparison of quadratic forms, correlation bound.
    Lemmas,
    /// Heat-flow summaries and the cutoff schedule.
    Heat,
    /// Product TV on the (n, b) grid with likelihood-ratio diagnostics.
    Tv,
    /// Simulation against the heat flow and the correlation bound.
    Mc,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Cutoff => Experiment::Cutoff,
            Command::Entropy => Experiment::Entropy,
            Command::Lemmas => Experiment::Lemmas,
            Command::Heat => Experiment::Heat,
            Command::Tv => Experiment::Tv,
            Command::Mc => Experiment::Mc,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot start {w} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        n: cli.n.clone(),
        b: cli.b.clone(),
        t: cli.t.clone(),
        method: cli.method,
        replicas: cli.replicas,
        record_walltime: cli.walltime,
    };
    let outcome = ExperimentConfig::load(cli.command.experiment(), cli.config.as_deref(), &overrides).and_then(|cfg| {
        let report = run(&cfg)?;
        let paths = emit(&report.rows, &cfg.id, cli.format, &cfg.out)?;
        Ok((report, paths))
    });
    match outcome {
        Ok((report, paths)) => {
            for s in &report.skipped {
                eprintln!("skipped: {s}");
            }
            for c in &report.checks {
                println!("{} {}: margin {:e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.margin, c.detail);
            }
            for p in &paths {
                println!("wrote {}", p.display());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
