use clap::{Args, Parser, Subcommand};
use rwm_core::experiments::{
    exit_code_for_error, exit_code_for_rows, run, summary, write_rows, ExperimentConfig,
    ExperimentKind, EXIT_NUMERIC, EXIT_USAGE,
};
use rwm_core::ledger::assemble_lower_bound;
use std::path::PathBuf;
use std::process::ExitCode;

/// Nodal-length experiments for monochromatic random waves.
///
/// Settings are resolved in three layers: built-in defaults, then the JSON
/// document given by --config, then individual command-line flags.
#[derive(Parser, Debug)]
#[command(name = "rwm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Recompute every tabulated constant and compare with the published values.
    Verify,
    /// Monte Carlo nodal length statistics per radius.
    Simulate,
    /// Empirical variances of the second and fourth chaos projections.
    Chaos,
    /// Fit of log(Var/E^2) against log R.
    Scaling,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output (appended to if it exists).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to RWM_THREADS, then to all cores.
    #[arg(long, global = true, env = "RWM_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Comma-separated ascending radii.
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long, global = true)]
    replicates: Option<u64>,
    #[arg(long, global = true)]
    n_waves: Option<usize>,
    #[arg(long, global = true)]
    grid_spacing: Option<f64>,
    /// Samples per Monte Carlo coefficient (verify).
    #[arg(long, global = true)]
    mc_samples: Option<u64>,
    /// Also write the ledger report as JSON (verify).
    #[arg(long, global = true)]
    ledger: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> rwm_core::Result<ExperimentConfig> {
    let mut cfg = match &cli.common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.kind = match cli.command {
        Command::Verify => ExperimentKind::Verify,
        Command::Simulate => ExperimentKind::Simulate,
        Command::Chaos => ExperimentKind::Chaos,
        Command::Scaling => ExperimentKind::Scaling,
    };
    let c = &cli.common;
    if let Some(v) = &c.out {
        cfg.output = Some(v.clone());
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.tolerance {
        cfg.tolerance = v;
    }
    if let Some(v) = c.dim {
        cfg.dim = v;
    }
    if let Some(v) = &c.radii {
        cfg.radii = v.clone();
    }
    if let Some(v) = c.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = c.n_waves {
        cfg.n_waves = v;
    }
    if let Some(v) = c.grid_spacing {
        cfg.grid_spacing = v;
    }
    if let Some(v) = c.mc_samples {
        cfg.mc_samples = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Some(n) = cli.common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_NUMERIC as u8);
        }
    }
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for_error(&e) as u8);
        }
    };
    let rows = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for_error(&e) as u8);
        }
    };
    if let Some(path) = &cfg.output {
        if let Err(e) = write_rows(path, &rows) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    if let (ExperimentKind::Verify, Some(path)) = (cfg.kind, &cli.common.ledger) {
        let written = assemble_lower_bound(cfg.tolerance.min(1e-10))
            .and_then(|r| r.to_json())
            .and_then(|j| std::fs::write(path, j).map_err(Into::into));
        if let Err(e) = written {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for_error(&e) as u8);
        }
    }
    print!("{}", summary(&rows));
    ExitCode::from(exit_code_for_rows(&rows) as u8)
}
