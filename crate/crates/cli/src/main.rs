use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_langevin_cli::config::Experiment;
use adaptive_langevin_cli::{exit, exit_code, exit_code_for, run, Context, ExperimentConfig};
use clap::Parser;

/// Output directory override, taking precedence over the config but not `--out`.
const OUT_ENV: &str = "ADALANG_OUT";

#[derive(Parser)]
#[command(name = "adalang", version, about = "Adaptive-timestep Langevin experiments")]
struct Cli {
    /// Experiment to run; must match `experiment` in the config.
    #[arg(value_enum)]
    command: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: $ADALANG_OUT, then `out` in the config, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the sampler seed (and the bayes-gen seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: Cli) -> adaptive_langevin::Result<i32> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.experiment != cli.command {
        eprintln!("error: config is for '{:?}', not '{:?}'", cfg.experiment, cli.command);
        return Ok(exit::VALIDATION);
    }
    if let Some(seed) = cli.seed {
        if let Some(s) = cfg.sampler.as_mut() {
            s.seed = seed;
        }
        if let Some(b) = cfg.bayes_gen.as_mut() {
            b.seed = seed;
        }
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return Ok(exit::VALIDATION);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("global pool is configured once");
    }
    let base = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    let out = cli
        .out
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.out.as_ref().map(|o| base.join(o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(&cfg, &Context { out, base })?;
    Ok(exit_code(outcome))
}
