use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use unravel::runner::{self, RawConfig};

/// Run an unraveling experiment from a key = value config file.
#[derive(Parser, Debug)]
#[command(name = "unravel", version)]
struct Cli {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n-traj")]
    n_traj: Option<usize>,
    /// Output directory (overrides output_path).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all available cores. Results do not depend on it.
    #[arg(long, env = "UNRAVEL_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    dt: Option<f64>,
    /// Use the large published sizes instead of the desk defaults.
    #[arg(long = "paper-scale")]
    paper_scale: bool,
}

fn run(cli: &Cli) -> Result<runner::RunSummary, String> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| format!("{}: {e}", cli.config.display()))?;
    let located = |e: unravel::Error| format!("{}: {e}", cli.config.display());
    let mut raw = RawConfig::parse(&text).map_err(located)?;
    if let Some(seed) = cli.seed {
        raw.set("seed", seed.to_string()).map_err(located)?;
    }
    if let Some(n) = cli.n_traj {
        raw.set("n_traj", n.to_string()).map_err(located)?;
    }
    if let Some(dt) = cli.dt {
        raw.set("dt", dt.to_string()).map_err(located)?;
    }
    if let Some(out) = &cli.out {
        raw.set("output_path", out.to_string_lossy()).map_err(located)?;
    }
    if cli.paper_scale {
        raw.set("paper_scale", "true").map_err(located)?;
    }
    let config = raw.resolve().map_err(located)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| format!("thread pool: {e}"))?;
    pool.install(|| runner::run(&config)).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
