use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relevance_lens_cli::config::RunConfig;
use relevance_lens_cli::errors::{CliError, CliResult};
use relevance_lens_cli::commands;

#[derive(Parser)]
#[command(
    name = "relevance-lens",
    version,
    about = "Explain audio-event classifiers with LRP and DFT-LRP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed override for subsampling and stochastic augmentations.
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to these folds (comma separated), e.g. --folds 1,2,10.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    folds: Option<Vec<u16>>,
    /// Class filter; for robustness, the pitch-shift target class.
    #[arg(long, value_name = "NAME")]
    class: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Slice the raw dataset into a cache of one-second clips.
    Preprocess(CommonArgs),
    /// Explain every cached clip; one mel-domain relevance map per clip.
    Explain(CommonArgs),
    /// Aggregate maps into frequency-focus, centroid, and similarity reports.
    Analyze(CommonArgs),
    /// Accuracy deltas under high-pass, low-pass, and pitch-shift augmentations.
    Robustness(CommonArgs),
    /// Draw relevance maps or CSV grids as PPM heatmaps.
    Render {
        #[command(flatten)]
        common: CommonArgs,
        /// Map (.rlnr) or grid (.csv) file; defaults to the config's maps path.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
}

fn init_thread_pool() -> CliResult<()> {
    let Ok(raw) = std::env::var("RELEVANCE_LENS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            CliError::config(format!(
                "RELEVANCE_LENS_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size worker pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    init_thread_pool()?;
    let (common, input) = match &cli.command {
        Command::Preprocess(c)
        | Command::Explain(c)
        | Command::Analyze(c)
        | Command::Robustness(c) => (c, None),
        Command::Render { common, input } => (common, input.clone()),
    };

    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(folds) = &common.folds {
        cfg.folds = Some(folds.clone());
    }
    let class = common.class.as_deref();

    match &cli.command {
        Command::Preprocess(_) => commands::preprocess::run(&cfg, class),
        Command::Explain(_) => commands::explain::run(&cfg, class),
        Command::Analyze(_) => commands::analyze::run(&cfg, class),
        Command::Robustness(_) => commands::robustness::run(&cfg, class),
        Command::Render { .. } => commands::render::run(&cfg, input.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relevance-lens: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
