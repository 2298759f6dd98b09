use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use narrative_forge::config::validate_config;
use narrative_forge::gateway::ProviderMode;
use narrative_forge::pipeline::{Pipeline, PipelineError, Stage};

/// Narrative extraction and polarity-split network analysis of opinion corpora.
#[derive(Debug, Parser)]
#[command(name = "narrative-forge", version)]
struct Cli {
    /// stats, score, extract1, extract2, summarize, cluster, graph, export, compare or all
    stage: Stage,
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for model-driven stages; overrides output.workers.
    #[arg(long)]
    workers: Option<usize>,
    /// record, replay or live; overrides provider.mode.
    #[arg(long)]
    mode: Option<ProviderMode>,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = validate_config(&cli.config)?;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(PipelineError::Usage("--workers: must be at least 1".into()));
        }
        config.workers = w;
    }
    if let Some(mode) = cli.mode {
        config.provider.mode = mode;
    }
    let mut pipeline = Pipeline::new(config)?;
    for summary in pipeline.run(cli.stage)? {
        println!("{summary}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
