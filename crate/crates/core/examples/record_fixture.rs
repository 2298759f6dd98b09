//! Rebuild the fixture replay cache from the scripted replies.
//!
//! cargo run --example record_fixture

use std::path::Path;

use narrative_forge::config::validate_config;
use narrative_forge::gateway::{ProviderMode, ScriptedProvider};
use narrative_forge::pipeline::{Pipeline, Stage};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut config = validate_config(&fixtures.join("fixture.toml"))?;
    config.provider.mode = ProviderMode::Record;
    // one worker keeps the cache file in request order
    config.workers = 1;
    let scratch = tempfile::tempdir()?;
    config.output_dir = scratch.path().to_path_buf();
    if config.cache_path.exists() {
        std::fs::remove_file(&config.cache_path)?;
    }
    let script = ScriptedProvider::load(&fixtures.join("script.json"))?;
    let mut pipeline = Pipeline::new(config)?.with_provider(Box::new(script));
    for stage in [Stage::Stats, Stage::Score, Stage::Extract1, Stage::Extract2, Stage::Summarize] {
        for summary in pipeline.run(stage)? {
            println!("{summary}");
        }
    }
    Ok(())
}
