//! Synthesizes a small two-class dataset (band-limited tones vs. white
//! noise) and a hand-built band-detector model, so the pipeline can be
//! tried without downloading a real dataset:
//!
//! ```sh
//! cargo run -p relevance-lens-cli --example make_fixture -- demo
//! cd demo && relevance-lens preprocess --config config.json
//! ```

use std::path::Path;
use std::process::ExitCode;

use relevance_lens_cli::fixture::{write_fixture_dataset, write_fixture_model, FixtureSpec};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let Some(dir) = args.get(1).filter(|_| args.len() == 2) else {
        eprintln!("usage: make_fixture <output-dir>");
        return ExitCode::from(2);
    };
    let root = Path::new(dir);
    if let Err(e) = generate(root) {
        eprintln!("make_fixture: {e}");
        return ExitCode::from(1);
    }
    println!("wrote dataset, model, and config.json under {}", root.display());
    ExitCode::SUCCESS
}

fn generate(root: &Path) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all(root)?;
    let spec = FixtureSpec { files_per_class: 4, file_secs: 3.5, seed: 42 };
    write_fixture_dataset(root, &spec)?;
    write_fixture_model(&root.join("model"))?;
    let config = serde_json::json!({
        "dataset": {"audio_dir": "audio", "metadata_csv": "metadata.csv"},
        "model": "model/band_detector.json",
        "out_dir": "out",
        "seed": 12345,
    });
    std::fs::write(root.join("config.json"), serde_json::to_string_pretty(&config)?)?;
    Ok(())
}
