//! Regenerates the bundled synthetic fixture.
//!
//! cargo run -p reasonpath-cli --example synth_fixture -- crates/cli/fixtures/synthetic

use std::path::PathBuf;

use reasonpath_cli::synth::{generate, SynthSpec};

fn main() -> anyhow::Result<()> {
    let dir: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures/synthetic"));
    let corpus = generate(&SynthSpec::default());
    corpus.write_to(&dir)?;
    println!(
        "{} samples, {} templates -> {}",
        corpus.samples.len(),
        corpus.n_templates,
        dir.display()
    );
    Ok(())
}
