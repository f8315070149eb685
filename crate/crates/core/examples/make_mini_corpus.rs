//! Regenerates the bundled mini corpus: `cargo run --example make_mini_corpus [DIR]`.

use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mini"));
    newsmon_core::pipeline::write_mini_bundle(&dir, 200, 2020)?;
    println!("wrote {}", dir.display());
    Ok(())
}
