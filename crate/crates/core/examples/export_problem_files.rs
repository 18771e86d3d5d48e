//! Writes every bundled instance as a JSON problem file.
//!
//! ```text
//! cargo run --example export_problem_files -- [out-dir]
//! ```
//!
//! The default directory is the crate's `fixtures/`, whose contents the
//! test suite compares against the built-in constructors.

use std::path::PathBuf;

use polyrecourse::cli::ProblemFile;
use polyrecourse::fixtures;

fn main() -> polyrecourse::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir)?;
    for fx in fixtures::all()? {
        let path = dir.join(format!("{}.json", fx.name));
        let mut text = ProblemFile::from_fixture(&fx).to_json();
        text.push('\n');
        std::fs::write(&path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
