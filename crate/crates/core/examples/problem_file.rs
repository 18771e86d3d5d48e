//! Loading a JSON problem file, running the loop named by its settings and
//! writing the trace as CSV.
//!
//! ```text
//! cargo run --release --example problem_file -- [path.json]
//! ```

use std::path::PathBuf;

use polyrecourse::cli::ProblemFile;
use polyrecourse::fixtures::Algorithm;

fn main() -> polyrecourse::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/polytope_recourse.json"));
    let file = ProblemFile::load(&path)?;
    let problem = file.build()?;
    let settings = file
        .settings
        .clone()
        .ok_or_else(|| polyrecourse::Error::Config("the file has no settings".into()))?;
    println!(
        "{}: n1 = {}, n2 = {}, n0 = {}",
        problem.name,
        problem.model.n1(),
        problem.model.n2(),
        problem.model.n0()
    );
    let cfg = settings.config();
    let r = match settings.algorithm {
        Algorithm::General => problem.algorithm_general(&cfg)?,
        Algorithm::FiniteSupport => problem.algorithm_finite_support(&cfg)?,
    };
    print!("{}", r.to_csv());
    Ok(())
}
