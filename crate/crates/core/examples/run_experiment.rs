//! Runs an experiment file the way the `msa-lab` binary does and prints the
//! report of the resulting run directory.
//!
//! ```bash
//! cargo run --release --example run_experiment -- examples/specs/estimate_w.toml
//! ```

use std::path::PathBuf;

use msa_lab::cli::{execute, report, RunArgs};

fn main() -> msa_lab::Result<()> {
    let spec = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/specs/estimate_w.toml")));
    let out = std::env::temp_dir().join("msa-lab-example");
    let args = RunArgs { spec, out: Some(out), seed: None, workers: None, budget_sites: None };
    let dir = execute(None, &args)?;
    println!("{}", report(&dir)?);
    for entry in std::fs::read_dir(&dir)? {
        println!("  {}", entry?.file_name().to_string_lossy());
    }
    Ok(())
}
