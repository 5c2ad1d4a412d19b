//! (γ, E)-good cubes: the boundary-to-interior resolvent norm on an energy
//! grid, with certification between grid points.
//!
//! ```bash
//! cargo run --release --example classify
//! ```

use msa_lab::disorder::{sample_configuration, DisorderModel};
use msa_lab::geometry::Cube;
use msa_lab::msa::{classify_cube, EnergyGridPolicy};
use msa_lab::operators::{assemble, EnergyInterval};

fn main() -> msa_lab::Result<()> {
    let model = DisorderModel::anderson(1, 4.0)?;
    let interval = EnergyInterval::closed(0.5, 0.6)?;
    let policy = EnergyGridPolicy::default();
    println!("{:>5} {:>5} {:>6} {:>6} {:>10} {:>9}", "side", "seed", "γ", "good", "margin", "certified");
    for side in [9u64, 15, 21, 45] {
        let cube = Cube::centered(1, side)?;
        for seed in 0..3u64 {
            let op = assemble(&cube, &model, &sample_configuration(&model, seed));
            for gamma in [0.05, 0.3] {
                let v = classify_cube(&op, &interval, gamma, &policy)?;
                println!(
                    "{side:>5} {seed:>5} {gamma:>6} {:>6} {:>10.3} {:>9}",
                    v.good, v.min_margin, v.certified
                );
            }
        }
    }

    // a clean chain far below its spectrum is good for any moderate γ
    let clean = DisorderModel::constant(1, 0.0)?;
    let cube = Cube::centered(1, 21)?;
    let op = assemble(&cube, &clean, &sample_configuration(&clean, 0));
    let v = classify_cube(&op, &EnergyInterval::closed(-3.0, -2.0)?, 0.2, &policy)?;
    let worst = v.energies.iter().filter_map(|e| e.norm).fold(0.0, f64::max);
    println!("\nclean Λ_21 on [-3, -2]: good = {}, worst norm {worst:.3e} vs e^(-γL) = {:.3e}", v.good, v.threshold);
    Ok(())
}
