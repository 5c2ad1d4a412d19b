//! Runs the scale induction on a clean chain far below its spectrum, where
//! every cube is good, and on the Anderson model near its band bottom, where
//! the ladder stops at the first empirical failure.
//!
//! ```bash
//! cargo run --release --example induction
//! ```

use msa_lab::disorder::DisorderModel;
use msa_lab::msa::{run_induction, EnergyGridPolicy, InductionSettings, LadderReport, MsaParameters};
use msa_lab::operators::EnergyInterval;

fn show(name: &str, r: &LadderReport) {
    println!("{name}");
    for rung in &r.rungs {
        println!(
            "  k={} L={:>4} γ={:.4} recursion {} P̂={:.3} CI [{:.3}, {:.3}] {}",
            rung.k,
            rung.scale,
            rung.gamma,
            if rung.arithmetic_ok { "ok   " } else { "floor" },
            rung.estimate.estimate,
            rung.estimate.ci.0,
            rung.estimate.ci.1,
            if rung.estimate.holds { "holds" } else { "fails" }
        );
    }
    println!("  halt: {:?}", r.halt);
}

fn main() -> msa_lab::Result<()> {
    let params = MsaParameters { dim: 1, xi0: 0.3, beta: 1.0, theta: 0.3, q: 3.0, alpha: 1.05, c1: 0.0, p: None };
    let base = InductionSettings {
        params,
        initial_scale: 15,
        initial_gamma: 2.0,
        interval: EnergyInterval::closed(-1000.0, -999.0)?,
        samples_per_rung: 4,
        rungs: 5,
        seed_base: 0,
        budget_sites: 100_000,
        grid: EnergyGridPolicy { points: 8, certify: true },
    };
    show("clean chain, I = [-1000, -999]", &run_induction(&DisorderModel::constant(1, 0.0)?, &base)?);

    let anderson = InductionSettings {
        // the smallest rate the gate admits: 2 L₀^(β-1)
        initial_gamma: 1.6,
        interval: EnergyInterval::closed(0.5, 0.55)?,
        samples_per_rung: 100,
        params: MsaParameters { beta: 0.9, ..base.params.clone() },
        ..base.clone()
    };
    show("\nAnderson W = 4, I = [0.5, 0.55]", &run_induction(&DisorderModel::anderson(1, 4.0)?, &anderson)?);
    Ok(())
}
