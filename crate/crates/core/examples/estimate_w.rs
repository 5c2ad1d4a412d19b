//! Resonance probability `P(dist(σ(H_Λ), E) <= exp(-L^Θ))` for growing boxes.
//!
//! ```bash
//! cargo run --release --example estimate_w
//! ```

use msa_lab::disorder::DisorderModel;
use msa_lab::msa::{empirical_bottom, estimate_w, WSettings, PILOT_SEED_BASE};

fn main() -> msa_lab::Result<()> {
    let model = DisorderModel::anderson(1, 4.0)?;
    let bottom = empirical_bottom(&model, 51, 200, PILOT_SEED_BASE)?;
    for energy in [0.0, bottom, 1.0, 2.0] {
        println!("E = {energy:.4}");
        for scale in [21u64, 51, 81] {
            let run = estimate_w(
                &model,
                &WSettings { energy, scale, theta: 0.4, q: 2.0, samples: 1000, seed_base: 0, center: None },
            )?;
            let r = &run.report;
            println!(
                "  L = {scale:>3}: P̂ = {:.4} CI [{:.4}, {:.4}], L^-2 = {:.5}, 10 L^-2 = {:.5}",
                r.estimate,
                r.ci.0,
                r.ci.1,
                r.threshold,
                10.0 * r.threshold
            );
        }
    }
    Ok(())
}
