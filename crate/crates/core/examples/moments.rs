//! Dynamical moments `sup_t ‖|X|^p e^{-itH} P_I χ_K‖` against the
//! eigenfunction bound, for two box sizes.
//!
//! ```bash
//! cargo run --release --example moments
//! ```

use msa_lab::disorder::{sample_configuration, DisorderModel};
use msa_lab::geometry::{Cube, Region};
use msa_lab::localization::{dynamical_moment, moment_curve, position_weights, MomentSettings, TimeGrid};
use msa_lab::operators::{assemble, spectrum, EnergyInterval, SpectralOptions};

fn main() -> msa_lab::Result<()> {
    let model = DisorderModel::anderson(1, 4.0)?;
    let interval = EnergyInterval::closed(0.5, 1.0)?;

    // one configuration, the whole curve
    let cube = Cube::centered(1, 101)?;
    let op = assemble(&cube, &model, &sample_configuration(&model, 1));
    let spec = spectrum(&op, &SpectralOptions::default())?;
    let k_cube = Cube::centered(1, 5)?;
    let k = Region::clipped(&cube, &k_cube).indices();
    let times = [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0];
    let (curve, bound) = moment_curve(&spec, &interval, &position_weights(&cube, 2.0), &k, &times)?;
    for (t, m) in times.iter().zip(&curve) {
        println!("t = {t:>6}: M(t) = {m:.4}");
    }
    println!(
        "bound Σ ‖X^p φ‖ ‖χ_K φ‖ = {bound:.4} over {} eigenvalues in I",
        spec.indices_in(&interval)?.len()
    );

    for box_side in [51u64, 101, 201] {
        let r = dynamical_moment(
            &model,
            &MomentSettings {
                p: 2.0,
                interval,
                k_side: 5,
                box_side,
                times: TimeGrid::LogSpaced { count: 128, lo: 1e-2, hi: 1e3 },
                samples: 40,
                seed_base: 0,
            },
        )?;
        println!(
            "L = {box_side:>3}: mean sup {:.4}, mean bound {:.4}, max bound {:.4}, dominated {}",
            r.sup.mean, r.bound.mean, r.bound.max, r.dominated
        );
    }
    Ok(())
}
