//! Centers of localization of band-bottom eigenfunctions, their tail masses,
//! and the eigenfunction decay inequality on a family of sub-cubes.
//!
//! ```bash
//! cargo run --release --example centers_edi
//! ```

use msa_lab::disorder::{sample_configuration, DisorderModel};
use msa_lab::geometry::Cube;
use msa_lab::localization::{centers, count_in_window, cube_family, edi_check};
use msa_lab::operators::{assemble, spectrum, EnergyInterval, SpectralOptions};

fn main() -> msa_lab::Result<()> {
    let model = DisorderModel::anderson(1, 4.0)?;
    let interval = EnergyInterval::closed(0.5, 1.0)?;
    let cube = Cube::centered(1, 201)?;
    let mut family = cube_family(&cube, 9)?;
    family.extend(cube_family(&cube, 15)?);

    let mut all = Vec::new();
    for seed in 0..5u64 {
        let op = assemble(&cube, &model, &sample_configuration(&model, seed));
        let spec = spectrum(&op, &SpectralOptions::default())?;
        let recs = centers(&spec, &interval, &[9, 21])?;
        for r in &recs {
            let tails: Vec<String> = r.tail_masses.iter().map(|(l, m)| format!("outside Λ_{l}: {m:.1e}")).collect();
            println!(
                "seed {seed} E = {:.4} center {} |φ(center)|² = {:.3} rate {:.3} {}",
                r.eigenvalue,
                r.center,
                r.max_mass,
                r.decay_rate.unwrap_or(f64::NAN),
                tails.join(", ")
            );
        }
        let edi = edi_check(&op, &spec, &interval, &family)?;
        println!(
            "  EDI: {} probes, {} resonant, largest ratio {:.3e}, all finite {}",
            edi.entries.len(),
            edi.resonant_cubes,
            edi.c_edi,
            edi.all_finite
        );
        all.push(recs);
    }

    let counts = count_in_window(&all, 1, &[51, 101, 201]);
    println!("\nmean centers in Λ_L(0): {:?}, growth exponent {:.3}", counts.mean_counts, counts.kappa.unwrap_or(f64::NAN));
    Ok(())
}
