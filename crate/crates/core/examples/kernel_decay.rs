//! Decay of `‖χ₁ η(H) χ₂‖` with the distance between two small regions,
//! averaged over disorder and over translates of the pair.
//!
//! ```bash
//! cargo run --release --example kernel_decay
//! ```

use msa_lab::disorder::DisorderModel;
use msa_lab::localization::{kernel_decay, KernelSettings, Placement};
use msa_lab::operators::SpectralFunction;

fn main() -> msa_lab::Result<()> {
    let model = DisorderModel::anderson(1, 4.0)?;
    for (name, eta) in [
        ("indicator of [0.5, 0.55]", SpectralFunction::Indicator { lo: 0.5, hi: 0.55 }),
        ("smooth bump on [0.5, 1.0]", SpectralFunction::Bump { lo: 0.5, hi: 1.0 }),
        ("indicator of [3.5, 4.5]", SpectralFunction::Indicator { lo: 3.5, hi: 4.5 }),
    ] {
        let r = kernel_decay(
            &model,
            &KernelSettings {
                box_side: 153,
                eta,
                region_side: 3,
                distances: vec![6, 12, 24, 48],
                samples: 60,
                seed_base: 0,
                placement: Placement::TranslationAveraged,
            },
        )?;
        println!("{name}");
        for p in &r.points {
            println!(
                "  distance {:>3}: mean {:.3e} (CI {:.2e}..{:.2e}), eigenfunction bound {:.3e}",
                p.distance, p.exact.mean, p.exact.ci.0, p.exact.ci.1, p.bound.mean
            );
        }
        println!(
            "  fitted power {:.2}, strictly decreasing {}, worst edge mass {:.1e}",
            r.exponent.unwrap_or(f64::NAN),
            r.strictly_decreasing,
            r.max_edge_mass
        );
    }
    Ok(())
}
