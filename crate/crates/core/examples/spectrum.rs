//! Finite-volume Hamiltonians: spectra, windows, spectral projectors and the
//! propagator.
//!
//! ```bash
//! cargo run --release --example spectrum
//! ```

use msa_lab::disorder::{sample_configuration, DisorderModel};
use msa_lab::geometry::Cube;
use msa_lab::operators::{
    assemble, propagate, spectral_projector_apply, spectrum, spectrum_window, trace_count, EnergyInterval,
    SpectralOptions,
};
use nalgebra::DVector;
use num_complex::Complex64;

fn main() -> msa_lab::Result<()> {
    let model = DisorderModel::anderson(1, 4.0)?;
    let cube = Cube::centered(1, 201)?;
    let op = assemble(&cube, &model, &sample_configuration(&model, 3));
    let (lo, hi) = op.gershgorin();
    println!("H on Λ_201: {} sites, Gershgorin [{lo:.3}, {hi:.3}]", op.n());

    let opts = SpectralOptions::default();
    let full = spectrum(&op, &opts)?;
    println!(
        "lowest eigenvalues {:?}, max residual {:.1e}, orthogonality {:.1e}",
        &full.values()[..3],
        full.residuals().iter().cloned().fold(0.0, f64::max),
        full.orth_error()
    );

    let window = EnergyInterval::closed(0.5, 1.0)?;
    let part = spectrum_window(&op, &window, &opts)?;
    // small boxes come back with the whole spectrum; select the window
    println!(
        "{} eigenvalues in [0.5, 1.0] ({} computed, trace count {})",
        part.indices_in(&window)?.len(),
        part.len(),
        trace_count(&full, &window)?
    );

    // P_I e_0 and a few times of e^{-itH} e_0
    let mut e0 = DVector::zeros(op.n());
    e0[op.n() / 2] = 1.0;
    let projected = spectral_projector_apply(&full, &window, &e0)?;
    println!("‖P_I e_0‖² = {:.3e}", projected.norm_squared());
    let psi0 = e0.map(|x| Complex64::new(x, 0.0));
    for t in [0.0, 1.0, 10.0, 100.0] {
        let psi = propagate(&full, t, &psi0)?;
        let spread: f64 = psi.iter().enumerate().map(|(i, z)| (i as f64 - 100.0).powi(2) * z.norm_sqr()).sum();
        println!("t = {t:>5}: ‖ψ‖ = {:.12}, <x²> = {spread:.2}", psi.norm());
    }

    let mut buf = Vec::new();
    op.write_coordinate(&mut buf)?;
    let text = String::from_utf8_lossy(&buf);
    println!("\ncoordinate format, first lines:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
