//! Parameter gates, the feasible growth exponent, the scale ladder and the
//! decay-rate recursion.
//!
//! ```bash
//! cargo run --example scale_ladder
//! ```

use msa_lab::msa::{feasible_alpha, gamma_recursion, scale_ladder, MsaParameters};

fn main() -> msa_lab::Result<()> {
    for (d, q, xi0, p) in [(1, 9.0, 2.0, 1.0), (1, 5.0, 1.0, 0.0), (2, 10.0, 3.0, 0.5), (3, 20.0, 4.0, 2.0)] {
        let a = feasible_alpha(d, q, xi0, p)?;
        println!("d={d} q={q} ξ₀={xi0} p={p}: α_max = {:.6}, chosen α = {:.6}", a.alpha_max, a.alpha);
    }

    let alpha = feasible_alpha(1, 9.0, 2.0, 1.0)?.alpha;
    println!("\nladder from 15 with α = {alpha:.4}: {:?}", scale_ladder(15, alpha, 5));

    println!("\nγ recursion, γ₀ = 0.5, Θ = 0.4, C₁ = 2, β = 0.9");
    let (mut gamma, mut scale) = (0.5, 225u64);
    for _ in 0..4 {
        let step = gamma_recursion(gamma, scale, 1.5, 0.4, 2.0, 0.9);
        println!(
            "  L = {scale:>12} γ = {gamma:.4} -> L' = {:>12} γ' = {:.4} (floor {:.4}{})",
            step.next_scale,
            step.value,
            step.floor,
            if step.failed { ", below floor" } else { "" }
        );
        gamma = step.value;
        scale = step.next_scale;
    }

    let bad = MsaParameters { dim: 1, xi0: 2.0, beta: 0.9, theta: 0.4, q: 9.0, alpha: 1.5, c1: 0.0, p: None };
    match bad.validate() {
        Ok(()) => println!("\nα = 1.5 accepted"),
        Err(e) => println!("\nα = 1.5 rejected: {e}"),
    }
    Ok(())
}
