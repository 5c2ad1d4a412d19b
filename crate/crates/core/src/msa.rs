//! The multi-scale analysis engine.
//!
//! Parameter gates, the suitable-scale ladder `L_{k+1} ∈ [L_k^α, L_k^α + 6]`,
//! the rate recursion, `(γ, E)`-goodness of cubes and Monte Carlo estimates
//! of the two-cube property `G(I, L, γ, ξ)` and the Wegner property
//! `W(I, L, Θ, q)` with Clopper–Pearson intervals.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{sample_configuration, DisorderModel};
use crate::error::{Error, Result};
use crate::geometry::{is_suitable_side, make_cube, region, Cube, LatticePoint, RegionKind};
use crate::operators::{assemble, EnergyInterval, Resolvent};
use crate::stats::clopper_pearson;

/// Confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsaParameters {
    pub dim: usize,
    pub xi0: f64,
    pub beta: f64,
    pub theta: f64,
    pub q: f64,
    pub alpha: f64,
    #[serde(default)]
    pub c1: f64,
    /// Moment power, when the run targets dynamical localization.
    #[serde(default)]
    pub p: Option<f64>,
}

fn infeasible(constraint: &'static str, detail: String) -> Error {
    Error::Infeasible { constraint, detail }
}

/// `ξ = min(ξ₀, (q - d)/4)`.
pub fn effective_xi(dim: usize, q: f64, xi0: f64) -> f64 {
    xi0.min(0.25 * (q - dim as f64))
}

impl MsaParameters {
    pub fn xi(&self) -> f64 {
        effective_xi(self.dim, self.q, self.xi0)
    }

    /// Checks every inequality the induction and the moment bound rely on.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim as f64;
        if self.dim == 0 {
            return Err(infeasible("d >= 1", format!("d = {}", self.dim)));
        }
        if !(self.theta > 0.0 && self.theta < 0.5) {
            return Err(infeasible("0 < Θ < 1/2", format!("Θ = {}", self.theta)));
        }
        if !(self.q > d) {
            return Err(infeasible("q > d", format!("q = {}, d = {}", self.q, self.dim)));
        }
        if !(self.beta > 2.0 * self.theta) {
            return Err(infeasible("β > 2Θ", format!("β = {}, Θ = {}", self.beta, self.theta)));
        }
        if !(self.xi0 > 0.0) {
            return Err(infeasible("ξ₀ > 0", format!("ξ₀ = {}", self.xi0)));
        }
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(infeasible("1 < α < 2", format!("α = {}", self.alpha)));
        }
        if !(self.c1 >= 0.0) {
            return Err(infeasible("C₁ >= 0", format!("C₁ = {}", self.c1)));
        }
        let xi = self.xi();
        let lhs = 4.0 * d * (self.alpha - 1.0) / (2.0 - self.alpha);
        if lhs > xi {
            return Err(infeasible(
                "4d(α-1)/(2-α) <= min(ξ₀, (q-d)/4)",
                format!("{lhs} > {xi}"),
            ));
        }
        if let Some(p) = self.p {
            if !(p >= 0.0) {
                return Err(infeasible("p >= 0", format!("p = {p}")));
            }
            if p >= 2.0 * xi {
                return Err(infeasible("p < 2ξ", format!("p = {p}, 2ξ = {}", 2.0 * xi)));
            }
            let lhs = 3.0 * d * (self.alpha - 1.0) + self.alpha * p;
            if lhs >= 2.0 * xi {
                return Err(infeasible("3d(α-1) + αp < 2ξ", format!("{lhs} >= {}", 2.0 * xi)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaChoice {
    /// Supremum of admissible `α`; the moment constraint is strict there.
    pub alpha_max: f64,
    /// `1 + 0.9 (α_max - 1)`, strictly inside both constraints.
    pub alpha: f64,
}

/// Largest `α ∈ (1, 2)` with `4d(α-1)/(2-α) <= ξ` and `3d(α-1) + αp < 2ξ`.
pub fn feasible_alpha(dim: usize, q: f64, xi0: f64, p: f64) -> Result<AlphaChoice> {
    let d = dim as f64;
    if !(q > d) {
        return Err(infeasible("q > d", format!("q = {q}, d = {dim}")));
    }
    if !(xi0 > 0.0) {
        return Err(infeasible("ξ₀ > 0", format!("ξ₀ = {xi0}")));
    }
    let xi = effective_xi(dim, q, xi0);
    if !(p >= 0.0) || p >= 2.0 * xi {
        return Err(infeasible("p < 2ξ", format!("p = {p}, 2ξ = {}", 2.0 * xi)));
    }
    // 4d(α-1) <= ξ(2-α)  <=>  α <= (4d + 2ξ)/(4d + ξ)
    let from_growth = (4.0 * d + 2.0 * xi) / (4.0 * d + xi);
    // (3d + p) α < 2ξ + 3d
    let from_moment = (2.0 * xi + 3.0 * d) / (3.0 * d + p);
    let alpha_max = from_growth.min(from_moment).min(2.0);
    Ok(AlphaChoice {
        alpha_max,
        alpha: 1.0 + 0.9 * (alpha_max - 1.0),
    })
}

/// Smallest odd multiple of three in `[L^α, L^α + 6]`.
pub fn next_scale(scale: u64, alpha: f64) -> u64 {
    debug_assert!(alpha > 1.0);
    let x = (scale as f64).powf(alpha);
    let m = x.ceil() as u64;
    let r = m % 6;
    m + (9 - r) % 6
}

/// `L_0, L_1, ...` by repeated [`next_scale`], stopping before `u64` overflow
/// or at `count` entries.
pub fn scale_ladder(initial: u64, alpha: f64, count: usize) -> Vec<u64> {
    let mut out = vec![initial];
    while out.len() < count {
        let last = *out.last().unwrap();
        if (last as f64).powf(alpha) > 1e17 {
            break;
        }
        out.push(next_scale(last, alpha));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaStep {
    pub next_scale: u64,
    /// `γ_L (1 - 8 L^{1-α}) - C₁/L - 6 L^{α(Θ-1)}`.
    pub value: f64,
    /// `(L')^{1-β}`.
    pub floor: f64,
    pub failed: bool,
}

pub fn gamma_recursion(gamma: f64, scale: u64, alpha: f64, theta: f64, c1: f64, beta: f64) -> GammaStep {
    let l = scale as f64;
    let value = gamma * (1.0 - 8.0 * l.powf(1.0 - alpha)) - c1 / l - 6.0 * l.powf(alpha * (theta - 1.0));
    let next = next_scale(scale, alpha);
    let floor = (next as f64).powf(1.0 - beta);
    GammaStep {
        next_scale: next,
        value,
        floor,
        failed: value < floor,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGridPolicy {
    pub points: usize,
    pub certify: bool,
}

impl Default for EnergyGridPolicy {
    fn default() -> Self {
        EnergyGridPolicy {
            points: 32,
            certify: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyVerdict {
    pub energy: f64,
    /// `‖χ^out R_Λ(E) χ^int‖`; `None` when the energy is resonant.
    pub norm: Option<f64>,
    pub good: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessVerdict {
    pub cube: Cube,
    pub seed: Option<u64>,
    pub gamma: f64,
    /// `exp(-γL)`.
    pub threshold: f64,
    pub energies: Vec<EnergyVerdict>,
    pub good: bool,
    /// `min_E (log exp(-γL) - log norm)`; `-∞` if some energy is resonant.
    pub min_margin: f64,
    /// Good verdicts are certified when the resolvent identity bounds the
    /// norm between grid points; bad verdicts always have a witness energy.
    pub certified: bool,
}

/// Block norms `‖χ^out R(E) χ^int‖` on a list of energies.
pub fn shell_norms(res: &Resolvent<'_>, energies: &[f64]) -> Result<Vec<Option<f64>>> {
    let cube = res.operator().cube();
    let int = region(cube, RegionKind::Interior)?.indices();
    let out = region(cube, RegionKind::Boundary)?.indices();
    energies
        .iter()
        .map(|&e| match res.block_norm(e, &out, &int) {
            Ok(v) => Ok(Some(v)),
            Err(Error::SingularEnergy { .. }) => Ok(None),
            Err(other) => Err(other),
        })
        .collect()
}

/// Classifies a cube as `(γ, E)`-good for every energy of the grid on `energies`.
pub fn classify_cube(
    op: &crate::operators::BoxOperator,
    energies: &EnergyInterval,
    gamma: f64,
    policy: &EnergyGridPolicy,
) -> Result<GoodnessVerdict> {
    let res = Resolvent::new(op);
    classify_with(&res, energies, gamma, policy)
}

pub fn classify_with(
    res: &Resolvent<'_>,
    energies: &EnergyInterval,
    gamma: f64,
    policy: &EnergyGridPolicy,
) -> Result<GoodnessVerdict> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid(format!("γ must be nonnegative, got {gamma}")));
    }
    energies.validate()?;
    let op = res.operator();
    let cube = op.cube().clone();
    let l = cube.side() as f64;
    let threshold = (-gamma * l).exp();
    let grid = energies.grid(policy.points);
    let norms = shell_norms(res, &grid)?;
    let verdicts: Vec<EnergyVerdict> = grid
        .iter()
        .zip(&norms)
        .map(|(&e, n)| EnergyVerdict {
            energy: e,
            norm: *n,
            good: n.is_some_and(|v| v <= threshold),
        })
        .collect();
    let good = verdicts.iter().all(|v| v.good);
    let min_margin = verdicts
        .iter()
        .map(|v| v.norm.map_or(f64::NEG_INFINITY, |n| -gamma * l - n.ln()))
        .fold(f64::INFINITY, f64::min);
    let certified = if !good {
        true
    } else if grid.len() == 1 || !policy.certify {
        grid.len() == 1 && energies.lo == energies.hi
    } else {
        certify_gaps(res, &verdicts, threshold)
    };
    Ok(GoodnessVerdict {
        cube,
        seed: op.seed(),
        gamma,
        threshold,
        energies: verdicts,
        good,
        min_margin,
        certified,
    })
}

/// Between neighbouring grid energies `E_i < E < E_{i+1}` the resolvent
/// identity gives `‖χ R(E) χ‖ <= ‖χ R(E_k) χ‖ + |E - E_k| ‖R(E_k)‖ ‖R(E)‖`
/// with `E_k` the nearer endpoint.
fn certify_gaps(res: &Resolvent<'_>, verdicts: &[EnergyVerdict], threshold: f64) -> bool {
    verdicts.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (Some(na), Some(nb)) = (a.norm, b.norm) else { return false };
        let seg = res.distance_to_interval(a.energy, b.energy);
        if seg <= 0.0 {
            return false;
        }
        let half = 0.5 * (b.energy - a.energy);
        let da = res.distance_to_spectrum(a.energy);
        let db = res.distance_to_spectrum(b.energy);
        let bound_a = na + half / (da * seg);
        let bound_b = nb + half / (db * seg);
        bound_a.max(bound_b) <= threshold
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    G,
    W,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub hypothesis: Hypothesis,
    pub scale: u64,
    pub energy_lo: f64,
    pub energy_hi: f64,
    pub gamma: Option<f64>,
    pub xi: Option<f64>,
    pub theta: Option<f64>,
    pub q: Option<f64>,
    pub samples: u64,
    pub successes: u64,
    pub estimate: f64,
    pub ci: (f64, f64),
    /// `1 - L^{-2ξ}` for G, `L^{-q}` for W.
    pub threshold: f64,
    /// G holds iff the CI lower bound exceeds the threshold; W holds iff the
    /// CI upper bound stays below it. Deterministic models use the exact value.
    pub holds: bool,
    pub exact: bool,
    pub seed_first: u64,
    pub seed_last: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPlacement {
    pub x: LatticePoint,
    pub y: LatticePoint,
}

impl PairPlacement {
    /// `x = 0`, `y = (L, 0, ..., 0)`.
    pub fn default_for(dim: usize, scale: u64) -> Self {
        PairPlacement {
            x: LatticePoint::origin(dim),
            y: LatticePoint::along_first_axis(dim, scale as i64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSettings {
    pub interval: EnergyInterval,
    pub scale: u64,
    pub gamma: f64,
    pub xi: f64,
    pub samples: u64,
    pub seed_base: u64,
    pub placement: Option<PairPlacement>,
    pub grid: EnergyGridPolicy,
}

/// Outcome of one configuration for the two-cube event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub seed: u64,
    pub success: bool,
    /// `min_E max(r_x(E), r_y(E))` with `r(E) = -log(norm)/L` (`-∞` if
    /// resonant): the largest `γ` for which this configuration succeeds.
    pub pair_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GRun {
    pub report: EstimateReport,
    pub samples: Vec<PairSample>,
}

fn rate(norm: Option<f64>, l: f64) -> f64 {
    norm.map_or(f64::NEG_INFINITY, |n| -n.ln() / l)
}

fn sample_pair(model: &DisorderModel, s: &GSettings, placement: &PairPlacement, seed: u64) -> Result<PairSample> {
    let config = sample_configuration(model, seed);
    let grid = s.interval.grid(s.grid.points);
    let l = s.scale as f64;
    let threshold = (-s.gamma * l).exp();
    let mut per_cube = Vec::with_capacity(2);
    for center in [&placement.x, &placement.y] {
        let cube = make_cube(center.clone(), s.scale)?;
        let op = assemble(&cube, model, &config);
        let res = Resolvent::new(&op);
        per_cube.push(shell_norms(&res, &grid)?);
    }
    let mut success = true;
    let mut pair_rate = f64::INFINITY;
    for k in 0..grid.len() {
        let (nx, ny) = (per_cube[0][k], per_cube[1][k]);
        let good_x = nx.is_some_and(|v| v <= threshold);
        let good_y = ny.is_some_and(|v| v <= threshold);
        success &= good_x || good_y;
        pair_rate = pair_rate.min(rate(nx, l).max(rate(ny, l)));
    }
    Ok(PairSample { seed, success, pair_rate })
}

fn binomial_report(
    hypothesis: Hypothesis,
    successes: u64,
    n: u64,
    exact: bool,
    threshold: f64,
) -> (f64, (f64, f64), bool) {
    let estimate = successes as f64 / n as f64;
    let ci = if exact { (estimate, estimate) } else { clopper_pearson(successes, n, CONFIDENCE) };
    let holds = match hypothesis {
        Hypothesis::G => ci.0 >= threshold,
        Hypothesis::W => ci.1 <= threshold,
    };
    (estimate, ci, holds)
}

/// Monte Carlo estimate of `P{∀E ∈ I: Λ_L(x) or Λ_L(y) is (γ,E)-good}`.
pub fn estimate_g(model: &DisorderModel, s: &GSettings) -> Result<GRun> {
    if s.samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let placement = s
        .placement
        .clone()
        .unwrap_or_else(|| PairPlacement::default_for(model.dimension, s.scale));
    if crate::geometry::lattice_distance(&placement.x, &placement.y)? < s.scale {
        return Err(Error::invalid("pair placement needs d(x, y) >= L"));
    }
    let samples: Vec<PairSample> = (0..s.samples)
        .into_par_iter()
        .map(|i| sample_pair(model, s, &placement, s.seed_base + i))
        .collect::<Result<_>>()?;
    let successes = samples.iter().filter(|p| p.success).count() as u64;
    let threshold = 1.0 - (s.scale as f64).powf(-2.0 * s.xi);
    let exact = model.measure.is_deterministic();
    let (estimate, ci, holds) = binomial_report(Hypothesis::G, successes, s.samples, exact, threshold);
    Ok(GRun {
        report: EstimateReport {
            hypothesis: Hypothesis::G,
            scale: s.scale,
            energy_lo: s.interval.lo,
            energy_hi: s.interval.hi,
            gamma: Some(s.gamma),
            xi: Some(s.xi),
            theta: None,
            q: None,
            samples: s.samples,
            successes,
            estimate,
            ci,
            threshold,
            holds,
            exact,
            seed_first: s.seed_base,
            seed_last: s.seed_base + s.samples - 1,
        },
        samples,
    })
}

/// Re-scores a G run at another `γ` from the stored pair rates: a sample
/// succeeds at `γ` iff its pair rate is at least `γ`.
pub fn rescore_g(run: &GRun, gamma: f64) -> GRun {
    let samples: Vec<PairSample> = run
        .samples
        .iter()
        .map(|p| PairSample {
            success: p.pair_rate >= gamma,
            ..p.clone()
        })
        .collect();
    let successes = samples.iter().filter(|p| p.success).count() as u64;
    let r = &run.report;
    let (estimate, ci, holds) = binomial_report(Hypothesis::G, successes, r.samples, r.exact, r.threshold);
    GRun {
        report: EstimateReport {
            gamma: Some(gamma),
            successes,
            estimate,
            ci,
            holds,
            ..r.clone()
        },
        samples,
    }
}

/// A `(γ, ξ)` pair for which the sampled two-cube probability certifies G.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GCertificate {
    pub gamma: f64,
    /// CI lower bound exceeds `1 - L^{-2ξ'}` for every `ξ' < xi_sup`.
    pub xi_sup: f64,
    pub successes: u64,
    pub samples: u64,
    pub lower_bound: f64,
}

/// Largest `γ` whose success count gives a Clopper–Pearson lower bound above
/// `1 - L^{-2 ξ_floor}`, read off the per-sample pair rates.
pub fn certify_g(samples: &[PairSample], scale: u64, xi_floor: f64) -> Option<GCertificate> {
    let n = samples.len() as u64;
    if n == 0 {
        return None;
    }
    let mut rates: Vec<f64> = samples.iter().map(|s| s.pair_rate).collect();
    rates.sort_by(|a, b| b.total_cmp(a));
    let l = scale as f64;
    let threshold = 1.0 - l.powf(-2.0 * xi_floor);
    for k in 1..=n {
        let gamma = rates[(k - 1) as usize];
        if !gamma.is_finite() || gamma <= 0.0 {
            break;
        }
        // ties at gamma all succeed too
        let count = rates.iter().filter(|r| **r >= gamma).count() as u64;
        let (lo, _) = clopper_pearson(count, n, CONFIDENCE);
        if lo > threshold {
            let xi_sup = -(1.0 - lo).ln() / (2.0 * l.ln());
            return Some(GCertificate {
                gamma,
                xi_sup,
                successes: count,
                samples: n,
                lower_bound: lo,
            });
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WSettings {
    pub energy: f64,
    pub scale: u64,
    pub theta: f64,
    pub q: f64,
    pub samples: u64,
    pub seed_base: u64,
    #[serde(default)]
    pub center: Option<LatticePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSample {
    pub seed: u64,
    pub distance: f64,
    /// `distance` is only the Gershgorin lower bound (already above the
    /// resonance threshold).
    pub lower_bound: bool,
    pub event: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WRun {
    pub report: EstimateReport,
    pub samples: Vec<ResonanceSample>,
}

/// Monte Carlo estimate of `P{dist(σ(H_Λ), E) <= exp(-L^Θ)}`.
pub fn estimate_w(model: &DisorderModel, s: &WSettings) -> Result<WRun> {
    if s.samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if s.scale.is_multiple_of(2) {
        return Err(Error::invalid("scale must be odd"));
    }
    let center = s.center.clone().unwrap_or_else(|| LatticePoint::origin(model.dimension));
    let cube = make_cube(center, s.scale)?;
    let eps = (-(s.scale as f64).powf(s.theta)).exp();
    let samples: Vec<ResonanceSample> = (0..s.samples)
        .into_par_iter()
        .map(|i| {
            let seed = s.seed_base + i;
            let op = assemble(&cube, model, &sample_configuration(model, seed));
            let (lo, hi) = op.gershgorin();
            let outside = (lo - s.energy).max(s.energy - hi);
            let (distance, lower_bound) = if outside > eps {
                (outside, true)
            } else {
                (Resolvent::new(&op).distance_to_spectrum(s.energy), false)
            };
            ResonanceSample {
                seed,
                distance,
                lower_bound,
                event: distance <= eps,
            }
        })
        .collect();
    let events = samples.iter().filter(|r| r.event).count() as u64;
    let threshold = (s.scale as f64).powf(-s.q);
    let exact = model.measure.is_deterministic();
    let (estimate, ci, holds) = binomial_report(Hypothesis::W, events, s.samples, exact, threshold);
    Ok(WRun {
        report: EstimateReport {
            hypothesis: Hypothesis::W,
            scale: s.scale,
            energy_lo: s.energy,
            energy_hi: s.energy,
            gamma: None,
            xi: None,
            theta: Some(s.theta),
            q: Some(s.q),
            samples: s.samples,
            successes: events,
            estimate,
            ci,
            threshold,
            holds,
            exact,
            seed_first: s.seed_base,
            seed_last: s.seed_base + s.samples - 1,
        },
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionSettings {
    pub params: MsaParameters,
    pub initial_scale: u64,
    pub initial_gamma: f64,
    pub interval: EnergyInterval,
    pub samples_per_rung: u64,
    pub rungs: usize,
    pub seed_base: u64,
    pub budget_sites: u64,
    pub grid: EnergyGridPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RungReport {
    pub k: usize,
    pub scale: u64,
    pub gamma: f64,
    /// `ξ₀` at the first rung, `min(ξ₀, (q-d)/4)` afterwards.
    pub xi: f64,
    /// False when the recursion fell below `L_k^{1-β}`; the rung is then
    /// probed at that floor.
    pub arithmetic_ok: bool,
    pub estimate: EstimateReport,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Halt {
    Completed,
    EmpiricalFailure { k: usize },
    BudgetExceeded { k: usize, sites: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub rungs: Vec<RungReport>,
    pub halt: Halt,
}

/// Runs the scale induction: each rung estimates G at `(L_k, γ_k)` and the
/// next rung follows from [`next_scale`] and [`gamma_recursion`].
pub fn run_induction(model: &DisorderModel, s: &InductionSettings) -> Result<LadderReport> {
    let p = &s.params;
    p.validate()?;
    if p.dim != model.dimension {
        return Err(Error::DimensionMismatch {
            expected: model.dimension,
            got: p.dim,
        });
    }
    if !is_suitable_side(s.initial_scale) {
        return Err(Error::invalid(format!("initial scale {} is not suitable", s.initial_scale)));
    }
    let required = 2.0 * (s.initial_scale as f64).powf(p.beta - 1.0);
    if s.initial_gamma < required {
        return Err(infeasible(
            "γ₀ >= 2 L₀^{β-1}",
            format!("γ₀ = {}, 2 L₀^(β-1) = {required}", s.initial_gamma),
        ));
    }
    let mut rungs = Vec::new();
    let mut scale = s.initial_scale;
    let mut gamma = s.initial_gamma;
    let mut arithmetic_ok = true;
    for k in 0..s.rungs {
        let sites = (scale as u128).pow(p.dim as u32);
        if sites > s.budget_sites as u128 {
            return Ok(LadderReport {
                rungs,
                halt: Halt::BudgetExceeded {
                    k,
                    sites: sites.min(u64::MAX as u128) as u64,
                },
            });
        }
        let xi = if k == 0 { p.xi0 } else { p.xi() };
        let start = Instant::now();
        let run = estimate_g(
            model,
            &GSettings {
                interval: s.interval,
                scale,
                gamma,
                xi,
                samples: s.samples_per_rung,
                seed_base: s.seed_base + k as u64 * s.samples_per_rung,
                placement: None,
                grid: s.grid,
            },
        )?;
        let holds = run.report.holds;
        rungs.push(RungReport {
            k,
            scale,
            gamma,
            xi,
            arithmetic_ok,
            estimate: run.report,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if !holds {
            return Ok(LadderReport {
                rungs,
                halt: Halt::EmpiricalFailure { k },
            });
        }
        let step = gamma_recursion(gamma, scale, p.alpha, p.theta, p.c1, p.beta);
        arithmetic_ok = !step.failed;
        gamma = if step.failed { step.floor } else { step.value };
        scale = step.next_scale;
    }
    Ok(LadderReport {
        rungs,
        halt: Halt::Completed,
    })
}

/// Largest empirical GRI ratio over configurations and energies for the
/// nested pair `Λ_inner(0) ⊂ Λ_outer(0)`, with `A = Λ^int` and `B = Λ' \ Λ`.
pub fn measure_c_geom(
    model: &DisorderModel,
    inner: u64,
    outer: u64,
    energies: &[f64],
    seeds: std::ops::Range<u64>,
) -> Result<f64> {
    let d = model.dimension;
    let small = Cube::centered(d, inner)?;
    let big = Cube::centered(d, outer)?;
    let a = region(&small, RegionKind::Interior)?.sites().to_vec();
    let b: Vec<LatticePoint> = big.sites().into_iter().filter(|s| !small.contains(s)).collect();
    let ratios: Vec<f64> = seeds
        .into_par_iter()
        .map(|seed| {
            let config = sample_configuration(model, seed);
            energies
                .iter()
                .filter_map(|&e| {
                    crate::operators::geometric_resolvent_ratio(model, &config, &small, &big, &a, &b, e).ok()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Seeds of pilot runs start here, away from the sampling seeds.
pub const PILOT_SEED_BASE: u64 = 1 << 40;

/// Smallest ground-state energy of `H_{Λ_side(0)}` over pilot configurations:
/// the empirical bottom of the spectrum `E_min^emp`.
pub fn empirical_bottom(model: &DisorderModel, side: u64, samples: u64, seed_base: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::invalid("need at least one pilot sample"));
    }
    let cube = Cube::centered(model.dimension, side)?;
    let lows: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let op = assemble(&cube, model, &sample_configuration(model, seed_base + i));
            op.to_dense().symmetric_eigenvalues().min()
        })
        .collect();
    Ok(lows.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::BoxOperator;
    use approx::assert_abs_diff_eq;

    #[test]
    fn alpha_one_dimensional() {
        let a = feasible_alpha(1, 9.0, 2.0, 1.0).unwrap();
        assert_eq!(a.alpha_max, 4.0 / 3.0);
        assert_abs_diff_eq!(a.alpha, 1.0 + 0.3, epsilon = 1e-15);
        assert!(feasible_alpha(1, 9.0, 2.0, 4.0).is_err());
    }

    #[test]
    fn alpha_two_dimensional_grid_scan() {
        let a = feasible_alpha(2, 16.0, 3.0, 0.0).unwrap();
        assert_abs_diff_eq!(a.alpha_max, 14.0 / 11.0, epsilon = 1e-15);
        // scan: largest grid α satisfying 8(α-1)/(2-α) <= 3
        let scan = (0..=1_000_000)
            .map(|k| 1.0 + k as f64 * 1e-6)
            .filter(|&al| al < 2.0 && 8.0 * (al - 1.0) / (2.0 - al) <= 3.0)
            .fold(1.0, f64::max);
        assert!((scan - a.alpha_max).abs() < 2e-6);
    }

    #[test]
    fn next_scale_examples() {
        assert_eq!(next_scale(15, 1.5), 63);
        assert_eq!(next_scale(9, 1.2), 15);
        assert_eq!(next_scale(21, 1.1), 33);
        assert_eq!(scale_ladder(15, 1.5, 3), vec![15, 63, 501]);
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_recursion(0.5, 225, 1.5, 0.4, 2.0, 0.9);
        let want = 0.5 * (1.0 - 8.0 / 15.0) - 2.0 / 225.0 - 6.0 * 225f64.powf(-0.9);
        assert_abs_diff_eq!(g.value, want, epsilon = 1e-15);
        assert_abs_diff_eq!(g.value, 0.1786, epsilon = 1e-4);

        let g = gamma_recursion(1.0, 225, 1.5, 0.3, 1.0, 1.0);
        assert_eq!(g.floor, 1.0);
        assert!(g.failed);
        assert!(g.value < 1.0);

        // C₁ = 0, Θ → 0, L → ∞: the rate is preserved
        let g = gamma_recursion(0.7, 3u64.pow(30), 1.5, 1e-9, 0.0, 0.9);
        assert_abs_diff_eq!(g.value, 0.7, epsilon = 1e-5);
    }

    #[test]
    fn parameter_gates() {
        let ok = MsaParameters {
            dim: 1,
            xi0: 2.0,
            beta: 0.9,
            theta: 0.4,
            q: 9.0,
            alpha: 1.3,
            c1: 2.0,
            p: Some(1.0),
        };
        ok.validate().unwrap();
        let bad_alpha = MsaParameters { alpha: 1.4, ..ok.clone() };
        match bad_alpha.validate() {
            Err(Error::Infeasible { constraint, .. }) => assert!(constraint.starts_with("4d(α-1)")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(MsaParameters { theta: 0.5, ..ok.clone() }.validate().is_err());
        assert!(MsaParameters { q: 1.0, ..ok.clone() }.validate().is_err());
        assert!(MsaParameters { beta: 0.7, ..ok.clone() }.validate().is_err());
        assert!(MsaParameters { p: Some(4.0), ..ok.clone() }.validate().is_err());
    }

    #[test]
    fn gamma_zero_far_energy_is_good() {
        let cube = Cube::centered(1, 9).unwrap();
        let op = BoxOperator::from_potential(&cube, vec![0.0; 9]).unwrap();
        let v = classify_cube(&op, &EnergyInterval::point(-1.0), 0.0, &EnergyGridPolicy::default()).unwrap();
        assert!(v.good && v.certified);
    }

    #[test]
    fn eigenvalue_energy_is_bad() {
        let cube = Cube::centered(1, 3).unwrap();
        let op = BoxOperator::from_potential(&cube, vec![0.0; 3]).unwrap();
        let v = classify_cube(&op, &EnergyInterval::point(2.0), 0.0, &EnergyGridPolicy::default()).unwrap();
        assert!(!v.good);
        assert_eq!(v.energies[0].norm, None);
        assert_eq!(v.min_margin, f64::NEG_INFINITY);
    }

    #[test]
    fn monotone_in_gamma() {
        let model = DisorderModel::anderson(1, 4.0).unwrap();
        let cube = Cube::centered(1, 15).unwrap();
        let i = EnergyInterval::closed(0.3, 0.6).unwrap();
        for seed in 0..10 {
            let op = assemble(&cube, &model, &sample_configuration(&model, seed));
            let mut was_good = true;
            for k in 0..40 {
                let g = k as f64 * 0.02;
                let v = classify_cube(&op, &i, g, &EnergyGridPolicy { points: 8, certify: false }).unwrap();
                assert!(was_good || !v.good, "good at larger γ after bad at smaller");
                was_good = v.good;
            }
        }
    }

    #[test]
    fn huge_gamma_never_succeeds() {
        let model = DisorderModel::anderson(1, 4.0).unwrap();
        let run = estimate_g(
            &model,
            &GSettings {
                interval: EnergyInterval::closed(0.5, 0.6).unwrap(),
                scale: 9,
                gamma: 1e3,
                xi: 0.5,
                samples: 20,
                seed_base: 0,
                placement: None,
                grid: EnergyGridPolicy { points: 4, certify: false },
            },
        )
        .unwrap();
        assert_eq!(run.report.successes, 0);
        assert!(!run.report.holds);
    }

    #[test]
    fn deterministic_w_and_gershgorin() {
        let model = DisorderModel::constant(1, 0.0).unwrap();
        // Λ_9 clean spectrum 2 - 2cos(kπ/10); E = -0.5 sits 0.5 + 2 - 2cos(π/10) away
        let run = estimate_w(
            &model,
            &WSettings { energy: -0.5, scale: 9, theta: 0.4, q: 2.0, samples: 5, seed_base: 0, center: None },
        )
        .unwrap();
        assert_eq!(run.report.successes, 0);
        assert!(run.report.exact && run.report.holds);

        let random = DisorderModel::anderson(1, 4.0).unwrap();
        let run = estimate_w(
            &random,
            &WSettings { energy: 20.0, scale: 21, theta: 0.4, q: 2.0, samples: 50, seed_base: 0, center: None },
        )
        .unwrap();
        assert_eq!(run.report.estimate, 0.0);
    }

    #[test]
    fn gershgorin_gap_is_not_a_distance() {
        // Gershgorin puts 0 at the bottom of Λ_3, the true bottom is 2 - √2
        let model = DisorderModel::constant(1, 0.0).unwrap();
        let run = estimate_w(
            &model,
            &WSettings { energy: -0.001, scale: 3, theta: 0.1, q: 2.0, samples: 1, seed_base: 0, center: None },
        )
        .unwrap();
        let s = &run.samples[0];
        assert!(!s.event && !s.lower_bound);
        assert!((s.distance - (2.001 - 2f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn certify_picks_largest_gamma() {
        let samples: Vec<PairSample> = (0..1000)
            .map(|i| PairSample { seed: i, success: true, pair_rate: 0.1 + i as f64 * 0.001 })
            .collect();
        let cert = certify_g(&samples, 51, 0.5).unwrap();
        let (lo, _) = clopper_pearson(cert.successes, 1000, CONFIDENCE);
        assert!(lo > 1.0 - 1.0 / 51.0);
        assert!((cert.gamma - (0.1 + (1000 - cert.successes) as f64 * 0.001)).abs() < 1e-12);
        if cert.successes < 1000 {
            let (worse, _) = clopper_pearson(cert.successes - 1, 1000, CONFIDENCE);
            assert!(worse <= 1.0 - 1.0 / 51.0);
        }
    }
}
