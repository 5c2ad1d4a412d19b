//! Localization diagnostics on finite boxes: centers of localization,
//! eigenfunction decay profiles, EDI ratios, eigenvalue counts per window,
//! kernel decay `E‖χ_{Λ₁} η(H) χ_{Λ₂}‖`, dynamical moments and the
//! frequency of two disjoint bad cubes.
//!
//! The full box operator stands in for `H(ω)`; every report carries the box
//! side and the eigenfunction mass on the outermost layer of the box.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{sample_configuration, DisorderModel};
use crate::error::{Error, Result};
use crate::geometry::{lattice_distance, make_cube, region, Cube, LatticePoint, Region, RegionKind, ScaleGrid};
use crate::msa::shell_norms;
use crate::operators::{
    assemble, operator_norm, spectrum, BoxOperator, EnergyInterval, Resolvent, SpectralData, SpectralFunction,
    SpectralOptions, SINGULAR_THRESHOLD,
};
use crate::stats::{clopper_pearson, log_log_slope, summarize, SampleSummary};

/// Full spectrum of `op`; on a chain the eigenvectors with energies in
/// `support` also get accurate exponential tails (see
/// [`SpectralData::refine_chain_tails`]).
pub fn spectrum_with_tails(op: &BoxOperator, support: &EnergyInterval) -> Result<SpectralData> {
    let mut spec = spectrum(op, &SpectralOptions::default())?;
    if op.cube().dim() == 1 {
        let idx = spec.indices_in(support)?;
        spec.refine_chain_tails(op, &idx)?;
    }
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub index: usize,
    pub eigenvalue: f64,
    pub center: LatticePoint,
    /// `|φ_n(x_n)|²`.
    pub max_mass: f64,
    /// `(side, ‖(1 - χ_{Λ_side(x_n)}) φ_n‖²)` for each requested side, ascending.
    pub tail_masses: Vec<(u64, f64)>,
    /// `-slope` of `log max_{d(y,x_n)=r} |φ_n(y)|` against `r`, fitted on
    /// `r` below half the box side; `None` with fewer than two usable points.
    pub decay_rate: Option<f64>,
    /// Mass on the outermost layer of the box.
    pub edge_mass: f64,
}

/// Index of the largest `|v_i|`, first index on ties.
pub fn argmax_site(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

fn edge_mass(cube: &Cube, v: &[f64]) -> f64 {
    let h = cube.half_width();
    cube.sites()
        .iter()
        .zip(v)
        .filter(|(s, _)| lattice_distance(cube.center(), s).unwrap() == h)
        .map(|(_, x)| x * x)
        .sum()
}

fn profile(cube: &Cube, v: &[f64], center: &LatticePoint) -> Vec<f64> {
    let sites = cube.sites();
    let mut out = vec![0.0f64; cube.side() as usize];
    for (s, x) in sites.iter().zip(v) {
        let r = lattice_distance(center, s).unwrap() as usize;
        out[r] = out[r].max(x.abs());
    }
    out
}

/// Exponential rate fitted to the shell-maximum profile around `center`.
pub fn decay_rate(cube: &Cube, v: &[f64], center: &LatticePoint) -> Option<f64> {
    let prof = profile(cube, v, center);
    let limit = (cube.side() / 2) as usize;
    let (xs, ys): (Vec<f64>, Vec<f64>) = prof
        .iter()
        .enumerate()
        .take(limit)
        .filter(|(_, m)| **m > 1e-14)
        .map(|(r, m)| (r as f64, m.ln()))
        .unzip();
    (xs.len() >= 2).then(|| -crate::stats::least_squares(&xs, &ys).slope)
}

/// One record per eigenvalue of `spec` in `interval`.
pub fn centers(spec: &SpectralData, interval: &EnergyInterval, tail_sides: &[u64]) -> Result<Vec<EigenRecord>> {
    let cube = spec.cube().clone();
    let sites = cube.sites();
    let mut sides = tail_sides.to_vec();
    sides.sort_unstable();
    spec.indices_in(interval)?
        .into_iter()
        .map(|k| {
            let v: Vec<f64> = spec.vector(k).iter().cloned().collect();
            let c = argmax_site(&v);
            let center = sites[c].clone();
            let tail_masses = sides
                .iter()
                .map(|&side| {
                    let half = side / 2;
                    let tail = sites
                        .iter()
                        .zip(&v)
                        .filter(|(s, _)| lattice_distance(&center, s).unwrap() > half)
                        .map(|(_, x)| x * x)
                        .sum();
                    (side, tail)
                })
                .collect();
            Ok(EigenRecord {
                index: k,
                eigenvalue: spec.values()[k],
                decay_rate: decay_rate(&cube, &v, &center),
                edge_mass: edge_mass(&cube, &v),
                max_mass: v[c] * v[c],
                center,
                tail_masses,
            })
        })
        .collect()
}

/// Sum of `‖χ_{Λ_{L/3}(x̃)} v‖²` over grid points `x̃` of scale `L`. The
/// interiors tile the lattice, so this is `‖v‖²` when the grid bound
/// reaches every tile meeting the box.
pub fn tiling_mass(cube: &Cube, v: &[f64], scale: u64) -> Result<f64> {
    let bound = Cube::centered(cube.dim(), cube.side() + 2 * scale)?;
    let bound = make_cube(cube.center().clone(), bound.side())?;
    let grid = ScaleGrid::new(scale, bound)?;
    let sites = cube.sites();
    let mut total = 0.0;
    for g in grid.sites() {
        let int = make_cube(g, scale / 3)?;
        total += sites
            .iter()
            .zip(v)
            .filter(|(s, _)| int.contains(s))
            .map(|(_, x)| x * x)
            .sum::<f64>();
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdiEntry {
    pub eigen_index: usize,
    pub eigenvalue: f64,
    pub cube: Cube,
    pub interior_mass: f64,
    pub exterior_mass: f64,
    pub block_norm: Option<f64>,
    /// `‖χ^int u‖ / (‖χ^out R_Λ(E) χ^int‖ · ‖χ^out u‖)`.
    pub ratio: Option<f64>,
    pub resonant: bool,
    /// `‖χ^out u‖ = 0` while `‖χ^int u‖ > 0`.
    pub inconsistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdiReport {
    pub entries: Vec<EdiEntry>,
    /// Largest finite ratio: the empirical `C_EDI`.
    pub c_edi: f64,
    pub all_finite: bool,
    pub resonant_cubes: usize,
}

/// The restriction of `op` to a sub-cube, with Dirichlet boundary.
pub fn restrict(op: &BoxOperator, sub: &Cube) -> Result<BoxOperator> {
    if !op.cube().contains_cube(sub) {
        return Err(Error::invalid(format!("{sub:?} is not inside {:?}", op.cube())));
    }
    let pot = sub
        .sites()
        .iter()
        .map(|s| op.potential()[op.cube().index_of(s).unwrap()])
        .collect();
    BoxOperator::from_potential(sub, pot)
}

/// EDI ratios for every eigenfunction with eigenvalue in `interval` and
/// every cube of the family.
pub fn edi_check(op: &BoxOperator, spec: &SpectralData, interval: &EnergyInterval, cubes: &[Cube]) -> Result<EdiReport> {
    for c in cubes {
        if !op.cube().strictly_contains_cube(c) {
            return Err(Error::invalid(format!("{c:?} is not strictly inside the box")));
        }
    }
    let idx = spec.indices_in(interval)?;
    let mut entries = Vec::new();
    for c in cubes {
        let sub = restrict(op, c)?;
        let res = Resolvent::new(&sub);
        let int = region(c, RegionKind::Interior)?;
        let out = region(c, RegionKind::Boundary)?;
        let int_big = int.rebase(op.cube())?.indices();
        let out_big = out.rebase(op.cube())?.indices();
        for &k in &idx {
            let e = spec.values()[k];
            let u = spec.vector(k);
            let interior_mass = int_big.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
            let exterior_mass = out_big.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt();
            let resonant = res.distance_to_spectrum(e) < SINGULAR_THRESHOLD;
            let block_norm = if resonant {
                None
            } else {
                Some(res.block_norm(e, &out.indices(), &int.indices())?)
            };
            let inconsistent = exterior_mass == 0.0 && interior_mass > 0.0;
            let ratio = match block_norm {
                _ if interior_mass == 0.0 => Some(0.0),
                Some(b) if !inconsistent => Some(interior_mass / (b * exterior_mass)),
                _ => None,
            };
            entries.push(EdiEntry {
                eigen_index: k,
                eigenvalue: e,
                cube: c.clone(),
                interior_mass,
                exterior_mass,
                block_norm,
                ratio,
                resonant,
                inconsistent,
            });
        }
    }
    let c_edi = entries
        .iter()
        .filter_map(|e| e.ratio)
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    let all_finite = entries
        .iter()
        .all(|e| e.resonant || e.ratio.is_some_and(f64::is_finite));
    let resonant_cubes = entries.iter().filter(|e| e.resonant).count();
    Ok(EdiReport {
        entries,
        c_edi,
        all_finite,
        resonant_cubes,
    })
}

/// Suitable cubes of side `side` centered on the grid of that scale and
/// strictly inside `box_cube`.
pub fn cube_family(box_cube: &Cube, side: u64) -> Result<Vec<Cube>> {
    let grid = ScaleGrid::new(side, box_cube.clone())?;
    Ok(grid
        .sites()
        .into_iter()
        .filter_map(|g| make_cube(g, side).ok())
        .filter(|c| box_cube.strictly_contains_cube(c))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub sides: Vec<u64>,
    /// `counts[s][w]`: centers of sample `s` inside window `w`.
    pub counts: Vec<Vec<usize>>,
    pub mean_counts: Vec<f64>,
    /// Log-log slope of the mean count against `L`, divided by `d`.
    pub kappa: Option<f64>,
    /// Reference value for lattice models, where a count never exceeds `|Λ|`.
    pub kappa_reference: f64,
}

/// Counts centers inside the windows `Λ_L(0)` for each sample.
pub fn count_in_window(records: &[Vec<EigenRecord>], dim: usize, sides: &[u64]) -> CountReport {
    let counts: Vec<Vec<usize>> = records
        .iter()
        .map(|recs| {
            sides
                .iter()
                .map(|&l| recs.iter().filter(|r| r.center.norm() <= l / 2).count())
                .collect()
        })
        .collect();
    let n = counts.len().max(1) as f64;
    let mean_counts: Vec<f64> = (0..sides.len())
        .map(|w| counts.iter().map(|c| c[w] as f64).sum::<f64>() / n)
        .collect();
    let xs: Vec<f64> = sides.iter().map(|&l| l as f64).collect();
    CountReport {
        sides: sides.to_vec(),
        kappa: log_log_slope(&xs, &mean_counts).map(|s| s / dim as f64),
        mean_counts,
        counts,
        kappa_reference: 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub exact: f64,
    /// `Σ_n |η(E_n)| ‖χ₁ φ_n‖ ‖χ₂ φ_n‖`.
    pub bound: f64,
}

/// `‖χ_{rows} η(H) χ_{cols}‖` from the eigen-decomposition, plus the
/// eigenfunction-sum bound.
pub fn kernel_block(spec: &SpectralData, eta: &SpectralFunction, rows: &[usize], cols: &[usize]) -> Result<KernelValue> {
    if rows.iter().any(|r| cols.contains(r)) {
        return Err(Error::invalid("kernel regions overlap"));
    }
    let idx: Vec<usize> = spec
        .indices_in(&eta.support())?
        .into_iter()
        .filter(|&k| eta.eval(spec.values()[k]) != 0.0)
        .collect();
    let u = spec.vectors();
    let mut block = DMatrix::zeros(rows.len(), cols.len());
    let mut bound = 0.0;
    for &k in &idx {
        let w = eta.eval(spec.values()[k]);
        let a = DVector::from_iterator(rows.len(), rows.iter().map(|&i| u[(i, k)]));
        let b = DVector::from_iterator(cols.len(), cols.iter().map(|&i| u[(i, k)]));
        bound += w.abs() * a.norm() * b.norm();
        block.ger(w, &a, &b, 1.0);
    }
    Ok(KernelValue {
        exact: operator_norm(&block),
        bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Placement {
    /// `Λ₁` centered at `center`, `Λ₂` shifted along the first axis.
    Fixed { center: LatticePoint },
    /// Average over every translate of the pair that fits in the box.
    TranslationAveraged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSettings {
    pub box_side: u64,
    pub eta: SpectralFunction,
    /// Side of the cubes `Λ₁`, `Λ₂`.
    pub region_side: u64,
    /// Values of `dist(Λ₁, Λ₂)`.
    pub distances: Vec<u64>,
    pub samples: u64,
    pub seed_base: u64,
    pub placement: Placement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub distance: u64,
    pub exact: SampleSummary,
    pub bound: SampleSummary,
    /// Per-sample values in seed order.
    pub values: Vec<KernelValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDecayReport {
    pub box_side: u64,
    pub points: Vec<KernelPoint>,
    /// `-slope` of log mean against log distance.
    pub exponent: Option<f64>,
    pub strictly_decreasing: bool,
    pub max_edge_mass: f64,
    pub seed_first: u64,
    pub seed_last: u64,
}

fn pair_positions(box_cube: &Cube, side: u64, distance: u64, placement: &Placement) -> Result<Vec<(Cube, Cube)>> {
    let d = box_cube.dim();
    let shift = LatticePoint::along_first_axis(d, (distance + side) as i64);
    let pair = |c: LatticePoint| -> Result<(Cube, Cube)> {
        let a = make_cube(c.clone(), side)?;
        let b = make_cube(c.translate(&shift), side)?;
        Ok((a, b))
    };
    match placement {
        Placement::Fixed { center: c } => {
            let (a, b) = pair(c.clone())?;
            if !box_cube.contains_cube(&a) || !box_cube.contains_cube(&b) {
                return Err(Error::invalid(format!("pair at distance {distance} does not fit in the box")));
            }
            Ok(vec![(a, b)])
        }
        Placement::TranslationAveraged => {
            let out: Vec<(Cube, Cube)> = box_cube
                .sites()
                .into_iter()
                .filter_map(|c| pair(c).ok())
                .filter(|(a, b)| box_cube.contains_cube(a) && box_cube.contains_cube(b))
                .collect();
            if out.is_empty() {
                return Err(Error::invalid(format!("no pair at distance {distance} fits in the box")));
            }
            Ok(out)
        }
    }
}

/// Monte Carlo sweep of `E‖χ_{Λ₁} η(H) χ_{Λ₂}‖` over distances.
pub fn kernel_decay(model: &DisorderModel, s: &KernelSettings) -> Result<KernelDecayReport> {
    s.eta.validate()?;
    if s.samples == 0 || s.distances.is_empty() {
        return Err(Error::invalid("need samples and distances"));
    }
    if s.distances.contains(&0) {
        return Err(Error::invalid("regions at distance 0 overlap"));
    }
    let box_cube = Cube::centered(model.dimension, s.box_side)?;
    let layouts: Vec<Vec<(Vec<usize>, Vec<usize>)>> = s
        .distances
        .iter()
        .map(|&dist| {
            pair_positions(&box_cube, s.region_side, dist, &s.placement).map(|pairs| {
                pairs
                    .iter()
                    .map(|(a, b)| {
                        (
                            Region::clipped(&box_cube, a).indices(),
                            Region::clipped(&box_cube, b).indices(),
                        )
                    })
                    .collect()
            })
        })
        .collect::<Result<_>>()?;
    let per_sample: Vec<(Vec<KernelValue>, f64)> = (0..s.samples)
        .into_par_iter()
        .map(|i| {
            let seed = s.seed_base + i;
            let op = assemble(&box_cube, model, &sample_configuration(model, seed));
            let support = s.eta.support();
            let spec = spectrum_with_tails(&op, &support)?;
            let edge = spec
                .indices_in(&support)?
                .into_iter()
                .map(|k| edge_mass(&box_cube, spec.vector(k).as_slice()))
                .fold(0.0, f64::max);
            let values = layouts
                .iter()
                .map(|pairs| {
                    let mut acc = KernelValue { exact: 0.0, bound: 0.0 };
                    for (a, b) in pairs {
                        let v = kernel_block(&spec, &s.eta, a, b)?;
                        acc.exact += v.exact;
                        acc.bound += v.bound;
                    }
                    let m = pairs.len() as f64;
                    Ok(KernelValue {
                        exact: acc.exact / m,
                        bound: acc.bound / m,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((values, edge))
        })
        .collect::<Result<_>>()?;
    let points: Vec<KernelPoint> = s
        .distances
        .iter()
        .enumerate()
        .map(|(k, &distance)| {
            let values: Vec<KernelValue> = per_sample.iter().map(|(v, _)| v[k]).collect();
            let exact: Vec<f64> = values.iter().map(|v| v.exact).collect();
            let bound: Vec<f64> = values.iter().map(|v| v.bound).collect();
            KernelPoint {
                distance,
                exact: summarize(&exact),
                bound: summarize(&bound),
                values,
            }
        })
        .collect();
    let limit = s.box_side as f64 / 2.0;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| (p.distance as f64) < limit)
        .map(|p| (p.distance as f64, p.exact.mean))
        .unzip();
    let strictly_decreasing = points.windows(2).all(|w| w[1].exact.mean < w[0].exact.mean);
    Ok(KernelDecayReport {
        box_side: s.box_side,
        exponent: log_log_slope(&xs, &ys).map(|v| -v),
        strictly_decreasing,
        max_edge_mass: per_sample.iter().map(|(_, e)| *e).fold(0.0, f64::max),
        points,
        seed_first: s.seed_base,
        seed_last: s.seed_base + s.samples - 1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeGrid {
    LogSpaced { count: usize, lo: f64, hi: f64 },
    Explicit { times: Vec<f64> },
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid::LogSpaced {
            count: 512,
            lo: 1e-2,
            hi: 1e3,
        }
    }
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeGrid::Explicit { times } => times.clone(),
            TimeGrid::LogSpaced { count, lo, hi } => {
                if *count <= 1 {
                    return vec![*lo];
                }
                let (a, b) = (lo.ln(), hi.ln());
                (0..*count)
                    .map(|k| (a + (b - a) * k as f64 / (*count - 1) as f64).exp())
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSettings {
    pub p: f64,
    pub interval: EnergyInterval,
    /// `K = Λ_{k_side}(0)`.
    pub k_side: u64,
    pub box_side: u64,
    pub times: TimeGrid,
    pub samples: u64,
    pub seed_base: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    pub seed: u64,
    pub eigen_count: usize,
    pub sup: f64,
    pub sup_time: f64,
    /// `M(0) = ‖|X|^p P_I χ_K‖`.
    pub m0: f64,
    pub bound: f64,
    pub edge_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    pub interval: EnergyInterval,
    pub k_side: u64,
    pub box_side: u64,
    pub time_count: usize,
    pub samples: Vec<MomentSample>,
    pub sup: SampleSummary,
    pub bound: SampleSummary,
    pub dominated: bool,
}

/// `M(t)` at each time for one spectral decomposition; `xp` holds `|x|^p`
/// per site and `k` the indices of `K`.
pub fn moment_curve(spec: &SpectralData, interval: &EnergyInterval, xp: &[f64], k: &[usize], times: &[f64]) -> Result<(Vec<f64>, f64)> {
    let idx = spec.indices_in(interval)?;
    let m = idx.len();
    if m == 0 {
        return Ok((vec![0.0; times.len()], 0.0));
    }
    let u = spec.vectors();
    let n = u.nrows();
    // Φ restricted to I, weighted by |X|^p
    let phi = DMatrix::from_fn(n, m, |i, j| u[(i, idx[j])]);
    let weighted = DMatrix::from_fn(n, m, |i, j| xp[i] * phi[(i, j)]);
    let gram = weighted.transpose() * &weighted;
    let phi_k = DMatrix::from_fn(m, k.len(), |j, c| phi[(k[c], j)]);
    let bound = (0..m)
        .map(|j| weighted.column(j).norm() * phi_k.row(j).norm())
        .sum();
    let energies: Vec<f64> = idx.iter().map(|&i| spec.values()[i]).collect();
    let gram_c = gram.map(|x| Complex64::new(x, 0.0));
    let curve = times
        .iter()
        .map(|&t| {
            // B = D Φ_Kᵀ, M(t)² = λ_max(Bᴴ G B)
            let b = DMatrix::from_fn(m, k.len(), |j, c| Complex64::from_polar(phi_k[(j, c)], -t * energies[j]));
            let gb = &gram_c * &b;
            let h = b.adjoint() * gb;
            let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
            let top = h.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max);
            top.max(0.0).sqrt()
        })
        .collect();
    Ok((curve, bound))
}

/// `|x|^p` with `0^p := 0`.
pub fn position_weights(cube: &Cube, p: f64) -> Vec<f64> {
    cube.sites()
        .iter()
        .map(|s| {
            let r = s.norm() as f64;
            if r == 0.0 {
                0.0
            } else {
                r.powf(p)
            }
        })
        .collect()
}

/// Sup over a time grid of `‖|X|^p e^{-itH} P_I χ_K‖` and the
/// time-independent eigenfunction-sum bound, per configuration.
pub fn dynamical_moment(model: &DisorderModel, s: &MomentSettings) -> Result<MomentReport> {
    if !(s.p >= 0.0) {
        return Err(Error::invalid(format!("p must be nonnegative, got {}", s.p)));
    }
    if s.samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    s.interval.validate()?;
    let box_cube = Cube::centered(model.dimension, s.box_side)?;
    let k_cube = Cube::centered(model.dimension, s.k_side)?;
    if !box_cube.contains_cube(&k_cube) {
        return Err(Error::invalid("K must lie inside the box"));
    }
    let k = Region::clipped(&box_cube, &k_cube).indices();
    let xp = position_weights(&box_cube, s.p);
    let mut times = s.times.times();
    if !times.contains(&0.0) {
        times.insert(0, 0.0);
    }
    let samples: Vec<MomentSample> = (0..s.samples)
        .into_par_iter()
        .map(|i| {
            let seed = s.seed_base + i;
            let op = assemble(&box_cube, model, &sample_configuration(model, seed));
            let spec = spectrum_with_tails(&op, &s.interval)?;
            let (curve, bound) = moment_curve(&spec, &s.interval, &xp, &k, &times)?;
            let (arg, sup) = curve
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
            let edge = spec
                .indices_in(&s.interval)?
                .into_iter()
                .map(|k| edge_mass(&box_cube, spec.vector(k).as_slice()))
                .fold(0.0, f64::max);
            Ok(MomentSample {
                seed,
                eigen_count: spec.indices_in(&s.interval)?.len(),
                sup,
                sup_time: times[arg],
                m0: curve[0],
                bound,
                edge_mass: edge,
            })
        })
        .collect::<Result<_>>()?;
    let sups: Vec<f64> = samples.iter().map(|m| m.sup).collect();
    let bounds: Vec<f64> = samples.iter().map(|m| m.bound).collect();
    let dominated = samples.iter().all(|m| m.sup <= m.bound * (1.0 + 1e-10) + 1e-12);
    Ok(MomentReport {
        p: s.p,
        interval: s.interval,
        k_side: s.k_side,
        box_side: s.box_side,
        time_count: times.len(),
        sup: summarize(&sups),
        bound: summarize(&bounds),
        samples,
        dominated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBadSettings {
    pub interval: EnergyInterval,
    pub gamma: f64,
    pub ladder: Vec<u64>,
    /// Rungs `j` to probe; each needs `L_{j+1}` in the ladder.
    pub rungs: Vec<usize>,
    pub samples: u64,
    pub seed_base: u64,
    pub grid_points: usize,
    pub budget_sites: u64,
    /// Used only for the predicted slope `2d(α-1) - 2ξ`.
    pub alpha: f64,
    pub xi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBadRung {
    pub j: usize,
    pub scale: u64,
    /// Side of the bounding cube `Λ_{3 L_{j+1}}`.
    pub bound_side: u64,
    pub cubes: usize,
    pub events: u64,
    pub samples: u64,
    pub frequency: f64,
    pub ci: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBadReport {
    pub rungs: Vec<TwoBadRung>,
    pub slope: Option<f64>,
    pub predicted_slope: f64,
    /// Rungs dropped because of the budget or a short ladder.
    pub truncated: Vec<usize>,
}

/// Whether two disjoint cubes of side `l` centered in `bad` exist.
fn has_disjoint_pair(bad: &[&LatticePoint], l: u64) -> bool {
    bad.iter()
        .enumerate()
        .any(|(i, a)| bad[i + 1..].iter().any(|b| lattice_distance(a, b).unwrap() >= l))
}

/// Frequency of two disjoint `(γ,E)`-bad cubes `Λ_{L_j}(x̃)`, `x̃ ∈ Γ_j ∩
/// Λ_{3L_{j+1}}`, at a common grid energy.
pub fn two_bad_probability(model: &DisorderModel, s: &TwoBadSettings) -> Result<TwoBadReport> {
    if s.samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    s.interval.validate()?;
    let d = model.dimension;
    let energies = s.interval.grid(s.grid_points.max(1));
    let mut rungs = Vec::new();
    let mut truncated = Vec::new();
    for &j in &s.rungs {
        let (Some(&l), Some(&next)) = (s.ladder.get(j), s.ladder.get(j + 1)) else {
            truncated.push(j);
            continue;
        };
        let bound_side = 3 * next;
        if (bound_side as u128).pow(d as u32) > s.budget_sites as u128 {
            truncated.push(j);
            continue;
        }
        let bound = Cube::centered(d, bound_side)?;
        let grid = ScaleGrid::new(l, bound)?;
        let centers = grid.sites();
        let threshold = (-s.gamma * l as f64).exp();
        let seed_base = s.seed_base + j as u64 * s.samples;
        let events: Vec<bool> = (0..s.samples)
            .into_par_iter()
            .map(|i| {
                let config = sample_configuration(model, seed_base + i);
                let mut good = Vec::with_capacity(centers.len());
                for c in &centers {
                    let cube = make_cube(c.clone(), l)?;
                    let op = assemble(&cube, model, &config);
                    let norms = shell_norms(&Resolvent::new(&op), &energies)?;
                    good.push(norms.iter().map(|n| n.is_some_and(|v| v <= threshold)).collect::<Vec<_>>());
                }
                Ok((0..energies.len()).any(|e| {
                    let bad: Vec<&LatticePoint> = centers.iter().zip(&good).filter(|(_, g)| !g[e]).map(|(c, _)| c).collect();
                    has_disjoint_pair(&bad, l)
                }))
            })
            .collect::<Result<_>>()?;
        let k = events.iter().filter(|e| **e).count() as u64;
        rungs.push(TwoBadRung {
            j,
            scale: l,
            bound_side,
            cubes: centers.len(),
            events: k,
            samples: s.samples,
            frequency: k as f64 / s.samples as f64,
            ci: clopper_pearson(k, s.samples, crate::msa::CONFIDENCE),
        });
    }
    let xs: Vec<f64> = rungs.iter().map(|r| r.scale as f64).collect();
    let ys: Vec<f64> = rungs.iter().map(|r| r.frequency).collect();
    let slope = if ys.iter().all(|y| *y > 0.0) { log_log_slope(&xs, &ys) } else { None };
    Ok(TwoBadReport {
        rungs,
        slope,
        predicted_slope: 2.0 * d as f64 * (s.alpha - 1.0) - 2.0 * s.xi,
        truncated,
    })
}
