//! Finite-volume Hamiltonians `H_Λ(ω) = -Δ_Λ + V_ω` on cube site sets and
//! the spectral machinery built on them.
//!
//! The discrete Laplacian carries `2d` on the diagonal and `-1` between
//! nearest neighbours; the default boundary condition is simple truncation
//! (Dirichlet), with periodic wrap-around available for comparison runs.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::banded::BandedSym;
use crate::disorder::{potential, Configuration, DisorderModel};
use crate::error::{Error, Result};
use crate::geometry::{Cube, Region};
use crate::lanczos;

/// Distance to the spectrum below which an energy is treated as resonant.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    Dirichlet,
    Periodic,
}

#[derive(Clone, Debug)]
pub struct BoxOperator {
    cube: Cube,
    boundary: BoundaryCondition,
    potential: Vec<f64>,
    seed: Option<u64>,
}

pub fn assemble(cube: &Cube, model: &DisorderModel, config: &Configuration) -> BoxOperator {
    assemble_with(cube, model, config, BoundaryCondition::Dirichlet)
}

pub fn assemble_with(
    cube: &Cube,
    model: &DisorderModel,
    config: &Configuration,
    boundary: BoundaryCondition,
) -> BoxOperator {
    assert_eq!(cube.dim(), model.dimension, "cube and model dimensions differ");
    let pot = cube.sites().iter().map(|s| potential(model, config, s)).collect();
    BoxOperator {
        cube: cube.clone(),
        boundary,
        potential: pot,
        seed: Some(config.seed),
    }
}

impl BoxOperator {
    /// Operator with an explicit potential, in canonical site order.
    pub fn from_potential(cube: &Cube, potential: Vec<f64>) -> Result<BoxOperator> {
        if potential.len() != cube.volume() {
            return Err(Error::DimensionMismatch {
                expected: cube.volume(),
                got: potential.len(),
            });
        }
        Ok(BoxOperator {
            cube: cube.clone(),
            boundary: BoundaryCondition::Dirichlet,
            potential,
            seed: None,
        })
    }

    pub fn with_boundary(mut self, boundary: BoundaryCondition) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.potential.len()
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        2.0 * self.cube.dim() as f64 + self.potential[i]
    }

    /// Indices of the nearest neighbours of site `i`, each listed once.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let d = self.cube.dim();
        let side = self.cube.side() as usize;
        let mut out = Vec::with_capacity(2 * d);
        let mut stride = 1usize;
        for _ in 0..d {
            let coord = (i / stride) % side;
            if coord > 0 {
                out.push(i - stride);
            } else if self.boundary == BoundaryCondition::Periodic && side > 2 {
                out.push(i + (side - 1) * stride);
            }
            if coord + 1 < side {
                out.push(i + stride);
            } else if self.boundary == BoundaryCondition::Periodic && side > 2 {
                out.push(i - (side - 1) * stride);
            }
            stride *= side;
        }
        out
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n() {
            let mut acc = self.diagonal(i) * x[i];
            for j in self.neighbors(i) {
                acc -= x[j];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal(i);
            for j in self.neighbors(i) {
                m[(i, j)] = -1.0;
            }
        }
        m
    }

    pub fn half_bandwidth(&self) -> usize {
        match self.boundary {
            BoundaryCondition::Dirichlet => (self.cube.side() as usize).pow(self.cube.dim() as u32 - 1),
            BoundaryCondition::Periodic => self.n().saturating_sub(1),
        }
    }

    pub fn to_banded(&self) -> BandedSym {
        let n = self.n();
        let mut b = BandedSym::zeros(n, self.half_bandwidth().min(n.saturating_sub(1)));
        for i in 0..n {
            b.set(i, i, self.diagonal(i));
            for j in self.neighbors(i) {
                if j > i {
                    b.set(i, j, -1.0);
                }
            }
        }
        b
    }

    /// Gershgorin enclosure `[min V, max V + 4d]`.
    pub fn gershgorin(&self) -> (f64, f64) {
        let (lo, hi) = self
            .potential
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        (lo, hi + 4.0 * self.cube.dim() as f64)
    }

    /// Matrix Market coordinate dump (upper triangle, 1-based indices).
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.n();
        let mut entries = Vec::new();
        for i in 0..n {
            entries.push((i, i, self.diagonal(i)));
            for j in self.neighbors(i) {
                if j > i {
                    entries.push((i, j, -1.0));
                }
            }
        }
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "% cube side={} dim={} boundary={:?}", self.cube.side(), self.cube.dim(), self.boundary)?;
        writeln!(w, "{n} {n} {}", entries.len())?;
        for (i, j, v) in entries {
            // stored as lower triangle per the symmetric convention
            writeln!(w, "{} {} {:.16e}", j + 1, i + 1, v)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyInterval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "yes")]
    pub lo_closed: bool,
    #[serde(default = "yes")]
    pub hi_closed: bool,
}

fn yes() -> bool {
    true
}

impl EnergyInterval {
    pub fn closed(lo: f64, hi: f64) -> Result<EnergyInterval> {
        let i = EnergyInterval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        };
        i.validate()?;
        Ok(i)
    }

    pub fn point(e: f64) -> EnergyInterval {
        EnergyInterval::closed(e, e).expect("finite point")
    }

    /// Everything that could be in the spectrum of a box.
    pub fn everything() -> EnergyInterval {
        EnergyInterval::closed(-1e300, 1e300).unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        let empty = self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed));
        if !self.lo.is_finite() || !self.hi.is_finite() || empty {
            return Err(Error::invalid(format!("empty or non-finite interval [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn contains(&self, e: f64) -> bool {
        let above = if self.lo_closed { e >= self.lo } else { e > self.lo };
        let below = if self.hi_closed { e <= self.hi } else { e < self.hi };
        above && below
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `points` equally spaced energies including both endpoints.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        if points <= 1 || self.lo == self.hi {
            return vec![0.5 * (self.lo + self.hi)];
        }
        (0..points)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (points - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    pub tol_eig: f64,
    pub tol_orth: f64,
    /// Boxes up to this many sites use the dense solver.
    pub dense_limit: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol_eig: 1e-10,
            tol_orth: 1e-10,
            dense_limit: 4000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coverage {
    Full,
    Window { lo: f64, hi: f64 },
}

/// Eigenpairs of a box operator, ascending, with attained accuracy.
#[derive(Clone, Debug)]
pub struct SpectralData {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    residuals: Vec<f64>,
    orth_error: f64,
    coverage: Coverage,
    cube: Cube,
}

/// All eigenpairs by dense symmetric diagonalization.
pub fn spectrum(op: &BoxOperator, opts: &SpectralOptions) -> Result<SpectralData> {
    if op.n() > opts.dense_limit {
        return Err(Error::invalid(format!(
            "{} sites exceed the dense limit {}; use spectrum_window",
            op.n(),
            opts.dense_limit
        )));
    }
    let eig = op.to_dense().symmetric_eigen();
    let mut order: Vec<usize> = (0..op.n()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(op.n(), op.n(), |i, j| eig.eigenvectors[(i, order[j])]);
    finish(op, values, vectors, Coverage::Full, opts)
}

/// Eigenpairs with energies in `window`: dense below the size limit,
/// shift-invert Lanczos above it with an inertia completeness check.
pub fn spectrum_window(op: &BoxOperator, window: &EnergyInterval, opts: &SpectralOptions) -> Result<SpectralData> {
    if op.n() <= opts.dense_limit {
        return spectrum(op, opts);
    }
    let banded = op.to_banded();
    let w = lanczos::window_eigenpairs(&banded, window.lo, window.hi, opts.tol_eig)?;
    let expected = banded.count_in(window.lo, window.hi);
    if expected != w.values.len() {
        return Err(Error::NonConvergence {
            residual: w.residuals.iter().cloned().fold(0.0, f64::max),
        });
    }
    finish(
        op,
        w.values,
        w.vectors,
        Coverage::Window {
            lo: window.lo,
            hi: window.hi,
        },
        opts,
    )
}

fn finish(
    op: &BoxOperator,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    coverage: Coverage,
    opts: &SpectralOptions,
) -> Result<SpectralData> {
    let n = op.n();
    let mut residuals = Vec::with_capacity(values.len());
    let mut hv = vec![0.0; n];
    for (k, &e) in values.iter().enumerate() {
        let col = vectors.column(k);
        op.matvec(col.as_slice(), &mut hv);
        let r = hv.iter().zip(col.iter()).map(|(h, x)| (h - e * x).powi(2)).sum::<f64>().sqrt();
        residuals.push(r);
    }
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let scale = values.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    if worst > opts.tol_eig * scale {
        return Err(Error::NonConvergence { residual: worst });
    }
    let m = values.len();
    let gram = vectors.transpose() * &vectors;
    let orth_error = if m == 0 { 0.0 } else { (gram - DMatrix::identity(m, m)).amax() };
    if orth_error > opts.tol_orth {
        return Err(Error::NonConvergence { residual: orth_error });
    }
    Ok(SpectralData {
        values,
        vectors,
        residuals,
        orth_error,
        coverage,
        cube: op.cube().clone(),
    })
}

impl SpectralData {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> nalgebra::DVectorView<'_, f64> {
        self.vectors.column(k)
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn orth_error(&self) -> f64 {
        self.orth_error
    }

    pub fn coverage(&self) -> Coverage {
        self.coverage
    }

    /// Recomputes eigenvectors of a Dirichlet chain (d = 1) by running the
    /// three-term recursion inward from both ends and matching at the peak,
    /// so that exponentially small tails keep relative accuracy instead of
    /// sitting at the solver's roundoff floor. A vector is left unchanged
    /// when its eigenvalue lies within `1e-8` of another one or when the
    /// recomputed vector moves by more than `1e-6`. Returns the number of
    /// vectors replaced.
    pub fn refine_chain_tails(&mut self, op: &BoxOperator, indices: &[usize]) -> Result<usize> {
        if op.cube().dim() != 1 || op.boundary() != BoundaryCondition::Dirichlet || op.n() != self.vectors.nrows() {
            return Err(Error::invalid("tail refinement needs the Dirichlet chain the spectrum came from"));
        }
        let n = op.n();
        let mut hv = vec![0.0; n];
        let mut replaced = 0;
        for &k in indices {
            let e = self.values[k];
            let isolated = self
                .values
                .iter()
                .enumerate()
                .all(|(j, &f)| j == k || (f - e).abs() > 1e-8);
            if !isolated || n < 3 {
                continue;
            }
            let old: Vec<f64> = self.vectors.column(k).iter().cloned().collect();
            let m = old
                .iter()
                .enumerate()
                .fold(0, |b, (i, x)| if x.abs() > old[b].abs() { i } else { b });
            let mut v = vec![0.0; n];
            // left part: ψ(-1) = 0, ψ(0) = 1
            let mut prev = 0.0;
            v[0] = 1.0;
            for i in 0..m {
                let next = (op.diagonal(i) - e) * v[i] - prev;
                prev = v[i];
                v[i + 1] = next;
                if next.abs() > 1e150 {
                    v[..=i + 1].iter_mut().for_each(|x| *x *= 1e-150);
                    prev *= 1e-150;
                }
            }
            let left_peak = v[m];
            // right part: ψ(n) = 0, ψ(n-1) = 1
            let mut w = vec![0.0; n];
            let mut prev = 0.0;
            w[n - 1] = 1.0;
            for i in (m + 1..n).rev() {
                let next = (op.diagonal(i) - e) * w[i] - prev;
                prev = w[i];
                w[i - 1] = next;
                if next.abs() > 1e150 {
                    w[i - 1..].iter_mut().for_each(|x| *x *= 1e-150);
                    prev *= 1e-150;
                }
            }
            if left_peak == 0.0 || w[m] == 0.0 {
                continue;
            }
            let scale = w[m] / left_peak;
            v[..m].iter_mut().for_each(|x| *x *= scale);
            v[m..].copy_from_slice(&w[m..]);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let sign = if v[m] * old[m] < 0.0 { -1.0 } else { 1.0 };
            v.iter_mut().for_each(|x| *x *= sign / norm);
            let moved = v.iter().zip(&old).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if !moved.is_finite() || moved > 1e-6 {
                continue;
            }
            op.matvec(&v, &mut hv);
            let r = hv.iter().zip(&v).map(|(h, x)| (h - e * x).powi(2)).sum::<f64>().sqrt();
            self.residuals[k] = self.residuals[k].max(r);
            self.vectors.column_mut(k).copy_from_slice(&v);
            replaced += 1;
        }
        Ok(replaced)
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn covers(&self, i: &EnergyInterval) -> bool {
        match self.coverage {
            Coverage::Full => true,
            Coverage::Window { lo, hi } => lo <= i.lo && i.hi <= hi,
        }
    }

    fn require(&self, i: &EnergyInterval) -> Result<()> {
        if self.covers(i) {
            Ok(())
        } else {
            Err(Error::IncompleteSpectrum { lo: i.lo, hi: i.hi })
        }
    }

    /// Indices `n` with `E_n ∈ I`.
    pub fn indices_in(&self, i: &EnergyInterval) -> Result<Vec<usize>> {
        self.require(i)?;
        Ok((0..self.values.len()).filter(|&k| i.contains(self.values[k])).collect())
    }

    pub fn distance_to(&self, e: f64) -> f64 {
        self.values.iter().map(|v| (v - e).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// `#{n : E_n ∈ I}`.
pub fn trace_count(spec: &SpectralData, i: &EnergyInterval) -> Result<usize> {
    Ok(spec.indices_in(i)?.len())
}

/// A bounded spectral function `η`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralFunction {
    Indicator { lo: f64, hi: f64 },
    /// `exp(1 - 1/(1 - s²))` on the interval, rescaled to `s ∈ (-1, 1)`; peak 1.
    Bump { lo: f64, hi: f64 },
    /// Piecewise-linear interpolation of `(E, η(E))` samples, zero outside.
    Table { points: Vec<(f64, f64)> },
}

impl SpectralFunction {
    pub fn eval(&self, e: f64) -> f64 {
        match self {
            SpectralFunction::Indicator { lo, hi } => f64::from(u8::from(e >= *lo && e <= *hi)),
            SpectralFunction::Bump { lo, hi } => {
                let s = (2.0 * e - lo - hi) / (hi - lo);
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
            SpectralFunction::Table { points } => {
                if points.is_empty() || e < points[0].0 || e > points[points.len() - 1].0 {
                    return 0.0;
                }
                let k = points.partition_point(|p| p.0 <= e);
                if k == 0 {
                    return points[0].1;
                }
                if k == points.len() {
                    return points[k - 1].1;
                }
                let (x0, y0) = points[k - 1];
                let (x1, y1) = points[k];
                if x1 == x0 {
                    y1
                } else {
                    y0 + (y1 - y0) * (e - x0) / (x1 - x0)
                }
            }
        }
    }

    /// Smallest closed interval containing the support.
    pub fn support(&self) -> EnergyInterval {
        match self {
            SpectralFunction::Indicator { lo, hi } | SpectralFunction::Bump { lo, hi } => EnergyInterval {
                lo: *lo,
                hi: *hi,
                lo_closed: true,
                hi_closed: true,
            },
            SpectralFunction::Table { points } => EnergyInterval {
                lo: points.first().map_or(0.0, |p| p.0),
                hi: points.last().map_or(0.0, |p| p.0),
                lo_closed: true,
                hi_closed: true,
            },
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            SpectralFunction::Indicator { .. } | SpectralFunction::Bump { .. } => 1.0,
            SpectralFunction::Table { points } => points.iter().map(|p| p.1.abs()).fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralFunction::Indicator { lo, hi } | SpectralFunction::Bump { lo, hi } => {
                EnergyInterval::closed(*lo, *hi).map(|_| ())
            }
            SpectralFunction::Table { points } => {
                if points.is_empty() || points.windows(2).any(|w| w[1].0 < w[0].0) {
                    return Err(Error::invalid("function table needs ascending energies"));
                }
                Ok(())
            }
        }
    }
}

/// `Σ_n η(E_n) ⟨φ_n, v⟩ φ_n`.
pub fn function_apply(spec: &SpectralData, eta: &SpectralFunction, v: &DVector<f64>) -> Result<DVector<f64>> {
    let support = eta.support();
    let idx = spec.indices_in(&support)?;
    let mut out = DVector::zeros(spec.dim());
    for k in idx {
        let w = eta.eval(spec.values[k]);
        if w != 0.0 {
            let phi = spec.vectors.column(k);
            out.axpy(w * phi.dot(v), &phi, 1.0);
        }
    }
    Ok(out)
}

/// Spectral projector `P_I v`.
pub fn spectral_projector_apply(spec: &SpectralData, i: &EnergyInterval, v: &DVector<f64>) -> Result<DVector<f64>> {
    let idx = spec.indices_in(i)?;
    let mut out = DVector::zeros(spec.dim());
    for k in idx {
        let phi = spec.vectors.column(k);
        out.axpy(phi.dot(v), &phi, 1.0);
    }
    Ok(out)
}

/// `e^{-itH} v` by phases on eigencoefficients; needs full coverage.
pub fn propagate(spec: &SpectralData, t: f64, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if spec.coverage != Coverage::Full {
        return Err(Error::IncompleteSpectrum {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        });
    }
    let mut out = DVector::from_element(spec.dim(), Complex64::new(0.0, 0.0));
    for (k, &e) in spec.values.iter().enumerate() {
        let phi = spec.vectors.column(k);
        let coeff: Complex64 = phi.iter().zip(v.iter()).map(|(a, b)| b * a).sum();
        let c = coeff * Complex64::from_polar(1.0, -t * e);
        for (o, a) in out.iter_mut().zip(phi.iter()) {
            *o += c * a;
        }
    }
    Ok(out)
}

/// Resolvent access for one box: resonance detection, full-norm bound and
/// sub-blocks of `(H_Λ - E)^{-1}` obtained by banded LU solves.
pub struct Resolvent<'a> {
    op: &'a BoxOperator,
    banded: BandedSym,
    eigenvalues: Option<Vec<f64>>,
}

impl<'a> Resolvent<'a> {
    pub fn new(op: &'a BoxOperator) -> Self {
        Self::with_limit(op, SpectralOptions::default().dense_limit)
    }

    pub fn with_limit(op: &'a BoxOperator, dense_limit: usize) -> Self {
        let eigenvalues = (op.n() <= dense_limit).then(|| {
            let mut v: Vec<f64> = op.to_dense().symmetric_eigenvalues().iter().cloned().collect();
            v.sort_by(f64::total_cmp);
            v
        });
        Resolvent {
            op,
            banded: op.to_banded(),
            eigenvalues,
        }
    }

    /// Reuses eigenvalues that are already known.
    pub fn from_spectrum(op: &'a BoxOperator, spec: &SpectralData) -> Self {
        assert_eq!(spec.coverage(), Coverage::Full);
        Resolvent {
            op,
            banded: op.to_banded(),
            eigenvalues: Some(spec.values().to_vec()),
        }
    }

    pub fn operator(&self) -> &BoxOperator {
        self.op
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }

    pub fn distance_to_spectrum(&self, e: f64) -> f64 {
        match &self.eigenvalues {
            Some(v) => {
                let k = v.partition_point(|x| *x < e);
                let mut d = f64::INFINITY;
                if k < v.len() {
                    d = d.min(v[k] - e);
                }
                if k > 0 {
                    d = d.min(e - v[k - 1]);
                }
                d
            }
            None => lanczos::distance_to_spectrum(&self.banded, e),
        }
    }

    /// `dist(σ, J)` for an interval, zero if the interval meets the spectrum.
    pub fn distance_to_interval(&self, lo: f64, hi: f64) -> f64 {
        match &self.eigenvalues {
            Some(v) => v
                .iter()
                .map(|&x| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
                .fold(f64::INFINITY, f64::min),
            None => {
                if self.banded.count_in(lo, hi) > 0 {
                    0.0
                } else {
                    self.distance_to_spectrum(lo).min(self.distance_to_spectrum(hi))
                }
            }
        }
    }

    pub fn is_resonant(&self, e: f64) -> bool {
        self.distance_to_spectrum(e) < SINGULAR_THRESHOLD
    }

    /// `χ_rows (H - E)^{-1} χ_cols` as a dense `|rows| × |cols|` block.
    pub fn block(&self, e: f64, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
        let dist = self.distance_to_spectrum(e);
        if dist < SINGULAR_THRESHOLD {
            return Err(Error::SingularEnergy { energy: e, distance: dist });
        }
        let lu = self.banded.lu(e).ok_or(Error::SingularEnergy { energy: e, distance: 0.0 })?;
        let n = self.op.n();
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        let mut x = vec![0.0; n];
        for (jc, &c) in cols.iter().enumerate() {
            x.iter_mut().for_each(|v| *v = 0.0);
            x[c] = 1.0;
            lu.solve(&mut x);
            for (ir, &r) in rows.iter().enumerate() {
                out[(ir, jc)] = x[r];
            }
        }
        Ok(out)
    }

    pub fn block_norm(&self, e: f64, rows: &[usize], cols: &[usize]) -> Result<f64> {
        let b = self.block(e, rows, cols)?;
        Ok(operator_norm(&b))
    }

    pub fn region_block_norm(&self, e: f64, rows: &Region, cols: &Region) -> Result<f64> {
        self.block_norm(e, &rows.indices(), &cols.indices())
    }

    /// `‖R(E)‖ = 1 / dist(σ, E)`.
    pub fn full_norm(&self, e: f64) -> f64 {
        1.0 / self.distance_to_spectrum(e)
    }
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `‖χ_rows (H_Λ - E)^{-1} χ_cols‖`; errors at resonant energies.
pub fn resolvent_block_norm(op: &BoxOperator, e: f64, rows: &Region, cols: &Region) -> Result<f64> {
    Resolvent::new(op).region_block_norm(e, rows, cols)
}

/// Empirical GRI ratio for nested suitable cubes `Λ ⊂ Λ'`:
/// `‖χ_B R_{Λ'} χ_A‖ / (‖χ_B R_{Λ'} χ_Λ^out‖ · ‖χ_Λ^out R_Λ χ_A‖)`.
pub fn geometric_resolvent_ratio(
    model: &DisorderModel,
    config: &Configuration,
    inner: &Cube,
    outer: &Cube,
    a_sites: &[crate::geometry::LatticePoint],
    b_sites: &[crate::geometry::LatticePoint],
    e: f64,
) -> Result<f64> {
    use crate::geometry::{region, RegionKind};
    if !outer.contains_cube(inner) || !inner.is_suitable() || !outer.is_suitable() {
        return Err(Error::invalid("GRI needs nested suitable cubes"));
    }
    let int = region(inner, RegionKind::Interior)?;
    if a_sites.iter().any(|s| !int.sites().contains(s)) {
        return Err(Error::invalid("A must lie in the inner cube's interior"));
    }
    if b_sites.iter().any(|s| inner.contains(s) || !outer.contains(s)) {
        return Err(Error::invalid("B must lie in the outer cube minus the inner cube"));
    }
    let small = assemble(inner, model, config);
    let big = assemble(outer, model, config);
    let rs = Resolvent::new(&small);
    let rb = Resolvent::new(&big);
    let shell = region(inner, RegionKind::Boundary)?;
    let idx_big = |sites: &[crate::geometry::LatticePoint]| -> Vec<usize> {
        sites.iter().map(|s| outer.index_of(s).unwrap()).collect()
    };
    let idx_small = |sites: &[crate::geometry::LatticePoint]| -> Vec<usize> {
        sites.iter().map(|s| inner.index_of(s).unwrap()).collect()
    };
    let num = rb.block_norm(e, &idx_big(b_sites), &idx_big(a_sites))?;
    let left = rb.block_norm(e, &idx_big(b_sites), &idx_big(shell.sites()))?;
    let right = rs.block_norm(e, &idx_small(shell.sites()), &idx_small(a_sites))?;
    Ok(num / (left * right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_configuration;
    use crate::geometry::{region, RegionKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn refined_tails_match_impurity_state() {
        // one attractive site: the bound state is sinh(κ(h+1-|n|)) exactly
        let (h, kappa) = (100i64, 1.0f64);
        let s = |x: f64| x.sinh();
        let vc = (2.0 * s(kappa * h as f64) - 2.0 * kappa.cosh() * s(kappa * (h + 1) as f64)) / s(kappa * (h + 1) as f64);
        let cube = Cube::centered(1, (2 * h + 1) as u64).unwrap();
        let mut pot = vec![0.0; cube.volume()];
        pot[h as usize] = vc;
        let op = BoxOperator::from_potential(&cube, pot).unwrap();
        let mut spec = spectrum(&op, &SpectralOptions::default()).unwrap();
        assert_abs_diff_eq!(spec.values()[0], 2.0 - 2.0 * kappa.cosh(), epsilon = 1e-12);
        assert_eq!(spec.refine_chain_tails(&op, &[0]).unwrap(), 1);
        let v = spec.vector(0);
        for n in [0i64, 10, 50, 90, 100] {
            // ratio to the peak, written to avoid overflow
            let r = (-kappa * n as f64).exp() * (1.0 - (-2.0 * kappa * (h + 1 - n) as f64).exp())
                / (1.0 - (-2.0 * kappa * (h + 1) as f64).exp());
            let got = v[(h + n) as usize] / v[h as usize];
            assert!((got - r).abs() <= 1e-10 * r, "n = {n}: {got:e} vs {r:e}");
            assert_eq!(v[(h - n) as usize], v[(h + n) as usize]);
        }
    }

    #[test]
    fn refinement_keeps_bulk_and_skips_degenerate() {
        let model = DisorderModel::anderson(1, 4.0).unwrap();
        let cube = Cube::centered(1, 81).unwrap();
        let op = assemble(&cube, &model, &sample_configuration(&model, 6));
        let plain = spectrum(&op, &SpectralOptions::default()).unwrap();
        let mut refined = plain.clone();
        let all: Vec<usize> = (0..81).collect();
        assert!(refined.refine_chain_tails(&op, &all).unwrap() > 0);
        assert!((refined.vectors() - plain.vectors()).amax() < 1e-6);
        // two identical wells 160 sites apart: the splitting is far below 1e-8
        let chain = Cube::centered(1, 201).unwrap();
        let mut pot = vec![0.0; 201];
        pot[20] = -2.35;
        pot[180] = -2.35;
        let wells = BoxOperator::from_potential(&chain, pot).unwrap();
        let mut s = spectrum(&wells, &SpectralOptions::default()).unwrap();
        assert!((s.values()[1] - s.values()[0]).abs() < 1e-8);
        assert_eq!(s.refine_chain_tails(&wells, &[0, 1]).unwrap(), 0);

        let square = flat(2, 3);
        let mut s2 = spectrum(&square, &SpectralOptions::default()).unwrap();
        assert!(s2.refine_chain_tails(&square, &[0]).is_err());
    }

    fn flat(dim: usize, side: u64) -> BoxOperator {
        let cube = Cube::centered(dim, side).unwrap();
        BoxOperator::from_potential(&cube, vec![0.0; cube.volume()]).unwrap()
    }

    #[test]
    fn three_site_chain() {
        let op = flat(1, 3);
        let m = op.to_dense();
        assert_eq!(m, m.transpose());
        let spec = spectrum(&op, &SpectralOptions::default()).unwrap();
        let s2 = 2f64.sqrt();
        for (got, want) in spec.values().iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_site() {
        let cube = Cube::centered(1, 1).unwrap();
        let op = BoxOperator::from_potential(&cube, vec![0.7]).unwrap();
        assert_eq!(op.to_dense(), DMatrix::from_element(1, 1, 2.7));
    }

    #[test]
    fn square_tensor_sum() {
        let op = flat(2, 3);
        let spec = spectrum(&op, &SpectralOptions::default()).unwrap();
        let s2 = 2f64.sqrt();
        let lam = [-s2, 0.0, s2];
        let mut want: Vec<f64> = lam.iter().flat_map(|a| lam.iter().map(move |b| 4.0 + a + b)).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in spec.values().iter().zip(&want) {
            assert_abs_diff_eq!(*g, *w, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_block_norm() {
        // diag(0, 2) at E = 1: inverse diag(-1, 1), norm 1
        let mut b = BandedSym::zeros(2, 0);
        b.set(0, 0, 0.0);
        b.set(1, 1, 2.0);
        let lu = b.lu(1.0).unwrap();
        let mut inv = DMatrix::zeros(2, 2);
        for c in 0..2 {
            let mut x = vec![0.0; 2];
            x[c] = 1.0;
            lu.solve(&mut x);
            inv.set_column(c, &DVector::from_vec(x));
        }
        assert_eq!(inv, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]));
        assert_abs_diff_eq!(operator_norm(&inv), 1.0, epsilon = 1e-15);
        // diag(1, 5) eigenpairs
        let eig = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 1.0])).symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals, vec![1.0, 5.0]);
    }

    #[test]
    fn full_block_is_inverse_distance() {
        let cube = Cube::centered(1, 7).unwrap();
        let model = DisorderModel::anderson(1, 2.0).unwrap();
        let op = assemble(&cube, &model, &sample_configuration(&model, 5));
        let r = Resolvent::new(&op);
        let full = region(&cube, RegionKind::Full).unwrap();
        for e in [-1.0, 1.3, 2.9] {
            let d = r.distance_to_spectrum(e);
            assert_abs_diff_eq!(r.region_block_norm(e, &full, &full).unwrap() * d, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn resonant_energy_errors() {
        let op = flat(1, 3);
        let cube = op.cube().clone();
        let full = region(&cube, RegionKind::Full).unwrap();
        assert!(matches!(
            resolvent_block_norm(&op, 2.0, &full, &full),
            Err(Error::SingularEnergy { .. })
        ));
    }

    #[test]
    fn periodic_ring_spectrum() {
        let op = flat(1, 9).with_boundary(BoundaryCondition::Periodic);
        let spec = spectrum(&op, &SpectralOptions::default()).unwrap();
        let mut want: Vec<f64> = (0..9).map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 9.0).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (g, w) in spec.values().iter().zip(&want) {
            assert_abs_diff_eq!(*g, *w, epsilon = 1e-12);
        }
    }

    #[test]
    fn projector_edge_cases() {
        let cube = Cube::centered(1, 9).unwrap();
        let model = DisorderModel::anderson(1, 3.0).unwrap();
        let op = assemble(&cube, &model, &sample_configuration(&model, 1));
        let spec = spectrum(&op, &SpectralOptions::default()).unwrap();
        let v = DVector::from_fn(9, |i, _| (i as f64).cos());
        let none = spectral_projector_apply(&spec, &EnergyInterval::closed(-5.0, -4.0).unwrap(), &v).unwrap();
        assert_eq!(none.norm(), 0.0);
        let all = spectral_projector_apply(&spec, &EnergyInterval::closed(-100.0, 100.0).unwrap(), &v).unwrap();
        assert!((all - &v).norm() < 1e-12);
        let e1 = spec.values()[0];
        let eta = SpectralFunction::Indicator { lo: e1, hi: e1 };
        let pv = function_apply(&spec, &eta, &v).unwrap();
        let c = spec.vector(0).dot(&v);
        assert_abs_diff_eq!(pv.norm_squared(), c * c, epsilon = 1e-14);
    }

    #[test]
    fn trace_count_edges() {
        let op = flat(1, 9);
        let spec = spectrum(&op, &SpectralOptions::default()).unwrap();
        assert_eq!(trace_count(&spec, &EnergyInterval::closed(-3.0, -0.1).unwrap()).unwrap(), 0);
        assert_eq!(trace_count(&spec, &EnergyInterval::everything()).unwrap(), 9);
        // closed form 2 - 2cos(kπ/10), k = 1..9, counted in [0, 2)
        let half_open = EnergyInterval { lo: 0.0, hi: 2.0, lo_closed: true, hi_closed: false };
        let want = (1..=9)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 10.0).cos())
            .filter(|e| *e >= 0.0 && *e < 2.0 - 1e-9)
            .count();
        assert_eq!(trace_count(&spec, &half_open).unwrap(), want);
        assert_eq!(want, 4);
    }

    #[test]
    fn gershgorin_enclosure() {
        let cube = Cube::centered(2, 5).unwrap();
        let model = DisorderModel::anderson(2, 4.0).unwrap();
        let op = assemble(&cube, &model, &sample_configuration(&model, 3));
        let (lo, hi) = op.gershgorin();
        let spec = spectrum(&op, &SpectralOptions::default()).unwrap();
        assert!(spec.values()[0] >= lo && *spec.values().last().unwrap() <= hi);
    }

    #[test]
    fn window_path_agrees_with_dense() {
        let cube = Cube::centered(2, 15).unwrap();
        let model = DisorderModel::anderson(2, 4.0).unwrap();
        let op = assemble(&cube, &model, &sample_configuration(&model, 8));
        let dense = spectrum(&op, &SpectralOptions::default()).unwrap();
        let opts = SpectralOptions { dense_limit: 10, ..Default::default() };
        let win = EnergyInterval::closed(1.0, 1.6).unwrap();
        let sparse = spectrum_window(&op, &win, &opts).unwrap();
        let want = dense.indices_in(&win).unwrap();
        assert_eq!(sparse.len(), want.len());
        for (k, &j) in want.iter().enumerate() {
            assert_abs_diff_eq!(sparse.values()[k], dense.values()[j], epsilon = 1e-10);
        }
        assert!(matches!(
            sparse.indices_in(&EnergyInterval::closed(0.0, 3.0).unwrap()),
            Err(Error::IncompleteSpectrum { .. })
        ));
        let r = Resolvent::with_limit(&op, 10);
        for e in [0.5, 1.31] {
            assert_abs_diff_eq!(r.distance_to_spectrum(e), dense.distance_to(e), epsilon = 1e-9);
        }
    }

    #[test]
    fn coordinate_dump() {
        let op = flat(1, 3);
        let mut buf = Vec::new();
        op.write_coordinate(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real symmetric");
        assert_eq!(lines[2], "3 3 5");
        assert_eq!(lines.len(), 3 + 5);
    }
}
