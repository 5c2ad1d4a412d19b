//! Single-site measures, disorder models and reproducible configurations.
//!
//! A configuration is a pure function `(seed, site) -> coupling`. Each site
//! owns its own ChaCha stream (the stream id is an injective encoding of the
//! site coordinates), so couplings do not depend on which box is being built
//! or in what order sites are queried, and disjoint cubes read disjoint
//! streams.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::LatticePoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingleSiteMeasure {
    /// Lebesgue measure normalized on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Power-law density `∝ (x - lo)^(exponent - 1)` on `[lo, hi]`, so that
    /// `μ([lo, lo + h]) = (h / (hi - lo))^exponent`.
    PowerLaw { lo: f64, hi: f64, exponent: f64 },
    /// Two atoms: `high` with probability `p`, `low` otherwise.
    Bernoulli { low: f64, high: f64, p: f64 },
    /// Finite atoms `(value, weight)`; weights are normalized.
    PointList { atoms: Vec<(f64, f64)> },
}

impl SingleSiteMeasure {
    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be finite")))
            }
        };
        match self {
            SingleSiteMeasure::Uniform { lo, hi } => {
                finite(*lo, "lo")?;
                finite(*hi, "hi")?;
                if hi <= lo {
                    return Err(Error::invalid("uniform measure needs lo < hi"));
                }
            }
            SingleSiteMeasure::PowerLaw { lo, hi, exponent } => {
                finite(*lo, "lo")?;
                finite(*hi, "hi")?;
                if hi <= lo || !(*exponent > 0.0) || !exponent.is_finite() {
                    return Err(Error::invalid("power-law measure needs lo < hi and exponent > 0"));
                }
            }
            SingleSiteMeasure::Bernoulli { low, high, p } => {
                finite(*low, "low")?;
                finite(*high, "high")?;
                if !(0.0..=1.0).contains(p) || low > high {
                    return Err(Error::invalid("bernoulli measure needs 0 <= p <= 1 and low <= high"));
                }
            }
            SingleSiteMeasure::PointList { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("point list needs at least one atom"));
                }
                for &(v, w) in atoms {
                    finite(v, "atom value")?;
                    if !(w > 0.0) || !w.is_finite() {
                        return Err(Error::invalid("atom weights must be positive"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Support bounds `(q-, q+)`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            SingleSiteMeasure::Uniform { lo, hi } | SingleSiteMeasure::PowerLaw { lo, hi, .. } => (*lo, *hi),
            SingleSiteMeasure::Bernoulli { low, high, p } => {
                if *p == 1.0 {
                    (*high, *high)
                } else if *p == 0.0 {
                    (*low, *low)
                } else {
                    (*low, *high)
                }
            }
            SingleSiteMeasure::PointList { atoms } => atoms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(v, _)| {
                (a.min(v), b.max(v))
            }),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, SingleSiteMeasure::Bernoulli { .. } | SingleSiteMeasure::PointList { .. })
    }

    /// A single-atom measure makes every configuration identical.
    pub fn is_deterministic(&self) -> bool {
        let (lo, hi) = self.support();
        self.is_atomic() && lo == hi
    }

    fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            SingleSiteMeasure::Bernoulli { low, high, p } => vec![(*low, 1.0 - p), (*high, *p)],
            SingleSiteMeasure::PointList { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let mut a: Vec<_> = atoms.iter().map(|&(v, w)| (v, w / total)).collect();
                a.sort_by(|x, y| x.0.total_cmp(&y.0));
                a
            }
            _ => Vec::new(),
        }
    }

    /// Probability density, for the absolutely continuous kinds.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            SingleSiteMeasure::Uniform { lo, hi } => Some(if (*lo..=*hi).contains(&x) { 1.0 / (hi - lo) } else { 0.0 }),
            SingleSiteMeasure::PowerLaw { lo, hi, exponent } => {
                if x < *lo || x > *hi {
                    return Some(0.0);
                }
                let w = hi - lo;
                Some(exponent / w * ((x - lo) / w).powf(exponent - 1.0))
            }
            _ => None,
        }
    }

    /// `μ((-∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            SingleSiteMeasure::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            SingleSiteMeasure::PowerLaw { lo, hi, exponent } => {
                ((x - lo) / (hi - lo)).clamp(0.0, 1.0).powf(*exponent)
            }
            _ => self.atoms().iter().filter(|a| a.0 <= x).map(|a| a.1).sum(),
        }
    }

    /// `μ([a, b])` for a closed interval.
    pub fn measure(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return 0.0;
        }
        if self.is_atomic() {
            self.atoms().iter().filter(|t| t.0 >= a && t.0 <= b).map(|t| t.1).sum()
        } else {
            (self.cdf(b) - self.cdf(a)).max(0.0)
        }
    }

    /// Generalized inverse CDF applied to `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            SingleSiteMeasure::Uniform { lo, hi } => lo + (hi - lo) * u,
            SingleSiteMeasure::PowerLaw { lo, hi, exponent } => lo + (hi - lo) * u.powf(1.0 / exponent),
            _ => {
                let atoms = self.atoms();
                let mut acc = 0.0;
                for &(v, w) in &atoms {
                    acc += w;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap()
            }
        }
    }

    /// Largest mass of any closed interval of length `h`, i.e. the Hölder
    /// modulus of the measure at scale `h`.
    pub fn holder_modulus(&self, h: f64) -> f64 {
        match self {
            SingleSiteMeasure::Uniform { lo, hi } => (h / (hi - lo)).min(1.0),
            SingleSiteMeasure::PowerLaw { lo, hi, exponent } => {
                let r = (h / (hi - lo)).min(1.0);
                if *exponent <= 1.0 {
                    // density decreasing: worst interval at the left end
                    r.powf(*exponent)
                } else {
                    1.0 - (1.0 - r).powf(*exponent)
                }
            }
            _ => {
                let atoms = self.atoms();
                atoms
                    .iter()
                    .map(|&(v, _)| self.measure(v, v + h))
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Fitted lower-tail exponent of a measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFit {
    pub fitted: f64,
    /// Grid points `h` where `μ([q-, q- + h]) > h^τ` for the declared `τ`.
    pub violations: Vec<f64>,
}

/// Least-squares slope of `log μ([q-, q- + h])` against `log h`.
pub fn measure_tail_exponent(measure: &SingleSiteMeasure, h_grid: &[f64], declared: Option<f64>) -> Result<TailFit> {
    if measure.is_atomic() {
        return Err(Error::UndefinedTail);
    }
    let (lo, _) = measure.support();
    let pts: Vec<(f64, f64)> = h_grid
        .iter()
        .filter(|&&h| h > 0.0)
        .map(|&h| (h, measure.measure(lo, lo + h)))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("tail fit needs at least two positive grid points"));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fitted = crate::stats::least_squares(&xs, &ys).slope;
    let violations = match declared {
        Some(tau) => pts.iter().filter(|&&(h, m)| m > h.powf(tau)).map(|p| p.0).collect(),
        None => Vec::new(),
    };
    Ok(TailFit { fitted, violations })
}

/// Periodic background potential `V₀` on a cell `[0, period)^d`; values are
/// listed in lexicographic order of the cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub period: u64,
    pub values: Vec<f64>,
}

impl Default for Background {
    fn default() -> Self {
        Background {
            period: 1,
            values: vec![0.0],
        }
    }
}

impl Background {
    pub fn at(&self, site: &LatticePoint) -> f64 {
        let p = self.period as i64;
        let idx = site
            .coords()
            .iter()
            .fold(0usize, |acc, &x| acc * self.period as usize + x.rem_euclid(p) as usize);
        self.values[idx]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderModel {
    pub dimension: usize,
    pub measure: SingleSiteMeasure,
    /// On-site weight of the single-site potential `f`.
    #[serde(default = "one")]
    pub coupling_weight: f64,
    #[serde(default)]
    pub background: Background,
}

fn one() -> f64 {
    1.0
}

impl DisorderModel {
    pub fn new(dimension: usize, measure: SingleSiteMeasure) -> Result<DisorderModel> {
        let m = DisorderModel {
            dimension,
            measure,
            coupling_weight: 1.0,
            background: Background::default(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Anderson model with couplings uniform on `[0, width]`.
    pub fn anderson(dimension: usize, width: f64) -> Result<DisorderModel> {
        Self::new(dimension, SingleSiteMeasure::Uniform { lo: 0.0, hi: width })
    }

    /// Deterministic model with every coupling equal to `value`.
    pub fn constant(dimension: usize, value: f64) -> Result<DisorderModel> {
        Self::new(dimension, SingleSiteMeasure::PointList { atoms: vec![(value, 1.0)] })
    }

    pub fn with_background(mut self, background: Background) -> Result<DisorderModel> {
        self.background = background;
        self.validate()?;
        Ok(self)
    }

    pub fn with_weight(mut self, weight: f64) -> Result<DisorderModel> {
        self.coupling_weight = weight;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.dimension) {
            return Err(Error::invalid(format!("dimension must be 1..=4, got {}", self.dimension)));
        }
        self.measure.validate()?;
        if !(self.coupling_weight > 0.0) || !self.coupling_weight.is_finite() {
            return Err(Error::invalid("single-site weight must be positive"));
        }
        let b = &self.background;
        let cell = (b.period as usize).checked_pow(self.dimension as u32);
        if b.period == 0 || cell != Some(b.values.len()) {
            return Err(Error::invalid(format!(
                "background needs period^d = {:?} values, got {}",
                cell,
                b.values.len()
            )));
        }
        if b.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("background values must be finite"));
        }
        Ok(())
    }

    /// Stable identifier derived from the model's canonical text form.
    pub fn id(&self) -> u64 {
        let text = toml::to_string(self).expect("model serializes");
        let digest = Sha256::digest(text.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn from_toml(text: &str) -> Result<DisorderModel> {
        let m: DisorderModel = toml::from_str(text).map_err(|e| crate::io::toml_error(text, e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<DisorderModel> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serializes")
    }

    /// Bounds `[min V, max V]` over all configurations.
    pub fn potential_range(&self) -> (f64, f64) {
        let (qlo, qhi) = self.measure.support();
        let (blo, bhi) = self
            .background
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let w = self.coupling_weight;
        (blo + (qlo * w).min(qhi * w), bhi + (qlo * w).max(qhi * w))
    }
}

/// One realization `ω`, addressable site by site.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub seed: u64,
    pub model_id: u64,
}

pub fn sample_configuration(model: &DisorderModel, seed: u64) -> Configuration {
    Configuration {
        seed,
        model_id: model.id(),
    }
}

/// Injective map from sites to ChaCha stream ids: zigzag each coordinate
/// into `64 / d` bits.
fn stream_id(site: &LatticePoint) -> u64 {
    let d = site.dim() as u32;
    let bits = 64 / d;
    let mut id = 0u64;
    for &x in site.coords() {
        let z = ((x << 1) ^ (x >> 63)) as u64;
        assert!(
            bits == 64 || z < (1u64 << bits),
            "site coordinate {x} exceeds the {bits}-bit stream encoding"
        );
        id = if bits == 64 { z } else { (id << bits) | z };
    }
    id
}

impl Configuration {
    /// Uniform `[0, 1)` variate owned by `site`.
    pub fn uniform(&self, site: &LatticePoint) -> f64 {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id(site));
        rng.random::<f64>()
    }

    /// `q_k(ω)`.
    pub fn coupling(&self, model: &DisorderModel, site: &LatticePoint) -> f64 {
        if let SingleSiteMeasure::PointList { atoms } = &model.measure {
            if atoms.len() == 1 {
                return atoms[0].0;
            }
        }
        model.measure.quantile(self.uniform(site))
    }
}

/// `V_ω(x) = V₀(x) + q_x(ω) f(0)` for the on-site model.
pub fn potential(model: &DisorderModel, config: &Configuration, site: &LatticePoint) -> f64 {
    model.background.at(site) + config.coupling(model, site) * model.coupling_weight
}
