//! Experiment driver.
//!
//! An experiment file (TOML) names a model, optional MSA parameters, a base
//! seed and one job. Running it fills an output directory with CSV tables,
//! `records.jsonl`, `summary.json`, a `manifest.json` and a `plot.py`
//! script that reads the CSVs. CSV floats use 17 significant digits, so two
//! runs of the same file produce byte-identical tables.
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! dimension = 1
//! measure = { kind = "uniform", lo = 0.0, hi = 4.0 }
//!
//! [job]
//! command = "estimate-w"
//! energy = { kind = "closed", lo = 0.5, hi = 0.5 }
//! scale = 21
//! theta = 0.4
//! q = 2.0
//! samples = 200
//! ```

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::disorder::{sample_configuration, DisorderModel};
use crate::error::{Error, Result};
use crate::geometry::{make_cube, LatticePoint};
use crate::io::{fmt_f64, toml_error};
use crate::localization::{
    centers, count_in_window, cube_family, dynamical_moment, edi_check, kernel_decay, spectrum_with_tails,
    two_bad_probability,
    KernelSettings, MomentSettings, Placement, TimeGrid, TwoBadSettings,
};
use crate::msa::{
    certify_g, classify_cube, empirical_bottom, estimate_g, estimate_w, rescore_g, run_induction, EnergyGridPolicy,
    GSettings, InductionSettings, MsaParameters, WSettings, PILOT_SEED_BASE,
};
use crate::operators::{assemble, EnergyInterval, SpectralFunction};

pub const DEFAULT_BUDGET_SITES: u64 = 1_000_000;

#[derive(Parser, Debug)]
#[command(name = "msa-lab", version, about = "Multi-scale analysis experiments for random Schrodinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify one cube as (γ,E)-good on an energy grid.
    Classify(RunArgs),
    /// Estimate the two-cube property G.
    EstimateG(RunArgs),
    /// Estimate the Wegner property W.
    EstimateW(RunArgs),
    /// Run the scale induction ladder.
    Induction(RunArgs),
    /// Dynamical moments sup_t ‖|X|^p e^{-itH} P_I χ_K‖.
    Moments(RunArgs),
    /// Kernel decay E‖χ₁ η(H) χ₂‖ against distance.
    KernelDecay(RunArgs),
    /// EDI ratios, centers of localization and window counts.
    Edi(RunArgs),
    /// Frequency of two disjoint bad cubes per rung.
    TwoBad(RunArgs),
    /// Run whatever job the experiment file names.
    Run(RunArgs),
    /// Print a summary table for a finished run directory.
    Report { dir: PathBuf },
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Experiment file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory (overrides `output` in the file).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed (overrides `seed` in the file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo samples.
    #[arg(long, env = "MSALAB_WORKERS")]
    pub workers: Option<usize>,
    /// Largest box (in sites) any task may build.
    #[arg(long)]
    pub budget_sites: Option<u64>,
}

/// Energy window of a job: explicit, or `[E_min^emp, E_min^emp + width]`
/// where `E_min^emp` is the lowest ground-state energy over pilot boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Window {
    Closed { lo: f64, hi: f64 },
    BandBottom { width: f64, pilot_side: u64, pilot_samples: u64 },
}

impl Window {
    fn resolve(&self, model: &DisorderModel, budget: u64) -> Result<(EnergyInterval, Option<Value>)> {
        match *self {
            Window::Closed { lo, hi } => Ok((EnergyInterval::closed(lo, hi)?, None)),
            Window::BandBottom {
                width,
                pilot_side,
                pilot_samples,
            } => {
                check_budget(pilot_side, model.dimension, budget)?;
                let start = std::time::Instant::now();
                let bottom = empirical_bottom(model, pilot_side, pilot_samples, PILOT_SEED_BASE)?;
                let pilot = json!({
                    "task": "pilot",
                    "side": pilot_side,
                    "seed_first": PILOT_SEED_BASE,
                    "seed_last": PILOT_SEED_BASE + pilot_samples.max(1) - 1,
                    "bottom": bottom,
                    "wall_seconds": start.elapsed().as_secs_f64(),
                });
                Ok((EnergyInterval::closed(bottom, bottom + width)?, Some(pilot)))
            }
        }
    }
}

fn default_grid() -> usize {
    32
}

fn yes() -> bool {
    true
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET_SITES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyJob {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<LatticePoint>,
    pub side: u64,
    pub interval: Window,
    pub gamma: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "yes")]
    pub certify: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GJob {
    pub interval: Window,
    pub scale: u64,
    /// When absent, search for the largest certified rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub xi: f64,
    pub samples: u64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WJob {
    /// The left endpoint is the probed energy.
    pub energy: Window,
    pub scale: u64,
    pub theta: f64,
    pub q: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InductionJob {
    pub initial_scale: u64,
    pub initial_gamma: f64,
    pub interval: Window,
    pub samples_per_rung: u64,
    pub rungs: usize,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentJob {
    pub p: f64,
    pub interval: Window,
    pub k_side: u64,
    pub box_side: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJob {
    pub box_side: u64,
    pub interval: Window,
    /// Defaults to the indicator of `interval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<SpectralFunction>,
    pub region_side: u64,
    pub distances: Vec<u64>,
    pub samples: u64,
    #[serde(default = "averaged")]
    pub placement: Placement,
}

fn averaged() -> Placement {
    Placement::TranslationAveraged
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdiJob {
    pub box_side: u64,
    pub interval: Window,
    pub cube_sides: Vec<u64>,
    pub samples: u64,
    #[serde(default)]
    pub tail_sides: Vec<u64>,
    #[serde(default)]
    pub window_sides: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoBadJob {
    pub interval: Window,
    pub gamma: f64,
    pub ladder: Vec<u64>,
    pub rungs: Vec<usize>,
    pub samples: u64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Classify(ClassifyJob),
    EstimateG(GJob),
    EstimateW(WJob),
    Induction(InductionJob),
    Moments(MomentJob),
    KernelDecay(KernelJob),
    Edi(EdiJob),
    TwoBad(TwoBadJob),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Classify(_) => "classify",
            Job::EstimateG(_) => "estimate-g",
            Job::EstimateW(_) => "estimate-w",
            Job::Induction(_) => "induction",
            Job::Moments(_) => "moments",
            Job::KernelDecay(_) => "kernel-decay",
            Job::Edi(_) => "edi",
            Job::TwoBad(_) => "two-bad",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_budget")]
    pub budget_sites: u64,
    pub model: DisorderModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<MsaParameters>,
    pub job: Job,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| toml_error(text, e))?;
        spec.model.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment serializes")
    }

    /// Parameter gates, checked before any computation.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if let Some(p) = &self.params {
            p.validate()?;
            if p.dim != self.model.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.model.dimension,
                    got: p.dim,
                });
            }
        }
        match &self.job {
            Job::Induction(_) | Job::TwoBad(_) if self.params.is_none() => Err(Error::invalid(format!(
                "command {} needs a [params] table",
                self.job.name()
            ))),
            _ => Ok(()),
        }
    }
}

fn check_budget(side: u64, dim: usize, budget: u64) -> Result<()> {
    let sites = (side as u128).pow(dim as u32);
    if sites > budget as u128 {
        return Err(Error::BudgetExceeded {
            sites: sites.min(u64::MAX as u128) as u64,
            budget,
        });
    }
    Ok(())
}

/// A CSV table built row by row.
struct Table {
    name: &'static str,
    text: String,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Table {
        Table {
            name,
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn point(p: &LatticePoint) -> String {
    p.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

struct Outputs {
    tables: Vec<Table>,
    records: Vec<Value>,
    summary: Value,
    tasks: Vec<Value>,
    plot: &'static str,
}

fn task(name: &str, first: u64, last: u64, start: Instant) -> Value {
    json!({"task": name, "seed_first": first, "seed_last": last, "wall_seconds": start.elapsed().as_secs_f64()})
}

fn run_job(spec: &ExperimentSpec) -> Result<Outputs> {
    let model = &spec.model;
    let d = model.dimension;
    let budget = spec.budget_sites;
    let seed = spec.seed;
    let mut tasks = Vec::new();
    let mut resolve = |w: &Window| -> Result<EnergyInterval> {
        let (i, pilot) = w.resolve(model, budget)?;
        tasks.extend(pilot);
        Ok(i)
    };
    match &spec.job {
        Job::Classify(j) => {
            check_budget(j.side, d, budget)?;
            let interval = resolve(&j.interval)?;
            let start = Instant::now();
            let cube = make_cube(j.center.clone().unwrap_or_else(|| LatticePoint::origin(d)), j.side)?;
            let op = assemble(&cube, model, &sample_configuration(model, seed));
            let policy = EnergyGridPolicy {
                points: j.grid_points,
                certify: j.certify,
            };
            let v = classify_cube(&op, &interval, j.gamma, &policy)?;
            let mut t = Table::new("verdict.csv", &["energy", "norm", "threshold", "good"]);
            for e in &v.energies {
                t.row(&[f(e.energy), e.norm.map_or("resonant".into(), f), f(v.threshold), e.good.to_string()]);
            }
            tasks.push(task("classify", seed, seed, start));
            Ok(Outputs {
                tables: vec![t],
                records: vec![serde_json::to_value(&v)?],
                summary: json!({"command": "classify", "side": j.side, "gamma": j.gamma,
                    "good": v.good, "certified": v.certified, "min_margin": v.min_margin, "threshold": v.threshold}),
                tasks,
                plot: PLOT_CLASSIFY,
            })
        }
        Job::EstimateG(j) => {
            check_budget(j.scale, d, budget)?;
            let interval = resolve(&j.interval)?;
            let start = Instant::now();
            let settings = GSettings {
                interval,
                scale: j.scale,
                gamma: j.gamma.unwrap_or(0.0),
                xi: j.xi,
                samples: j.samples,
                seed_base: seed,
                placement: None,
                grid: EnergyGridPolicy {
                    points: j.grid_points,
                    certify: false,
                },
            };
            let mut run = estimate_g(model, &settings)?;
            let mut certificate = Value::Null;
            if j.gamma.is_none() {
                match certify_g(&run.samples, j.scale, j.xi) {
                    Some(c) => {
                        run = rescore_g(&run, c.gamma);
                        certificate = serde_json::to_value(&c)?;
                    }
                    None => {
                        let best = run.samples.iter().map(|s| s.pair_rate).fold(f64::NEG_INFINITY, f64::max);
                        run = rescore_g(&run, best.max(0.0));
                    }
                }
            }
            let mut t = Table::new("samples.csv", &["seed", "success", "pair_rate"]);
            for s in &run.samples {
                t.row(&[s.seed.to_string(), s.success.to_string(), f(s.pair_rate)]);
            }
            tasks.push(task("estimate-g", run.report.seed_first, run.report.seed_last, start));
            Ok(Outputs {
                tables: vec![t, report_table(&[&run.report])],
                records: vec![serde_json::to_value(&run.report)?],
                summary: json!({"command": "estimate-g", "reports": [run.report], "certificate": certificate}),
                tasks,
                plot: PLOT_G,
            })
        }
        Job::EstimateW(j) => {
            check_budget(j.scale, d, budget)?;
            let energy = resolve(&j.energy)?.lo;
            let start = Instant::now();
            let run = estimate_w(
                model,
                &WSettings {
                    energy,
                    scale: j.scale,
                    theta: j.theta,
                    q: j.q,
                    samples: j.samples,
                    seed_base: seed,
                    center: None,
                },
            )?;
            let mut t = Table::new("samples.csv", &["seed", "distance", "distance_is_lower_bound", "event"]);
            for s in &run.samples {
                t.row(&[s.seed.to_string(), f(s.distance), s.lower_bound.to_string(), s.event.to_string()]);
            }
            tasks.push(task("estimate-w", run.report.seed_first, run.report.seed_last, start));
            Ok(Outputs {
                tables: vec![t, report_table(&[&run.report])],
                records: vec![serde_json::to_value(&run.report)?],
                summary: json!({"command": "estimate-w", "reports": [run.report]}),
                tasks,
                plot: PLOT_W,
            })
        }
        Job::Induction(j) => {
            let interval = resolve(&j.interval)?;
            let start = Instant::now();
            let params = spec.params.clone().expect("validated");
            let ladder = run_induction(
                model,
                &InductionSettings {
                    params,
                    initial_scale: j.initial_scale,
                    initial_gamma: j.initial_gamma,
                    interval,
                    samples_per_rung: j.samples_per_rung,
                    rungs: j.rungs,
                    seed_base: seed,
                    budget_sites: budget,
                    grid: EnergyGridPolicy {
                        points: j.grid_points,
                        certify: false,
                    },
                },
            )?;
            let mut t = Table::new(
                "ladder.csv",
                &["k", "scale", "gamma", "xi", "arithmetic_ok", "samples", "successes", "ci_lo", "ci_hi", "threshold", "holds"],
            );
            let mut records = Vec::new();
            for r in &ladder.rungs {
                let e = &r.estimate;
                t.row(&[
                    r.k.to_string(),
                    r.scale.to_string(),
                    f(r.gamma),
                    f(r.xi),
                    r.arithmetic_ok.to_string(),
                    e.samples.to_string(),
                    e.successes.to_string(),
                    f(e.ci.0),
                    f(e.ci.1),
                    f(e.threshold),
                    e.holds.to_string(),
                ]);
                records.push(json!({"rung": r.k, "L": r.scale, "gamma": r.gamma, "N": e.samples,
                    "successes": e.successes, "ci": e.ci, "verdict": e.holds, "wall_seconds": r.wall_seconds,
                    "seed_first": e.seed_first, "seed_last": e.seed_last}));
            }
            let last = ladder.rungs.last().map_or(seed, |r| r.estimate.seed_last);
            tasks.push(task("induction", seed, last, start));
            Ok(Outputs {
                tables: vec![t],
                records,
                summary: json!({"command": "induction", "ladder": ladder}),
                tasks,
                plot: PLOT_INDUCTION,
            })
        }
        Job::Moments(j) => {
            check_budget(j.box_side, d, budget)?;
            let interval = resolve(&j.interval)?;
            let start = Instant::now();
            let r = dynamical_moment(
                model,
                &MomentSettings {
                    p: j.p,
                    interval,
                    k_side: j.k_side,
                    box_side: j.box_side,
                    times: j.times.clone().unwrap_or_default(),
                    samples: j.samples,
                    seed_base: seed,
                },
            )?;
            let mut t = Table::new("moments.csv", &["seed", "eigen_count", "sup", "sup_time", "m0", "bound", "edge_mass"]);
            for s in &r.samples {
                t.row(&[
                    s.seed.to_string(),
                    s.eigen_count.to_string(),
                    f(s.sup),
                    f(s.sup_time),
                    f(s.m0),
                    f(s.bound),
                    f(s.edge_mass),
                ]);
            }
            tasks.push(task("moments", seed, seed + j.samples - 1, start));
            Ok(Outputs {
                tables: vec![t],
                records: r.samples.iter().map(serde_json::to_value).collect::<serde_json::Result<_>>()?,
                summary: json!({"command": "moments", "p": r.p, "box_side": r.box_side, "k_side": r.k_side,
                    "interval": r.interval, "time_count": r.time_count, "sup": r.sup, "bound": r.bound,
                    "dominated": r.dominated}),
                tasks,
                plot: PLOT_MOMENTS,
            })
        }
        Job::KernelDecay(j) => {
            check_budget(j.box_side, d, budget)?;
            let interval = resolve(&j.interval)?;
            let start = Instant::now();
            let eta = j.eta.clone().unwrap_or(SpectralFunction::Indicator {
                lo: interval.lo,
                hi: interval.hi,
            });
            let r = kernel_decay(
                model,
                &KernelSettings {
                    box_side: j.box_side,
                    eta,
                    region_side: j.region_side,
                    distances: j.distances.clone(),
                    samples: j.samples,
                    seed_base: seed,
                    placement: j.placement.clone(),
                },
            )?;
            let mut t = Table::new("kernel.csv", &["distance", "mean", "ci_lo", "ci_hi", "bound_mean", "max"]);
            let mut per = Table::new("kernel_samples.csv", &["seed", "distance", "exact", "bound"]);
            for p in &r.points {
                t.row(&[p.distance.to_string(), f(p.exact.mean), f(p.exact.ci.0), f(p.exact.ci.1), f(p.bound.mean), f(p.exact.max)]);
                for (i, v) in p.values.iter().enumerate() {
                    per.row(&[(seed + i as u64).to_string(), p.distance.to_string(), f(v.exact), f(v.bound)]);
                }
            }
            tasks.push(task("kernel-decay", r.seed_first, r.seed_last, start));
            Ok(Outputs {
                tables: vec![t, per],
                records: r
                    .points
                    .iter()
                    .map(|p| json!({"distance": p.distance, "exact": p.exact, "bound": p.bound}))
                    .collect(),
                summary: json!({"command": "kernel-decay", "box_side": r.box_side, "exponent": r.exponent,
                    "strictly_decreasing": r.strictly_decreasing, "max_edge_mass": r.max_edge_mass,
                    "points": r.points.iter().map(|p| json!({"distance": p.distance, "mean": p.exact.mean,
                        "ci": p.exact.ci, "bound_mean": p.bound.mean})).collect::<Vec<_>>()}),
                tasks,
                plot: PLOT_KERNEL,
            })
        }
        Job::Edi(j) => {
            check_budget(j.box_side, d, budget)?;
            let interval = resolve(&j.interval)?;
            let start = Instant::now();
            let box_cube = crate::geometry::Cube::centered(d, j.box_side)?;
            let mut family = Vec::new();
            for &side in &j.cube_sides {
                family.extend(cube_family(&box_cube, side)?);
            }
            let mut edi = Table::new("edi.csv", &["seed", "eigen_index", "eigenvalue", "cube_center", "cube_side", "ratio", "resonant"]);
            let mut cen = Table::new("centers.csv", &["seed", "eigen_index", "eigenvalue", "center", "max_mass", "decay_rate", "edge_mass"]);
            let mut all_records = Vec::new();
            let mut c_edi = 0.0f64;
            let mut all_finite = true;
            for i in 0..j.samples {
                let s = seed + i;
                let op = assemble(&box_cube, model, &sample_configuration(model, s));
                let sp = spectrum_with_tails(&op, &interval)?;
                let rep = edi_check(&op, &sp, &interval, &family)?;
                c_edi = c_edi.max(rep.c_edi);
                all_finite &= rep.all_finite;
                for e in &rep.entries {
                    edi.row(&[
                        s.to_string(),
                        e.eigen_index.to_string(),
                        f(e.eigenvalue),
                        point(e.cube.center()),
                        e.cube.side().to_string(),
                        e.ratio.map_or("none".into(), f),
                        e.resonant.to_string(),
                    ]);
                }
                let recs = centers(&sp, &interval, &j.tail_sides)?;
                for r in &recs {
                    cen.row(&[
                        s.to_string(),
                        r.index.to_string(),
                        f(r.eigenvalue),
                        point(&r.center),
                        f(r.max_mass),
                        r.decay_rate.map_or("none".into(), f),
                        f(r.edge_mass),
                    ]);
                }
                all_records.push(recs);
            }
            let counts = count_in_window(&all_records, d, &j.window_sides);
            let mut ct = Table::new("counts.csv", &["window_side", "mean_count"]);
            for (side, m) in counts.sides.iter().zip(&counts.mean_counts) {
                ct.row(&[side.to_string(), f(*m)]);
            }
            tasks.push(task("edi", seed, seed + j.samples.max(1) - 1, start));
            Ok(Outputs {
                tables: vec![edi, cen, ct],
                records: all_records
                    .iter()
                    .flatten()
                    .map(serde_json::to_value)
                    .collect::<serde_json::Result<_>>()?,
                summary: json!({"command": "edi", "c_edi": c_edi, "all_finite": all_finite,
                    "cubes": family.len(), "kappa": counts.kappa, "kappa_reference": counts.kappa_reference}),
                tasks,
                plot: PLOT_EDI,
            })
        }
        Job::TwoBad(j) => {
            let interval = resolve(&j.interval)?;
            let start = Instant::now();
            let params = spec.params.as_ref().expect("validated");
            let r = two_bad_probability(
                model,
                &TwoBadSettings {
                    interval,
                    gamma: j.gamma,
                    ladder: j.ladder.clone(),
                    rungs: j.rungs.clone(),
                    samples: j.samples,
                    seed_base: seed,
                    grid_points: j.grid_points,
                    budget_sites: budget,
                    alpha: params.alpha,
                    xi: params.xi(),
                },
            )?;
            let mut t = Table::new("two_bad.csv", &["j", "scale", "bound_side", "cubes", "samples", "events", "frequency", "ci_lo", "ci_hi"]);
            for r in &r.rungs {
                t.row(&[
                    r.j.to_string(),
                    r.scale.to_string(),
                    r.bound_side.to_string(),
                    r.cubes.to_string(),
                    r.samples.to_string(),
                    r.events.to_string(),
                    f(r.frequency),
                    f(r.ci.0),
                    f(r.ci.1),
                ]);
            }
            tasks.push(task("two-bad", seed, seed + j.samples * (j.ladder.len() as u64) - 1, start));
            Ok(Outputs {
                tables: vec![t],
                records: r.rungs.iter().map(serde_json::to_value).collect::<serde_json::Result<_>>()?,
                summary: json!({"command": "two-bad", "report": r}),
                tasks,
                plot: PLOT_TWO_BAD,
            })
        }
    }
}

fn report_table(reports: &[&crate::msa::EstimateReport]) -> Table {
    let mut t = Table::new(
        "report.csv",
        &["hypothesis", "scale", "energy_lo", "energy_hi", "samples", "successes", "estimate", "ci_lo", "ci_hi", "threshold", "holds"],
    );
    for r in reports {
        t.row(&[
            format!("{:?}", r.hypothesis),
            r.scale.to_string(),
            f(r.energy_lo),
            f(r.energy_hi),
            r.samples.to_string(),
            r.successes.to_string(),
            f(r.estimate),
            f(r.ci.0),
            f(r.ci.1),
            f(r.threshold),
            r.holds.to_string(),
        ]);
    }
    t
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

/// Parses, validates and runs an experiment file. When `expected` is set the
/// file's command must match it. Returns the output directory.
pub fn execute(expected: Option<&str>, args: &RunArgs) -> Result<PathBuf> {
    let text = fs::read_to_string(&args.spec)?;
    let mut spec = match ExperimentSpec::from_toml(&text) {
        Ok(s) => s,
        Err(e) => {
            if let Some(out) = &args.out {
                if fs::create_dir_all(out).is_ok() {
                    let _ = write_json(&out.join("error.json"), &error_record(&e));
                }
            }
            return Err(e);
        }
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(b) = args.budget_sites {
        spec.budget_sites = b;
    }
    let out = args
        .out
        .clone()
        .or_else(|| spec.output.clone())
        .ok_or_else(|| Error::invalid("no output directory: pass --out or set `output`"))?;
    let result = (|| {
        if let Some(cmd) = expected {
            if cmd != spec.job.name() {
                return Err(Error::invalid(format!(
                    "experiment file describes `{}`, not `{cmd}`",
                    spec.job.name()
                )));
            }
        }
        spec.validate()?;
        fs::create_dir_all(&out)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?;
        let outputs = pool.install(|| run_job(&spec))?;
        write_outputs(&out, &spec, &text, outputs)
    })();
    if let Err(e) = &result {
        if fs::create_dir_all(&out).is_ok() {
            let _ = write_json(&out.join("error.json"), &error_record(e));
        }
    }
    result.map(|_| out)
}

pub fn error_record(e: &Error) -> Value {
    let mut v = json!({"error": e.kind(), "message": e.to_string()});
    match e {
        Error::Parse { line, field, .. } => {
            v["line"] = json!(line);
            v["field"] = json!(field);
        }
        Error::Infeasible { constraint, .. } => v["constraint"] = json!(constraint),
        _ => {}
    }
    v
}

fn write_outputs(out: &Path, spec: &ExperimentSpec, text: &str, o: Outputs) -> Result<()> {
    let mut files = Vec::new();
    for t in &o.tables {
        fs::write(out.join(t.name), &t.text)?;
        files.push(t.name.to_string());
    }
    let mut jsonl = String::new();
    for r in &o.records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    fs::write(out.join("records.jsonl"), jsonl)?;
    fs::write(out.join("plot.py"), o.plot)?;
    write_json(&out.join("summary.json"), &o.summary)?;
    fs::write(out.join("experiment.toml"), spec.to_toml())?;
    files.extend(["records.jsonl", "plot.py", "summary.json", "experiment.toml"].map(String::from));
    let _ = fs::remove_file(out.join("error.json"));
    let manifest = json!({
        "spec_sha256": hex(&Sha256::digest(text.as_bytes())),
        "version": env!("CARGO_PKG_VERSION"),
        "command": spec.job.name(),
        "seed": spec.seed,
        "model_id": spec.model.id(),
        "tasks": o.tasks,
        "files": files,
    });
    write_json(&out.join("manifest.json"), &manifest)
}

fn read_json(path: &Path, dir: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|_| Error::MissingManifest(dir.to_path_buf()))?;
    serde_json::from_str(&text).map_err(|_| Error::MissingManifest(dir.to_path_buf()))
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.4e}"),
        None => "-".into(),
    }
}

/// Human-readable summary of a run directory.
pub fn report(dir: &Path) -> Result<String> {
    let manifest = read_json(&dir.join("manifest.json"), dir)?;
    let command = manifest["command"]
        .as_str()
        .ok_or_else(|| Error::MissingManifest(dir.to_path_buf()))?
        .to_string();
    let summary = read_json(&dir.join("summary.json"), dir)?;
    let mut s = format!("run: {}\ncommand: {command}\nseed: {}\n\n", dir.display(), manifest["seed"]);
    match command.as_str() {
        "estimate-w" => {
            let _ = writeln!(s, "{:>6} {:>6} {:>6} {:>11} {:>25} {:>11} {:>8}", "L", "Θ", "q", "P̂", "CI", "L^-q", "verdict");
            for r in summary["reports"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    s,
                    "{:>6} {:>6} {:>6} {:>11} {:>25} {:>11} {:>8}",
                    r["scale"].to_string(),
                    r["theta"].to_string(),
                    r["q"].to_string(),
                    num(&r["estimate"]),
                    format!("[{}, {}]", num(&r["ci"][0]), num(&r["ci"][1])),
                    num(&r["threshold"]),
                    verdict(&r["holds"]),
                );
            }
        }
        "estimate-g" => {
            let _ = writeln!(s, "{:>6} {:>11} {:>6} {:>11} {:>25} {:>11} {:>8}", "L", "γ", "ξ", "P̂", "CI", "1-L^-2ξ", "verdict");
            for r in summary["reports"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    s,
                    "{:>6} {:>11} {:>6} {:>11} {:>25} {:>11} {:>8}",
                    r["scale"].to_string(),
                    num(&r["gamma"]),
                    r["xi"].to_string(),
                    num(&r["estimate"]),
                    format!("[{}, {}]", num(&r["ci"][0]), num(&r["ci"][1])),
                    num(&r["threshold"]),
                    verdict(&r["holds"]),
                );
            }
            let c = &summary["certificate"];
            if !c.is_null() {
                let _ = writeln!(s, "\ncertified γ = {}, ξ < {}", num(&c["gamma"]), num(&c["xi_sup"]));
            }
        }
        "induction" => {
            let _ = writeln!(
                s,
                "{:>3} {:>10} {:>11} {:>11} {:>25} {:>10} {:>8}",
                "k", "L_k", "γ_k", "P̂", "CI", "recursion", "verdict"
            );
            for r in summary["ladder"]["rungs"].as_array().into_iter().flatten() {
                let e = &r["estimate"];
                let _ = writeln!(
                    s,
                    "{:>3} {:>10} {:>11} {:>11} {:>25} {:>10} {:>8}",
                    r["k"].to_string(),
                    r["scale"].to_string(),
                    num(&r["gamma"]),
                    num(&e["estimate"]),
                    format!("[{}, {}]", num(&e["ci"][0]), num(&e["ci"][1])),
                    if r["arithmetic_ok"].as_bool() == Some(true) { "ok" } else { "floor" },
                    verdict(&e["holds"])
                );
            }
            let _ = writeln!(s, "\nhalt: {}", summary["ladder"]["halt"]);
        }
        _ => {
            let mut flat = summary.clone();
            if let Some(o) = flat.as_object_mut() {
                o.remove("command");
            }
            for (k, v) in flat.as_object().into_iter().flatten() {
                let _ = writeln!(s, "{k}: {v}");
            }
        }
    }
    Ok(s)
}

fn verdict(v: &Value) -> &'static str {
    match v.as_bool() {
        Some(true) => "holds",
        Some(false) => "fails",
        None => "-",
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (expected, args) = match &cli.command {
        Command::Report { dir } => {
            return match report(dir) {
                Ok(text) => {
                    print!("{text}");
                    0
                }
                Err(e) => {
                    eprintln!("{}", error_record(&e));
                    1
                }
            }
        }
        Command::Run(a) => (None, a),
        Command::Classify(a) => (Some("classify"), a),
        Command::EstimateG(a) => (Some("estimate-g"), a),
        Command::EstimateW(a) => (Some("estimate-w"), a),
        Command::Induction(a) => (Some("induction"), a),
        Command::Moments(a) => (Some("moments"), a),
        Command::KernelDecay(a) => (Some("kernel-decay"), a),
        Command::Edi(a) => (Some("edi"), a),
        Command::TwoBad(a) => (Some("two-bad"), a),
    };
    match execute(expected, args) {
        Ok(dir) => {
            println!("{}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            1
        }
    }
}

const PLOT_CLASSIFY: &str = r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("verdict.csv")
df["norm"] = pd.to_numeric(df["norm"], errors="coerce")
plt.semilogy(df["energy"], df["norm"], "o-", label="block norm")
plt.semilogy(df["energy"], df["threshold"], "--", label="exp(-γL)")
plt.xlabel("E")
plt.legend()
plt.savefig("verdict.png", dpi=150)
"#;

const PLOT_G: &str = r#"import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("samples.csv")
rates = df["pair_rate"].replace(-np.inf, np.nan).dropna()
plt.hist(rates, bins=40)
plt.xlabel("pair rate")
plt.ylabel("configurations")
plt.savefig("pair_rates.png", dpi=150)
"#;

const PLOT_W: &str = r#"import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("samples.csv")
plt.hist(np.log10(df["distance"].clip(lower=1e-300)), bins=40)
plt.xlabel("log10 dist(spectrum, E)")
plt.savefig("resonance.png", dpi=150)
"#;

const PLOT_INDUCTION: &str = r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("ladder.csv")
plt.loglog(df["scale"], df["gamma"], "o-")
plt.xlabel("L_k")
plt.ylabel("gamma_k")
plt.savefig("ladder.png", dpi=150)
"#;

const PLOT_MOMENTS: &str = r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("moments.csv")
plt.hist([df["sup"], df["bound"]], bins=30, label=["time-grid sup", "eigenfunction bound"])
plt.legend()
plt.savefig("moments.png", dpi=150)
"#;

const PLOT_KERNEL: &str = r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("kernel.csv")
plt.errorbar(df["distance"], df["mean"], yerr=[df["mean"] - df["ci_lo"], df["ci_hi"] - df["mean"]], fmt="o-")
plt.xscale("log")
plt.yscale("log")
plt.xlabel("dist")
plt.ylabel("mean kernel norm")
plt.savefig("kernel.png", dpi=150)
"#;

const PLOT_EDI: &str = r#"import numpy as np
import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("edi.csv")
r = pd.to_numeric(df["ratio"], errors="coerce").dropna()
plt.hist(np.log10(r[r > 0]), bins=40)
plt.xlabel("log10 EDI ratio")
plt.savefig("edi.png", dpi=150)
"#;

const PLOT_TWO_BAD: &str = r#"import pandas as pd
import matplotlib.pyplot as plt

df = pd.read_csv("two_bad.csv")
plt.errorbar(df["scale"], df["frequency"], yerr=[df["frequency"] - df["ci_lo"], df["ci_hi"] - df["frequency"]], fmt="o-")
plt.xscale("log")
plt.yscale("log")
plt.xlabel("L_j")
plt.savefig("two_bad.png", dpi=150)
"#;
