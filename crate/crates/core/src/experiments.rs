//! Rate-law experiments: n-sweeps, sigma-sweeps, intrinsic-dimension
//! sweeps, vanishing-sigma schedules and the concentration tail study.
//!
//! The population law `P` is stood in for by a large reference sample drawn
//! from the same spec. Every estimate is seeded by its grid point and
//! repetition index, so reports do not depend on thread scheduling.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwdError};
use crate::measures::{sample, DistributionSpec};
use crate::report::{fmt_f64, write_json};
use crate::rng::Seed;
use crate::smooth::{swd_estimate, SmoothingConfig};

/// Default reference size; the effective size is at least `4 * max(n)`.
pub const DEFAULT_REFERENCE_SIZE: usize = 8192;

/// Means at or below this are treated as zero when fitting slopes.
pub const SLOPE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
}

/// Least-squares slope of `log y` on `log x` with its standard error.
pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 3 {
        return Err(SwdError::invalid(format!(
            "slope fit needs at least 3 points, got {}",
            pairs.len()
        )));
    }
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(SwdError::invalid(format!(
            "slope fit needs positive values, got ({x}, {y})"
        )));
    }
    let k = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(SwdError::invalid(
            "slope fit needs at least two distinct x values",
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        stderr: (ssr / (k - 2.0) / sxx).sqrt(),
    })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    N,
    Sigma,
}

/// Which summary of the repetitions the `means` column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Center {
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMetadata {
    pub experiment: String,
    pub spec: Option<DistributionSpec>,
    /// Smoothing level held fixed along an n axis.
    pub sigma: Option<f64>,
    /// Sample size held fixed along a sigma axis.
    pub n: Option<usize>,
    pub reference_size: Option<usize>,
    pub seed: Seed,
    pub estimator: Option<SmoothingConfig>,
}

impl RateMetadata {
    pub fn new(experiment: &str, seed: &Seed) -> Self {
        RateMetadata {
            experiment: experiment.to_string(),
            spec: None,
            sigma: None,
            n: None,
            reference_size: None,
            seed: seed.clone(),
            estimator: None,
        }
    }
}

/// Per-grid-point summaries of a measured quantity plus the fitted
/// log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub center: Center,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub reps: usize,
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Why no slope was fitted, when `slope` is absent.
    pub slope_note: Option<String>,
    pub metadata: RateMetadata,
}

impl RateReport {
    /// Summarizes `values[i]` (the repetitions at `grid[i]`) and fits the slope.
    pub fn from_values(
        axis: Axis,
        grid: Vec<f64>,
        values: &[Vec<f64>],
        center: Center,
        metadata: RateMetadata,
    ) -> Result<Self> {
        if grid.len() != values.len() || grid.is_empty() {
            return Err(SwdError::invalid(
                "one value list per grid point is required",
            ));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SwdError::invalid("grid must be strictly increasing"));
        }
        let reps = values[0].len();
        if reps == 0 || values.iter().any(|v| v.len() != reps) {
            return Err(SwdError::invalid(
                "every grid point needs the same number of repetitions",
            ));
        }
        let (mut means, mut sds) = (Vec::new(), Vec::new());
        for v in values {
            let (m, s) = mean_sd(v);
            means.push(match center {
                Center::Mean => m,
                Center::Median => median(v),
            });
            sds.push(s);
        }
        let (slope, slope_stderr, slope_note) = if grid.len() < 3 {
            (
                None,
                None,
                Some("not applicable: fewer than 3 grid points".to_string()),
            )
        } else if means.iter().any(|&m| m <= SLOPE_FLOOR) {
            (
                None,
                None,
                Some("not applicable: zero values on the grid".to_string()),
            )
        } else {
            let pairs: Vec<(f64, f64)> = grid.iter().copied().zip(means.iter().copied()).collect();
            let fit = fit_loglog_slope(&pairs)?;
            (Some(fit.slope), Some(fit.stderr), None)
        };
        Ok(RateReport {
            axis,
            grid,
            center,
            means,
            sds,
            reps,
            slope,
            slope_stderr,
            slope_note,
            metadata,
        })
    }

    /// CSV text: header `axis_value,mean,sd,reps`, one grid point per row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("axis_value,mean,sd,reps\n");
        for i in 0..self.grid.len() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(self.grid[i]),
                fmt_f64(self.means[i]),
                fmt_f64(self.sds[i]),
                self.reps
            ));
        }
        s
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns both paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        write_text(&csv, &self.to_csv())?;
        write_json(&json, self)?;
        Ok((csv, json))
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| SwdError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

fn check_n_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.len() < 3 {
        return Err(SwdError::config("n_grid", "n_grid needs ≥ 3 points"));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SwdError::config(
            "n_grid",
            "n_grid must be positive and strictly increasing",
        ));
    }
    Ok(())
}

fn check_reps(reps: usize, min: usize) -> Result<()> {
    if reps < min {
        return Err(SwdError::config(
            "reps",
            format!("reps must be at least {min}"),
        ));
    }
    Ok(())
}

/// Reference size actually used: the request, or the default
/// `max(8192, 4 * max_n)` when absent. A request below `4 * max_n` is an error.
pub fn reference_size_for(requested: Option<usize>, max_n: usize) -> Result<usize> {
    match requested {
        Some(r) if r < 4 * max_n => Err(SwdError::config(
            "reference_size",
            format!("reference_size must be at least 4·max(n) = {}", 4 * max_n),
        )),
        Some(r) => Ok(r),
        None => Ok(DEFAULT_REFERENCE_SIZE.max(4 * max_n)),
    }
}

/// `W(P_n, P_ref)` with data, reference and noise all derived from `seed`.
fn estimate_against_reference(
    spec: &DistributionSpec,
    n: usize,
    reference_size: usize,
    sigma: f64,
    seed: &Seed,
    cfg: &SmoothingConfig,
) -> Result<f64> {
    let x = sample(spec, n, &seed.child("sample"))?;
    let reference = sample(spec, reference_size, &seed.child("reference"))?;
    let cfg = cfg.with_sigma(sigma).with_seed(seed.child("noise"));
    Ok(swd_estimate(&x, &reference, &cfg)?.value)
}

/// Seed of repetition `r` at sample size `n` along an n axis.
fn n_rep_seed(seed: &Seed, n: usize, r: usize) -> Seed {
    seed.child(&format!("n{n}")).index(r)
}

/// Runs `f(grid_index, rep)` over the whole grid in parallel and returns
/// the values grouped by grid index.
fn grid_values<F>(points: usize, reps: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let flat = (0..points * reps)
        .into_par_iter()
        .map(|t| f(t / reps, t % reps))
        .collect::<Result<Vec<f64>>>()?;
    Ok(flat.chunks(reps).map(|c| c.to_vec()).collect())
}

/// Parameters shared by the n-axis experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSettings {
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub reference_size: Option<usize>,
    pub seed: Seed,
}

/// Mean of `W(P_n, P_ref)` over `reps` fresh samples per n, where `P_ref`
/// is a fresh reference sample each time; slope against n.
pub fn one_sample_rate_experiment(
    spec: &DistributionSpec,
    sigma: f64,
    settings: &RateSettings,
    cfg: &SmoothingConfig,
) -> Result<RateReport> {
    spec.validate()?;
    check_n_grid(&settings.n_grid)?;
    check_reps(settings.reps, 2)?;
    cfg.with_sigma(sigma).validate()?;
    let max_n = *settings.n_grid.last().expect("grid checked nonempty");
    let reference_size = reference_size_for(settings.reference_size, max_n)?;
    let values = grid_values(settings.n_grid.len(), settings.reps, |g, r| {
        let n = settings.n_grid[g];
        estimate_against_reference(
            spec,
            n,
            reference_size,
            sigma,
            &n_rep_seed(&settings.seed, n, r),
            cfg,
        )
    })?;
    let mut meta = RateMetadata::new("one-sample-rate", &settings.seed);
    meta.spec = Some(spec.clone());
    meta.sigma = Some(sigma);
    meta.reference_size = Some(reference_size);
    meta.estimator = Some(cfg.with_sigma(sigma));
    RateReport::from_values(
        Axis::N,
        settings.n_grid.iter().map(|&n| n as f64).collect(),
        &values,
        Center::Mean,
        meta,
    )
}

/// Mean of `W^sigma(P_n, P_ref)` across a sigma grid at fixed n; slope
/// against sigma. Each repetition reuses its data, reference and noise
/// across all sigma values.
pub fn sigma_prefactor_experiment(
    spec: &DistributionSpec,
    n: usize,
    sigma_grid: &[f64],
    reps: usize,
    reference_size: Option<usize>,
    seed: &Seed,
    cfg: &SmoothingConfig,
) -> Result<RateReport> {
    spec.validate()?;
    if sigma_grid.len() < 3 {
        return Err(SwdError::config("sigma_grid", "need ≥ 3 grid points"));
    }
    if let Some(s) = sigma_grid.iter().find(|&&s| !(s > 0.0 && s <= 1.0)) {
        return Err(SwdError::config(
            "sigma_grid",
            format!("sigma values must lie in (0, 1], got {s}"),
        ));
    }
    let mut grid = sigma_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    if grid.windows(2).any(|w| w[0] == w[1]) {
        return Err(SwdError::config(
            "sigma_grid",
            "sigma values must be distinct",
        ));
    }
    if n == 0 {
        return Err(SwdError::config("n", "n must be positive"));
    }
    check_reps(reps, 2)?;
    cfg.validate()?;
    let reference_size = reference_size_for(reference_size, n)?;
    let values = grid_values(grid.len(), reps, |g, r| {
        estimate_against_reference(
            spec,
            n,
            reference_size,
            grid[g],
            &seed.child("rep").index(r),
            cfg,
        )
    })?;
    let mut meta = RateMetadata::new("sigma-prefactor", seed);
    meta.spec = Some(spec.clone());
    meta.n = Some(n);
    meta.reference_size = Some(reference_size);
    meta.estimator = Some(cfg.clone());
    RateReport::from_values(Axis::Sigma, grid, &values, Center::Mean, meta)
}

/// Data on an `s`-dimensional affine subspace of `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicDimReports {
    /// `sigma = 0`: the classic W1 rate.
    pub classic: RateReport,
    pub smooth: RateReport,
}

/// Classic and smoothed rates on the same affinely embedded Gaussian data
/// (intrinsic dimension `s`, ambient dimension `d`, frame drawn from
/// `frame_seed`).
pub fn intrinsic_dim_experiment(
    s: usize,
    d: usize,
    frame_seed: u64,
    sigma: f64,
    settings: &RateSettings,
    cfg: &SmoothingConfig,
) -> Result<IntrinsicDimReports> {
    if s <= 2 {
        return Err(SwdError::config(
            "s",
            format!("intrinsic dimension must exceed 2, got {s}"),
        ));
    }
    if s > d {
        return Err(SwdError::config(
            "s",
            format!("intrinsic dimension {s} exceeds ambient dimension {d}"),
        ));
    }
    if !(sigma > 0.0) {
        return Err(SwdError::config(
            "sigma",
            "the smoothed run needs sigma > 0",
        ));
    }
    let spec = DistributionSpec::embedded_gaussian(s, d, frame_seed);
    let mut classic = one_sample_rate_experiment(&spec, 0.0, settings, cfg)?;
    let mut smooth = one_sample_rate_experiment(&spec, sigma, settings, cfg)?;
    classic.metadata.experiment = "intrinsic-dim-classic".to_string();
    smooth.metadata.experiment = "intrinsic-dim-smooth".to_string();
    Ok(IntrinsicDimReports { classic, smooth })
}

/// How `sigma_n` shrinks with n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Const {
        sigma: f64,
    },
    /// `scale / ln n`.
    InverseLog {
        #[serde(default = "unit")]
        scale: f64,
    },
    /// `scale * n^(-p)`.
    Power {
        p: f64,
        #[serde(default = "unit")]
        scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl Schedule {
    pub fn sigma_at(&self, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            Schedule::Const { sigma } => sigma,
            Schedule::InverseLog { scale } => scale / n.ln(),
            Schedule::Power { p, scale } => scale * n.powf(-p),
        }
    }
}

/// Largest admissible power-schedule exponent, `(1 - b) / (8ab)` with
/// `a = alpha - 1` and `b = d / (2 alpha)`. Needs `d >= 2` and `alpha > d/2`.
pub fn guard_threshold(d: usize, alpha: f64) -> Result<f64> {
    if d < 2 {
        return Err(SwdError::config("d", "the schedule guard needs d ≥ 2"));
    }
    if !(alpha > d as f64 / 2.0 && alpha.is_finite()) {
        return Err(SwdError::config(
            "alpha",
            format!("alpha must exceed d/2 = {}, got {alpha}", d as f64 / 2.0),
        ));
    }
    let a = alpha - 1.0;
    let b = d as f64 / (2.0 * alpha);
    Ok((1.0 - b) / (8.0 * a * b))
}

/// Accepts or rejects a schedule. Power schedules need the smoothness
/// `alpha` and must satisfy `p < (1 - b) / (8ab)`; the threshold is
/// returned when it was computed.
pub fn check_schedule(schedule: &Schedule, d: usize, alpha: Option<f64>) -> Result<Option<f64>> {
    match *schedule {
        Schedule::Const { sigma } => {
            if !(sigma > 0.0 && sigma <= 1.0) {
                return Err(SwdError::config(
                    "schedule.sigma",
                    "sigma must lie in (0, 1]",
                ));
            }
            alpha.map(|a| guard_threshold(d, a)).transpose()
        }
        Schedule::InverseLog { scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(SwdError::config("schedule.scale", "scale must be positive"));
            }
            alpha.map(|a| guard_threshold(d, a)).transpose()
        }
        Schedule::Power { p, scale } => {
            if !(scale > 0.0 && scale <= 1.0) {
                return Err(SwdError::config(
                    "schedule.scale",
                    "scale must lie in (0, 1]",
                ));
            }
            if !(p > 0.0 && p.is_finite()) {
                return Err(SwdError::config("schedule.p", "p must be positive"));
            }
            let alpha = alpha.ok_or_else(|| {
                SwdError::config(
                    "alpha",
                    "power schedules need the smoothness alpha for the guard",
                )
            })?;
            let threshold = guard_threshold(d, alpha)?;
            if p >= threshold {
                return Err(SwdError::config(
                    "schedule.p",
                    format!("p = {p} violates p < (1-b)/(8ab) = {threshold}"),
                ));
            }
            Ok(Some(threshold))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichPoint {
    pub n: usize,
    pub sigma: f64,
    pub classic_mean: f64,
    pub smooth_mean: f64,
    /// `2 sigma sqrt(d)`.
    pub slack: f64,
    /// Standard error of the paired difference `classic - smooth`.
    pub stderr: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub schedule: Schedule,
    pub threshold: Option<f64>,
    pub sigmas: Vec<f64>,
    pub smooth: RateReport,
    pub classic: RateReport,
    pub sandwich: Vec<SandwichPoint>,
}

/// Smoothed rate with `sigma = sigma_n` along the grid, plus the check
/// `W(P_n, P_ref) <= W^sigma_n(P_n, P_ref) + 2 sigma_n sqrt(d) + 3 stderr`
/// on the same data at every n.
pub fn vanishing_sigma_schedule(
    spec: &DistributionSpec,
    schedule: &Schedule,
    alpha: Option<f64>,
    settings: &RateSettings,
    cfg: &SmoothingConfig,
) -> Result<VanishingReport> {
    spec.validate()?;
    check_n_grid(&settings.n_grid)?;
    check_reps(settings.reps, 2)?;
    let d = spec.dim();
    let threshold = check_schedule(schedule, d, alpha)?;
    let sigmas: Vec<f64> = settings
        .n_grid
        .iter()
        .map(|&n| schedule.sigma_at(n))
        .collect();
    if let Some((&n, &s)) = settings
        .n_grid
        .iter()
        .zip(&sigmas)
        .find(|(_, &s)| !(s > 0.0 && s <= 1.0))
    {
        return Err(SwdError::config(
            "schedule",
            format!("sigma_n = {s} at n = {n} leaves (0, 1]"),
        ));
    }
    let max_n = *settings.n_grid.last().expect("grid checked nonempty");
    let reference_size = reference_size_for(settings.reference_size, max_n)?;
    let pairs = (0..settings.n_grid.len() * settings.reps)
        .into_par_iter()
        .map(|t| {
            let (g, r) = (t / settings.reps, t % settings.reps);
            let n = settings.n_grid[g];
            let seed = n_rep_seed(&settings.seed, n, r);
            let classic = estimate_against_reference(spec, n, reference_size, 0.0, &seed, cfg)?;
            let smooth =
                estimate_against_reference(spec, n, reference_size, sigmas[g], &seed, cfg)?;
            Ok((classic, smooth))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let by_grid: Vec<&[(f64, f64)]> = pairs.chunks(settings.reps).collect();
    let classic_values: Vec<Vec<f64>> = by_grid
        .iter()
        .map(|c| c.iter().map(|p| p.0).collect())
        .collect();
    let smooth_values: Vec<Vec<f64>> = by_grid
        .iter()
        .map(|c| c.iter().map(|p| p.1).collect())
        .collect();
    let sandwich = by_grid
        .iter()
        .enumerate()
        .map(|(g, c)| {
            let diffs: Vec<f64> = c.iter().map(|p| p.0 - p.1).collect();
            let (_, sd) = mean_sd(&diffs);
            let stderr = sd / (c.len() as f64).sqrt();
            let classic_mean = mean_sd(&classic_values[g]).0;
            let smooth_mean = mean_sd(&smooth_values[g]).0;
            let slack = 2.0 * sigmas[g] * (d as f64).sqrt();
            SandwichPoint {
                n: settings.n_grid[g],
                sigma: sigmas[g],
                classic_mean,
                smooth_mean,
                slack,
                stderr,
                holds: classic_mean <= smooth_mean + slack + 3.0 * stderr,
            }
        })
        .collect();
    let grid: Vec<f64> = settings.n_grid.iter().map(|&n| n as f64).collect();
    let mut meta = RateMetadata::new("vanishing-sigma", &settings.seed);
    meta.spec = Some(spec.clone());
    meta.reference_size = Some(reference_size);
    meta.estimator = Some(cfg.clone());
    let smooth = RateReport::from_values(
        Axis::N,
        grid.clone(),
        &smooth_values,
        Center::Mean,
        meta.clone(),
    )?;
    meta.experiment = "vanishing-sigma-classic".to_string();
    meta.sigma = Some(0.0);
    let classic = RateReport::from_values(Axis::N, grid, &classic_values, Center::Mean, meta)?;
    Ok(VanishingReport {
        schedule: *schedule,
        threshold,
        sigmas,
        smooth,
        classic,
        sandwich,
    })
}

/// `t` at which `exp(-2 n t^2 / diam^2)` equals `level`.
pub fn tail_t(level: f64, n: usize, diameter: f64) -> f64 {
    diameter * ((1.0 / level).ln() / (2.0 * n as f64)).sqrt()
}

/// `exp(-2 n t^2 / diam^2)`.
pub fn tail_curve(t: f64, n: usize, diameter: f64) -> f64 {
    (-2.0 * n as f64 * t * t / (diameter * diameter)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSettings {
    pub spec: DistributionSpec,
    pub n: usize,
    pub sigma: f64,
    pub eta: f64,
    pub t_grid: Vec<f64>,
    /// Trials per pass; the experiment runs two passes.
    pub trials: usize,
    /// Size of the fixed sample standing in for `P`.
    pub reference_size: usize,
    pub seed: Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub sigma: f64,
    pub eta: f64,
    pub diameter: f64,
    pub trials: usize,
    /// Mean statistic from the first pass.
    pub mean_estimate: f64,
    pub t_grid: Vec<f64>,
    /// Frequency of `W > (1 + eta) mean + t` in the second pass.
    pub exceedance: Vec<f64>,
    /// `exp(-2 n t^2 / diam^2)` at each `t`.
    pub reference_curve: Vec<f64>,
    pub settings: ConcentrationSettings,
    pub estimator: SmoothingConfig,
}

impl ConcentrationReport {
    /// CSV text: header `t,exceedance,reference`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,exceedance,reference\n");
        for i in 0..self.t_grid.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(self.t_grid[i]),
                fmt_f64(self.exceedance[i]),
                fmt_f64(self.reference_curve[i])
            ));
        }
        s
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{stem}.csv"));
        let json = dir.join(format!("{stem}.json"));
        write_text(&csv, &self.to_csv())?;
        write_json(&json, self)?;
        Ok((csv, json))
    }
}

/// Tail frequencies of `W(P_n, P)` for a compactly supported `P`, with `P`
/// represented by one fixed reference sample. The mean is estimated on a
/// first pass of trials and the exceedances are counted on a second,
/// independent pass.
pub fn concentration_experiment(
    settings: &ConcentrationSettings,
    cfg: &SmoothingConfig,
) -> Result<ConcentrationReport> {
    let st = settings;
    st.spec.validate()?;
    let diameter = match &st.spec {
        DistributionSpec::UniformCube { .. } | DistributionSpec::PointMass { .. } => st
            .spec
            .diameter()
            .expect("bounded families have a diameter"),
        _ => {
            return Err(SwdError::config(
                "spec",
                "concentration needs a bounded spec (uniform-cube or point-mass)",
            ))
        }
    };
    if st.trials < 100 {
        return Err(SwdError::config("trials", "trials must be at least 100"));
    }
    if st.n == 0 {
        return Err(SwdError::config("n", "n must be positive"));
    }
    if !(st.eta >= 0.0 && st.eta.is_finite()) {
        return Err(SwdError::config("eta", "eta must be ≥ 0"));
    }
    if st.t_grid.is_empty() || st.t_grid[0] < 0.0 || st.t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SwdError::config(
            "t_grid",
            "t_grid must be nonempty, nonnegative and strictly increasing",
        ));
    }
    if st.reference_size == 0 {
        return Err(SwdError::config(
            "reference_size",
            "reference_size must be positive",
        ));
    }
    let cfg = cfg.with_sigma(st.sigma);
    cfg.validate()?;
    let reference = sample(&st.spec, st.reference_size, &st.seed.child("reference"))?;
    let pass = |label: &str| -> Result<Vec<f64>> {
        let base = st.seed.child(label);
        (0..st.trials)
            .into_par_iter()
            .map(|t| {
                let s = base.index(t);
                let x = sample(&st.spec, st.n, &s.child("sample"))?;
                Ok(swd_estimate(&x, &reference, &cfg.with_seed(s.child("noise")))?.value)
            })
            .collect()
    };
    let first = pass("first")?;
    let second = pass("second")?;
    let mean_estimate = mean_sd(&first).0;
    let exceedance = st
        .t_grid
        .iter()
        .map(|&t| {
            let level = (1.0 + st.eta) * mean_estimate + t;
            second.iter().filter(|&&w| w > level).count() as f64 / st.trials as f64
        })
        .collect();
    Ok(ConcentrationReport {
        n: st.n,
        sigma: st.sigma,
        eta: st.eta,
        diameter,
        trials: st.trials,
        mean_estimate,
        t_grid: st.t_grid.clone(),
        exceedance,
        reference_curve: st
            .t_grid
            .iter()
            .map(|&t| tail_curve(t, st.n, diameter))
            .collect(),
        settings: st.clone(),
        estimator: cfg,
    })
}

#[cfg(test)]
mod tests;
