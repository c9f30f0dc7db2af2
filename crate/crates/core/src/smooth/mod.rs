//! Estimators of the smoothed distance `W1(P * N_sigma, Q * N_sigma)`.
//!
//! Methods:
//!
//! * `mc-exact`, `mc-flow`, `mc-sinkhorn`: Monte-Carlo convolution. Every
//!   point is replicated `k` times with independent `N(0, sigma^2 I)` noise
//!   and the discrete W1 between the two noisy clouds is solved by
//!   assignment, network simplex or Sinkhorn respectively.
//! * `mc-shared`: both smoothed laws weighted on one support drawn from
//!   their mixture (see [`shared`]). Its Monte-Carlo error scales with the
//!   distance being estimated, which the noisy-cloud methods cannot offer in
//!   `d >= 2`: there the W1 between two finite noisy clouds is dominated by
//!   their own `(nk)^(-1/d)` sampling error.
//! * `quadrature-1d`: deterministic integral of `|F_a - F_b|` for `d = 1`.
//!
//! `sigma = 0` is legal for every method and yields the plain empirical W1.

mod quadrature;
mod shared;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use quadrature::{
    quadrature_between, std_normal_cdf, swd_quadrature_1d, QuadratureResult, SmoothedCdf,
    TRUNCATION_SIGMAS,
};

use crate::error::{Result, SwdError};
use crate::exact_ot::{
    self, empirical_pair, OtMethod, OtSolution, SinkhornParams, ASSIGNMENT_BUDGET, FLOW_BUDGET,
};
use crate::measures::{standard_normal_block, PointCloud};
use crate::rng::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingMethod {
    McExact,
    McFlow,
    McSinkhorn,
    McShared,
    #[serde(rename = "quadrature-1d")]
    Quadrature1d,
}

impl SmoothingMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SmoothingMethod::McExact => "mc-exact",
            SmoothingMethod::McFlow => "mc-flow",
            SmoothingMethod::McSinkhorn => "mc-sinkhorn",
            SmoothingMethod::McShared => "mc-shared",
            SmoothingMethod::Quadrature1d => "quadrature-1d",
        }
    }
}

impl std::str::FromStr for SmoothingMethod {
    type Err = SwdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc-exact" => Ok(SmoothingMethod::McExact),
            "mc-flow" => Ok(SmoothingMethod::McFlow),
            "mc-sinkhorn" => Ok(SmoothingMethod::McSinkhorn),
            "mc-shared" => Ok(SmoothingMethod::McShared),
            "quadrature-1d" => Ok(SmoothingMethod::Quadrature1d),
            other => Err(SwdError::config(
                "method",
                format!(
                    "unknown method {other:?} (expected mc-exact, mc-flow, mc-sinkhorn, mc-shared or quadrature-1d)"
                ),
            )),
        }
    }
}

impl std::fmt::Display for SmoothingMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a smoothed distance is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingConfig {
    pub sigma: f64,
    /// Noise replicas per data point (`mc-exact`, `mc-flow`, `mc-sinkhorn`).
    pub replicas: usize,
    pub method: SmoothingMethod,
    pub noise_seed: Seed,
    /// Sinkhorn epsilon; defaults to 1% of the median cost of the instance.
    pub sinkhorn_epsilon: Option<f64>,
    /// Independent noise redraws; the spread gives the standard error.
    pub repeats: usize,
    /// Use the same noise stream for both measures (common random numbers).
    pub shared_noise: bool,
    /// Support points for `mc-shared`.
    pub support_size: usize,
    /// Tolerance for `quadrature-1d`.
    pub quad_tol: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            sigma: 1.0,
            replicas: 1,
            method: SmoothingMethod::McExact,
            noise_seed: Seed::with_stream(0, "noise"),
            sinkhorn_epsilon: None,
            repeats: 8,
            shared_noise: false,
            support_size: 2048,
            quad_tol: 1e-8,
        }
    }
}

impl SmoothingConfig {
    pub fn new(sigma: f64, method: SmoothingMethod) -> Self {
        SmoothingConfig {
            sigma,
            method,
            ..Default::default()
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        SmoothingConfig {
            sigma,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: Seed) -> Self {
        SmoothingConfig {
            noise_seed: seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SwdError::config("sigma", "sigma must be ≥ 0"));
        }
        if self.replicas < 1 {
            return Err(SwdError::config(
                "replicas",
                "need at least one noise replica",
            ));
        }
        if self.repeats < 1 {
            return Err(SwdError::config("repeats", "need at least one repeat"));
        }
        if self.method == SmoothingMethod::McShared && self.support_size < 2 {
            return Err(SwdError::config(
                "support_size",
                "need at least two support points",
            ));
        }
        if !(self.quad_tol > 0.0) {
            return Err(SwdError::config("quad_tol", "tolerance must be positive"));
        }
        if let Some(eps) = self.sinkhorn_epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(SwdError::config(
                    "sinkhorn_epsilon",
                    "epsilon must be positive",
                ));
            }
        }
        Ok(())
    }
}

/// Solver diagnostics aggregated over repeats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    /// Discrete solver that produced the values (none for quadrature).
    pub solver: Option<OtMethod>,
    pub iterations: usize,
    pub max_gap: f64,
    pub converged: bool,
    /// Set when the requested solver was replaced because of a size limit.
    pub fallback: Option<String>,
    pub quadrature: Option<QuadratureResult>,
}

/// A smoothed-distance estimate with its Monte-Carlo standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwdEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: SmoothingMethod,
    pub sigma: f64,
    pub per_repeat_values: Vec<f64>,
    pub diagnostics: EstimateDiagnostics,
}

/// `n * k` points: point `i` repeated `k` times, each copy perturbed by
/// independent `N(0, sigma^2 I)` noise from `seed`.
pub fn smooth_cloud(cloud: &PointCloud, sigma: f64, k: usize, seed: &Seed) -> Result<PointCloud> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SwdError::invalid("sigma must be ≥ 0"));
    }
    if k == 0 {
        return Err(SwdError::invalid("need at least one noise replica"));
    }
    let dim = cloud.dim();
    let total = cloud.len() * k;
    let mut data = Vec::with_capacity(total * dim);
    if sigma == 0.0 {
        for p in cloud.points() {
            for _ in 0..k {
                data.extend_from_slice(p);
            }
        }
    } else {
        let noise = standard_normal_block(total, dim, seed);
        let mut z = noise.chunks_exact(dim);
        for p in cloud.points() {
            for _ in 0..k {
                let e = z.next().expect("noise block sized to the output");
                data.extend(p.iter().zip(e).map(|(x, ei)| x + sigma * ei));
            }
        }
    }
    Ok(PointCloud::from_parts_unchecked(data, dim))
}

fn median_cost(a: &PointCloud, b: &PointCloud) -> f64 {
    let mut c = exact_ot::cost_matrix(a, b);
    let mid = c.len() / 2;
    let (_, m, _) = c.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

fn sinkhorn_solve(a: &PointCloud, b: &PointCloud, epsilon: Option<f64>) -> Result<OtSolution> {
    let (ma, mb) = empirical_pair(a, b)?;
    let eps = epsilon.unwrap_or_else(|| (0.01 * median_cost(a, b)).max(1e-12));
    exact_ot::w1_sinkhorn(
        &ma,
        &mb,
        &SinkhornParams {
            epsilon: eps,
            ..Default::default()
        },
    )
}

/// Exact W1 between uniform measures on two clouds, choosing the solver by
/// method and size. Returns the solution and a fallback note, if any.
fn uniform_w1(
    a: &PointCloud,
    b: &PointCloud,
    method: SmoothingMethod,
    epsilon: Option<f64>,
) -> Result<(OtSolution, Option<String>)> {
    if method == SmoothingMethod::McSinkhorn {
        return Ok((sinkhorn_solve(a, b, epsilon)?, None));
    }
    if a.dim() == 1 {
        let (ma, mb) = empirical_pair(a, b)?;
        return Ok((exact_ot::w1_sorted_1d(&ma, &mb)?, None));
    }
    let equal = a.len() == b.len();
    if method == SmoothingMethod::McExact && equal && a.len() <= ASSIGNMENT_BUDGET {
        return Ok((exact_ot::w1_assignment(a, b)?, None));
    }
    if a.len() * b.len() <= FLOW_BUDGET {
        let (ma, mb) = empirical_pair(a, b)?;
        let note = (method == SmoothingMethod::McExact).then(|| {
            if equal {
                "assignment budget exceeded; used min-cost flow".to_string()
            } else {
                "unequal cloud sizes; used min-cost flow".to_string()
            }
        });
        return Ok((exact_ot::w1_mincost_flow(&ma, &mb)?, note));
    }
    Ok((
        sinkhorn_solve(a, b, epsilon)?,
        Some("exact solver budget exceeded; used sinkhorn".to_string()),
    ))
}

/// One Monte-Carlo repeat of a noisy-cloud or shared-support method.
fn one_repeat(
    a: &PointCloud,
    b: &PointCloud,
    cfg: &SmoothingConfig,
    r: usize,
) -> Result<(OtSolution, Option<String>)> {
    let seed = cfg.noise_seed.child("repeat").index(r);
    if cfg.method == SmoothingMethod::McShared {
        if cfg.sigma == 0.0 {
            return uniform_w1(a, b, SmoothingMethod::McExact, None);
        }
        return Ok((
            shared::shared_support_w1(a, b, cfg.sigma, cfg.support_size, &seed)?,
            None,
        ));
    }
    let seed_a = seed.child("a");
    let seed_b = if cfg.shared_noise {
        seed_a.clone()
    } else {
        seed.child("b")
    };
    let sa = smooth_cloud(a, cfg.sigma, cfg.replicas, &seed_a)?;
    let sb = smooth_cloud(b, cfg.sigma, cfg.replicas, &seed_b)?;
    uniform_w1(&sa, &sb, cfg.method, cfg.sinkhorn_epsilon)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimate of `W1(a * N_sigma, b * N_sigma)` for the uniform measures on
/// two clouds, following `cfg`.
pub fn swd_estimate(a: &PointCloud, b: &PointCloud, cfg: &SmoothingConfig) -> Result<SwdEstimate> {
    cfg.validate()?;
    if a.dim() != b.dim() {
        return Err(SwdError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if cfg.method == SmoothingMethod::Quadrature1d {
        if a.dim() != 1 {
            return Err(SwdError::invalid(format!(
                "quadrature-1d needs one-dimensional data, got d={}",
                a.dim()
            )));
        }
        if cfg.sigma == 0.0 {
            let (ma, mb) = empirical_pair(a, b)?;
            let sol = exact_ot::w1_sorted_1d(&ma, &mb)?;
            return Ok(SwdEstimate {
                value: sol.distance,
                stderr: 0.0,
                method: cfg.method,
                sigma: 0.0,
                per_repeat_values: vec![sol.distance],
                diagnostics: EstimateDiagnostics {
                    solver: Some(OtMethod::Sorted1d),
                    converged: true,
                    ..Default::default()
                },
            });
        }
        let q = swd_quadrature_1d(a, b, cfg.sigma, cfg.quad_tol)?;
        return Ok(SwdEstimate {
            value: q.value,
            stderr: 0.0,
            method: cfg.method,
            sigma: cfg.sigma,
            per_repeat_values: vec![q.value],
            diagnostics: EstimateDiagnostics {
                converged: q.error_estimate <= cfg.quad_tol * (1.0 + q.value),
                quadrature: Some(q),
                ..Default::default()
            },
        });
    }

    // reduction in repeat order keeps value and stderr deterministic
    let runs: Vec<(OtSolution, Option<String>)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| one_repeat(a, b, cfg, r))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = runs.iter().map(|(s, _)| s.distance).collect();
    let (value, stderr) = mean_and_stderr(&values);
    let diagnostics = EstimateDiagnostics {
        solver: runs.first().map(|(s, _)| s.method),
        iterations: runs.iter().map(|(s, _)| s.iterations).sum(),
        max_gap: runs.iter().map(|(s, _)| s.gap).fold(0.0, f64::max),
        converged: runs.iter().all(|(s, _)| s.converged),
        fallback: runs.iter().find_map(|(_, note)| note.clone()),
        quadrature: None,
    };
    Ok(SwdEstimate {
        value: value.max(0.0),
        stderr,
        method: cfg.method,
        sigma: cfg.sigma,
        per_repeat_values: values,
        diagnostics,
    })
}

/// Stability check between two smoothing levels on common data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityGap {
    /// `|W(sigma1) - W(sigma2)|`.
    pub gap: f64,
    /// `2 sqrt(d |sigma1^2 - sigma2^2|)`.
    pub bound: f64,
    /// Standard errors of the two estimates combined in quadrature.
    pub stderr: f64,
}

/// Compares the estimates at `sigma1` and `sigma2` (same data, same noise
/// seed, so the noise is shared across the two levels) with the bound
/// `2 sqrt(d |sigma1^2 - sigma2^2|)`.
pub fn stability_gap(
    a: &PointCloud,
    b: &PointCloud,
    sigma1: f64,
    sigma2: f64,
    cfg: &SmoothingConfig,
) -> Result<StabilityGap> {
    let e1 = swd_estimate(a, b, &cfg.with_sigma(sigma1))?;
    let e2 = swd_estimate(a, b, &cfg.with_sigma(sigma2))?;
    let d = a.dim() as f64;
    Ok(StabilityGap {
        gap: (e1.value - e2.value).abs(),
        bound: 2.0 * (d * (sigma1 * sigma1 - sigma2 * sigma2).abs()).sqrt(),
        stderr: (e1.stderr * e1.stderr + e2.stderr * e2.stderr).sqrt(),
    })
}

#[cfg(test)]
mod tests;
