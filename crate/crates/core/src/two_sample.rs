//! Bootstrap-calibrated two-sample homogeneity test on the smoothed distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{quantile, two_sample_pooled_bootstrap, BootstrapDistribution};
use crate::error::{Result, SwdError};
use crate::measures::{sample, DistributionSpec, PointCloud};
use crate::rng::Seed;
use crate::smooth::{swd_estimate, SmoothingConfig, SwdEstimate};

/// Outcome of one test; this is also its JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub sigma: f64,
    pub n: usize,
    pub m: usize,
    pub seed: Seed,
}

/// A test result together with the pieces it was computed from.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub result: TestResult,
    pub estimate: SwdEstimate,
    pub bootstrap: BootstrapDistribution,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SwdError::config(
            "alpha",
            format!("alpha must lie in (0, 1), got {alpha}"),
        ));
    }
    Ok(())
}

/// Tests `P = Q` from samples `x ~ P` (size n) and `y ~ Q` (size m).
///
/// The statistic is `sqrt(nm/N) W(x, y)`; it is compared with the
/// `1 - alpha` quantile of the pooled bootstrap. The statistic and the
/// bootstrap use the streams `seed/statistic` and `seed/bootstrap`.
pub fn swd_test_detailed(
    x: &PointCloud,
    y: &PointCloud,
    sigma: f64,
    alpha: f64,
    b: usize,
    seed: &Seed,
    cfg: &SmoothingConfig,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    if x.dim() != y.dim() {
        return Err(SwdError::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let cfg = cfg.with_sigma(sigma);
    cfg.validate()?;
    let (n, m) = (x.len(), y.len());
    let scale = ((n * m) as f64 / (n + m) as f64).sqrt();
    let estimate = swd_estimate(x, y, &cfg.with_seed(seed.child("statistic")))?;
    let statistic = scale * estimate.value;
    let bootstrap = two_sample_pooled_bootstrap(x, y, sigma, b, &seed.child("bootstrap"), &cfg)?;
    let critical_value = quantile(&bootstrap, 1.0 - alpha)?.value;
    let exceed = bootstrap.values.iter().filter(|&&v| v >= statistic).count();
    let result = TestResult {
        statistic,
        critical_value,
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        reject: statistic > critical_value,
        alpha,
        b,
        sigma,
        n,
        m,
        seed: seed.clone(),
    };
    Ok(TestOutcome {
        result,
        estimate,
        bootstrap,
    })
}

pub fn swd_test(
    x: &PointCloud,
    y: &PointCloud,
    sigma: f64,
    alpha: f64,
    b: usize,
    seed: &Seed,
    cfg: &SmoothingConfig,
) -> Result<TestResult> {
    Ok(swd_test_detailed(x, y, sigma, alpha, b, seed, cfg)?.result)
}

/// Rejection frequency of repeated tests under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub scenario: String,
    pub trials: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Binomial standard error `sqrt(r (1 - r) / trials)`.
    pub stderr: f64,
}

/// Parameters of a level/power simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerScenario {
    pub null_spec: DistributionSpec,
    pub alt_spec: DistributionSpec,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub trials: usize,
    pub seed: Seed,
}

fn rejection_report(
    label: &str,
    x_spec: &DistributionSpec,
    y_spec: &DistributionSpec,
    sc: &PowerScenario,
    cfg: &SmoothingConfig,
) -> Result<PowerReport> {
    let base = sc.seed.child(label);
    let decisions = (0..sc.trials)
        .into_par_iter()
        .map(|t| {
            let s = base.index(t);
            let x = sample(x_spec, sc.n, &s.child("x"))?;
            let y = sample(y_spec, sc.m, &s.child("y"))?;
            Ok(swd_test(&x, &y, sc.sigma, sc.alpha, sc.b, &s.child("test"), cfg)?.reject)
        })
        .collect::<Result<Vec<bool>>>()?;
    let rejections = decisions.iter().filter(|&&r| r).count();
    let rate = rejections as f64 / sc.trials as f64;
    Ok(PowerReport {
        scenario: label.to_string(),
        trials: sc.trials,
        rejections,
        rejection_rate: rate,
        stderr: (rate * (1.0 - rate) / sc.trials as f64).sqrt(),
    })
}

/// Runs `trials` tests with both samples from `null_spec` and `trials`
/// tests with `y` drawn from `alt_spec` instead. Returns (null, alternative).
pub fn level_power_experiment(
    sc: &PowerScenario,
    cfg: &SmoothingConfig,
) -> Result<(PowerReport, PowerReport)> {
    if sc.trials == 0 {
        return Err(SwdError::config("trials", "need at least one trial"));
    }
    check_alpha(sc.alpha)?;
    sc.null_spec.validate()?;
    sc.alt_spec.validate()?;
    if sc.null_spec.dim() != sc.alt_spec.dim() {
        return Err(SwdError::DimensionMismatch {
            expected: sc.null_spec.dim(),
            found: sc.alt_spec.dim(),
        });
    }
    let null = rejection_report("null", &sc.null_spec, &sc.null_spec, sc, cfg)?;
    let alt = rejection_report("alternative", &sc.null_spec, &sc.alt_spec, sc, cfg)?;
    Ok((null, alt))
}
