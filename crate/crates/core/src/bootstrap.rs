//! Empirical bootstrap of the smoothed distance: the one-sample law of
//! `sqrt(n) W(P_n^B, P_n)` and the pooled two-sample law of
//! `sqrt(mn/N) W(P_m^B, Q_n^B)`.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwdError};
use crate::measures::PointCloud;
use crate::report::{fmt_f64, write_json};
use crate::rng::Seed;
use crate::smooth::{swd_estimate, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapKind {
    OneSample,
    TwoSamplePooled,
}

/// Sorted bootstrap replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub values: Vec<f64>,
    #[serde(rename = "B")]
    pub b: usize,
    pub kind: BootstrapKind,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub level: f64,
    pub value: f64,
}

/// Metadata written next to the replicate CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSidecar {
    #[serde(rename = "B")]
    pub b: usize,
    pub kind: BootstrapKind,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: Seed,
    pub quantiles: Vec<QuantileEstimate>,
    pub estimator: SmoothingConfig,
}

impl BootstrapDistribution {
    /// The `ceil(level * B)`-th order statistic.
    pub fn quantile(&self, level: f64) -> Result<QuantileEstimate> {
        quantile(self, level)
    }

    /// Empirical CDF of the replicates at `t`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.values.partition_point(|&v| v <= t) as f64 / self.b as f64
    }

    /// One replicate per row under a `value` header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |source| SwdError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "value").map_err(io)?;
        for v in &self.values {
            writeln!(out, "{}", fmt_f64(*v)).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn sidecar(&self, levels: &[f64], estimator: &SmoothingConfig) -> Result<BootstrapSidecar> {
        Ok(BootstrapSidecar {
            b: self.b,
            kind: self.kind,
            n: self.n,
            m: self.m,
            sigma: self.sigma,
            seed: self.seed.clone(),
            quantiles: levels
                .iter()
                .map(|&l| quantile(self, l))
                .collect::<Result<_>>()?,
            estimator: estimator.clone(),
        })
    }

    pub fn write_sidecar(
        &self,
        path: &Path,
        levels: &[f64],
        estimator: &SmoothingConfig,
    ) -> Result<()> {
        write_json(path, &self.sidecar(levels, estimator)?)
    }
}

/// `inf { t : F_B(t) >= level }`, i.e. the `ceil(level * B)`-th smallest replicate.
pub fn quantile(dist: &BootstrapDistribution, level: f64) -> Result<QuantileEstimate> {
    if !(level > 0.0 && level < 1.0) {
        return Err(SwdError::invalid(format!(
            "quantile level must lie in (0, 1), got {level}"
        )));
    }
    let b = dist.values.len();
    if b == 0 {
        return Err(SwdError::invalid("empty bootstrap distribution"));
    }
    // absorb representation error in products like 0.9 * 100
    let rank = ((level * b as f64) * (1.0 - 1e-12)).ceil() as usize;
    let rank = rank.clamp(1, b);
    Ok(QuantileEstimate {
        level,
        value: dist.values[rank - 1],
    })
}

fn resample(cloud: &PointCloud, count: usize, seed: &Seed) -> PointCloud {
    let mut rng = seed.rng();
    let idx: Vec<usize> = (0..count)
        .map(|_| rng.random_range(0..cloud.len()))
        .collect();
    cloud.select(&idx)
}

fn check_b(b: usize) -> Result<()> {
    if b == 0 {
        return Err(SwdError::config(
            "B",
            "need at least one bootstrap replicate",
        ));
    }
    Ok(())
}

fn finish(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values
}

/// `B` replicates of `sqrt(n) W(P_n^B, P_n)`. Replicate `r` resamples with
/// substream `resample/r` and smooths with noise substream `noise/r`.
pub fn one_sample_bootstrap(
    data: &PointCloud,
    sigma: f64,
    b: usize,
    seed: &Seed,
    cfg: &SmoothingConfig,
) -> Result<BootstrapDistribution> {
    check_b(b)?;
    let cfg = cfg.with_sigma(sigma);
    cfg.validate()?;
    let n = data.len();
    let scale = (n as f64).sqrt();
    let values = (0..b)
        .into_par_iter()
        .map(|r| {
            let boot = resample(data, n, &seed.child("resample").index(r));
            let est = swd_estimate(&boot, data, &cfg.with_seed(seed.child("noise").index(r)))?;
            Ok(scale * est.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BootstrapDistribution {
        values: finish(values),
        b,
        kind: BootstrapKind::OneSample,
        n,
        m: n,
        sigma,
        seed: seed.clone(),
    })
}

/// Pooled cloud in lexicographic point order, so that it does not depend on
/// which sample came first.
pub fn pooled_cloud(x: &PointCloud, y: &PointCloud) -> Result<PointCloud> {
    let joined = x.concat(y)?;
    let mut order: Vec<usize> = (0..joined.len()).collect();
    order.sort_by(|&i, &j| {
        joined
            .point(i)
            .iter()
            .zip(joined.point(j))
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(joined.select(&order))
}

/// `B` replicates of `sqrt(nm/N) W(P^B, Q^B)` where both bootstrap samples
/// are drawn with replacement from the pooled cloud of size `N = n + m`:
/// the first `n = |x|` draws form `P^B`, the remaining `m = |y|` form `Q^B`.
pub fn two_sample_pooled_bootstrap(
    x: &PointCloud,
    y: &PointCloud,
    sigma: f64,
    b: usize,
    seed: &Seed,
    cfg: &SmoothingConfig,
) -> Result<BootstrapDistribution> {
    check_b(b)?;
    if x.dim() != y.dim() {
        return Err(SwdError::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let cfg = cfg.with_sigma(sigma);
    cfg.validate()?;
    let (nx, ny) = (x.len(), y.len());
    let total = nx + ny;
    let scale = ((nx * ny) as f64 / total as f64).sqrt();
    let pooled = pooled_cloud(x, y)?;
    let values = (0..b)
        .into_par_iter()
        .map(|r| {
            let z = resample(&pooled, total, &seed.child("resample").index(r));
            let first: Vec<usize> = (0..nx).collect();
            let rest: Vec<usize> = (nx..total).collect();
            let est = swd_estimate(
                &z.select(&first),
                &z.select(&rest),
                &cfg.with_seed(seed.child("noise").index(r)),
            )?;
            Ok(scale * est.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BootstrapDistribution {
        values: finish(values),
        b,
        kind: BootstrapKind::TwoSamplePooled,
        n: nx,
        m: ny,
        sigma,
        seed: seed.clone(),
    })
}

/// Kolmogorov distance `sup_t |F(t) - G(t)|` between two samples.
pub fn kolmogorov_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let t = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= t {
            i += 1;
        }
        while j < sb.len() && sb[j] <= t {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample, DistributionSpec};
    use crate::smooth::SmoothingMethod;

    fn dist(values: Vec<f64>) -> BootstrapDistribution {
        BootstrapDistribution {
            b: values.len(),
            values,
            kind: BootstrapKind::OneSample,
            n: 1,
            m: 1,
            sigma: 1.0,
            seed: Seed::new(0),
        }
    }

    #[test]
    fn quantile_ceiling_rule() {
        let d = dist((1..=100).map(f64::from).collect());
        assert_eq!(quantile(&d, 0.9).unwrap().value, 90.0);
        assert_eq!(quantile(&d, 0.901).unwrap().value, 91.0);
        assert_eq!(quantile(&d, 0.001).unwrap().value, 1.0);
        assert!(quantile(&d, 0.0).is_err());
        assert!(quantile(&d, 1.0).is_err());
        let one = dist(vec![4.5]);
        for level in [0.01, 0.5, 0.99] {
            assert_eq!(quantile(&one, level).unwrap().value, 4.5);
        }
    }

    #[test]
    fn point_mass_data_give_zero_replicates() {
        let data = PointCloud::repeated(&[1.0, -2.0], 20).unwrap();
        for method in [SmoothingMethod::McShared, SmoothingMethod::McExact] {
            let cfg = SmoothingConfig {
                repeats: 1,
                shared_noise: true,
                support_size: 64,
                ..SmoothingConfig::new(1.0, method)
            };
            let d = one_sample_bootstrap(&data, 1.0, 10, &Seed::new(3), &cfg).unwrap();
            assert!(d.values.iter().all(|&v| v.abs() < 1e-12), "{method}");
            let p =
                two_sample_pooled_bootstrap(&data, &data, 1.0, 10, &Seed::new(3), &cfg).unwrap();
            assert!(p.values.iter().all(|&v| v.abs() < 1e-12), "{method}");
        }
    }

    #[test]
    fn pooled_bootstrap_is_symmetric_for_equal_sizes() {
        let x = sample(&DistributionSpec::standard_gaussian(2), 30, &Seed::new(1)).unwrap();
        let y = sample(&DistributionSpec::standard_gaussian(2), 30, &Seed::new(2)).unwrap();
        let cfg = SmoothingConfig {
            repeats: 1,
            ..SmoothingConfig::new(1.0, SmoothingMethod::McExact)
        };
        let d1 = two_sample_pooled_bootstrap(&x, &y, 1.0, 20, &Seed::new(9), &cfg).unwrap();
        let d2 = two_sample_pooled_bootstrap(&y, &x, 1.0, 20, &Seed::new(9), &cfg).unwrap();
        assert_eq!(d1.values, d2.values);
    }

    #[test]
    fn replicates_sorted_nonnegative_and_deterministic() {
        let x = sample(&DistributionSpec::standard_gaussian(1), 50, &Seed::new(1)).unwrap();
        let cfg = SmoothingConfig::new(0.5, SmoothingMethod::Quadrature1d);
        let d1 = one_sample_bootstrap(&x, 0.5, 40, &Seed::new(4), &cfg).unwrap();
        let d2 = one_sample_bootstrap(&x, 0.5, 40, &Seed::new(4), &cfg).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.values.len(), 40);
        assert!(d1.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(d1.values[0] >= 0.0);
    }

    #[test]
    fn kolmogorov_distance_basics() {
        assert_eq!(kolmogorov_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(kolmogorov_distance(&[0.0, 1.0], &[5.0, 6.0]), 1.0);
        assert!((kolmogorov_distance(&[0.0, 2.0], &[1.0, 3.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_has_one_row_per_replicate() {
        let d = dist(vec![0.5, 1.5, 2.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("boot.csv");
        d.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "value");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2].parse::<f64>().unwrap(), 1.5);
    }
}
