//! Shared-support estimator of `W1(P * N_sigma, Q * N_sigma)`.
//!
//! Both smoothed laws are represented on one random support drawn from
//! their equal mixture `(p + q) / 2`: half the support points are smoothed
//! draws from `P`, half from `Q`. Each support point `s` is weighted by the
//! exact density ratios `p(s) / (p(s) + q(s))` and `q(s) / (p(s) + q(s))`,
//! and W1 between the two weightings is solved exactly. Because both
//! measures sit on the same points, the sampling noise of the support enters
//! only through the (small, smooth) density difference instead of through
//! two independent point clouds.

use rand::Rng;

use crate::error::Result;
use crate::exact_ot::{self, OtSolution};
use crate::measures::{standard_normal_block, PointCloud};
use crate::rng::Seed;

/// `log sum_i exp(-|s - x_i|^2 / (2 sigma^2))` for every support point `s`.
fn log_kernel_sums(support: &PointCloud, centers: &PointCloud, sigma: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let dim = support.dim();
    let mut exps = vec![0.0; centers.len()];
    support
        .points()
        .map(|s| {
            let mut max = f64::NEG_INFINITY;
            for (e, c) in exps.iter_mut().zip(centers.as_slice().chunks_exact(dim)) {
                let d2: f64 = s.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum();
                *e = -d2 * inv;
                max = max.max(*e);
            }
            let sum: f64 = exps.iter().map(|e| (e - max).exp()).sum();
            max + sum.ln()
        })
        .collect()
}

/// Draws `count` smoothed points from `cloud`: uniform picks plus `sigma` noise.
fn smoothed_draws(cloud: &PointCloud, count: usize, sigma: f64, seed: &Seed) -> Vec<f64> {
    let dim = cloud.dim();
    let mut rng = seed.child("pick").rng();
    let noise = standard_normal_block(count, dim, &seed.child("noise"));
    let mut out = Vec::with_capacity(count * dim);
    for z in noise.chunks_exact(dim) {
        let p = cloud.point(rng.random_range(0..cloud.len()));
        out.extend(p.iter().zip(z).map(|(x, e)| x + sigma * e));
    }
    out
}

/// One shared-support estimate with `support_size` points (split evenly).
pub(crate) fn shared_support_w1(
    a: &PointCloud,
    b: &PointCloud,
    sigma: f64,
    support_size: usize,
    seed: &Seed,
) -> Result<OtSolution> {
    let half = (support_size / 2).max(1);
    let mut data = smoothed_draws(a, half, sigma, &seed.child("a"));
    data.extend(smoothed_draws(b, half, sigma, &seed.child("b")));
    let support = PointCloud::from_parts_unchecked(data, a.dim());

    let la = log_kernel_sums(&support, a, sigma);
    let lb = log_kernel_sums(&support, b, sigma);
    let (ln_n, ln_m) = ((a.len() as f64).ln(), (b.len() as f64).ln());
    let mut wa = Vec::with_capacity(support.len());
    let mut wb = Vec::with_capacity(support.len());
    for (x, y) in la.iter().zip(&lb) {
        // log densities up to the shared Gaussian normalizer
        let (lp, lq) = (x - ln_n, y - ln_m);
        let ra = 1.0 / (1.0 + (lq - lp).exp());
        wa.push(ra);
        wb.push(1.0 - ra);
    }
    let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
    wa.iter_mut().for_each(|w| *w /= sa);
    wb.iter_mut().for_each(|w| *w /= sb);
    exact_ot::w1_shared_support(&support, &wa, &wb)
}
