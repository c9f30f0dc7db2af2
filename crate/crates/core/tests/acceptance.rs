//! Acceptance suite: each test runs one criterion at the sizes and
//! tolerances in `acceptance.toml` and prints a single PASS/FAIL line.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use swd_core::bootstrap::{kolmogorov_distance, one_sample_bootstrap};
use swd_core::exact_ot::{
    empirical_pair, w1_assignment, w1_bruteforce, w1_mincost_flow, w1_sorted_1d,
};
use swd_core::experiments::{
    check_schedule, concentration_experiment, guard_threshold, intrinsic_dim_experiment,
    one_sample_rate_experiment, sigma_prefactor_experiment, tail_t, vanishing_sigma_schedule,
    ConcentrationSettings, RateSettings, Schedule,
};
use swd_core::measures::sample;
use swd_core::mswe::{
    fit_mswe, frozen_base, mswe_objective, mswe_rate_experiment, MsweOptions, MsweRateSettings,
    ParametricFamily,
};
use swd_core::smooth::{
    quadrature_between, stability_gap, swd_estimate, swd_quadrature_1d, SmoothedCdf,
    SmoothingConfig, SmoothingMethod,
};
use swd_core::two_sample::{level_power_experiment, PowerScenario};
use swd_core::{DiscreteMeasure, DistributionSpec, PointCloud, Seed};

fn section(name: &str) -> toml::Table {
    let text = include_str!("acceptance.toml");
    let all: toml::Table = toml::from_str(text).expect("acceptance.toml parses");
    all[name]
        .as_table()
        .unwrap_or_else(|| panic!("no [{name}]"))
        .clone()
}

trait Get {
    fn f(&self, k: &str) -> f64;
    fn u(&self, k: &str) -> usize;
    fn fs(&self, k: &str) -> Vec<f64>;
    fn us(&self, k: &str) -> Vec<usize>;
    fn range(&self, k: &str) -> (f64, f64) {
        let v = self.fs(k);
        (v[0], v[1])
    }
}

impl Get for toml::Table {
    fn f(&self, k: &str) -> f64 {
        match &self[k] {
            toml::Value::Float(x) => *x,
            toml::Value::Integer(i) => *i as f64,
            other => panic!("{k}: not a number: {other}"),
        }
    }
    fn u(&self, k: &str) -> usize {
        self[k]
            .as_integer()
            .unwrap_or_else(|| panic!("{k}: not an integer")) as usize
    }
    fn fs(&self, k: &str) -> Vec<f64> {
        let arr = self[k]
            .as_array()
            .unwrap_or_else(|| panic!("{k}: not an array"));
        arr.iter()
            .map(|v| v.as_float().or(v.as_integer().map(|i| i as f64)).unwrap())
            .collect()
    }
    fn us(&self, k: &str) -> Vec<usize> {
        let arr = self[k]
            .as_array()
            .unwrap_or_else(|| panic!("{k}: not an array"));
        arr.iter()
            .map(|v| v.as_integer().unwrap() as usize)
            .collect()
    }
}

/// Prints the verdict line straight to the process stderr so it shows even
/// when the harness captures test output.
fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!(
        "[acceptance] {} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn inside(x: Option<f64>, (lo, hi): (f64, f64)) -> bool {
    x.is_some_and(|v| v >= lo && v <= hi)
}

fn fmt_slope(x: Option<f64>) -> String {
    x.map_or("none".to_string(), |v| format!("{v:.3}"))
}

fn gaussian(d: usize) -> DistributionSpec {
    DistributionSpec::standard_gaussian(d)
}

fn shared(sigma: f64, support_size: usize) -> SmoothingConfig {
    SmoothingConfig {
        repeats: 1,
        support_size,
        ..SmoothingConfig::new(sigma, SmoothingMethod::McShared)
    }
}

fn exact() -> SmoothingConfig {
    SmoothingConfig {
        repeats: 1,
        ..SmoothingConfig::new(0.0, SmoothingMethod::McExact)
    }
}

fn rate_settings(t: &toml::Table) -> RateSettings {
    RateSettings {
        n_grid: t.us("n_grid"),
        reps: t.u("reps"),
        reference_size: Some(t.u("reference_size")),
        seed: Seed::new(t.u("seed") as u64),
    }
}

fn random_cloud(rng: &mut impl Rng, n: usize, d: usize) -> PointCloud {
    PointCloud::new((0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect(), d).unwrap()
}

#[test]
fn exact_ot_oracle_suite() {
    let t = section("exact_ot");
    let tol = t.f("tol");
    let start = Instant::now();
    let mut rng = Seed::new(t.u("seed") as u64).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..t.u("instances") {
        let n = rng.random_range(1..=t.u("max_n"));
        let d = rng.random_range(1..=t.u("max_d"));
        let a = random_cloud(&mut rng, n, d);
        let b = random_cloud(&mut rng, n, d);
        let brute = w1_bruteforce(&a, &b).unwrap().distance;
        let assign = w1_assignment(&a, &b).unwrap().distance;
        let (ma, mb) = empirical_pair(&a, &b).unwrap();
        let flow = w1_mincost_flow(&ma, &mb).unwrap().distance;
        worst = worst.max((assign - brute).abs()).max((flow - brute).abs());
    }
    for _ in 0..t.u("instances") {
        let (n, m) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let a = random_cloud(&mut rng, n, 1);
        let b = random_cloud(&mut rng, m, 1);
        let wa: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let wb: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let ma = DiscreteMeasure::normalized(a, &wa).unwrap();
        let mb = DiscreteMeasure::normalized(b, &wb).unwrap();
        let flow = w1_mincost_flow(&ma, &mb).unwrap().distance;
        let sorted = w1_sorted_1d(&ma, &mb).unwrap().distance;
        worst = worst.max((flow - sorted).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= tol && secs < t.f("max_seconds");
    verdict(
        "exact-OT oracle suite",
        pass,
        &format!(
            "max discrepancy {worst:.2e} (tol {tol:.0e}), {secs:.2} s (limit {} s)",
            t.f("max_seconds")
        ),
    );
}

/// A random 1-D law: Gaussian or uniform with random location and scale.
fn random_law(rng: &mut impl Rng) -> DistributionSpec {
    let loc = rng.random_range(-2.0..2.0);
    let scale: f64 = rng.random_range(0.3..2.0);
    if rng.random_bool(0.5) {
        DistributionSpec::gaussian(vec![loc], vec![scale * scale])
    } else {
        DistributionSpec::UniformCube {
            side: 2.0 * scale,
            center: vec![loc],
        }
    }
}

#[test]
fn estimator_cross_validation() {
    let t = section("cross_validation");
    let (s_lo, s_hi) = t.range("sigma");
    let z = t.f("z");
    let start = Instant::now();
    let root = Seed::new(t.u("seed") as u64);
    let mut rng = root.child("scenarios").rng();
    let mut agree = 0;
    let mut worst_z: f64 = 0.0;
    let scenarios = t.u("scenarios");
    for i in 0..scenarios {
        let n = rng.random_range(20..=t.u("max_n"));
        let m = rng.random_range(20..=t.u("max_n"));
        let sigma = rng.random_range(s_lo..=s_hi);
        let (p, q) = (random_law(&mut rng), random_law(&mut rng));
        let s = root.child("scenario").index(i);
        let a = sample(&p, n, &s.child("a")).unwrap();
        let b = sample(&q, m, &s.child("b")).unwrap();
        let quad = swd_quadrature_1d(&a, &b, sigma, 1e-9).unwrap().value;
        let cfg = SmoothingConfig {
            repeats: 16,
            replicas: 8,
            ..SmoothingConfig::new(sigma, SmoothingMethod::McExact).with_seed(s.child("noise"))
        };
        let est = swd_estimate(&a, &b, &cfg).unwrap();
        let score = (est.value - quad).abs() / est.stderr;
        worst_z = worst_z.max(score);
        if score <= z {
            agree += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = agree >= t.u("min_agree") && secs < t.f("max_seconds");
    verdict(
        "estimator cross-validation",
        pass,
        &format!(
            "{agree}/{scenarios} within {z}·stderr (need {}), worst {worst_z:.2}, {secs:.1} s (limit {} s)",
            t.u("min_agree"),
            t.f("max_seconds")
        ),
    );
}

#[test]
fn parametric_rate() {
    let t = section("parametric_rate");
    let start = Instant::now();
    let report = one_sample_rate_experiment(
        &gaussian(t.u("dim")),
        t.f("sigma"),
        &rate_settings(&t),
        &shared(t.f("sigma"), t.u("support_size")),
    )
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = inside(report.slope, t.range("slope")) && secs < t.f("max_seconds");
    verdict(
        "parametric rate",
        pass,
        &format!(
            "slope {} in {:?}, {secs:.0} s (limit {} s)",
            fmt_slope(report.slope),
            t.range("slope"),
            t.f("max_seconds")
        ),
    );
}

#[test]
fn cod_baseline() {
    let t = section("cod_baseline");
    let report =
        one_sample_rate_experiment(&gaussian(t.u("dim")), 0.0, &rate_settings(&t), &exact())
            .unwrap();
    verdict(
        "curse-of-dimensionality baseline",
        inside(report.slope, t.range("slope")),
        &format!(
            "slope {} in {:?}",
            fmt_slope(report.slope),
            t.range("slope")
        ),
    );
}

#[test]
fn intrinsic_dimension() {
    let t = section("intrinsic_dim");
    let reports = intrinsic_dim_experiment(
        t.u("s"),
        t.u("d"),
        t.u("frame_seed") as u64,
        t.f("sigma"),
        &rate_settings(&t),
        &shared(t.f("sigma"), t.u("support_size")),
    )
    .unwrap();
    let ok_classic = inside(reports.classic.slope, t.range("classic_slope"));
    let ok_smooth = inside(reports.smooth.slope, t.range("smooth_slope"));
    verdict(
        "intrinsic dimension",
        ok_classic && ok_smooth,
        &format!(
            "sigma=0 slope {} in {:?}; sigma={} slope {} in {:?}",
            fmt_slope(reports.classic.slope),
            t.range("classic_slope"),
            t.f("sigma"),
            fmt_slope(reports.smooth.slope),
            t.range("smooth_slope")
        ),
    );
}

#[test]
fn sigma_prefactor_envelope() {
    let t = section("sigma_prefactor");
    let report = sigma_prefactor_experiment(
        &gaussian(t.u("dim")),
        t.u("n"),
        &t.fs("sigma_grid"),
        t.u("reps"),
        Some(t.u("reference_size")),
        &Seed::new(t.u("seed") as u64),
        &shared(1.0, t.u("support_size")),
    )
    .unwrap();
    verdict(
        "sigma prefactor envelope",
        inside(report.slope, t.range("slope")),
        &format!(
            "slope {} in {:?}",
            fmt_slope(report.slope),
            t.range("slope")
        ),
    );
}

fn random_spec(rng: &mut impl Rng, d: usize) -> DistributionSpec {
    let center: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
    if rng.random_bool(0.5) {
        let var = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
        DistributionSpec::gaussian(center, var)
    } else {
        DistributionSpec::UniformCube {
            side: rng.random_range(0.5..3.0),
            center,
        }
    }
}

#[test]
fn stability_bound() {
    let t = section("stability");
    let z = t.f("z");
    let root = Seed::new(t.u("seed") as u64);
    let mut rng = root.child("trials").rng();
    let trials = t.u("trials");
    let mut hold = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..trials {
        let d = rng.random_range(1..=3);
        let (p, q) = (random_spec(&mut rng, d), random_spec(&mut rng, d));
        let (n, m) = (rng.random_range(20..=120), rng.random_range(20..=120));
        let s1 = rng.random_range(0.0..1.5);
        let s2 = rng.random_range(0.0..1.5);
        let s = root.child("trial").index(i);
        let a = sample(&p, n, &s.child("a")).unwrap();
        let b = sample(&q, m, &s.child("b")).unwrap();
        let cfg = SmoothingConfig {
            repeats: 4,
            ..SmoothingConfig::new(1.0, SmoothingMethod::McExact).with_seed(s.child("noise"))
        };
        let g = stability_gap(&a, &b, s1, s2, &cfg).unwrap();
        worst = worst.max(g.gap - g.bound - z * g.stderr);
        if g.gap <= g.bound + z * g.stderr {
            hold += 1;
        }
    }
    verdict(
        "stability bound",
        hold >= t.u("min_hold"),
        &format!("{hold}/{trials} trials within bound + {z}·stderr, worst excess {worst:.3}"),
    );
}

#[test]
fn two_sample_level_and_power() {
    let t = section("two_sample");
    let d = t.u("dim");
    let start = Instant::now();
    let scenario = PowerScenario {
        null_spec: gaussian(d),
        alt_spec: DistributionSpec::gaussian(t.fs("shift"), vec![1.0; d]),
        n: t.u("n"),
        m: t.u("m"),
        sigma: t.f("sigma"),
        alpha: t.f("alpha"),
        b: t.u("B"),
        trials: t.u("trials"),
        seed: Seed::new(t.u("seed") as u64),
    };
    let cfg = SmoothingConfig {
        repeats: 1,
        ..SmoothingConfig::new(t.f("sigma"), SmoothingMethod::McExact)
    };
    let (level, power) = level_power_experiment(&scenario, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (lo, hi) = t.range("level");
    let pass = level.rejection_rate >= lo
        && level.rejection_rate <= hi
        && power.rejection_rate >= t.f("min_power")
        && secs < t.f("max_seconds");
    verdict(
        "two-sample level and power",
        pass,
        &format!(
            "level {:.3} in [{lo}, {hi}], power {:.3} >= {}, {secs:.0} s (limit {} s)",
            level.rejection_rate,
            power.rejection_rate,
            t.f("min_power"),
            t.f("max_seconds")
        ),
    );
}

#[test]
fn bootstrap_law_proximity() {
    let t = section("bootstrap");
    let (n, sigma) = (t.u("n"), t.f("sigma"));
    let root = Seed::new(t.u("seed") as u64);
    let law = gaussian(1);
    let cfg = SmoothingConfig::new(sigma, SmoothingMethod::Quadrature1d);
    let data = sample(&law, n, &root.child("data")).unwrap();
    let boot =
        one_sample_bootstrap(&data, sigma, t.u("B"), &root.child("bootstrap"), &cfg).unwrap();
    let reference = sample(&law, t.u("reference_size"), &root.child("reference")).unwrap();
    let ref_cdf = SmoothedCdf::new(reference.as_slice(), sigma);
    let scale = (n as f64).sqrt();
    let fresh: Vec<f64> = (0..t.u("replications"))
        .map(|r| {
            let x = sample(&law, n, &root.child("fresh").index(r)).unwrap();
            scale
                * quadrature_between(
                    &SmoothedCdf::new(x.as_slice(), sigma),
                    &ref_cdf,
                    cfg.quad_tol,
                )
                .value
        })
        .collect();
    let ks = kolmogorov_distance(&boot.values, &fresh);
    verdict(
        "bootstrap law proximity",
        ks <= t.f("max_kolmogorov"),
        &format!(
            "Kolmogorov distance {ks:.3} (limit {})",
            t.f("max_kolmogorov")
        ),
    );
}

#[test]
fn mde_rate_and_identity() {
    let t = section("mde");
    let d = t.u("dim");
    let family = ParametricFamily::location(d, t.f("bound"));
    let theta_star = t.fs("theta_star");
    let seed = Seed::new(t.u("seed") as u64);
    let opts = MsweOptions {
        smoothing: shared(t.f("sigma"), t.u("support_size")),
        seed: seed.child("fit"),
        ..MsweOptions::default()
    };

    // data equal to the frozen model sample at theta_star
    let m = t.u("identity_n");
    let identity_opts = MsweOptions {
        model_size: Some(m),
        ..opts.clone()
    };
    let data = family
        .transform(&theta_star, &frozen_base(m, d, &identity_opts.seed))
        .unwrap();
    let at_star = mswe_objective(&theta_star, &data, &family, &identity_opts).unwrap();
    let fit = fit_mswe(&data, &family, &identity_opts).unwrap();
    let err: f64 = fit
        .theta_hat
        .iter()
        .zip(&theta_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    let settings = MsweRateSettings {
        family: family.clone(),
        theta_star: theta_star.clone(),
        data_spec: None,
        n_grid: t.us("n_grid"),
        reps: t.u("reps"),
        seed: seed.child("rate"),
    };
    let report = mswe_rate_experiment(&settings, &opts).unwrap();
    let pass =
        inside(report.slope, t.range("slope")) && at_star == 0.0 && err <= t.f("identity_tol");
    verdict(
        "MDE rate",
        pass,
        &format!(
            "median-error slope {} in {:?}; identity fit error {err:.1e} (tol {:.0e}), objective at theta* {at_star}",
            fmt_slope(report.slope),
            t.range("slope"),
            t.f("identity_tol")
        ),
    );
}

#[test]
fn concentration_shape() {
    let t = section("concentration");
    let (n, d, side) = (t.u("n"), t.u("dim"), t.f("side"));
    let spec = DistributionSpec::unit_cube(d, side);
    let diameter = spec.diameter().unwrap();
    let t_star = tail_t(t.f("level"), n, diameter);
    let settings = ConcentrationSettings {
        spec,
        n,
        sigma: t.f("sigma"),
        eta: 0.0,
        t_grid: vec![t_star],
        trials: t.u("trials"),
        reference_size: t.u("reference_size"),
        seed: Seed::new(t.u("seed") as u64),
    };
    let report =
        concentration_experiment(&settings, &shared(t.f("sigma"), t.u("support_size"))).unwrap();
    let freq = report.exceedance[0];
    verdict(
        "concentration shape",
        freq <= t.f("max_exceedance"),
        &format!(
            "exceedance {freq:.3} at t = {t_star:.4} (limit {}), mean estimate {:.4}",
            t.f("max_exceedance"),
            report.mean_estimate
        ),
    );
}

#[test]
fn vanishing_sigma_guard() {
    let t = section("vanishing_sigma");
    let (gd, ga) = (t.u("guard_d"), t.f("guard_alpha"));
    let threshold = guard_threshold(gd, ga).unwrap();
    let power = |p: f64| Schedule::Power { p, scale: 1.0 };
    let rejects = check_schedule(&power(t.f("reject_p")), gd, Some(ga)).is_err();
    let accepts = check_schedule(&power(t.f("accept_p")), gd, Some(ga)).is_ok();

    let report = vanishing_sigma_schedule(
        &gaussian(t.u("dim")),
        &Schedule::InverseLog {
            scale: t.f("scale"),
        },
        None,
        &rate_settings(&t),
        &shared(1.0, t.u("support_size")),
    )
    .unwrap();
    let held = report.sandwich.iter().filter(|s| s.holds).count();
    let total = report.sandwich.len();
    verdict(
        "vanishing-sigma guard",
        rejects && accepts && held == total,
        &format!(
            "threshold {threshold:.4}: p={} rejected {rejects}, p={} accepted {accepts}; sandwich holds at {held}/{total} grid points",
            t.f("reject_p"),
            t.f("accept_p")
        ),
    );
}
