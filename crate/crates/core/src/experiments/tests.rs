use rand_distr::{Distribution, Normal};

use super::*;
use crate::exact_ot::{empirical_pair, w1_mincost_flow};
use crate::smooth::SmoothingMethod;

fn shared_cfg() -> SmoothingConfig {
    SmoothingConfig {
        repeats: 1,
        support_size: 256,
        ..SmoothingConfig::new(1.0, SmoothingMethod::McShared)
    }
}

fn settings(n_grid: Vec<usize>, reps: usize, reference: usize) -> RateSettings {
    RateSettings {
        n_grid,
        reps,
        reference_size: Some(reference),
        seed: Seed::new(21),
    }
}

#[test]
fn slope_of_exact_power_law() {
    let pairs: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0]
        .iter()
        .map(|&x| (x, x.powf(-0.5)))
        .collect();
    let fit = fit_loglog_slope(&pairs).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-12);
    assert!(fit.stderr < 1e-12);
    let flat: Vec<(f64, f64)> = [1.0, 3.0, 9.0].iter().map(|&x| (x, 2.5)).collect();
    assert!(fit_loglog_slope(&flat).unwrap().slope.abs() < 1e-12);
}

#[test]
fn slope_with_multiplicative_noise() {
    let mut rng = Seed::new(4).rng();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let pairs: Vec<(f64, f64)> = (1..=10)
        .map(|i| {
            let x = i as f64;
            (x, 3.0 * x * x * (1.0 + noise.sample(&mut rng)))
        })
        .collect();
    let fit = fit_loglog_slope(&pairs).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.05, "{}", fit.slope);
}

#[test]
fn slope_preconditions() {
    assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
    assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    assert!(fit_loglog_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
}

#[test]
fn guard_arithmetic() {
    let t = guard_threshold(2, 2.0).unwrap();
    assert!((t - 0.125).abs() < 1e-15);
    let p02 = Schedule::Power { p: 0.2, scale: 1.0 };
    let p01 = Schedule::Power { p: 0.1, scale: 1.0 };
    match check_schedule(&p02, 2, Some(2.0)) {
        Err(SwdError::InvalidConfig { key, reason }) => {
            assert_eq!(key, "schedule.p");
            assert!(reason.contains("0.125"), "{reason}");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(check_schedule(&p01, 2, Some(2.0)).unwrap(), Some(0.125));
    assert!(check_schedule(&p01, 2, None).is_err());
    assert!(check_schedule(&Schedule::InverseLog { scale: 1.0 }, 2, Some(2.0)).is_ok());
    assert!(check_schedule(&Schedule::InverseLog { scale: 1.0 }, 2, None).is_ok());
    assert!(guard_threshold(2, 1.0).is_err());
    assert!(guard_threshold(1, 3.0).is_err());
}

#[test]
fn schedules_evaluate() {
    assert_eq!(Schedule::Const { sigma: 0.3 }.sigma_at(100), 0.3);
    let s = Schedule::InverseLog { scale: 1.0 }.sigma_at(100);
    assert!((s - 1.0 / 100f64.ln()).abs() < 1e-15);
    let s = Schedule::Power { p: 0.5, scale: 1.0 }.sigma_at(64);
    assert!((s - 0.125).abs() < 1e-15);
}

#[test]
fn grid_validation() {
    let spec = DistributionSpec::standard_gaussian(2);
    match one_sample_rate_experiment(&spec, 1.0, &settings(vec![64], 3, 1024), &shared_cfg()) {
        Err(SwdError::InvalidConfig { key, reason }) => {
            assert_eq!(key, "n_grid");
            assert_eq!(reason, "n_grid needs ≥ 3 points");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(one_sample_rate_experiment(
        &spec,
        1.0,
        &settings(vec![8, 16, 32], 3, 100),
        &shared_cfg()
    )
    .is_err());
    assert!(
        sigma_prefactor_experiment(&spec, 16, &[0.5], 3, None, &Seed::new(1), &shared_cfg())
            .is_err()
    );
    assert!(sigma_prefactor_experiment(
        &spec,
        16,
        &[0.5, 1.0, 1.5],
        3,
        None,
        &Seed::new(1),
        &shared_cfg()
    )
    .is_err());
    assert_eq!(reference_size_for(None, 100).unwrap(), 8192);
    assert_eq!(reference_size_for(None, 4000).unwrap(), 16000);
}

#[test]
fn point_mass_rate_has_no_slope() {
    let spec = DistributionSpec::point_mass(vec![1.0, 2.0]);
    for sigma in [0.0, 1.0] {
        let r = one_sample_rate_experiment(
            &spec,
            sigma,
            &settings(vec![4, 8, 16], 2, 64),
            &shared_cfg(),
        )
        .unwrap();
        assert!(r.means.iter().all(|&m| m.abs() < 1e-12), "{:?}", r.means);
        assert!(r.slope.is_none());
        assert!(r.slope_note.is_some());
    }
}

#[test]
fn zero_sigma_path_is_classic_w1() {
    let spec = DistributionSpec::standard_gaussian(2);
    let st = settings(vec![8, 16, 32], 2, 128);
    let r = one_sample_rate_experiment(&spec, 0.0, &st, &shared_cfg()).unwrap();
    for (g, &n) in st.n_grid.iter().enumerate() {
        let mut total = 0.0;
        for rep in 0..2 {
            let s = st.seed.child(&format!("n{n}")).index(rep);
            let x = sample(&spec, n, &s.child("sample")).unwrap();
            let reference = sample(&spec, 128, &s.child("reference")).unwrap();
            let (a, b) = empirical_pair(&x, &reference).unwrap();
            total += w1_mincost_flow(&a, &b).unwrap().distance;
        }
        assert!((r.means[g] - total / 2.0).abs() < 1e-9);
    }
}

#[test]
fn rate_reports_are_reproducible_and_decreasing() {
    let spec = DistributionSpec::standard_gaussian(2);
    let st = settings(vec![16, 64, 256], 6, 1024);
    let r1 = one_sample_rate_experiment(&spec, 1.0, &st, &shared_cfg()).unwrap();
    let r2 = one_sample_rate_experiment(&spec, 1.0, &st, &shared_cfg()).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.to_csv(), r2.to_csv());
    for i in 1..r1.means.len() {
        let slack = 2.0 * (r1.sds[i - 1].powi(2) + r1.sds[i].powi(2)).sqrt();
        assert!(r1.means[i] <= r1.means[i - 1] + slack);
    }
    assert!(r1.slope.unwrap() < 0.0);
}

#[test]
fn csv_and_sidecar_layout() {
    let meta = RateMetadata::new("unit", &Seed::new(0));
    let r = RateReport::from_values(
        Axis::N,
        vec![1.0, 2.0, 4.0],
        &[vec![1.0, 1.0], vec![0.5, 0.5], vec![0.25, 0.25]],
        Center::Mean,
        meta,
    )
    .unwrap();
    assert!((r.slope.unwrap() + 1.0).abs() < 1e-12);
    let csv = r.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "axis_value,mean,sd,reps");
    assert_eq!(lines.len(), 4);
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(fields[0].parse::<f64>().unwrap(), 2.0);
    assert_eq!(fields[1].parse::<f64>().unwrap(), 0.5);
    assert_eq!(fields[3], "2");
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, json_path) = r.write(dir.path(), "rate").unwrap();
    assert_eq!(std::fs::read_to_string(csv_path).unwrap(), csv);
    let back: RateReport =
        serde_json::from_str(&std::fs::read_to_string(json_path).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn median_center() {
    let meta = RateMetadata::new("unit", &Seed::new(0));
    let r = RateReport::from_values(
        Axis::N,
        vec![1.0, 2.0, 3.0],
        &[
            vec![1.0, 2.0, 9.0],
            vec![1.0, 3.0, 4.0, 8.0],
            vec![1.0, 1.0, 1.0],
        ],
        Center::Median,
        meta.clone(),
    );
    assert!(r.is_err(), "ragged reps must be rejected");
    let r = RateReport::from_values(
        Axis::N,
        vec![1.0, 2.0, 3.0],
        &[
            vec![1.0, 2.0, 9.0],
            vec![1.0, 3.0, 4.0],
            vec![1.0, 1.0, 1.0],
        ],
        Center::Median,
        meta,
    )
    .unwrap();
    assert_eq!(r.means, vec![2.0, 3.0, 1.0]);
}

#[test]
fn intrinsic_dim_rejects_small_s() {
    let st = settings(vec![8, 16, 32], 2, 128);
    assert!(intrinsic_dim_experiment(2, 10, 1, 1.0, &st, &shared_cfg()).is_err());
    assert!(intrinsic_dim_experiment(4, 3, 1, 1.0, &st, &shared_cfg()).is_err());
}

#[test]
fn vanishing_schedule_sandwich_holds() {
    let spec = DistributionSpec::standard_gaussian(2);
    let st = settings(vec![16, 32, 64], 4, 256);
    let rep = vanishing_sigma_schedule(
        &spec,
        &Schedule::InverseLog { scale: 1.0 },
        Some(2.0),
        &st,
        &shared_cfg(),
    )
    .unwrap();
    assert_eq!(rep.threshold, Some(0.125));
    assert_eq!(rep.sandwich.len(), 3);
    assert!(rep.sandwich.iter().all(|p| p.holds));
    let bad = Schedule::Power { p: 0.2, scale: 1.0 };
    assert!(vanishing_sigma_schedule(&spec, &bad, Some(2.0), &st, &shared_cfg()).is_err());
}

#[test]
fn concentration_bounds_and_validation() {
    let st = ConcentrationSettings {
        spec: DistributionSpec::unit_cube(2, 1.0),
        n: 20,
        sigma: 0.5,
        eta: 0.0,
        t_grid: vec![0.0, 0.05, 3.5],
        trials: 100,
        reference_size: 200,
        seed: Seed::new(2),
    };
    let cfg = SmoothingConfig {
        support_size: 128,
        ..shared_cfg()
    };
    let r = concentration_experiment(&st, &cfg).unwrap();
    // beyond diam + 2 sigma sqrt(d) nothing can exceed the mean
    assert_eq!(r.exceedance[2], 0.0);
    assert!(r.exceedance.windows(2).all(|w| w[0] >= w[1]));
    assert!(
        r.exceedance[0] > 0.2 && r.exceedance[0] < 0.8,
        "{}",
        r.exceedance[0]
    );
    assert!((r.reference_curve[0] - 1.0).abs() < 1e-15);
    assert!(r.to_csv().starts_with("t,exceedance,reference\n"));

    let unbounded = ConcentrationSettings {
        spec: DistributionSpec::standard_gaussian(2),
        ..st.clone()
    };
    assert!(concentration_experiment(&unbounded, &cfg).is_err());
    let few = ConcentrationSettings { trials: 50, ..st };
    assert!(concentration_experiment(&few, &cfg).is_err());
}

#[test]
fn tail_level_inverts_the_curve() {
    let t = tail_t(0.05, 200, 2f64.sqrt());
    assert!((tail_curve(t, 200, 2f64.sqrt()) - 0.05).abs() < 1e-14);
}
