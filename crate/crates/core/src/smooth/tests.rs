use super::*;
use crate::measures::{sample, DistributionSpec};

fn cloud(rows: &[&[f64]]) -> PointCloud {
    PointCloud::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn gaussian_cloud(n: usize, d: usize, shift: f64, stream: &str) -> PointCloud {
    let c = sample(
        &DistributionSpec::standard_gaussian(d),
        n,
        &Seed::with_stream(11, stream),
    )
    .unwrap();
    c.translated(&vec![shift; d]).unwrap()
}

#[test]
fn smooth_cloud_shape_and_zero_sigma() {
    let c = cloud(&[&[0.0, 1.0], &[2.0, 3.0]]);
    let s = smooth_cloud(&c, 0.0, 3, &Seed::new(1)).unwrap();
    assert_eq!(s.len(), 6);
    assert_eq!(s.point(0), &[0.0, 1.0]);
    assert_eq!(s.point(5), &[2.0, 3.0]);
    let s = smooth_cloud(&c, 0.5, 4, &Seed::new(1)).unwrap();
    assert_eq!(s.len(), 8);
    assert_eq!(s.dim(), 2);
    assert!(smooth_cloud(&c, -1.0, 1, &Seed::new(1)).is_err());
}

#[test]
fn noise_scales_with_sigma_under_a_fixed_seed() {
    let c = cloud(&[&[1.0], &[-1.0]]);
    let seed = Seed::new(5);
    let s1 = smooth_cloud(&c, 1.0, 2, &seed).unwrap();
    let s2 = smooth_cloud(&c, 2.0, 2, &seed).unwrap();
    for i in 0..4 {
        let base = c.point(i / 2)[0];
        let e1 = s1.point(i)[0] - base;
        let e2 = s2.point(i)[0] - base;
        assert!((e2 - 2.0 * e1).abs() < 1e-12);
    }
}

#[test]
fn zero_sigma_is_exact_w1() {
    let a = cloud(&[&[0.0, 0.0], &[1.0, 0.0]]);
    let b = cloud(&[&[0.0, 1.0], &[1.0, 1.0]]);
    for method in [
        SmoothingMethod::McExact,
        SmoothingMethod::McFlow,
        SmoothingMethod::McShared,
    ] {
        let est = swd_estimate(&a, &b, &SmoothingConfig::new(0.0, method)).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12, "{method}: {}", est.value);
        assert_eq!(est.stderr, 0.0);
    }
    let a1 = cloud(&[&[0.0], &[1.0], &[3.0]]);
    let b1 = cloud(&[&[5.0], &[-1.0], &[2.0]]);
    let est = swd_estimate(
        &a1,
        &b1,
        &SmoothingConfig::new(0.0, SmoothingMethod::Quadrature1d),
    )
    .unwrap();
    assert!((est.value - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn identical_inputs_give_zero_with_shared_noise() {
    let a = gaussian_cloud(50, 3, 0.0, "x");
    for method in [SmoothingMethod::McExact, SmoothingMethod::McFlow] {
        let cfg = SmoothingConfig {
            shared_noise: true,
            repeats: 2,
            ..SmoothingConfig::new(1.0, method)
        };
        let est = swd_estimate(&a, &a, &cfg).unwrap();
        assert!(est.value.abs() < 1e-12, "{method}: {}", est.value);
    }
    let est = swd_estimate(
        &a,
        &a,
        &SmoothingConfig::new(1.0, SmoothingMethod::McShared),
    )
    .unwrap();
    assert!(est.value.abs() < 1e-12);
}

#[test]
fn point_masses_keep_their_distance() {
    // N(x, s^2) vs N(y, s^2) are translates, so W1 = |x - y|
    let a = cloud(&[&[0.0, 0.0]]);
    let b = cloud(&[&[3.0, 4.0]]);
    let cfg = SmoothingConfig {
        shared_noise: true,
        replicas: 16,
        ..SmoothingConfig::new(2.0, SmoothingMethod::McExact)
    };
    let est = swd_estimate(&a, &b, &cfg).unwrap();
    assert!((est.value - 5.0).abs() < 1e-9, "{}", est.value);
}

#[test]
fn estimates_are_deterministic() {
    let a = gaussian_cloud(40, 2, 0.0, "x");
    let b = gaussian_cloud(40, 2, 0.5, "y");
    for method in [
        SmoothingMethod::McExact,
        SmoothingMethod::McShared,
        SmoothingMethod::McSinkhorn,
    ] {
        let cfg = SmoothingConfig {
            support_size: 128,
            repeats: 3,
            ..SmoothingConfig::new(0.7, method)
        };
        let e1 = swd_estimate(&a, &b, &cfg).unwrap();
        let e2 = swd_estimate(&a, &b, &cfg).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.per_repeat_values.len(), 3);
    }
}

#[test]
fn exact_falls_back_to_flow_for_unequal_sizes() {
    let a = gaussian_cloud(30, 2, 0.0, "x");
    let b = gaussian_cloud(45, 2, 0.0, "y");
    let cfg = SmoothingConfig {
        repeats: 1,
        ..SmoothingConfig::new(0.5, SmoothingMethod::McExact)
    };
    let est = swd_estimate(&a, &b, &cfg).unwrap();
    assert_eq!(est.diagnostics.solver, Some(OtMethod::MinCostFlow));
    assert!(est.diagnostics.fallback.is_some());
}

#[test]
fn methods_agree_in_one_dimension() {
    let a = gaussian_cloud(60, 1, 0.0, "x");
    let b = gaussian_cloud(60, 1, 1.0, "y");
    let quad = swd_estimate(
        &a,
        &b,
        &SmoothingConfig::new(1.0, SmoothingMethod::Quadrature1d),
    )
    .unwrap();
    let cfg = SmoothingConfig {
        replicas: 50,
        repeats: 4,
        ..SmoothingConfig::new(1.0, SmoothingMethod::McExact)
    };
    let mc = swd_estimate(&a, &b, &cfg).unwrap();
    assert!(
        (mc.value - quad.value).abs() < 0.1,
        "{} vs {}",
        mc.value,
        quad.value
    );
    let cfg = SmoothingConfig {
        support_size: 4096,
        repeats: 4,
        ..SmoothingConfig::new(1.0, SmoothingMethod::McShared)
    };
    let shared = swd_estimate(&a, &b, &cfg).unwrap();
    assert!(
        (shared.value - quad.value).abs() < 0.05,
        "{} vs {}",
        shared.value,
        quad.value
    );
}

#[test]
fn quadrature_rejects_higher_dimensions() {
    let a = gaussian_cloud(5, 2, 0.0, "x");
    assert!(swd_estimate(
        &a,
        &a,
        &SmoothingConfig::new(1.0, SmoothingMethod::Quadrature1d)
    )
    .is_err());
}

#[test]
fn config_validation_names_the_key() {
    let bad = SmoothingConfig::new(-0.5, SmoothingMethod::McExact);
    match bad.validate() {
        Err(SwdError::InvalidConfig { key, reason }) => {
            assert_eq!(key, "sigma");
            assert!(reason.contains("sigma must be ≥ 0"));
        }
        other => panic!("unexpected {other:?}"),
    }
    let bad = SmoothingConfig {
        repeats: 0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    assert!("mc-nope".parse::<SmoothingMethod>().is_err());
    assert_eq!(
        "mc-shared".parse::<SmoothingMethod>().unwrap(),
        SmoothingMethod::McShared
    );
}

#[test]
fn stability_gap_is_within_the_bound() {
    let a = gaussian_cloud(80, 1, 0.0, "x");
    let b = gaussian_cloud(80, 1, 0.8, "y");
    let cfg = SmoothingConfig::new(1.0, SmoothingMethod::Quadrature1d);
    let g = stability_gap(&a, &b, 0.5, 1.5, &cfg).unwrap();
    assert!(g.gap <= g.bound);
    assert!((g.bound - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
}
