use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use swd_core::bootstrap::{one_sample_bootstrap, two_sample_pooled_bootstrap};
use swd_core::experiments::{
    concentration_experiment, intrinsic_dim_experiment, one_sample_rate_experiment,
    sigma_prefactor_experiment, tail_t, vanishing_sigma_schedule, ConcentrationSettings,
    RateReport, RateSettings,
};
use swd_core::measures::load_point_cloud;
use swd_core::mswe::{fit_mswe, mswe_rate_experiment, FitResult, MsweOptions, MsweRateSettings};
use swd_core::report::{fmt_f64, to_json_string};
use swd_core::smooth::{swd_estimate, SmoothingConfig, SmoothingMethod};
use swd_core::two_sample::{level_power_experiment, swd_test, PowerScenario};
use swd_core::Seed;

use crate::config::{
    self, ConcentrationScenario, ConfigFile, EstimatorConfig, MdeScenario, OptimizerConfig,
    PowerScenarioConfig, RatesScenario,
};
use crate::{BootstrapArgs, CliError, DistArgs, ExperimentArgs, TestArgs};

/// Runs `f` on a pool of the requested size; the command-line value wins
/// over the config value.
pub fn with_pool<T>(
    cli: Option<usize>,
    file: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError>
where
    T: Send,
{
    match cli.or(file) {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Internal(format!("cannot start worker pool: {e}")))?;
            pool.install(f)
        }
    }
}

/// The given seed, or a fresh one announced on stderr so the run can be replayed.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

/// Writes `report` plus a `config` entry as `<stem>.json` and prints the path.
fn write_sidecar<T: Serialize, C: Serialize>(
    dir: &Path,
    stem: &str,
    report: &T,
    config: &C,
) -> Result<PathBuf, CliError> {
    let mut value = to_value(report)?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("config".to_string(), to_value(config)?);
        }
        None => return Err(CliError::Internal("report is not a JSON object".into())),
    }
    let path = dir.join(format!("{stem}.json"));
    write_file(&path, &to_json_string(&value)?)?;
    println!("{}", path.display());
    Ok(path)
}

fn print_json<T: Serialize>(v: &T) -> Result<(), CliError> {
    print!("{}", to_json_string(v)?);
    Ok(())
}

fn load(path: &Path) -> Result<swd_core::PointCloud, CliError> {
    Ok(load_point_cloud(path, None)?)
}

pub fn dist(a: &DistArgs) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed);
    let cfg = SmoothingConfig {
        replicas: a.k,
        repeats: a.repeats,
        shared_noise: a.shared_noise,
        support_size: a
            .support_size
            .unwrap_or(SmoothingConfig::default().support_size),
        ..SmoothingConfig::new(a.sigma, a.method).with_seed(Seed::new(seed).child("noise"))
    };
    cfg.validate()?;
    let x = load(&a.a)?;
    let y = load(&a.b)?;
    let est = swd_estimate(&x, &y, &cfg)?;
    print_json(&json!({
        "value": est.value,
        "stderr": est.stderr,
        "method": est.method,
        "n": x.len(),
        "m": y.len(),
        "d": x.dim(),
        "sigma": est.sigma,
    }))
}

pub fn test(a: &TestArgs) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed);
    let cfg = SmoothingConfig {
        repeats: a.repeats,
        shared_noise: a.shared_noise,
        ..SmoothingConfig::new(a.sigma, a.method)
    };
    cfg.validate()?;
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::User(format!(
            "invalid configuration `alpha`: alpha must lie in (0, 1), got {}",
            a.alpha
        )));
    }
    let x = load(&a.x)?;
    let y = load(&a.y)?;
    let result = swd_test(&x, &y, a.sigma, a.alpha, a.b, &Seed::new(seed), &cfg)?;
    print_json(&result)
}

pub fn bootstrap(a: &BootstrapArgs) -> Result<(), CliError> {
    let seed = Seed::new(resolve_seed(a.seed));
    let cfg = SmoothingConfig {
        repeats: a.repeats,
        shared_noise: a.shared_noise,
        ..SmoothingConfig::new(a.sigma, a.method)
    };
    cfg.validate()?;
    if let Some(l) = a.levels.iter().find(|&&l| !(l > 0.0 && l < 1.0)) {
        return Err(CliError::User(format!(
            "invalid configuration `levels`: levels must lie in (0, 1), got {l}"
        )));
    }
    let dist = match (&a.data, &a.x, &a.y) {
        (Some(d), _, _) => one_sample_bootstrap(&load(d)?, a.sigma, a.b, &seed, &cfg)?,
        (None, Some(x), Some(y)) => {
            two_sample_pooled_bootstrap(&load(x)?, &load(y)?, a.sigma, a.b, &seed, &cfg)?
        }
        _ => return Err(CliError::User("give --data, or both --x and --y".into())),
    };
    create_dir(&a.out_dir)?;
    dist.write_csv(&a.out_dir.join(format!("{}.csv", a.name)))?;
    let sidecar = a.out_dir.join(format!("{}.json", a.name));
    dist.write_sidecar(&sidecar, &a.levels, &cfg)?;
    println!("{}", sidecar.display());
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::User(format!("cannot create {}: {e}", dir.display())))
}

/// A loaded experiment config with its seed filled in.
struct Prepared<S> {
    config: ConfigFile<S>,
    seed: u64,
    out_dir: PathBuf,
    base_dir: PathBuf,
}

fn prepare<S: DeserializeOwned>(args: &ExperimentArgs) -> Result<Prepared<S>, CliError> {
    let mut config = config::load::<S>(&args.config)?;
    let seed = resolve_seed(config.seed);
    config.seed = Some(seed);
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let base_dir = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(Prepared {
        config,
        seed,
        out_dir,
        base_dir,
    })
}

fn estimator(
    e: &EstimatorConfig,
    sigma: f64,
    seed: u64,
    method: SmoothingMethod,
) -> SmoothingConfig {
    e.build(sigma, Seed::new(seed).child("noise"), method, 1)
}

fn rate_csv(dir: &Path, stem: &str, report: &RateReport) -> Result<(), CliError> {
    write_file(&dir.join(format!("{stem}.csv")), &report.to_csv())
}

pub fn rates(args: &ExperimentArgs, threads: Option<usize>) -> Result<(), CliError> {
    let p = prepare::<RatesScenario>(args)?;
    with_pool(threads, p.config.threads, || run_rates(&p))
}

fn run_rates(p: &Prepared<RatesScenario>) -> Result<(), CliError> {
    let stem = p.config.stem("rates");
    let est = &p.config.estimator;
    let root = Seed::new(p.seed);
    let settings = |n_grid: &[usize], reps: usize, reference_size: Option<usize>| RateSettings {
        n_grid: n_grid.to_vec(),
        reps,
        reference_size,
        seed: root.clone(),
    };
    let method = SmoothingMethod::McShared;
    match &p.config.scenario {
        RatesScenario::OneSample {
            spec,
            sigma,
            n_grid,
            reps,
            reference_size,
        } => {
            let cfg = estimator(est, *sigma, p.seed, method);
            let report = one_sample_rate_experiment(
                spec,
                *sigma,
                &settings(n_grid, *reps, *reference_size),
                &cfg,
            )?;
            create_dir(&p.out_dir)?;
            rate_csv(&p.out_dir, &stem, &report)?;
            write_sidecar(&p.out_dir, &stem, &report, &p.config)?;
        }
        RatesScenario::SigmaPrefactor {
            spec,
            n,
            sigma_grid,
            reps,
            reference_size,
        } => {
            let cfg = estimator(est, 1.0, p.seed, method);
            let report = sigma_prefactor_experiment(
                spec,
                *n,
                sigma_grid,
                *reps,
                *reference_size,
                &root,
                &cfg,
            )?;
            create_dir(&p.out_dir)?;
            rate_csv(&p.out_dir, &stem, &report)?;
            write_sidecar(&p.out_dir, &stem, &report, &p.config)?;
        }
        RatesScenario::IntrinsicDim {
            s,
            d,
            frame_seed,
            sigma,
            n_grid,
            reps,
            reference_size,
        } => {
            let cfg = estimator(est, *sigma, p.seed, method);
            let frame_seed = frame_seed.unwrap_or(p.seed);
            let reports = intrinsic_dim_experiment(
                *s,
                *d,
                frame_seed,
                *sigma,
                &settings(n_grid, *reps, *reference_size),
                &cfg,
            )?;
            create_dir(&p.out_dir)?;
            rate_csv(&p.out_dir, &format!("{stem}-classic"), &reports.classic)?;
            rate_csv(&p.out_dir, &format!("{stem}-smooth"), &reports.smooth)?;
            let report = json!({ "classic": reports.classic, "smooth": reports.smooth });
            write_sidecar(&p.out_dir, &stem, &report, &p.config)?;
        }
        RatesScenario::VanishingSigma {
            spec,
            schedule,
            alpha,
            n_grid,
            reps,
            reference_size,
        } => {
            let cfg = estimator(est, 1.0, p.seed, method);
            let report = vanishing_sigma_schedule(
                spec,
                schedule,
                *alpha,
                &settings(n_grid, *reps, *reference_size),
                &cfg,
            )?;
            create_dir(&p.out_dir)?;
            let mut csv = String::from("n,sigma,classic_mean,smooth_mean,slack,stderr,holds\n");
            for s in &report.sandwich {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    s.n,
                    fmt_f64(s.sigma),
                    fmt_f64(s.classic_mean),
                    fmt_f64(s.smooth_mean),
                    fmt_f64(s.slack),
                    fmt_f64(s.stderr),
                    s.holds
                ));
            }
            write_file(&p.out_dir.join(format!("{stem}.csv")), &csv)?;
            rate_csv(&p.out_dir, &format!("{stem}-classic"), &report.classic)?;
            rate_csv(&p.out_dir, &format!("{stem}-smooth"), &report.smooth)?;
            write_sidecar(&p.out_dir, &stem, &report, &p.config)?;
        }
    }
    Ok(())
}

fn mswe_options(o: &OptimizerConfig, smoothing: SmoothingConfig, seed: u64) -> MsweOptions {
    MsweOptions {
        model_size: o.model_size,
        model_factor: o.model_factor,
        smoothing,
        optimizer: o.method,
        starts: o.starts,
        tolerance: o.tolerance,
        max_evaluations: o.max_evaluations,
        seed: Seed::new(seed),
    }
}

fn trace_csv(fit: &FitResult) -> String {
    let mut s = String::from("start,value");
    for i in 0..fit.theta_hat.len() {
        s.push_str(&format!(",theta_{i}"));
    }
    s.push('\n');
    for t in &fit.trace {
        s.push_str(&format!("{},{}", t.start, fmt_f64(t.value)));
        for v in &t.theta {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s.push('\n');
    }
    s
}

pub fn mde(args: &ExperimentArgs, threads: Option<usize>) -> Result<(), CliError> {
    let mut p = prepare::<MdeScenario>(args)?;
    // make the data path independent of the working directory, so that the
    // sidecar replays from anywhere
    if let MdeScenario::Fit { data, .. } = &mut p.config.scenario {
        if data.is_relative() {
            let joined = p.base_dir.join(&*data);
            *data = std::path::absolute(&joined).unwrap_or(joined);
        }
    }
    with_pool(threads, p.config.threads, || run_mde(&p))
}

fn run_mde(p: &Prepared<MdeScenario>) -> Result<(), CliError> {
    let stem = p.config.stem("mde");
    let method = SmoothingMethod::McShared;
    match &p.config.scenario {
        MdeScenario::Fit {
            data,
            family,
            sigma,
            optimizer,
        } => {
            family.validate()?;
            let opts = mswe_options(
                optimizer,
                estimator(&p.config.estimator, *sigma, p.seed, method),
                p.seed,
            );
            opts.validate()?;
            let cloud = load_point_cloud(data, Some(family.dim))?;
            let fit = fit_mswe(&cloud, family, &opts)?;
            create_dir(&p.out_dir)?;
            write_file(&p.out_dir.join(format!("{stem}.csv")), &trace_csv(&fit))?;
            write_sidecar(&p.out_dir, &stem, &fit, &p.config)?;
        }
        MdeScenario::Rate {
            family,
            theta_star,
            data_spec,
            sigma,
            n_grid,
            reps,
            optimizer,
        } => {
            let opts = mswe_options(
                optimizer,
                estimator(&p.config.estimator, *sigma, p.seed, method),
                p.seed,
            );
            let settings = MsweRateSettings {
                family: family.clone(),
                theta_star: theta_star.clone(),
                data_spec: data_spec.clone(),
                n_grid: n_grid.clone(),
                reps: *reps,
                seed: Seed::new(p.seed),
            };
            let report = mswe_rate_experiment(&settings, &opts)?;
            create_dir(&p.out_dir)?;
            rate_csv(&p.out_dir, &stem, &report)?;
            write_sidecar(&p.out_dir, &stem, &report, &p.config)?;
        }
    }
    Ok(())
}

pub fn concentration(args: &ExperimentArgs, threads: Option<usize>) -> Result<(), CliError> {
    let p = prepare::<ConcentrationScenario>(args)?;
    with_pool(threads, p.config.threads, || run_concentration(&p))
}

fn run_concentration(p: &Prepared<ConcentrationScenario>) -> Result<(), CliError> {
    let stem = p.config.stem("concentration");
    let ConcentrationScenario::Tail {
        spec,
        n,
        sigma,
        eta,
        t_grid,
        t_levels,
        trials,
        reference_size,
    } = &p.config.scenario;
    spec.validate()?;
    let mut grid = t_grid.clone().unwrap_or_default();
    if let Some(levels) = t_levels {
        let diameter = spec.diameter().ok_or_else(|| {
            CliError::User("invalid configuration `scenario.t_levels`: needs a bounded spec".into())
        })?;
        for &l in levels {
            if !(l > 0.0 && l < 1.0) {
                return Err(CliError::User(format!(
                    "invalid configuration `scenario.t_levels`: levels must lie in (0, 1), got {l}"
                )));
            }
            grid.push(tail_t(l, *n, diameter));
        }
    }
    if grid.is_empty() {
        return Err(CliError::User(
            "invalid configuration `scenario.t_grid`: give t_grid or t_levels".into(),
        ));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let settings = ConcentrationSettings {
        spec: spec.clone(),
        n: *n,
        sigma: *sigma,
        eta: *eta,
        t_grid: grid,
        trials: *trials,
        reference_size: *reference_size,
        seed: Seed::new(p.seed),
    };
    let cfg = estimator(
        &p.config.estimator,
        *sigma,
        p.seed,
        SmoothingMethod::McShared,
    );
    let report = concentration_experiment(&settings, &cfg)?;
    create_dir(&p.out_dir)?;
    write_file(&p.out_dir.join(format!("{stem}.csv")), &report.to_csv())?;
    write_sidecar(&p.out_dir, &stem, &report, &p.config)?;
    Ok(())
}

pub fn power(args: &ExperimentArgs, threads: Option<usize>) -> Result<(), CliError> {
    let p = prepare::<PowerScenarioConfig>(args)?;
    with_pool(threads, p.config.threads, || run_power(&p))
}

fn run_power(p: &Prepared<PowerScenarioConfig>) -> Result<(), CliError> {
    let stem = p.config.stem("power");
    let PowerScenarioConfig::LevelPower {
        null_spec,
        alt_spec,
        n,
        m,
        sigma,
        alpha,
        b,
        trials,
    } = &p.config.scenario;
    let scenario = PowerScenario {
        null_spec: null_spec.clone(),
        alt_spec: alt_spec.clone(),
        n: *n,
        m: *m,
        sigma: *sigma,
        alpha: *alpha,
        b: *b,
        trials: *trials,
        seed: Seed::new(p.seed),
    };
    let cfg = estimator(
        &p.config.estimator,
        *sigma,
        p.seed,
        SmoothingMethod::McExact,
    );
    cfg.validate()?;
    let (level, power) = level_power_experiment(&scenario, &cfg)?;
    create_dir(&p.out_dir)?;
    let mut csv = String::from("scenario,trials,rejections,rejection_rate,stderr\n");
    for r in [&level, &power] {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scenario,
            r.trials,
            r.rejections,
            fmt_f64(r.rejection_rate),
            fmt_f64(r.stderr)
        ));
    }
    write_file(&p.out_dir.join(format!("{stem}.csv")), &csv)?;
    let report = json!({
        "scenario": scenario,
        "estimator": cfg,
        "null": level,
        "alternative": power,
    });
    write_sidecar(&p.out_dir, &stem, &report, &p.config)?;
    Ok(())
}
