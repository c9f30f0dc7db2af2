//! Minimum smooth-Wasserstein estimation of parametric Gaussian families.
//!
//! The model law `Q_theta` is represented by `m` points obtained by
//! transforming one frozen standard-normal base sample, and the smoothing
//! noise is frozen as well. The objective `theta -> W(P_n, Q_theta)` is
//! then a deterministic function that derivative-free search can minimize.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwdError};
use crate::experiments::{Center, RateMetadata, RateReport};
use crate::measures::{sample, standard_normal_block, DistributionSpec, PointCloud};
use crate::rng::Seed;
use crate::smooth::{swd_estimate, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// `theta = mu in R^d`, `Q_theta = N(mu, I_d)`.
    GaussianLocation,
    /// `theta = (mu, s)`, `Q_theta = N(mu, s^2 I_d)`.
    GaussianLocationScale,
}

/// A parametric family with a compact parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricFamily {
    pub kind: FamilyKind,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParametricFamily {
    /// Location family with the box `[-bound, bound]^d`.
    pub fn location(dim: usize, bound: f64) -> Self {
        ParametricFamily {
            kind: FamilyKind::GaussianLocation,
            dim,
            lower: vec![-bound; dim],
            upper: vec![bound; dim],
        }
    }

    /// Location-scale family with `mu in [-bound, bound]^d` and `s in [s_min, s_max]`.
    pub fn location_scale(dim: usize, bound: f64, s_min: f64, s_max: f64) -> Self {
        let mut lower = vec![-bound; dim];
        let mut upper = vec![bound; dim];
        lower.push(s_min);
        upper.push(s_max);
        ParametricFamily {
            kind: FamilyKind::GaussianLocationScale,
            dim,
            lower,
            upper,
        }
    }

    pub fn n_params(&self) -> usize {
        match self.kind {
            FamilyKind::GaussianLocation => self.dim,
            FamilyKind::GaussianLocationScale => self.dim + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(SwdError::config("family.dim", "dimension must be positive"));
        }
        let k = self.n_params();
        if self.lower.len() != k || self.upper.len() != k {
            return Err(SwdError::config(
                "family.lower",
                format!("parameter box needs {k} bounds per side"),
            ));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SwdError::config(
                    "family.lower",
                    format!("bounds of parameter {i} must be finite with lower < upper"),
                ));
            }
        }
        if self.kind == FamilyKind::GaussianLocationScale && self.lower[self.dim] <= 0.0 {
            return Err(SwdError::config(
                "family.lower",
                "the scale bound must be positive",
            ));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.n_params()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (lo, hi))| lo <= t && t <= hi)
    }

    fn project(&self, theta: &mut [f64]) {
        for (t, (lo, hi)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *t = t.clamp(*lo, *hi);
        }
    }

    /// The law `Q_theta` as a sampling spec.
    pub fn model_spec(&self, theta: &[f64]) -> Result<DistributionSpec> {
        self.check(theta)?;
        let d = self.dim;
        Ok(match self.kind {
            FamilyKind::GaussianLocation => {
                DistributionSpec::gaussian(theta.to_vec(), vec![1.0; d])
            }
            FamilyKind::GaussianLocationScale => {
                let s = theta[d];
                DistributionSpec::gaussian(theta[..d].to_vec(), vec![s * s; d])
            }
        })
    }

    /// Transforms a standard-normal base sample by `theta`.
    pub fn transform(&self, theta: &[f64], base: &PointCloud) -> Result<PointCloud> {
        self.check(theta)?;
        if base.dim() != self.dim {
            return Err(SwdError::DimensionMismatch {
                expected: self.dim,
                found: base.dim(),
            });
        }
        let d = self.dim;
        let scale = match self.kind {
            FamilyKind::GaussianLocation => 1.0,
            FamilyKind::GaussianLocationScale => theta[d],
        };
        let data = base
            .as_slice()
            .chunks_exact(d)
            .flat_map(|z| {
                z.iter()
                    .zip(&theta[..d])
                    .map(move |(zi, mu)| mu + scale * zi)
            })
            .collect();
        PointCloud::new(data, d)
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if !self.contains(theta) {
            return Err(SwdError::invalid(format!(
                "theta {theta:?} lies outside the parameter box"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    NelderMead,
    CoordinateSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsweOptions {
    /// Model sample size; `None` means `model_factor * n`.
    pub model_size: Option<usize>,
    pub model_factor: usize,
    pub smoothing: SmoothingConfig,
    pub optimizer: Optimizer,
    pub starts: usize,
    /// Stop when the simplex (or pattern step) is smaller than this.
    pub tolerance: f64,
    pub max_evaluations: usize,
    /// Drives the frozen base sample, the frozen noise and the start points.
    pub seed: Seed,
}

impl Default for MsweOptions {
    fn default() -> Self {
        MsweOptions {
            model_size: None,
            model_factor: 4,
            smoothing: SmoothingConfig {
                repeats: 1,
                ..SmoothingConfig::default()
            },
            optimizer: Optimizer::NelderMead,
            starts: 3,
            tolerance: 1e-5,
            max_evaluations: 2000,
            seed: Seed::with_stream(0, "mswe"),
        }
    }
}

impl MsweOptions {
    pub fn validate(&self) -> Result<()> {
        if self.model_size == Some(0) {
            return Err(SwdError::config(
                "model_size",
                "model_size must be positive",
            ));
        }
        if self.model_factor == 0 {
            return Err(SwdError::config(
                "model_factor",
                "model_factor must be positive",
            ));
        }
        if self.starts == 0 {
            return Err(SwdError::config("starts", "need at least one start"));
        }
        if !(self.tolerance > 0.0) {
            return Err(SwdError::config("tolerance", "tolerance must be positive"));
        }
        if self.max_evaluations == 0 {
            return Err(SwdError::config(
                "max_evaluations",
                "max_evaluations must be positive",
            ));
        }
        self.smoothing.validate()
    }

    pub fn model_size_for(&self, n: usize) -> usize {
        self.model_size.unwrap_or(self.model_factor * n)
    }
}

/// Frozen standard-normal base sample of the model.
pub fn frozen_base(m: usize, dim: usize, seed: &Seed) -> PointCloud {
    PointCloud::new(standard_normal_block(m, dim, &seed.child("base")), dim)
        .expect("normal draws are finite")
}

/// The objective with its frozen pieces prepared once.
pub struct Objective<'a> {
    data: &'a PointCloud,
    family: &'a ParametricFamily,
    base: PointCloud,
    smoothing: SmoothingConfig,
}

impl<'a> Objective<'a> {
    pub fn new(
        data: &'a PointCloud,
        family: &'a ParametricFamily,
        opts: &MsweOptions,
    ) -> Result<Self> {
        family.validate()?;
        opts.validate()?;
        if data.dim() != family.dim {
            return Err(SwdError::DimensionMismatch {
                expected: family.dim,
                found: data.dim(),
            });
        }
        let m = opts.model_size_for(data.len());
        Ok(Objective {
            data,
            family,
            base: frozen_base(m, family.dim, &opts.seed),
            smoothing: opts.smoothing.with_seed(opts.seed.child("noise")),
        })
    }

    /// Objective over a caller-supplied base sample, for custom model
    /// representations. `smoothing` is used as given, noise seed included.
    pub fn with_base(
        data: &'a PointCloud,
        family: &'a ParametricFamily,
        base: PointCloud,
        smoothing: SmoothingConfig,
    ) -> Result<Self> {
        family.validate()?;
        smoothing.validate()?;
        if data.dim() != family.dim || base.dim() != family.dim {
            return Err(SwdError::DimensionMismatch {
                expected: family.dim,
                found: if data.dim() != family.dim {
                    data.dim()
                } else {
                    base.dim()
                },
            });
        }
        Ok(Objective {
            data,
            family,
            base,
            smoothing,
        })
    }

    pub fn base(&self) -> &PointCloud {
        &self.base
    }

    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        let model = self.family.transform(theta, &self.base)?;
        Ok(swd_estimate(self.data, &model, &self.smoothing)?.value)
    }
}

/// `W(P_n, Q_theta^(m))` with frozen base sample and frozen noise.
pub fn mswe_objective(
    theta: &[f64],
    data: &PointCloud,
    family: &ParametricFamily,
    opts: &MsweOptions,
) -> Result<f64> {
    Objective::new(data, family, opts)?.eval(theta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub start: usize,
    pub theta: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: ParametricFamily,
    pub theta_hat: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub seed: Seed,
    pub sigma: f64,
    pub m: usize,
    pub n: usize,
    /// Every evaluation of every start, in order; not part of the JSON form.
    #[serde(skip)]
    pub trace: Vec<TraceEntry>,
}

struct Run {
    theta: Vec<f64>,
    value: f64,
    evaluations: usize,
    converged: bool,
    trace: Vec<TraceEntry>,
}

struct Counted<'o, 'a> {
    objective: &'o Objective<'a>,
    start: usize,
    evaluations: usize,
    trace: Vec<TraceEntry>,
}

impl Counted<'_, '_> {
    fn eval(&mut self, theta: &[f64]) -> Result<f64> {
        let value = self.objective.eval(theta)?;
        self.evaluations += 1;
        self.trace.push(TraceEntry {
            start: self.start,
            theta: theta.to_vec(),
            value,
        });
        Ok(value)
    }
}

fn simplex_diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(v, _)| {
            v.iter()
                .zip(best)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Nelder-Mead with every trial point projected onto the box.
fn nelder_mead(
    f: &mut Counted,
    family: &ParametricFamily,
    x0: Vec<f64>,
    tol: f64,
    max_evals: usize,
) -> Result<Run> {
    let k = x0.len();
    let mut simplex = Vec::with_capacity(k + 1);
    let v0 = f.eval(&x0)?;
    simplex.push((x0.clone(), v0));
    for i in 0..k {
        let width = family.upper[i] - family.lower[i];
        let step = 0.1 * width;
        let mut v = x0.clone();
        v[i] = if v[i] + step <= family.upper[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        let val = f.eval(&v)?;
        simplex.push((v, val));
    }
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex_diameter(&simplex) < tol {
            converged = true;
            break;
        }
        if f.evaluations >= max_evals {
            break;
        }
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|(v, _)| v[j]).sum::<f64>() / k as f64)
            .collect();
        let worst = simplex[k].clone();
        let trial = |t: f64, f: &mut Counted| -> Result<(Vec<f64>, f64)> {
            let mut p = combine(&centroid, &worst.0, t);
            family.project(&mut p);
            let v = f.eval(&p)?;
            Ok((p, v))
        };
        let reflected = trial(-1.0, f)?;
        if reflected.1 < simplex[0].1 {
            let expanded = trial(-2.0, f)?;
            simplex[k] = if expanded.1 < reflected.1 {
                expanded
            } else {
                reflected
            };
            continue;
        }
        if reflected.1 < simplex[k - 1].1 {
            simplex[k] = reflected;
            continue;
        }
        let contracted = if reflected.1 < worst.1 {
            trial(-0.5, f)?
        } else {
            trial(0.5, f)?
        };
        if contracted.1 < worst.1.min(reflected.1) {
            simplex[k] = contracted;
            continue;
        }
        let best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let p = combine(&best, &entry.0, 0.5);
            let v = f.eval(&p)?;
            *entry = (p, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (theta, value) = simplex.swap_remove(0);
    Ok(Run {
        theta,
        value,
        evaluations: f.evaluations,
        converged,
        trace: std::mem::take(&mut f.trace),
    })
}

/// Compass search: try `+-step` along each coordinate, halve on failure.
fn coordinate_search(
    f: &mut Counted,
    family: &ParametricFamily,
    x0: Vec<f64>,
    tol: f64,
    max_evals: usize,
) -> Result<Run> {
    let k = x0.len();
    let mut x = x0;
    let mut fx = f.eval(&x)?;
    let mut step = 0.1
        * (0..k)
            .map(|i| family.upper[i] - family.lower[i])
            .fold(f64::INFINITY, f64::min);
    let mut converged = false;
    while f.evaluations < max_evals {
        if step < tol {
            converged = true;
            break;
        }
        let mut improved = false;
        for i in 0..k {
            for dir in [1.0, -1.0] {
                let mut p = x.clone();
                p[i] += dir * step;
                family.project(&mut p);
                if p == x {
                    continue;
                }
                let v = f.eval(&p)?;
                if v < fx {
                    x = p;
                    fx = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(Run {
        theta: x,
        value: fx,
        evaluations: f.evaluations,
        converged,
        trace: std::mem::take(&mut f.trace),
    })
}

/// Start points drawn uniformly from the box.
fn start_points(family: &ParametricFamily, starts: usize, seed: &Seed) -> Vec<Vec<f64>> {
    let mut rng = seed.child("starts").rng();
    (0..starts)
        .map(|_| {
            family
                .lower
                .iter()
                .zip(&family.upper)
                .map(|(lo, hi)| rng.random_range(*lo..*hi))
                .collect()
        })
        .collect()
}

fn minimize(
    objective: &Objective,
    family: &ParametricFamily,
    opts: &MsweOptions,
    starts: Vec<Vec<f64>>,
) -> Result<FitResult> {
    let runs = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let mut counted = Counted {
                objective,
                start: i,
                evaluations: 0,
                trace: Vec::new(),
            };
            match opts.optimizer {
                Optimizer::NelderMead => nelder_mead(
                    &mut counted,
                    family,
                    x0,
                    opts.tolerance,
                    opts.max_evaluations,
                ),
                Optimizer::CoordinateSearch => coordinate_search(
                    &mut counted,
                    family,
                    x0,
                    opts.tolerance,
                    opts.max_evaluations,
                ),
            }
        })
        .collect::<Result<Vec<Run>>>()?;
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let trace = runs.iter().flat_map(|r| r.trace.iter().cloned()).collect();
    // first start wins ties, so the choice is independent of scheduling
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start");
    Ok(FitResult {
        family: family.clone(),
        theta_hat: best.theta,
        objective: best.value,
        evaluations,
        converged: best.converged,
        seed: opts.seed.clone(),
        sigma: opts.smoothing.sigma,
        m: objective.base.len(),
        n: objective.data.len(),
        trace,
    })
}

/// Multi-start derivative-free minimization of [`mswe_objective`] over the box.
pub fn fit_mswe(
    data: &PointCloud,
    family: &ParametricFamily,
    opts: &MsweOptions,
) -> Result<FitResult> {
    let objective = Objective::new(data, family, opts)?;
    minimize(
        &objective,
        family,
        opts,
        start_points(family, opts.starts, &opts.seed),
    )
}

/// As [`fit_mswe`] but from caller-chosen start points (projected onto the box).
pub fn fit_mswe_from(
    data: &PointCloud,
    family: &ParametricFamily,
    opts: &MsweOptions,
    starts: &[Vec<f64>],
) -> Result<FitResult> {
    if starts.is_empty() {
        return Err(SwdError::config("starts", "need at least one start"));
    }
    let objective = Objective::new(data, family, opts)?;
    let mut points = starts.to_vec();
    for p in &mut points {
        if p.len() != family.n_params() {
            return Err(SwdError::invalid("start point has the wrong length"));
        }
        family.project(p);
    }
    minimize(&objective, family, opts, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsweRateSettings {
    pub family: ParametricFamily,
    pub theta_star: Vec<f64>,
    /// Law of the data; `None` means the model at `theta_star`.
    pub data_spec: Option<DistributionSpec>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: Seed,
}

/// Median over repetitions of `|theta_hat - theta_star|` for each n, with
/// the log-log slope against n. Repetition `r` at size `n` draws its data
/// and its frozen model pieces from `seed/n<n>/<r>`.
pub fn mswe_rate_experiment(settings: &MsweRateSettings, opts: &MsweOptions) -> Result<RateReport> {
    let st = settings;
    st.family.validate()?;
    opts.validate()?;
    if st.n_grid.len() < 3 {
        return Err(SwdError::config("n_grid", "n_grid needs ≥ 3 points"));
    }
    if st.n_grid[0] == 0 || st.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SwdError::config(
            "n_grid",
            "n_grid must be positive and strictly increasing",
        ));
    }
    if st.reps < 3 {
        return Err(SwdError::config("reps", "reps must be at least 3"));
    }
    let data_spec = match &st.data_spec {
        Some(s) => s.clone(),
        None => st.family.model_spec(&st.theta_star)?,
    };
    data_spec.validate()?;
    let errors = (0..st.n_grid.len() * st.reps)
        .into_par_iter()
        .map(|t| {
            let (g, r) = (t / st.reps, t % st.reps);
            let n = st.n_grid[g];
            let s = st.seed.child(&format!("n{n}")).index(r);
            let data = sample(&data_spec, n, &s.child("data"))?;
            let fit_opts = MsweOptions {
                seed: s.child("fit"),
                ..opts.clone()
            };
            let fit = fit_mswe(&data, &st.family, &fit_opts)?;
            let err = fit
                .theta_hat
                .iter()
                .zip(&st.theta_star)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(err)
        })
        .collect::<Result<Vec<f64>>>()?;
    let values: Vec<Vec<f64>> = errors.chunks(st.reps).map(|c| c.to_vec()).collect();
    let mut meta = RateMetadata::new("mswe-rate", &st.seed);
    meta.spec = Some(data_spec);
    meta.sigma = Some(opts.smoothing.sigma);
    meta.estimator = Some(opts.smoothing.clone());
    RateReport::from_values(
        crate::experiments::Axis::N,
        st.n_grid.iter().map(|&n| n as f64).collect(),
        &values,
        Center::Median,
        meta,
    )
}
