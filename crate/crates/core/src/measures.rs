//! Point clouds, discrete measures and the synthetic distribution families.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwdError};
use crate::rng::{Seed, StreamRng};

/// `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(SwdError::invalid("point dimension must be at least 1"));
        }
        if data.is_empty() {
            return Err(SwdError::invalid("point cloud is empty"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(SwdError::invalid(format!(
                "{} coordinates do not split into rows of width {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(SwdError::invalid(format!(
                "non-finite coordinate at row {}, column {}",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        Ok(PointCloud { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| SwdError::invalid("point cloud is empty"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(SwdError::invalid(format!(
                    "inconsistent row width at row {}: expected {dim}, found {}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        PointCloud::new(data, dim)
    }

    /// One-dimensional cloud from scalar values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        PointCloud::new(values.to_vec(), 1)
    }

    /// `n` copies of `location`.
    pub fn repeated(location: &[f64], n: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(n * location.len());
        for _ in 0..n {
            data.extend_from_slice(location);
        }
        PointCloud::new(data, location.len())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Every point shifted by `v`.
    pub fn translated(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim {
            return Err(SwdError::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let data = self
            .data
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(v).map(|(x, s)| x + s))
            .collect();
        PointCloud::new(data, self.dim)
    }

    /// Points at `indices`, in order, repetitions allowed.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        PointCloud {
            data,
            dim: self.dim,
        }
    }

    /// Concatenation of `self` and `other`.
    pub fn concat(&self, other: &PointCloud) -> Result<Self> {
        if other.dim != self.dim {
            return Err(SwdError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(PointCloud {
            data,
            dim: self.dim,
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (acc, x) in m.iter_mut().zip(p) {
                *acc += x;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }

    pub(crate) fn from_parts_unchecked(data: Vec<f64>, dim: usize) -> Self {
        debug_assert!(dim > 0 && data.len().is_multiple_of(dim));
        PointCloud { data, dim }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Weighted atoms on a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    support: PointCloud,
    weights: Vec<f64>,
}

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(support: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != support.len() {
            return Err(SwdError::invalid(format!(
                "{} weights for {} support points",
                weights.len(),
                support.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(SwdError::invalid(format!(
                "weight {w} is not a nonnegative number"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(SwdError::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(DiscreteMeasure { support, weights })
    }

    /// Rescales nonnegative `raw` weights to unit mass.
    pub fn normalized(support: PointCloud, raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SwdError::invalid("weights must be nonnegative numbers"));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(SwdError::invalid("weights have zero total mass"));
        }
        DiscreteMeasure::new(support, raw.iter().map(|w| w / total).collect())
    }

    pub fn support(&self) -> &PointCloud {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Uniform weights `1/n` on the points of `cloud`; duplicates stay separate atoms.
pub fn empirical_measure(cloud: &PointCloud) -> Result<DiscreteMeasure> {
    if cloud.is_empty() {
        return Err(SwdError::invalid("empirical measure of an empty cloud"));
    }
    let n = cloud.len();
    Ok(DiscreteMeasure {
        support: cloud.clone(),
        weights: vec![1.0 / n as f64; n],
    })
}

/// Reads a CSV point file: one point per row, no header or a `#` header line.
pub fn load_point_cloud(path: &Path, expected_dim: Option<usize>) -> Result<PointCloud> {
    let parse_err = |reason: String| SwdError::Parse {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|source| SwdError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut data = Vec::new();
    let mut dim = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let row = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(parse_err(format!(
                    "inconsistent row width at row {row}: expected {d} fields, found {}",
                    record.len()
                )))
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                parse_err(format!(
                    "non-numeric field {field:?} at row {row}, column {}",
                    col + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(parse_err(format!(
                    "non-finite value at row {row}, column {}",
                    col + 1
                )));
            }
            data.push(value);
        }
    }
    let dim = dim.ok_or_else(|| parse_err("file contains no points".into()))?;
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(SwdError::DimensionMismatch {
                expected,
                found: dim,
            });
        }
    }
    PointCloud::new(data, dim)
}

/// Writes `cloud` in the format read by [`load_point_cloud`].
pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for p in cloud.points() {
        let row: Vec<String> = p.iter().map(|x| crate::report::fmt_f64(*x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| SwdError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One weighted component of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub spec: DistributionSpec,
}

/// The synthetic laws used by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DistributionSpec {
    /// `N(mean, diag(var))`.
    Gaussian {
        mean: Vec<f64>,
        var: Vec<f64>,
    },
    /// Uniform on the cube `center + [-side/2, side/2]^d`.
    UniformCube {
        side: f64,
        center: Vec<f64>,
    },
    PointMass {
        location: Vec<f64>,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    /// `offset + F z` with `z` drawn from `base` on `R^s` and `F` a seeded
    /// orthonormal `d x s` frame.
    AffineEmbedded {
        intrinsic_dim: usize,
        ambient_dim: usize,
        base: Box<DistributionSpec>,
        offset: Vec<f64>,
        frame_seed: u64,
    },
}

impl DistributionSpec {
    pub fn standard_gaussian(dim: usize) -> Self {
        DistributionSpec::Gaussian {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Self {
        DistributionSpec::Gaussian { mean, var }
    }

    /// Uniform on `[0, side]^dim`.
    pub fn unit_cube(dim: usize, side: f64) -> Self {
        DistributionSpec::UniformCube {
            side,
            center: vec![side / 2.0; dim],
        }
    }

    pub fn point_mass(location: Vec<f64>) -> Self {
        DistributionSpec::PointMass { location }
    }

    /// Standard Gaussian on a random `s`-dimensional affine subspace of `R^d`
    /// through the origin.
    pub fn embedded_gaussian(s: usize, d: usize, frame_seed: u64) -> Self {
        DistributionSpec::AffineEmbedded {
            intrinsic_dim: s,
            ambient_dim: d,
            base: Box::new(DistributionSpec::standard_gaussian(s)),
            offset: vec![0.0; d],
            frame_seed,
        }
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::Gaussian { mean, .. } => mean.len(),
            DistributionSpec::UniformCube { center, .. } => center.len(),
            DistributionSpec::PointMass { location } => location.len(),
            DistributionSpec::Mixture { components } => {
                components.first().map_or(0, |c| c.spec.dim())
            }
            DistributionSpec::AffineEmbedded { ambient_dim, .. } => *ambient_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SwdError::InvalidSpec(msg));
        match self {
            DistributionSpec::Gaussian { mean, var } => {
                if mean.is_empty() {
                    return bad("gaussian mean must have at least one coordinate".into());
                }
                if var.len() != mean.len() {
                    return bad(format!(
                        "gaussian var has {} entries, mean has {}",
                        var.len(),
                        mean.len()
                    ));
                }
                if mean.iter().any(|x| !x.is_finite()) {
                    return bad("gaussian mean must be finite".into());
                }
                if var.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("gaussian variances must be finite and nonnegative".into());
                }
            }
            DistributionSpec::UniformCube { side, center } => {
                if center.is_empty() {
                    return bad("uniform-cube center must have at least one coordinate".into());
                }
                if !(side.is_finite() && *side > 0.0) {
                    return bad(format!("uniform-cube side must be positive, got {side}"));
                }
                if center.iter().any(|x| !x.is_finite()) {
                    return bad("uniform-cube center must be finite".into());
                }
            }
            DistributionSpec::PointMass { location } => {
                if location.is_empty() || location.iter().any(|x| !x.is_finite()) {
                    return bad("point-mass location must be a finite nonempty vector".into());
                }
            }
            DistributionSpec::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let dim = components[0].spec.dim();
                let mut total = 0.0;
                for (i, c) in components.iter().enumerate() {
                    c.spec.validate()?;
                    if c.spec.dim() != dim {
                        return bad(format!(
                            "mixture component {i} has dimension {}, expected {dim}",
                            c.spec.dim()
                        ));
                    }
                    if !(c.weight.is_finite() && c.weight >= 0.0) {
                        return bad(format!("mixture weight {} is negative", c.weight));
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return bad(format!("mixture weights sum to {total}, not 1"));
                }
            }
            DistributionSpec::AffineEmbedded {
                intrinsic_dim,
                ambient_dim,
                base,
                offset,
                ..
            } => {
                if *intrinsic_dim < 1 || intrinsic_dim > ambient_dim {
                    return bad(format!(
                        "affine-embedded needs 1 <= s <= d, got s={intrinsic_dim}, d={ambient_dim}"
                    ));
                }
                base.validate()?;
                if base.dim() != *intrinsic_dim {
                    return bad(format!(
                        "affine-embedded base has dimension {}, expected {intrinsic_dim}",
                        base.dim()
                    ));
                }
                if offset.len() != *ambient_dim || offset.iter().any(|x| !x.is_finite()) {
                    return bad(format!(
                        "affine-embedded offset must be a finite vector of length {ambient_dim}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Diameter of the support when it is bounded.
    pub fn diameter(&self) -> Option<f64> {
        match self {
            DistributionSpec::Gaussian { var, .. } => var.iter().all(|v| *v == 0.0).then_some(0.0),
            DistributionSpec::UniformCube { side, center } => {
                Some(side * (center.len() as f64).sqrt())
            }
            DistributionSpec::PointMass { .. } => Some(0.0),
            DistributionSpec::Mixture { components } => {
                let boxes: Option<Vec<_>> = components
                    .iter()
                    .filter(|c| c.weight > 0.0)
                    .map(|c| c.spec.bounding_box())
                    .collect();
                let boxes = boxes?;
                let dim = self.dim();
                let mut lo = vec![f64::INFINITY; dim];
                let mut hi = vec![f64::NEG_INFINITY; dim];
                for (l, h) in &boxes {
                    for k in 0..dim {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
                Some(euclidean(&lo, &hi))
            }
            DistributionSpec::AffineEmbedded { base, .. } => base.diameter(),
        }
    }

    fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            DistributionSpec::UniformCube { side, center } => Some((
                center.iter().map(|c| c - side / 2.0).collect(),
                center.iter().map(|c| c + side / 2.0).collect(),
            )),
            DistributionSpec::PointMass { location } => Some((location.clone(), location.clone())),
            DistributionSpec::Gaussian { mean, var } if var.iter().all(|v| *v == 0.0) => {
                Some((mean.clone(), mean.clone()))
            }
            _ => None,
        }
    }

    /// The orthonormal `d x s` frame of an affine-embedded spec (row-major).
    pub fn frame(&self) -> Option<Vec<f64>> {
        match self {
            DistributionSpec::AffineEmbedded {
                intrinsic_dim,
                ambient_dim,
                frame_seed,
                ..
            } => Some(orthonormal_frame(
                *ambient_dim,
                *intrinsic_dim,
                &Seed::new(*frame_seed),
            )),
            _ => None,
        }
    }
}

/// QR orthonormalization (Gram-Schmidt, two passes) of a seeded standard
/// Gaussian `d x s` matrix. Returned row-major.
pub fn orthonormal_frame(d: usize, s: usize, seed: &Seed) -> Vec<f64> {
    let mut rng = seed.child("frame").rng();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(s);
    while cols.len() < s {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a draw (numerically) inside the span is redrawn
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
    }
    let mut frame = vec![0.0; d * s];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            frame[i * s + j] = c[i];
        }
    }
    frame
}

/// A spec with precomputed frames and mixture tables, ready to draw from.
enum Sampler {
    Gaussian {
        mean: Vec<f64>,
        sd: Vec<f64>,
    },
    Cube {
        lo: Vec<f64>,
        side: f64,
    },
    Point(Vec<f64>),
    Mixture {
        cumulative: Vec<f64>,
        parts: Vec<Sampler>,
    },
    Affine {
        s: usize,
        frame: Vec<f64>,
        offset: Vec<f64>,
        base: Box<Sampler>,
    },
}

impl Sampler {
    fn compile(spec: &DistributionSpec) -> Sampler {
        match spec {
            DistributionSpec::Gaussian { mean, var } => Sampler::Gaussian {
                mean: mean.clone(),
                sd: var.iter().map(|v| v.sqrt()).collect(),
            },
            DistributionSpec::UniformCube { side, center } => Sampler::Cube {
                lo: center.iter().map(|c| c - side / 2.0).collect(),
                side: *side,
            },
            DistributionSpec::PointMass { location } => Sampler::Point(location.clone()),
            DistributionSpec::Mixture { components } => {
                let mut acc = 0.0;
                let cumulative = components
                    .iter()
                    .map(|c| {
                        acc += c.weight;
                        acc
                    })
                    .collect();
                Sampler::Mixture {
                    cumulative,
                    parts: components
                        .iter()
                        .map(|c| Sampler::compile(&c.spec))
                        .collect(),
                }
            }
            DistributionSpec::AffineEmbedded {
                intrinsic_dim,
                base,
                offset,
                ..
            } => Sampler::Affine {
                s: *intrinsic_dim,
                frame: spec.frame().expect("affine spec has a frame"),
                offset: offset.clone(),
                base: Box::new(Sampler::compile(base)),
            },
        }
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            Sampler::Gaussian { mean, sd } => {
                for ((o, m), s) in out.iter_mut().zip(mean).zip(sd) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + s * z;
                }
            }
            Sampler::Cube { lo, side } => {
                for (o, l) in out.iter_mut().zip(lo) {
                    *o = l + side * rng.random::<f64>();
                }
            }
            Sampler::Point(loc) => out.copy_from_slice(loc),
            Sampler::Mixture { cumulative, parts } => {
                let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
                let k = cumulative
                    .iter()
                    .position(|c| u < *c)
                    .unwrap_or(parts.len() - 1);
                parts[k].draw(rng, out);
            }
            Sampler::Affine {
                s,
                frame,
                offset,
                base,
            } => {
                let mut z = vec![0.0; *s];
                base.draw(rng, &mut z);
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &frame[i * s..(i + 1) * s];
                    *o = offset[i] + row.iter().zip(&z).map(|(f, zj)| f * zj).sum::<f64>();
                }
            }
        }
    }
}

/// `n` i.i.d. draws from `spec`, deterministic in `(spec, n, seed)`.
pub fn sample(spec: &DistributionSpec, n: usize, seed: &Seed) -> Result<PointCloud> {
    if n == 0 {
        return Err(SwdError::invalid("sample size must be at least 1"));
    }
    spec.validate()?;
    let dim = spec.dim();
    let sampler = Sampler::compile(spec);
    let mut rng = seed.rng();
    let mut data = vec![0.0; n * dim];
    for row in data.chunks_exact_mut(dim) {
        sampler.draw(&mut rng, row);
    }
    Ok(PointCloud::from_parts_unchecked(data, dim))
}

/// Standard normal draws, `n x dim`, from `seed`.
pub(crate) fn standard_normal_block(n: usize, dim: usize, seed: &Seed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..n * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}
