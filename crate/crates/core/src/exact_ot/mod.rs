//! Exact and entropic solvers for discrete 1-Wasserstein problems with
//! Euclidean ground cost.
//!
//! | solver | inputs | notes |
//! |---|---|---|
//! | [`w1_sorted_1d`] | weighted, `d = 1` | CDF-difference integral |
//! | [`w1_assignment`] | uniform, equal sizes | Jonker-Volgenant |
//! | [`w1_mincost_flow`] | arbitrary weights | network simplex |
//! | [`w1_shared_support`] | two weightings of one support | network simplex on the net flow |
//! | [`w1_sinkhorn`] | arbitrary weights | entropic, upper-biased |
//! | [`w1_bruteforce`] | uniform, `n <= 8` | permutation enumeration (oracle) |

mod assignment;
mod network_simplex;
mod sinkhorn;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwdError};
use crate::measures::{empirical_measure, euclidean, DiscreteMeasure, PointCloud};

/// Largest `n` solved by the dense assignment solver.
pub const ASSIGNMENT_BUDGET: usize = 4096;
/// Largest `n * m` handed to the network simplex.
pub const FLOW_BUDGET: usize = 16 * 1024 * 1024;
/// Largest instance accepted by [`w1_bruteforce`].
pub const BRUTEFORCE_MAX: usize = 8;

const PLAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OtMethod {
    Sorted1d,
    Assignment,
    MinCostFlow,
    Sinkhorn,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

/// A coupling given by its positive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<PlanEntry>,
    /// `sum mass * |x_source - y_target|`.
    pub cost: f64,
}

impl TransportPlan {
    /// Checks positivity, both marginals (within 1e-9) and the recorded cost.
    pub fn check(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        let mut cost = 0.0;
        for e in &self.entries {
            if !(e.mass > 0.0) {
                return Err(SwdError::Solver(format!("plan entry with mass {}", e.mass)));
            }
            if e.source >= a.len() || e.target >= b.len() {
                return Err(SwdError::Solver("plan entry out of range".into()));
            }
            rows[e.source] += e.mass;
            cols[e.target] += e.mass;
            cost += e.mass * euclidean(a.support().point(e.source), b.support().point(e.target));
        }
        for (i, (r, w)) in rows.iter().zip(a.weights()).enumerate() {
            if (r - w).abs() > PLAN_TOL {
                return Err(SwdError::Solver(format!(
                    "row {i} carries {r}, source weight is {w}"
                )));
            }
        }
        for (j, (c, w)) in cols.iter().zip(b.weights()).enumerate() {
            if (c - w).abs() > PLAN_TOL {
                return Err(SwdError::Solver(format!(
                    "column {j} carries {c}, target weight is {w}"
                )));
            }
        }
        if (cost - self.cost).abs() > PLAN_TOL * (1.0 + self.cost) {
            return Err(SwdError::Solver(format!(
                "plan cost {} differs from recomputed {cost}",
                self.cost
            )));
        }
        Ok(())
    }
}

/// A W1 value with the certificate and diagnostics of the solver that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtSolution {
    pub distance: f64,
    pub plan: Option<TransportPlan>,
    pub method: OtMethod,
    /// Pivots, augmentations or Sinkhorn sweeps, depending on the method.
    pub iterations: usize,
    /// Optimality gap; 0 for exact methods, L1 marginal violation for Sinkhorn.
    pub gap: f64,
    pub converged: bool,
}

impl OtSolution {
    fn exact(
        distance: f64,
        plan: Option<TransportPlan>,
        method: OtMethod,
        iterations: usize,
    ) -> Self {
        OtSolution {
            distance: distance.max(0.0),
            plan,
            method,
            iterations,
            gap: 0.0,
            converged: true,
        }
    }
}

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SwdError::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Uniform measures on two clouds of equal dimension.
pub fn empirical_pair(
    a: &PointCloud,
    b: &PointCloud,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    same_dim(a.dim(), b.dim())?;
    Ok((empirical_measure(a)?, empirical_measure(b)?))
}

/// Row-major Euclidean cost matrix between the points of `a` and `b`.
pub fn cost_matrix(a: &PointCloud, b: &PointCloud) -> Vec<f64> {
    let mut c = Vec::with_capacity(a.len() * b.len());
    for p in a.points() {
        c.extend(b.points().map(|q| euclidean(p, q)));
    }
    c
}

/// Exact W1 on the line: the integral of `|F_a - F_b|` over the merged atoms.
pub fn w1_sorted_1d(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<OtSolution> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(SwdError::invalid(format!(
            "sorted 1-D solver needs one-dimensional measures, got d={} and d={}",
            a.dim(),
            b.dim()
        )));
    }
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    atoms.extend(
        a.support()
            .as_slice()
            .iter()
            .zip(a.weights())
            .map(|(x, w)| (*x, *w)),
    );
    atoms.extend(
        b.support()
            .as_slice()
            .iter()
            .zip(b.weights())
            .map(|(x, w)| (*x, -*w)),
    );
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for pair in atoms.windows(2) {
        diff += pair[0].1;
        total += diff.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(OtSolution::exact(total, None, OtMethod::Sorted1d, 0))
}

/// W1 between uniform measures on two equal-size clouds, via linear assignment.
pub fn w1_assignment(a: &PointCloud, b: &PointCloud) -> Result<OtSolution> {
    same_dim(a.dim(), b.dim())?;
    if a.len() != b.len() {
        return Err(SwdError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    let cost = cost_matrix(a, b);
    let perm = assignment::solve(n, &cost);
    let mass = 1.0 / n as f64;
    let entries: Vec<PlanEntry> = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| PlanEntry {
            source: i,
            target: j,
            mass,
        })
        .collect();
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    let distance = total / n as f64;
    Ok(OtSolution::exact(
        distance,
        Some(TransportPlan {
            entries,
            cost: distance,
        }),
        OtMethod::Assignment,
        n,
    ))
}

/// Exact W1 between arbitrary discrete measures by network simplex.
pub fn w1_mincost_flow(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<OtSolution> {
    same_dim(a.dim(), b.dim())?;
    let cost = cost_matrix(a.support(), b.support());
    let flow = network_simplex::solve_transport(a.weights(), b.weights(), &cost)?;
    let plan = TransportPlan {
        entries: flow
            .entries
            .iter()
            .map(|&(i, j, mass)| PlanEntry {
                source: i,
                target: j,
                mass,
            })
            .collect(),
        cost: flow.cost,
    };
    Ok(OtSolution::exact(
        flow.cost,
        Some(plan),
        OtMethod::MinCostFlow,
        flow.pivots,
    ))
}

/// Exact W1 between two weightings `wa`, `wb` of one support.
///
/// Mass shared by both weightings stays put at zero cost, so only the
/// positive and negative parts of `wa - wb` are transported. Plan indices
/// refer to `support`.
pub fn w1_shared_support(support: &PointCloud, wa: &[f64], wb: &[f64]) -> Result<OtSolution> {
    if wa.len() != support.len() || wb.len() != support.len() {
        return Err(SwdError::invalid(
            "weight vectors must match the support size",
        ));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (k, (x, y)) in wa.iter().zip(wb).enumerate() {
        let d = x - y;
        if d > 0.0 {
            pos.push((k, d));
        } else if d < 0.0 {
            neg.push((k, -d));
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Ok(OtSolution::exact(0.0, None, OtMethod::MinCostFlow, 0));
    }
    // equalize the two totals so the residual imbalance is pure rounding
    let sp: f64 = pos.iter().map(|p| p.1).sum();
    let sn: f64 = neg.iter().map(|p| p.1).sum();
    let scale = sp / sn;
    let supply: Vec<f64> = pos.iter().map(|p| p.1).collect();
    let demand: Vec<f64> = neg.iter().map(|p| p.1 * scale).collect();
    let mut cost = Vec::with_capacity(pos.len() * neg.len());
    for &(i, _) in &pos {
        let p = support.point(i);
        cost.extend(neg.iter().map(|&(j, _)| euclidean(p, support.point(j))));
    }
    let flow = network_simplex::solve_transport(&supply, &demand, &cost)?;
    let plan = TransportPlan {
        entries: flow
            .entries
            .iter()
            .map(|&(i, j, mass)| PlanEntry {
                source: pos[i].0,
                target: neg[j].0,
                mass,
            })
            .collect(),
        cost: flow.cost,
    };
    Ok(OtSolution::exact(
        flow.cost,
        Some(plan),
        OtMethod::MinCostFlow,
        flow.pivots,
    ))
}

/// Parameters of the entropic solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            epsilon: 0.01,
            max_iters: 10_000,
            tol: 1e-9,
        }
    }
}

/// Transport cost of the entropic optimal plan: an upper-biased
/// approximation of W1. `gap` holds the final L1 marginal violation and
/// `converged` is false when `max_iters` ran out first.
pub fn w1_sinkhorn(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    params: &SinkhornParams,
) -> Result<OtSolution> {
    same_dim(a.dim(), b.dim())?;
    if !(params.epsilon > 0.0 && params.epsilon.is_finite()) {
        return Err(SwdError::invalid(format!(
            "sinkhorn epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    if !(params.tol > 0.0) {
        return Err(SwdError::invalid("sinkhorn tolerance must be positive"));
    }
    let cost = cost_matrix(a.support(), b.support());
    let run = sinkhorn::sinkhorn_log(
        a.weights(),
        b.weights(),
        &cost,
        params.epsilon,
        params.max_iters.max(1),
        params.tol,
    );
    Ok(OtSolution {
        distance: run.cost.max(0.0),
        plan: None,
        method: OtMethod::Sinkhorn,
        iterations: run.iterations,
        gap: run.marginal_error,
        converged: run.converged,
    })
}

/// Minimum over all permutations; the test oracle for the exact solvers.
pub fn w1_bruteforce(a: &PointCloud, b: &PointCloud) -> Result<OtSolution> {
    same_dim(a.dim(), b.dim())?;
    if a.len() != b.len() {
        return Err(SwdError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    if n > BRUTEFORCE_MAX {
        return Err(SwdError::invalid(format!(
            "brute force is limited to n <= {BRUTEFORCE_MAX}, got {n}"
        )));
    }
    let cost = cost_matrix(a, b);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    let mut best_perm = perm.clone();
    // Heap's algorithm
    let mut c = vec![0usize; n];
    let eval = |p: &[usize]| {
        p.iter()
            .enumerate()
            .map(|(i, &j)| cost[i * n + j])
            .sum::<f64>()
    };
    best = best.min(eval(&perm));
    let mut count = 1;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let v = eval(&perm);
            if v < best {
                best = v;
                best_perm.copy_from_slice(&perm);
            }
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let mass = 1.0 / n as f64;
    let distance = best / n as f64;
    let plan = TransportPlan {
        entries: best_perm
            .iter()
            .enumerate()
            .map(|(i, &j)| PlanEntry {
                source: i,
                target: j,
                mass,
            })
            .collect(),
        cost: distance,
    };
    Ok(OtSolution::exact(
        distance,
        Some(plan),
        OtMethod::BruteForce,
        count,
    ))
}
