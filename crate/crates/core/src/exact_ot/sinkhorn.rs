//! Log-domain Sinkhorn iterations for entropically regularized transport.

/// Result of a Sinkhorn run.
#[derive(Debug, Clone)]
pub(crate) struct SinkhornRun {
    /// Transport cost `<pi, C>` of the regularized plan.
    pub cost: f64,
    /// L1 violation of the row marginal at termination.
    pub marginal_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Alternating dual updates on `(f, g)` until the row marginal of the
/// implied plan is within `tol` in L1 (the column marginal is exact after
/// every `g` update).
pub(crate) fn sinkhorn_log(
    a: &[f64],
    b: &[f64],
    cost: &[f64],
    epsilon: f64,
    max_iters: usize,
    tol: f64,
) -> SinkhornRun {
    let (n, m) = (a.len(), b.len());
    let log_a: Vec<f64> = a.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut marginal_error = f64::INFINITY;

    let row_marginal_error = |f: &[f64], g: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let row = &cost[i * m..(i + 1) * m];
                let s: f64 = (0..m)
                    .map(|j| (log_a[i] + log_b[j] + (f[i] + g[j] - row[j]) / epsilon).exp())
                    .sum();
                (s - a[i]).abs()
            })
            .sum()
    };

    while iterations < max_iters {
        for i in 0..n {
            let row = &cost[i * m..(i + 1) * m];
            let lse = log_sum_exp((0..m).map(|j| log_b[j] + (g[j] - row[j]) / epsilon));
            f[i] = -epsilon * lse;
        }
        for j in 0..m {
            let lse = log_sum_exp((0..n).map(|i| log_a[i] + (f[i] - cost[i * m + j]) / epsilon));
            g[j] = -epsilon * lse;
        }
        iterations += 1;
        marginal_error = row_marginal_error(&f, &g);
        if marginal_error <= tol {
            break;
        }
    }

    let mut transport = 0.0;
    for i in 0..n {
        for j in 0..m {
            let c = cost[i * m + j];
            transport += (log_a[i] + log_b[j] + (f[i] + g[j] - c) / epsilon).exp() * c;
        }
    }
    SinkhornRun {
        cost: transport,
        marginal_error,
        iterations,
        converged: marginal_error <= tol,
    }
}
