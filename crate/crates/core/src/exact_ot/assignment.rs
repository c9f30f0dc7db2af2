//! Dense linear assignment in the Jonker-Volgenant style: column reduction
//! with reduction transfer, then Dijkstra-style shortest augmenting paths
//! for the rows left free. (Augmenting row reduction is skipped: on
//! real-valued Euclidean costs it stalls on near-ties and costs more than
//! it saves.)

/// Row-major square cost matrix view.
struct Costs<'a> {
    n: usize,
    c: &'a [f64],
}

impl Costs<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.n + j]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.c[i * self.n..(i + 1) * self.n]
    }
}

const FREE: usize = usize::MAX;

/// Returns `row_to_col`, the optimal permutation for the `n x n` cost matrix.
pub(crate) fn solve(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let c = Costs { n, c: cost };
    let mut x = vec![FREE; n]; // row -> col
    let mut y = vec![FREE; n]; // col -> row
    let mut v = vec![0.0; n];
    let mut free_rows = Vec::with_capacity(n);

    column_reduction(&c, &mut x, &mut y, &mut v, &mut free_rows);
    if !free_rows.is_empty() {
        augment(&c, &mut x, &mut y, &mut v, &free_rows);
    }
    x
}

fn column_reduction(
    c: &Costs,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
    free_rows: &mut Vec<usize>,
) {
    let n = c.n;
    v.iter_mut().for_each(|vj| *vj = f64::INFINITY);
    y.iter_mut().for_each(|yj| *yj = 0);
    for i in 0..n {
        for (j, &cij) in c.row(i).iter().enumerate() {
            if cij < v[j] {
                v[j] = cij;
                y[j] = i;
            }
        }
    }
    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = y[j];
        if x[i] == FREE {
            x[i] = j;
        } else {
            unique[i] = false;
            y[j] = FREE;
        }
    }
    free_rows.clear();
    for i in 0..n {
        if x[i] == FREE {
            free_rows.push(i);
        } else if unique[i] {
            // reduction transfer
            let j = x[i];
            let mut min = f64::INFINITY;
            for (j2, &cij) in c.row(i).iter().enumerate() {
                if j2 != j {
                    min = min.min(cij - v[j2]);
                }
            }
            v[j] -= min;
        }
    }
}

/// Moves the columns attaining the minimum of `d` over `cols[lo..]` to the
/// front of that range; returns the end of the minimal block.
// `hi` grows inside the loop on purpose: the range was fixed at entry.
#[allow(clippy::mut_range_bound)]
fn find_min_block(lo: usize, d: &[f64], cols: &mut [usize]) -> usize {
    let n = cols.len();
    let mut hi = lo + 1;
    let mut mind = d[cols[lo]];
    for k in hi..n {
        let j = cols[k];
        if d[j] <= mind {
            if d[j] < mind {
                hi = lo;
                mind = d[j];
            }
            cols[k] = cols[hi];
            cols[hi] = j;
            hi += 1;
        }
    }
    hi
}

/// Scans the ready columns; `lo`/`hi` are written back only when the scan
/// finishes without reaching a free column.
#[allow(clippy::too_many_arguments, clippy::mut_range_bound)]
fn scan(
    c: &Costs,
    plo: &mut usize,
    phi: &mut usize,
    d: &mut [f64],
    cols: &mut [usize],
    pred: &mut [usize],
    y: &[usize],
    v: &[f64],
) -> Option<usize> {
    let n = c.n;
    let mut lo = *plo;
    let mut hi = *phi;
    while lo != hi {
        let j = cols[lo];
        lo += 1;
        let i = y[j];
        let mind = d[j];
        let row = c.row(i);
        let h = row[j] - v[j] - mind;
        for k in hi..n {
            let j = cols[k];
            let cred = row[j] - v[j] - h;
            if cred < d[j] {
                d[j] = cred;
                pred[j] = i;
                if cred == mind {
                    if y[j] == FREE {
                        return Some(j);
                    }
                    cols[k] = cols[hi];
                    cols[hi] = j;
                    hi += 1;
                }
            }
        }
    }
    *plo = lo;
    *phi = hi;
    None
}

fn find_path(c: &Costs, start: usize, y: &[usize], v: &mut [f64], pred: &mut [usize]) -> usize {
    let n = c.n;
    let mut cols: Vec<usize> = (0..n).collect();
    let mut d: Vec<f64> = (0..n).map(|j| c.at(start, j) - v[j]).collect();
    pred.iter_mut().for_each(|p| *p = start);
    let mut lo = 0;
    let mut hi = 0;
    let mut n_ready = 0;
    let final_j;
    loop {
        if lo == hi {
            n_ready = lo;
            hi = find_min_block(lo, &d, &mut cols);
            if let Some(&j) = cols[lo..hi].iter().find(|&&j| y[j] == FREE) {
                final_j = j;
                break;
            }
        }
        if let Some(j) = scan(c, &mut lo, &mut hi, &mut d, &mut cols, pred, y, v) {
            final_j = j;
            break;
        }
    }
    let mind = d[cols[lo]];
    for &j in &cols[..n_ready] {
        v[j] += d[j] - mind;
    }
    final_j
}

fn augment(c: &Costs, x: &mut [usize], y: &mut [usize], v: &mut [f64], free_rows: &[usize]) {
    let mut pred = vec![0usize; c.n];
    for &free_i in free_rows {
        let mut j = find_path(c, free_i, y, v, &mut pred);
        loop {
            let i = pred[j];
            y[j] = i;
            std::mem::swap(&mut j, &mut x[i]);
            if i == free_i {
                break;
            }
        }
    }
}
