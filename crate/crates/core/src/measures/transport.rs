//! Point-cloud transport solvers on flattened real coordinates.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::seed::rng_for;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum-cost perfect matching for an `n x n` row-major cost matrix
/// (Hungarian method with potentials). Returns the total cost and the
/// column assigned to each row.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (0.0, Vec::new());
    }
    // 1-based arrays; column 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    // sum in row order so the value does not depend on the solver path
    let total = (0..n).map(|i| cost[i * n + assign[i]]).sum();
    (total, assign)
}

/// W1 between two uniform clouds of equal size under the Euclidean metric.
pub fn exact_w1(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let cost: Vec<f64> = (0..n * n).into_par_iter().map(|k| euclidean(&a[k / n], &b[k % n])).collect();
    min_cost_assignment(&cost, n).0 / n as f64
}

/// W1 between weighted point masses on the line.
pub fn w1_line(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = a.iter().copied().chain(b.iter().map(|&(x, w)| (x, -w))).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut cdf = 0.0;
    let mut total = 0.0;
    for k in 0..pts.len().saturating_sub(1) {
        cdf += pts[k].1;
        total += cdf.abs() * (pts[k + 1].0 - pts[k].0);
    }
    total
}

/// Mean and standard error of the 1-D W1 over `n_dirs` random directions.
/// Direction `k` is drawn from its own generator seeded by `(seed, k)`.
pub fn sliced_w1(a: &[Vec<f64>], wa: &[f64], b: &[Vec<f64>], wb: &[f64], n_dirs: usize, seed: u64) -> (f64, f64) {
    let dim = a.first().or(b.first()).map_or(0, |p| p.len());
    let vals: Vec<f64> = (0..n_dirs)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(seed, k as u64);
            let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|x| *x /= len);
            let proj = |p: &Vec<f64>| p.iter().zip(&dir).map(|(x, d)| x * d).sum::<f64>();
            let pa: Vec<(f64, f64)> = a.iter().map(proj).zip(wa.iter().copied()).collect();
            let pb: Vec<(f64, f64)> = b.iter().map(proj).zip(wb.iter().copied()).collect();
            w1_line(&pa, &pb)
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}
