//! Epsilon-insensitive support vector regression with an RBF kernel,
//! trained by sequential minimal optimization on the standard 2n-variable
//! dual (second-order working-set selection).

use serde::{Deserialize, Serialize};

const TAU: f64 = 1e-12;
const TOLERANCE: f64 = 1e-3;
/// Pair updates allowed per dual variable before a solve is returned
/// unconverged. Large-C fits with most multipliers at the bound otherwise
/// need millions of updates.
pub const MAX_UPDATES_PER_VARIABLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

/// Per-feature min-max scaling to [-1, 1], fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[&[f64]]) -> Self {
        let k = rows.first().map_or(0, |r| r.len());
        let mut min = vec![f64::INFINITY; k];
        let mut max = vec![f64::NEG_INFINITY; k];
        for r in rows {
            for (f, &v) in r.iter().enumerate() {
                min[f] = min[f].min(v);
                max[f] = max[f].max(v);
            }
        }
        MinMaxScaler { min, max }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(f, &v)| {
                let span = self.max[f] - self.min[f];
                if span > 0.0 {
                    2.0 * (v - self.min[f]) / span - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise squared distances, row-major `n x n`.
pub fn distance_matrix(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(&x[i], &x[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvrModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, c)| c * (-self.gamma * sq_dist(s, x)).exp())
            .sum::<f64>()
            - self.rho
    }
}

/// Trains on rows `x` (already scaled) with targets `y`. `dist` may carry a
/// precomputed [`distance_matrix`] of `x`.
pub fn train(x: &[Vec<f64>], y: &[f64], params: SvrParams, dist: Option<&[f64]>) -> SvrModel {
    let n = x.len();
    let owned;
    let d = match dist {
        Some(d) => d,
        None => {
            owned = distance_matrix(x);
            &owned
        }
    };
    let kernel: Vec<f64> = d.iter().map(|v| (-params.gamma * v).exp()).collect();
    let sol = solve(&kernel, n, y, params.c, params.epsilon);

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for (i, &b) in sol.coef.iter().enumerate() {
        if b != 0.0 {
            support.push(x[i].clone());
            coef.push(b);
        }
    }
    SvrModel {
        support,
        coef,
        rho: sol.rho,
        gamma: params.gamma,
        iterations: sol.iterations,
        converged: sol.converged,
    }
}

struct Solution {
    /// alpha - alpha*
    coef: Vec<f64>,
    rho: f64,
    iterations: usize,
    converged: bool,
}

/// SMO over the 2n-variable dual. Variables `0..n` are the `alpha` (label
/// +1) and `n..2n` the `alpha*` (label -1); `Q_st = y_s y_t K(s, t)`.
fn solve(k: &[f64], n: usize, target: &[f64], c: f64, eps: f64) -> Solution {
    let l = 2 * n;
    let mut alpha = vec![0.0; l];
    let mut grad: Vec<f64> = (0..l)
        .map(|t| if t < n { eps - target[t] } else { eps + target[t - n] })
        .collect();
    let diag: Vec<f64> = (0..n).map(|i| k[i * n + i]).collect();
    let max_iter = MAX_UPDATES_PER_VARIABLE * l;
    let mut iter = 0;
    let mut converged = false;

    while iter < max_iter {
        // Maximal violating i: -y_t G_t over the "up" set.
        let (mut gmax, mut i) = (f64::NEG_INFINITY, usize::MAX);
        for t in 0..n {
            if alpha[t] < c && -grad[t] >= gmax {
                gmax = -grad[t];
                i = t;
            }
        }
        for t in n..l {
            if alpha[t] > 0.0 && grad[t] >= gmax {
                gmax = grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        let ii = if i < n { i } else { i - n };
        let ki = &k[ii * n..(ii + 1) * n];
        let kii = diag[ii];

        // Second-order choice of j over the "low" set.
        let (mut gmax2, mut j, mut best) = (f64::NEG_INFINITY, usize::MAX, f64::INFINITY);
        let mut consider = |t: usize, tt: usize, g: f64| {
            gmax2 = gmax2.max(g);
            let diff = gmax + g;
            if diff > 0.0 {
                let quad = (kii + diag[tt] - 2.0 * ki[tt]).max(TAU);
                let obj = -diff * diff / quad;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        };
        for t in 0..n {
            if alpha[t] > 0.0 {
                consider(t, t, grad[t]);
            }
        }
        for t in n..l {
            if alpha[t] < c {
                consider(t, t - n, -grad[t]);
            }
        }
        if gmax + gmax2 < TOLERANCE || j == usize::MAX {
            converged = true;
            break;
        }
        iter += 1;

        let jj = if j < n { j } else { j - n };
        let (yi, yj) = (if i < n { 1.0 } else { -1.0 }, if j < n { 1.0 } else { -1.0 });
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (kii + diag[jj] - 2.0 * ki[jj]).max(TAU);
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        // G_t += y_t (y_i K_ti d_i + y_j K_tj d_j), rows read contiguously.
        let a = yi * (alpha[i] - old_i);
        let b = yj * (alpha[j] - old_j);
        let kj = &k[jj * n..(jj + 1) * n];
        let (lo, hi) = grad.split_at_mut(n);
        for t in 0..n {
            let v = ki[t] * a + kj[t] * b;
            lo[t] += v;
            hi[t] -= v;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..l {
        let y = if t < n { 1.0 } else { -1.0 };
        let yg = y * grad[t];
        if alpha[t] >= c {
            if y < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    Solution {
        coef: (0..n).map(|t| alpha[t] - alpha[t + n]).collect(),
        rho,
        iterations: iter,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_smooth_function() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 25.0 - 1.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (2.0 * r[0]).sin() * 10.0).collect();
        let m = train(&x, &y, SvrParams { c: 100.0, gamma: 2.0, epsilon: 0.1 }, None);
        assert!(m.converged);
        for (r, t) in x.iter().zip(&y) {
            assert!((m.predict(r) - t).abs() < 0.2, "{} vs {t}", m.predict(r));
        }
    }

    #[test]
    fn wide_tube_predicts_a_constant() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 5.0 + 0.01 * i as f64).collect();
        let m = train(&x, &y, SvrParams { c: 1.0, gamma: 1.0, epsilon: 1.0 }, None);
        assert!(m.coef.is_empty());
        assert!(x.iter().all(|r| (m.predict(r) - m.predict(&x[0])).abs() < 1e-12));
    }

    #[test]
    fn dual_constraints_hold() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0 - r[1]).collect();
        let c = 4.0;
        let m = train(&x, &y, SvrParams { c, gamma: 0.5, epsilon: 0.1 }, None);
        assert!(m.coef.iter().sum::<f64>().abs() < 1e-9);
        assert!(m.coef.iter().all(|v| v.abs() <= c + 1e-12));
    }

    #[test]
    fn scaler_maps_to_unit_box() {
        let rows = [vec![0.0, 5.0], vec![10.0, 5.0], vec![5.0, 5.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = MinMaxScaler::fit(&refs);
        assert_eq!(s.transform(&rows[0]), vec![-1.0, 0.0]);
        assert_eq!(s.transform(&rows[1]), vec![1.0, 0.0]);
        assert_eq!(s.transform(&rows[2]), vec![0.0, 0.0]);
    }
}
