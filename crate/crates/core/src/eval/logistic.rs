//! Four-parameter monotone logistic mapping fitted by Levenberg-Marquardt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

const MAX_ITER: usize = 500;

/// `Q(x) = b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub beta: [f64; 4],
    pub residual_norm: f64,
    pub converged: bool,
}

impl LogisticFit {
    pub fn eval(&self, x: f64) -> f64 {
        logistic(&self.beta, x)
    }

    pub fn map(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

pub fn logistic(b: &[f64; 4], x: f64) -> f64 {
    b[1] + (b[0] - b[1]) / (1.0 + (-(x - b[2]) / b[3].abs()).exp())
}

fn residuals(b: &[f64; 4], x: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let r: Vec<f64> = x.iter().zip(y).map(|(&xi, &yi)| yi - logistic(b, xi)).collect();
    let ss = r.iter().map(|v| v * v).sum();
    (r, ss)
}

fn jacobian_row(b: &[f64; 4], x: f64) -> [f64; 4] {
    let s4 = b[3].abs();
    let s = 1.0 / (1.0 + (-(x - b[2]) / s4).exp());
    let ds = s * (1.0 - s);
    let amp = b[0] - b[1];
    [
        s,
        1.0 - s,
        -amp * ds / s4,
        -amp * ds * (x - b[2]) / (s4 * s4) * b[3].signum(),
    ]
}

/// Solves the 4x4 system `a x = r` by Gaussian elimination with partial
/// pivoting. Returns `None` when singular.
fn solve4(mut a: [[f64; 4]; 4], mut r: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        r.swap(c, p);
        for i in c + 1..4 {
            let f = a[i][c] / a[c][c];
            for k in c..4 {
                a[i][k] -= f * a[c][k];
            }
            r[i] -= f * r[c];
        }
    }
    let mut x = [0.0; 4];
    for c in (0..4).rev() {
        let s: f64 = (c + 1..4).map(|k| a[c][k] * x[k]).sum();
        x[c] = (r[c] - s) / a[c][c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least-squares fit of the logistic to `(pred, truth)`. The predictor is
/// standardized internally; the returned parameters are in its original
/// units. If the iteration limit is hit, the best iterate is returned with
/// `converged = false`.
pub fn fit_logistic(pred: &[f64], truth: &[f64]) -> Result<LogisticFit> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "logistic fit needs at least 5 points, got {}",
            pred.len()
        )));
    }
    let sd = stats::population_std(pred);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::Degenerate("constant predictor".into()));
    }
    let m = stats::mean(pred);
    let x: Vec<f64> = pred.iter().map(|p| (p - m) / sd).collect();
    let y = truth;

    let (hi, lo) = y.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(h, l), &v| (h.max(v), l.min(v)));
    // Start on the branch that matches the direction of the data.
    let increasing = stats::pearson(&x, y).map_or(true, |r| r >= 0.0);
    let (b1, b2) = if increasing { (hi, lo) } else { (lo, hi) };
    let mut b = [b1, b2, stats::median(&x), 0.25];

    let (_, mut ss) = residuals(&b, &x, y);
    let scale = y.iter().map(|v| v * v).sum::<f64>().max(1e-300);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        if ss <= 1e-30 * scale {
            converged = true;
            break;
        }
        let (r, _) = residuals(&b, &x, y);
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&xi, &ri) in x.iter().zip(&r) {
            let j = jacobian_row(&b, xi);
            for p in 0..4 {
                jtr[p] += j[p] * ri;
                for q in 0..4 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let grad = jtr.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if grad <= 1e-14 * scale.sqrt() {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for (p, row) in a.iter_mut().enumerate() {
                row[p] += lambda * jtj[p][p].max(1e-12);
            }
            if let Some(step) = solve4(a, jtr) {
                let cand = [b[0] + step[0], b[1] + step[1], b[2] + step[2], b[3] + step[3]];
                let (_, cand_ss) = residuals(&cand, &x, y);
                if cand[3] != 0.0 && cand_ss.is_finite() && cand_ss < ss {
                    let rel = (ss - cand_ss) / ss;
                    b = cand;
                    ss = cand_ss;
                    lambda = (lambda / 3.0).max(1e-15);
                    improved = true;
                    if rel < 1e-15 {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            // No descent direction left at any damping: a stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(LogisticFit {
        beta: [b[0], b[1], m + sd * b[2], sd * b[3].abs()],
        residual_norm: ss.sqrt(),
        converged,
    })
}
