use proptest::prelude::*;
use stvq_core::eval::{correlations, f_test, fit_logistic, logistic, two_best, FVerdict};
use stvq_core::stats::special::{f_cdf, f_quantile};
use stvq_core::stats::{kendall_tau_b, spearman};

/// Tau-b by counting every pair.
fn tau_b_pairs(x: &[f64], y: &[f64]) -> f64 {
    let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (sx, sy) = ((x[i] - x[j]).signum(), (y[i] - y[j]).signum());
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => {}
                (true, false) => tx += 1.0,
                (false, true) => ty += 1.0,
                (false, false) if sx == sy => c += 1.0,
                _ => d += 1.0,
            }
        }
    }
    (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
}

/// Spearman from rank differences, distinct values only.
fn rho_untied(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter().map(|a| v.iter().filter(|b| *b < a).count() as f64 + 1.0).collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn small_rank_example() {
    let (p, t) = ([1.0, 2.0, 3.0, 4.0, 5.0], [1.0, 3.0, 2.0, 5.0, 4.0]);
    let r = correlations(&p, &t).unwrap();
    assert_eq!(r.srcc, rho_untied(&p, &t));
    assert_eq!(r.srcc, 0.8);
    assert!((r.krcc - tau_b_pairs(&p, &t)).abs() < 1e-15);
    assert!((r.krcc - 0.6).abs() < 1e-15);
}

/// Simpson's rule on the F density, substituting `x = u^2` to tame the
/// origin.
fn f_cdf_numeric(x: f64, d1: f64, d2: f64) -> f64 {
    use stvq_core::stats::special::ln_gamma;
    let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
    let pdf = |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        ((d1 / 2.0) * (d1 * t).ln() + (d2 / 2.0) * d2.ln() - ((d1 + d2) / 2.0) * (d1 * t + d2).ln() - ln_b).exp() / t
    };
    let n = 20_000;
    let top = x.sqrt();
    let h = top / n as f64;
    let g = |u: f64| 2.0 * u * pdf(u * u);
    let mut s = g(0.0) + g(top);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn f_distribution_against_quadrature() {
    for &(x, d1, d2) in &[(0.5, 99.0, 99.0), (1.0, 99.0, 99.0), (1.5, 99.0, 99.0), (2.0, 10.0, 10.0), (3.0, 4.0, 7.0)] {
        let (a, b) = (f_cdf(x, d1, d2), f_cdf_numeric(x, d1, d2));
        assert!((a - b).abs() < 1e-7, "F({d1},{d2}) at {x}: {a} vs {b}");
    }
    let q = f_quantile(0.975, 10.0, 10.0);
    assert!((q - 3.717).abs() < 1e-3, "{q}");
    assert!((f_cdf_numeric(q, 10.0, 10.0) - 0.975).abs() < 1e-6);
}

#[test]
fn huge_variance_ratio_is_significant() {
    let a: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1e-3 } else { -1e-3 }).collect();
    let b: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    // the lower tail at a 1e-6 ratio is far below the 2.5% cut
    assert!(f_cdf_numeric(1e-6, 99.0, 99.0) < 0.025);
    assert_eq!(f_test(&a, &b).unwrap(), FVerdict::ABetter);
    assert_eq!(f_test(&b, &a).unwrap(), FVerdict::BBetter);
}

#[test]
fn logistic_recovers_its_own_curve() {
    let beta = [80.0, 10.0, 50.0, 9.0];
    let x: Vec<f64> = (0..60).map(|i| i as f64 * 100.0 / 59.0).collect();
    let y: Vec<f64> = x.iter().map(|&v| logistic(&beta, v)).collect();
    let fit = fit_logistic(&x, &y).unwrap();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(fit.residual_norm <= 1e-6 * norm, "{} vs {norm}", fit.residual_norm);
}

fn argsort_oracle(values: &[Option<f64>], higher: bool) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (if higher { -v } else { v }, i)))
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    keyed.into_iter().take(2).map(|k| k.1).collect()
}

/// Distinct values on a coarse grid so monotone maps cannot merge them.
fn distinct(n: usize) -> impl Strategy<Value = Vec<f64>> {
    Just((0..n as i32).collect::<Vec<i32>>())
        .prop_shuffle()
        .prop_map(|v| v.into_iter().map(|k| k as f64 * 0.1 - 2.0).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rank_correlations_ignore_monotone_maps(x in distinct(30), y in prop::collection::vec(-5.0f64..5.0, 30)) {
        let (s, k) = (spearman(&x, &y).unwrap(), kendall_tau_b(&x, &y).unwrap());
        for f in [|v: f64| v * v * v, f64::exp] {
            let fx: Vec<f64> = x.iter().map(|&v| f(v)).collect();
            prop_assert!((spearman(&fx, &y).unwrap() - s).abs() < 1e-12);
            prop_assert!((kendall_tau_b(&fx, &y).unwrap() - k).abs() < 1e-12);
        }
    }

    #[test]
    fn kendall_matches_pair_count(
        x in prop::collection::vec(0u8..6, 5..40),
        seed in any::<u64>(),
    ) {
        // heavy ties on both sides
        let y: Vec<f64> = x.iter().enumerate().map(|(i, _)| ((seed >> (i % 60)) & 7) as f64).collect();
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        match kendall_tau_b(&x, &y) {
            Ok(k) => prop_assert!((k - tau_b_pairs(&x, &y)).abs() < 1e-12),
            Err(_) => prop_assert!(!tau_b_pairs(&x, &y).is_finite()),
        }
    }

    #[test]
    fn spearman_matches_rank_difference_form(x in distinct(25), y in distinct(25)) {
        prop_assert!((spearman(&x, &y).unwrap() - rho_untied(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn f_test_is_antisymmetric(
        a in prop::collection::vec(-10.0f64..10.0, 2..60),
        b in prop::collection::vec(-10.0f64..10.0, 2..60),
    ) {
        let swapped = match f_test(&b, &a).unwrap() {
            FVerdict::ABetter => FVerdict::BBetter,
            FVerdict::BBetter => FVerdict::ABetter,
            FVerdict::Equivalent => FVerdict::Equivalent,
        };
        prop_assert_eq!(f_test(&a, &b).unwrap(), swapped);
    }

    #[test]
    fn two_best_matches_argsort(
        values in prop::collection::vec(prop::option::of((-20i32..20).prop_map(|v| v as f64 / 4.0)), 0..12),
        higher in any::<bool>(),
    ) {
        prop_assert_eq!(two_best(&values, higher), argsort_oracle(&values, higher));
    }
}
