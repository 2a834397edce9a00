//! F and Student-t distribution functions, with the gamma and beta
//! functions they rest on. Thin wrappers over `statrs` with the argument
//! order and edge handling the rest of the crate expects.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Regularized incomplete beta `I_x(a, b)`, clamped outside `[0, 1]`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        statrs::function::beta::beta_reg(a, b, x)
    }
}

fn fisher(d1: f64, d2: f64) -> FisherSnedecor {
    FisherSnedecor::new(d1, d2).expect("positive degrees of freedom")
}

fn student(nu: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu).expect("positive degrees of freedom")
}

/// CDF of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    fisher(d1, d2).cdf(x)
}

/// Quantile of the F distribution.
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "probability {p} out of range");
    fisher(d1, d2).inverse_cdf(p)
}

/// CDF of Student's t distribution with `nu` degrees of freedom.
pub fn t_cdf(t: f64, nu: f64) -> f64 {
    student(nu).cdf(t)
}

/// Quantile of Student's t distribution.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability {p} out of range");
    student(nu).inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-10, "n={n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
        for &x in &[0.1, 0.37, 0.5, 0.9] {
            assert!((reg_inc_beta(1.0, 1.0, x) - x).abs() < 1e-13);
            assert!((reg_inc_beta(3.5, 1.0, x) - x.powf(3.5)).abs() < 1e-12);
            let s = reg_inc_beta(2.5, 7.0, x) + reg_inc_beta(7.0, 2.5, 1.0 - x);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn t_quantiles() {
        // t_{0.975, 29} = 2.045230, t_{0.975, 1} = 12.706205.
        assert!((t_quantile(0.975, 29.0) - 2.045_230).abs() < 1e-5);
        assert!((t_quantile(0.975, 1.0) - 12.706_205).abs() < 1e-4);
        assert!((t_quantile(0.025, 10.0) + t_quantile(0.975, 10.0)).abs() < 1e-10);
        assert!((t_cdf(t_quantile(0.9, 7.0), 7.0) - 0.9).abs() < 1e-10);
    }

    #[test]
    fn f_cdf_and_quantile_are_inverse() {
        for &(d1, d2) in &[(1.0, 1.0), (10.0, 10.0), (436.0, 436.0), (3.0, 50.0)] {
            for &p in &[0.025, 0.5, 0.975] {
                let q = f_quantile(p, d1, d2);
                assert!((f_cdf(q, d1, d2) - p).abs() < 1e-10, "{d1},{d2},{p}");
            }
        }
    }
}
