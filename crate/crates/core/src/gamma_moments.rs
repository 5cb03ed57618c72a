//! Differences of correlated Gamma and chi-square variables: the
//! variance-gamma density and absolute moments of `x - y`.

use crate::error::{domain, Error, Result};
use crate::specfun::{gauss_2f1, lgam, ln_bessel_k, Tolerance};
use std::f64::consts::PI;

/// Two correlated Gamma variables `x ~ Gamma(a1, rate b1)`, `y ~ Gamma(a2, rate b2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrGammaPair {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub rho: f64,
}

impl CorrGammaPair {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64, rho: f64) -> Result<Self> {
        for (name, v) in [("a1", a1), ("b1", b1), ("a2", a2), ("b2", b2)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&rho) {
            return domain(format!("rho must lie in [0, 1), got {rho}"));
        }
        Ok(CorrGammaPair { a1, b1, a2, b2, rho })
    }

    /// `Var(x - y)` for the stated marginals and correlation.
    pub fn variance_of_difference(&self) -> f64 {
        self.a1 / (self.b1 * self.b1) + self.a2 / (self.b2 * self.b2)
            - 2.0 * self.rho * (self.a1 * self.a2).sqrt() / (self.b1 * self.b2)
    }

    pub fn mean_difference(&self) -> f64 {
        self.a1 / self.b1 - self.a2 / self.b2
    }
}

/// Two correlated chi-square variables with `dof` degrees of freedom each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrChiSqPair {
    pub dof: u32,
    pub rho: f64,
}

impl CorrChiSqPair {
    pub fn new(dof: u32, rho: f64) -> Result<Self> {
        if dof == 0 {
            return domain("dof must be at least 1");
        }
        if !(0.0..1.0).contains(&rho) {
            return domain(format!("rho must lie in [0, 1), got {rho}"));
        }
        Ok(CorrChiSqPair { dof, rho })
    }
}

/// Density of `z = x - y` for a correlated chi-square pair.
pub fn variance_gamma_pdf(pair: &CorrChiSqPair, z: f64) -> f64 {
    let n = pair.dof as f64;
    let s = (1.0 - pair.rho).sqrt();
    let nu = 0.5 * (n - 1.0);
    let ln_norm = -n * 2f64.ln() - 0.5 * PI.ln() - s.ln() - lgam(0.5 * n);
    let az = z.abs();
    if az == 0.0 {
        if nu == 0.0 {
            return f64::INFINITY;
        }
        // |z/s|^nu K_nu(|z|/2s) -> Gamma(nu) 4^nu / 2
        return (ln_norm + lgam(nu) + nu * 4f64.ln() - 2f64.ln()).exp();
    }
    let ln_k = ln_bessel_k(nu, az / (2.0 * s)).expect("argument is positive");
    (ln_norm + nu * (az / s).ln() + ln_k).exp()
}

/// `E|x - y|^m` for a correlated chi-square pair, `m` in {2, 3}.
pub fn abs_moment_chisq_diff(pair: &CorrChiSqPair, m: u32) -> Result<f64> {
    let n = pair.dof as f64;
    let r = 1.0 - pair.rho;
    match m {
        2 => Ok(4.0 * n * r),
        3 => {
            let ln = (64.0 / PI.sqrt()).ln() + lgam(0.5 * n + 1.5) - lgam(0.5 * n) + 1.5 * r.ln();
            Ok(ln.exp())
        }
        _ => domain(format!("abs_moment_chisq_diff supports m in {{2, 3}}, got {m}")),
    }
}

/// Which closed form applies to a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaCase {
    /// `l21 >= l11`: the difference has one sign, binomial sum.
    Aligned,
    /// `l21 < l11`: hypergeometric form.
    Split,
}

/// Coefficients of the two-independent-Gamma representation of `x - y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCoefficients {
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub alpha2: f64,
    pub beta2: f64,
}

impl LemmaCoefficients {
    pub fn case(&self) -> LemmaCase {
        if self.l21 >= self.l11 {
            LemmaCase::Aligned
        } else {
            LemmaCase::Split
        }
    }
}

pub fn lemma_coefficients(pair: &CorrGammaPair) -> LemmaCoefficients {
    // the variable with the larger shape is the "max" one; ties pick the first
    let (a_max, b_max, a_min, b_min) = if pair.a1 >= pair.a2 {
        (pair.a1, pair.b1, pair.a2, pair.b2)
    } else {
        (pair.a2, pair.b2, pair.a1, pair.b1)
    };
    let rho = pair.rho;
    let c = (1.0 - rho * rho).sqrt();
    let d = a_max.sqrt() - rho * a_min.sqrt();
    LemmaCoefficients {
        l11: a_min.sqrt() / b_min,
        l21: rho * a_max.sqrt() / b_max,
        l22: c * a_max.sqrt() / b_max,
        alpha1: a_min,
        beta1: a_min.sqrt(),
        alpha2: d * d / (1.0 - rho * rho),
        beta2: d / c,
    }
}

/// Approximate `E|x - y|^m`, `m` in {1, 2, 3}, dispatching on the case.
pub fn abs_moment_gamma_diff(pair: &CorrGammaPair, m: u32) -> Result<f64> {
    check_order(m)?;
    let co = lemma_coefficients(pair);
    match co.case() {
        LemmaCase::Aligned => abs_moment_aligned(&co, m),
        LemmaCase::Split => abs_moment_split(&co, m, &Tolerance::default()),
    }
}

fn check_order(m: u32) -> Result<()> {
    if !(1..=3).contains(&m) {
        return domain(format!("moment order must be 1, 2 or 3, got {m}"));
    }
    Ok(())
}

fn binom(m: u32, f: u32) -> f64 {
    (1..=f).fold(1.0, |acc, i| acc * (m - f + i) as f64 / i as f64)
}

/// Binomial-sum form, exact when `l21 >= l11`.
pub fn abs_moment_aligned(co: &LemmaCoefficients, m: u32) -> Result<f64> {
    check_order(m)?;
    let g = co.l21 - co.l11;
    let base = lgam(co.alpha1) + lgam(co.alpha2);
    let mut sum = 0.0;
    for f in 0..=m {
        let ff = f as f64;
        let mf = (m - f) as f64;
        let mut ln_t = lgam(ff + co.alpha1) + lgam(mf + co.alpha2) - base;
        ln_t += mf * (co.l22 / co.beta2).ln();
        if f > 0 {
            if g <= 0.0 {
                continue;
            }
            ln_t += ff * (g / co.beta1).ln();
        }
        sum += binom(m, f) * ln_t.exp();
    }
    finite(sum, "abs_moment_aligned")
}

/// Hypergeometric form for `l21 < l11`.
pub fn abs_moment_split(co: &LemmaCoefficients, m: u32, tol: &Tolerance) -> Result<f64> {
    check_order(m)?;
    let a = co.l11 - co.l21;
    if !(a > 0.0) || !(co.l22 > 0.0) {
        return Err(Error::Degenerate(
            "hypergeometric form needs l11 > l21 and l22 > 0".into(),
        ));
    }
    let (a1, b1, a2, b2) = (co.alpha1, co.beta1, co.alpha2, co.beta2);
    let mf = m as f64;
    let d = co.l22 * b1 + a * b2;
    let ln_pref = a1 * b1.ln() + a2 * b2.ln() + (mf + a1) * co.l22.ln() + (mf + a2) * a.ln() - (mf + a1 + a2) * d.ln()
        + lgam(mf + a1 + a2)
        - lgam(a1)
        - lgam(a2);
    if !ln_pref.is_finite() || ln_pref > 700.0 {
        return Err(Error::Overflow("abs_moment_split prefactor"));
    }
    let bb = mf + a1 + a2;
    let z1 = co.l22 * b1 / d;
    let z2 = a * b2 / d;
    let mut omega = 0.0;
    for f in 0..=m {
        let ff = f as f64;
        let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
        let t1 = gauss_2f1(1.0, bb, ff + a1 + 1.0, z1, tol)? / (ff + a1);
        let t2 = gauss_2f1(1.0, bb, ff + a2 + 1.0, z2, tol)? / (ff + a2);
        omega += sign * binom(m, f) * (t1 + t2);
    }
    finite(ln_pref.exp() * omega, "abs_moment_split")
}

fn finite(v: f64, what: &'static str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(what))
    }
}
