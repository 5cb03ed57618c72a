//! Scalar special functions: Gaussian tail, log-gamma, Gauss hypergeometric
//! series and the modified Bessel function of the second kind.

use crate::error::{domain, Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

/// Stopping rule for the series evaluations in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_eps: f64,
    pub max_terms: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel_eps: 1e-12,
            max_terms: 1_000_000,
        }
    }
}

impl Tolerance {
    pub fn new(rel_eps: f64, max_terms: usize) -> Result<Self> {
        if !(rel_eps > 0.0) {
            return domain(format!("rel_eps must be positive, got {rel_eps}"));
        }
        if max_terms < 100 {
            return domain(format!("max_terms must be at least 100, got {max_terms}"));
        }
        Ok(Tolerance { rel_eps, max_terms })
    }
}

/// Gaussian upper tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_func`].
///
/// Acklam's rational approximation of the normal quantile followed by one
/// Halley step against the erfc-based tail.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("q_inv needs 0 < p < 1, got {p}"));
    }
    // Q(x) = p  <=>  x = -Phi^{-1}(p)
    Ok(-normal_quantile(p))
}

fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };

    // Halley refinement. Phi(x) = Q(-x); work on the smaller tail to keep
    // the residual accurate.
    let e = if x < 0.0 { q_func(-x) - p } else { (1.0 - p) - q_func(x) };
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    let refined = x - u / (1.0 + 0.5 * x * u);
    if refined.is_finite() {
        refined
    } else {
        x
    }
}

/// Natural log of the Gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("ln_gamma needs finite x > 0, got {x}"));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// `ln_gamma` for arguments already known to be positive.
pub(crate) fn lgam(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Gauss hypergeometric function `2F1(a, b; c; z)` for `0 <= z < 1`.
///
/// Direct power series, except for `z > 0.9` with `c > a > 0`, where the
/// series needs `O(1/(1-z))` terms and Euler's integral is used instead.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64, tol: &Tolerance) -> Result<f64> {
    if !(c > 0.0) {
        return domain(format!("gauss_2f1 needs c > 0, got {c}"));
    }
    if !(0.0..1.0).contains(&z) {
        return domain(format!("gauss_2f1 needs 0 <= z < 1, got {z}"));
    }
    if z > 0.9 && c > a && a > 0.0 {
        return gauss_2f1_euler(a, b, c, z);
    }
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    for n in 0..tol.max_terms {
        let nf = n as f64;
        let ratio = (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        term *= ratio;
        if term == 0.0 {
            return Ok(sum);
        }
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Overflow("gauss_2f1"));
        }
        // The term ratio tends to z; bound the tail by a geometric series
        // with the larger of the current and limiting ratio.
        let r = ratio.abs().max(z);
        if r < 1.0 && term.abs() * r / (1.0 - r) <= tol.rel_eps * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Convergence {
        what: "gauss_2f1",
        terms: tol.max_terms,
    })
}

/// `ln(1 + e^y)` without overflow.
fn ln1p_exp(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// `Gamma(c) / (Gamma(a) Gamma(c-a)) int_0^1 t^(a-1) (1-t)^(c-a-1) (1-zt)^(-b) dt`
/// by tanh-sinh quadrature, accumulated in logs.
fn gauss_2f1_euler(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let h = 1.0 / 128.0;
    let one_minus_z = 1.0 - z;
    let ln_f = |x: f64| {
        let u = FRAC_PI_2 * x.sinh();
        // t = 1/(1+e^{-2u}), 1-t = 1/(1+e^{2u}), both kept exact near the ends
        let ln_t = -ln1p_exp(-2.0 * u);
        let ln_1mt = -ln1p_exp(2.0 * u);
        let one_minus_zt = one_minus_z + z * ln_1mt.exp();
        let ln_w = PI.ln() + x.cosh().ln() + ln_t + ln_1mt;
        (a - 1.0) * ln_t + (c - a - 1.0) * ln_1mt - b * one_minus_zt.ln() + ln_w
    };
    let n = (6.5 / h) as i64;
    let logs: Vec<f64> = (-n..=n).map(|i| ln_f(i as f64 * h)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Overflow("gauss_2f1"));
    }
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    let v = (lgam(c) - lgam(a) - lgam(c - a) + top + (sum * h).ln()).exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow("gauss_2f1"))
    }
}

/// Modified Bessel function of the second kind `K_nu(x)`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    let ln_k = ln_bessel_k(nu, x)?;
    Ok(ln_k.exp())
}

/// `ln K_nu(x)`, usable where `K_nu(x)` itself over- or underflows.
pub fn ln_bessel_k(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("bessel_k needs finite x > 0, got {x}"));
    }
    if !nu.is_finite() {
        return domain(format!("bessel_k needs a finite order, got {nu}"));
    }
    let nu = nu.abs();
    if nu > 50.0 {
        return Ok(ln_bessel_k_debye(nu, x));
    }
    Ok(ln_bessel_k_recur(nu, x))
}

const G1_CHEB: [f64; 14] = [
    -1.145_164_083_662_683_1,
    0.006_360_853_113_470_843,
    0.001_862_451_930_072_488_5,
    0.000_152_833_085_873_453_5,
    0.000_017_017_464_011_802_04,
    -6.459_750_292_334_725e-7,
    -5.181_984_843_251_938e-8,
    4.518_909_289_485_818e-10,
    3.243_322_737_102_087e-11,
    6.830_943_402_494_752e-13,
    2.835_350_275_517_21e-14,
    -7.988_390_576_932_359e-16,
    -3.372_667_730_077_195e-17,
    -3.658_633_480_921_052e-20,
];

const G2_CHEB: [f64; 15] = [
    1.882_645_524_949_671_8,
    -0.077_490_658_396_167_52,
    -0.018_256_714_847_324_93,
    0.000_633_803_020_907_489_6,
    0.000_076_229_054_350_872_9,
    -9.550_164_756_172_044e-7,
    -8.892_726_810_788_635e-8,
    -1.952_133_477_231_961_4e-9,
    -9.400_305_273_588_516e-11,
    4.687_513_384_953_239e-12,
    2.265_853_574_692_576e-13,
    -1.172_550_969_848_801_5e-15,
    -7.044_133_820_024_522e-17,
    -2.437_787_831_010_769_4e-18,
    -7.522_524_321_825_39e-20,
];

fn cheb_eval(c: &[f64], y: f64) -> f64 {
    let y2 = 2.0 * y;
    let mut d = 0.0;
    let mut dd = 0.0;
    for &cj in c[1..].iter().rev() {
        let t = d;
        d = y2 * d - dd + cj;
        dd = t;
    }
    y * d - dd + 0.5 * c[0]
}

// Returns (1/Gamma(1+mu), 1/Gamma(1-mu), g1, g2) for |mu| <= 1/2.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let y = 4.0 * mu.abs() - 1.0;
    let g1 = cheb_eval(&G1_CHEB, y);
    let g2 = cheb_eval(&G2_CHEB, y);
    (1.0 / (g2 - mu * g1), 1.0 / (g2 + mu * g1), g1, g2)
}

// e^x K_mu(x), e^x K_{mu+1}(x) for |mu| <= 1/2 and x < 2.
fn k_scaled_temme(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let half_x_mu = (mu * ln_half_x).exp();
    let pi_mu = PI * mu;
    let sigma = -mu * ln_half_x;
    let sinrat = if pi_mu.abs() < f64::EPSILON {
        1.0
    } else {
        pi_mu / pi_mu.sin()
    };
    let sinhrat = if sigma.abs() < f64::EPSILON {
        1.0
    } else {
        sigma.sinh() / sigma
    };
    let (inv_g_1p, inv_g_1m, g1, g2) = temme_gamma(mu);

    let mut fk = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut pk = 0.5 / half_x_mu * inv_g_1p;
    let mut qk = 0.5 * half_x_mu * inv_g_1m;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;
    for k in 1..15_000 {
        let kf = k as f64;
        fk = (kf * fk + pk + qk) / (kf * kf - mu * mu);
        ck *= half_x * half_x / kf;
        pk /= kf - mu;
        qk /= kf + mu;
        let hk = -kf * fk + pk;
        let del0 = ck * fk;
        sum0 += del0;
        sum1 += ck * hk;
        if del0.abs() < 0.5 * f64::EPSILON * sum0.abs() {
            break;
        }
    }
    let ex = x.exp();
    (sum0 * ex, sum1 * 2.0 / x * ex)
}

// e^x K_mu(x), e^x K_{mu+1}(x) for |mu| <= 1/2 and x >= 2 (Steed's method on
// the second continued fraction).
fn k_scaled_cf2(mu: f64, x: f64) -> (f64, f64) {
    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;
    let mut qi = 0.0;
    let mut qip1 = 1.0;
    let mut ai = -(0.25 - mu * mu);
    let a1 = ai;
    let mut ci = -ai;
    let mut bqi = -ai;
    let mut s = 1.0 + bqi * delhi;
    for i in 2..10_000 {
        ai -= 2.0 * (i - 1) as f64;
        ci = -ai * ci / i as f64;
        let t = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = t;
        bqi += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi *= bi * di - 1.0;
        hi += delhi;
        let dels = bqi * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    hi *= -a1;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mup1 = k_mu * (mu + x + 0.5 - hi) / x;
    (k_mu, k_mup1)
}

fn ln_bessel_k_recur(nu: f64, x: f64) -> f64 {
    let n = (nu + 0.5).floor() as usize;
    let mu = nu - n as f64;
    let (mut k0, mut k1) = if x < 2.0 {
        k_scaled_temme(mu, x)
    } else {
        k_scaled_cf2(mu, x)
    };
    let mut ln_scale = 0.0;
    const BIG: f64 = 1e250;
    for i in 0..n {
        if i == 0 {
            continue;
        }
        // K_{mu+i+1} = K_{mu+i-1} + 2(mu+i)/x K_{mu+i}
        let k2 = k0 + 2.0 * (mu + i as f64) / x * k1;
        k0 = k1;
        k1 = k2;
        if k1 > BIG {
            k0 /= BIG;
            k1 /= BIG;
            ln_scale += BIG.ln();
        }
    }
    let k_nu = if n == 0 { k0 } else { k1 };
    k_nu.ln() + ln_scale - x
}

// Uniform asymptotic expansion in the order.
fn ln_bessel_k_debye(nu: f64, x: f64) -> f64 {
    let z = x / nu;
    let s = (1.0 + z * z).sqrt();
    let p = 1.0 / s;
    let eta = s + (z / (1.0 + s)).ln();
    let p2 = p * p;
    let u1 = p * (3.0 - 5.0 * p2) / 24.0;
    let u2 = p2 * (81.0 - 462.0 * p2 + 385.0 * p2 * p2) / 1152.0;
    let u3 = p * p2 * (30375.0 - 369603.0 * p2 + 765765.0 * p2 * p2 - 425425.0 * p2 * p2 * p2) / 414720.0;
    let p4 = p2 * p2;
    let u4 = p4 * (4465125.0 - 94121676.0 * p2 + 349922430.0 * p4 - 446185740.0 * p4 * p2 + 185910725.0 * p4 * p4)
        / 39813120.0;
    let inv = 1.0 / nu;
    let series = 1.0 - u1 * inv + u2 * inv.powi(2) - u3 * inv.powi(3) + u4 * inv.powi(4);
    0.5 * (PI / (2.0 * nu)).ln() - nu * eta - 0.5 * s.ln() + series.ln()
}
