//! Reference computations used to check the analytic code: brute-force
//! quadratures, long series, asymptotic series and Monte Carlo samplers.
//!
//! Nothing on the analytic path calls into this module. It is public so the
//! `validate` runner and the test suites share one set of references.

use crate::gamma_moments::{variance_gamma_pdf, CorrChiSqPair, CorrGammaPair};
use crate::rng::{substream, STREAM_ORACLE};
use crate::specfun::{normal_pdf, q_func};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::ContinuousCDF;
use std::f64::consts::PI;

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance and its large-sample standard error `sqrt((m4 - s^4)/n)`.
pub fn variance_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    (m2 * n / (n - 1.0), ((m4 - m2 * m2) / n).sqrt())
}

/// Pearson correlation and a delta-method standard error that does not
/// assume normality.
pub fn pearson_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
        sxy += (x - mx) * (y - my);
    }
    let (sx, sy) = ((sxx / n).sqrt(), (syy / n).sqrt());
    let r = sxy / (sxx * syy).sqrt();
    // influence function of r at each observation
    let infl: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let u = (x - mx) / sx;
            let v = (y - my) / sy;
            u * v - 0.5 * r * (u * u + v * v)
        })
        .collect();
    let (_, se) = mean_se(&infl);
    (r, se)
}

/// `Q(x)` by Simpson quadrature of the normal density over `[x, x + 40]`.
pub fn q_tail_quadrature(x: f64) -> f64 {
    simpson(normal_pdf, x, x + 40.0, 200_000)
}

/// `ln Gamma(x)` from the Stirling series after shifting the argument above 30.
pub fn stirling_ln_gamma(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut y = x;
    while y < 30.0 {
        shift += y.ln();
        y += 1.0;
    }
    let coef = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let mut corr = 0.0;
    let mut yp = y;
    for c in coef {
        corr += c / yp;
        yp *= y * y;
    }
    (y - 0.5) * y.ln() - y + 0.5 * (2.0 * PI).ln() + corr - shift
}

/// Fixed-length partial sum of the hypergeometric series.
pub fn hyp2f1_partial_sum(a: f64, b: f64, c: f64, z: f64, terms: usize) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for n in 0..terms {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
    }
    sum
}

/// `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt` by the trapezoid rule.
pub fn bessel_k_quadrature(nu: f64, x: f64) -> f64 {
    let h = 1e-3f64;
    let mut s = 0.5 * (-x).exp();
    let mut t = h;
    loop {
        let v = (-x * t.cosh() + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        s += v;
        if t > 1.0 && v < 1e-30 * s {
            break;
        }
        t += h;
    }
    s * h
}

/// `int |z|^p f(z) dz` over `[-200, 200]` for the variance-gamma density.
pub fn vg_abs_moment_quadrature(pair: &CorrChiSqPair, p: f64) -> f64 {
    let f = |z: f64| {
        let d = variance_gamma_pdf(pair, z);
        if p == 0.0 {
            d
        } else {
            z.powf(p) * d
        }
    };
    // the density may have an integrable singularity at 0 for dof = 1;
    // start just off the origin in that case
    let lo = if pair.dof == 1 { 1e-12 } else { 0.0 };
    2.0 * (simpson(f, lo, 1.0, 20_000) + simpson(f, 1.0, 200.0, 200_000))
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// One draw of `x - y` for correlated chi-squares, built from Gaussian pairs
/// whose normal correlation is `sqrt(rho)`.
pub fn sample_chisq_diff<R: Rng + ?Sized>(rng: &mut R, pair: &CorrChiSqPair) -> f64 {
    let c = pair.rho.sqrt();
    let s = (1.0 - pair.rho).sqrt();
    let mut z = 0.0;
    for _ in 0..pair.dof {
        let u: f64 = StandardNormal.sample(rng);
        let e: f64 = StandardNormal.sample(rng);
        let w = c * u + s * e;
        z += u * u - w * w;
    }
    z
}

/// Sampler of a correlated Gamma pair with the requested marginals and
/// Pearson correlation.
#[derive(Debug, Clone)]
pub enum CorrGammaSampler {
    /// `x = (S + X1)/b1`, `y = (S + X2)/b2` with a common Gamma part `S`.
    Shared {
        shared: Option<Gamma<f64>>,
        own1: Option<Gamma<f64>>,
        own2: Option<Gamma<f64>>,
        b1: f64,
        b2: f64,
    },
    /// Gaussian copula with the normal correlation tuned on a pilot sample.
    Copula {
        g1: statrs::distribution::Gamma,
        g2: statrs::distribution::Gamma,
        r: f64,
    },
}

impl CorrGammaSampler {
    pub fn new(pair: &CorrGammaPair) -> Self {
        let s = pair.rho * (pair.a1 * pair.a2).sqrt();
        if s <= pair.a1.min(pair.a2) * (1.0 + 1e-12) {
            let mk = |shape: f64| (shape > 1e-12).then(|| Gamma::new(shape, 1.0).unwrap());
            return CorrGammaSampler::Shared {
                shared: mk(s),
                own1: mk((pair.a1 - s).max(0.0)),
                own2: mk((pair.a2 - s).max(0.0)),
                b1: pair.b1,
                b2: pair.b2,
            };
        }
        let g1 = statrs::distribution::Gamma::new(pair.a1, pair.b1).unwrap();
        let g2 = statrs::distribution::Gamma::new(pair.a2, pair.b2).unwrap();
        let mut rng = substream(0x5eed, &[STREAM_ORACLE, 99]);
        let pilot: Vec<(f64, f64)> = (0..20_000)
            .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let corr_at = |r: f64| {
            let smp = CorrGammaSampler::Copula { g1, g2, r };
            let (xs, ys): (Vec<f64>, Vec<f64>) = pilot.iter().map(|&(u, e)| smp.transform(u, e)).unzip();
            pearson_se(&xs, &ys).0
        };
        let (mut lo, mut hi) = (pair.rho, 1.0 - 1e-9);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if corr_at(mid) < pair.rho {
                lo = mid
            } else {
                hi = mid
            }
        }
        CorrGammaSampler::Copula {
            g1,
            g2,
            r: 0.5 * (lo + hi),
        }
    }

    fn transform(&self, u: f64, e: f64) -> (f64, f64) {
        match self {
            CorrGammaSampler::Copula { g1, g2, r } => {
                let w = r * u + (1.0 - r * r).sqrt() * e;
                let p = |t: f64| q_func(-t).clamp(1e-300, 1.0 - 1e-16);
                (g1.inverse_cdf(p(u)), g2.inverse_cdf(p(w)))
            }
            CorrGammaSampler::Shared { .. } => unreachable!("shared sampler draws directly"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self {
            CorrGammaSampler::Shared {
                shared,
                own1,
                own2,
                b1,
                b2,
            } => {
                let draw = |g: &Option<Gamma<f64>>, rng: &mut R| g.map_or(0.0, |g| g.sample(rng));
                let s = draw(shared, rng);
                let x1 = draw(own1, rng);
                let x2 = draw(own2, rng);
                ((s + x1) / b1, (s + x2) / b2)
            }
            CorrGammaSampler::Copula { .. } => {
                let u: f64 = StandardNormal.sample(rng);
                let e: f64 = StandardNormal.sample(rng);
                self.transform(u, e)
            }
        }
    }
}

/// Monte Carlo estimate of `E|x - y|^m` and its standard error.
pub fn gamma_diff_abs_moment_mc(pair: &CorrGammaPair, m: u32, n: usize, seed: u64) -> (f64, f64) {
    let sampler = CorrGammaSampler::new(pair);
    let chunk = 10_000;
    let n_chunks = n.div_ceil(chunk);
    let vals: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = substream(seed, &[STREAM_ORACLE, 7, c as u64]);
            let len = chunk.min(n - c * chunk);
            let sampler = &sampler;
            (0..len)
                .map(move |_| {
                    let (x, y) = sampler.sample(&mut rng);
                    (x - y).abs().powi(m as i32)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    mean_se(&vals)
}
