//! Imperfect-CSI rate quantities: matched Gamma fit of the normalised
//! output and noise norms, mismatched nearest-neighbour capacity and
//! dispersion, and the hypergeometric perturbation term.

use crate::channel::{mmse_gain, BlockLinkStats};
use crate::coherent_metrics::{
    assemble_report, capacity_dispersion, perturbation_constant, Asymptotics, BlockMetrics, Capacity, MatchSummary,
    RateReport, C1,
};
use crate::config::{PowerScaling, Scheme, SystemConfig};
use crate::error::{domain, Error, Result};
use crate::gamma_moments::{abs_moment_aligned, LemmaCoefficients};
use crate::specfun::{gauss_2f1, lgam, Tolerance};
use serde::Serialize;

/// Matched Gamma parameters of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaMatch {
    pub beta_y: f64,
    pub beta_n: f64,
    pub rho: f64,
    pub xi: f64,
}

fn data_len(t_c: usize, tau_c: usize) -> Result<f64> {
    if tau_c >= t_c {
        return domain(format!("pilot length {tau_c} must be below coherence {t_c}"));
    }
    Ok((t_c - tau_c) as f64)
}

/// Moment-matched shapes and correlation for a non-coherent block.
pub fn gamma_match(stats: &BlockLinkStats, t_c: usize, tau_c: usize) -> Result<GammaMatch> {
    let t = data_len(t_c, tau_c)?;
    let s = stats.sinr;
    let e = stats.err_self / stats.noise_var;
    let d = stats.delta / (stats.noise_var * stats.noise_var);
    let xi = t * (s + 1.0) / ((s * e + 1.0) + d * (t + 1.0));
    let sp = (1.0 + s) * (1.0 + s);
    let beta_y = sp * t / (sp + (2.0 * s * e + d) * (t + 1.0));
    let beta_n = t / (1.0 + d * (t + 1.0));
    let rho = (beta_y * beta_n).sqrt() / xi;
    if !(beta_y > 0.0 && beta_n > 0.0) || !(0.0..1.0).contains(&rho) {
        return Err(Error::Degenerate(format!(
            "matched Gamma out of range: beta_y={beta_y}, beta_n={beta_n}, rho={rho}"
        )));
    }
    Ok(GammaMatch {
        beta_y,
        beta_n,
        rho,
        xi,
    })
}

/// Coefficients of the hypergeometric perturbation form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LCoefficients {
    pub beta_max: f64,
    pub beta_min: f64,
    pub l11: f64,
    pub l12: f64,
    pub l21: f64,
    pub l22: f64,
    pub l: f64,
}

impl LCoefficients {
    /// Hypergeometric arguments; they sum to one by construction of `l`.
    pub fn arguments(&self) -> (f64, f64) {
        (
            self.l22 * self.beta_min.sqrt() / self.l,
            (self.l11 - self.l21) * self.l12.sqrt() / self.l,
        )
    }

    /// The same coefficients in the generic correlated-Gamma parametrisation.
    pub fn as_lemma(&self) -> LemmaCoefficients {
        LemmaCoefficients {
            l11: self.l11,
            l21: self.l21,
            l22: self.l22,
            alpha1: self.beta_min,
            beta1: self.beta_min.sqrt(),
            alpha2: self.l12,
            beta2: self.l12.sqrt(),
        }
    }
}

pub fn l_coefficients(gm: &GammaMatch, t_c: usize, tau_c: usize) -> Result<LCoefficients> {
    let t = data_len(t_c, tau_c)?;
    let beta_max = gm.beta_y.max(gm.beta_n);
    let beta_min = gm.beta_y.min(gm.beta_n);
    let r = gm.rho;
    let c = (1.0 - r * r).sqrt();
    let dd = beta_max.sqrt() - r * beta_min.sqrt();
    let l11 = t / beta_min.sqrt();
    let l12 = dd * dd / (1.0 - r * r);
    let l21 = r * t / beta_max.sqrt();
    let l22 = c * t / beta_max.sqrt();
    let l = l22 * beta_min.sqrt() + (l11 - l21) * l12.sqrt();
    Ok(LCoefficients {
        beta_max,
        beta_min,
        l11,
        l12,
        l21,
        l22,
        l,
    })
}

/// `(I, V)` of a non-coherent block.
pub fn capacity_dispersion_noncoherent(
    stats: &BlockLinkStats,
    gm: &GammaMatch,
    t_c: usize,
    tau_c: usize,
) -> Result<(f64, f64)> {
    let t = data_len(t_c, tau_c)?;
    let tc = t_c as f64;
    let i = t / tc * stats.sinr.ln_1p();
    let v = t * t / tc * (1.0 / gm.beta_y + 1.0 / gm.beta_n - 2.0 * gm.rho / (gm.beta_y * gm.beta_n).sqrt());
    Ok((i, v.max(0.0)))
}

/// Hypergeometric third absolute moment, transcribed term by term.
fn third_abs_hypergeometric(lc: &LCoefficients, tol: &Tolerance) -> Result<f64> {
    let (bm, l12) = (lc.beta_min, lc.l12);
    let g = lc.l11 - lc.l21;
    let ln_pref = (3.0 + bm) * lc.l22.ln() + (3.0 + l12) * g.ln() - (3.0 + l12 + bm) * lc.l.ln()
        + 0.5 * bm * bm.ln()
        + 0.5 * l12 * l12.ln()
        + lgam(3.0 + l12 + bm)
        - lgam(l12)
        - lgam(bm);
    if !ln_pref.is_finite() || ln_pref > 700.0 {
        return Err(Error::Overflow("third moment prefactor"));
    }
    let (z1, z2) = lc.arguments();
    let b = 3.0 + l12 + bm;
    let binom = [1.0, 3.0, 3.0, 1.0];
    let mut omega = 0.0;
    for f in 0..4 {
        let ff = f as f64;
        let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
        let a = gauss_2f1(1.0, b, ff + bm + 1.0, z1, tol)? / (ff + bm);
        let c = gauss_2f1(1.0, b, ff + l12 + 1.0, z2, tol)? / (ff + l12);
        omega += sign * binom[f] * (a + c);
    }
    let v = ln_pref.exp() * omega;
    if v.is_finite() {
        Ok(v.max(0.0))
    } else {
        Err(Error::Overflow("third moment"))
    }
}

/// Per-block `E|v_y - v_n|^3` under the matched Gamma model.
pub fn third_abs_noncoherent(lc: &LCoefficients) -> Result<f64> {
    if lc.l21 >= lc.l11 {
        abs_moment_aligned(&lc.as_lemma(), 3)
    } else {
        third_abs_hypergeometric(lc, &Tolerance::default())
    }
}

/// Everything computed for one non-coherent block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoncoherentBlock {
    pub metrics: BlockMetrics,
    pub gamma: GammaMatch,
    pub lc: LCoefficients,
    pub delta: f64,
}

pub fn block_metrics_noncoherent(stats: &BlockLinkStats, t_c: usize, tau_c: usize) -> Result<NoncoherentBlock> {
    let gamma = gamma_match(stats, t_c, tau_c)?;
    let lc = l_coefficients(&gamma, t_c, tau_c)?;
    let (capacity, dispersion) = capacity_dispersion_noncoherent(stats, &gamma, t_c, tau_c)?;
    let third_abs = third_abs_noncoherent(&lc)?;
    Ok(NoncoherentBlock {
        metrics: BlockMetrics {
            capacity,
            dispersion,
            third_abs,
        },
        gamma,
        lc,
        delta: stats.delta,
    })
}

/// `c1 L^{-1/2} (T_c mean V)^{-3/2} mean(U~)`.
pub fn perturbation_noncoherent(thirds: &[f64], vs: &[f64], n_blocks: usize, t_c: usize) -> Result<f64> {
    if vs.is_empty() || thirds.len() != vs.len() {
        return domain("perturbation needs matching, nonempty block sequences");
    }
    if vs.iter().any(|&v| !(v >= 0.0)) {
        return domain("dispersions must be nonnegative");
    }
    let n = vs.len() as f64;
    let mean_v = vs.iter().sum::<f64>() / n;
    if mean_v == 0.0 {
        return Err(Error::Degenerate("all block dispersions are zero".into()));
    }
    let mean_u = thirds.iter().sum::<f64>() / n;
    Ok(C1 / (n_blocks as f64).sqrt() * (t_c as f64 * mean_v).powf(-1.5) * mean_u)
}

pub fn threshold_and_rate_noncoherent(
    cfg: &SystemConfig,
    user: usize,
    blocks: &[NoncoherentBlock],
    eps: f64,
    mu: f64,
) -> Result<RateReport> {
    if user >= cfg.n_users {
        return domain(format!("user {user} out of range ({} users)", cfg.n_users));
    }
    if blocks.len() != cfg.n_blocks {
        return domain(format!("{} blocks given, config has {}", blocks.len(), cfg.n_blocks));
    }
    let n = blocks.len() as f64;
    let mean = |f: &dyn Fn(&NoncoherentBlock) -> f64| blocks.iter().map(f).sum::<f64>() / n;
    let vs: Vec<f64> = blocks.iter().map(|b| b.metrics.dispersion).collect();
    let thirds: Vec<f64> = blocks.iter().map(|b| b.metrics.third_abs).collect();
    let mean_i = mean(&|b| b.metrics.capacity);
    let mean_v = mean(&|b| b.metrics.dispersion);
    let u = if mean_v > 0.0 {
        perturbation_noncoherent(&thirds, &vs, cfg.n_blocks, cfg.coherence)?
    } else {
        0.0
    };
    let mut r = assemble_report(cfg.msg_nats[user], cfg.blocklength() as f64, mean_i, mean_v, u, eps, mu)?;
    r.gamma = Some(MatchSummary {
        beta_y: mean(&|b| b.gamma.beta_y),
        beta_n: mean(&|b| b.gamma.beta_n),
        rho: mean(&|b| b.gamma.rho),
        delta: mean(&|b| b.delta),
    });
    Ok(r)
}

/// Large-array limits together with the limiting noise statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncoherentAsymptotics {
    pub limits: Asymptotics,
    pub noise_var: f64,
    pub delta: f64,
    pub beta_y: f64,
    pub beta_n: f64,
    pub rho: f64,
}

/// Limits of `(I, V, U)` as the antenna count grows.
///
/// Without power scaling the dispersion keeps the estimation-error terms;
/// under `inverse_sqrt_Nb` the effective noise becomes Gaussian. The
/// `inverse_Nb` law has no stated limit here and is rejected.
pub fn asymptotics_noncoherent(cfg: &SystemConfig, scheme: Scheme, user: usize) -> Result<NoncoherentAsymptotics> {
    if user >= cfg.n_users {
        return domain(format!("user {user} out of range ({} users)", cfg.n_users));
    }
    let t = data_len(cfg.coherence, cfg.pilot_len)?;
    let tc = cfg.coherence as f64;
    let k = user;
    match cfg.power_scaling {
        PowerScaling::InverseNb => Err(Error::Config(
            "non-coherent limits are defined without scaling or with inverse_sqrt_Nb".into(),
        )),
        PowerScaling::InverseSqrtNb => {
            let g2 = cfg.large_scale[k];
            let snr = cfg.pilot_len as f64 * g2 * g2 * cfg.tx_power_data[k] * cfg.tx_power_pilot[k]
                / (cfg.noise_pilot * cfg.noise_data);
            let (i, v) = capacity_dispersion(snr);
            Ok(NoncoherentAsymptotics {
                limits: Asymptotics {
                    capacity: Capacity::Finite(t / tc * i),
                    dispersion: t / tc * v,
                    perturbation: perturbation_constant(cfg.n_blocks, t),
                },
                noise_var: cfg.noise_data,
                delta: 0.0,
                beta_y: t,
                beta_n: t,
                rho: 1.0 / (1.0 + snr),
            })
        }
        PowerScaling::None => {
            let p = |m: usize| cfg.tx_power_data[m];
            let gam = |m: usize| cfg.large_scale[m];
            let phi = |m: usize| mmse_gain(cfg, m);
            let err = |m: usize| gam(m) - phi(m);
            let (noise_var, delta) = match scheme {
                Scheme::Mrc => {
                    let mut s = p(k) * err(k) + cfg.noise_data;
                    let mut d = (p(k) * err(k)).powi(2);
                    for m in (0..cfg.n_users).filter(|&m| m != k) {
                        s += p(m) * gam(m);
                        d += p(m) * p(m) * (gam(m) * gam(m) - phi(m) * phi(m));
                    }
                    (s, d)
                }
                Scheme::Zf => {
                    let s = (0..cfg.n_users).map(|m| p(m) * err(m)).sum::<f64>() + cfg.noise_data;
                    let d = (0..cfg.n_users).map(|m| (p(m) * err(m)).powi(2)).sum::<f64>();
                    (s, d)
                }
            };
            let s4 = noise_var * noise_var;
            let beta_y = t;
            let beta_n = t / (1.0 + (t + 1.0) * delta / s4);
            let rho = p(k) * err(k) / (s4 + (t + 1.0) * delta).sqrt();
            let gm = GammaMatch {
                beta_y,
                beta_n,
                rho,
                xi: (beta_y * beta_n).sqrt() / rho,
            };
            let v = t * t / tc * (1.0 / beta_y + 1.0 / beta_n - 2.0 * rho / (beta_y * beta_n).sqrt());
            let lc = l_coefficients(&gm, cfg.coherence, cfg.pilot_len)?;
            let u = perturbation_noncoherent(&[third_abs_noncoherent(&lc)?], &[v], cfg.n_blocks, cfg.coherence)?;
            Ok(NoncoherentAsymptotics {
                limits: Asymptotics {
                    capacity: Capacity::Infinite,
                    dispersion: v,
                    perturbation: u,
                },
                noise_var,
                delta,
                beta_y,
                beta_n,
                rho,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{all_block_stats, draw_channels};
    use crate::coherent_metrics::{perturbation_lower_bound, perturbation_upper_bound};
    use crate::config::Mode;
    use crate::gamma_moments::{abs_moment_gamma_diff, CorrGammaPair};
    use crate::oracle::stirling_ln_gamma;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn stats(sinr: f64, err_self: f64, delta: f64, noise_var: f64) -> BlockLinkStats {
        BlockLinkStats {
            gain: 1.0,
            noise_var,
            sinr,
            delta,
            err_self,
            power: 1.0,
        }
    }

    #[test]
    fn zero_error_reduction() {
        for s in [0.1, 1.0, 7.5, 300.0] {
            let gm = gamma_match(&stats(s, 0.0, 0.0, 2.0), 20, 5).unwrap();
            assert_relative_eq!(gm.beta_y, 15.0, max_relative = 1e-14);
            assert_relative_eq!(gm.beta_n, 15.0, max_relative = 1e-14);
            assert_relative_eq!(gm.rho, 1.0 / (1.0 + s), max_relative = 1e-14);
            let (i, v) = capacity_dispersion_noncoherent(&stats(s, 0.0, 0.0, 2.0), &gm, 20, 5).unwrap();
            let (ic, vc) = capacity_dispersion(s);
            assert_relative_eq!(i, 0.75 * ic, max_relative = 1e-12);
            assert_relative_eq!(v, 0.75 * vc, max_relative = 1e-12);
            let gm0 = gamma_match(&stats(s, 0.0, 0.0, 2.0), 20, 0).unwrap();
            let (i0, v0) = capacity_dispersion_noncoherent(&stats(s, 0.0, 0.0, 2.0), &gm0, 20, 0).unwrap();
            assert_relative_eq!(i0, ic, max_relative = 1e-12);
            assert_relative_eq!(v0, vc, max_relative = 1e-12);
        }
    }

    #[test]
    fn noise_shape_shrinks_with_delta() {
        let (sig, d) = (2.0, 0.3);
        let gm = gamma_match(&stats(4.0, 0.0, d, sig), 20, 5).unwrap();
        let want = 15.0 / (1.0 + d / (sig * sig) * 16.0);
        assert_relative_eq!(gm.beta_n, want, max_relative = 1e-14);
        assert!(gm.beta_n < 15.0);
    }

    #[test]
    fn l_coefficient_collapse_at_zero_correlation() {
        let gm = GammaMatch {
            beta_y: 9.0,
            beta_n: 9.0,
            rho: 0.0,
            xi: f64::INFINITY,
        };
        let lc = l_coefficients(&gm, 20, 5).unwrap();
        assert_relative_eq!(lc.l11, 15.0 / 3.0);
        assert_eq!(lc.l21, 0.0);
        assert_relative_eq!(lc.l22, 15.0 / 3.0);
        assert_relative_eq!(lc.l12, 9.0);
        let gm = GammaMatch {
            beta_y: 9.0,
            beta_n: 9.0,
            rho: 1.0 - 1e-12,
            xi: 9.0,
        };
        assert!(l_coefficients(&gm, 20, 5).unwrap().l22 < 1e-5);
    }

    #[test]
    fn hypergeometric_form_is_the_lemma_instance() {
        let grid = [
            (15.0, 15.0, 0.1),
            (15.0, 11.0, 0.3),
            (8.0, 14.0, 0.05),
            (35.0, 20.0, 0.5),
            (14.9, 12.0, 0.7),
        ];
        for (by, bn, rho) in grid {
            let t = 15.0;
            let gm = GammaMatch {
                beta_y: by,
                beta_n: bn,
                rho,
                xi: (by * bn).sqrt() / rho,
            };
            let lc = l_coefficients(&gm, 20, 5).unwrap();
            let pair = CorrGammaPair::new(by, by / t, bn, bn / t, rho).unwrap();
            let lemma = abs_moment_gamma_diff(&pair, 3).unwrap();
            let here = third_abs_noncoherent(&lc).unwrap();
            assert_relative_eq!(here, lemma, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_error_gaussian_limit_constant() {
        // Stirling-series evaluation of the Gamma ratio at T' = 15
        let t: f64 = 15.0;
        let r = (stirling_ln_gamma(t + 1.5) - stirling_ln_gamma(t + 1.0)).exp() / t.sqrt();
        let oracle = 4.0 * C1 / (2.0 * PI).sqrt() / 10f64.sqrt() * r;
        assert!((oracle - 0.289_587_7).abs() < 1e-6, "{oracle}");
        let mut cfg = SystemConfig::baseline();
        cfg.power_scaling = PowerScaling::InverseSqrtNb;
        let a = asymptotics_noncoherent(&cfg, Scheme::Mrc, 0).unwrap();
        assert_relative_eq!(a.limits.perturbation, oracle, max_relative = 1e-12);
        assert!(oracle >= perturbation_lower_bound(10, t) && oracle <= perturbation_upper_bound(10, t));
        // the block route goes through the two-Gamma approximation, which is
        // not exact for chi-square pairs
        let gm = GammaMatch {
            beta_y: t,
            beta_n: t,
            rho: a.rho,
            xi: t / a.rho,
        };
        let lc = l_coefficients(&gm, 20, 5).unwrap();
        let v = t * t / 20.0 * (2.0 / t - 2.0 * a.rho / t);
        let u = perturbation_noncoherent(&[third_abs_noncoherent(&lc).unwrap()], &[v], 10, 20).unwrap();
        assert_relative_eq!(u, oracle, max_relative = 0.02);
    }

    #[test]
    fn limit_bracket_holds_on_a_grid() {
        for l in [1, 4, 10, 64] {
            for (t_c, tau) in [(10, 2), (20, 5), (40, 5), (80, 30), (200, 10)] {
                let t = (t_c - tau) as f64;
                let u = perturbation_constant(l, t);
                assert!(u >= perturbation_lower_bound(l, t) && u <= perturbation_upper_bound(l, t));
            }
        }
    }

    #[test]
    fn scaled_capacity_unit_point() {
        let mut cfg = SystemConfig::baseline();
        cfg.power_scaling = PowerScaling::InverseSqrtNb;
        let g2 = cfg.large_scale[0];
        let target = std::f64::consts::E - 1.0;
        cfg.tx_power_data[0] =
            target * cfg.noise_pilot * cfg.noise_data / (cfg.pilot_len as f64 * g2 * g2 * cfg.tx_power_pilot[0]);
        let a = asymptotics_noncoherent(&cfg, Scheme::Zf, 0).unwrap();
        assert_relative_eq!(a.limits.capacity.value(), 15.0 / 20.0, max_relative = 1e-12);
        cfg.power_scaling = PowerScaling::InverseNb;
        assert!(matches!(
            asymptotics_noncoherent(&cfg, Scheme::Mrc, 0),
            Err(Error::Config(_))
        ));
    }

    fn mean_match(cfg: &SystemConfig, scheme: Scheme, seed: u64) -> (f64, f64, f64) {
        let ch = draw_channels(cfg, Mode::Noncoherent, seed);
        let st = all_block_stats(&ch, cfg, scheme, 0).unwrap();
        let n = st.len() as f64;
        let gms: Vec<_> = st
            .iter()
            .map(|s| gamma_match(s, cfg.coherence, cfg.pilot_len).unwrap())
            .collect();
        (
            gms.iter().map(|g| g.beta_y).sum::<f64>() / n,
            gms.iter().map(|g| g.beta_n).sum::<f64>() / n,
            gms.iter().map(|g| g.rho).sum::<f64>() / n,
        )
    }

    #[test]
    fn finite_array_approaches_unscaled_limits() {
        let mut cfg = SystemConfig::baseline();
        cfg.n_antennas = 4096;
        let a = asymptotics_noncoherent(&cfg, Scheme::Zf, 0).unwrap();
        let (by, bn, rho) = mean_match(&cfg, Scheme::Zf, 11);
        assert_relative_eq!(by, a.beta_y, max_relative = 0.02);
        assert_relative_eq!(bn, a.beta_n, max_relative = 0.02);
        assert_relative_eq!(rho, a.rho, max_relative = 0.02);
        assert!(a.rho > 0.0);
        assert!(a.beta_n < 15.0);
        assert!(a.limits.capacity.is_infinite());
        // MRC leakage |a^H h_m|^2 stays exponential at any array size, so the
        // block average keeps a Jensen gap to the limit built from its mean
        let a = asymptotics_noncoherent(&cfg, Scheme::Mrc, 0).unwrap();
        let (by, bn, rho) = mean_match(&cfg, Scheme::Mrc, 11);
        assert_relative_eq!(by, a.beta_y, max_relative = 0.02);
        assert_relative_eq!(bn, a.beta_n, max_relative = 0.05);
        assert_relative_eq!(rho, a.rho, max_relative = 0.05);
        let mut single = cfg.clone();
        single.n_users = 1;
        single.pilot_len = 5;
        for v in [
            &mut single.tx_power_data,
            &mut single.tx_power_pilot,
            &mut single.large_scale,
        ] {
            v.truncate(1);
        }
        single.msg_nats.truncate(1);
        single.target_eps.truncate(1);
        let a = asymptotics_noncoherent(&single, Scheme::Mrc, 0).unwrap();
        let (by, bn, rho) = mean_match(&single, Scheme::Mrc, 11);
        assert_relative_eq!(by, a.beta_y, max_relative = 0.02);
        assert_relative_eq!(bn, a.beta_n, max_relative = 0.02);
        assert_relative_eq!(rho, a.rho, max_relative = 0.02);
    }

    #[test]
    fn finite_array_approaches_scaled_limits() {
        // the scaled limits converge like N_b^{-1/2}; a low-SNR point keeps
        // the remaining gap small at 1024 antennas
        let mut cfg = SystemConfig::baseline();
        cfg.n_antennas = 1024;
        cfg.pilot_len = 10;
        cfg.power_scaling = PowerScaling::InverseSqrtNb;
        let e = 0.1 * cfg.noise_data / cfg.large_scale[0];
        cfg.tx_power_data = vec![e; 5];
        cfg.tx_power_pilot = vec![e; 5];
        for scheme in [Scheme::Mrc, Scheme::Zf] {
            let a = asymptotics_noncoherent(&cfg, scheme, 0).unwrap();
            let (by, bn, rho) = mean_match(&cfg, scheme, 5);
            assert_relative_eq!(by, 10.0, max_relative = 0.02);
            assert_relative_eq!(bn, 10.0, max_relative = 0.02);
            assert_relative_eq!(rho, a.rho, max_relative = 0.02);
        }
    }

    #[test]
    fn report_carries_match_summary() {
        let cfg = SystemConfig::baseline();
        let ch = draw_channels(&cfg, Mode::Noncoherent, 3);
        let blocks: Vec<_> = all_block_stats(&ch, &cfg, Scheme::Mrc, 1)
            .unwrap()
            .iter()
            .map(|s| block_metrics_noncoherent(s, 20, 5).unwrap())
            .collect();
        let r = threshold_and_rate_noncoherent(&cfg, 1, &blocks, 1e-5, 0.5).unwrap();
        let g = r.gamma.unwrap();
        assert!(g.beta_y > 0.0 && g.beta_y <= 15.0);
        assert!(g.beta_n > 0.0 && g.beta_n <= 15.0);
        assert!(r.perturbation > 0.0);
        assert!(r.eps_taylor <= r.eps_beclt);
    }

    #[test]
    fn median_threshold() {
        let mut cfg = SystemConfig::baseline();
        cfg.n_blocks = 3;
        let blocks: Vec<_> = [2.0, 5.0, 9.0]
            .iter()
            .map(|&s| block_metrics_noncoherent(&stats(s, 0.1, 0.05, 1.0), 20, 5).unwrap())
            .collect();
        let mean_i = blocks.iter().map(|b| b.metrics.capacity).sum::<f64>() / 3.0;
        cfg.msg_nats = vec![60.0 * mean_i + 0.3f64.ln(); 5];
        let r = threshold_and_rate_noncoherent(&cfg, 2, &blocks, 1e-3, 0.3).unwrap();
        assert_relative_eq!(r.q_thres, 0.5, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn match_invariants(s in 0.01f64..1e3, e in 0.0f64..0.5, d in 0.0f64..0.5, tau in 1usize..15) {
            let st = stats(s, e, d, 1.0);
            let gm = gamma_match(&st, 20, tau).unwrap();
            let t = (20 - tau) as f64;
            prop_assert!(gm.beta_y > 0.0 && gm.beta_y <= t * (1.0 + 1e-12));
            prop_assert!(gm.beta_n > 0.0 && gm.beta_n <= t * (1.0 + 1e-12));
            prop_assert!((0.0..1.0).contains(&gm.rho));
            prop_assert!(((gm.beta_y * gm.beta_n).sqrt() / gm.xi - gm.rho).abs() < 1e-14);
            let (_, v) = capacity_dispersion_noncoherent(&st, &gm, 20, tau).unwrap();
            prop_assert!(v >= 0.0);
        }

        #[test]
        fn arguments_sum_to_one(by in 0.5f64..60.0, bn in 0.5f64..60.0, rho in 0.0f64..0.99) {
            let gm = GammaMatch { beta_y: by, beta_n: bn, rho, xi: 1.0 };
            let lc = l_coefficients(&gm, 80, 10).unwrap();
            let (z1, z2) = lc.arguments();
            prop_assert!(lc.l >= 0.0 && lc.l22 >= 0.0);
            prop_assert!((z1 + z2 - 1.0).abs() < 1e-12);
        }

        #[test]
        fn block_third_moment_is_the_lemma(s in 0.5f64..200.0, e in 0.0f64..0.3, d in 0.0f64..0.3) {
            let gm = gamma_match(&stats(s, e, d, 1.0), 20, 5).unwrap();
            let lc = l_coefficients(&gm, 20, 5).unwrap();
            let pair = CorrGammaPair::new(gm.beta_y, gm.beta_y / 15.0, gm.beta_n, gm.beta_n / 15.0, gm.rho).unwrap();
            let a = third_abs_noncoherent(&lc).unwrap();
            let b = abs_moment_gamma_diff(&pair, 3).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * b);
        }
    }
}
