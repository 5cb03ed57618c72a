//! Achievable-rate quantities for perfectly known channels, shared report
//! type and the CSV row layout used by every mode.

use crate::channel::BlockLinkStats;
use crate::config::{Mode, PowerScaling, Scheme, SystemConfig};
use crate::error::{domain, Error, Result};
use crate::gamma_moments::{abs_moment_chisq_diff, CorrChiSqPair};
use crate::specfun::{lgam, q_func, q_inv};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Berry-Esseen constant.
pub const C1: f64 = 0.56;

/// Per-block capacity, dispersion and absolute third central moment of the
/// block information density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockMetrics {
    pub capacity: f64,
    pub dispersion: f64,
    pub third_abs: f64,
}

/// `(ln(1+sinr), 2 - 2/(1+sinr))`.
pub fn capacity_dispersion(sinr: f64) -> (f64, f64) {
    (sinr.ln_1p(), 2.0 - 2.0 / (1.0 + sinr))
}

/// Block metrics for a coherent block of `t_c` symbols.
pub fn block_metrics(stats: &BlockLinkStats, t_c: usize) -> Result<BlockMetrics> {
    if !(stats.sinr >= 0.0) {
        return domain(format!("sinr must be nonnegative, got {}", stats.sinr));
    }
    let (capacity, dispersion) = capacity_dispersion(stats.sinr);
    let rho = 1.0 / (1.0 + stats.sinr);
    // the centred block density is half a difference of two chi-square(2T)
    let third_abs = if rho < 1.0 {
        let pair = CorrChiSqPair::new(2 * t_c as u32, rho)?;
        abs_moment_chisq_diff(&pair, 3)? / 8.0
    } else {
        0.0
    };
    Ok(BlockMetrics {
        capacity,
        dispersion,
        third_abs,
    })
}

/// `ln(Gamma(t + 3/2) / (sqrt(t) Gamma(t + 1)))`.
fn ln_gamma_ratio(t: f64) -> f64 {
    lgam(t + 1.5) - lgam(t + 1.0) - 0.5 * t.ln()
}

/// Limit of the perturbation when every block has the same dispersion.
pub fn perturbation_constant(n_blocks: usize, t: f64) -> f64 {
    4.0 * C1 / (2.0 * PI).sqrt() / (n_blocks as f64).sqrt() * ln_gamma_ratio(t).exp()
}

/// `(4 c1 / sqrt(2 pi)) L^{-1/2} (1 + 1/t)^{1/2}`, an upper bound on
/// [`perturbation_constant`].
pub fn perturbation_upper_bound(n_blocks: usize, t: f64) -> f64 {
    4.0 * C1 / (2.0 * PI).sqrt() / (n_blocks as f64).sqrt() * (1.0 + 1.0 / t).sqrt()
}

/// `(4 c1 / sqrt(2 pi)) L^{-1/2} / sqrt(t (t + 3/2))`, a lower bound on
/// [`perturbation_constant`].
pub fn perturbation_lower_bound(n_blocks: usize, t: f64) -> f64 {
    4.0 * C1 / (2.0 * PI).sqrt() / (n_blocks as f64).sqrt() / (t * (t + 1.5)).sqrt()
}

/// Coherent perturbation term from the per-block dispersions.
pub fn perturbation_coherent(vs: &[f64], n_blocks: usize, t_c: usize) -> Result<f64> {
    if vs.is_empty() || n_blocks == 0 || t_c == 0 {
        return domain("perturbation needs at least one block and one symbol");
    }
    if vs.iter().any(|&v| !(v >= 0.0)) {
        return domain("dispersions must be nonnegative");
    }
    let n = vs.len() as f64;
    let mean_v = vs.iter().sum::<f64>() / n;
    if mean_v == 0.0 {
        return Err(Error::Degenerate("all block dispersions are zero".into()));
    }
    let mean_v32 = vs.iter().map(|v| v * v.sqrt()).sum::<f64>() / n;
    Ok(perturbation_constant(n_blocks, t_c as f64) * mean_v32 / (mean_v * mean_v.sqrt()))
}

/// Block means of the matched-Gamma parameters, reported for non-coherent rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchSummary {
    pub beta_y: f64,
    pub beta_n: f64,
    pub rho: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub mean_capacity: f64,
    pub mean_dispersion: f64,
    pub perturbation: f64,
    pub q_thres: f64,
    /// Normal-approximation rate, nats per channel use.
    pub rate_normal: f64,
    /// Half-width of the `O(U)` band around `rate_normal`.
    pub rate_band: f64,
    pub eps_beclt: f64,
    pub eps_taylor: f64,
    pub condition_ok: bool,
    pub mu_used: f64,
    pub gamma: Option<MatchSummary>,
}

/// Threshold, rate and error figures from block-averaged `(I, V)` and `U`.
///
/// `n` is the total blocklength `L T_c`.
pub fn assemble_report(ln_m: f64, n: f64, mean_i: f64, mean_v: f64, u: f64, eps: f64, mu: f64) -> Result<RateReport> {
    if !(mu > 0.0 && mu < 1.0) {
        return domain(format!("mu must lie in (0, 1), got {mu}"));
    }
    let ln_mu = mu.ln();
    let gap = (ln_m - ln_mu) / n - mean_i;
    let q_thres = if mean_v > 0.0 {
        q_func(gap / (mean_v / n).sqrt())
    } else if gap > 0.0 {
        0.0
    } else if gap < 0.0 {
        1.0
    } else {
        0.5
    };
    let spread = (mean_v / n).sqrt();
    let rate_normal = mean_i + ln_mu / n - spread * q_inv(eps)?;
    let eps_taylor = 1.0 - q_thres;
    Ok(RateReport {
        mean_capacity: mean_i,
        mean_dispersion: mean_v,
        perturbation: u,
        q_thres,
        rate_normal,
        rate_band: spread * u,
        eps_beclt: (eps_taylor + u).min(1.0),
        eps_taylor,
        condition_ok: u <= q_thres,
        mu_used: mu,
        gamma: None,
    })
}

fn check_user(cfg: &SystemConfig, user: usize, blocks: usize) -> Result<()> {
    if user >= cfg.n_users {
        return domain(format!("user {user} out of range ({} users)", cfg.n_users));
    }
    if blocks != cfg.n_blocks {
        return domain(format!("{blocks} block metrics given, config has {}", cfg.n_blocks));
    }
    Ok(())
}

/// Coherent report for `user` at error target `eps` and message parameter `mu`.
pub fn threshold_and_rate(
    cfg: &SystemConfig,
    user: usize,
    metrics: &[BlockMetrics],
    eps: f64,
    mu: f64,
) -> Result<RateReport> {
    check_user(cfg, user, metrics.len())?;
    let n = metrics.len() as f64;
    let mean_i = metrics.iter().map(|m| m.capacity).sum::<f64>() / n;
    let vs: Vec<f64> = metrics.iter().map(|m| m.dispersion).collect();
    let mean_v = vs.iter().sum::<f64>() / n;
    let u = if mean_v > 0.0 {
        perturbation_coherent(&vs, cfg.n_blocks, cfg.coherence)?
    } else {
        0.0
    };
    assemble_report(cfg.msg_nats[user], cfg.blocklength() as f64, mean_i, mean_v, u, eps, mu)
}

/// Message size `ln M` at which the Taylor error estimate equals `target`.
pub fn msg_nats_for_eps(n: f64, mean_i: f64, mean_v: f64, mu: f64, target: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return domain(format!("mu must lie in (0, 1), got {mu}"));
    }
    Ok(mu.ln() + n * mean_i - (n * mean_v).sqrt() * q_inv(target)?)
}

/// Blocklength needed to reach a fraction `eta` of capacity `c` at error `eps`.
pub fn min_blocklength(eta: f64, eps: f64, c: f64, v: f64) -> Result<f64> {
    if !(c > 0.0) {
        return domain(format!("capacity must be positive, got {c}"));
    }
    if !(0.0..1.0).contains(&eta) {
        return domain(format!("eta must lie in [0, 1), got {eta}"));
    }
    if !(v >= 0.0) {
        return domain(format!("dispersion must be nonnegative, got {v}"));
    }
    let r = q_inv(eps)? / (1.0 - eta);
    Ok((r * r * v / (c * c)).ceil())
}

/// Large-array capacity limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    pub fn value(&self) -> f64 {
        match *self {
            Capacity::Finite(c) => c,
            Capacity::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Capacity::Infinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotics {
    pub capacity: Capacity,
    pub dispersion: f64,
    pub perturbation: f64,
}

/// Limits of `(I, V, U)` as the antenna count grows, for either combiner.
///
/// Under `inverse_sqrt_Nb` the coherent SINR still diverges, so the limits
/// coincide with the unscaled ones.
pub fn asymptotics_coherent(cfg: &SystemConfig, user: usize) -> Result<Asymptotics> {
    if user >= cfg.n_users {
        return domain(format!("user {user} out of range ({} users)", cfg.n_users));
    }
    let perturbation = perturbation_constant(cfg.n_blocks, cfg.coherence as f64);
    Ok(match cfg.power_scaling {
        PowerScaling::None | PowerScaling::InverseSqrtNb => Asymptotics {
            capacity: Capacity::Infinite,
            dispersion: 2.0,
            perturbation,
        },
        PowerScaling::InverseNb => {
            let snr = cfg.large_scale[user] * cfg.tx_power_data[user] / cfg.noise_data;
            let (c, v) = capacity_dispersion(snr);
            Asymptotics {
                capacity: Capacity::Finite(c),
                dispersion: v,
                perturbation,
            }
        }
    })
}

/// Identifies one CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowContext {
    pub scheme: Scheme,
    pub mode: Mode,
    pub n_antennas: usize,
    pub n_users: usize,
    pub n_blocks: usize,
    pub coherence: usize,
    pub pilot_len: usize,
    pub user: usize,
}

impl RowContext {
    pub fn new(cfg: &SystemConfig, scheme: Scheme, mode: Mode, user: usize) -> Self {
        RowContext {
            scheme,
            mode,
            n_antennas: cfg.n_antennas,
            n_users: cfg.n_users,
            n_blocks: cfg.n_blocks,
            coherence: cfg.coherence,
            pilot_len: match mode {
                Mode::Coherent => 0,
                Mode::Noncoherent => cfg.pilot_len,
            },
            user,
        }
    }
}

pub const CSV_COLUMNS: [&str; 17] = [
    "scheme",
    "mode",
    "N_b",
    "K_u",
    "L",
    "T_c",
    "tau_c",
    "user",
    "meanI",
    "meanV",
    "U",
    "q_thres",
    "R_app",
    "rate_band",
    "eps_beclt",
    "eps_taylor",
    "condition_ok",
];

pub const CSV_GAMMA_COLUMNS: [&str; 4] = ["beta_y", "beta_n", "rho", "delta"];

/// Header line for report rows of the given mode.
pub fn csv_header(mode: Mode) -> String {
    let mut cols: Vec<&str> = CSV_COLUMNS.to_vec();
    if mode == Mode::Noncoherent {
        cols.extend(CSV_GAMMA_COLUMNS);
    }
    cols.join(",")
}

/// Real in scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl RateReport {
    pub fn csv_row(&self, ctx: &RowContext) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            ctx.scheme.as_str(),
            ctx.mode.as_str(),
            ctx.n_antennas,
            ctx.n_users,
            ctx.n_blocks,
            ctx.coherence,
            ctx.pilot_len,
            ctx.user
        );
        for x in [
            self.mean_capacity,
            self.mean_dispersion,
            self.perturbation,
            self.q_thres,
            self.rate_normal,
            self.rate_band,
            self.eps_beclt,
            self.eps_taylor,
        ] {
            s.push(',');
            s.push_str(&fmt_real(x));
        }
        s.push(',');
        s.push_str(if self.condition_ok { "true" } else { "false" });
        if ctx.mode == Mode::Noncoherent {
            let g = self.gamma.unwrap_or(MatchSummary {
                beta_y: f64::NAN,
                beta_n: f64::NAN,
                rho: f64::NAN,
                delta: f64::NAN,
            });
            for x in [g.beta_y, g.beta_n, g.rho, g.delta] {
                s.push(',');
                s.push_str(&fmt_real(x));
            }
        }
        s
    }
}
