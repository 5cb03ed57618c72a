//! Monte Carlo of the full uplink signal chain: information densities, RCU
//! error rates, normalised-norm samples and packet loss.
//!
//! Every trial has its own counter-derived generator and results are
//! collected in trial order before any reduction, so the numbers do not
//! depend on the size of the rayon pool.

use crate::analysis::{channel_seed, reports_over_draws};
use crate::channel::{block_stats, draw_channels, mrc_combiner, zf_combiner, CMatrix, CVector, ChannelSet};
use crate::coherent_metrics::{fmt_real, RowContext};
use crate::config::{Mode, MuPolicy, Scheme, SystemConfig};
use crate::error::{domain, Result};
use crate::oracle::{mean_se, pearson_se};
use crate::rng::{complex_normal, derive_seed, substream, STREAM_MU, STREAM_SIGNAL};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

/// How channel randomness enters a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// One channel realisation, signals redrawn per trial.
    Conditional,
    /// A fresh channel realisation for every group of signal trials.
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPlan {
    pub n_channel_draws: usize,
    pub n_signal_draws: usize,
    pub master_seed: u64,
    pub mu_policy: MuPolicy,
    pub mode: SimMode,
}

impl TrialPlan {
    pub fn new(
        n_channel_draws: usize,
        n_signal_draws: usize,
        master_seed: u64,
        mu_policy: MuPolicy,
        mode: SimMode,
    ) -> Result<Self> {
        if n_channel_draws == 0 || n_signal_draws == 0 {
            return domain("trial counts must be at least 1");
        }
        Ok(TrialPlan {
            n_channel_draws,
            n_signal_draws,
            master_seed,
            mu_policy,
            mode,
        })
    }

    /// Single-channel plan with `n` signal trials and a fixed `mu = 0.5`.
    pub fn conditional(n: usize, seed: u64) -> Result<Self> {
        Self::new(1, n, seed, MuPolicy::default(), SimMode::Conditional)
    }
}

/// Information density of one block and the norms it is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDensity {
    pub i: f64,
    pub y_norm2: f64,
    pub n_norm2: f64,
    /// `||y~||^2 / (P g^2 + sigma^2)`.
    pub v_y: f64,
    /// `||n~||^2 / sigma^2`.
    pub v_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoDensitySample {
    pub blocks: Vec<BlockDensity>,
}

impl InfoDensitySample {
    pub fn total(&self) -> f64 {
        self.blocks.iter().map(|b| b.i).sum()
    }
}

/// Coherent generalized information density of a block with decoding
/// parameter `s`; `pg2 = P g^2`.
pub fn info_density_coherent(t: usize, s: f64, pg2: f64, sigma2: f64, y2: f64, n2: f64) -> f64 {
    t as f64 * (s * pg2 / sigma2).ln_1p() + s * y2 / (sigma2 + s * pg2) - s * n2 / sigma2
}

/// Mismatched nearest-neighbour information density of a block.
pub fn info_density_noncoherent(t: usize, s: f64, pg2: f64, y2: f64, n2: f64) -> f64 {
    t as f64 * (s * pg2).ln_1p() + s * y2 / (1.0 + s * pg2) - s * n2
}

struct BlockSetup {
    combiner: CVector,
    /// Channel matrix known to the receiver (true or estimated).
    view: CMatrix,
    gain: f64,
    sigma2: f64,
    pg2: f64,
}

/// Precomputed combiners of one channel realisation; draws signal trials.
pub struct DensitySampler {
    mode: Mode,
    user: usize,
    symbols: usize,
    powers: Vec<f64>,
    err_var: Vec<f64>,
    noise: f64,
    blocks: Vec<BlockSetup>,
}

impl DensitySampler {
    pub fn new(ch: &ChannelSet, cfg: &SystemConfig, scheme: Scheme, user: usize) -> Result<Self> {
        if user >= cfg.n_users {
            return domain(format!("user {user} out of range ({} users)", cfg.n_users));
        }
        let blocks = (0..ch.blocks.len())
            .map(|j| {
                let view = ch.receiver_view(j).clone();
                let combiner = match scheme {
                    Scheme::Mrc => mrc_combiner(&view, user, j)?,
                    Scheme::Zf => zf_combiner(&view, user, j)?.0,
                };
                let st = block_stats(ch, cfg, scheme, user, j)?;
                Ok(BlockSetup {
                    combiner,
                    view,
                    gain: st.gain,
                    sigma2: st.noise_var,
                    pg2: st.power * st.gain * st.gain,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let err_var = match ch.mode {
            Mode::Coherent => vec![0.0; cfg.n_users],
            Mode::Noncoherent => (0..cfg.n_users)
                .map(|m| (cfg.large_scale[m] - ch.est_gain[m]).max(0.0))
                .collect(),
        };
        Ok(DensitySampler {
            mode: ch.mode,
            user,
            symbols: cfg.data_symbols(ch.mode),
            powers: (0..cfg.n_users).map(|m| cfg.data_power(m)).collect(),
            err_var,
            noise: cfg.noise_data,
            blocks,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// One signal trial of block `j`.
    pub fn sample_block<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> BlockDensity {
        let b = &self.blocks[j];
        let (nb, ku) = b.view.shape();
        let t = self.symbols;
        let a = &b.combiner;
        // a^H h_m for the channel the signal actually passes through; the
        // estimation error is redrawn on every trial
        let mut c = vec![Complex64::new(0.0, 0.0); ku];
        for m in 0..ku {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..nb {
                let mut h = b.view[(i, m)];
                if self.mode == Mode::Noncoherent {
                    h += complex_normal(rng, self.err_var[m]);
                }
                acc += a[i].conj() * h;
            }
            c[m] = acc;
        }
        let (mut y2, mut n2) = (0.0, 0.0);
        let mut x = vec![Complex64::new(0.0, 0.0); ku];
        for _ in 0..t {
            for m in 0..ku {
                x[m] = complex_normal(rng, self.powers[m]);
            }
            let mut w = Complex64::new(0.0, 0.0);
            for i in 0..nb {
                w += a[i].conj() * complex_normal(rng, self.noise);
            }
            let y = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum::<Complex64>() + w;
            let n = y - b.gain * x[self.user];
            y2 += y.norm_sqr();
            n2 += n.norm_sqr();
        }
        let i = match self.mode {
            Mode::Coherent => info_density_coherent(t, 1.0, b.pg2, b.sigma2, y2, n2),
            Mode::Noncoherent => info_density_noncoherent(t, 1.0 / b.sigma2, b.pg2, y2, n2),
        };
        BlockDensity {
            i,
            y_norm2: y2,
            n_norm2: n2,
            v_y: y2 / (b.pg2 + b.sigma2),
            v_n: n2 / b.sigma2,
        }
    }

    /// One trial of every block from the substreams of `seed`.
    pub fn sample(&self, seed: u64) -> InfoDensitySample {
        let blocks = (0..self.blocks.len())
            .map(|j| self.sample_block(j, &mut substream(seed, &[STREAM_SIGNAL, j as u64])))
            .collect();
        InfoDensitySample { blocks }
    }
}

/// One trial of the signal chain on `ch`.
pub fn sample_info_density(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    scheme: Scheme,
    user: usize,
    seed: u64,
) -> Result<InfoDensitySample> {
    Ok(DensitySampler::new(ch, cfg, scheme, user)?.sample(seed))
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub n_trials: usize,
}

impl Estimate {
    pub fn proportion(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate {
            value: p,
            std_err: (p * (1.0 - p) / n as f64).sqrt(),
            n_trials: n,
        }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let (value, std_err) = mean_se(xs);
        Estimate {
            value,
            std_err,
            n_trials: xs.len(),
        }
    }
}

/// Sample moments of one block's information density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMoments {
    pub mean: Estimate,
    pub variance: Estimate,
    /// Absolute third central moment.
    pub third_abs: Estimate,
}

/// Moments of block `j` from `n` signal trials seeded by `seed`.
pub fn block_density_moments(sampler: &DensitySampler, j: usize, n: usize, seed: u64) -> DensityMoments {
    let xs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|t| {
            sampler
                .sample_block(j, &mut substream(seed, &[STREAM_SIGNAL, j as u64, t as u64]))
                .i
        })
        .collect();
    let (var, var_se) = crate::oracle::variance_se(&xs);
    let mean = Estimate::from_samples(&xs);
    let m = mean.value;
    let cubes: Vec<f64> = xs.iter().map(|x| (x - m).abs().powi(3)).collect();
    DensityMoments {
        mean,
        variance: Estimate {
            value: var,
            std_err: var_se,
            n_trials: n,
        },
        third_abs: Estimate::from_samples(&cubes),
    }
}

/// `ln(M - 1)` for `ln M = b`; `-inf` at `M = 1`.
pub fn ln_m_minus_one(b: f64) -> f64 {
    if b <= 0.0 {
        return f64::NEG_INFINITY;
    }
    b + (-(-b).exp()).ln_1p()
}

/// The channel realisation used by the `draw`-th group of a plan.
pub fn plan_channel(cfg: &SystemConfig, mode: Mode, plan: &TrialPlan, draw: usize) -> ChannelSet {
    draw_channels(cfg, mode, channel_seed(plan.master_seed, draw))
}

fn trial_mu(plan: &TrialPlan, draw: usize, trial: usize) -> f64 {
    match (plan.mode, plan.mu_policy) {
        (SimMode::Averaged, MuPolicy::Uniform) => {
            let mut rng = substream(plan.master_seed, &[STREAM_MU, draw as u64, trial as u64]);
            // open interval
            loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            }
        }
        (_, p) => p.analytic(),
    }
}

/// RCU-bound error rate: fraction of trials whose summed information
/// density falls at or below `ln(M - 1) - ln mu`.
pub fn rcu_error_estimate(
    cfg: &SystemConfig,
    scheme: Scheme,
    mode: Mode,
    user: usize,
    plan: &TrialPlan,
) -> Result<Estimate> {
    cfg.validate(mode, Some(scheme))?;
    if user >= cfg.n_users {
        return domain(format!("user {user} out of range ({} users)", cfg.n_users));
    }
    let base = ln_m_minus_one(cfg.msg_nats[user]);
    let draws = match plan.mode {
        SimMode::Conditional => 1,
        SimMode::Averaged => plan.n_channel_draws,
    };
    let samplers: Vec<DensitySampler> = (0..draws)
        .into_par_iter()
        .map(|d| DensitySampler::new(&plan_channel(cfg, mode, plan, d), cfg, scheme, user))
        .collect::<Result<_>>()?;
    let per = plan.n_signal_draws;
    let outcomes: Vec<bool> = (0..draws * per)
        .into_par_iter()
        .map(|idx| {
            let (d, t) = (idx / per, idx % per);
            let seed = derive_seed(plan.master_seed, &[STREAM_SIGNAL, d as u64, t as u64]);
            let total = samplers[d].sample(seed).total();
            total <= base - trial_mu(plan, d, t).ln()
        })
        .collect();
    Ok(Estimate::proportion(
        outcomes.iter().filter(|&&e| e).count(),
        outcomes.len(),
    ))
}

/// Sorted samples defining an empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    pub sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut xs: Vec<f64>) -> Self {
        xs.sort_by(f64::total_cmp);
        Ecdf { sorted: xs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Kolmogorov-Smirnov distance to a continuous CDF.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
            let f = cdf(x);
            d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
    }

    /// KS distance to `Gamma(shape, rate)`.
    pub fn ks_to_gamma(&self, shape: f64, rate: f64) -> Result<f64> {
        let g = Gamma::new(shape, rate).map_err(|e| crate::Error::Domain(e.to_string()))?;
        Ok(self.ks_distance(|x| g.cdf(x)))
    }
}

/// Empirical distributions of the normalised output and noise norms of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCdfs {
    pub v_y: Ecdf,
    pub v_n: Ecdf,
    pub corr: f64,
    pub corr_se: f64,
}

/// Samples `plan.n_signal_draws` trials of block `j` of `ch`.
pub fn empirical_norm_cdfs(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    scheme: Scheme,
    user: usize,
    j: usize,
    plan: &TrialPlan,
) -> Result<NormCdfs> {
    if ch.mode != Mode::Noncoherent {
        return domain("normalised-norm CDFs are defined for non-coherent channel sets");
    }
    if j >= ch.blocks.len() {
        return domain(format!("block {j} out of range"));
    }
    let sampler = DensitySampler::new(ch, cfg, scheme, user)?;
    let pairs: Vec<(f64, f64)> = (0..plan.n_signal_draws)
        .into_par_iter()
        .map(|t| {
            let b = sampler.sample_block(
                j,
                &mut substream(plan.master_seed, &[STREAM_SIGNAL, j as u64, t as u64]),
            );
            (b.v_y, b.v_n)
        })
        .collect();
    let (ys, ns): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (corr, corr_se) = pearson_se(&ys, &ns);
    Ok(NormCdfs {
        v_y: Ecdf::new(ys),
        v_n: Ecdf::new(ns),
        corr,
        corr_se,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketLoss {
    pub pr_loss: Estimate,
    /// Infinite-blocklength outage `Pr{mean I < R_thres}`.
    pub outage_infinite: Estimate,
}

/// Packet loss over `plan.n_channel_draws` channel draws: a draw whose
/// normal-approximation rate misses `r_thres` is lost, otherwise it fails
/// with probability `eps`.
pub fn packet_loss(
    cfg: &SystemConfig,
    scheme: Scheme,
    mode: Mode,
    user: usize,
    r_thres: f64,
    plan: &TrialPlan,
) -> Result<PacketLoss> {
    let eps = cfg.target_eps[user];
    let reports = reports_over_draws(cfg, scheme, mode, user, plan.n_channel_draws, plan.master_seed)?;
    let loss: Vec<f64> = reports
        .iter()
        .map(|r| if r.rate_normal < r_thres { 1.0 } else { eps })
        .collect();
    let outage: Vec<f64> = reports
        .iter()
        .map(|r| if r.mean_capacity < r_thres { 1.0 } else { 0.0 })
        .collect();
    Ok(PacketLoss {
        pr_loss: Estimate::from_samples(&loss),
        outage_infinite: Estimate::from_samples(&outage),
    })
}

pub const ESTIMATE_COLUMNS: [&str; 13] = [
    "estimator",
    "scheme",
    "mode",
    "N_b",
    "K_u",
    "L",
    "T_c",
    "tau_c",
    "user",
    "value",
    "std_err",
    "n_trials",
    "seed",
];

pub fn estimate_header() -> String {
    ESTIMATE_COLUMNS.join(",")
}

/// One estimate as a CSV row.
pub fn estimate_row(estimator: &str, ctx: &RowContext, est: &Estimate, seed: u64) -> String {
    format!(
        "{estimator},{},{},{},{},{},{},{},{},{},{},{},{seed}",
        ctx.scheme.as_str(),
        ctx.mode.as_str(),
        ctx.n_antennas,
        ctx.n_users,
        ctx.n_blocks,
        ctx.coherence,
        ctx.pilot_len,
        ctx.user,
        fmt_real(est.value),
        fmt_real(est.std_err),
        est.n_trials
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{block_analysis, evaluate};
    use crate::config::dbm_to_mw;
    use crate::oracle::variance_se;

    fn within(est: &Estimate, want: f64, k: f64) -> bool {
        (est.value - want).abs() <= k * est.std_err
    }

    #[test]
    fn density_moments_match_closed_forms() {
        let cfg = SystemConfig::baseline();
        for mode in [Mode::Coherent, Mode::Noncoherent] {
            for scheme in [Scheme::Mrc, Scheme::Zf] {
                let ch = draw_channels(&cfg, mode, 21);
                let blocks = block_analysis(&ch, &cfg, scheme, 1).unwrap().metrics();
                let s = DensitySampler::new(&ch, &cfg, scheme, 1).unwrap();
                let m = block_density_moments(&s, 3, 20_000, 8);
                let tc = cfg.coherence as f64;
                assert!(
                    within(&m.mean, tc * blocks[3].capacity, 4.0),
                    "{mode:?} {scheme:?} {m:?}"
                );
                assert!(
                    within(&m.variance, tc * blocks[3].dispersion, 4.0),
                    "{mode:?} {scheme:?} {m:?}"
                );
            }
        }
    }

    #[test]
    fn coherent_mean_for_other_decoding_parameters() {
        // closed-form mean of the s-parametrised density
        let (t, pg2, sig, s) = (20usize, 3.0f64, 1.5, 0.4);
        let want = t as f64 * ((s * pg2 / sig).ln_1p() + s * (sig + pg2) / (sig + s * pg2) - s);
        let mut rng = substream(4, &[9]);
        let xs: Vec<f64> = (0..40_000)
            .map(|_| {
                let (mut y2, mut n2) = (0.0, 0.0);
                for _ in 0..t {
                    let x = complex_normal(&mut rng, pg2);
                    let n = complex_normal(&mut rng, sig);
                    y2 += (x + n).norm_sqr();
                    n2 += n.norm_sqr();
                }
                info_density_coherent(t, s, pg2, sig, y2, n2)
            })
            .collect();
        let e = Estimate::from_samples(&xs);
        assert!(within(&e, want, 4.0), "{e:?} vs {want}");
    }

    #[test]
    fn noise_norm_vanishes_with_noise_power() {
        let mut cfg = SystemConfig::baseline();
        cfg.n_users = 1;
        for v in [
            &mut cfg.tx_power_data,
            &mut cfg.tx_power_pilot,
            &mut cfg.large_scale,
            &mut cfg.msg_nats,
            &mut cfg.target_eps,
        ] {
            v.truncate(1);
        }
        let ch = draw_channels(&cfg, Mode::Coherent, 2);
        let mut last_n2 = f64::INFINITY;
        let mut last_var = 0.0;
        for dbm in [-100.0, -110.0, -120.0, -130.0] {
            cfg.noise_data = dbm_to_mw(dbm);
            let s = DensitySampler::new(&ch, &cfg, Scheme::Mrc, 0).unwrap();
            let draws: Vec<BlockDensity> = (0..4000).map(|t| s.sample_block(0, &mut substream(1, &[t]))).collect();
            let n2: Vec<f64> = draws.iter().map(|b| b.n_norm2).collect();
            let (mean_n2, _) = mean_se(&n2);
            assert!(mean_n2 < last_n2);
            last_n2 = mean_n2;
            // the normalised density itself spreads towards variance 2 T_c
            let is: Vec<f64> = draws.iter().map(|b| b.i).collect();
            let (v, _) = variance_se(&is);
            assert!(v > 0.9 * last_var);
            last_var = v;
        }
    }

    #[test]
    fn rcu_degenerate_message_sets() {
        let mut cfg = SystemConfig::baseline();
        let plan = TrialPlan::conditional(500, 3).unwrap();
        cfg.msg_nats = vec![0.0; 5];
        let e = rcu_error_estimate(&cfg, Scheme::Mrc, Mode::Coherent, 0, &plan).unwrap();
        assert_eq!(e.value, 0.0);
        cfg.msg_nats = vec![1e5; 5];
        let e = rcu_error_estimate(&cfg, Scheme::Zf, Mode::Noncoherent, 0, &plan).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn rcu_tracks_taylor_near_the_median() {
        let mut cfg = SystemConfig::baseline();
        let plan = TrialPlan::conditional(2000, 17).unwrap();
        let ch = plan_channel(&cfg, Mode::Coherent, &plan, 0);
        let r = evaluate(&ch, &cfg, Scheme::Mrc, 0, 0.1, 0.5).unwrap();
        let n = cfg.blocklength() as f64;
        cfg.msg_nats = vec![n * r.mean_capacity + 0.5f64.ln(); 5];
        let e = rcu_error_estimate(&cfg, Scheme::Mrc, Mode::Coherent, 0, &plan).unwrap();
        assert!((e.value - 0.5).abs() < 4.0 * e.std_err.max(0.011), "{e:?}");
    }

    #[test]
    fn averaged_mode_with_uniform_mu_runs() {
        let mut cfg = SystemConfig::baseline();
        cfg.msg_nats = vec![150.0; 5];
        let plan = TrialPlan::new(8, 20, 5, MuPolicy::Uniform, SimMode::Averaged).unwrap();
        let e = rcu_error_estimate(&cfg, Scheme::Mrc, Mode::Coherent, 0, &plan).unwrap();
        assert_eq!(e.n_trials, 160);
        assert!((0.0..=1.0).contains(&e.value));
        assert!(TrialPlan::new(0, 1, 1, MuPolicy::Uniform, SimMode::Averaged).is_err());
    }

    #[test]
    fn ecdf_and_ks() {
        let e = Ecdf::new(vec![3.0, 1.0, 2.0, 4.0]);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(2.0), 0.5);
        assert_eq!(e.eval(9.0), 1.0);
        let d = e.ks_distance(|x| ((x - 0.5) / 4.0).clamp(0.0, 1.0));
        assert!((d - 0.125).abs() < 1e-12);
    }

    #[test]
    fn normalised_norms_have_unit_scale_means() {
        let cfg = SystemConfig::baseline();
        let ch = draw_channels(&cfg, Mode::Noncoherent, 4);
        let plan = TrialPlan::conditional(20_000, 6).unwrap();
        let c = empirical_norm_cdfs(&ch, &cfg, Scheme::Mrc, 0, 2, &plan).unwrap();
        let t = 15.0;
        assert!(within(&Estimate::from_samples(&c.v_y.sorted), t, 4.0));
        assert!(within(&Estimate::from_samples(&c.v_n.sorted), t, 4.0));
        assert!(empirical_norm_cdfs(&draw_channels(&cfg, Mode::Coherent, 4), &cfg, Scheme::Mrc, 0, 2, &plan).is_err());
    }

    #[test]
    fn packet_loss_limits() {
        let cfg = SystemConfig::baseline();
        let plan = TrialPlan::new(20, 1, 3, MuPolicy::default(), SimMode::Averaged).unwrap();
        let pl = packet_loss(&cfg, Scheme::Mrc, Mode::Coherent, 0, f64::INFINITY, &plan).unwrap();
        assert_eq!(pl.pr_loss.value, 1.0);
        assert_eq!(pl.outage_infinite.value, 1.0);
        let pl = packet_loss(&cfg, Scheme::Zf, Mode::Coherent, 0, f64::NEG_INFINITY, &plan).unwrap();
        assert_eq!(pl.pr_loss.value, cfg.target_eps[0]);
        assert_eq!(pl.outage_infinite.value, 0.0);
        let pl = packet_loss(&cfg, Scheme::Mrc, Mode::Noncoherent, 0, 1.0, &plan).unwrap();
        assert!(pl.pr_loss.value >= cfg.target_eps[0]);
    }

    #[test]
    fn ln_m_minus_one_values() {
        assert_eq!(ln_m_minus_one(0.0), f64::NEG_INFINITY);
        assert!((ln_m_minus_one(2f64.ln())).abs() < 1e-15);
        assert!((ln_m_minus_one(100.0) - 100.0).abs() < 1e-40f64.max(4e-44));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut cfg = SystemConfig::baseline();
        cfg.msg_nats = vec![130.0; 5];
        let plan = TrialPlan::new(3, 50, 12, MuPolicy::Uniform, SimMode::Averaged).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    let e = rcu_error_estimate(&cfg, Scheme::Zf, Mode::Noncoherent, 1, &plan).unwrap();
                    let ch = plan_channel(&cfg, Mode::Noncoherent, &plan, 0);
                    let s = DensitySampler::new(&ch, &cfg, Scheme::Mrc, 0).unwrap();
                    let m = block_density_moments(&s, 0, 500, 3);
                    (e, m)
                })
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn estimate_rows() {
        let cfg = SystemConfig::baseline();
        let ctx = RowContext::new(&cfg, Scheme::Zf, Mode::Noncoherent, 2);
        let row = estimate_row("rcu", &ctx, &Estimate::proportion(3, 10), 77);
        assert_eq!(row.split(',').count(), ESTIMATE_COLUMNS.len());
        assert!(row.starts_with("rcu,zf,noncoherent,20,5,10,20,5,2,"), "{row}");
        assert!(row.ends_with(",10,77"));
    }
}
