//! Glue from a channel realisation to a rate report, in either mode.

use crate::channel::{all_block_stats, draw_channels, ChannelSet};
use crate::coherent_metrics::{block_metrics, threshold_and_rate, BlockMetrics, RateReport};
use crate::config::{Mode, Scheme, SystemConfig};
use crate::error::Result;
use crate::noncoherent_metrics::{block_metrics_noncoherent, threshold_and_rate_noncoherent, NoncoherentBlock};
use crate::rng::{derive_seed, STREAM_CHANNEL};
use rayon::prelude::*;

/// Per-block analytic quantities for one user.
#[derive(Debug, Clone, PartialEq)]
pub enum Blocks {
    Coherent(Vec<BlockMetrics>),
    Noncoherent(Vec<NoncoherentBlock>),
}

impl Blocks {
    pub fn metrics(&self) -> Vec<BlockMetrics> {
        match self {
            Blocks::Coherent(b) => b.clone(),
            Blocks::Noncoherent(b) => b.iter().map(|x| x.metrics).collect(),
        }
    }
}

pub fn block_analysis(ch: &ChannelSet, cfg: &SystemConfig, scheme: Scheme, user: usize) -> Result<Blocks> {
    let stats = all_block_stats(ch, cfg, scheme, user)?;
    Ok(match ch.mode {
        Mode::Coherent => Blocks::Coherent(
            stats
                .iter()
                .map(|s| block_metrics(s, cfg.coherence))
                .collect::<Result<_>>()?,
        ),
        Mode::Noncoherent => Blocks::Noncoherent(
            stats
                .iter()
                .map(|s| block_metrics_noncoherent(s, cfg.coherence, cfg.pilot_len))
                .collect::<Result<_>>()?,
        ),
    })
}

/// Rate report for `user` on the channel realisation `ch`.
pub fn evaluate(
    ch: &ChannelSet,
    cfg: &SystemConfig,
    scheme: Scheme,
    user: usize,
    eps: f64,
    mu: f64,
) -> Result<RateReport> {
    match block_analysis(ch, cfg, scheme, user)? {
        Blocks::Coherent(b) => threshold_and_rate(cfg, user, &b, eps, mu),
        Blocks::Noncoherent(b) => threshold_and_rate_noncoherent(cfg, user, &b, eps, mu),
    }
}

/// Seed of the `draw`-th channel realisation under `master`.
pub fn channel_seed(master: u64, draw: usize) -> u64 {
    derive_seed(master, &[STREAM_CHANNEL, draw as u64])
}

/// Reports over `n_draws` independent channel realisations, in draw order.
pub fn reports_over_draws(
    cfg: &SystemConfig,
    scheme: Scheme,
    mode: Mode,
    user: usize,
    n_draws: usize,
    master: u64,
) -> Result<Vec<RateReport>> {
    cfg.validate(mode, Some(scheme))?;
    let eps = cfg.target_eps[user];
    let mu = cfg.mu_policy.analytic();
    (0..n_draws)
        .into_par_iter()
        .map(|d| {
            let ch = draw_channels(cfg, mode, channel_seed(master, d));
            evaluate(&ch, cfg, scheme, user, eps, mu)
        })
        .collect()
}
