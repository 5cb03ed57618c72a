//! Block-fading channel generation, MMSE estimation and the per-block scalar
//! description produced by the MRC and ZF receivers.

use crate::config::{Mode, Scheme, SystemConfig};
use crate::error::{domain, Error, Result};
use crate::rng::{complex_normal, substream, STREAM_CHANNEL};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Large-scale gain `gamma^2` at distance `d` metres with `shadow_db` of shadowing.
pub fn pathloss(d: f64, shadow_db: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return domain(format!("distance must be positive, got {d}"));
    }
    Ok(10f64.powf((-35.3 - 37.6 * d.log10() + shadow_db) / 10.0))
}

/// MMSE estimated-channel gain `phi_k^2` of user `k` with orthogonal pilots.
pub fn mmse_gain(cfg: &SystemConfig, k: usize) -> f64 {
    let g = cfg.large_scale[k];
    let snr_inv = cfg.noise_pilot / (cfg.pilot_len as f64 * cfg.pilot_power(k));
    g * g / (g + snr_inv)
}

/// Channels of one block; columns are users, rows antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockChannels {
    pub h: CMatrix,
    /// Estimate and error, non-coherent mode only; `h = h_est + h_err`.
    pub h_est: Option<CMatrix>,
    pub h_err: Option<CMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub mode: Mode,
    pub blocks: Vec<BlockChannels>,
    /// `phi_k^2`; equal to `gamma_k^2` in coherent mode.
    pub est_gain: Vec<f64>,
}

impl ChannelSet {
    /// Channel matrix the receiver designs its combiner from.
    pub fn receiver_view(&self, j: usize) -> &CMatrix {
        match self.mode {
            Mode::Coherent => &self.blocks[j].h,
            Mode::Noncoherent => self.blocks[j].h_est.as_ref().expect("non-coherent set has estimates"),
        }
    }
}

/// Draw `L` blocks of Rayleigh channels. Each (block, user) column has its own
/// substream of `seed`, so the result does not depend on evaluation order.
pub fn draw_channels(cfg: &SystemConfig, mode: Mode, seed: u64) -> ChannelSet {
    let (nb, ku) = (cfg.n_antennas, cfg.n_users);
    let est_gain: Vec<f64> = match mode {
        Mode::Coherent => cfg.large_scale.clone(),
        Mode::Noncoherent => (0..ku).map(|k| mmse_gain(cfg, k)).collect(),
    };
    let blocks = (0..cfg.n_blocks)
        .map(|j| {
            let mut h = CMatrix::zeros(nb, ku);
            let mut est = (mode == Mode::Noncoherent).then(|| CMatrix::zeros(nb, ku));
            let mut err = (mode == Mode::Noncoherent).then(|| CMatrix::zeros(nb, ku));
            for k in 0..ku {
                let mut rng = substream(seed, &[STREAM_CHANNEL, j as u64, k as u64]);
                let g = cfg.large_scale[k];
                match mode {
                    Mode::Coherent => {
                        for i in 0..nb {
                            h[(i, k)] = complex_normal(&mut rng, g);
                        }
                    }
                    Mode::Noncoherent => {
                        let phi = est_gain[k];
                        let (est, err) = (est.as_mut().unwrap(), err.as_mut().unwrap());
                        for i in 0..nb {
                            let a = complex_normal(&mut rng, phi);
                            let b = complex_normal(&mut rng, (g - phi).max(0.0));
                            est[(i, k)] = a;
                            err[(i, k)] = b;
                            h[(i, k)] = a + b;
                        }
                    }
                }
            }
            BlockChannels {
                h,
                h_est: est,
                h_err: err,
            }
        })
        .collect();
    ChannelSet { mode, blocks, est_gain }
}

/// Post-combining description of one block for the intended user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockLinkStats {
    /// Effective scalar channel gain (a 2-norm).
    pub gain: f64,
    /// Effective noise variance after combining (mW).
    pub noise_var: f64,
    pub sinr: f64,
    /// Fourth-order estimation-error statistic (mW^2); zero when coherent.
    pub delta: f64,
    /// `P_k (gamma_k^2 - phi_k^2)`; zero when coherent.
    pub err_self: f64,
    /// Applied data power of the intended user.
    pub power: f64,
}

fn col(m: &CMatrix, k: usize) -> CVector {
    m.column(k).into_owned()
}

fn check_mode(ch: &ChannelSet, want: Mode) -> Result<()> {
    if ch.mode != want {
        return domain(format!(
            "{} statistics requested on a {} channel set",
            want.as_str(),
            ch.mode.as_str()
        ));
    }
    Ok(())
}

fn norm_or_degenerate(v: &CVector, k: usize, j: usize) -> Result<f64> {
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::Degenerate(format!("zero channel for user {k} in block {j}")));
    }
    Ok(n)
}

/// Sum over interferers of `P_m |a^H h_m|^2` for the unit combiner `a`.
fn interference(cfg: &SystemConfig, hmat: &CMatrix, a: &CVector, k: usize) -> Vec<f64> {
    (0..cfg.n_users)
        .map(|m| {
            if m == k {
                0.0
            } else {
                a.dotc(&hmat.column(m)).norm_sqr()
            }
        })
        .collect()
}

/// Unit-norm MRC combiner for user `k` built from `hmat`.
pub fn mrc_combiner(hmat: &CMatrix, k: usize, j: usize) -> Result<CVector> {
    let h = col(hmat, k);
    let n = norm_or_degenerate(&h, k, j)?;
    Ok(h.unscale(n))
}

/// `V_k h_k`, the projection of user `k`'s column onto the orthogonal
/// complement of the other columns.
pub fn zf_projected(hmat: &CMatrix, k: usize, j: usize) -> Result<CVector> {
    let (nb, ku) = hmat.shape();
    let h = col(hmat, k);
    if ku == 1 {
        return Ok(h);
    }
    let others = CMatrix::from_fn(nb, ku - 1, |i, c| hmat[(i, if c < k { c } else { c + 1 })]);
    if ku - 1 > nb {
        return Err(Error::RankDeficient { user: k, block: j });
    }
    let svd = others.svd(true, false);
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = f64::EPSILON * nb as f64 * s_max;
    if s_max == 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(Error::RankDeficient { user: k, block: j });
    }
    let u = svd.u.expect("requested U");
    let coeff = u.adjoint() * &h;
    Ok(h - u * coeff)
}

/// Unit-norm ZF combiner and the effective gain `||V_k h_k||`.
pub fn zf_combiner(hmat: &CMatrix, k: usize, j: usize) -> Result<(CVector, f64)> {
    let p = zf_projected(hmat, k, j)?;
    let g = p.norm();
    if g <= f64::EPSILON * col(hmat, k).norm() {
        return Err(Error::RankDeficient { user: k, block: j });
    }
    Ok((p.unscale(g), g))
}

pub fn mrc_coherent_stats(ch: &ChannelSet, cfg: &SystemConfig, k: usize, j: usize) -> Result<BlockLinkStats> {
    check_mode(ch, Mode::Coherent)?;
    let hmat = &ch.blocks[j].h;
    let a = mrc_combiner(hmat, k, j)?;
    let gain = col(hmat, k).norm();
    let inter = interference(cfg, hmat, &a, k);
    let noise_var = (0..cfg.n_users).map(|m| cfg.data_power(m) * inter[m]).sum::<f64>() + cfg.noise_data;
    let power = cfg.data_power(k);
    Ok(BlockLinkStats {
        gain,
        noise_var,
        sinr: power * gain * gain / noise_var,
        delta: 0.0,
        err_self: 0.0,
        power,
    })
}

pub fn zf_coherent_stats(ch: &ChannelSet, cfg: &SystemConfig, k: usize, j: usize) -> Result<BlockLinkStats> {
    check_mode(ch, Mode::Coherent)?;
    let (_, gain) = zf_combiner(&ch.blocks[j].h, k, j)?;
    let power = cfg.data_power(k);
    let noise_var = cfg.noise_data;
    Ok(BlockLinkStats {
        gain,
        noise_var,
        sinr: power * gain * gain / noise_var,
        delta: 0.0,
        err_self: 0.0,
        power,
    })
}

fn error_powers(ch: &ChannelSet, cfg: &SystemConfig) -> Vec<f64> {
    (0..cfg.n_users)
        .map(|m| cfg.data_power(m) * (cfg.large_scale[m] - ch.est_gain[m]).max(0.0))
        .collect()
}

pub fn mrc_noncoherent_stats(ch: &ChannelSet, cfg: &SystemConfig, k: usize, j: usize) -> Result<BlockLinkStats> {
    check_mode(ch, Mode::Noncoherent)?;
    let hest = ch.receiver_view(j);
    let a = mrc_combiner(hest, k, j)?;
    let gain = col(hest, k).norm();
    let inter = interference(cfg, hest, &a, k);
    let ep = error_powers(ch, cfg);
    let mut noise_var = cfg.noise_data;
    let mut delta = 0.0;
    for m in 0..cfg.n_users {
        let p = cfg.data_power(m);
        noise_var += ep[m] + p * inter[m];
        delta += ep[m] * ep[m] + 2.0 * p * ep[m] * inter[m];
    }
    let power = cfg.data_power(k);
    Ok(BlockLinkStats {
        gain,
        noise_var,
        sinr: power * gain * gain / noise_var,
        delta,
        err_self: ep[k],
        power,
    })
}

pub fn zf_noncoherent_stats(ch: &ChannelSet, cfg: &SystemConfig, k: usize, j: usize) -> Result<BlockLinkStats> {
    check_mode(ch, Mode::Noncoherent)?;
    let (_, gain) = zf_combiner(ch.receiver_view(j), k, j)?;
    let ep = error_powers(ch, cfg);
    let noise_var = cfg.noise_data + ep.iter().sum::<f64>();
    let delta = ep.iter().map(|e| e * e).sum();
    let power = cfg.data_power(k);
    Ok(BlockLinkStats {
        gain,
        noise_var,
        sinr: power * gain * gain / noise_var,
        delta,
        err_self: ep[k],
        power,
    })
}

/// Dispatch on the channel-set mode and the scheme.
pub fn block_stats(ch: &ChannelSet, cfg: &SystemConfig, scheme: Scheme, k: usize, j: usize) -> Result<BlockLinkStats> {
    match (ch.mode, scheme) {
        (Mode::Coherent, Scheme::Mrc) => mrc_coherent_stats(ch, cfg, k, j),
        (Mode::Coherent, Scheme::Zf) => zf_coherent_stats(ch, cfg, k, j),
        (Mode::Noncoherent, Scheme::Mrc) => mrc_noncoherent_stats(ch, cfg, k, j),
        (Mode::Noncoherent, Scheme::Zf) => zf_noncoherent_stats(ch, cfg, k, j),
    }
}

/// Statistics of every block for user `k`.
pub fn all_block_stats(ch: &ChannelSet, cfg: &SystemConfig, scheme: Scheme, k: usize) -> Result<Vec<BlockLinkStats>> {
    (0..ch.blocks.len())
        .map(|j| block_stats(ch, cfg, scheme, k, j))
        .collect()
}
