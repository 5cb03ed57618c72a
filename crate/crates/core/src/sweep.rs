//! One-parameter sweeps written as CSV.
//!
//! A sweep point uses the same master seed for every swept value, so channel
//! draw `d` of block `j` is the same realisation across the sweep wherever
//! the dimensions allow it.

use crate::analysis::{channel_seed, reports_over_draws};
use crate::channel::{block_stats, draw_channels};
use crate::coherent_metrics::{asymptotics_coherent, fmt_real, RateReport};
use crate::config::{dbm_to_mw, ConfigFile, Mode, Scheme, SystemConfig};
use crate::error::{Error, Result};
use crate::noncoherent_metrics::{asymptotics_noncoherent, gamma_match};
use crate::simkit::{empirical_norm_cdfs, packet_loss, rcu_error_estimate, SimMode, TrialPlan};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "N_b")]
    NAntennas,
    #[serde(rename = "L")]
    NBlocks,
    #[serde(rename = "T_c")]
    Coherence,
    #[serde(rename = "tau_c")]
    PilotLen,
    /// Data and pilot power of every user, in dBm.
    #[serde(rename = "P")]
    PowerDbm,
    #[serde(rename = "R_thres")]
    RateThreshold,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::NAntennas => "N_b",
            SweepParam::NBlocks => "L",
            SweepParam::Coherence => "T_c",
            SweepParam::PilotLen => "tau_c",
            SweepParam::PowerDbm => "P",
            SweepParam::RateThreshold => "R_thres",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Rate,
    Dispersion,
    Perturbation,
    Eps,
    PacketLoss,
    Asymptotics,
    CdfValidation,
}

impl Output {
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            Output::Rate => &["capacity", "rate_normal", "rate_band"],
            Output::Dispersion => &["dispersion"],
            Output::Perturbation => &["perturbation", "q_thres", "condition_frac"],
            Output::Eps => &["eps_taylor", "eps_beclt", "eps_rcu", "eps_rcu_se"],
            Output::PacketLoss => &["pr_loss", "pr_loss_se", "outage_inf", "outage_inf_se"],
            Output::Asymptotics => &["capacity_inf", "dispersion_inf", "perturbation_inf"],
            Output::CdfValidation => &["ks_v_y", "ks_v_n", "corr_emp", "corr_se", "rho_match"],
        }
    }
}

fn default_draws() -> usize {
    1
}
fn default_signal_draws() -> usize {
    10_000
}
fn default_sim_mode() -> SimMode {
    SimMode::Conditional
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub description: Option<String>,
    pub param: SweepParam,
    pub values: Vec<f64>,
    #[serde(default)]
    pub config: ConfigFile,
    pub schemes: Vec<Scheme>,
    pub modes: Vec<Mode>,
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub seed: u64,
    /// Users to report; all users when absent.
    #[serde(default)]
    pub users: Option<Vec<usize>>,
    /// Channel realisations averaged into each analytic row.
    #[serde(default = "default_draws")]
    pub n_channel_draws: usize,
    /// Signal trials of the Monte Carlo outputs.
    #[serde(default = "default_signal_draws")]
    pub n_signal_draws: usize,
    #[serde(default = "default_sim_mode")]
    pub sim_mode: SimMode,
    /// Rate threshold of `packet_loss` when it is not the swept parameter.
    #[serde(default)]
    pub r_thres: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.values.is_empty() {
            return bad("values must not be empty");
        }
        if self.outputs.is_empty() {
            return bad("outputs must not be empty");
        }
        if self.schemes.is_empty() || self.modes.is_empty() {
            return bad("schemes and modes must not be empty");
        }
        if self.n_channel_draws == 0 || self.n_signal_draws == 0 {
            return bad("n_channel_draws and n_signal_draws must be at least 1");
        }
        Ok(())
    }

    fn outputs_sorted(&self) -> Vec<Output> {
        let mut o = self.outputs.clone();
        o.sort();
        o.dedup();
        o
    }

    /// Column names of the CSV, in order.
    pub fn header(&self) -> Vec<&'static str> {
        let mut h = vec![
            "param", "value", "scheme", "mode", "N_b", "K_u", "L", "T_c", "tau_c", "user", "draws",
        ];
        for o in self.outputs_sorted() {
            h.extend_from_slice(o.columns());
        }
        h
    }

    /// Configuration and rate threshold of one swept value.
    pub fn point(&self, value: f64) -> Result<(SystemConfig, f64)> {
        let mut cfg = self.config.resolve()?;
        let mut r_thres = self.r_thres;
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v <= 1e9 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "{} value {v} is not a count",
                    self.param.as_str()
                )))
            }
        };
        match self.param {
            SweepParam::NAntennas => cfg.n_antennas = count(value)?,
            SweepParam::NBlocks => cfg.n_blocks = count(value)?,
            SweepParam::Coherence => cfg.coherence = count(value)?,
            SweepParam::PilotLen => cfg.pilot_len = count(value)?,
            SweepParam::PowerDbm => {
                cfg.tx_power_data = vec![dbm_to_mw(value); cfg.n_users];
                cfg.tx_power_pilot = cfg.tx_power_data.clone();
            }
            SweepParam::RateThreshold => r_thres = value,
        }
        Ok((cfg, r_thres))
    }
}

fn mean_of(reports: &[RateReport], f: impl Fn(&RateReport) -> f64) -> f64 {
    reports.iter().map(f).sum::<f64>() / reports.len() as f64
}

fn row_values(
    spec: &SweepSpec,
    cfg: &SystemConfig,
    r_thres: f64,
    scheme: Scheme,
    mode: Mode,
    user: usize,
) -> Result<Vec<String>> {
    let draws = spec.n_channel_draws;
    let reports = reports_over_draws(cfg, scheme, mode, user, draws, spec.seed)?;
    let plan = TrialPlan::new(draws, spec.n_signal_draws, spec.seed, cfg.mu_policy, spec.sim_mode)?;
    let f = |x: f64| fmt_real(x);
    let mut out = Vec::new();
    for o in spec.outputs_sorted() {
        match o {
            Output::Rate => {
                out.push(f(mean_of(&reports, |r| r.mean_capacity)));
                out.push(f(mean_of(&reports, |r| r.rate_normal)));
                out.push(f(mean_of(&reports, |r| r.rate_band)));
            }
            Output::Dispersion => out.push(f(mean_of(&reports, |r| r.mean_dispersion))),
            Output::Perturbation => {
                out.push(f(mean_of(&reports, |r| r.perturbation)));
                out.push(f(mean_of(&reports, |r| r.q_thres)));
                out.push(f(mean_of(&reports, |r| if r.condition_ok { 1.0 } else { 0.0 })));
            }
            Output::Eps => {
                out.push(f(mean_of(&reports, |r| r.eps_taylor)));
                out.push(f(mean_of(&reports, |r| r.eps_beclt)));
                let e = rcu_error_estimate(cfg, scheme, mode, user, &plan)?;
                out.push(f(e.value));
                out.push(f(e.std_err));
            }
            Output::PacketLoss => {
                let pl = packet_loss(cfg, scheme, mode, user, r_thres, &plan)?;
                out.extend([
                    f(pl.pr_loss.value),
                    f(pl.pr_loss.std_err),
                    f(pl.outage_infinite.value),
                    f(pl.outage_infinite.std_err),
                ]);
            }
            Output::Asymptotics => {
                let a = match mode {
                    Mode::Coherent => asymptotics_coherent(cfg, user)?,
                    Mode::Noncoherent => asymptotics_noncoherent(cfg, scheme, user)?.limits,
                };
                out.extend([f(a.capacity.value()), f(a.dispersion), f(a.perturbation)]);
            }
            Output::CdfValidation => match mode {
                Mode::Coherent => out.extend(std::iter::repeat(f(f64::NAN)).take(5)),
                Mode::Noncoherent => {
                    let ch = draw_channels(cfg, mode, channel_seed(spec.seed, 0));
                    let gm = gamma_match(&block_stats(&ch, cfg, scheme, user, 0)?, cfg.coherence, cfg.pilot_len)?;
                    let c = empirical_norm_cdfs(&ch, cfg, scheme, user, 0, &plan)?;
                    let t = cfg.data_symbols(mode) as f64;
                    out.extend([
                        f(c.v_y.ks_to_gamma(gm.beta_y, gm.beta_y / t)?),
                        f(c.v_n.ks_to_gamma(gm.beta_n, gm.beta_n / t)?),
                        f(c.corr),
                        f(c.corr_se),
                        f(gm.rho),
                    ]);
                }
            },
        }
    }
    Ok(out)
}

/// The whole sweep as CSV text. Fails on the first infeasible point.
pub fn run_sweep(spec: &SweepSpec) -> Result<String> {
    spec.check()?;
    let mut csv = spec.header().join(",");
    csv.push('\n');
    for &value in &spec.values {
        let (cfg, r_thres) = spec.point(value)?;
        let users: Vec<usize> = match &spec.users {
            Some(u) => u.clone(),
            None => (0..cfg.n_users).collect(),
        };
        for &scheme in &spec.schemes {
            for &mode in &spec.modes {
                cfg.validate(mode, Some(scheme)).map_err(|e| {
                    Error::Config(format!(
                        "{}={value}, {} {}: {e}",
                        spec.param.as_str(),
                        scheme.as_str(),
                        mode.as_str()
                    ))
                })?;
                for &user in &users {
                    if user >= cfg.n_users {
                        return Err(Error::Config(format!(
                            "user {user} out of range ({} users)",
                            cfg.n_users
                        )));
                    }
                    let vals = row_values(spec, &cfg, r_thres, scheme, mode, user)?;
                    let pilots = if mode == Mode::Coherent { 0 } else { cfg.pilot_len };
                    let _ = write!(
                        csv,
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        spec.param.as_str(),
                        fmt_real(value),
                        scheme.as_str(),
                        mode.as_str(),
                        cfg.n_antennas,
                        cfg.n_users,
                        cfg.n_blocks,
                        cfg.coherence,
                        pilots,
                        user,
                        spec.n_channel_draws
                    );
                    for v in vals {
                        csv.push(',');
                        csv.push_str(&v);
                    }
                    csv.push('\n');
                }
            }
        }
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(extra: &str) -> SweepSpec {
        SweepSpec::from_json_str(&format!(
            r#"{{ "param": "N_b", "values": [8, 16], "schemes": ["mrc", "zf"], "modes": ["coherent"],
                 "outputs": ["dispersion", "rate"], "seed": 3, "users": [0] {extra} }}"#
        ))
        .unwrap()
    }

    fn column(csv: &str, name: &str) -> Vec<f64> {
        let mut lines = csv.lines();
        let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
        lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
    }

    #[test]
    fn header_orders_outputs() {
        let s = spec("");
        let h = s.header();
        assert_eq!(&h[..3], &["param", "value", "scheme"]);
        assert_eq!(&h[11..], &["capacity", "rate_normal", "rate_band", "dispersion"]);
        let csv = run_sweep(&s).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 2);
        assert!(csv.lines().all(|l| l.split(',').count() == h.len()));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let e = SweepSpec::from_json_str("{\n \"param\": \"N_b\",\n \"valuez\": [1]\n}").unwrap_err();
        assert!(
            e.to_string().contains("valuez") && e.to_string().contains("line 3"),
            "{e}"
        );
        let e = SweepSpec::from_json_str(
            r#"{"param": "N_b", "values": [], "schemes": ["mrc"], "modes": ["coherent"], "outputs": ["rate"]}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("values"));
        let e = SweepSpec::from_json_str(
            r#"{"param": "Q", "values": [1], "schemes": ["mrc"], "modes": ["coherent"], "outputs": ["rate"]}"#,
        )
        .unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn zf_infeasible_point_is_reported() {
        let mut s = spec("");
        s.values = vec![8.0, 4.0];
        let e = run_sweep(&s).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(
            e.to_string().contains("N_b=4") && e.to_string().contains("zero forcing"),
            "{e}"
        );
        s.schemes = vec![Scheme::Mrc];
        assert!(run_sweep(&s).is_ok());
    }

    #[test]
    fn fractional_counts_rejected() {
        let mut s = spec("");
        s.values = vec![8.5];
        assert!(run_sweep(&s).is_err());
    }

    #[test]
    fn power_and_threshold_axes() {
        let s = SweepSpec::from_json_str(
            r#"{ "param": "P", "values": [0, 20], "schemes": ["mrc"], "modes": ["noncoherent"],
                 "outputs": ["rate"], "users": [1] }"#,
        )
        .unwrap();
        let cap = column(&run_sweep(&s).unwrap(), "capacity");
        assert!(cap[1] > cap[0]);
        let s = SweepSpec::from_json_str(
            r#"{ "param": "R_thres", "values": [-1e9, 1e9], "schemes": ["zf"], "modes": ["coherent"],
                 "outputs": ["packet_loss"], "users": [0], "n_channel_draws": 5,
                 "config": { "target_eps": 0.1 } }"#,
        )
        .unwrap();
        let pl = column(&run_sweep(&s).unwrap(), "pr_loss");
        assert_eq!(pl, vec![0.1, 1.0]);
    }

    #[test]
    fn every_output_renders() {
        let s = SweepSpec::from_json_str(
            r#"{ "param": "tau_c", "values": [5], "schemes": ["mrc"], "modes": ["coherent", "noncoherent"],
                 "outputs": ["rate", "dispersion", "perturbation", "eps", "packet_loss", "asymptotics", "cdf_validation"],
                 "users": [0], "n_signal_draws": 200, "r_thres": 0.5 }"#,
        )
        .unwrap();
        let csv = run_sweep(&s).unwrap();
        let n = s.header().len();
        assert_eq!(n, 11 + 3 + 1 + 3 + 4 + 4 + 3 + 5);
        for l in csv.lines().skip(1) {
            assert_eq!(l.split(',').count(), n);
        }
        assert!(csv.lines().nth(1).unwrap().ends_with("nan,nan,nan,nan,nan"));
    }
}
