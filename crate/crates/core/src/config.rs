//! System configuration and its JSON file format.
//!
//! Any power or noise key may be given in dBm by appending `_dbm` to its name
//! (`tx_power_data_dbm: 10`); values are converted with `P_mW = 10^(dBm/10)`.
//! Per-user quantities accept a scalar (applied to every user) or an array.

use crate::channel::pathloss;
use crate::error::{Error, Result};
use crate::rng::{substream, STREAM_LAYOUT};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mrc,
    Zf,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Mrc => "mrc",
            Scheme::Zf => "zf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Coherent,
    Noncoherent,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Coherent => "coherent",
            Mode::Noncoherent => "noncoherent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PowerScaling {
    #[default]
    #[serde(rename = "none")]
    None,
    /// `P = E / N_b`
    #[serde(rename = "inverse_Nb")]
    InverseNb,
    /// `P = E / sqrt(N_b)`, `P^c = E^c / sqrt(N_b)`
    #[serde(rename = "inverse_sqrt_Nb")]
    InverseSqrtNb,
}

/// How the auxiliary parameter `mu` of the threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    Fixed(f64),
    /// A fresh `U(0,1)` draw per Monte Carlo trial; analytic reports use 0.5.
    Uniform,
}

impl Default for MuPolicy {
    fn default() -> Self {
        MuPolicy::Fixed(0.5)
    }
}

impl MuPolicy {
    /// The value used by closed-form reports.
    pub fn analytic(&self) -> f64 {
        match *self {
            MuPolicy::Fixed(m) => m,
            MuPolicy::Uniform => 0.5,
        }
    }
}

/// Every scalar parameter of the uplink. Powers and variances are linear (mW).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n_antennas: usize,
    pub n_users: usize,
    pub n_blocks: usize,
    pub coherence: usize,
    pub pilot_len: usize,
    /// Nominal data powers `P_k` (or `E_k` under a scaling law).
    pub tx_power_data: Vec<f64>,
    /// Nominal pilot powers `P_k^c`.
    pub tx_power_pilot: Vec<f64>,
    pub noise_data: f64,
    pub noise_pilot: f64,
    pub large_scale: Vec<f64>,
    pub msg_nats: Vec<f64>,
    pub target_eps: Vec<f64>,
    pub mu_policy: MuPolicy,
    pub power_scaling: PowerScaling,
}

/// Distances of the default deterministic layout.
pub fn default_distances(n_users: usize) -> Vec<f64> {
    (0..n_users).map(|k| 100.0 + 50.0 * k as f64).collect()
}

impl SystemConfig {
    /// Baseline parameter set: 20 antennas, 5 users, 10 blocks of 20 symbols,
    /// 5 pilots, 10 dBm powers, -100 dBm noise, 100-nat messages, eps = 1e-5,
    /// users at 100, 150, ..., 300 m without shadowing.
    pub fn baseline() -> Self {
        let k = 5;
        SystemConfig {
            n_antennas: 20,
            n_users: k,
            n_blocks: 10,
            coherence: 20,
            pilot_len: 5,
            tx_power_data: vec![dbm_to_mw(10.0); k],
            tx_power_pilot: vec![dbm_to_mw(10.0); k],
            noise_data: dbm_to_mw(-100.0),
            noise_pilot: dbm_to_mw(-100.0),
            large_scale: default_distances(k)
                .into_iter()
                .map(|d| pathloss(d, 0.0).unwrap())
                .collect(),
            msg_nats: vec![100.0; k],
            target_eps: vec![1e-5; k],
            mu_policy: MuPolicy::default(),
            power_scaling: PowerScaling::None,
        }
    }

    fn scale(&self) -> f64 {
        let n = self.n_antennas as f64;
        match self.power_scaling {
            PowerScaling::None => 1.0,
            PowerScaling::InverseNb => 1.0 / n,
            PowerScaling::InverseSqrtNb => 1.0 / n.sqrt(),
        }
    }

    /// Applied data power of user `k` after the scaling law.
    pub fn data_power(&self, k: usize) -> f64 {
        self.tx_power_data[k] * self.scale()
    }

    /// Applied pilot power of user `k` after the scaling law.
    pub fn pilot_power(&self, k: usize) -> f64 {
        self.tx_power_pilot[k] * self.scale()
    }

    /// Data symbols per block.
    pub fn data_symbols(&self, mode: Mode) -> usize {
        match mode {
            Mode::Coherent => self.coherence,
            Mode::Noncoherent => self.coherence - self.pilot_len,
        }
    }

    /// Total blocklength `L * T_c`.
    pub fn blocklength(&self) -> usize {
        self.n_blocks * self.coherence
    }

    /// Structural checks; `scheme` adds the ZF dimension requirement.
    pub fn validate(&self, mode: Mode, scheme: Option<Scheme>) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_antennas == 0 || self.n_users == 0 || self.n_blocks == 0 || self.coherence == 0 {
            return bad("n_antennas, n_users, n_blocks and coherence must be positive".into());
        }
        let k = self.n_users;
        for (name, v) in [
            ("tx_power_data", &self.tx_power_data),
            ("tx_power_pilot", &self.tx_power_pilot),
            ("large_scale", &self.large_scale),
            ("msg_nats", &self.msg_nats),
            ("target_eps", &self.target_eps),
        ] {
            if v.len() != k {
                return bad(format!("{name} has {} entries, expected {k}", v.len()));
            }
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self
            .tx_power_data
            .iter()
            .chain(&self.tx_power_pilot)
            .all(|&p| positive(p))
        {
            return bad("transmit powers must be positive".into());
        }
        if !positive(self.noise_data) || !positive(self.noise_pilot) {
            return bad("noise variances must be positive".into());
        }
        if !self.large_scale.iter().all(|&g| positive(g)) {
            return bad("large-scale gains must be positive".into());
        }
        if !self.msg_nats.iter().all(|&m| m >= 0.0 && m.is_finite()) {
            return bad("msg_nats must be nonnegative".into());
        }
        if !self.target_eps.iter().all(|&e| e > 0.0 && e < 1.0) {
            return bad("target_eps must lie in (0, 1)".into());
        }
        if let MuPolicy::Fixed(m) = self.mu_policy {
            if !(m > 0.0 && m < 1.0) {
                return bad(format!("mu must lie in (0, 1), got {m}"));
            }
        }
        if self.pilot_len >= self.coherence {
            return bad(format!(
                "pilot_len {} must be smaller than coherence {}",
                self.pilot_len, self.coherence
            ));
        }
        if mode == Mode::Noncoherent && self.pilot_len < k {
            return bad(format!(
                "orthogonal pilots need pilot_len >= n_users ({} < {k})",
                self.pilot_len
            ));
        }
        if scheme == Some(Scheme::Zf) && k > self.n_antennas {
            return bad(format!(
                "zero forcing needs n_users <= n_antennas ({k} > {})",
                self.n_antennas
            ));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.resolve()
    }
}

/// A scalar shared by all users or one value per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    All(f64),
    Each(Vec<f64>),
}

impl PerUser {
    fn expand(&self, k: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            PerUser::All(v) => Ok(vec![*v; k]),
            PerUser::Each(v) if v.len() == k => Ok(v.clone()),
            PerUser::Each(v) => Err(Error::Config(format!(
                "{name}: expected 1 or {k} values, got {}",
                v.len()
            ))),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> PerUser {
        match self {
            PerUser::All(v) => PerUser::All(f(*v)),
            PerUser::Each(v) => PerUser::Each(v.iter().map(|&x| f(x)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Fixed(f64),
    Named(String),
}

/// Uniform user drop in a disc around the base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomDisc {
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default = "default_min_distance")]
    pub min_distance_m: f64,
    #[serde(default = "default_shadow_std")]
    pub shadow_std_db: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_radius() -> f64 {
    300.0
}
fn default_min_distance() -> f64 {
    1.0
}
fn default_shadow_std() -> f64 {
    8.0
}

impl RandomDisc {
    /// Large-scale gains for `k` users.
    pub fn draw(&self, k: usize) -> Result<Vec<f64>> {
        if !(self.radius_m > self.min_distance_m && self.min_distance_m > 0.0) {
            return Err(Error::Config("random_disc needs 0 < min_distance_m < radius_m".into()));
        }
        let shadow =
            Normal::new(0.0, self.shadow_std_db.max(0.0)).map_err(|e| Error::Config(format!("shadow_std_db: {e}")))?;
        (0..k)
            .map(|u| {
                let mut rng = substream(self.seed, &[STREAM_LAYOUT, u as u64]);
                // area-uniform radius on the annulus
                let (r0, r1) = (self.min_distance_m, self.radius_m);
                let t: f64 = rng.random();
                let d = (r0 * r0 + t * (r1 * r1 - r0 * r0)).sqrt();
                pathloss(d, shadow.sample(&mut rng))
            })
            .collect()
    }
}

/// On-disk form of [`SystemConfig`]. Exactly one of `large_scale`,
/// `distances_m` or `random_disc` places the users; none means the default
/// deterministic layout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_antennas: Option<usize>,
    pub n_users: Option<usize>,
    pub n_blocks: Option<usize>,
    pub coherence: Option<usize>,
    pub pilot_len: Option<usize>,
    pub tx_power_data: Option<PerUser>,
    pub tx_power_data_dbm: Option<PerUser>,
    pub tx_power_pilot: Option<PerUser>,
    pub tx_power_pilot_dbm: Option<PerUser>,
    pub noise_data: Option<f64>,
    pub noise_data_dbm: Option<f64>,
    pub noise_pilot: Option<f64>,
    pub noise_pilot_dbm: Option<f64>,
    pub large_scale: Option<PerUser>,
    pub large_scale_db: Option<PerUser>,
    pub distances_m: Option<Vec<f64>>,
    pub shadow_db: Option<PerUser>,
    pub random_disc: Option<RandomDisc>,
    pub msg_nats: Option<PerUser>,
    pub target_eps: Option<PerUser>,
    pub mu: Option<MuSpec>,
    pub power_scaling: Option<PowerScaling>,
}

fn pick<T: Clone>(lin: &Option<T>, dbm: &Option<T>, name: &str) -> Result<Option<(T, bool)>> {
    match (lin, dbm) {
        (Some(_), Some(_)) => Err(Error::Config(format!("both {name} and {name}_dbm given"))),
        (Some(v), None) => Ok(Some((v.clone(), false))),
        (None, Some(v)) => Ok(Some((v.clone(), true))),
        (None, None) => Ok(None),
    }
}

impl ConfigFile {
    /// Fill unspecified fields from [`SystemConfig::baseline`] and convert units.
    pub fn resolve(&self) -> Result<SystemConfig> {
        let base = SystemConfig::baseline();
        let k = self.n_users.unwrap_or(base.n_users);
        let per_user = |lin: &Option<PerUser>, dbm: &Option<PerUser>, name: &str| -> Result<Option<Vec<f64>>> {
            match pick(lin, dbm, name)? {
                Some((v, true)) => Ok(Some(v.map(dbm_to_mw).expand(k, name)?)),
                Some((v, false)) => Ok(Some(v.expand(k, name)?)),
                None => Ok(None),
            }
        };
        let scalar = |lin: &Option<f64>, dbm: &Option<f64>, name: &str| -> Result<Option<f64>> {
            Ok(pick(lin, dbm, name)?.map(|(v, is_dbm)| if is_dbm { dbm_to_mw(v) } else { v }))
        };
        let fill = |v: Option<Vec<f64>>, base_v: &[f64]| v.unwrap_or_else(|| vec![base_v[0]; k]);

        let tx_data = per_user(&self.tx_power_data, &self.tx_power_data_dbm, "tx_power_data")?;
        let tx_pilot =
            per_user(&self.tx_power_pilot, &self.tx_power_pilot_dbm, "tx_power_pilot")?.or_else(|| tx_data.clone());
        let noise_data = scalar(&self.noise_data, &self.noise_data_dbm, "noise_data")?;
        let noise_pilot = scalar(&self.noise_pilot, &self.noise_pilot_dbm, "noise_pilot")?.or(noise_data);

        let placements = [
            self.large_scale.is_some(),
            self.large_scale_db.is_some(),
            self.distances_m.is_some(),
            self.random_disc.is_some(),
        ];
        if placements.iter().filter(|&&b| b).count() > 1 {
            return Err(Error::Config(
                "give at most one of large_scale, large_scale_db, distances_m, random_disc".into(),
            ));
        }
        if self.shadow_db.is_some() && self.distances_m.is_none() {
            return Err(Error::Config("shadow_db requires distances_m".into()));
        }
        let large_scale = if let Some(g) = &self.large_scale {
            g.expand(k, "large_scale")?
        } else if let Some(g) = &self.large_scale_db {
            g.map(|db| 10f64.powf(db / 10.0)).expand(k, "large_scale_db")?
        } else if let Some(d) = &self.distances_m {
            if d.len() != k {
                return Err(Error::Config(format!(
                    "distances_m: expected {k} values, got {}",
                    d.len()
                )));
            }
            let shadow = match &self.shadow_db {
                Some(s) => s.expand(k, "shadow_db")?,
                None => vec![0.0; k],
            };
            d.iter()
                .zip(&shadow)
                .map(|(&d, &s)| pathloss(d, s).map_err(|e| Error::Config(format!("distances_m: {e}"))))
                .collect::<Result<_>>()?
        } else if let Some(disc) = &self.random_disc {
            disc.draw(k)?
        } else {
            default_distances(k)
                .into_iter()
                .map(|d| pathloss(d, 0.0))
                .collect::<Result<_>>()?
        };

        let mu_policy = match &self.mu {
            None => MuPolicy::default(),
            Some(MuSpec::Fixed(m)) => MuPolicy::Fixed(*m),
            Some(MuSpec::Named(s)) if s == "uniform" => MuPolicy::Uniform,
            Some(MuSpec::Named(s)) => {
                return Err(Error::Config(format!(
                    "mu: expected a number or \"uniform\", got \"{s}\""
                )))
            }
        };

        let cfg = SystemConfig {
            n_antennas: self.n_antennas.unwrap_or(base.n_antennas),
            n_users: k,
            n_blocks: self.n_blocks.unwrap_or(base.n_blocks),
            coherence: self.coherence.unwrap_or(base.coherence),
            pilot_len: self.pilot_len.unwrap_or(base.pilot_len),
            tx_power_data: fill(tx_data, &base.tx_power_data),
            tx_power_pilot: fill(tx_pilot, &base.tx_power_pilot),
            noise_data: noise_data.unwrap_or(base.noise_data),
            noise_pilot: noise_pilot.unwrap_or(base.noise_pilot),
            large_scale,
            msg_nats: fill(
                self.msg_nats.as_ref().map(|m| m.expand(k, "msg_nats")).transpose()?,
                &base.msg_nats,
            ),
            target_eps: fill(
                self.target_eps
                    .as_ref()
                    .map(|m| m.expand(k, "target_eps"))
                    .transpose()?,
                &base.target_eps,
            ),
            mu_policy,
            power_scaling: self.power_scaling.unwrap_or_default(),
        };
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dbm_round_trip() {
        assert_relative_eq!(dbm_to_mw(10.0), 10.0);
        assert_relative_eq!(dbm_to_mw(-100.0), 1e-10, max_relative = 1e-12);
        assert_relative_eq!(mw_to_dbm(dbm_to_mw(37.3)), 37.3, max_relative = 1e-12);
    }

    #[test]
    fn parse_with_dbm_suffix() {
        let cfg = SystemConfig::from_json_str(
            r#"{ "n_antennas": 32, "n_users": 2, "tx_power_data_dbm": [10, 20],
                 "noise_data_dbm": -100, "distances_m": [50, 120], "mu": "uniform",
                 "power_scaling": "inverse_sqrt_Nb" }"#,
        )
        .unwrap();
        assert_eq!(cfg.n_antennas, 32);
        assert_relative_eq!(cfg.tx_power_data[1], 100.0, max_relative = 1e-12);
        // pilot power and noise default to the data values
        assert_eq!(cfg.tx_power_pilot, cfg.tx_power_data);
        assert_eq!(cfg.noise_pilot, cfg.noise_data);
        assert_relative_eq!(cfg.large_scale[0], pathloss(50.0, 0.0).unwrap());
        assert_eq!(cfg.mu_policy, MuPolicy::Uniform);
        assert_eq!(cfg.power_scaling, PowerScaling::InverseSqrtNb);
        assert_relative_eq!(cfg.data_power(0), 10.0 / 32f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn parse_errors_carry_diagnostics() {
        let e = SystemConfig::from_json_str("{\n  \"n_antenas\": 4\n}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("n_antenas") && msg.contains("line 2"), "{msg}");
        let e = SystemConfig::from_json_str(r#"{"n_users": 3, "msg_nats": [1, 2]}"#).unwrap_err();
        assert!(e.to_string().contains("msg_nats"));
        let e = SystemConfig::from_json_str(r#"{"noise_data": 1, "noise_data_dbm": 0}"#).unwrap_err();
        assert!(e.to_string().contains("noise_data"));
        let e = SystemConfig::from_json_str(r#"{"mu": "sometimes"}"#).unwrap_err();
        assert!(e.to_string().contains("mu"));
    }

    #[test]
    fn baseline_is_valid() {
        let cfg = SystemConfig::baseline();
        cfg.validate(Mode::Noncoherent, Some(Scheme::Zf)).unwrap();
        assert_eq!(cfg, ConfigFile::default().resolve().unwrap());
    }

    #[test]
    fn validation_rules() {
        let mut cfg = SystemConfig::baseline();
        cfg.pilot_len = 3;
        assert!(cfg.validate(Mode::Noncoherent, None).is_err());
        assert!(cfg.validate(Mode::Coherent, None).is_ok());
        cfg.pilot_len = 20;
        assert!(cfg.validate(Mode::Coherent, None).is_err());
        let mut cfg = SystemConfig::baseline();
        cfg.n_antennas = 4;
        assert!(cfg.validate(Mode::Coherent, Some(Scheme::Zf)).is_err());
        assert!(cfg.validate(Mode::Coherent, Some(Scheme::Mrc)).is_ok());
        let mut cfg = SystemConfig::baseline();
        cfg.target_eps[2] = 1.0;
        assert!(cfg.validate(Mode::Coherent, None).is_err());
    }

    #[test]
    fn random_disc_is_seeded_and_bounded() {
        let disc = RandomDisc {
            radius_m: 300.0,
            min_distance_m: 10.0,
            shadow_std_db: 0.0,
            seed: 4,
        };
        let a = disc.draw(50).unwrap();
        assert_eq!(a, disc.draw(50).unwrap());
        let lo = pathloss(300.0, 0.0).unwrap();
        let hi = pathloss(10.0, 0.0).unwrap();
        assert!(a.iter().all(|&g| g >= lo * (1.0 - 1e-12) && g <= hi * (1.0 + 1e-12)));
    }
}
