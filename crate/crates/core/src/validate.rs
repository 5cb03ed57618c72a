//! Oracle suites behind `fblmimo validate`: every closed form is compared
//! with an independent reference (quadrature, Stirling series, Monte Carlo).

use crate::analysis::{block_analysis, evaluate};
use crate::channel::{block_stats, draw_channels, BlockLinkStats};
use crate::coherent_metrics::{
    capacity_dispersion, msg_nats_for_eps, perturbation_constant, perturbation_lower_bound, perturbation_upper_bound,
    C1,
};
use crate::config::{dbm_to_mw, Mode, Scheme, SystemConfig};
use crate::error::Result;
use crate::gamma_moments::{abs_moment_chisq_diff, abs_moment_gamma_diff, CorrChiSqPair, CorrGammaPair};
use crate::noncoherent_metrics::{capacity_dispersion_noncoherent, gamma_match, GammaMatch};
use crate::oracle::{gamma_diff_abs_moment_mc, q_tail_quadrature, stirling_ln_gamma, vg_abs_moment_quadrature};
use crate::simkit::{
    block_density_moments, empirical_norm_cdfs, plan_channel, rcu_error_estimate, DensitySampler, TrialPlan,
};
use crate::specfun::q_inv;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

impl Level {
    /// Monte Carlo sample count of the oracles.
    pub fn samples(&self) -> usize {
        match self {
            Level::Quick => 10_000,
            Level::Full => 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: impl Into<String>, r: Result<Check>) -> Self {
        let name = name.into();
        r.unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub level: Level,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<44} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            )?;
        }
        let bad = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), bad)
    }
}

/// Signature of [`gamma_match`], swappable for mutation testing.
pub type Matcher = fn(&BlockLinkStats, usize, usize) -> Result<GammaMatch>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn unit_stats(sinr: f64) -> BlockLinkStats {
    BlockLinkStats {
        gain: sinr.sqrt(),
        noise_var: 1.0,
        sinr,
        delta: 0.0,
        err_self: 0.0,
        power: 1.0,
    }
}

/// With error-free estimates both shapes equal `T_c - tau_c` and the
/// correlation is `1/(1 + SINR)`.
pub fn check_gamma_match_reduction(matcher: Matcher) -> Check {
    let mut worst = 0.0f64;
    for (t_c, tau) in [(20, 5), (40, 10), (12, 0)] {
        let t = (t_c - tau) as f64;
        for s in [0.05, 1.0, 30.0, 1e4] {
            match matcher(&unit_stats(s), t_c, tau) {
                Ok(gm) => {
                    worst = worst
                        .max(rel(gm.beta_y, t))
                        .max(rel(gm.beta_n, t))
                        .max(rel(gm.rho, 1.0 / (1.0 + s)));
                }
                Err(e) => return Check::new("gamma_match_reduction", false, format!("error: {e}")),
            }
        }
    }
    Check::new(
        "gamma_match_reduction",
        worst < 1e-9,
        format!("max rel err {worst:.2e}"),
    )
}

fn check_q_inv() -> Result<Check> {
    let mut worst = 0.0f64;
    for p in [0.4, 0.1, 1e-2, 1e-5, 1e-9] {
        worst = worst.max(rel(q_tail_quadrature(q_inv(p)?), p));
    }
    Ok(Check::new(
        "q_inv_against_quadrature",
        worst < 1e-8,
        format!("max rel err {worst:.2e}"),
    ))
}

fn stirling_constant(l: usize, t: f64) -> f64 {
    4.0 * C1 / (2.0 * PI).sqrt() / (l as f64).sqrt() * (stirling_ln_gamma(t + 1.5) - stirling_ln_gamma(t + 1.0)).exp()
        / t.sqrt()
}

fn check_perturbation_constants() -> Check {
    let mut worst = 0.0f64;
    let mut bracket = true;
    for l in [1, 10, 40] {
        for t in [5.0, 15.0, 20.0, 75.0] {
            let u = perturbation_constant(l, t);
            worst = worst.max(rel(u, stirling_constant(l, t)));
            bracket &= u >= perturbation_lower_bound(l, t) && u <= perturbation_upper_bound(l, t);
        }
    }
    Check::new(
        "perturbation_constant_vs_stirling",
        worst < 1e-10 && bracket,
        format!(
            "max rel err {worst:.2e}, bracket {}",
            if bracket { "ok" } else { "violated" }
        ),
    )
}

fn check_lemma_variance() -> Result<Check> {
    let mut worst = 0.0f64;
    for a in [1.0, 5.0, 20.0] {
        for rho in [0.0, 0.3, 0.8] {
            let p = CorrGammaPair::new(a, 1.0, a, 1.0, rho)?;
            worst = worst.max(rel(abs_moment_gamma_diff(&p, 2)?, p.variance_of_difference()));
        }
    }
    Ok(Check::new(
        "lemma2_second_moment_identity",
        worst < 1e-2,
        format!("max rel err {worst:.2e}"),
    ))
}

fn check_laplace_point() -> Result<Check> {
    let v = abs_moment_gamma_diff(&CorrGammaPair::new(1.0, 1.0, 1.0, 1.0, 0.0)?, 3)?;
    Ok(Check::new(
        "lemma2_laplace_point",
        rel(v, 6.0) < 1e-9,
        format!("E|z|^3 = {v:.12}"),
    ))
}

fn check_chisq_quadrature() -> Result<Check> {
    let mut worst = 0.0f64;
    for (n, rho) in [(8, 0.5), (40, 0.5), (40, 0.9), (2, 0.1)] {
        let p = CorrChiSqPair::new(n, rho)?;
        worst = worst.max(rel(abs_moment_chisq_diff(&p, 3)?, vg_abs_moment_quadrature(&p, 3.0)));
    }
    Ok(Check::new(
        "chisq_third_moment_vs_quadrature",
        worst < 1e-6,
        format!("max rel err {worst:.2e}"),
    ))
}

fn check_mode_reduction() -> Result<Check> {
    let mut worst = 0.0f64;
    for s in [0.1, 2.0, 500.0] {
        let st = unit_stats(s);
        let gm = gamma_match(&st, 20, 5)?;
        let (i, v) = capacity_dispersion_noncoherent(&st, &gm, 20, 5)?;
        let (ic, vc) = capacity_dispersion(s);
        worst = worst.max(rel(i, 0.75 * ic)).max(rel(v, 0.75 * vc));
    }
    Ok(Check::new(
        "noncoherent_reduces_to_coherent",
        worst < 1e-9,
        format!("max rel err {worst:.2e}"),
    ))
}

fn check_lemma_mc(a: f64, b: f64, rho: f64, n: usize, seed: u64, by_se: bool) -> Result<Check> {
    let p = CorrGammaPair::new(a, b, a, b, rho)?;
    let v = abs_moment_gamma_diff(&p, 3)?;
    let (mc, se) = gamma_diff_abs_moment_mc(&p, 3, n, seed);
    let name = format!("lemma2_third_moment_mc a={a} rho={rho}");
    let ok = if by_se {
        (v - mc).abs() <= 3.0 * se
    } else {
        rel(v, mc) <= 0.03
    };
    Ok(Check::new(
        name,
        ok,
        format!("closed {v:.6} mc {mc:.6} +- {se:.2e} (rel {:.2e})", rel(v, mc)),
    ))
}

fn check_density_moments(mode: Mode, scheme: Scheme, n: usize) -> Result<Check> {
    let cfg = SystemConfig::baseline();
    let ch = draw_channels(&cfg, mode, 101);
    let blocks = block_analysis(&ch, &cfg, scheme, 0)?.metrics();
    let sampler = DensitySampler::new(&ch, &cfg, scheme, 0)?;
    let j = 0;
    let m = block_density_moments(&sampler, j, n, 202);
    let tc = cfg.coherence as f64;
    let (want_i, want_v, want_u) = (tc * blocks[j].capacity, tc * blocks[j].dispersion, blocks[j].third_abs);
    let z_mean = (m.mean.value - want_i) / m.mean.std_err;
    let z_var = (m.variance.value - want_v) / m.variance.std_err;
    let r3 = rel(m.third_abs.value, want_u);
    // 5% is below the sampling noise of the third moment at 10^4 draws
    let z3 = (m.third_abs.value - want_u) / m.third_abs.std_err;
    Ok(Check::new(
        format!("info_density_moments {} {}", mode.as_str(), scheme.as_str()),
        z_mean.abs() <= 3.0 && z_var.abs() <= 3.0 && (r3 <= 0.05 || z3.abs() <= 3.0),
        format!("z_mean {z_mean:.2}, z_var {z_var:.2}, third rel {r3:.2e} (z {z3:.2})"),
    ))
}

/// Matched Gamma check at N_b = 20, T_c = 40, P = 40 dBm: KS distances of
/// the normalised norms and their correlation.
pub fn matched_gamma_checks(scheme: Scheme, n: usize) -> Result<Vec<Check>> {
    let mut cfg = SystemConfig::baseline();
    cfg.coherence = 40;
    cfg.tx_power_data = vec![dbm_to_mw(40.0); cfg.n_users];
    cfg.tx_power_pilot = cfg.tx_power_data.clone();
    let ch = draw_channels(&cfg, Mode::Noncoherent, 303);
    let st = block_stats(&ch, &cfg, scheme, 0, 0)?;
    let gm = gamma_match(&st, cfg.coherence, cfg.pilot_len)?;
    let t = cfg.data_symbols(Mode::Noncoherent) as f64;
    let plan = TrialPlan::conditional(n, 404)?;
    let c = empirical_norm_cdfs(&ch, &cfg, scheme, 0, 0, &plan)?;
    let ks_y = c.v_y.ks_to_gamma(gm.beta_y, gm.beta_y / t)?;
    let ks_n = c.v_n.ks_to_gamma(gm.beta_n, gm.beta_n / t)?;
    let z = (c.corr - gm.rho) / c.corr_se;
    Ok(vec![
        Check::new(
            format!("matched_gamma_ks {} v_y", scheme.as_str()),
            ks_y < 0.05,
            format!("KS {ks_y:.4}"),
        ),
        Check::new(
            format!("matched_gamma_ks {} v_n", scheme.as_str()),
            ks_n < 0.05,
            format!("KS {ks_n:.4}"),
        ),
        Check::new(
            format!("matched_gamma_correlation {}", scheme.as_str()),
            z.abs() <= 3.0,
            format!("corr {:.5} vs rho {:.5}, z {z:.2}", c.corr, gm.rho),
        ),
    ])
}

/// RCU Monte Carlo against the Taylor and BE-CLT figures, with the message
/// size tuned so the Taylor estimate equals `target`.
pub fn rcu_consistency_check(mode: Mode, scheme: Scheme, target: f64, n: usize, seed: u64) -> Result<Check> {
    let mut cfg = SystemConfig::baseline();
    let plan = TrialPlan::conditional(n, seed)?;
    let ch = plan_channel(&cfg, mode, &plan, 0);
    let mu = cfg.mu_policy.analytic();
    let r = evaluate(&ch, &cfg, scheme, 0, cfg.target_eps[0], mu)?;
    let ln_m = msg_nats_for_eps(cfg.blocklength() as f64, r.mean_capacity, r.mean_dispersion, mu, target)?;
    cfg.msg_nats = vec![ln_m; cfg.n_users];
    let r = evaluate(&ch, &cfg, scheme, 0, cfg.target_eps[0], mu)?;
    let e = rcu_error_estimate(&cfg, scheme, mode, 0, &plan)?;
    let ok = (e.value - r.eps_taylor).abs() <= 3.0 * e.std_err && e.value <= r.eps_beclt + 3.0 * e.std_err;
    Ok(Check::new(
        format!("rcu_vs_taylor {} {}", mode.as_str(), scheme.as_str()),
        ok,
        format!(
            "rcu {:.5} +- {:.5}, taylor {:.5}, beclt {:.5}",
            e.value, e.std_err, r.eps_taylor, r.eps_beclt
        ),
    ))
}

const COMBOS: [(Mode, Scheme); 4] = [
    (Mode::Coherent, Scheme::Mrc),
    (Mode::Coherent, Scheme::Zf),
    (Mode::Noncoherent, Scheme::Mrc),
    (Mode::Noncoherent, Scheme::Zf),
];

/// Trials of the signal-chain suites. Each RCU trial simulates every block,
/// so these stay at 10^5 in the full suite.
fn chain_samples(level: Level) -> usize {
    level.samples().min(100_000)
}

pub fn run_validate(level: Level) -> ValidationReport {
    run_validate_with(level, gamma_match)
}

/// [`run_validate`] with the gamma-match step replaced by `matcher`.
pub fn run_validate_with(level: Level, matcher: Matcher) -> ValidationReport {
    let n = level.samples();
    let mut checks = vec![
        Check::from_result("q_inv_against_quadrature", check_q_inv()),
        check_perturbation_constants(),
        Check::from_result("lemma2_second_moment_identity", check_lemma_variance()),
        Check::from_result("lemma2_laplace_point", check_laplace_point()),
        Check::from_result("chisq_third_moment_vs_quadrature", check_chisq_quadrature()),
        check_gamma_match_reduction(matcher),
        Check::from_result("noncoherent_reduces_to_coherent", check_mode_reduction()),
        // chi-square(40) pair at rho = 0.5
        Check::from_result(
            "lemma2_third_moment_mc chisq",
            check_lemma_mc(20.0, 0.5, 0.5, n, 7, true),
        ),
    ];
    for (mode, scheme) in COMBOS {
        checks.push(Check::from_result(
            format!("info_density_moments {} {}", mode.as_str(), scheme.as_str()),
            check_density_moments(mode, scheme, n.min(chain_samples(level))),
        ));
    }
    if level == Level::Full {
        for a in [4.0, 15.0, 35.0] {
            for rho in [0.0, 0.2, 0.6, 0.9] {
                checks.push(Check::from_result(
                    format!("lemma2_third_moment_mc a={a} rho={rho}"),
                    check_lemma_mc(a, 1.0, rho, n, 8, false),
                ));
            }
        }
        for scheme in [Scheme::Mrc, Scheme::Zf] {
            match matched_gamma_checks(scheme, chain_samples(level)) {
                Ok(cs) => checks.extend(cs),
                Err(e) => checks.push(Check::new("matched_gamma", false, format!("error: {e}"))),
            }
        }
        for (mode, scheme) in COMBOS {
            checks.push(Check::from_result(
                format!("rcu_vs_taylor {} {}", mode.as_str(), scheme.as_str()),
                rcu_consistency_check(mode, scheme, 0.05, chain_samples(level), 505),
            ));
        }
    }
    ValidationReport { level, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mutated(stats: &BlockLinkStats, t_c: usize, tau_c: usize) -> Result<GammaMatch> {
        let mut gm = gamma_match(stats, t_c, tau_c)?;
        // noise shape with its denominator off by one
        let t = (t_c - tau_c) as f64;
        let d = stats.delta / (stats.noise_var * stats.noise_var);
        gm.beta_n = t / (1.0 + 1.0 + d * (t + 1.0));
        Ok(gm)
    }

    #[test]
    fn reduction_check_catches_mutation() {
        assert!(check_gamma_match_reduction(gamma_match).passed);
        let c = check_gamma_match_reduction(mutated);
        assert!(!c.passed, "{c:?}");
    }

    #[test]
    fn quick_suite_passes() {
        let r = run_validate(Level::Quick);
        assert!(r.all_passed(), "{r}");
        assert!(r.checks.len() >= 12);
        let bad = run_validate_with(Level::Quick, mutated);
        let failed: Vec<_> = bad.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["gamma_match_reduction"]);
    }

    #[test]
    fn report_lists_every_check() {
        let r = ValidationReport {
            level: Level::Quick,
            checks: vec![Check::new("a", true, "x"), Check::new("b", false, "y")],
        };
        let s = r.to_string();
        assert!(s.contains("PASS a") && s.contains("FAIL b") && s.ends_with("2 checks, 1 failed"));
        assert!(!r.all_passed());
    }
}
