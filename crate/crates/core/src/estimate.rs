//! Temperature estimation from the sufficient statistics of a monitored
//! two-manifold probe.
//!
//! With `n` the bath occupation at the probe gap `ε`, the manifold rates are
//! `Γ01 = γ n_F`, `Γ10 = γ (1 - n_F)` for a fermionic bath and
//! `Γ01 = κ n_B`, `Γ10 = κ (1 + n_B)` with `κ = γ ε^s` for a bosonic one.
//! Setting the derivative of the trajectory log-likelihood with respect to
//! `n` to zero gives a quadratic in `n`, so the maximum-likelihood estimate
//! is available in closed form.

use rayon::prelude::*;
use serde::Serialize;

use crate::bath::{bose, fermi, BathModel};
use crate::error::{Error, Result};
use crate::fisher::fi_rate_two_level;
use crate::spectrum::TwoLevelAnsatz;
use crate::stats::{moments, neumaier_sum};
use crate::trajectory::{replica_rng, simulate_coarse, simulate_stats_streaming, Initial, SufficientStats};

/// Probe and bath description used by the estimators.
///
/// `ansatz.n` and `ansatz.n0` fix the manifold sizes. `epsilon` is the
/// physical gap and `known_gamma` the coupling the estimator assumes; both
/// default to the ansatz gap and the bath coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationConfig {
    pub ansatz: TwoLevelAnsatz,
    pub bath: BathModel,
    pub epsilon: f64,
    pub known_gamma: f64,
}

impl EstimationConfig {
    /// Reads `ansatz.x` as the physical gap and assumes the bath's coupling.
    pub fn new(ansatz: TwoLevelAnsatz, bath: BathModel) -> Result<Self> {
        let cfg = Self {
            ansatz,
            bath,
            epsilon: ansatz.x,
            known_gamma: bath.gamma(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.bath.validate()?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidGap(self.epsilon));
        }
        if !(self.known_gamma.is_finite() && self.known_gamma > 0.0) {
            return Err(Error::InvalidBath(format!(
                "coupling must be > 0, got {}",
                self.known_gamma
            )));
        }
        if self.ansatz.n0 == 0 || self.ansatz.n0 >= self.ansatz.n {
            return Err(Error::InvalidDegeneracy {
                n: self.ansatz.n,
                n0: self.ansatz.n0,
            });
        }
        Ok(())
    }

    /// The spectrum that is simulated: the ansatz with gap `epsilon`.
    pub fn probe(&self) -> TwoLevelAnsatz {
        TwoLevelAnsatz {
            x: self.epsilon,
            ..self.ansatz
        }
    }

    fn n0(&self) -> f64 {
        self.ansatz.n0 as f64
    }

    fn n1(&self) -> f64 {
        self.ansatz.n1() as f64
    }

    /// Rate prefactor: `γ` (fermionic) or `κ(ε) = γ ε^s` (bosonic).
    fn kappa(&self) -> f64 {
        match self.bath {
            BathModel::Fermionic { .. } => self.known_gamma,
            BathModel::BosonicOhmic { s, .. } => self.known_gamma * self.epsilon.powf(s),
        }
    }

    /// Bath occupation at the probe gap.
    pub fn occupation(&self, temperature: f64) -> f64 {
        let x = self.epsilon / temperature;
        match self.bath {
            BathModel::Fermionic { .. } => fermi(x),
            BathModel::BosonicOhmic { .. } => bose(x),
        }
    }

    /// Single-level rates `(Γ01, Γ10)` for occupation `n`.
    fn rates_from_occupation(&self, n: f64) -> (f64, f64) {
        let kappa = self.kappa();
        match self.bath {
            BathModel::Fermionic { .. } => (kappa * n, kappa * (1.0 - n)),
            BathModel::BosonicOhmic { .. } => (kappa * n, kappa * (1.0 + n)),
        }
    }

    /// Temperature at which the bath occupation equals `n`.
    pub fn temperature_from_occupation(&self, n: f64) -> f64 {
        match self.bath {
            BathModel::Fermionic { .. } => self.epsilon / ((1.0 - n) / n).ln(),
            BathModel::BosonicOhmic { .. } => self.epsilon / (1.0 / n).ln_1p(),
        }
    }

    /// Fisher information of a record of length `tau` at temperature `t`.
    pub fn fisher_information(&self, temperature: f64, tau: f64) -> f64 {
        let a = TwoLevelAnsatz {
            x: self.epsilon / temperature,
            ..self.ansatz
        };
        let bath = match self.bath {
            BathModel::Fermionic { .. } => BathModel::Fermionic {
                gamma: self.known_gamma,
            },
            BathModel::BosonicOhmic { s, .. } => BathModel::BosonicOhmic {
                gamma: self.known_gamma,
                s,
            },
        };
        fi_rate_two_level(&a, &bath).dimensional(&bath, temperature, tau)
    }
}

fn log_likelihood_occupation(stats: &SufficientStats, cfg: &EstimationConfig, n: f64) -> f64 {
    let (g01, g10) = cfg.rates_from_occupation(n);
    let (up, down) = (cfg.n1() * g01, cfg.n0() * g10);
    let term = |count: u64, rate: f64| if count == 0 { 0.0 } else { count as f64 * rate.ln() };
    term(stats.k, up) + term(stats.l, down) - up * stats.tau0 - down * (stats.tau - stats.tau0)
}

/// Trajectory log-likelihood (up to a `T`-independent constant):
/// `k ln[(N−N0)Γ01] + l ln[N0 Γ10] − (N−N0)Γ01 τ0 − N0 Γ10 (τ−τ0)`.
pub fn log_likelihood(stats: &SufficientStats, cfg: &EstimationConfig, temperature: f64) -> f64 {
    log_likelihood_occupation(stats, cfg, cfg.occupation(temperature))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleResult {
    pub t_hat: f64,
    pub occupation_hat: f64,
    /// `t_hat` is a finite positive temperature.
    pub valid: bool,
    pub log_likelihood_at_hat: f64,
}

// Only the times are checked: the estimators are well defined for any jump
// counts, even those a single trajectory cannot produce.
fn check_stats(stats: &SufficientStats) -> Result<()> {
    if !(stats.tau.is_finite() && stats.tau > 0.0 && (0.0..=stats.tau).contains(&stats.tau0)) {
        return Err(Error::InvalidArgument(format!(
            "inconsistent sufficient statistics {stats:?}"
        )));
    }
    if stats.k + stats.l == 0 {
        return Err(Error::NoJumps);
    }
    Ok(())
}

// Real roots of a n² + b n + c = 0 without cancellation; `None` if complex.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return Some((0.0, 0.0));
    }
    Some((q / a, c / q))
}

/// Closed-form MLE for a fermionic bath.
///
/// With `ξ = γ(N0 τ − N τ0)` the stationarity condition reads
/// `ξ n² + (k + l − ξ) n − k = 0`, which has exactly one root in `[0, 1]`.
/// When `|ξ|` is negligible against `k + l` the linear limit `k / (k + l)`
/// is used. Roots at or above `1/2` give `valid = false`.
pub fn mle_fermionic(stats: &SufficientStats, cfg: &EstimationConfig) -> Result<MleResult> {
    if !cfg.bath.is_fermionic() {
        return Err(Error::InvalidBath("mle_fermionic needs a fermionic bath".into()));
    }
    check_stats(stats)?;
    let (k, l) = (stats.k as f64, stats.l as f64);
    let n = cfg.ansatz.n as f64;
    let xi = cfg.known_gamma * (cfg.n0() * stats.tau - n * stats.tau0);
    let occ = if xi.abs() < 1e-9 * (k + l) {
        k / (k + l)
    } else {
        let (r1, r2) = quadratic_roots(xi, k + l - xi, -k).ok_or(Error::InvalidRoot { k: stats.k, l: stats.l })?;
        let slack = 1e-12;
        [r1, r2]
            .into_iter()
            .find(|r| (-slack..=1.0 + slack).contains(r))
            .ok_or(Error::InvalidRoot { k: stats.k, l: stats.l })?
            .clamp(0.0, 1.0)
    };
    let t_hat = cfg.temperature_from_occupation(occ);
    Ok(MleResult {
        t_hat,
        occupation_hat: occ,
        valid: occ > 0.0 && occ < 0.5,
        log_likelihood_at_hat: log_likelihood_occupation(stats, cfg, occ),
    })
}

/// Which expression for the bosonic coefficient `ζ` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaForm {
    /// `κ(ε)((N−N0)τ0 + N0(τ−τ0))`, the coefficient the likelihood implies.
    #[default]
    Rederived,
    /// `κ(ε)((N−N0)τ0 + N(τ−τ0))`, kept for comparison only.
    AsPrinted,
}

pub fn zeta(stats: &SufficientStats, cfg: &EstimationConfig, form: ZetaForm) -> f64 {
    let weight = match form {
        ZetaForm::Rederived => cfg.n0(),
        ZetaForm::AsPrinted => cfg.ansatz.n as f64,
    };
    cfg.kappa() * (cfg.n1() * stats.tau0 + weight * (stats.tau - stats.tau0))
}

/// Closed-form MLE for a bosonic bath.
///
/// Solves `ζ n² + (ζ − k − l) n − k = 0` and keeps the largest nonnegative
/// root. `n = 0` maps to `t_hat = 0`, reported as invalid.
pub fn mle_bosonic(stats: &SufficientStats, cfg: &EstimationConfig) -> Result<MleResult> {
    mle_bosonic_with(stats, cfg, ZetaForm::Rederived)
}

/// [`mle_bosonic`] with a chosen `ζ` expression.
pub fn mle_bosonic_with(stats: &SufficientStats, cfg: &EstimationConfig, form: ZetaForm) -> Result<MleResult> {
    if cfg.bath.is_fermionic() {
        return Err(Error::InvalidBath("mle_bosonic needs a bosonic bath".into()));
    }
    check_stats(stats)?;
    let (k, l) = (stats.k as f64, stats.l as f64);
    let z = zeta(stats, cfg, form);
    let invalid = Error::InvalidRoot { k: stats.k, l: stats.l };
    let occ = if z.abs() < 1e-9 * (k + l) {
        // -(k + l) n - k = 0
        let r = -k / (k + l);
        if r < 0.0 {
            return Err(invalid);
        }
        r
    } else {
        let (r1, r2) = quadratic_roots(z, z - k - l, -k).ok_or(invalid)?;
        let best = r1.max(r2);
        if best < 0.0 {
            return Err(Error::InvalidRoot { k: stats.k, l: stats.l });
        }
        best
    };
    let t_hat = cfg.temperature_from_occupation(occ);
    Ok(MleResult {
        t_hat,
        occupation_hat: occ,
        valid: occ > 0.0 && t_hat.is_finite() && t_hat > 0.0,
        log_likelihood_at_hat: log_likelihood_occupation(stats, cfg, occ),
    })
}

/// Dispatches on the bath type.
pub fn mle(stats: &SufficientStats, cfg: &EstimationConfig) -> Result<MleResult> {
    if cfg.bath.is_fermionic() {
        mle_fermionic(stats, cfg)
    } else {
        mle_bosonic(stats, cfg)
    }
}

/// Score `∂_T ln P` of the sufficient statistics at temperature `t`:
/// `k ∂ ln Γ01 + l ∂ ln Γ10 − (N−N0) τ0 ∂Γ01 − N0 (τ−τ0) ∂Γ10`.
pub fn score(stats: &SufficientStats, cfg: &EstimationConfig, temperature: f64) -> f64 {
    let n = cfg.occupation(temperature);
    let u = cfg.epsilon / (temperature * temperature);
    let kappa = cfg.kappa();
    let (dln01, dln10, d01, d10) = match cfg.bath {
        BathModel::Fermionic { .. } => {
            let d = kappa * n * (1.0 - n) * u;
            ((1.0 - n) * u, -n * u, d, -d)
        }
        BathModel::BosonicOhmic { .. } => {
            let d = kappa * n * (1.0 + n) * u;
            ((1.0 + n) * u, n * u, d, d)
        }
    };
    stats.k as f64 * dln01 + stats.l as f64 * dln10
        - cfg.n1() * stats.tau0 * d01
        - cfg.n0() * (stats.tau - stats.tau0) * d10
}

/// Simulator used by the Monte Carlo routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Two-state manifold chain; exact for two-level spectra.
    #[default]
    Coarse,
    /// Full `N`-level Gillespie simulation in streaming mode.
    Full,
}

/// Minimum replica count accepted by the Monte Carlo routines.
pub const MIN_REPLICAS: usize = 100;

/// Sufficient statistics of replica `index`, drawn from stream `index` of
/// `seed` with a thermal start.
pub fn simulate_replica(
    cfg: &EstimationConfig,
    temperature: f64,
    tau: f64,
    seed: u64,
    index: u64,
    engine: Engine,
) -> Result<SufficientStats> {
    let mut rng = replica_rng(seed, index);
    let probe = cfg.probe();
    match engine {
        Engine::Coarse => simulate_coarse(&probe, &cfg.bath, temperature, tau, Initial::Thermal, &mut rng),
        Engine::Full => simulate_stats_streaming(
            &probe.to_spectrum(),
            &probe,
            &cfg.bath,
            temperature,
            tau,
            Initial::Thermal,
            &mut rng,
        ),
    }
}

fn simulate_all(
    cfg: &EstimationConfig,
    temperature: f64,
    tau: f64,
    replicas: usize,
    seed: u64,
    engine: Engine,
) -> Result<Vec<SufficientStats>> {
    cfg.validate()?;
    if replicas < MIN_REPLICAS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| simulate_replica(cfg, temperature, tau, seed, r, engine))
        .collect()
}

/// Monte Carlo estimate of the Fisher information as the mean squared score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiEstimate {
    pub fi: f64,
    pub stderr: f64,
    pub mean_score: f64,
    pub score_stderr: f64,
    /// Closed-form value the estimate should reproduce.
    pub fi_theory: f64,
    pub replicas: usize,
}

pub fn fi_score_variance_mc(
    cfg: &EstimationConfig,
    temperature: f64,
    tau: f64,
    replicas: usize,
    seed: u64,
) -> Result<FiEstimate> {
    fi_score_variance_mc_with(cfg, temperature, tau, replicas, seed, Engine::Coarse)
}

pub fn fi_score_variance_mc_with(
    cfg: &EstimationConfig,
    temperature: f64,
    tau: f64,
    replicas: usize,
    seed: u64,
    engine: Engine,
) -> Result<FiEstimate> {
    let all = simulate_all(cfg, temperature, tau, replicas, seed, engine)?;
    let scores: Vec<f64> = all.iter().map(|s| score(s, cfg, temperature)).collect();
    let squares: Vec<f64> = scores.iter().map(|s| s * s).collect();
    let sq = moments(&squares);
    let sc = moments(&scores);
    Ok(FiEstimate {
        fi: sq.mean,
        stderr: sq.stderr,
        mean_score: sc.mean,
        score_stderr: sc.stderr,
        fi_theory: cfg.fisher_information(temperature, tau),
        replicas,
    })
}

/// Cramér–Rao benchmark of the closed-form MLE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrbReport {
    pub t_true: f64,
    /// Mean squared error over the valid replicas.
    pub mse: f64,
    /// `1 / F(T_true)`.
    pub crb: f64,
    pub ratio: f64,
    /// Standard error of `ratio`.
    pub stderr: f64,
    pub bias: f64,
    pub invalid_fraction: f64,
    pub replicas: usize,
}

pub fn crb_benchmark(cfg: &EstimationConfig, t_true: f64, tau: f64, replicas: usize, seed: u64) -> Result<CrbReport> {
    crb_benchmark_with(cfg, t_true, tau, replicas, seed, Engine::Coarse)
}

pub fn crb_benchmark_with(
    cfg: &EstimationConfig,
    t_true: f64,
    tau: f64,
    replicas: usize,
    seed: u64,
    engine: Engine,
) -> Result<CrbReport> {
    let all = simulate_all(cfg, t_true, tau, replicas, seed, engine)?;
    let mut errors = Vec::with_capacity(replicas);
    let mut invalid = 0usize;
    for s in &all {
        match mle(s, cfg) {
            Ok(r) if r.valid => errors.push(r.t_hat - t_true),
            Ok(_) | Err(Error::NoJumps) | Err(Error::InvalidRoot { .. }) => invalid += 1,
            Err(e) => return Err(e),
        }
    }
    if errors.is_empty() {
        return Err(Error::InvalidArgument("no replica produced a valid estimate".into()));
    }
    let squares: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let sq = moments(&squares);
    let crb = 1.0 / cfg.fisher_information(t_true, tau);
    Ok(CrbReport {
        t_true,
        mse: sq.mean,
        crb,
        ratio: sq.mean / crb,
        stderr: sq.stderr / crb,
        bias: neumaier_sum(errors.iter().copied()) / errors.len() as f64,
        invalid_fraction: invalid as f64 / replicas as f64,
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fermionic_cfg(n: usize, n0: usize, eps: f64) -> EstimationConfig {
        EstimationConfig::new(
            TwoLevelAnsatz::new(n, n0, eps).unwrap(),
            BathModel::fermionic(1.0).unwrap(),
        )
        .unwrap()
    }

    fn bosonic_cfg(n: usize, n0: usize, eps: f64, s: f64) -> EstimationConfig {
        EstimationConfig::new(
            TwoLevelAnsatz::new(n, n0, eps).unwrap(),
            BathModel::bosonic(1.0, s).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn no_jump_likelihood() {
        let cfg = fermionic_cfg(8, 2, 1.5);
        let st = SufficientStats {
            k: 0,
            l: 0,
            tau0: 3.0,
            tau: 3.0,
        };
        for t in [0.5, 1.0, 2.0] {
            let expected = -(6.0 * fermi(1.5 / t)) * 3.0;
            assert!((log_likelihood(&st, &cfg, t) - expected).abs() < 1e-12);
        }
        assert!(matches!(mle_fermionic(&st, &cfg), Err(Error::NoJumps)));
    }

    #[test]
    fn linear_limit() {
        // N0 τ = N τ0 makes ξ vanish: n = k / (k + l)
        let cfg = fermionic_cfg(4, 1, 2.0);
        let st = SufficientStats {
            k: 1,
            l: 3,
            tau0: 2.5,
            tau: 10.0,
        };
        let r = mle_fermionic(&st, &cfg).unwrap();
        assert!((r.occupation_hat - 0.25).abs() < 1e-15);
        assert!((r.t_hat - 2.0 / 3f64.ln()).abs() < 1e-12);
        assert!(r.valid);
    }

    #[test]
    fn half_occupation_is_invalid() {
        let cfg = fermionic_cfg(2, 1, 1.0);
        let st = SufficientStats {
            k: 5,
            l: 5,
            tau0: 5.0,
            tau: 10.0,
        };
        let r = mle_fermionic(&st, &cfg).unwrap();
        assert!((r.occupation_hat - 0.5).abs() < 1e-12);
        assert!(!r.valid);
    }

    #[test]
    fn bosonic_zero_zeta_has_no_root() {
        let cfg = bosonic_cfg(4, 1, 1.0, 2.0);
        // τ0 = τ and N - N0 ... use a vanishing horizon to make ζ ≈ 0
        let st = SufficientStats {
            k: 1,
            l: 0,
            tau0: 1e-300,
            tau: 1e-300,
        };
        assert!(matches!(mle_bosonic(&st, &cfg), Err(Error::InvalidRoot { .. })));
    }

    #[test]
    fn wrong_bath_is_rejected() {
        let st = SufficientStats {
            k: 1,
            l: 1,
            tau0: 1.0,
            tau: 2.0,
        };
        assert!(mle_bosonic(&st, &fermionic_cfg(4, 1, 1.0)).is_err());
        assert!(mle_fermionic(&st, &bosonic_cfg(4, 1, 1.0, 2.0)).is_err());
    }

    #[test]
    fn score_matches_likelihood_derivative() {
        let st = SufficientStats {
            k: 40,
            l: 41,
            tau0: 70.0,
            tau: 100.0,
        };
        for cfg in [fermionic_cfg(10, 3, 2.0), bosonic_cfg(10, 3, 2.0, 1.5)] {
            for t in [0.6, 1.0, 1.7] {
                let h = 1e-6;
                let fd = (log_likelihood(&st, &cfg, t + h) - log_likelihood(&st, &cfg, t - h)) / (2.0 * h);
                let s = score(&st, &cfg, t);
                assert!((s - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{s} vs {fd}");
            }
        }
    }

    #[test]
    fn estimator_is_scale_equivariant() {
        let st = SufficientStats {
            k: 30,
            l: 30,
            tau0: 80.0,
            tau: 100.0,
        };
        for base in [fermionic_cfg(8, 2, 1.5)] {
            let r = mle(&st, &base).unwrap();
            for c in [0.5, 3.0] {
                let scaled = EstimationConfig {
                    epsilon: c * base.epsilon,
                    ..base
                };
                let rs = mle(&st, &scaled).unwrap();
                assert!((rs.t_hat / r.t_hat - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn occupation_decreases_with_ground_time() {
        let cfg = fermionic_cfg(8, 2, 1.5);
        let mut prev = f64::INFINITY;
        for i in 1..100 {
            let st = SufficientStats {
                k: 20,
                l: 20,
                tau0: i as f64,
                tau: 100.0,
            };
            let r = mle_fermionic(&st, &cfg).unwrap();
            assert!(r.occupation_hat <= prev + 1e-15);
            prev = r.occupation_hat;
        }
    }

    #[test]
    fn replica_count_is_enforced() {
        let cfg = fermionic_cfg(8, 2, 1.5);
        assert!(fi_score_variance_mc(&cfg, 1.0, 10.0, 50, 0).is_err());
    }

    #[test]
    fn quadratic_roots_are_stable() {
        let (a, b) = quadratic_roots(1e-12, 1.0, -1.0).unwrap();
        let small = if a.abs() < b.abs() { a } else { b };
        assert!((small - 1.0).abs() < 1e-9);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_none());
    }
}
