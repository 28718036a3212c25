//! Sensitivity of the optimal two-level probe to Gaussian level disorder,
//! together with the window-counting lower bound on the perturbed FI rate.

use rayon::prelude::*;
use serde::Serialize;

use crate::bath::BathModel;
use crate::error::{Error, Result};
use crate::fisher::fi_rate_exact;
use crate::optimize::optimize_two_level;
use crate::spectrum::{perturb_gaussian, EnergySpectrum, TwoLevelAnsatz};
use crate::stats::moments;

const KERNEL_GRID: usize = 2001;

/// Ingredients of the lower bound `q p N c e^{-σ} (c₊ + c₋ e^{-x*})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowBound {
    /// Fraction of levels in `[-σ/2, σ/2]`.
    pub q: f64,
    /// Fraction of levels in `[x* - σ/2, x* + σ/2]`.
    pub p: f64,
    pub c: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub bound: f64,
    /// Some level lies below `-σ/2`, which the bound's derivation excludes.
    pub has_low_level: bool,
}

/// Smallest kernel values `(min K(x), min K(-x))` over `[x* - σ, x* + σ]`.
pub fn kernel_minima(bath: &BathModel, x_star: f64, sigma: f64) -> (f64, f64) {
    let (lo, hi) = (x_star - sigma, x_star + sigma);
    (0..KERNEL_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (KERNEL_GRID - 1) as f64)
        .fold((f64::INFINITY, f64::INFINITY), |(a, b), x| {
            (a.min(bath.rate_fi_kernel(x)), b.min(bath.rate_fi_kernel(-x)))
        })
}

/// Evaluates the window bound for `spec` around the optimum `(0, x*)`.
///
/// Returns `None` when `σ ≥ x*`: the two windows then overlap and the
/// argument gives nothing.
pub fn window_bound(spec: &EnergySpectrum, bath: &BathModel, x_star: f64, sigma: f64) -> Option<WindowBound> {
    if !(sigma > 0.0 && sigma < x_star) {
        return None;
    }
    let n = spec.len() as f64;
    let half = sigma / 2.0;
    let count = |centre: f64| spec.levels().iter().filter(|&&e| (e - centre).abs() <= half).count() as f64;
    let (q, p) = (count(0.0) / n, count(x_star) / n);
    let c = 1.0 / (1.0 - p + p * (-x_star).exp());
    let (c_plus, c_minus) = kernel_minima(bath, x_star, sigma);
    let bound = q * p * n * c * (-sigma).exp() * (c_plus + c_minus * (-x_star).exp());
    Some(WindowBound {
        q,
        p,
        c,
        c_plus,
        c_minus,
        bound,
        has_low_level: spec.min() < -half,
    })
}

/// One perturbed spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trial {
    pub seed: u64,
    pub fi: f64,
    pub bound: Option<WindowBound>,
}

/// Aggregate over the trials of one `(N, σ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    /// Unperturbed two-level optimum per level.
    pub optimum_per_level: f64,
    pub mean_fi_per_level: f64,
    pub std_fi_per_level: f64,
    /// Fraction of trials with `F̃ < 0.9 F̃*`.
    pub fraction_below_90: f64,
    /// Mean bound per level, `None` when the bound does not apply.
    pub mean_bound_per_level: Option<f64>,
    /// Trials whose bound exceeds the exact rate.
    pub bound_violations: usize,
    /// Fraction of trials with a level below `-σ/2`.
    pub fraction_with_low_level: f64,
    #[serde(skip)]
    pub samples: Vec<Trial>,
}

/// Perturbs the optimal two-level probe of `n` levels and evaluates each
/// trial. Trial `t` uses seed `seed + t`, so cells with different `σ` share
/// their underlying normal draws.
pub fn robustness_cell(
    optimum: &TwoLevelAnsatz,
    optimum_fi: f64,
    bath: &BathModel,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<RobustnessRow> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let samples: Vec<Trial> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = seed.wrapping_add(t);
            let spec = perturb_gaussian(optimum, sigma, s)?;
            Ok(Trial {
                seed: s,
                fi: fi_rate_exact(&spec, bath).value(),
                bound: window_bound(&spec, bath, optimum.x, sigma),
            })
        })
        .collect::<Result<_>>()?;
    let n = optimum.n as f64;
    let per_level: Vec<f64> = samples.iter().map(|t| t.fi / n).collect();
    let m = moments(&per_level);
    let bounds: Vec<f64> = samples.iter().filter_map(|t| t.bound.map(|b| b.bound / n)).collect();
    let count = |pred: &dyn Fn(&Trial) -> bool| samples.iter().filter(|t| pred(t)).count();
    Ok(RobustnessRow {
        n: optimum.n,
        sigma,
        trials,
        optimum_per_level: optimum_fi / n,
        mean_fi_per_level: m.mean,
        std_fi_per_level: if trials > 1 { m.variance.sqrt() } else { 0.0 },
        fraction_below_90: count(&|t| t.fi < 0.9 * optimum_fi) as f64 / trials as f64,
        mean_bound_per_level: (!bounds.is_empty()).then(|| moments(&bounds).mean),
        bound_violations: count(&|t| t.bound.is_some_and(|b| b.bound > t.fi)),
        fraction_with_low_level: count(&|t| t.bound.is_some_and(|b| b.has_low_level)) as f64 / trials as f64,
        samples,
    })
}

/// [`robustness_cell`] for every `σ`, around the two-level optimum of `n`
/// levels.
pub fn robustness_sweep(
    n: usize,
    bath: &BathModel,
    sigmas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<RobustnessRow>> {
    let opt = optimize_two_level(n, bath)?;
    let ansatz = opt.ansatz().expect("two-level optimum");
    sigmas
        .iter()
        .map(|&sigma| robustness_cell(&ansatz, opt.fi_rate, bath, sigma, trials, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fermionic() -> BathModel {
        BathModel::fermionic(1.0).unwrap()
    }

    #[test]
    fn zero_sigma_reproduces_optimum() {
        let rows = robustness_sweep(64, &fermionic(), &[0.0], 5, 1).unwrap();
        let r = &rows[0];
        assert!((r.mean_fi_per_level - r.optimum_per_level).abs() < 1e-12);
        assert_eq!(r.std_fi_per_level, 0.0);
        assert!(r.mean_bound_per_level.is_none());
    }

    #[test]
    fn bound_on_exact_two_level_spectrum() {
        // all levels in their windows: q + p = 1
        let a = TwoLevelAnsatz::new(100, 20, 2.9682).unwrap();
        let b = window_bound(&a.to_spectrum(), &fermionic(), a.x, 0.4).unwrap();
        assert!((b.q - 0.2).abs() < 1e-12 && (b.p - 0.8).abs() < 1e-12);
        assert!(!b.has_low_level);
        let exact = fi_rate_exact(&a.to_spectrum(), &fermionic()).value();
        assert!(b.bound <= exact);
        assert!(window_bound(&a.to_spectrum(), &fermionic(), a.x, 3.0).is_none());
    }

    #[test]
    fn kernel_minima_sit_at_window_edges() {
        let bath = fermionic();
        let (cp, cm) = kernel_minima(&bath, 2.9682, 0.5);
        let edge = |f: &dyn Fn(f64) -> f64| f(2.4682).min(f(3.4682));
        assert!((cp - edge(&|x| bath.rate_fi_kernel(x))).abs() < 1e-12);
        assert!((cm - edge(&|x| bath.rate_fi_kernel(-x))).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_deterministic() {
        let a = robustness_sweep(32, &fermionic(), &[0.3], 12, 7).unwrap();
        let b = robustness_sweep(32, &fermionic(), &[0.3], 12, 7).unwrap();
        assert_eq!(a, b);
    }
}
