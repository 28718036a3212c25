//! Fisher-information quantities for monitored probes.
//!
//! Everything here is a *dimensionless FI rate* `F̃`. The Fisher information
//! of a record of length `τ` at temperature `T` is
//! `F(T) = γ τ · prefactor(T) · F̃`, see [`BathModel::fi_prefactor`].

use rayon::prelude::*;
use serde::Serialize;

use crate::bath::{generator, BathModel};
use crate::error::{Error, Result};
use crate::optimize::maximize_1d;
use crate::spectrum::{equilibrium_distribution, EnergySpectrum, TwoLevelAnsatz};
use crate::stats::neumaier_sum;

/// Upper end of every gap search.
pub const GAP_SEARCH_MAX: f64 = 50.0;
const GAP_SEARCH_MIN: f64 = 1e-6;
const PARALLEL_GROUPS: usize = 512;

/// Dimensionless FI rate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct FiRate(pub f64);

impl FiRate {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Fisher information of a record of duration `tau` at temperature `t`.
    pub fn dimensional(self, bath: &BathModel, temperature: f64, tau: f64) -> f64 {
        bath.gamma() * tau * bath.fi_prefactor(temperature) * self.0
    }
}

/// Which information source a two-level optimum refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Full monitored trajectory.
    Monitored,
    /// Time-averaged populations only.
    Empirical,
    /// A single energy measurement of the thermalized probe.
    Equilibrium,
}

/// `F̃ = Σ_i p_i Σ_{j≠i} K(x_j - x_i)`.
///
/// Exactly degenerate levels are grouped, so a two-valued spectrum costs
/// O(1) regardless of `N`. Rows are reduced in a fixed order, so the result
/// does not depend on the rayon pool size.
pub fn fi_rate_exact(spec: &EnergySpectrum, bath: &BathModel) -> FiRate {
    let groups = spec.grouped();
    let x_min = groups[0].0;
    let z = neumaier_sum(groups.iter().map(|&(x, m)| m as f64 * (x_min - x).exp()));
    let row = |a: usize| -> f64 {
        let (xa, ma) = groups[a];
        let inner = neumaier_sum(
            groups
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, &(xb, mb))| mb as f64 * bath.rate_fi_kernel(xb - xa)),
        );
        ma as f64 * (x_min - xa).exp() / z * inner
    };
    let rows: Vec<f64> = if groups.len() >= PARALLEL_GROUPS {
        (0..groups.len()).into_par_iter().map(row).collect()
    } else {
        (0..groups.len()).map(row).collect()
    };
    FiRate(neumaier_sum(rows))
}

/// FI rate of an arbitrary level vector together with its gradient with
/// respect to every level. O(N²); used by the global optimizer.
pub fn fi_rate_with_gradient(levels: &[f64], bath: &BathModel) -> (f64, Vec<f64>) {
    let n = levels.len();
    let x_min = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = levels.iter().map(|x| (x_min - x).exp()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|v| v / z).collect();

    // out[i] = Σ_j K(x_j - x_i), out_slope[i] = Σ_j K'(x_j - x_i), in_slope[m] = Σ_i p_i K'(x_m - x_i)
    let mut out = vec![0.0; n];
    let mut out_slope = vec![0.0; n];
    let mut in_slope = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (k, dk) = bath.kernel_with_slope(levels[j] - levels[i]);
            out[i] += k;
            out_slope[i] += dk;
            in_slope[j] += p[i] * dk;
        }
    }
    let f: f64 = p.iter().zip(&out).map(|(pi, a)| pi * a).sum();
    let grad = (0..n)
        .map(|m| p[m] * (f - out[m]) + in_slope[m] - p[m] * out_slope[m])
        .collect();
    (f, grad)
}

/// `N0 (N - N0) / (N0 + (N - N0) e^{-x})`, the degeneracy weight shared by
/// the monitored and empirical two-level rates.
pub fn two_level_weight(n: usize, n0: usize, x: f64) -> f64 {
    let (n0, n1) = (n0 as f64, (n - n0) as f64);
    n0 * n1 / (n0 + n1 * (-x).exp())
}

/// Forward plus Boltzmann-weighted backward kernel, `K(x) + e^{-x} K(-x)`.
fn pair_kernel(bath: &BathModel, x: f64) -> f64 {
    bath.rate_fi_kernel(x) + (-x).exp() * bath.rate_fi_kernel(-x)
}

/// Empirical pair term `x² rate(x) / 2`: `x² / (2 (e^x + 1))` fermionic,
/// `x^{2+s} / (2 (e^x - 1))` bosonic.
fn empirical_pair(bath: &BathModel, x: f64) -> f64 {
    0.5 * x * x * bath.rate(x)
}

/// Closed-form FI rate of the two-level ansatz.
pub fn fi_rate_two_level(a: &TwoLevelAnsatz, bath: &BathModel) -> FiRate {
    FiRate(two_level_weight(a.n, a.n0, a.x) * pair_kernel(bath, a.x))
}

/// Closed-form empirical FI rate of the two-level ansatz.
pub fn empirical_fi_two_level(a: &TwoLevelAnsatz, bath: &BathModel) -> FiRate {
    FiRate(two_level_weight(a.n, a.n0, a.x) * empirical_pair(bath, a.x))
}

/// Degeneracy fraction `C = N0/N` that is optimal at gap `x` for large `N`.
///
/// Monitored and empirical: `1 / (1 + e^{x/2})`. Equilibrium: `1 / (1 + e^x)`.
pub fn optimal_degeneracy_fraction(x: f64, variant: Variant) -> f64 {
    match variant {
        Variant::Monitored | Variant::Empirical => crate::bath::fermi(0.5 * x),
        Variant::Equilibrium => crate::bath::fermi(x),
    }
}

fn asymptotic_weight(x: f64, c: f64) -> f64 {
    c * (1.0 - c) / (c + (1.0 - c) * (-x).exp())
}

/// Large-`N` coefficient per level at gap `x` with the optimal fraction:
/// `f(x)` for the fermionic bath and `b(x)` for the bosonic one.
pub fn fi_rate_asymptotic(x: f64, bath: &BathModel) -> f64 {
    let c = optimal_degeneracy_fraction(x, Variant::Monitored);
    asymptotic_weight(x, c) * pair_kernel(bath, x)
}

/// Empirical counterpart of [`fi_rate_asymptotic`] (`f'(x)`, `b'(x)`).
pub fn empirical_fi_asymptotic(x: f64, bath: &BathModel) -> f64 {
    let c = optimal_degeneracy_fraction(x, Variant::Empirical);
    asymptotic_weight(x, c) * empirical_pair(bath, x)
}

/// Coefficient per level for the requested variant. The equilibrium variant
/// returns `x²/4`, its value along `C = 1/(1 + e^x)`.
pub fn asymptotic_coefficient(x: f64, bath: &BathModel, variant: Variant) -> f64 {
    match variant {
        Variant::Monitored => fi_rate_asymptotic(x, bath),
        Variant::Empirical => empirical_fi_asymptotic(x, bath),
        Variant::Equilibrium => 0.25 * x * x,
    }
}

/// Measure-and-reset ceiling: the best single-jump kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResetBound {
    pub x_reset: f64,
    /// `max_x K(x)`, the bound per level.
    pub coefficient: f64,
    /// `(N - 1) · coefficient`.
    pub bound: f64,
}

pub fn reset_bound(n: usize, bath: &BathModel) -> Result<ResetBound> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("reset bound needs N >= 2, got {n}")));
    }
    let best = maximize_1d(|x| bath.rate_fi_kernel(x), GAP_SEARCH_MIN, GAP_SEARCH_MAX, 1e-9)?;
    Ok(ResetBound {
        x_reset: best.x,
        coefficient: best.value,
        bound: (n - 1) as f64 * best.value,
    })
}

/// Empirical FI rate from the general matrix expression
/// `K̃ = -½ (∂p)ᵀ P⁻¹ W (∂p)`.
///
/// `W` is the generator acting on column vectors (the transpose of the
/// row-convention `Γ`), `P = diag(p^eq)`, and `∂p_i = p_i (⟨x⟩ - x_i)` is the
/// derivative of the Gibbs vector along the temperature direction in
/// dimensionless units.
pub fn empirical_fi_rate(spec: &EnergySpectrum, bath: &BathModel) -> Result<FiRate> {
    let p = equilibrium_distribution(spec);
    let p = p.entries();
    if let Some(index) = p.iter().position(|&v| v == 0.0) {
        return Err(Error::SingularPopulation { index });
    }
    let x = spec.levels();
    let mean = neumaier_sum(p.iter().zip(x).map(|(pi, xi)| pi * xi));
    let dp: Vec<f64> = p.iter().zip(x).map(|(pi, xi)| pi * (mean - xi)).collect();

    let gamma = generator(spec, bath);
    let n = spec.len();
    // (Γᵀ dp)_i = Σ_j Γ_ji dp_j
    let mut w_dp = vec![0.0; n];
    for (j, dpj) in dp.iter().enumerate() {
        for (wi, g) in w_dp.iter_mut().zip(gamma.row(j)) {
            *wi += g * dpj;
        }
    }
    let quad = neumaier_sum((0..n).map(|i| dp[i] / p[i] * w_dp[i]));
    Ok(FiRate(-0.5 * quad))
}

/// Equilibrium FI of a single energy measurement, `Var_p(x)`.
pub fn equilibrium_fi(spec: &EnergySpectrum) -> f64 {
    let p = equilibrium_distribution(spec);
    let x = spec.levels();
    let mean = neumaier_sum(p.entries().iter().zip(x).map(|(pi, xi)| pi * xi));
    neumaier_sum(p.entries().iter().zip(x).map(|(pi, xi)| pi * (xi - mean) * (xi - mean)))
}

/// `N0 (N - N0) x² e^{-x} / (N0 + (N - N0) e^{-x})²`.
pub fn equilibrium_fi_two_level(n: usize, n0: usize, x: f64) -> f64 {
    let (n0, n1) = (n0 as f64, (n - n0) as f64);
    let e = (-x).exp();
    let d = n0 + n1 * e;
    n0 * n1 * x * x * e / (d * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumOptimum {
    pub n0: usize,
    pub x: f64,
    pub fi: f64,
}

impl EquilibriumOptimum {
    /// The optimum has a single ground level and an `(N-1)`-fold excited level.
    pub fn excited_maximally_degenerate(&self) -> bool {
        self.n0 == 1
    }
}

/// Best equilibrium two-level probe: exhaustive over `N0`, 1-D search over `x`.
pub fn equilibrium_optimum(n: usize) -> Result<EquilibriumOptimum> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "equilibrium optimum needs N >= 3, got {n}"
        )));
    }
    let mut best: Option<EquilibriumOptimum> = None;
    for n0 in 1..n {
        let m = maximize_1d(|x| equilibrium_fi_two_level(n, n0, x), GAP_SEARCH_MIN, 60.0, 1e-9)?;
        if best.is_none_or(|b| m.value > b.fi) {
            best = Some(EquilibriumOptimum {
                n0,
                x: m.x,
                fi: m.value,
            });
        }
    }
    Ok(best.expect("at least one candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{bose, fermi, S_ONE_PLUS};

    fn fermionic() -> BathModel {
        BathModel::fermionic(1.0).unwrap()
    }

    fn bosonic(s: f64) -> BathModel {
        BathModel::bosonic(1.0, s).unwrap()
    }

    // plain double loop over levels, no grouping
    fn naive_fi(levels: &[f64], bath: &BathModel) -> f64 {
        let z: f64 = levels.iter().map(|x| (-x).exp()).sum();
        let mut total = 0.0;
        for (i, xi) in levels.iter().enumerate() {
            for (j, xj) in levels.iter().enumerate() {
                if i != j {
                    total += (-xi).exp() / z * bath.rate_fi_kernel(xj - xi);
                }
            }
        }
        total
    }

    // bisection on a sign change of g over [lo, hi]
    fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        assert!(g(lo) * g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(lo) * g(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn exact_matches_naive_double_sum() {
        let levels = [0.0, 0.3, 0.3, 1.9, 2.5, 2.5, 2.5, 4.0];
        let spec = EnergySpectrum::new(levels.to_vec()).unwrap();
        for bath in [fermionic(), bosonic(1.5), bosonic(3.0)] {
            let a = fi_rate_exact(&spec, &bath).value();
            let b = naive_fi(&levels, &bath);
            assert!((a / b - 1.0).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn exact_equals_two_level_at_n2() {
        let a = TwoLevelAnsatz::new(2, 1, 2.9682).unwrap();
        let exact = fi_rate_exact(&a.to_spectrum(), &fermionic()).value();
        let closed = fi_rate_two_level(&a, &fermionic()).value();
        assert!((exact / closed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fully_degenerate_spectrum_has_zero_fi() {
        let spec = EnergySpectrum::new(vec![1.3; 6]).unwrap();
        assert_eq!(fi_rate_exact(&spec, &fermionic()).value(), 0.0);
        assert_eq!(fi_rate_exact(&spec, &bosonic(2.0)).value(), 0.0);
    }

    #[test]
    fn grouping_handles_huge_two_level_spectra() {
        let a = TwoLevelAnsatz::new(1 << 20, 193_000, 2.9682).unwrap();
        let exact = fi_rate_exact(&a.to_spectrum(), &fermionic()).value();
        let closed = fi_rate_two_level(&a, &fermionic()).value();
        assert!((exact / closed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_level_reference_values() {
        let n = 1024;
        let a = TwoLevelAnsatz::new(n, (0.1848 * n as f64) as usize, 2.9682).unwrap();
        let f = fi_rate_two_level(&a, &fermionic()).value();
        assert!((f / (0.2596 * n as f64) - 1.0).abs() < 0.01, "{f}");

        let a = TwoLevelAnsatz::new(n, (0.1058 * n as f64) as usize, 4.2681).unwrap();
        let f = fi_rate_two_level(&a, &bosonic(2.0)).value();
        assert!((f / (3.8782 * n as f64) - 1.0).abs() < 0.01, "{f}");
    }

    #[test]
    fn degeneracy_fraction_examples() {
        assert!((optimal_degeneracy_fraction(2.9682, Variant::Monitored) - 0.1848).abs() < 1e-4);
        assert!((optimal_degeneracy_fraction(1e-12, Variant::Monitored) - 0.5).abs() < 1e-12);
        assert!((optimal_degeneracy_fraction(2.7233, Variant::Empirical) - 0.2040).abs() < 1e-4);
        assert!((optimal_degeneracy_fraction(3f64.ln(), Variant::Equilibrium) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_coefficient_examples() {
        assert!((fi_rate_asymptotic(2.9682, &fermionic()) - 0.2596).abs() < 1e-3);
        assert!((fi_rate_asymptotic(5.2706, &bosonic(3.0)) - 18.4880).abs() < 1e-2);
        assert!((fi_rate_asymptotic(3.7195, &bosonic(1.5)) - 1.9403).abs() < 1e-3);
    }

    #[test]
    fn asymptotic_form_is_the_large_n_limit_of_the_closed_form() {
        let x = 2.9682;
        let n = 1 << 22;
        let n0 = (optimal_degeneracy_fraction(x, Variant::Monitored) * n as f64).round() as usize;
        let a = TwoLevelAnsatz::new(n, n0, x).unwrap();
        let per_level = fi_rate_two_level(&a, &fermionic()).value() / n as f64;
        assert!((per_level / fi_rate_asymptotic(x, &fermionic()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reset_bound_matches_stationarity_roots() {
        // d/dx log K = 0: fermionic 2/x + 2 - 3(1 - n_F) = 0, bosonic (2+s)/x - 1 - 3 n_B = 0
        let root = bisect(|x| 2.0 / x + 2.0 - 3.0 * fermi(-x), 0.5, 10.0);
        let r = reset_bound(10, &fermionic()).unwrap();
        assert!((r.x_reset - root).abs() < 1e-6, "{} vs {root}", r.x_reset);
        assert!((r.coefficient - fermionic().rate_fi_kernel(root)).abs() < 1e-12);
        assert!((r.bound - 9.0 * r.coefficient).abs() < 1e-12);
        // frozen from the same oracle
        assert!((root - 2.553_133).abs() < 1e-5);
        assert!((r.coefficient - 0.405_206).abs() < 1e-5);

        for (s, frozen_x, frozen_k) in [
            (S_ONE_PLUS, 2.149_357, 1.678_698),
            (1.5, 3.042_731, 2.714_350),
            (2.0, 3.723_582, 4.995_279),
            (3.0, 4.888_709, 21.512_007),
        ] {
            let root = bisect(|x| (2.0 + s) / x - 1.0 - 3.0 * bose(x), 0.5, 15.0);
            let r = reset_bound(4, &bosonic(s)).unwrap();
            assert!((r.x_reset - root).abs() < 1e-6);
            assert!((root - frozen_x).abs() < 1e-5, "s={s}: {root}");
            assert!((r.coefficient - frozen_k).abs() < 1e-5, "s={s}: {}", r.coefficient);
        }
        assert!(reset_bound(1, &fermionic()).is_err());
    }

    #[test]
    fn empirical_matrix_formula_matches_closed_form() {
        for bath in [fermionic(), bosonic(S_ONE_PLUS), bosonic(2.0), bosonic(3.0)] {
            for (n, n0, x) in [(2, 1, 0.7), (7, 2, 2.3), (16, 3, 2.7233), (33, 20, 5.1)] {
                let a = TwoLevelAnsatz::new(n, n0, x).unwrap();
                let matrix = empirical_fi_rate(&a.to_spectrum(), &bath).unwrap().value();
                let closed = empirical_fi_two_level(&a, &bath).value();
                assert!(
                    (matrix / closed - 1.0).abs() < 1e-10,
                    "{bath:?} {a:?}: {matrix} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn empirical_matrix_formula_matches_pairwise_form() {
        // with detailed balance the quadratic form collapses to ¼ Σ p_i Γ_ij (x_j - x_i)²
        let levels = vec![0.0, 0.4, 1.1, 2.0, 2.2, 3.7];
        let spec = EnergySpectrum::new(levels.clone()).unwrap();
        let bath = fermionic();
        let p = equilibrium_distribution(&spec);
        let mut pairwise = 0.0;
        for i in 0..levels.len() {
            for j in 0..levels.len() {
                if i != j {
                    let d = levels[j] - levels[i];
                    pairwise += 0.25 * p[i] * bath.rate(d) * d * d;
                }
            }
        }
        let matrix = empirical_fi_rate(&spec, &bath).unwrap().value();
        assert!((matrix / pairwise - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_reference_values() {
        let n = 1024;
        let a = TwoLevelAnsatz::new(n, (0.2040 * n as f64) as usize, 2.7233).unwrap();
        let k = empirical_fi_rate(&a.to_spectrum(), &fermionic()).unwrap().value();
        assert!((k / (0.1448 * n as f64) - 1.0).abs() < 0.01);
        assert!((empirical_fi_asymptotic(4.3850, &bosonic(2.0)) - 1.8879).abs() < 1e-3);
    }

    #[test]
    fn empirical_reports_underflowing_populations() {
        let spec = EnergySpectrum::new(vec![0.0, 800.0]).unwrap();
        assert!(matches!(
            empirical_fi_rate(&spec, &fermionic()),
            Err(Error::SingularPopulation { index: 1 })
        ));
    }

    #[test]
    fn equilibrium_examples() {
        for n in [4usize, 16, 1024] {
            let x = ((n - 1) as f64).ln();
            assert!((equilibrium_fi_two_level(n, 1, x) - x * x / 4.0).abs() < 1e-12);
        }
        let v = equilibrium_fi_two_level(1024, 1, 1023f64.ln());
        assert!((v - 12.008).abs() < 1e-3);
        assert!(equilibrium_fi_two_level(8, 3, 1e-9) < 1e-15);
        let a = TwoLevelAnsatz::new(9, 4, 1.3).unwrap();
        assert!((equilibrium_fi(&a.to_spectrum()) - equilibrium_fi_two_level(9, 4, 1.3)).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_optimum_matches_grid() {
        for n in [16usize, 64] {
            let opt = equilibrium_optimum(n).unwrap();
            let mut best = (0, 0.0, 0.0);
            for n0 in 1..n {
                for i in 1..=20_000 {
                    let x = i as f64 * 1e-3;
                    let v = equilibrium_fi_two_level(n, n0, x);
                    if v > best.2 {
                        best = (n0, x, v);
                    }
                }
            }
            assert_eq!(opt.n0, best.0);
            assert!(opt.excited_maximally_degenerate());
            assert!((opt.x - best.1).abs() < 2e-3);
            assert!(opt.fi >= best.2 && opt.fi - best.2 < 1e-6);
        }
        // frozen from the grid oracle
        let opt = equilibrium_optimum(256).unwrap();
        assert_eq!(opt.n0, 1);
        assert!((opt.x - 6.209_24).abs() < 1e-3);
        assert!((opt.fi - 8.638_67).abs() < 1e-4);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let levels = vec![0.0, 0.2, 0.25, 2.1, 2.9, 3.3, 4.0];
        for bath in [fermionic(), bosonic(2.5)] {
            let (f, g) = fi_rate_with_gradient(&levels, &bath);
            let spec = EnergySpectrum::preserving_order(levels.clone()).unwrap();
            assert!((f - fi_rate_exact(&spec, &bath).value()).abs() < 1e-12);
            for m in 0..levels.len() {
                let h = 1e-6;
                let mut up = levels.clone();
                up[m] += h;
                let mut dn = levels.clone();
                dn[m] -= h;
                let fd = (fi_rate_with_gradient(&up, &bath).0 - fi_rate_with_gradient(&dn, &bath).0) / (2.0 * h);
                assert!((g[m] - fd).abs() < 1e-6, "{bath:?} m={m}: {} vs {fd}", g[m]);
            }
            // shift invariance: gradient sums to zero
            assert!(g.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_never_beats_reset() {
        for bath in [
            fermionic(),
            bosonic(S_ONE_PLUS),
            bosonic(1.5),
            bosonic(2.0),
            bosonic(3.0),
        ] {
            let reset = reset_bound(2, &bath).unwrap().coefficient;
            for i in 1..=500 {
                let x = i as f64 * 0.04;
                assert!(fi_rate_asymptotic(x, &bath) <= reset);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn ansatz() -> impl Strategy<Value = TwoLevelAnsatz> {
            (2usize..300)
                .prop_flat_map(|n| (Just(n), 1..n, 0.05f64..15.0))
                .prop_map(|(n, n0, x)| TwoLevelAnsatz::new(n, n0, x).unwrap())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(50))]

            #[test]
            fn exact_equals_closed_form(a in ansatz(), s in 1.01f64..4.0) {
                for bath in [fermionic(), bosonic(s)] {
                    let exact = fi_rate_exact(&a.to_spectrum(), &bath).value();
                    let closed = fi_rate_two_level(&a, &bath).value();
                    prop_assert!((exact / closed - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn empirical_never_exceeds_monitored(a in ansatz(), s in 1.01f64..4.0) {
                for bath in [fermionic(), bosonic(s)] {
                    let k = empirical_fi_rate(&a.to_spectrum(), &bath).unwrap().value();
                    let f = fi_rate_exact(&a.to_spectrum(), &bath).value();
                    prop_assert!(k <= f * (1.0 + 1e-12));
                }
            }

            #[test]
            fn exact_is_shift_and_permutation_invariant(
                levels in prop::collection::vec(-5.0f64..8.0, 2..16),
                c in -50.0f64..50.0,
                rot in 0usize..16,
            ) {
                let base = EnergySpectrum::preserving_order(levels.clone()).unwrap();
                let mut rotated = levels.clone();
                rotated.rotate_left(rot % levels.len());
                let rotated = EnergySpectrum::preserving_order(rotated).unwrap();
                for bath in [fermionic(), bosonic(2.0)] {
                    let f = fi_rate_exact(&base, &bath).value();
                    prop_assert!(f >= 0.0);
                    let g = fi_rate_exact(&base.shifted(c), &bath).value();
                    let h = fi_rate_exact(&rotated, &bath).value();
                    prop_assert!((f - g).abs() <= 1e-12 * f.max(1.0));
                    prop_assert!((f - h).abs() <= 1e-12 * f.max(1.0));
                }
            }
        }
    }
}
