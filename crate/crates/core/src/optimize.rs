//! Maximization of FI rates over probe energy structures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bath::BathModel;
use crate::error::{Error, Result};
use crate::fisher::{
    asymptotic_coefficient, empirical_fi_two_level, fi_rate_exact, fi_rate_two_level, fi_rate_with_gradient,
    optimal_degeneracy_fraction, Variant, GAP_SEARCH_MAX,
};
use crate::spectrum::{EnergySpectrum, TwoLevelAnsatz};

const GRID_POINTS: usize = 64;
const BRENT_MAX_ITER: usize = 200;
const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Outcome of a bracketed 1-D maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    /// The final bracket shrank below `tol` away from the search bounds.
    pub converged: bool,
    /// The best point sits on `lo` or `hi`; the objective still increases
    /// towards that end.
    pub at_boundary: bool,
}

/// Maximizes `f` on `[lo, hi]`.
///
/// A uniform scan picks the best of 64 grid cells; Brent's method
/// (golden-section steps with parabolic acceleration) then shrinks the
/// bracket around it until it is narrower than `tol`. For unimodal
/// objectives the reported `x` is within `tol` of the true maximizer.
pub fn maximize_1d<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Maximum>
where
    F: Fn(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("bad search interval [{lo}, {hi}]")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {tol}")));
    }
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..GRID_POINTS)
        .map(|i| {
            let x = if i + 1 == GRID_POINTS { hi } else { lo + i as f64 * step };
            (x, f(x))
        })
        .collect();
    let (best_i, &(_, best_v)) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .expect("non-empty grid");
    let worst_v = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    if !best_v.is_finite() || best_v - worst_v <= 4.0 * f64::EPSILON * (1.0 + best_v.abs()) {
        return Err(Error::NoBracket { lo, hi });
    }

    let a = grid[best_i.saturating_sub(1)].0;
    let b = grid[(best_i + 1).min(GRID_POINTS - 1)].0;
    let (x, value, evals, converged) = brent_max(&f, a, b, grid[best_i].0, best_v, tol);
    let at_boundary = (x - lo).abs() <= tol || (hi - x).abs() <= tol;
    Ok(Maximum {
        x,
        value,
        evaluations: GRID_POINTS + evals,
        converged: converged && !at_boundary,
        at_boundary,
    })
}

// Brent's minimizer applied to -f on [a, b], started at x with f(x) = fx.
fn brent_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, x0: f64, fx0: f64, tol: f64) -> (f64, f64, usize, bool) {
    let g = |x: f64| -f(x);
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (-fx0, -fx0, -fx0);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evals = 0;
    for _ in 0..BRENT_MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = 0.25 * tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return (x, -fx, evals, true);
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx, evals, false)
}

/// Optimal structure found by one of the searches below.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub bath: BathModel,
    pub variant: Variant,
    /// Number of levels, absent for the large-`N` coefficient search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub x_star: f64,
    pub n0_star: Option<usize>,
    pub c_star: Option<f64>,
    /// Optimal FI rate (the per-level coefficient for the asymptotic search).
    pub fi_rate: f64,
    pub coefficient_per_level: f64,
    /// Optimized levels (global search only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

impl OptimizationResult {
    /// The optimal two-level ansatz, when the result has one.
    pub fn ansatz(&self) -> Option<TwoLevelAnsatz> {
        match (self.n, self.n0_star) {
            (Some(n), Some(n0)) if self.levels.is_none() => TwoLevelAnsatz::new(n, n0, self.x_star).ok(),
            _ => None,
        }
    }

    pub fn best_spectrum(&self) -> Option<EnergySpectrum> {
        match &self.levels {
            Some(levels) => EnergySpectrum::new(levels.clone()).ok(),
            None => self.ansatz().map(|a| a.to_spectrum()),
        }
    }
}

/// Large-`N` optimum of the per-level coefficient `f(x)`/`b(x)` (monitored)
/// or `f'(x)`/`b'(x)` (empirical) over `x ∈ (0, 50]`.
pub fn optimize_asymptotic(bath: &BathModel, variant: Variant) -> Result<OptimizationResult> {
    if variant == Variant::Equilibrium {
        return Err(Error::InvalidArgument(
            "the equilibrium coefficient x²/4 is unbounded; use equilibrium_optimum(N)".into(),
        ));
    }
    let m = maximize_1d(|x| asymptotic_coefficient(x, bath, variant), 1e-6, GAP_SEARCH_MAX, 1e-9)?;
    Ok(OptimizationResult {
        bath: *bath,
        variant,
        n: None,
        x_star: m.x,
        n0_star: None,
        c_star: Some(optimal_degeneracy_fraction(m.x, variant)),
        fi_rate: m.value,
        coefficient_per_level: m.value,
        levels: None,
        iterations: m.evaluations,
        restarts_used: 0,
        converged: m.converged,
    })
}

/// Exhaustive `N0` scan up to this many levels; a window is used above.
pub const EXHAUSTIVE_N0_LIMIT: usize = 512;

/// Best two-level ansatz for `N` levels: exact integer scan over `N0` (or a
/// window around `C*·N` for `N > 512`) with a 1-D gap search per candidate.
pub fn optimize_two_level(n: usize, bath: &BathModel) -> Result<OptimizationResult> {
    optimize_two_level_variant(n, bath, Variant::Monitored)
}

/// [`optimize_two_level`] for any information source.
pub fn optimize_two_level_variant(n: usize, bath: &BathModel, variant: Variant) -> Result<OptimizationResult> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need N >= 2, got {n}")));
    }
    let candidates: Vec<usize> = if n <= EXHAUSTIVE_N0_LIMIT {
        (1..n).collect()
    } else {
        let centre = match variant {
            Variant::Equilibrium => 1.0,
            _ => {
                let guess = optimize_asymptotic(bath, variant)?;
                guess.c_star.unwrap_or(0.5) * n as f64
            }
        };
        let half = (n / 64).max(16) as f64;
        let lo = (centre - half).floor().max(1.0) as usize;
        let hi = ((centre + half).ceil() as usize).min(n - 1);
        (lo..=hi).collect()
    };
    let objective = |n0: usize, x: f64| -> f64 {
        // n0 is in range and x > 0 on the search interval
        let a = TwoLevelAnsatz { n, n0, x };
        match variant {
            Variant::Monitored => fi_rate_two_level(&a, bath).value(),
            Variant::Empirical => empirical_fi_two_level(&a, bath).value(),
            Variant::Equilibrium => crate::fisher::equilibrium_fi_two_level(n, n0, x),
        }
    };
    let hi = if variant == Variant::Equilibrium {
        60.0
    } else {
        GAP_SEARCH_MAX
    };
    let mut best: Option<(usize, Maximum)> = None;
    let mut evaluations = 0;
    for n0 in candidates {
        let m = maximize_1d(|x| objective(n0, x), 1e-6, hi, 1e-9)?;
        evaluations += m.evaluations;
        if best.as_ref().is_none_or(|(_, b)| m.value > b.value) {
            best = Some((n0, m));
        }
    }
    let (n0, m) = best.expect("at least one candidate");
    Ok(OptimizationResult {
        bath: *bath,
        variant,
        n: Some(n),
        x_star: m.x,
        n0_star: Some(n0),
        c_star: Some(n0 as f64 / n as f64),
        fi_rate: m.value,
        coefficient_per_level: m.value / n as f64,
        levels: None,
        iterations: evaluations,
        restarts_used: 0,
        converged: m.converged,
    })
}

/// Largest `N` accepted by [`optimize_global`].
pub const GLOBAL_MAX_LEVELS: usize = 256;

/// Default multi-start count: 32 up to 64 levels, 64 above.
pub fn default_restarts(n: usize) -> usize {
    if n <= 64 {
        32
    } else {
        64
    }
}

/// Multi-start search over all `N` levels.
///
/// The lowest level is pinned at 0 and the other `N - 1` move in
/// `[0, 50]`. Restart 0 starts from the best two-level ansatz; the others
/// draw levels uniformly from `[0, 3 x_guess]` with `x_guess` the large-`N`
/// optimal gap. Each restart runs a spectral projected-gradient ascent on the
/// exact FI rate. Restart `r` uses stream `r` of a ChaCha8 generator seeded
/// with `seed`, so the result does not depend on scheduling.
pub fn optimize_global(n: usize, bath: &BathModel, restarts: usize, seed: u64) -> Result<OptimizationResult> {
    if !(2..=GLOBAL_MAX_LEVELS).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "global search supports 2 <= N <= {GLOBAL_MAX_LEVELS}, got {n}"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }
    let two_level = optimize_two_level(n, bath)?;
    let x_guess = optimize_asymptotic(bath, Variant::Monitored)?.x_star;
    let warm = two_level.ansatz().expect("two-level result").to_spectrum();

    let runs: Vec<LocalResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start: Vec<f64> = if r == 0 {
                warm.levels()[1..].to_vec()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                (1..n).map(|_| rng.random_range(0.0..3.0 * x_guess)).collect()
            };
            spg_ascent(bath, start, GAP_SEARCH_MAX)
        })
        .collect();

    let (best_idx, best) = runs
        .iter()
        .enumerate()
        .fold(None::<(usize, &LocalResult)>, |acc, (i, r)| match acc {
            Some((_, b)) if r.value <= b.value => acc,
            _ => Some((i, r)),
        })
        .expect("at least one restart");
    log::debug!(
        "global search: best restart {best_idx} of {restarts}, F = {}",
        best.value
    );

    let mut levels = vec![0.0];
    levels.extend_from_slice(&best.free);
    let spec = EnergySpectrum::new(levels)?;
    let fi = fi_rate_exact(&spec, bath).value();
    let (n0, x) = split_two_clusters(spec.levels());
    Ok(OptimizationResult {
        bath: *bath,
        variant: Variant::Monitored,
        n: Some(n),
        x_star: x,
        n0_star: Some(n0),
        c_star: Some(n0 as f64 / n as f64),
        fi_rate: fi,
        coefficient_per_level: fi / n as f64,
        levels: Some(spec.levels().to_vec()),
        iterations: runs.iter().map(|r| r.iterations).sum(),
        restarts_used: restarts,
        converged: best.converged,
    })
}

/// Splits sorted levels at their widest consecutive gap; returns the size of
/// the lower group and the distance between the group means.
pub fn split_two_clusters(sorted: &[f64]) -> (usize, f64) {
    let cut = sorted
        .windows(2)
        .enumerate()
        .max_by(|a, b| (a.1[1] - a.1[0]).total_cmp(&(b.1[1] - b.1[0])))
        .map(|(i, _)| i + 1)
        .unwrap_or(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (cut, mean(&sorted[cut..]) - mean(&sorted[..cut]))
}

struct LocalResult {
    free: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

const SPG_MAX_ITER: usize = 4000;
const SPG_MEMORY: usize = 10;
const SPG_PG_TOL: f64 = 1e-9;

// Spectral projected gradient (nonmonotone line search) maximizing the FI
// rate of [0, free...] over the box [0, hi]^(N-1).
fn spg_ascent(bath: &BathModel, start: Vec<f64>, hi: f64) -> LocalResult {
    let project = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = x.clamp(0.0, hi));
    // objective to minimize: -F, gradient of the free coordinates only
    let eval = |free: &[f64]| -> (f64, Vec<f64>) {
        let mut levels = Vec::with_capacity(free.len() + 1);
        levels.push(0.0);
        levels.extend_from_slice(free);
        let (f, g) = fi_rate_with_gradient(&levels, bath);
        (-f, g[1..].iter().map(|v| -v).collect())
    };
    let pg_norm = |x: &[f64], g: &[f64]| -> f64 {
        x.iter()
            .zip(g)
            .map(|(xi, gi)| ((xi - gi).clamp(0.0, hi) - xi).abs())
            .fold(0.0, f64::max)
    };

    let mut x = start;
    project(&mut x);
    let (mut f, mut g) = eval(&x);
    let mut best = (x.clone(), f);
    let mut history = vec![f];
    let mut alpha = 1.0 / pg_norm(&x, &g).max(1e-12);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < SPG_MAX_ITER {
        if pg_norm(&x, &g) < SPG_PG_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - alpha * gi).collect();
        project(&mut d);
        d.iter_mut().zip(&x).for_each(|(di, xi)| *di -= xi);
        let slope: f64 = d.iter().zip(&g).map(|(di, gi)| di * gi).sum();
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut lambda = 1.0;
        let (x_new, f_new, g_new) = loop {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + lambda * di).collect();
            let (ft, gt) = eval(&trial);
            if ft <= f_ref + 1e-4 * lambda * slope || lambda < 1e-12 {
                break (trial, ft, gt);
            }
            lambda *= 0.5;
        };
        if lambda < 1e-12 && f_new > f {
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1e10 };

        x = x_new;
        f = f_new;
        g = g_new;
        if f < best.1 {
            best = (x.clone(), f);
        }
        history.push(f);
        if history.len() > SPG_MEMORY {
            history.remove(0);
        }
        if ss.sqrt() < 1e-14 {
            converged = pg_norm(&x, &g) < 1e-6;
            break;
        }
    }
    LocalResult {
        free: best.0,
        value: -best.1,
        iterations,
        converged,
    }
}
