//! Bath models and the rate matrix they induce on a probe spectrum.
//!
//! Rates are written in dimensionless form: a jump `i -> j` with gap
//! `x = x_j - x_i` happens at rate `scale(T) * rate(x)`, where `scale` is the
//! coupling `γ` for the fermionic wide-band bath and `γ T^s` for the bosonic
//! bath with spectral density `κ(ω) = γ ω^s`.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::EnergySpectrum;

/// Ohmicity used for the `s -> 1+` limit.
pub const S_ONE_PLUS: f64 = 1.0 + 1e-4;

/// Fermi occupation `1 / (1 + e^x)`.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Bose occupation `1 / (e^x - 1)` for `x > 0`.
pub fn bose(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bath", rename_all = "lowercase")]
pub enum BathModel {
    /// Wide-band fermionic reservoir, `Γ_ij = γ n_F(ω_ji)`.
    Fermionic { gamma: f64 },
    /// Super-Ohmic bosonic reservoir, `Γ_ij = γ |ω_ji|^s |n_B(ω_ji)|`.
    #[serde(rename = "bosonic")]
    BosonicOhmic {
        gamma: f64,
        #[serde(deserialize_with = "ohmicity")]
        s: f64,
    },
}

fn ohmicity<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(de)? {
        Raw::Num(s) => Ok(s),
        Raw::Text(t) => parse_ohmicity(&t).map_err(serde::de::Error::custom),
    }
}

/// Parses an ohmicity, accepting `1+` for the right limit at one.
pub fn parse_ohmicity(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    if t == "1+" || t == "1⁺" {
        return Ok(S_ONE_PLUS);
    }
    t.parse::<f64>()
        .map_err(|e| format!("cannot parse ohmicity {t:?}: {e}"))
}

impl BathModel {
    pub fn fermionic(gamma: f64) -> Result<Self> {
        let b = BathModel::Fermionic { gamma };
        b.validate()?;
        Ok(b)
    }

    pub fn bosonic(gamma: f64, s: f64) -> Result<Self> {
        let b = BathModel::BosonicOhmic { gamma, s };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let gamma = self.gamma();
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidBath(format!("gamma must be > 0, got {gamma}")));
        }
        if let BathModel::BosonicOhmic { s, .. } = *self {
            if !(s.is_finite() && s > 1.0) {
                return Err(Error::InvalidBath(format!("ohmicity must satisfy s > 1, got {s}")));
            }
        }
        Ok(())
    }

    /// Reads and validates a bath config file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let bath: BathModel = serde_json::from_str(&text)?;
        bath.validate()?;
        Ok(bath)
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            BathModel::Fermionic { gamma } | BathModel::BosonicOhmic { gamma, .. } => gamma,
        }
    }

    /// Ohmicity, `None` for the fermionic bath.
    pub fn ohmicity(&self) -> Option<f64> {
        match *self {
            BathModel::Fermionic { .. } => None,
            BathModel::BosonicOhmic { s, .. } => Some(s),
        }
    }

    pub fn is_fermionic(&self) -> bool {
        matches!(self, BathModel::Fermionic { .. })
    }

    pub fn label(&self) -> String {
        match *self {
            BathModel::Fermionic { .. } => "fermionic".to_string(),
            BathModel::BosonicOhmic { s, .. } if s == S_ONE_PLUS => "bosonic(s=1+)".to_string(),
            BathModel::BosonicOhmic { s, .. } => format!("bosonic(s={s})"),
        }
    }

    /// Rate unit at temperature `t`: `γ` (fermionic) or `γ T^s` (bosonic).
    pub fn rate_scale(&self, temperature: f64) -> f64 {
        match *self {
            BathModel::Fermionic { gamma } => gamma,
            BathModel::BosonicOhmic { gamma, s } => gamma * temperature.powf(s),
        }
    }

    /// Converts a dimensionless FI rate into `F(T) / (γ τ)`: `β²` for the
    /// fermionic bath, `T^{s-2}` for the bosonic one.
    pub fn fi_prefactor(&self, temperature: f64) -> f64 {
        match *self {
            BathModel::Fermionic { .. } => temperature.powi(-2),
            BathModel::BosonicOhmic { s, .. } => temperature.powf(s - 2.0),
        }
    }

    /// Dimensionless rate `Γ_ij / scale` for a jump with gap `x = x_j - x_i`.
    ///
    /// Fermionic: `1 / (1 + e^x)`, so `1/2` at zero gap. Bosonic:
    /// `|x|^s / |e^x - 1|`, defined as its `s > 1` limit `0` at zero gap.
    pub fn rate(&self, x: f64) -> f64 {
        match *self {
            BathModel::Fermionic { .. } => fermi(x),
            BathModel::BosonicOhmic { s, .. } => {
                if x == 0.0 {
                    return 0.0;
                }
                let a = x.abs();
                let m = bose(a);
                if x > 0.0 {
                    a.powf(s) * m
                } else {
                    a.powf(s) * (1.0 + m)
                }
            }
        }
    }

    /// Per-pair summand of the dimensionless FI rate at gap `x`:
    /// `x² e^{2x} / (1 + e^x)³` (fermionic) or `|x|^{2+s} e^{2x} / |e^x - 1|³`
    /// (bosonic). Vanishes at zero gap for both baths.
    pub fn rate_fi_kernel(&self, x: f64) -> f64 {
        self.kernel_with_slope(x).0
    }

    /// Kernel value and its derivative with respect to the gap.
    pub fn kernel_with_slope(&self, x: f64) -> (f64, f64) {
        if x == 0.0 {
            return (0.0, 0.0);
        }
        match *self {
            BathModel::Fermionic { .. } => {
                // K = x² n (1-n)², with 1-n evaluated as n_F(-x)
                let n = fermi(x);
                let g = n * fermi(-x).powi(2);
                let k = x * x * g;
                let dk = x * g * (2.0 - x * (1.0 - 3.0 * n));
                (k, dk)
            }
            BathModel::BosonicOhmic { s, .. } => {
                let a = x.abs();
                let m = bose(a);
                let up = a.powf(2.0 + s) * m * (1.0 + m) * (1.0 + m);
                let up_slope = up * ((2.0 + s) / a - 1.0 - 3.0 * m);
                if x > 0.0 {
                    (up, up_slope)
                } else {
                    // K(-a) = e^{-a} K(a)
                    let w = m / (1.0 + m);
                    (w * up, w * (up - up_slope))
                }
            }
        }
    }
}

/// Row-major `N × N` rate matrix with `Γ_ii = -Σ_{j≠i} Γ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    n: usize,
    data: Vec<f64>,
    degenerate_pairs: usize,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Total rate of leaving state `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.get(i, i)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Ordered pairs of exactly degenerate levels that received a zero
    /// bosonic rate.
    pub fn degenerate_pairs(&self) -> usize {
        self.degenerate_pairs
    }

    /// `p Γ` for a row vector `p`.
    pub fn left_apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, pi) in p.iter().enumerate() {
            for (o, g) in out.iter_mut().zip(self.row(i)) {
                *o += pi * g;
            }
        }
        out
    }

    /// `Γ v` for a column vector `v`.
    pub fn right_apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(g, x)| g * x).sum())
            .collect()
    }
}

/// Rate matrix in dimensionless units (`T = 1`, rates in units of `γ`).
pub fn generator(spec: &EnergySpectrum, bath: &BathModel) -> GeneratorMatrix {
    generator_at(spec, bath, 1.0)
}

/// Physical rate matrix at temperature `t`, reading the spectrum levels as
/// energies.
pub fn generator_at(spec: &EnergySpectrum, bath: &BathModel, temperature: f64) -> GeneratorMatrix {
    let levels = spec.levels();
    let n = levels.len();
    let scale = bath.rate_scale(temperature);
    let mut data = vec![0.0; n * n];
    let mut degenerate_pairs = 0;
    for i in 0..n {
        let mut exit = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let gap = (levels[j] - levels[i]) / temperature;
            if gap == 0.0 && !bath.is_fermionic() {
                degenerate_pairs += 1;
            }
            let r = scale * bath.rate(gap);
            data[i * n + j] = r;
            exit += r;
        }
        data[i * n + i] = -exit;
    }
    if degenerate_pairs > 0 {
        log::warn!("bosonic bath on a spectrum with {degenerate_pairs} degenerate level pairs: those jumps get rate 0");
    }
    GeneratorMatrix {
        n,
        data,
        degenerate_pairs,
    }
}
