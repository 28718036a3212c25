//! Probe energy structures and their Gibbs populations.
//!
//! Energies are dimensionless, `x_i = ε_i / T` with `k_B = 1`. When a
//! spectrum is handed to the trajectory simulator together with a physical
//! temperature, its entries are read as energies `ε_i` instead, and the
//! simulator divides by `T` itself.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Converts a physical energy at temperature `t` into a dimensionless energy.
pub fn to_dimensionless(energy: f64, temperature: f64) -> f64 {
    energy / temperature
}

/// Inverse of [`to_dimensionless`].
pub fn to_energy(x: f64, temperature: f64) -> f64 {
    x * temperature
}

/// Ordered list of level energies of an `N`-level probe (`N >= 2`).
///
/// The canonical form stores levels sorted ascending. Use
/// [`EnergySpectrum::preserving_order`] when state labels must match the
/// caller's indexing (e.g. for trajectories read back from disk).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    levels: Vec<f64>,
    original_index: Vec<usize>,
}

impl EnergySpectrum {
    /// Builds the canonical (sorted) spectrum.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        validate_levels(&levels)?;
        let mut order: Vec<usize> = (0..levels.len()).collect();
        order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
        let sorted = order.iter().map(|&i| levels[i]).collect();
        Ok(Self {
            levels: sorted,
            original_index: order,
        })
    }

    /// Keeps the levels in the order given.
    pub fn preserving_order(levels: Vec<f64>) -> Result<Self> {
        validate_levels(&levels)?;
        let original_index = (0..levels.len()).collect();
        Ok(Self { levels, original_index })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Position in the constructor input of each stored level.
    pub fn original_index(&self) -> &[usize] {
        &self.original_index
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.levels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.levels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same spectrum with every level shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            levels: self.levels.iter().map(|x| x + c).collect(),
            original_index: self.original_index.clone(),
        }
    }

    /// Same spectrum with every level multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            levels: self.levels.iter().map(|x| x * c).collect(),
            original_index: self.original_index.clone(),
        }
    }

    /// Distinct energies (ascending) with their multiplicities. Only exact
    /// equality counts as degenerate.
    pub fn grouped(&self) -> Vec<(f64, usize)> {
        let mut sorted = self.levels.clone();
        sorted.sort_by(f64::total_cmp);
        let mut groups: Vec<(f64, usize)> = Vec::new();
        for x in sorted {
            match groups.last_mut() {
                Some((e, m)) if *e == x => *m += 1,
                _ => groups.push((x, 1)),
            }
        }
        groups
    }

    /// Hex SHA-256 of the little-endian level bytes, used to tag output files.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for x in &self.levels {
            hasher.update(x.to_le_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::InvalidSpectrum(format!(
            "need at least 2 levels, got {}",
            levels.len()
        )));
    }
    if let Some(i) = levels.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidSpectrum(format!(
            "level {i} is not finite ({})",
            levels[i]
        )));
    }
    Ok(())
}

/// Effective two-level structure: `n0` degenerate ground levels at 0 and
/// `n - n0` degenerate excited levels at the gap `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelAnsatz {
    pub n: usize,
    pub n0: usize,
    pub x: f64,
}

impl TwoLevelAnsatz {
    pub fn new(n: usize, n0: usize, x: f64) -> Result<Self> {
        if n < 2 || n0 == 0 || n0 >= n {
            return Err(Error::InvalidDegeneracy { n: n.max(1), n0 });
        }
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::InvalidGap(x));
        }
        Ok(Self { n, n0, x })
    }

    /// Number of excited levels.
    pub fn n1(&self) -> usize {
        self.n - self.n0
    }

    /// Ground-state degeneracy fraction `N0 / N`.
    pub fn fraction(&self) -> f64 {
        self.n0 as f64 / self.n as f64
    }

    pub fn with_gap(&self, x: f64) -> Result<Self> {
        Self::new(self.n, self.n0, x)
    }

    pub fn to_spectrum(&self) -> EnergySpectrum {
        let mut levels = vec![0.0; self.n0];
        levels.resize(self.n, self.x);
        EnergySpectrum {
            levels,
            original_index: (0..self.n).collect(),
        }
    }
}

/// `N0` zeros followed by `N - N0` copies of `x`.
pub fn make_two_level(n: usize, n0: usize, x: f64) -> Result<EnergySpectrum> {
    Ok(TwoLevelAnsatz::new(n, n0, x)?.to_spectrum())
}

/// Draws every ground level from `Normal(0, sigma^2)` and every excited level
/// from `Normal(x, sigma^2)` with a generator seeded from `seed`.
///
/// The draws are unconstrained; levels below `-sigma/2` are possible.
pub fn perturb_gaussian(base: &TwoLevelAnsatz, sigma: f64, seed: u64) -> Result<EnergySpectrum> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(base.to_spectrum());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma validated");
    let levels = (0..base.n)
        .map(|i| {
            let centre = if i < base.n0 { 0.0 } else { base.x };
            centre + noise.sample(&mut rng)
        })
        .collect();
    EnergySpectrum::new(levels)
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "probability weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Gibbs populations `p_i = e^{-x_i} / Z`, computed after subtracting the
/// smallest level.
pub fn equilibrium_distribution(spec: &EnergySpectrum) -> ProbabilityVector {
    let x_min = spec.min();
    let weights: Vec<f64> = spec.levels().iter().map(|x| (x_min - x).exp()).collect();
    // the minimum level has weight 1, so the sum never vanishes
    ProbabilityVector::from_weights(weights).expect("Gibbs weights are positive")
}

/// On-disk spectrum description.
///
/// ```json
/// {"levels": [0.0, 1.0, 1.0]}
/// {"two_level": {"n": 16, "n0": 3, "x": 2.9682}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectrumFile {
    Levels { levels: Vec<f64> },
    TwoLevel { two_level: TwoLevelAnsatz },
}

impl SpectrumFile {
    pub fn to_spectrum(&self) -> Result<EnergySpectrum> {
        match self {
            SpectrumFile::Levels { levels } => EnergySpectrum::preserving_order(levels.clone()),
            SpectrumFile::TwoLevel { two_level } => {
                let a = TwoLevelAnsatz::new(two_level.n, two_level.n0, two_level.x)?;
                Ok(a.to_spectrum())
            }
        }
    }

    /// The ansatz, when the file uses the two-level shorthand.
    pub fn ansatz(&self) -> Option<TwoLevelAnsatz> {
        match self {
            SpectrumFile::TwoLevel { two_level } => Some(*two_level),
            SpectrumFile::Levels { .. } => None,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl From<&EnergySpectrum> for SpectrumFile {
    fn from(spec: &EnergySpectrum) -> Self {
        SpectrumFile::Levels {
            levels: spec.levels().to_vec(),
        }
    }
}
