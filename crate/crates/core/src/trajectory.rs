//! Exact simulation of the monitored jump process and reduction of
//! trajectories to the data the estimators need.
//!
//! Spectrum levels are read as energies `ε_i`; at temperature `T` the jump
//! `i → j` has rate `Γ_ij` evaluated at gap `(ε_j − ε_i)/T`. Every random
//! draw comes from a ChaCha8 generator addressed by `(seed, stream)`, so a
//! replica's trajectory does not depend on how replicas are scheduled.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bath::{generator_at, BathModel};
use crate::error::{Error, Result};
use crate::spectrum::{EnergySpectrum, TwoLevelAnsatz};

/// Largest number of jumps a stored [`Trajectory`] may hold.
pub const MAX_STORED_JUMPS: usize = 10_000_000;

/// Generator for replica `stream` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How the first state is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    /// Drawn from the Gibbs distribution at the simulation temperature.
    #[default]
    Thermal,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub t: f64,
    pub state: usize,
}

/// Piecewise-constant path of level indices on `[0, horizon]`.
///
/// The first record is at `t = 0`; every later record is a jump into a
/// different state at a strictly larger time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    records: Vec<JumpRecord>,
    horizon: f64,
    levels: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from explicit records, checking its invariants.
    pub fn from_records(records: Vec<JumpRecord>, horizon: f64, levels: Vec<f64>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidArgument("trajectory needs an initial record".into()))?;
        if first.t != 0.0 {
            return Err(Error::InvalidArgument("first record must be at t = 0".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be > 0, got {horizon}")));
        }
        for w in records.windows(2) {
            if w[1].t.is_nan() || w[1].t <= w[0].t || w[1].t > horizon || w[1].state == w[0].state {
                return Err(Error::InvalidArgument(format!(
                    "bad jump from {:?} to {:?}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(bad) = records.iter().find(|r| r.state >= levels.len()) {
            return Err(Error::InvalidArgument(format!("state {} out of range", bad.state)));
        }
        Ok(Self {
            records,
            horizon,
            levels,
        })
    }

    pub fn records(&self) -> &[JumpRecord] {
        &self.records
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.records[0].state
    }

    /// Level energies the state indices refer to.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn jump_count(&self) -> usize {
        self.records.len() - 1
    }

    /// State occupied at time `t`: the last state entered at or before `t`.
    pub fn state_at(&self, t: f64) -> usize {
        let idx = self.records.partition_point(|r| r.t <= t);
        self.records[idx.saturating_sub(1)].state
    }

    /// Total time spent in each level.
    pub fn occupation_times(&self) -> Vec<f64> {
        let mut times = vec![0.0; self.levels.len()];
        for (i, r) in self.records.iter().enumerate() {
            let end = self.records.get(i + 1).map_or(self.horizon, |n| n.t);
            times[r.state] += end - r.t;
        }
        times
    }
}

/// States sampled on the grid `t_k = k τ / m`, `k = 0..=m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObservationSequence {
    pub m: usize,
    pub samples: Vec<usize>,
}

impl ObservationSequence {
    /// Number of state changes between consecutive samples.
    pub fn transitions(&self) -> usize {
        self.samples.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

pub fn observe(traj: &Trajectory, m: usize) -> Result<ObservationSequence> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one observation interval".into()));
    }
    let tau = traj.horizon();
    let mut samples = Vec::with_capacity(m + 1);
    let mut idx = 0;
    for k in 0..=m {
        let t = if k == m { tau } else { k as f64 * tau / m as f64 };
        while idx + 1 < traj.records.len() && traj.records[idx + 1].t <= t {
            idx += 1;
        }
        samples.push(traj.records[idx].state);
    }
    Ok(ObservationSequence { m, samples })
}

/// Manifold-level summary of a two-manifold trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    /// Jumps from the ground manifold to the excited one.
    pub k: u64,
    /// Jumps from the excited manifold to the ground one.
    pub l: u64,
    /// Time spent in the ground manifold.
    pub tau0: f64,
    pub tau: f64,
}

impl SufficientStats {
    pub fn validate(&self) -> Result<()> {
        let ok = self.k.abs_diff(self.l) <= 1
            && self.tau.is_finite()
            && self.tau > 0.0
            && (0.0..=self.tau).contains(&self.tau0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "inconsistent sufficient statistics {self:?}"
            )))
        }
    }

    /// Parses a stats file; unknown keys such as run metadata are ignored.
    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(
            path,
        )?))?)
    }
}

// Classifies each level as ground (false) or excited (true) manifold.
fn manifold_labels(levels: &[f64], ansatz: &TwoLevelAnsatz) -> Result<Vec<bool>> {
    let labels: Vec<bool> = levels
        .iter()
        .map(|&e| {
            if e == 0.0 {
                Ok(false)
            } else if e == ansatz.x {
                Ok(true)
            } else {
                Err(Error::PartitionMismatch(format!(
                    "level {e} is neither 0 nor the gap {}",
                    ansatz.x
                )))
            }
        })
        .collect::<Result<_>>()?;
    let n0 = labels.iter().filter(|e| !**e).count();
    if labels.len() != ansatz.n || n0 != ansatz.n0 {
        return Err(Error::PartitionMismatch(format!(
            "spectrum has {} levels with {n0} at 0, ansatz expects ({}, {})",
            labels.len(),
            ansatz.n,
            ansatz.n0
        )));
    }
    Ok(labels)
}

/// Counts manifold-crossing jumps and ground-manifold residence time.
///
/// The ground manifold is the set of levels equal to 0 and the excited one
/// the set equal to `ansatz.x` (same units as the trajectory levels).
pub fn sufficient_stats(traj: &Trajectory, ansatz: &TwoLevelAnsatz) -> Result<SufficientStats> {
    let labels = manifold_labels(traj.levels(), ansatz)?;
    let mut acc = StatsAccumulator::new(labels[traj.initial_state()]);
    for (i, r) in traj.records.iter().enumerate().skip(1) {
        acc.advance(r.t - traj.records[i - 1].t);
        acc.enter(labels[r.state]);
    }
    let last = traj.records.last().expect("non-empty").t;
    acc.advance(traj.horizon() - last);
    Ok(acc.finish(traj.horizon()))
}

struct StatsAccumulator {
    excited: bool,
    k: u64,
    l: u64,
    tau0: f64,
}

impl StatsAccumulator {
    fn new(excited: bool) -> Self {
        Self {
            excited,
            k: 0,
            l: 0,
            tau0: 0.0,
        }
    }

    fn advance(&mut self, dt: f64) {
        if !self.excited {
            self.tau0 += dt;
        }
    }

    fn enter(&mut self, excited: bool) {
        match (self.excited, excited) {
            (false, true) => self.k += 1,
            (true, false) => self.l += 1,
            _ => {}
        }
        self.excited = excited;
    }

    fn finish(self, tau: f64) -> SufficientStats {
        SufficientStats {
            k: self.k,
            l: self.l,
            tau0: self.tau0.min(tau),
            tau,
        }
    }
}

/// Precomputed jump tables for one spectrum, bath and temperature.
struct JumpTable {
    exit: Vec<f64>,
    // per state: (target, cumulative rate) over off-diagonal targets
    cumulative: Vec<Vec<(usize, f64)>>,
    gibbs: Vec<f64>,
}

impl JumpTable {
    fn new(spec: &EnergySpectrum, bath: &BathModel, temperature: f64) -> Result<Self> {
        bath.validate()?;
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be > 0, got {temperature}"
            )));
        }
        let g = generator_at(spec, bath, temperature);
        let n = g.dim();
        let mut exit = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = 0.0;
            let row: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i && g.get(i, j) > 0.0)
                .map(|j| {
                    acc += g.get(i, j);
                    (j, acc)
                })
                .collect();
            if (acc.is_nan() || acc <= 0.0) && n > 1 {
                return Err(Error::AbsorbingState { state: i });
            }
            exit.push(acc);
            cumulative.push(row);
        }
        let e_min = spec.min();
        let w: Vec<f64> = spec
            .levels()
            .iter()
            .map(|e| ((e_min - e) / temperature).exp())
            .collect();
        let z: f64 = w.iter().sum();
        Ok(Self {
            exit,
            cumulative,
            gibbs: w.into_iter().map(|v| v / z).collect(),
        })
    }

    fn initial(&self, initial: Initial, rng: &mut impl Rng) -> Result<usize> {
        match initial {
            Initial::Fixed(i) if i < self.exit.len() => Ok(i),
            Initial::Fixed(i) => Err(Error::InvalidArgument(format!(
                "initial state {i} out of range for {} levels",
                self.exit.len()
            ))),
            Initial::Thermal => Ok(sample_discrete(&self.gibbs, rng)),
        }
    }

    fn next(&self, state: usize, rng: &mut impl Rng) -> (f64, usize) {
        let total = self.exit[state];
        let wait = -(1.0 - rng.random::<f64>()).ln() / total;
        let u = rng.random::<f64>() * total;
        let row = &self.cumulative[state];
        let pos = row.partition_point(|&(_, c)| c <= u).min(row.len() - 1);
        (wait, row[pos].0)
    }
}

fn sample_discrete(p: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

/// Exact event-driven (Gillespie) sample of the jump process on `[0, tau]`.
pub fn simulate_gillespie(
    spec: &EnergySpectrum,
    bath: &BathModel,
    temperature: f64,
    tau: f64,
    seed: u64,
    initial: Initial,
) -> Result<Trajectory> {
    simulate_with_rng(spec, bath, temperature, tau, initial, &mut replica_rng(seed, 0))
}

/// [`simulate_gillespie`] driven by a caller-supplied generator.
pub fn simulate_with_rng(
    spec: &EnergySpectrum,
    bath: &BathModel,
    temperature: f64,
    tau: f64,
    initial: Initial,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    check_horizon(tau)?;
    let table = JumpTable::new(spec, bath, temperature)?;
    let mut state = table.initial(initial, rng)?;
    let mut records = vec![JumpRecord { t: 0.0, state }];
    let mut t = 0.0;
    if spec.len() > 1 {
        loop {
            let (wait, next) = table.next(state, rng);
            t += wait;
            if t > tau {
                break;
            }
            if records.len() > MAX_STORED_JUMPS {
                return Err(Error::TrajectoryOverflow { cap: MAX_STORED_JUMPS });
            }
            state = next;
            records.push(JumpRecord { t, state });
        }
    }
    Ok(Trajectory {
        records,
        horizon: tau,
        levels: spec.levels().to_vec(),
    })
}

/// Full `N`-level simulation that keeps only the sufficient statistics, for
/// horizons whose trajectories would be too large to store.
pub fn simulate_stats_streaming(
    spec: &EnergySpectrum,
    ansatz: &TwoLevelAnsatz,
    bath: &BathModel,
    temperature: f64,
    tau: f64,
    initial: Initial,
    rng: &mut impl Rng,
) -> Result<SufficientStats> {
    check_horizon(tau)?;
    let labels = manifold_labels(spec.levels(), ansatz)?;
    let table = JumpTable::new(spec, bath, temperature)?;
    let mut state = table.initial(initial, rng)?;
    let mut acc = StatsAccumulator::new(labels[state]);
    let mut t = 0.0;
    loop {
        let (wait, next) = table.next(state, rng);
        if t + wait > tau {
            acc.advance(tau - t);
            break;
        }
        t += wait;
        acc.advance(wait);
        state = next;
        acc.enter(labels[state]);
    }
    Ok(acc.finish(tau))
}

fn check_horizon(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("horizon must be > 0, got {tau}")))
    }
}

/// Aggregate manifold exit rates `((N−N0) Γ01, N0 Γ10)` at temperature `T`,
/// with `ansatz.x` read as the energy gap `ε`.
pub fn coarse_rates(ansatz: &TwoLevelAnsatz, bath: &BathModel, temperature: f64) -> (f64, f64) {
    let scale = bath.rate_scale(temperature);
    let x = ansatz.x / temperature;
    let up = ansatz.n1() as f64 * scale * bath.rate(x);
    let down = ansatz.n0 as f64 * scale * bath.rate(-x);
    (up, down)
}

/// Sufficient statistics from the two-state chain with [`coarse_rates`].
///
/// The manifold process of a two-level spectrum is itself Markov with these
/// rates, so this samples the same distribution as the full simulation at a
/// fraction of the cost. A thermal start puts the chain in the ground
/// manifold with probability `N0 p_0`.
pub fn simulate_coarse(
    ansatz: &TwoLevelAnsatz,
    bath: &BathModel,
    temperature: f64,
    tau: f64,
    initial: Initial,
    rng: &mut impl Rng,
) -> Result<SufficientStats> {
    check_horizon(tau)?;
    bath.validate()?;
    let (up, down) = coarse_rates(ansatz, bath, temperature);
    if !(up > 0.0 && down > 0.0) {
        return Err(Error::AbsorbingState {
            state: usize::from(up > 0.0),
        });
    }
    let mut excited = match initial {
        Initial::Thermal => rng.random::<f64>() < up / (up + down),
        Initial::Fixed(i) if i < ansatz.n => i >= ansatz.n0,
        Initial::Fixed(i) => {
            return Err(Error::InvalidArgument(format!("initial state {i} out of range")));
        }
    };
    let mut acc = StatsAccumulator::new(excited);
    let mut t = 0.0;
    loop {
        let rate = if excited { down } else { up };
        let wait = -(1.0 - rng.random::<f64>()).ln() / rate;
        if t + wait > tau {
            acc.advance(tau - t);
            break;
        }
        t += wait;
        acc.advance(wait);
        excited = !excited;
        acc.enter(excited);
    }
    Ok(acc.finish(tau))
}

/// Metadata line written before the records of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub spectrum_sha256: String,
    pub bath: BathModel,
    pub temperature: f64,
    pub tau: f64,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub jumps: usize,
    /// Free-form run metadata (tool version, invocation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// Writes a header line followed by one `{"t", "state"}` object per line.
pub fn write_jsonl(traj: &Trajectory, header: &TrajectoryHeader, mut out: impl Write) -> Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for r in &traj.records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file produced by [`write_jsonl`].
pub fn read_jsonl(path: impl AsRef<std::path::Path>) -> Result<(TrajectoryHeader, Trajectory)> {
    use std::io::BufRead;
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header: TrajectoryHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => return Err(Error::InvalidArgument("empty trajectory file".into())),
    };
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str::<JumpRecord>(&line)?);
        }
    }
    let traj = Trajectory::from_records(records, header.tau, header.levels.clone())?;
    Ok((header, traj))
}
