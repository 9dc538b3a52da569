//! Hamiltonians, Gibbs populations, temperatures, energies and entropies.
//!
//! Units are `k_B = ħ = 1`. Every [`Hamiltonian`] is stored with its ground
//! energy shifted to zero; the removed offset is kept in [`Hamiltonian::shift`].

use crate::error::{CoolError, Result};

/// Absolute tolerance for probability comparisons.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance used when grouping energies into degenerate levels.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Diagonal Hamiltonian with sorted, ground-shifted energies.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    energies: Vec<f64>,
    shift: f64,
}

impl Hamiltonian {
    /// Builds a Hamiltonian from non-decreasing energies. The lowest energy is
    /// subtracted from every level.
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(CoolError::Dimension(format!(
                "a Hamiltonian needs at least 2 levels, got {}",
                energies.len()
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(CoolError::InvalidArgument("energies must be finite".into()));
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(CoolError::InvalidArgument(
                "energies must be sorted non-decreasing".into(),
            ));
        }
        let shift = energies[0];
        let energies = energies.into_iter().map(|e| e - shift).collect();
        Ok(Self { energies, shift })
    }

    /// Two-level Hamiltonian `[0, gap]`.
    pub fn qubit(gap: f64) -> Result<Self> {
        if !(gap > 0.0) {
            return Err(CoolError::InvalidArgument(format!("qubit gap must be positive, got {gap}")));
        }
        Self::new(vec![0.0, gap])
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Offset removed at construction.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Energies as originally supplied.
    pub fn original_energies(&self) -> Vec<f64> {
        self.energies.iter().map(|e| e + self.shift).collect()
    }

    /// Largest energy, i.e. the maximal gap above the ground state.
    pub fn max_energy(&self) -> f64 {
        *self.energies.last().expect("non-empty")
    }

    /// Consecutive gaps `E_i - E_{i-1}`.
    pub fn gaps(&self) -> Vec<f64> {
        self.energies.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Inverse temperature `β ≥ 0`, where `+∞` stands for zero temperature.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InverseTemperature(f64);

impl InverseTemperature {
    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(CoolError::InvalidArgument(format!(
                "inverse temperature must be non-negative, got {beta}"
            )));
        }
        Ok(Self(beta))
    }

    /// `β = 1/T`. `T = +∞` maps to `β = 0` and `T = 0` to `β = +∞`.
    pub fn from_temperature(t: f64) -> Result<Self> {
        if t.is_nan() || t < 0.0 {
            return Err(CoolError::InvalidArgument(format!(
                "temperature must be non-negative, got {t}"
            )));
        }
        if t == 0.0 {
            Ok(Self(f64::INFINITY))
        } else {
            Ok(Self(1.0 / t))
        }
    }

    pub fn zero_temperature() -> Self {
        Self(f64::INFINITY)
    }

    pub fn infinite_temperature() -> Self {
        Self(0.0)
    }

    pub fn beta(self) -> f64 {
        self.0
    }

    pub fn temperature(self) -> f64 {
        if self.0 == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.0
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

/// Probability vector with entries in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationVector(Vec<f64>);

impl PopulationVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CoolError::Dimension("empty population vector".into()));
        }
        if probs
            .iter()
            .any(|&p| !p.is_finite() || p < -PROB_TOL || p > 1.0 + PROB_TOL)
        {
            return Err(CoolError::InvalidArgument(format!(
                "population entries must lie in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(CoolError::NotNormalized { sum });
        }
        Ok(Self(probs))
    }

    /// Wraps a vector produced internally without re-validating it.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for PopulationVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Gibbs weights for an arbitrary (unsorted) list of energies.
pub fn gibbs_from_energies(energies: &[f64], beta: InverseTemperature) -> Vec<f64> {
    let d = energies.len();
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let b = beta.beta();
    if b == 0.0 {
        return vec![1.0 / d as f64; d];
    }
    if b.is_infinite() {
        let ground: Vec<bool> = energies
            .iter()
            .map(|&e| e - emin <= DEGENERACY_TOL)
            .collect();
        let m = ground.iter().filter(|&&g| g).count() as f64;
        return ground
            .into_iter()
            .map(|g| if g { 1.0 / m } else { 0.0 })
            .collect();
    }
    let w: Vec<f64> = energies.iter().map(|&e| (-b * (e - emin)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Thermal populations `exp(-β E_i) / Z`.
pub fn gibbs_populations(h: &Hamiltonian, beta: InverseTemperature) -> PopulationVector {
    PopulationVector(gibbs_from_energies(h.energies(), beta))
}

/// Temperature of a qubit with the given gap and ground population `r`.
///
/// `r = 0.5` gives `+∞`; `r < 0.5` gives a negative temperature.
pub fn qubit_temperature_from_ground_pop(gap: f64, r: f64) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(CoolError::InvalidArgument(format!("gap must be positive, got {gap}")));
    }
    if r.is_nan() || r <= 0.0 || r >= 1.0 {
        if r == 0.0 || r == 1.0 {
            return Err(CoolError::UnboundedTemperature(r));
        }
        return Err(CoolError::InvalidArgument(format!(
            "ground population must lie in (0, 1), got {r}"
        )));
    }
    let l = (r / (1.0 - r)).ln();
    if l == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(gap / l)
}

/// Ground population of a qubit with gap `gap` at inverse temperature `beta`.
pub fn qubit_ground_pop(gap: f64, beta: InverseTemperature) -> f64 {
    let b = beta.beta();
    if b.is_infinite() {
        return if gap > 0.0 { 1.0 } else { 0.5 };
    }
    1.0 / (1.0 + (-b * gap).exp())
}

/// `Σ p_i E_i`.
pub fn average_energy(p: &[f64], energies: &[f64]) -> Result<f64> {
    if p.len() != energies.len() {
        return Err(CoolError::Dimension(format!(
            "population length {} does not match {} energies",
            p.len(),
            energies.len()
        )));
    }
    Ok(p.iter().zip(energies).map(|(a, b)| a * b).sum())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum()
}
