//! Creation of correlations between two thermal systems under an energy
//! budget. Energies are measured from the ground state of each Hamiltonian.

pub mod blocks;
pub mod oracle;
pub mod stu;
pub mod unitary;

pub use blocks::{latin_blocks, marginal_transform, simplex_coordinates, BlockDecomposition, TargetBlocks};
pub use oracle::{brute_force_max_correlations, brute_force_max_correlations_with, OracleOptions, OracleResult};
pub use stu::{
    commute_counterexample, commuting_partner, construct_stu, stu_d3_majorized_marginal, stu_geometric,
    stu_passing_norm, Partner, StuApproach, StuCertificate,
};
pub use unitary::{build_stu_unitary, evaluate_stu, expected_information, StuEvaluation};

use crate::error::{CoolError, Result};
use crate::quantum::{partial_trace, DensityMatrix, JointIndex, Side};
use crate::spectra::{
    average_energy, gibbs_from_energies, gibbs_populations, shannon_entropy, Hamiltonian, InverseTemperature,
    PopulationVector,
};

const BISECTION_STEPS: usize = 200;

/// `S(ρ_A) + S(ρ_B) - S(ρ_AB)` in nats.
pub fn mutual_information(rho: &DensityMatrix, idx: JointIndex) -> Result<f64> {
    let sa = partial_trace(rho, idx, Side::Left)?.entropy();
    let sb = partial_trace(rho, idx, Side::Right)?.entropy();
    Ok(sa + sb - rho.entropy())
}

fn smallest_gap(levels: &[&[f64]]) -> Option<f64> {
    levels
        .iter()
        .flat_map(|e| e.windows(2).map(|w| w[1] - w[0]))
        .filter(|&g| g > 0.0)
        .fold(None, |m, g| Some(m.map_or(g, |x: f64| x.min(g))))
}

/// Solves `energy(β) = c` for a non-increasing `energy` on `[0, hi]`.
fn bisect(energy: impl Fn(f64) -> f64, c: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if energy(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn thermal_energy(energies: &[f64], beta: f64) -> f64 {
    let p = gibbs_from_energies(energies, InverseTemperature::new(beta).expect("non-negative"));
    average_energy(&p, energies).expect("matching lengths")
}

/// Maximum-entropy ceiling on the marginal entropies at energy budget `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct JaynesBound {
    pub beta: InverseTemperature,
    /// `S(τ_A(β)) + S(τ_B(β))`.
    pub bound: f64,
    pub energy_residual: f64,
    /// The budget exceeds the infinite-temperature energy; `β` is clamped to zero.
    pub saturated: bool,
    /// The budget lies below the initial energy; `β` is clamped to `β_R`.
    pub below_initial: bool,
}

pub fn jaynes_bound(h_a: &Hamiltonian, h_b: &Hamiltonian, beta_r: InverseTemperature, c: f64) -> Result<JaynesBound> {
    if !c.is_finite() {
        return Err(CoolError::InvalidArgument(format!("energy budget must be finite, got {c}")));
    }
    let energy = |b: f64| thermal_energy(h_a.energies(), b) + thermal_energy(h_b.energies(), b);
    let initial = {
        let pa = gibbs_populations(h_a, beta_r);
        let pb = gibbs_populations(h_b, beta_r);
        average_energy(pa.as_slice(), h_a.energies())? + average_energy(pb.as_slice(), h_b.energies())?
    };
    let (beta, saturated, below_initial) = if c >= energy(0.0) {
        (0.0, true, false)
    } else if c <= initial {
        (beta_r.beta(), false, c < initial)
    } else {
        let hi = if beta_r.is_infinite() {
            1e3 / smallest_gap(&[h_a.energies(), h_b.energies()]).unwrap_or(1.0)
        } else {
            beta_r.beta()
        };
        (bisect(energy, c, hi), false, false)
    };
    let beta = InverseTemperature::new(beta)?;
    let sa = shannon_entropy(gibbs_populations(h_a, beta).as_slice());
    let sb = shannon_entropy(gibbs_populations(h_b, beta).as_slice());
    let reached = if beta.is_infinite() { initial } else { energy(beta.beta()) };
    Ok(JaynesBound {
        beta,
        bound: sa + sb,
        energy_residual: if saturated || below_initial { 0.0 } else { (reached - c).abs() },
        saturated,
        below_initial,
    })
}

/// Optimal correlations from the joint ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStateOptimum {
    pub beta: InverseTemperature,
    pub marginal_a: PopulationVector,
    pub marginal_b: PopulationVector,
    /// `2 S(marginal)`.
    pub info: f64,
    pub energy_residual: f64,
}

/// Marginals are Gibbs states of the combined energies `E^A_i + E^B_i` on the
/// first `min(d_A, d_B)` levels, padded with zeros.
pub fn pure_state_optimum(h_a: &Hamiltonian, h_b: &Hamiltonian, c: f64) -> Result<PureStateOptimum> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(CoolError::InvalidArgument(format!("energy budget must be positive, got {c}")));
    }
    let d = h_a.dim().min(h_b.dim());
    let combined: Vec<f64> = (0..d).map(|i| h_a.energies()[i] + h_b.energies()[i]).collect();
    let mean = combined.iter().sum::<f64>() / d as f64;
    let beta = if c >= mean {
        0.0
    } else {
        let gap = smallest_gap(&[&combined]).unwrap_or(1.0);
        bisect(|b| thermal_energy(&combined, b), c, 1e3 / gap)
    };
    let beta = InverseTemperature::new(beta)?;
    let p = gibbs_from_energies(&combined, beta);
    let energy_residual = if beta.beta() == 0.0 { 0.0 } else { (average_energy(&p, &combined)? - c).abs() };
    let info = 2.0 * shannon_entropy(&p);
    let pad = |n: usize| {
        let mut v = p.clone();
        v.resize(n, 0.0);
        PopulationVector::from_vec_unchecked(v)
    };
    Ok(PureStateOptimum { beta, marginal_a: pad(h_a.dim()), marginal_b: pad(h_b.dim()), info, energy_residual })
}

/// Necessary condition `|S_A - S_B| ≤ S(ρ_AB)` for marginals thermal at `β′`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleCheck {
    /// `|S(τ_A(β′)) - S(τ_B(β′))|`.
    pub lhs: f64,
    /// Initial joint entropy, preserved by any unitary.
    pub rhs: f64,
    pub violated: bool,
}

pub fn triangle_check(
    h_a: &Hamiltonian,
    h_b: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_prime: InverseTemperature,
) -> TriangleCheck {
    let s = |h: &Hamiltonian, b| shannon_entropy(gibbs_populations(h, b).as_slice());
    let lhs = (s(h_a, beta_prime) - s(h_b, beta_prime)).abs();
    let rhs = s(h_a, beta_r) + s(h_b, beta_r);
    TriangleCheck { lhs, rhs, violated: lhs > rhs }
}
