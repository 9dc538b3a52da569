//! Incoherent cooling: energy-conserving unitaries on the system plus a
//! machine whose factors sit at room or hot temperature. Heat from the hot
//! bath is the resource.

use crate::coherent::{ProtocolTrace, TraceStep, TwoQubitMachine};
use crate::error::{CoolError, Result};
use crate::quantum::{
    apply_unitary, commutator_norm, diag_of, energy_groups, partial_trace, tensor, DensityMatrix,
    JointIndex, Side, UnitaryMatrix, COMMUTATION_TOL,
};
use crate::spectra::{
    gibbs_populations, qubit_ground_pop, qubit_temperature_from_ground_pop, Hamiltonian,
    InverseTemperature, PopulationVector,
};

/// Machine built from independent factors, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredMachine {
    pub factors: Vec<Hamiltonian>,
}

impl FactoredMachine {
    pub fn new(factors: Vec<Hamiltonian>) -> Result<Self> {
        if factors.is_empty() {
            return Err(CoolError::Dimension("machine needs at least one factor".into()));
        }
        Ok(Self { factors })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|h| h.dim()).collect()
    }

    pub fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    /// Joint machine energies in row-major order over the factors.
    pub fn energies(&self) -> Vec<f64> {
        let mut e = vec![0.0];
        for h in &self.factors {
            e = e
                .iter()
                .flat_map(|&a| h.energies().iter().map(move |&b| a + b))
                .collect();
        }
        e
    }

    /// Per-factor levels of a flat machine index.
    pub fn split(&self, mut k: usize) -> Vec<usize> {
        let dims = self.dims();
        let mut out = vec![0; dims.len()];
        for f in (0..dims.len()).rev() {
            out[f] = k % dims[f];
            k /= dims[f];
        }
        out
    }
}

/// Which machine factors are attached to the hot bath.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BathAssignment {
    pub hot: Vec<bool>,
}

impl BathAssignment {
    pub fn new(hot: Vec<bool>) -> Self {
        Self { hot }
    }

    pub fn hot_factors(&self) -> Vec<usize> {
        (0..self.hot.len()).filter(|&f| self.hot[f]).collect()
    }

    pub fn room_factors(&self) -> Vec<usize> {
        (0..self.hot.len()).filter(|&f| !self.hot[f]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Same system level throughout.
    MachineOnly,
    /// Same machine level throughout.
    SystemOnly,
    Mixed,
    Singleton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Usefulness {
    /// Excluded by a proven no-cooling argument.
    NonCooling,
    /// Not excluded; may or may not allow cooling.
    UnclassifiedPotentiallyUseful,
}

/// Group of joint basis states sharing one total energy.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateSubspace {
    pub energy: f64,
    /// `(system_level, machine_level)` pairs, machine level flattened.
    pub indices: Vec<(usize, usize)>,
    pub classification: Classification,
    pub usefulness: Usefulness,
}

/// Groups the joint system-machine basis by energy and applies the
/// no-cooling filters.
pub fn enumerate_degeneracies(system: &Hamiltonian, machine: &FactoredMachine) -> Result<Vec<DegenerateSubspace>> {
    let me = machine.energies();
    let idx = JointIndex::new(system.dim(), me.len());
    if idx.dim() > 64 {
        return Err(CoolError::Dimension(format!("joint dimension {} exceeds 64", idx.dim())));
    }
    let joint: Vec<f64> = (0..idx.dim())
        .map(|k| {
            let (s, m) = idx.split(k);
            system.energies()[s] + me[m]
        })
        .collect();
    let single_factor = machine.factors.len() == 1;
    Ok(energy_groups(&joint)
        .into_iter()
        .map(|g| {
            let indices: Vec<(usize, usize)> = g.iter().map(|&k| idx.split(k)).collect();
            let classification = if indices.len() == 1 {
                Classification::Singleton
            } else if indices.iter().all(|p| p.0 == indices[0].0) {
                Classification::MachineOnly
            } else if indices.iter().all(|p| p.1 == indices[0].1) {
                Classification::SystemOnly
            } else {
                Classification::Mixed
            };
            let usefulness = if classification == Classification::Mixed && !single_factor {
                Usefulness::UnclassifiedPotentiallyUseful
            } else {
                Usefulness::NonCooling
            };
            DegenerateSubspace { energy: joint[g[0]], indices, classification, usefulness }
        })
        .collect())
}

/// Result of one incoherent cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub sigma_out: DensityMatrix,
    /// Heat drawn from the hot bath to rethermalize the hot factors.
    pub heat_drawn: f64,
    /// Joint energy after minus before the unitary.
    pub energy_change: f64,
}

/// Repeats incoherent cycles, remembering the hot-factor populations left
/// behind by the previous cycle.
#[derive(Debug, Clone)]
pub struct IncoherentRunner {
    system: Hamiltonian,
    machine: FactoredMachine,
    assignment: BathAssignment,
    beta_r: InverseTemperature,
    beta_h: InverseTemperature,
    machine_state: DensityMatrix,
    hot_energy_target: f64,
    /// Hot-part energy left by the previous cycle.
    previous_hot_energy: f64,
    /// Charge the full room-to-hot heat every cycle instead.
    pub naive_accounting: bool,
}

impl IncoherentRunner {
    pub fn new(
        system: Hamiltonian,
        machine: FactoredMachine,
        assignment: BathAssignment,
        beta_r: InverseTemperature,
        beta_h: InverseTemperature,
    ) -> Result<Self> {
        if assignment.hot.len() != machine.factors.len() {
            return Err(CoolError::Dimension("bath assignment does not match machine factors".into()));
        }
        if beta_h.beta() > beta_r.beta() {
            return Err(CoolError::InvalidArgument("hot bath must not be colder than the room".into()));
        }
        let mut state: Option<DensityMatrix> = None;
        let mut hot_target = 0.0;
        let mut hot_room = 0.0;
        for (f, h) in machine.factors.iter().enumerate() {
            let b = if assignment.hot[f] { beta_h } else { beta_r };
            let p = gibbs_populations(h, b);
            if assignment.hot[f] {
                hot_target += dot(p.as_slice(), h.energies());
                hot_room += dot(gibbs_populations(h, beta_r).as_slice(), h.energies());
            }
            let rho = DensityMatrix::from_diag(p.as_slice());
            state = Some(match state {
                None => rho,
                Some(s) => tensor(&s, &rho),
            });
        }
        Ok(Self {
            system,
            machine,
            assignment,
            beta_r,
            beta_h,
            machine_state: state.expect("non-empty"),
            hot_energy_target: hot_target,
            previous_hot_energy: hot_room,
            naive_accounting: false,
        })
    }

    /// Joint energies of system ⊗ machine.
    pub fn joint_energies(&self) -> Vec<f64> {
        let me = self.machine.energies();
        self.system
            .energies()
            .iter()
            .flat_map(|&s| me.iter().map(move |&m| s + m))
            .collect()
    }

    fn hot_energy(&self, machine_diag: &[f64]) -> f64 {
        let hot = self.assignment.hot_factors();
        machine_diag
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let levels = self.machine.split(k);
                p * hot.iter().map(|&f| self.machine.factors[f].energies()[levels[f]]).sum::<f64>()
            })
            .sum()
    }

    /// Heat to bring a room-temperature hot part up to `β_H`.
    pub fn first_cycle_heat(&self) -> f64 {
        let mut hot_room = 0.0;
        for f in self.assignment.hot_factors() {
            let h = &self.machine.factors[f];
            hot_room += dot(gibbs_populations(h, self.beta_r).as_slice(), h.energies());
        }
        self.hot_energy_target - hot_room
    }

    /// Applies one cycle to `sigma` with the energy-conserving unitary `u`.
    pub fn cycle(&mut self, sigma: &DensityMatrix, u: &UnitaryMatrix) -> Result<CycleOutcome> {
        if sigma.dim() != self.system.dim() {
            return Err(CoolError::Dimension("state does not match the system".into()));
        }
        let energies = self.joint_energies();
        let comm = commutator_norm(u, &energies)?;
        if comm >= COMMUTATION_TOL {
            return Err(CoolError::NotEnergyConserving(comm));
        }
        let heat_drawn = if self.naive_accounting {
            self.first_cycle_heat()
        } else {
            self.hot_energy_target - self.previous_hot_energy
        };
        let joint = tensor(sigma, &self.machine_state);
        let after = apply_unitary(&joint, u)?;
        let e_before = dot(&diag_of(&joint)?, &energies);
        let e_after = dot(&diag_of(&after)?, &energies);
        let idx = JointIndex::new(self.system.dim(), self.machine.dim());
        let sigma_out = partial_trace(&after, idx, Side::Left)?;
        let m_out = partial_trace(&after, idx, Side::Right)?;
        self.previous_hot_energy = self.hot_energy(&diag_of(&m_out)?);
        Ok(CycleOutcome { sigma_out, heat_drawn, energy_change: e_after - e_before })
    }

    /// `ΔF = Q (1 - β_H/β_R)` for heat `Q` drawn at `β_H`.
    pub fn free_energy_cost(&self, heat: f64) -> f64 {
        heat * (1.0 - self.beta_h.beta() / self.beta_r.beta())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One cycle from a fresh runner.
pub fn incoherent_cycle(
    system: &Hamiltonian,
    machine: &FactoredMachine,
    assignment: &BathAssignment,
    beta_r: InverseTemperature,
    beta_h: InverseTemperature,
    sigma: &DensityMatrix,
    u: &UnitaryMatrix,
) -> Result<CycleOutcome> {
    let mut runner = IncoherentRunner::new(system.clone(), machine.clone(), assignment.clone(), beta_r, beta_h)?;
    runner.cycle(sigma, u)
}

/// Effective two-level subspace of a machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualQubit {
    pub norm: f64,
    pub ground_pop: f64,
    pub gap: f64,
}

/// Virtual qubit spanned by `|10⟩` and `|01⟩` of a two-qubit machine with
/// the first qubit at room and the second at hot temperature.
pub fn virtual_qubit(m1: f64, m2: f64, beta_r: InverseTemperature, beta_h: InverseTemperature) -> VirtualQubit {
    let r1 = qubit_ground_pop(m1, beta_r);
    let rh = qubit_ground_pop(m2, beta_h);
    let norm = r1 * (1.0 - rh) + (1.0 - r1) * rh;
    VirtualQubit { norm, ground_pop: r1 * (1.0 - rh) / norm, gap: m1 - m2 }
}

/// Closed-form repeated-cycle values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncoherentClosedForm {
    pub r_n: f64,
    pub t_n: f64,
    pub delta_f_n: f64,
}

/// `r_n`, `T_n`, `ΔF_n` after `n` cycles (`None` for the limit) of the
/// two-qubit machine with `M2` hot and the `|010⟩ ↔ |101⟩` swap.
pub fn two_qubit_incoherent_closed_form(
    machine: &TwoQubitMachine,
    beta_h: InverseTemperature,
    n: Option<usize>,
) -> Result<IncoherentClosedForm> {
    let beta_r = machine.beta_r;
    if beta_h.beta() > beta_r.beta() {
        return Err(CoolError::InvalidArgument("T_H must be at least T_R".into()));
    }
    let vq = virtual_qubit(machine.m1, machine.m2, beta_r, beta_h);
    let (r_s, r_m2) = (machine.r_s(), machine.r_m2());
    let r_h = qubit_ground_pop(machine.m2, beta_h);
    let r_at = |k: usize| vq.ground_pop + (1.0 - vq.norm).powi(k as i32) * (r_s - vq.ground_pop);
    let (r_n, r_prev) = match n {
        Some(0) => return Err(CoolError::InvalidArgument("need at least one cycle".into())),
        Some(k) => (r_at(k), r_at(k - 1)),
        None => (vq.ground_pop, vq.ground_pop),
    };
    let carnot = 1.0 - beta_h.beta() / beta_r.beta();
    let delta_f_n = machine.m2 * (r_m2 - r_h + r_prev - r_s) * carnot;
    let t_n = match n {
        None => limit_temperature(machine, beta_h),
        Some(_) => qubit_temperature_from_ground_pop(machine.e_s, r_n)?,
    };
    Ok(IncoherentClosedForm { r_n, t_n, delta_f_n })
}

/// `E_S / (M1/T_R - M2/T_H)`.
pub fn limit_temperature(machine: &TwoQubitMachine, beta_h: InverseTemperature) -> f64 {
    machine.e_s / (machine.m1 * machine.beta_r.beta() - machine.m2 * beta_h.beta())
}

/// Ground population after one cycle, directly from the swap populations.
pub fn single_cycle_ground_pop(machine: &TwoQubitMachine, beta_h: InverseTemperature) -> f64 {
    let (r_s, r1) = (machine.r_s(), machine.r_m1());
    let rh = qubit_ground_pop(machine.m2, beta_h);
    r_s * r1 + ((1.0 - r_s) * r1 + r_s * (1.0 - r1)) * (1.0 - rh)
}

/// Runner and swap unitary for the two-qubit machine (`M1` room, `M2` hot).
pub fn two_qubit_runner(machine: &TwoQubitMachine, beta_h: InverseTemperature) -> Result<(IncoherentRunner, UnitaryMatrix)> {
    let system = Hamiltonian::qubit(machine.e_s)?;
    let factors = FactoredMachine::new(vec![Hamiltonian::qubit(machine.m1)?, Hamiltonian::qubit(machine.m2)?])?;
    let runner = IncoherentRunner::new(system, factors, BathAssignment::new(vec![false, true]), machine.beta_r, beta_h)?;
    let mut perm: Vec<usize> = (0..8).collect();
    perm.swap(2, 5);
    Ok((runner, UnitaryMatrix::permutation(&perm)?))
}

/// Machine extended by one bridging qubit per system gap.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMachine {
    pub machine: Hamiltonian,
    /// Gap of the bridging qubit for system gap `i` (entry `i - 1`).
    pub qubit_gaps: Vec<f64>,
}

pub fn extended_machine(system: &Hamiltonian, machine: &Hamiltonian) -> Result<ExtendedMachine> {
    let e_max = machine.max_energy();
    let mut qubit_gaps = Vec::with_capacity(system.dim() - 1);
    for (i, g) in system.gaps().into_iter().enumerate() {
        let q = e_max - g;
        if q < 0.0 {
            return Err(CoolError::GapRestriction(format!(
                "system gap {} ({g}) exceeds the machine's maximal energy {e_max}",
                i + 1
            )));
        }
        qubit_gaps.push(q);
    }
    Ok(ExtendedMachine { machine: machine.clone(), qubit_gaps })
}

fn swap_gain(sigma: &[f64], tau_m: &[f64], tau_q: &[Vec<f64>]) -> Option<(usize, f64)> {
    let dm = tau_m.len();
    let mut best: Option<(usize, f64)> = None;
    for i in 1..sigma.len() {
        let q = &tau_q[i - 1];
        let delta = sigma[i] * tau_m[0] * q[1] - sigma[i - 1] * tau_m[dm - 1] * q[0];
        if delta > 0.0 && best.is_none_or(|(_, b)| delta > b) {
            best = Some((i, delta));
        }
    }
    best
}

fn bridging_gibbs(ext: &ExtendedMachine, beta_h: InverseTemperature) -> Vec<Vec<f64>> {
    ext.qubit_gaps
        .iter()
        .map(|&g| {
            let r = qubit_ground_pop(g, beta_h);
            vec![r, 1.0 - r]
        })
        .collect()
}

/// One energy-conserving max-swap on the extended machine (machine at `β_R`,
/// bridging qubits at `β_H`). Returns the new populations and the heat drawn.
pub fn incoherent_max_swap_step_with_heat(
    sigma: &[f64],
    system: &Hamiltonian,
    machine: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_h: InverseTemperature,
) -> Result<(Vec<f64>, f64)> {
    if sigma.len() != system.dim() {
        return Err(CoolError::Dimension("state does not match the system".into()));
    }
    let ext = extended_machine(system, machine)?;
    let tau_m = gibbs_populations(machine, beta_r).into_vec();
    let tau_q = bridging_gibbs(&ext, beta_h);
    let mut out = sigma.to_vec();
    let mut heat = 0.0;
    if let Some((i, delta)) = swap_gain(sigma, &tau_m, &tau_q) {
        out[i - 1] += delta;
        out[i] -= delta;
        heat = delta * ext.qubit_gaps[i - 1];
    }
    Ok((out, heat))
}

pub fn incoherent_max_swap_step(
    sigma: &PopulationVector,
    system: &Hamiltonian,
    machine: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_h: InverseTemperature,
) -> Result<PopulationVector> {
    let (p, _) = incoherent_max_swap_step_with_heat(sigma.as_slice(), system, machine, beta_r, beta_h)?;
    Ok(PopulationVector::from_vec_unchecked(p))
}

/// Dense permutation for the swap at system gap `i` on
/// system ⊗ machine ⊗ Q_1 ⊗ … ⊗ Q_{d_S-1}, with the joint energies.
pub fn incoherent_max_swap_unitary(system: &Hamiltonian, machine: &Hamiltonian, i: usize) -> Result<(UnitaryMatrix, Vec<f64>)> {
    let ext = extended_machine(system, machine)?;
    let (ds, dm) = (system.dim(), machine.dim());
    if i == 0 || i >= ds {
        return Err(CoolError::InvalidArgument(format!("gap index {i} out of range")));
    }
    let nq = ext.qubit_gaps.len();
    let n = ds * dm * (1 << nq);
    if n > 64 {
        return Err(CoolError::Dimension(format!("extended joint dimension {n} exceeds 64")));
    }
    let encode = |s: usize, m: usize, q: usize| (s * dm + m) * (1 << nq) + q;
    let mut energies = vec![0.0; n];
    for s in 0..ds {
        for m in 0..dm {
            for q in 0..(1usize << nq) {
                let eq: f64 = (0..nq)
                    .filter(|&b| (q >> (nq - 1 - b)) & 1 == 1)
                    .map(|b| ext.qubit_gaps[b])
                    .sum();
                energies[encode(s, m, q)] = system.energies()[s] + machine.energies()[m] + eq;
            }
        }
    }
    let bit = 1usize << (nq - i);
    let mut perm: Vec<usize> = (0..n).collect();
    for q in 0..(1usize << nq) {
        if q & bit == 0 {
            let a = encode(i - 1, dm - 1, q);
            let b = encode(i, 0, q | bit);
            perm.swap(a, b);
        }
    }
    Ok((UnitaryMatrix::permutation(&perm)?, energies))
}

/// Iterates the incoherent max-swap; the trace's cumulative column holds
/// heat drawn from the hot bath.
pub fn iterate_incoherent_max_swap(
    initial: &PopulationVector,
    system: &Hamiltonian,
    machine: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_h: InverseTemperature,
    tol: f64,
    max_steps: usize,
) -> Result<ProtocolTrace> {
    let mut cur = initial.as_slice().to_vec();
    let mut heat = 0.0;
    let mut steps = vec![TraceStep { index: 0, populations: cur.clone(), ground_pop: cur[0], work_cumulative: 0.0 }];
    let mut converged = false;
    for k in 1..=max_steps {
        let (next, q) = incoherent_max_swap_step_with_heat(&cur, system, machine, beta_r, beta_h)?;
        let diff = next.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        heat += q;
        cur = next;
        steps.push(TraceStep { index: k, populations: cur.clone(), ground_pop: cur[0], work_cumulative: heat });
        if diff < tol {
            converged = true;
            break;
        }
    }
    Ok(ProtocolTrace { steps, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherent::universal_bound_state;
    use crate::majorization::sum_colder_or_equal;
    use crate::quantum::{commutes_with_hamiltonian, random_energy_conserving_unitary, CMatrix};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn beta(b: f64) -> InverseTemperature {
        InverseTemperature::new(b).unwrap()
    }

    fn qubit(g: f64) -> Hamiltonian {
        Hamiltonian::qubit(g).unwrap()
    }

    #[test]
    fn degeneracy_examples() {
        let m = FactoredMachine::new(vec![qubit(1.4), qubit(0.4)]).unwrap();
        let groups = enumerate_degeneracies(&qubit(1.0), &m).unwrap();
        let useful: Vec<_> = groups
            .iter()
            .filter(|g| g.usefulness == Usefulness::UnclassifiedPotentiallyUseful)
            .collect();
        assert_eq!(useful.len(), 1);
        assert_abs_diff_eq!(useful[0].energy, 1.4, epsilon = 1e-12);
        // |0,10⟩ and |1,01⟩
        assert_eq!(useful[0].indices, vec![(0, 2), (1, 1)]);

        let single = FactoredMachine::new(vec![qubit(1.0)]).unwrap();
        let groups = enumerate_degeneracies(&qubit(1.0), &single).unwrap();
        assert!(groups.iter().any(|g| g.classification == Classification::Mixed));
        assert!(groups.iter().all(|g| g.usefulness == Usefulness::NonCooling));

        let twin = FactoredMachine::new(vec![qubit(0.7), qubit(0.7)]).unwrap();
        let groups = enumerate_degeneracies(&qubit(1.0), &twin).unwrap();
        assert!(groups
            .iter()
            .all(|g| matches!(g.classification, Classification::MachineOnly | Classification::Singleton)));
    }

    #[test]
    fn identity_cycle_only_rethermalizes() {
        let tq = TwoQubitMachine::from_gaps(1.0, 0.4, beta(1.0)).unwrap();
        let (mut runner, _) = two_qubit_runner(&tq, beta(0.2)).unwrap();
        let sigma = DensityMatrix::from_diag(&[tq.r_s(), 1.0 - tq.r_s()]);
        let out = runner.cycle(&sigma, &UnitaryMatrix::identity(8)).unwrap();
        assert!((out.sigma_out.matrix() - sigma.matrix()).camax() < 1e-15);
        assert_abs_diff_eq!(out.heat_drawn, runner.first_cycle_heat(), epsilon = 1e-15);
        let again = runner.cycle(&sigma, &UnitaryMatrix::identity(8)).unwrap();
        assert_abs_diff_eq!(again.heat_drawn, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn non_conserving_unitary_rejected() {
        let tq = TwoQubitMachine::from_gaps(1.0, 0.4, beta(1.0)).unwrap();
        let (mut runner, _) = two_qubit_runner(&tq, beta(0.2)).unwrap();
        let mut perm: Vec<usize> = (0..8).collect();
        perm.swap(0, 1);
        let sigma = DensityMatrix::from_diag(&[0.7, 0.3]);
        assert!(matches!(
            runner.cycle(&sigma, &UnitaryMatrix::permutation(&perm).unwrap()),
            Err(CoolError::NotEnergyConserving(_))
        ));
    }

    #[test]
    fn swap_cycle_matches_single_cycle_formula() {
        for (m2, bh) in [(0.4, 0.0), (0.4, 0.3), (1.3, 0.5)] {
            let tq = TwoQubitMachine::from_gaps(1.0, m2, beta(1.0)).unwrap();
            let (mut runner, u) = two_qubit_runner(&tq, beta(bh)).unwrap();
            let sigma = DensityMatrix::from_diag(&[tq.r_s(), 1.0 - tq.r_s()]);
            let out = runner.cycle(&sigma, &u).unwrap();
            let r = out.sigma_out.matrix()[(0, 0)].re;
            assert_abs_diff_eq!(r, single_cycle_ground_pop(&tq, beta(bh)), epsilon = 1e-14);
            let cf = two_qubit_incoherent_closed_form(&tq, beta(bh), Some(1)).unwrap();
            assert_abs_diff_eq!(r, cf.r_n, epsilon = 1e-14);
            assert_abs_diff_eq!(runner.free_energy_cost(out.heat_drawn), cf.delta_f_n, epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_form_examples() {
        let tq = TwoQubitMachine::from_gaps(1.0, 0.4, beta(1.0)).unwrap();
        for n in 1..5 {
            let cf = two_qubit_incoherent_closed_form(&tq, beta(1.0), Some(n)).unwrap();
            assert_abs_diff_eq!(cf.r_n, tq.r_s(), epsilon = 1e-15);
        }
        let inf = two_qubit_incoherent_closed_form(&tq, beta(0.0), None).unwrap();
        assert_abs_diff_eq!(inf.t_n, 1.0 / 1.4, epsilon = 1e-15);
        assert_abs_diff_eq!(
            qubit_temperature_from_ground_pop(1.0, inf.r_n).unwrap(),
            1.0 / 1.4,
            epsilon = 1e-12
        );
        assert!(two_qubit_incoherent_closed_form(&tq, beta(2.0), Some(1)).is_err());
    }

    #[test]
    fn virtual_qubit_examples() {
        let b = beta(0.9);
        let vq = virtual_qubit(1.4, 0.4, b, b);
        assert_abs_diff_eq!(vq.ground_pop, qubit_ground_pop(1.0, b), epsilon = 1e-14);
        let vq = virtual_qubit(1.4, 0.4, b, beta(0.0));
        assert_abs_diff_eq!(vq.ground_pop, qubit_ground_pop(1.4, b), epsilon = 1e-14);
        let vq = virtual_qubit(1.4, 0.4, b, beta(0.3));
        let (r1, rh) = (qubit_ground_pop(1.4, b), qubit_ground_pop(0.4, beta(0.3)));
        assert_abs_diff_eq!(vq.norm + r1 * rh + (1.0 - r1) * (1.0 - rh), 1.0, epsilon = 1e-12);
        let want = 1.0 / (1.0 + (-0.9 * 1.4 + 0.3 * 0.4f64).exp());
        assert_abs_diff_eq!(vq.ground_pop, want, epsilon = 1e-14);
        assert_abs_diff_eq!(vq.gap, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn extended_machine_examples() {
        let e = extended_machine(&qubit(1.0), &Hamiltonian::new(vec![0.0, 0.4, 1.6]).unwrap()).unwrap();
        assert_abs_diff_eq!(e.qubit_gaps[0], 0.6, epsilon = 1e-15);
        let sys = Hamiltonian::new(vec![0.0, 0.5, 1.0]).unwrap();
        let m = Hamiltonian::new(vec![0.0, 1.3]).unwrap();
        let e = extended_machine(&sys, &m).unwrap();
        assert_abs_diff_eq!(e.qubit_gaps[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(e.qubit_gaps[1], 0.8, epsilon = 1e-15);
        for i in 1..3 {
            let lhs = sys.energies()[i - 1] + m.max_energy();
            let rhs = sys.energies()[i] + e.qubit_gaps[i - 1];
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-15);
        }
        assert!(matches!(extended_machine(&qubit(2.0), &qubit(1.0)), Err(CoolError::GapRestriction(_))));
    }

    #[test]
    fn max_swap_is_energy_conserving_and_matches_dense() {
        let sys = Hamiltonian::new(vec![0.0, 0.5, 1.0]).unwrap();
        let m = Hamiltonian::new(vec![0.0, 1.3]).unwrap();
        let (br, bh) = (beta(1.0), beta(0.25));
        let ext = extended_machine(&sys, &m).unwrap();
        let sigma = gibbs_populations(&sys, br).into_vec();
        let (next, _) = incoherent_max_swap_step_with_heat(&sigma, &sys, &m, br, bh).unwrap();
        let tau_q = bridging_gibbs(&ext, bh);
        let (i, _) = swap_gain(&sigma, &gibbs_populations(&m, br).into_vec(), &tau_q).unwrap();
        let (u, energies) = incoherent_max_swap_unitary(&sys, &m, i).unwrap();
        assert!(commutes_with_hamiltonian(&u, &energies));
        // dense reference on S ⊗ M ⊗ Q1 ⊗ Q2
        let mut rho = DensityMatrix::from_diag(&sigma);
        rho = tensor(&rho, &DensityMatrix::from_diag(gibbs_populations(&m, br).as_slice()));
        for q in &tau_q {
            rho = tensor(&rho, &DensityMatrix::from_diag(q));
        }
        let out = apply_unitary(&rho, &u).unwrap();
        let red = partial_trace(&out, JointIndex::new(3, 8), Side::Left).unwrap();
        for s in 0..3 {
            assert_abs_diff_eq!(red.matrix()[(s, s)].re, next[s], epsilon = 1e-14);
        }
    }

    #[test]
    fn max_swap_converges_at_infinite_hot_temperature() {
        let b = beta(1.0);
        for (sys, m) in [
            (qubit(1.0), Hamiltonian::new(vec![0.0, 0.6, 1.5]).unwrap()),
            (Hamiltonian::new(vec![0.0, 0.5, 1.0]).unwrap(), Hamiltonian::new(vec![0.0, 1.3]).unwrap()),
        ] {
            let init = gibbs_populations(&sys, b);
            let tr = iterate_incoherent_max_swap(&init, &sys, &m, b, beta(0.0), 1e-13, 1_000_000).unwrap();
            assert!(tr.converged);
            let p = &tr.last().populations;
            let ratio = (-m.max_energy()).exp();
            for i in 1..p.len() {
                assert!(p[i] / p[i - 1] <= ratio + 1e-9);
            }
            let star = universal_bound_state(sys.dim(), m.max_energy(), b).unwrap();
            assert!(sum_colder_or_equal(p, star.populations.as_slice()) || {
                p.iter().zip(star.populations.as_slice()).all(|(a, b)| (a - b).abs() < 1e-8)
            });
            if sys.dim() == 2 {
                assert_abs_diff_eq!(p[0], star.populations[0], epsilon = 1e-8);
            }
        }
        // at β_H = β_R nothing moves when every gain is non-positive
        let sys = qubit(1.0);
        let m = Hamiltonian::new(vec![0.0, 0.6, 1.5]).unwrap();
        let star = universal_bound_state(2, 1.5, b).unwrap().populations;
        let out = incoherent_max_swap_step(&star, &sys, &m, b, b).unwrap();
        assert_eq!(out, star);
    }

    fn random_factors<R: Rng>(rng: &mut R) -> (Hamiltonian, FactoredMachine) {
        let ds = rng.random_range(2..=3);
        let sys_gap = [0.5, 1.0][rng.random_range(0..2)];
        let sys = Hamiltonian::new((0..ds).map(|k| k as f64 * sys_gap).collect()).unwrap();
        let nf = if ds == 2 { rng.random_range(1..=2) } else { 1 };
        // resonant gaps so that degenerate blocks exist
        let choices = [0.5, 1.0, 1.5];
        let factors = (0..nf).map(|_| qubit(choices[rng.random_range(0..3)])).collect();
        (sys, FactoredMachine::new(factors).unwrap())
    }

    #[test]
    fn cycle_invariants_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let (sys, machine) = random_factors(&mut rng);
            let nf = machine.factors.len();
            let hot: Vec<bool> = (0..nf).map(|_| rng.random_bool(0.5)).collect();
            let br = beta(rng.random_range(0.3..2.0));
            let bh = beta(br.beta() * rng.random_range(0.0..1.0));
            let mut runner = IncoherentRunner::new(sys.clone(), machine.clone(), BathAssignment::new(hot), br, bh).unwrap();
            let u = random_energy_conserving_unitary(&runner.joint_energies(), &mut rng);
            let sigma = DensityMatrix::from_diag(gibbs_populations(&sys, br).as_slice());
            let out = runner.cycle(&sigma, &u).unwrap();
            assert!(out.sigma_out.max_offdiag() < 1e-12);
            assert!(out.energy_change.abs() < 1e-10);

            // whole machine at room temperature: joint state is fixed
            let room = IncoherentRunner::new(sys.clone(), machine.clone(), BathAssignment::new(vec![false; nf]), br, br).unwrap();
            let joint = tensor(&sigma, &room.machine_state);
            let after = apply_unitary(&joint, &u).unwrap();
            assert!((after.matrix() - joint.matrix()).camax() < 1e-12);

            // whole machine hot: never colder
            let mut hot = IncoherentRunner::new(sys.clone(), machine, BathAssignment::new(vec![true; nf]), br, bh).unwrap();
            let out = hot.cycle(&sigma, &u).unwrap();
            let d = diag_of(&out.sigma_out).unwrap();
            let s0 = diag_of(&sigma).unwrap();
            let (mut a, mut b) = (0.0, 0.0);
            for k in 0..d.len() {
                a += d[k];
                b += s0[k];
                assert!(a <= b + 1e-10);
            }
        }
    }

    #[test]
    fn single_qubit_machine_cannot_cool() {
        let sys = qubit(1.0);
        let m = FactoredMachine::new(vec![qubit(1.0)]).unwrap();
        let br = beta(1.0);
        let r_s = qubit_ground_pop(1.0, br);
        for hot in [false, true] {
            for bh in [0.0, 0.3, 0.7, 1.0] {
                for k in 0..=32 {
                    let th = std::f64::consts::PI * k as f64 / 32.0;
                    for phase in [0.0, 0.9, 2.1] {
                        let mut u = CMatrix::identity(4, 4);
                        let e = Complex64::from_polar(1.0, phase);
                        u[(1, 1)] = Complex64::new(th.cos(), 0.0);
                        u[(2, 2)] = Complex64::new(th.cos(), 0.0);
                        u[(1, 2)] = -e.conj() * th.sin();
                        u[(2, 1)] = e * th.sin();
                        let u = UnitaryMatrix::new(u).unwrap();
                        let sigma = DensityMatrix::from_diag(&[r_s, 1.0 - r_s]);
                        let bh = if hot { beta(bh) } else { br };
                        let out = incoherent_cycle(&sys, &m, &BathAssignment::new(vec![hot]), br, bh, &sigma, &u).unwrap();
                        assert!(out.sigma_out.matrix()[(0, 0)].re <= r_s + 1e-10);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn repeated_cycles_match_closed_form(es in 0.2f64..2.0, m2 in 0.1f64..2.0, br in 0.2f64..3.0, frac in 0.0f64..1.0) {
            let tq = TwoQubitMachine::from_gaps(es, m2, beta(br)).unwrap();
            let bh = beta(br * frac);
            let (mut runner, u) = two_qubit_runner(&tq, bh).unwrap();
            let mut sigma = DensityMatrix::from_diag(&[tq.r_s(), 1.0 - tq.r_s()]);
            let mut heat = 0.0;
            for n in 1..=10 {
                let out = runner.cycle(&sigma, &u).unwrap();
                heat += out.heat_drawn;
                sigma = out.sigma_out;
                let cf = two_qubit_incoherent_closed_form(&tq, bh, Some(n)).unwrap();
                prop_assert!((sigma.matrix()[(0, 0)].re - cf.r_n).abs() < 1e-10);
                prop_assert!((runner.free_energy_cost(heat) - cf.delta_f_n).abs() < 1e-10);
            }
        }
    }
}
