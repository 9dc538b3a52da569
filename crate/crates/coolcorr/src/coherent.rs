//! Coherent cooling: a system and a room-temperature machine evolve under an
//! arbitrary joint unitary, paid for with work.
//!
//! Joint states use [`JointIndex`] with the system on the left.

use nalgebra as na;
use num_complex::Complex64;

use crate::error::{CoolError, Result};
use crate::lp::{self, LpOutcome};
use crate::majorization::{descending_order, horn_transfer, majorizes, passive_sort, HornTransfer};
use crate::quantum::{marginal, tensor_diag, CMatrix, JointIndex, Side, UnitaryMatrix};
use crate::spectra::{
    gibbs_populations, qubit_ground_pop, Hamiltonian, InverseTemperature, PopulationVector,
    PROB_TOL,
};

/// Machine Hamiltonian together with the room inverse temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineSpec {
    pub hamiltonian: Hamiltonian,
    pub beta_r: InverseTemperature,
}

impl MachineSpec {
    pub fn new(hamiltonian: Hamiltonian, beta_r: InverseTemperature) -> Self {
        Self { hamiltonian, beta_r }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Largest machine energy.
    pub fn e_max(&self) -> f64 {
        self.hamiltonian.max_energy()
    }

    /// Thermal machine populations at room temperature.
    pub fn gibbs(&self) -> Vec<f64> {
        gibbs_populations(&self.hamiltonian, self.beta_r).into_vec()
    }
}

/// Geometric profile with ratio `exp(-β_R 𝓔_max)`: the coldest reachable
/// population vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub populations: PopulationVector,
}

pub fn universal_bound_state(d_s: usize, e_max: f64, beta_r: InverseTemperature) -> Result<BoundState> {
    if e_max < 0.0 || !e_max.is_finite() {
        return Err(CoolError::InvalidArgument(format!("e_max must be finite and non-negative, got {e_max}")));
    }
    if d_s < 1 {
        return Err(CoolError::Dimension("system dimension must be positive".into()));
    }
    let b = beta_r.beta();
    let ratio = if e_max == 0.0 || b == 0.0 {
        1.0
    } else if b.is_infinite() {
        0.0
    } else {
        (-b * e_max).exp()
    };
    let w: Vec<f64> = (0..d_s).map(|k| ratio.powi(k as i32)).collect();
    let z: f64 = w.iter().sum();
    Ok(BoundState {
        populations: PopulationVector::from_vec_unchecked(w.into_iter().map(|x| x / z).collect()),
    })
}

/// Largest reachable ground population and a permutation realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxCooling {
    pub r_star: f64,
    /// `permutation[k]` is the destination of joint index `k`.
    pub permutation: Vec<usize>,
}

fn joint_energies(system: &Hamiltonian, machine: &Hamiltonian) -> Vec<f64> {
    crate::quantum::joint_hamiltonian(system, machine).0
}

/// Placement that puts the `d_M` largest joint populations on the system
/// ground block, each block ordered inversely to energy.
fn min_work_placement(p: &[f64], energies: &[f64], idx: JointIndex) -> Vec<usize> {
    let order = descending_order(p);
    let dm = idx.d_right;
    let mut top_slots: Vec<usize> = (0..dm).map(|j| idx.flat(0, j)).collect();
    top_slots.sort_by(|&a, &b| energies[a].partial_cmp(&energies[b]).unwrap().then(a.cmp(&b)));
    let mut rest_slots: Vec<usize> = (dm..idx.dim()).collect();
    rest_slots.sort_by(|&a, &b| energies[a].partial_cmp(&energies[b]).unwrap().then(a.cmp(&b)));
    let mut perm = vec![0usize; p.len()];
    for (rank, &src) in order.iter().enumerate() {
        perm[src] = if rank < dm { top_slots[rank] } else { rest_slots[rank - dm] };
    }
    perm
}

fn permute(p: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for (src, &dst) in perm.iter().enumerate() {
        out[dst] = p[src];
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum of the `d_M` largest entries of `ρ_S ⊗ τ_M`, with `ρ_S` thermal.
pub fn max_cooling_population(system: &Hamiltonian, machine: &MachineSpec) -> MaxCooling {
    let rho_s = gibbs_populations(system, machine.beta_r);
    let p = tensor_diag(rho_s.as_slice(), &machine.gibbs());
    let e = joint_energies(system, &machine.hamiltonian);
    let idx = JointIndex::new(system.dim(), machine.dim());
    let permutation = min_work_placement(&p, &e, idx);
    let r_star = passive_sort(&p)[..machine.dim()].iter().sum();
    MaxCooling { r_star, permutation }
}

/// Joint populations reaching the maximal ground population at minimal work.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointMinWork {
    pub populations: Vec<f64>,
    pub delta_f: f64,
}

pub fn endpoint_min_work(system: &Hamiltonian, machine: &MachineSpec) -> EndpointMinWork {
    let rho_s = gibbs_populations(system, machine.beta_r);
    let p = tensor_diag(rho_s.as_slice(), &machine.gibbs());
    let e = joint_energies(system, &machine.hamiltonian);
    let idx = JointIndex::new(system.dim(), machine.dim());
    let perm = min_work_placement(&p, &e, idx);
    let populations = permute(&p, &perm);
    let delta_f = dot(&populations, &e) - dot(&p, &e);
    EndpointMinWork { populations, delta_f }
}

/// Minimal work over all doubly stochastic images of the thermal joint state
/// with system ground population at least `r_target`. Solved as a linear
/// program; used as an independent reference for the closed forms.
pub fn min_work_lp(system: &Hamiltonian, machine: &MachineSpec, r_target: f64) -> Result<f64> {
    let rho_s = gibbs_populations(system, machine.beta_r);
    let p = tensor_diag(rho_s.as_slice(), &machine.gibbs());
    let e = joint_energies(system, &machine.hamiltonian);
    let n = p.len();
    let dm = machine.dim();
    // variables: M (row-major n*n), slack; rows: n row sums, n column sums, ground constraint
    let nv = n * n + 1;
    let mut a = na::DMatrix::<f64>::zeros(2 * n + 1, nv);
    let mut b = vec![0.0; 2 * n + 1];
    let mut c = vec![0.0; nv];
    for i in 0..n {
        for j in 0..n {
            let v = i * n + j;
            a[(i, v)] = 1.0;
            a[(n + j, v)] = 1.0;
            c[v] = e[i] * p[j];
            if i < dm {
                a[(2 * n, v)] = p[j];
            }
        }
        b[i] = 1.0;
        b[n + i] = 1.0;
    }
    a[(2 * n, n * n)] = -1.0;
    b[2 * n] = r_target;
    match lp::minimize(&c, &a, &b)? {
        LpOutcome::Optimal { value, .. } => Ok(value - dot(&p, &e)),
        LpOutcome::Infeasible(_) => Err(CoolError::Infeasible(format!(
            "ground population {r_target} is not reachable"
        ))),
        LpOutcome::Unbounded => Err(CoolError::Internal("work LP unbounded".into())),
    }
}

/// Optimal partial swap for a one-qubit machine.
#[derive(Debug, Clone, PartialEq)]
pub struct OneQubitSolution {
    /// Rotation angle `t = arcsin √μ`.
    pub swap_parameter: f64,
    pub mu: f64,
    pub delta_f: f64,
    pub final_state: PopulationVector,
}

impl OneQubitSolution {
    /// Joint unitary rotating `|01⟩` and `|10⟩` by the swap angle.
    pub fn unitary(&self) -> UnitaryMatrix {
        partial_swap_unitary(4, &[(1, 2)], self.swap_parameter)
    }
}

/// Real rotation by angle `t` inside each listed index pair.
pub fn partial_swap_unitary(n: usize, pairs: &[(usize, usize)], t: f64) -> UnitaryMatrix {
    let mut m = CMatrix::identity(n, n);
    let (c, s) = (Complex64::new(t.cos(), 0.0), Complex64::new(t.sin(), 0.0));
    for &(a, b) in pairs {
        m[(a, a)] = c;
        m[(b, b)] = c;
        m[(a, b)] = -s;
        m[(b, a)] = s;
    }
    UnitaryMatrix::new(m).expect("rotation is unitary")
}

fn qubit_state(r: f64) -> PopulationVector {
    PopulationVector::from_vec_unchecked(vec![r, 1.0 - r])
}

fn check_target(r_target: f64, lo: f64, hi: f64) -> Result<()> {
    if !(r_target >= lo - PROB_TOL && r_target <= hi + PROB_TOL) {
        return Err(CoolError::Infeasible(format!(
            "target ground population {r_target} outside [{lo}, {hi}]"
        )));
    }
    Ok(())
}

pub fn one_qubit_optimal(
    system_gap: f64,
    machine_gap: f64,
    beta_r: InverseTemperature,
    r_target: f64,
) -> Result<OneQubitSolution> {
    if !(machine_gap > system_gap) || !(system_gap > 0.0) {
        return Err(CoolError::GapRestriction(format!(
            "machine gap {machine_gap} must exceed system gap {system_gap} > 0"
        )));
    }
    let r_s = qubit_ground_pop(system_gap, beta_r);
    let r_m = qubit_ground_pop(machine_gap, beta_r);
    check_target(r_target, r_s, r_m)?;
    let r = r_target.clamp(r_s, r_m);
    let mu = if r_m > r_s { (r - r_s) / (r_m - r_s) } else { 0.0 };
    Ok(OneQubitSolution {
        swap_parameter: mu.sqrt().asin(),
        mu,
        delta_f: (r - r_s) * (machine_gap - system_gap),
        final_state: qubit_state(r),
    })
}

/// Gaps of a two-qubit machine obeying `𝓔_M1 = E_S + 𝓔_M2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitMachine {
    pub e_s: f64,
    pub m1: f64,
    pub m2: f64,
    pub beta_r: InverseTemperature,
}

impl TwoQubitMachine {
    pub fn new(e_s: f64, m1: f64, m2: f64, beta_r: InverseTemperature) -> Result<Self> {
        if !(e_s > 0.0 && m2 > 0.0) {
            return Err(CoolError::InvalidArgument("gaps must be positive".into()));
        }
        if (m1 - e_s - m2).abs() > 1e-9 {
            return Err(CoolError::GapRestriction(format!(
                "need M1 = E_S + M2, got M1 = {m1}, E_S + M2 = {}",
                e_s + m2
            )));
        }
        Ok(Self { e_s, m1, m2, beta_r })
    }

    pub fn from_gaps(e_s: f64, m2: f64, beta_r: InverseTemperature) -> Result<Self> {
        Self::new(e_s, e_s + m2, m2, beta_r)
    }

    pub fn r_s(&self) -> f64 {
        qubit_ground_pop(self.e_s, self.beta_r)
    }

    pub fn r_m1(&self) -> f64 {
        qubit_ground_pop(self.m1, self.beta_r)
    }

    pub fn r_m2(&self) -> f64 {
        qubit_ground_pop(self.m2, self.beta_r)
    }

    /// Energies of `|s m1 m2⟩` at index `4s + 2m1 + m2`.
    pub fn joint_energies(&self) -> Vec<f64> {
        (0..8)
            .map(|k| {
                let (s, a, b) = ((k >> 2) & 1, (k >> 1) & 1, k & 1);
                s as f64 * self.e_s + a as f64 * self.m1 + b as f64 * self.m2
            })
            .collect()
    }

    /// Thermal populations of the three qubits with the system at ground
    /// population `r`.
    pub fn joint_populations(&self, r: f64) -> Vec<f64> {
        let q = [
            [r, 1.0 - r],
            [self.r_m1(), 1.0 - self.r_m1()],
            [self.r_m2(), 1.0 - self.r_m2()],
        ];
        (0..8)
            .map(|k| q[0][(k >> 2) & 1] * q[1][(k >> 1) & 1] * q[2][k & 1])
            .collect()
    }

    /// Machine as a single four-level system (energies `0, M2, M1, M1+M2`).
    pub fn machine_spec(&self) -> MachineSpec {
        MachineSpec::new(
            Hamiltonian::new(vec![0.0, self.m2, self.m1, self.m1 + self.m2]).expect("sorted"),
            self.beta_r,
        )
    }
}

/// Which machine qubit a partial swap exchanges with the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapTarget {
    M1,
    M2,
}

impl SwapTarget {
    /// Index pairs of the 8-dim joint basis exchanged by the swap.
    pub fn pairs(self) -> [(usize, usize); 2] {
        match self {
            SwapTarget::M1 => [(2, 4), (3, 5)],
            SwapTarget::M2 => [(1, 4), (3, 6)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitSolution {
    /// Partial swaps applied in order, each with its rotation angle.
    pub schedule: Vec<(SwapTarget, f64)>,
    pub delta_f: f64,
    pub final_state: PopulationVector,
}

impl TwoQubitSolution {
    pub fn unitary(&self) -> UnitaryMatrix {
        let mut u = UnitaryMatrix::identity(8);
        for &(target, t) in &self.schedule {
            let step = partial_swap_unitary(8, &target.pairs(), t);
            u = step.compose(&u).expect("same dimension");
        }
        u
    }
}

pub fn two_qubit_optimal(machine: &TwoQubitMachine, r_target: f64) -> Result<TwoQubitSolution> {
    let (r_s, r_m1, r_m2) = (machine.r_s(), machine.r_m1(), machine.r_m2());
    check_target(r_target, r_s, r_m1)?;
    let r = r_target.clamp(r_s, r_m1);
    let angle = |mu: f64| mu.clamp(0.0, 1.0).sqrt().asin();
    let mut schedule = Vec::new();
    let delta_f;
    if r <= r_s {
        delta_f = 0.0;
    } else if machine.m2 <= machine.e_s {
        schedule.push((SwapTarget::M1, angle((r - r_s) / (r_m1 - r_s))));
        delta_f = (r - r_s) * (machine.m1 - machine.e_s);
    } else if r <= r_m2 {
        schedule.push((SwapTarget::M2, angle((r - r_s) / (r_m2 - r_s))));
        delta_f = (r - r_s) * (machine.m2 - machine.e_s);
    } else {
        schedule.push((SwapTarget::M2, std::f64::consts::FRAC_PI_2));
        schedule.push((SwapTarget::M1, angle((r - r_m2) / (r_m1 - r_m2))));
        delta_f = (r_m2 - r_s) * (machine.m2 - machine.e_s) + (r - r_m2) * (machine.m1 - machine.e_s);
    }
    Ok(TwoQubitSolution { schedule, delta_f, final_state: qubit_state(r) })
}

/// Population vector after one step, together with the work it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub populations: Vec<f64>,
    pub work: f64,
}

fn validate_sigma(sigma: &[f64], system_dim: Option<usize>) -> Result<()> {
    if sigma.len() < 2 {
        return Err(CoolError::Dimension("system needs at least two levels".into()));
    }
    if let Some(d) = system_dim {
        if d != sigma.len() {
            return Err(CoolError::Dimension(format!(
                "state has {} levels but the system has {d}",
                sigma.len()
            )));
        }
    }
    Ok(())
}

/// Work of a step: system energy change plus machine energy change before
/// the machine rethermalizes.
fn step_work(system: &[f64], before: &[f64], after: &[f64], machine_e: &[f64], tau: &[f64], machine_after: &[f64]) -> f64 {
    dot(after, system) - dot(before, system) + dot(machine_after, machine_e) - dot(tau, machine_e)
}

/// Protocol A: sort all joint populations onto the joint basis order and
/// keep the system marginal.
pub fn protocol_a_step_with_work(sigma: &[f64], system: &Hamiltonian, machine: &MachineSpec) -> Result<StepOutcome> {
    validate_sigma(sigma, Some(system.dim()))?;
    let tau = machine.gibbs();
    let idx = JointIndex::new(sigma.len(), tau.len());
    let sorted = passive_sort(&tensor_diag(sigma, &tau));
    let populations = marginal(&sorted, idx, Side::Left);
    let m_after = marginal(&sorted, idx, Side::Right);
    let work = step_work(system.energies(), sigma, &populations, machine.hamiltonian.energies(), &tau, &m_after);
    Ok(StepOutcome { populations, work })
}

pub fn protocol_a_step(sigma: &PopulationVector, machine: &MachineSpec) -> PopulationVector {
    let tau = machine.gibbs();
    let idx = JointIndex::new(sigma.len(), tau.len());
    let sorted = passive_sort(&tensor_diag(sigma.as_slice(), &tau));
    PopulationVector::from_vec_unchecked(marginal(&sorted, idx, Side::Left))
}

/// Index `i ≥ 1` maximizing `σ_i τ_0 - σ_{i-1} τ_last` over positive values.
fn max_swap_index(sigma: &[f64], tau0: f64, tau_last: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 1..sigma.len() {
        let delta = sigma[i] * tau0 - sigma[i - 1] * tau_last;
        if delta > 0.0 && best.is_none_or(|(_, b)| delta > b) {
            best = Some((i, delta));
        }
    }
    best
}

/// Protocol B: passify, exchange `|i-1, last⟩ ↔ |i, 0⟩` for the most
/// favourable `i`, passify again.
pub fn protocol_b_step_with_work(sigma: &[f64], system: &Hamiltonian, machine: &MachineSpec) -> Result<StepOutcome> {
    validate_sigma(sigma, Some(system.dim()))?;
    let tau = machine.gibbs();
    let dm = tau.len();
    let s = passive_sort(sigma);
    let mut m_after = tau.clone();
    let mut out = s.clone();
    if let Some((i, delta)) = max_swap_index(&s, tau[0], tau[dm - 1]) {
        out[i - 1] += delta;
        out[i] -= delta;
        m_after[dm - 1] += delta;
        m_after[0] -= delta;
    }
    let populations = passive_sort(&out);
    let work = step_work(system.energies(), sigma, &populations, machine.hamiltonian.energies(), &tau, &m_after);
    Ok(StepOutcome { populations, work })
}

pub fn protocol_b_step(sigma: &PopulationVector, machine: &MachineSpec) -> PopulationVector {
    let tau = machine.gibbs();
    let dm = tau.len();
    let mut s = passive_sort(sigma.as_slice());
    if let Some((i, delta)) = max_swap_index(&s, tau[0], tau[dm - 1]) {
        s[i - 1] += delta;
        s[i] -= delta;
    }
    PopulationVector::from_vec_unchecked(passive_sort(&s))
}

/// Convergent cooling protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Optimal reordering of the whole joint spectrum.
    A,
    /// Single max-swap per step.
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub index: usize,
    pub populations: Vec<f64>,
    pub ground_pop: f64,
    pub work_cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTrace {
    /// Step 0 is the initial state.
    pub steps: Vec<TraceStep>,
    pub converged: bool,
}

impl ProtocolTrace {
    pub fn last(&self) -> &TraceStep {
        self.steps.last().expect("trace holds the initial state")
    }
}

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

/// Repeats a protocol until successive vectors differ by less than `tol` in
/// max norm, or `max_steps` is reached.
pub fn iterate_protocol(
    protocol: Protocol,
    initial: &PopulationVector,
    system: &Hamiltonian,
    machine: &MachineSpec,
    tol: f64,
    max_steps: usize,
) -> Result<ProtocolTrace> {
    if !(tol > 0.0) {
        return Err(CoolError::InvalidArgument("tolerance must be positive".into()));
    }
    let mut cur = initial.as_slice().to_vec();
    let mut work = 0.0;
    let mut steps = vec![TraceStep { index: 0, populations: cur.clone(), ground_pop: cur[0], work_cumulative: 0.0 }];
    let mut converged = false;
    for k in 1..=max_steps {
        let out = match protocol {
            Protocol::A => protocol_a_step_with_work(&cur, system, machine)?,
            Protocol::B => protocol_b_step_with_work(&cur, system, machine)?,
        };
        let diff = out
            .populations
            .iter()
            .zip(&cur)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        work += out.work;
        cur = out.populations;
        steps.push(TraceStep { index: k, populations: cur.clone(), ground_pop: cur[0], work_cumulative: work });
        if diff < tol {
            converged = true;
            break;
        }
    }
    Ok(ProtocolTrace { steps, converged })
}

/// Closed-form `r_n` and `ΔF_n` after `n` coherent cycles of a two-qubit
/// machine: first the optimal cycle, then repeated `|011⟩ ↔ |100⟩` swaps.
pub fn repeated_two_qubit_coherent(n: usize, machine: &TwoQubitMachine) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(CoolError::InvalidArgument("need at least one cycle".into()));
    }
    let (r1, r2) = (machine.r_m1(), machine.r_m2());
    let norm = r1 * r2 + (1.0 - r1) * (1.0 - r2);
    let r_v = r1 * r2 / norm;
    let r_n = r_v + (1.0 - norm).powi(n as i32 - 1) * (r1 - r_v);
    let df_star = two_qubit_optimal(machine, r1)?.delta_f;
    Ok((r_n, df_star + 2.0 * machine.m2 * (r_n - r1)))
}

/// Temperature reached after infinitely many coherent cycles.
pub fn repeated_two_qubit_coherent_limit_temperature(machine: &TwoQubitMachine) -> f64 {
    machine.e_s * machine.beta_r.temperature() / (machine.m1 + machine.m2)
}

/// Cycle-by-cycle simulation on the 8-dim joint diagonal; returns `(r_k, ΔF_k)`
/// for `k = 1..=n`.
pub fn simulate_repeated_two_qubit_coherent(n: usize, machine: &TwoQubitMachine) -> Result<Vec<(f64, f64)>> {
    let e = machine.joint_energies();
    let first = two_qubit_optimal(machine, machine.r_m1())?;
    let mut r = machine.r_s();
    let mut work = 0.0;
    let mut out = Vec::with_capacity(n);
    for k in 1..=n {
        let p = machine.joint_populations(r);
        let mut q = p.clone();
        if k == 1 {
            for &(target, _) in &first.schedule {
                for (a, b) in target.pairs() {
                    q.swap(a, b);
                }
            }
        } else {
            q.swap(3, 4);
        }
        work += dot(&q, &e) - dot(&p, &e);
        r = q[..4].iter().sum();
        out.push((r, work));
    }
    Ok(out)
}

/// Finds a coherent cycle whose system marginal equals `target`: a joint
/// diagonal majorized by `ρ_S ⊗ τ_M` with that marginal, plus the Horn
/// transfer producing it.
pub fn coherent_reproduction(target: &[f64], rho_s: &[f64], tau_m: &[f64]) -> Result<(Vec<f64>, HornTransfer)> {
    if target.len() != rho_s.len() {
        return Err(CoolError::Dimension("target and system dimensions differ".into()));
    }
    let dm = tau_m.len();
    let p = tensor_diag(rho_s, tau_m);
    let v: Vec<f64> = target
        .iter()
        .flat_map(|&q| std::iter::repeat_n(q / dm as f64, dm))
        .collect();
    if !majorizes(&p, &v).holds {
        return Err(CoolError::Infeasible("marginal is not reachable coherently".into()));
    }
    let h = horn_transfer(&v, &p)?;
    Ok((v, h))
}
