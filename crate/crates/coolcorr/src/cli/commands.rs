//! One runner per subcommand, each producing a [`Table`].

use crate::coherent::{
    endpoint_min_work, iterate_protocol, max_cooling_population, min_work_lp, one_qubit_optimal,
    repeated_two_qubit_coherent, simulate_repeated_two_qubit_coherent, two_qubit_optimal, universal_bound_state,
    MachineSpec, ProtocolTrace, TwoQubitMachine,
};
use crate::correlations::{
    brute_force_max_correlations_with, build_stu_unitary, construct_stu, evaluate_stu, expected_information,
    jaynes_bound, latin_blocks, pure_state_optimum, OracleOptions, StuApproach,
};
use crate::error::{CoolError, Result};
use crate::incoherent::{iterate_incoherent_max_swap, two_qubit_incoherent_closed_form, two_qubit_runner};
use crate::quantum::DensityMatrix;
use crate::spectra::{
    gibbs_populations, qubit_temperature_from_ground_pop, shannon_entropy, Hamiltonian, InverseTemperature,
};

use super::config::{ExperimentConfig, Scenario};
use super::output::{Cell, Table};

/// Points on each branch of the sweep figure when no `targets` grid is given.
pub const DEFAULT_SWEEP_POINTS: usize = 101;

pub fn run(cfg: &ExperimentConfig) -> Result<Table> {
    let table = match cfg.scenario {
        Scenario::CoolCoherent => run_cool_coherent(cfg),
        Scenario::CoolIncoherent => run_cool_incoherent(cfg),
        Scenario::Bound => run_bound(cfg),
        Scenario::SweepFigure => run_sweep_figure(cfg),
        Scenario::Correlate => run_correlate(cfg),
        Scenario::Stu => run_stu(cfg),
        Scenario::Oracle => run_oracle(cfg),
    }?;
    table.check_finite()?;
    Ok(table)
}

/// Maps `f` over `items` on up to `workers` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn columns(names: &[String]) -> Table {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Table::new(&refs)
}

fn system_qubit_gap(system: &Hamiltonian) -> Option<f64> {
    (system.dim() == 2).then(|| system.energies()[1])
}

fn two_qubit_machine(cfg: &ExperimentConfig) -> Result<Option<TwoQubitMachine>> {
    match cfg.machine_gaps {
        None => Ok(None),
        Some((m1, m2)) => {
            let system = cfg.system()?;
            let e_s = system_qubit_gap(&system)
                .ok_or_else(|| CoolError::Dimension("a two-qubit machine needs a qubit system".into()))?;
            Ok(Some(TwoQubitMachine::new(e_s, m1, m2, cfg.beta_r)?))
        }
    }
}

fn machine_spec(cfg: &ExperimentConfig) -> Result<MachineSpec> {
    match two_qubit_machine(cfg)? {
        Some(tq) => Ok(tq.machine_spec()),
        None => Ok(MachineSpec::new(cfg.machine()?, cfg.beta_r)),
    }
}

fn trace_table(trace: &ProtocolTrace, cumulative: &str, bound: &[f64]) -> Table {
    let d = bound.len();
    let mut names: Vec<String> = ["step", "ground_pop", cumulative, "bound_gap"].map(String::from).to_vec();
    names.extend((0..d).map(|k| format!("p{k}")));
    let mut t = columns(&names);
    for s in &trace.steps {
        let gap = s.populations.iter().zip(bound).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let mut row: Vec<Cell> = vec![s.index.into(), s.ground_pop.into(), s.work_cumulative.into(), gap.into()];
        row.extend(s.populations.iter().map(|&p| Cell::from(p)));
        t.push(row);
    }
    t
}

pub fn run_cool_coherent(cfg: &ExperimentConfig) -> Result<Table> {
    match cfg.mode.as_deref().unwrap_or("protocol") {
        "protocol" => {
            let system = cfg.system()?;
            let machine = machine_spec(cfg)?;
            let initial = gibbs_populations(&system, cfg.beta_r);
            let trace = iterate_protocol(cfg.protocol, &initial, &system, &machine, cfg.tol, cfg.max_steps)?;
            let bound = universal_bound_state(system.dim(), machine.e_max(), cfg.beta_r)?;
            Ok(trace_table(&trace, "work_cumulative", bound.populations.as_slice()))
        }
        "targets" => coherent_targets(cfg),
        "repeated" => {
            let tq = two_qubit_machine(cfg)?
                .ok_or_else(|| CoolError::InvalidArgument("repeated mode needs machine_gaps".into()))?;
            let sim = simulate_repeated_two_qubit_coherent(cfg.cycles, &tq)?;
            let mut t = Table::new(&["cycle", "r_n", "t_n", "delta_f_n", "r_n_sim", "delta_f_n_sim"]);
            for (k, &(r_sim, df_sim)) in sim.iter().enumerate() {
                let n = k + 1;
                let (r, df) = repeated_two_qubit_coherent(n, &tq)?;
                let temp = qubit_temperature_from_ground_pop(tq.e_s, r)?;
                t.push(vec![n.into(), r.into(), temp.into(), df.into(), r_sim.into(), df_sim.into()]);
            }
            Ok(t)
        }
        other => Err(CoolError::InvalidArgument(format!("cool-coherent: unknown mode '{other}'"))),
    }
}

fn coherent_targets(cfg: &ExperimentConfig) -> Result<Table> {
    let system = cfg.system()?;
    let tq = two_qubit_machine(cfg)?;
    let machine = machine_spec(cfg)?;
    let qubit = system_qubit_gap(&system);
    let one_qubit_gap = match (&tq, qubit, machine.dim()) {
        (None, Some(_), 2) => Some(machine.hamiltonian.energies()[1]),
        _ => None,
    };
    let mut names = vec!["r_target".to_string(), "delta_f".into(), "delta_f_lp".into()];
    if qubit.is_some() {
        names.push("temperature".into());
    }
    let targets = cfg.require_targets()?.points();
    let rows = par_map(&targets, cfg.workers, |&r| -> Result<Vec<Cell>> {
        let lp = min_work_lp(&system, &machine, r)?;
        let df = match (&tq, qubit, one_qubit_gap) {
            (Some(tq), _, _) => two_qubit_optimal(tq, r)?.delta_f,
            (None, Some(es), Some(em)) => one_qubit_optimal(es, em, cfg.beta_r, r)?.delta_f,
            _ => lp,
        };
        let mut row: Vec<Cell> = vec![r.into(), df.into(), lp.into()];
        if let Some(es) = qubit {
            row.push(qubit_temperature_from_ground_pop(es, r)?.into());
        }
        Ok(row)
    });
    let mut t = columns(&names);
    for row in rows {
        t.push(row?);
    }
    Ok(t)
}

pub fn run_cool_incoherent(cfg: &ExperimentConfig) -> Result<Table> {
    let default = if cfg.machine_gaps.is_some() { "two-qubit" } else { "max-swap" };
    let beta_h = cfg.require_beta_h()?;
    match cfg.mode.as_deref().unwrap_or(default) {
        "two-qubit" => {
            let tq = two_qubit_machine(cfg)?
                .ok_or_else(|| CoolError::InvalidArgument("two-qubit mode needs machine_gaps".into()))?;
            let limit = two_qubit_incoherent_closed_form(&tq, beta_h, None)?;
            let (mut runner, u) = two_qubit_runner(&tq, beta_h)?;
            let mut sigma = DensityMatrix::from_diag(&[tq.r_s(), 1.0 - tq.r_s()]);
            let mut heat = 0.0;
            let mut t = Table::new(&["cycle", "r_n", "t_n", "delta_f_n", "r_n_sim", "delta_f_n_sim", "t_limit"]);
            for n in 1..=cfg.cycles {
                let out = runner.cycle(&sigma, &u)?;
                heat += out.heat_drawn;
                sigma = out.sigma_out;
                let cf = two_qubit_incoherent_closed_form(&tq, beta_h, Some(n))?;
                t.push(vec![
                    n.into(),
                    cf.r_n.into(),
                    cf.t_n.into(),
                    cf.delta_f_n.into(),
                    sigma.matrix()[(0, 0)].re.into(),
                    runner.free_energy_cost(heat).into(),
                    limit.t_n.into(),
                ]);
            }
            Ok(t)
        }
        "max-swap" => {
            let system = cfg.system()?;
            let machine = cfg.machine()?;
            let initial = gibbs_populations(&system, cfg.beta_r);
            let trace =
                iterate_incoherent_max_swap(&initial, &system, &machine, cfg.beta_r, beta_h, cfg.tol, cfg.max_steps)?;
            let bound = universal_bound_state(system.dim(), machine.max_energy(), cfg.beta_r)?;
            Ok(trace_table(&trace, "heat_cumulative", bound.populations.as_slice()))
        }
        other => Err(CoolError::InvalidArgument(format!("cool-incoherent: unknown mode '{other}'"))),
    }
}

pub fn run_bound(cfg: &ExperimentConfig) -> Result<Table> {
    let system = cfg.system()?;
    let machine = machine_spec(cfg)?;
    let initial = gibbs_populations(&system, cfg.beta_r);
    let bound = universal_bound_state(system.dim(), machine.e_max(), cfg.beta_r)?;
    let trace = iterate_protocol(cfg.protocol, &initial, &system, &machine, cfg.tol, cfg.max_steps)?;
    let limit = &trace.last().populations;
    let single = max_cooling_population(&system, &machine).r_star;
    let single_work = endpoint_min_work(&system, &machine).delta_f;
    let mut t = Table::new(&[
        "level",
        "energy",
        "initial_pop",
        "bound_pop",
        "limit_pop",
        "single_step_ground_space",
        "single_step_work",
    ]);
    for k in 0..system.dim() {
        t.push(vec![
            k.into(),
            system.energies()[k].into(),
            initial[k].into(),
            bound.populations[k].into(),
            limit[k].into(),
            single.into(),
            single_work.into(),
        ]);
    }
    Ok(t)
}

/// Inclusive log-spaced grid of `count` points from 1 to `max`.
fn log_grid(count: usize, max: f64) -> Vec<f64> {
    if count == 1 {
        return vec![1.0];
    }
    (0..count).map(|k| max.powf(k as f64 / (count - 1) as f64)).collect()
}

/// Linear interpolation of `ys` over increasing `xs`.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let k = xs.windows(2).position(|w| w[0] <= x && x <= w[1])?;
    let (x0, x1) = (xs[k], xs[k + 1]);
    if x1 == x0 {
        return Some(ys[k]);
    }
    Some(ys[k] + (ys[k + 1] - ys[k]) * (x - x0) / (x1 - x0))
}

/// Incoherent and coherent single-cycle curves of relative temperature
/// against free-energy cost.
///
/// The incoherent parameter is `T_R / T_H`, running from 1 at `T_H = T_R`
/// down to 0 at infinite `T_H`; the coherent parameter is the target ground
/// population.
pub fn run_sweep_figure(cfg: &ExperimentConfig) -> Result<Table> {
    let tq = two_qubit_machine(cfg)?
        .ok_or_else(|| CoolError::InvalidArgument("sweep-figure needs machine_gaps".into()))?;
    let count = cfg.targets.map_or(DEFAULT_SWEEP_POINTS, |g| g.count).max(4);
    let t_r = cfg.beta_r.temperature();
    if !(t_r.is_finite() && t_r > 0.0) {
        return Err(CoolError::InvalidArgument("sweep-figure needs a finite positive room temperature".into()));
    }
    let rel = |r: f64| -> Result<f64> { Ok(qubit_temperature_from_ground_pop(tq.e_s, r)? / t_r) };

    let mut ratios: Vec<f64> = log_grid(count - 1, cfg.t_h_max).iter().map(|x| 1.0 / x).collect();
    ratios.push(0.0);
    let mut inc = Vec::with_capacity(count);
    for &ratio in &ratios {
        let beta_h = InverseTemperature::new(cfg.beta_r.beta() * ratio)?;
        let cf = two_qubit_incoherent_closed_form(&tq, beta_h, Some(1))?;
        inc.push((ratio, rel(cf.r_n)?, cf.delta_f_n));
    }

    let (r_s, r_star) = (tq.r_s(), tq.r_m1());
    let mut coh = Vec::with_capacity(count);
    for k in 0..count {
        let r = r_s + (r_star - r_s) * k as f64 / (count - 1) as f64;
        coh.push((r, rel(r)?, two_qubit_optimal(&tq, r)?.delta_f));
    }

    verify_sweep(&inc, &coh)?;

    let mut t = Table::new(&["branch", "parameter", "t_over_tr", "delta_f"]);
    for (branch, rows) in [("incoherent", &inc), ("coherent", &coh)] {
        for &(p, temp, df) in rows.iter() {
            t.push(vec![branch.into(), p.into(), temp.into(), df.into()]);
        }
    }
    Ok(t)
}

/// Run-time checks on the two sweep branches: endpoint ordering, a crossing
/// of the curves, and a steeper initial incoherent descent.
pub fn verify_sweep(inc: &[(f64, f64, f64)], coh: &[(f64, f64, f64)]) -> Result<()> {
    let (inc_end, coh_end) = (inc.last().expect("non-empty"), coh.last().expect("non-empty"));
    if !(coh_end.1 < inc_end.1 && coh_end.2 < inc_end.2) {
        return Err(CoolError::Internal(format!(
            "coherent endpoint (T/T_R {}, ΔF {}) not below incoherent endpoint (T/T_R {}, ΔF {})",
            coh_end.1, coh_end.2, inc_end.1, inc_end.2
        )));
    }
    let coh_df: Vec<f64> = coh.iter().map(|c| c.2).collect();
    let coh_t: Vec<f64> = coh.iter().map(|c| c.1).collect();
    let diffs: Vec<f64> = inc
        .iter()
        .filter_map(|&(_, temp, df)| interpolate(&coh_df, &coh_t, df).map(|tc| temp - tc))
        .collect();
    let crossing = diffs.windows(2).any(|w| w[0] < 0.0 && w[1] > 0.0);
    if !crossing {
        return Err(CoolError::Internal("no crossing between incoherent and coherent curves".into()));
    }
    let rate = |rows: &[(f64, f64, f64)], k: usize| (rows[0].1 - rows[k].1) / (rows[k].2 - rows[0].2);
    for k in 1..=3 {
        if !(rate(inc, k) > rate(coh, k)) {
            return Err(CoolError::Internal(format!(
                "initial incoherent cooling rate {} does not exceed coherent rate {}",
                rate(inc, k),
                rate(coh, k)
            )));
        }
    }
    Ok(())
}

fn approaches(cfg: &ExperimentConfig, d: usize) -> Result<Vec<StuApproach>> {
    match cfg.approach.as_deref() {
        None | Some("all") => Ok(match d {
            3 => vec![StuApproach::MajorizedMarginal, StuApproach::PassingNorm, StuApproach::Geometric],
            4 => vec![StuApproach::PassingNorm, StuApproach::Geometric],
            _ => vec![StuApproach::Geometric],
        }),
        Some(list) => list.split(',').map(|s| s.trim().parse()).collect(),
    }
}

fn symmetric_system(cfg: &ExperimentConfig) -> Result<Hamiltonian> {
    let h = cfg.system()?;
    if let Some(m) = &cfg.machine_energies {
        if Hamiltonian::new(m.clone())? != h {
            return Err(CoolError::Unsupported("constructions need identical Hamiltonians".into()));
        }
    }
    Ok(h)
}

fn beta_primes(cfg: &ExperimentConfig) -> Result<Vec<InverseTemperature>> {
    match (cfg.beta_prime, cfg.targets) {
        (Some(b), None) => Ok(vec![b]),
        (None, Some(g)) => g.points().into_iter().map(InverseTemperature::new).collect(),
        (Some(_), Some(_)) => Err(CoolError::InvalidArgument("give only one of beta_prime and targets".into())),
        (None, None) => Err(CoolError::InvalidArgument("beta_prime or a targets grid is required".into())),
    }
}

pub fn run_correlate(cfg: &ExperimentConfig) -> Result<Table> {
    let h = symmetric_system(cfg)?;
    let approaches = approaches(cfg, h.dim())?;
    let initial_entropy = 2.0 * shannon_entropy(gibbs_populations(&h, cfg.beta_r).as_slice());
    let blocks = latin_blocks(&h, cfg.beta_r);
    let mut points = Vec::new();
    for b in beta_primes(cfg)? {
        for &a in &approaches {
            points.push((b, a));
        }
    }
    let inner_workers = if cfg.oracle_samples > 0 { cfg.workers } else { 1 };
    let outer_workers = if cfg.oracle_samples > 0 { 1 } else { cfg.workers };
    let rows = par_map(&points, outer_workers, |&(bp, approach)| -> Result<Vec<Cell>> {
        let (cert, rerouted) = construct_stu(&h, cfg.beta_r, bp, approach)?;
        if rerouted {
            eprintln!("note: {} rerouted to geometric at beta_prime = {}", approach.name(), bp.beta());
        }
        let u = build_stu_unitary(&cert, &blocks)?;
        let ev = evaluate_stu(&h, cfg.beta_r, bp, &u)?;
        let jaynes = jaynes_bound(&h, &h, cfg.beta_r, ev.energy)?.bound - initial_entropy;
        let mut row: Vec<Cell> = vec![
            bp.beta().into(),
            ev.energy.into(),
            approach.name().into(),
            rerouted.into(),
            cert.residual.into(),
            ev.mutual_information.into(),
            expected_information(&h, cfg.beta_r, bp).into(),
            jaynes.into(),
            (ev.mutual_information - jaynes).into(),
            ev.marginal_error.into(),
        ];
        if cfg.oracle_samples > 0 {
            let opts = OracleOptions { workers: inner_workers, ..OracleOptions::new(cfg.oracle_samples, cfg.seed) };
            row.push(brute_force_max_correlations_with(&h, &h, cfg.beta_r, ev.energy, &opts)?.best_info.into());
        }
        Ok(row)
    });
    let mut names: Vec<String> = [
        "beta_prime",
        "energy",
        "approach",
        "rerouted",
        "residual",
        "info",
        "info_expected",
        "jaynes_info",
        "bound_gap",
        "marginal_error",
    ]
    .map(String::from)
    .to_vec();
    if cfg.oracle_samples > 0 {
        names.push("oracle_best".into());
    }
    let mut t = columns(&names);
    for row in rows {
        t.push(row?);
    }
    Ok(t)
}

/// Dumps the doubly stochastic matrices of one certificate entry by entry.
pub fn run_stu(cfg: &ExperimentConfig) -> Result<Table> {
    let h = symmetric_system(cfg)?;
    let bp = cfg
        .beta_prime
        .ok_or_else(|| CoolError::InvalidArgument("stu needs beta_prime".into()))?;
    let approach: StuApproach = cfg.approach.as_deref().unwrap_or("geometric").parse()?;
    let (cert, rerouted) = construct_stu(&h, cfg.beta_r, bp, approach)?;
    let mut t = Table::new(&["matrix", "row", "col", "value", "residual", "rerouted"]);
    for (k, m) in cert.matrices.iter().enumerate() {
        let m = m.matrix();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                t.push(vec![k.into(), r.into(), c.into(), m[(r, c)].into(), cert.residual.into(), rerouted.into()]);
            }
        }
    }
    Ok(t)
}

/// Oracle maximum of the mutual information over the `budgets` grid,
/// alongside the entropy ceiling and, from the ground state, the exact optimum.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<Table> {
    let h_a = cfg.system()?;
    let h_b = match &cfg.machine_energies {
        Some(_) => cfg.machine()?,
        None => h_a.clone(),
    };
    let budgets = cfg
        .budgets
        .ok_or_else(|| CoolError::InvalidArgument("oracle needs a budgets grid".into()))?
        .points();
    let samples = if cfg.oracle_samples == 0 { 1000 } else { cfg.oracle_samples };
    let opts = OracleOptions { workers: cfg.workers, ..OracleOptions::new(samples, cfg.seed) };
    let pure = cfg.beta_r.is_infinite();
    let mut names: Vec<String> =
        ["c", "best_info", "best_energy", "jaynes_info", "feasible"].map(String::from).to_vec();
    if pure {
        names.push("pure_state_info".into());
    }
    let mut t = columns(&names);
    for c in budgets {
        let res = brute_force_max_correlations_with(&h_a, &h_b, cfg.beta_r, c, &opts)?;
        let jaynes = jaynes_bound(&h_a, &h_b, cfg.beta_r, c)?.bound - res.initial_entropy;
        let mut row: Vec<Cell> = vec![
            c.into(),
            res.best_info.into(),
            res.best_energy.into(),
            jaynes.max(0.0).into(),
            res.feasible.into(),
        ];
        if pure {
            let info = if c > 0.0 { pure_state_optimum(&h_a, &h_b, c)?.info } else { 0.0 };
            row.push(info.into());
        }
        t.push(row);
    }
    Ok(t)
}
