//! Brute-force search for the most correlating unitary under an energy
//! budget: Haar sampling, geodesic projection onto the budget, and
//! coordinate descent over two-level rotations.

use nalgebra as na;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoolError, Result};
use crate::quantum::{haar_unitary_with, tensor_diag, CMatrix, UnitaryMatrix};
use crate::spectra::{gibbs_populations, shannon_entropy, Hamiltonian, InverseTemperature};

/// Largest joint dimension accepted.
pub const ORACLE_MAX_DIM: usize = 16;
const PENALTY: f64 = 100.0;
const ENERGY_SLACK: f64 = 1e-12;
const PROJECTION_STEPS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub samples: usize,
    pub seed: u64,
    /// Sample budget is split across this many threads by seed stride.
    pub workers: usize,
    /// Number of best samples refined by descent.
    pub descent_starts: usize,
    pub max_sweeps: usize,
}

impl OracleOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, workers: 1, descent_starts: 4, max_sweeps: 300 }
    }
}

/// Summary of the best unitary found.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitarySummary {
    /// Descending spectra of the two marginals.
    pub spectrum_a: Vec<f64>,
    pub spectrum_b: Vec<f64>,
    pub marginal_entropy_sum: f64,
    /// `max |U - 1|` entrywise.
    pub distance_from_identity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Best mutual information found; a lower bound on the optimum.
    pub best_info: f64,
    pub best_energy: f64,
    pub initial_energy: f64,
    pub initial_entropy: f64,
    /// False when the budget lies below the initial energy; then nothing is
    /// feasible and `best_info` is zero.
    pub feasible: bool,
    pub best_unitary_summary: UnitarySummary,
    pub best_unitary: UnitaryMatrix,
}

#[derive(Debug, Clone, Copy)]
struct Score {
    info: f64,
    energy: f64,
}

/// Scores states reached from the initial state. The search only tracks the
/// columns of `U` on the initial support, an `n × k` isometry `V` whose
/// column `j` is column `support[j].0` of `U`.
struct Evaluator {
    da: usize,
    db: usize,
    energies: Vec<f64>,
    /// Initial populations with their column indices, zeros dropped.
    support: Vec<(usize, f64)>,
    initial_entropy: f64,
    budget: f64,
}

fn hermitian_entropy(m: CMatrix) -> (f64, Vec<f64>) {
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = na::linalg::SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let s = ev.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    (s, ev)
}

impl Evaluator {
    fn restrict(&self, u: &CMatrix) -> CMatrix {
        CMatrix::from_fn(u.nrows(), self.support.len(), |r, j| u[(r, self.support[j].0)])
    }

    /// Unitary whose support columns are `v`, completed by Gram–Schmidt on
    /// the standard basis.
    fn complete(&self, v: &CMatrix) -> CMatrix {
        let n = v.nrows();
        let mut basis: Vec<na::DVector<Complex64>> = v.column_iter().map(|c| c.into_owned()).collect();
        let k = basis.len();
        for i in 0..n {
            if basis.len() == n {
                break;
            }
            let mut w = na::DVector::<Complex64>::zeros(n);
            w[i] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&w);
                    w -= b * c;
                }
            }
            let norm = w.norm();
            if norm > 1e-6 {
                basis.push(w / Complex64::new(norm, 0.0));
            }
        }
        let mut u = CMatrix::zeros(n, n);
        let mut rest = basis[k..].iter();
        for col in 0..n {
            let src = match self.support.iter().position(|&(l, _)| l == col) {
                Some(j) => &basis[j],
                None => rest.next().expect("complement has the right size"),
            };
            u.set_column(col, src);
        }
        u
    }

    fn marginals(&self, v: &CMatrix) -> (CMatrix, CMatrix) {
        let (da, db) = (self.da, self.db);
        let mut ra = CMatrix::zeros(da, da);
        let mut rb = CMatrix::zeros(db, db);
        for (j, &(_, q)) in self.support.iter().enumerate() {
            let col = v.column(j);
            for a in 0..da {
                for a2 in 0..da {
                    let mut s = Complex64::new(0.0, 0.0);
                    for b in 0..db {
                        s += col[a * db + b] * col[a2 * db + b].conj();
                    }
                    ra[(a, a2)] += s * q;
                }
            }
            for b in 0..db {
                for b2 in 0..db {
                    let mut s = Complex64::new(0.0, 0.0);
                    for a in 0..da {
                        s += col[a * db + b] * col[a * db + b2].conj();
                    }
                    rb[(b, b2)] += s * q;
                }
            }
        }
        (ra, rb)
    }

    fn energy(&self, v: &CMatrix) -> f64 {
        let mut e = 0.0;
        for (j, &(_, q)) in self.support.iter().enumerate() {
            for (k, ek) in self.energies.iter().enumerate() {
                e += q * v[(k, j)].norm_sqr() * ek;
            }
        }
        e
    }

    fn score(&self, u: &CMatrix) -> Score {
        let (ra, rb) = self.marginals(u);
        let info = hermitian_entropy(ra).0 + hermitian_entropy(rb).0 - self.initial_entropy;
        Score { info, energy: self.energy(u) }
    }

    fn objective(&self, s: Score) -> f64 {
        s.info - PENALTY * (s.energy - self.budget).max(0.0)
    }

    fn feasible(&self, s: Score) -> bool {
        s.energy <= self.budget + ENERGY_SLACK
    }

    /// Support columns of `U^t` for the largest `t` keeping the energy
    /// within budget.
    fn project(&self, u: &CMatrix) -> CMatrix {
        let n = u.nrows();
        let (q, t) = na::Schur::new(u.clone()).unpack();
        let phases: Vec<f64> = (0..n).map(|k| t[(k, k)].arg()).collect();
        let qh = self.restrict(&q.adjoint());
        let power = |s: f64| {
            let d = CMatrix::from_diagonal(&na::DVector::from_iterator(
                n,
                phases.iter().map(|&p| Complex64::from_polar(1.0, s * p)),
            ));
            &q * (d * &qh)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..PROJECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.energy(&power(mid)) <= self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        power(lo)
    }

    fn descend(&self, start: CMatrix, max_sweeps: usize) -> (CMatrix, Score) {
        let n = start.nrows();
        let mut u = start;
        let mut cur = self.score(&u);
        let mut f = self.objective(cur);
        let mut best = (u.clone(), cur);
        let mut delta = 0.3;
        let mut sweeps = 0;
        while delta > 1e-7 && sweeps < max_sweeps {
            sweeps += 1;
            let mut improved = false;
            for a in 0..n {
                for b in (a + 1)..n {
                    for &(th, ph) in &[(delta, 0.0), (-delta, 0.0), (delta, std::f64::consts::FRAC_PI_2), (-delta, std::f64::consts::FRAC_PI_2)] {
                        let v = rotate_rows(&u, a, b, th, ph);
                        let s = self.score(&v);
                        let g = self.objective(s);
                        if g > f + 1e-15 {
                            u = v;
                            cur = s;
                            f = g;
                            improved = true;
                            if self.feasible(cur) && cur.info > best.1.info {
                                best = (u.clone(), cur);
                            }
                        }
                    }
                }
            }
            if !improved {
                delta *= 0.5;
            }
        }
        if self.feasible(cur) && cur.info > best.1.info {
            best = (u, cur);
        }
        self.refine(best, max_sweeps)
    }

    /// Central-difference gradients of information and energy over the
    /// two-level and phase generators.
    fn gradients(&self, u: &CMatrix, gens: &[Generator]) -> (Vec<f64>, Vec<f64>) {
        let h = 1e-6;
        let mut gi = Vec::with_capacity(gens.len());
        let mut ge = Vec::with_capacity(gens.len());
        for g in gens {
            let p = self.score(&g.apply(u, h));
            let m = self.score(&g.apply(u, -h));
            gi.push((p.info - m.info) / (2.0 * h));
            ge.push((p.energy - m.energy) / (2.0 * h));
        }
        (gi, ge)
    }

    /// Projected gradient ascent that slides along the energy budget.
    fn refine(&self, start: (CMatrix, Score), max_iters: usize) -> (CMatrix, Score) {
        let n = start.0.nrows();
        let gens = generators(n);
        let (mut u, mut cur) = start;
        let mut step = 0.05;
        for _ in 0..max_iters {
            if step < 1e-10 {
                break;
            }
            let (gi, ge) = self.gradients(&u, &gens);
            let ee: f64 = ge.iter().map(|x| x * x).sum();
            let gee: f64 = gi.iter().zip(&ge).map(|(a, b)| a * b).sum();
            let on_boundary = cur.energy >= self.budget - 1e-9;
            let dir: Vec<f64> = if on_boundary && gee > 0.0 && ee > 0.0 {
                gi.iter().zip(&ge).map(|(a, b)| a - gee / ee * b).collect()
            } else {
                gi.clone()
            };
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                break;
            }
            let flow = SkewFlow::new(&combine(&gens, &dir, n));
            let down = SkewFlow::new(&combine(&gens, &ge, n));
            let mut accepted = false;
            while step >= 1e-10 {
                let cand = flow.apply(step / norm, &u);
                if let Some((v, s)) = self.restore(cand, &down) {
                    if s.info > cur.info + 1e-15 {
                        u = v;
                        cur = s;
                        step *= 1.5;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (u, cur)
    }

    /// Moves down the energy gradient until the budget holds.
    fn restore(&self, u: CMatrix, down: &SkewFlow) -> Option<(CMatrix, Score)> {
        let s = self.score(&u);
        if self.feasible(s) {
            return Some((u, s));
        }
        let at = |t: f64| down.apply(-t, &u);
        let mut hi = 1e-8;
        while self.energy(&at(hi)) > self.budget {
            hi *= 2.0;
            if hi > 10.0 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.energy(&at(mid)) > self.budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = at(hi);
        let s = self.score(&v);
        self.feasible(s).then_some((v, s))
    }
}

/// Infinitesimal generator: a two-level rotation (`a < b`) or a phase on row `a`.
#[derive(Debug, Clone, Copy)]
struct Generator {
    a: usize,
    b: usize,
    phi: f64,
}

impl Generator {
    fn apply(&self, u: &CMatrix, t: f64) -> CMatrix {
        if self.a == self.b {
            let mut v = u.clone();
            let e = Complex64::from_polar(1.0, t);
            for l in 0..u.ncols() {
                v[(self.a, l)] *= e;
            }
            v
        } else {
            rotate_rows(u, self.a, self.b, t, self.phi)
        }
    }

    /// Skew-Hermitian matrix of the generator.
    fn matrix(&self, n: usize) -> CMatrix {
        let mut k = CMatrix::zeros(n, n);
        if self.a == self.b {
            k[(self.a, self.a)] = Complex64::new(0.0, 1.0);
        } else {
            let e = Complex64::from_polar(1.0, self.phi);
            k[(self.a, self.b)] = -e.conj();
            k[(self.b, self.a)] = e;
        }
        k
    }
}

fn generators(n: usize) -> Vec<Generator> {
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in (a + 1)..n {
            out.push(Generator { a, b, phi: 0.0 });
            out.push(Generator { a, b, phi: std::f64::consts::FRAC_PI_2 });
        }
        out.push(Generator { a, b: a, phi: 0.0 });
    }
    out
}

fn combine(gens: &[Generator], coeffs: &[f64], n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for (g, &c) in gens.iter().zip(coeffs) {
        a += g.matrix(n) * Complex64::new(c, 0.0);
    }
    a
}

/// One-parameter group `exp(t A)` of a skew-Hermitian `A`, diagonalized once.
struct SkewFlow {
    vecs: CMatrix,
    vecs_h: CMatrix,
    vals: Vec<f64>,
}

impl SkewFlow {
    fn new(a: &CMatrix) -> Self {
        let h = a * Complex64::new(0.0, -1.0);
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = na::linalg::SymmetricEigen::new(h);
        Self { vecs_h: eig.eigenvectors.adjoint(), vecs: eig.eigenvectors, vals: eig.eigenvalues.iter().cloned().collect() }
    }

    /// `exp(t A) v`.
    fn apply(&self, t: f64, v: &CMatrix) -> CMatrix {
        let mut w = &self.vecs_h * v;
        for (r, &l) in self.vals.iter().enumerate() {
            let e = Complex64::from_polar(1.0, t * l);
            for c in 0..w.ncols() {
                w[(r, c)] *= e;
            }
        }
        &self.vecs * w
    }
}

/// Left multiplication by a rotation by `θ` with phase `φ` on rows `a`, `b`.
fn rotate_rows(u: &CMatrix, a: usize, b: usize, theta: f64, phi: f64) -> CMatrix {
    let mut v = u.clone();
    let (c, s) = (theta.cos(), theta.sin());
    let e = Complex64::from_polar(1.0, phi);
    for l in 0..u.ncols() {
        let (x, y) = (u[(a, l)], u[(b, l)]);
        v[(a, l)] = x * c - e.conj() * y * s;
        v[(b, l)] = e * x * s + y * c;
    }
    v
}

/// Maximizes mutual information over unitaries on `τ_A(β_R) ⊗ τ_B(β_R)`
/// with final energy (relative to the ground state) at most `c`.
pub fn brute_force_max_correlations(
    h_a: &Hamiltonian,
    h_b: &Hamiltonian,
    beta_r: InverseTemperature,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<OracleResult> {
    brute_force_max_correlations_with(h_a, h_b, beta_r, c, &OracleOptions::new(samples, seed))
}

pub fn brute_force_max_correlations_with(
    h_a: &Hamiltonian,
    h_b: &Hamiltonian,
    beta_r: InverseTemperature,
    c: f64,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let (da, db) = (h_a.dim(), h_b.dim());
    let n = da * db;
    if n > ORACLE_MAX_DIM {
        return Err(CoolError::Unsupported(format!("joint dimension {n} exceeds {ORACLE_MAX_DIM}")));
    }
    if !c.is_finite() {
        return Err(CoolError::InvalidArgument(format!("energy budget must be finite, got {c}")));
    }
    let pa = gibbs_populations(h_a, beta_r);
    let pb = gibbs_populations(h_b, beta_r);
    let q = tensor_diag(pa.as_slice(), pb.as_slice());
    let energies: Vec<f64> = (0..n).map(|k| h_a.energies()[k / db] + h_b.energies()[k % db]).collect();
    let ev = Evaluator {
        da,
        db,
        support: q.iter().cloned().enumerate().filter(|&(_, x)| x > 0.0).collect(),
        initial_entropy: shannon_entropy(pa.as_slice()) + shannon_entropy(pb.as_slice()),
        energies,
        budget: c,
    };
    let ident = ev.restrict(&CMatrix::identity(n, n));
    let id_score = ev.score(&ident);
    let feasible = ev.feasible(id_score);
    let (best_v, best) = if !feasible {
        (ident, Score { info: 0.0, energy: id_score.energy })
    } else {
        search(&ev, opts, n, ident, id_score)
    };
    let (ra, rb) = ev.marginals(&best_v);
    let best_u = ev.complete(&best_v);
    let (sa, spectrum_a) = hermitian_entropy(ra);
    let (sb, spectrum_b) = hermitian_entropy(rb);
    let distance_from_identity = (&best_u - CMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(OracleResult {
        best_info: best.info,
        best_energy: best.energy,
        initial_energy: id_score.energy,
        initial_entropy: ev.initial_entropy,
        feasible,
        best_unitary_summary: UnitarySummary { spectrum_a, spectrum_b, marginal_entropy_sum: sa + sb, distance_from_identity },
        best_unitary: UnitaryMatrix::new(best_u)?,
    })
}

fn search(ev: &Evaluator, opts: &OracleOptions, n: usize, ident: CMatrix, id_score: Score) -> (CMatrix, Score) {
    let workers = opts.workers.max(1);
    let starts = opts.descent_starts.max(1);
    let sample_worker = |w: usize| -> Vec<(f64, usize, CMatrix)> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add((w as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut top: Vec<(f64, usize, CMatrix)> = Vec::new();
        for s in (w..opts.samples).step_by(workers) {
            let full = haar_unitary_with(n, &mut rng).matrix().clone();
            let mut u = ev.restrict(&full);
            if !ev.feasible(ev.score(&u)) {
                u = ev.project(&full);
            }
            let sc = ev.score(&u);
            if !ev.feasible(sc) {
                continue;
            }
            top.push((sc.info, s, u));
            if top.len() > 2 * starts {
                sort_candidates(&mut top);
                top.truncate(starts);
            }
        }
        top
    };
    let mut pool: Vec<(f64, usize, CMatrix)> = if workers == 1 {
        sample_worker(0)
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers).map(|w| scope.spawn(move || sample_worker(w))).collect();
            handles.into_iter().flat_map(|h| h.join().expect("oracle worker panicked")).collect()
        })
    };
    pool.push((id_score.info, usize::MAX, ident));
    sort_candidates(&mut pool);
    pool.truncate(starts);
    let refined: Vec<(CMatrix, Score)> = std::thread::scope(|scope| {
        let handles: Vec<_> = pool
            .into_iter()
            .map(|(_, _, u)| scope.spawn(move || ev.descend(u, opts.max_sweeps)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("descent panicked")).collect()
    });
    let mut best = refined[0].clone();
    for r in refined.into_iter().skip(1) {
        if r.1.info > best.1.info {
            best = r;
        }
    }
    best
}

fn sort_candidates(v: &mut [(f64, usize, CMatrix)]) {
    v.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
}
