//! Constructions of symmetrically thermalizing transforms: doubly stochastic
//! `M_0..M_k` sending the block vectors of `τ(β_R) ⊗ τ(β_R)` to a marginal
//! equal to `τ(β′)`.

use nalgebra as na;

use super::blocks::{
    block_weight, from_simplex_coordinates, latin_blocks, marginal_transform, num_free_blocks,
    shift_matrix, shift_vec, simplex_coordinates, BlockDecomposition,
};
use crate::error::{CoolError, Result};
use crate::lp::{find_feasible, polytope_membership, FarkasCertificate, Feasibility, Membership};
use crate::majorization::{birkhoff_decompose, horn_transfer, DoublyStochasticMatrix};
use crate::spectra::{gibbs_populations, Hamiltonian, InverseTemperature, PopulationVector};

/// Residual accepted from every construction.
pub const STU_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StuApproach {
    MajorizedMarginal,
    PassingNorm,
    Geometric,
}

impl StuApproach {
    pub fn name(self) -> &'static str {
        match self {
            StuApproach::MajorizedMarginal => "majorized-marginal",
            StuApproach::PassingNorm => "passing-norm",
            StuApproach::Geometric => "geometric",
        }
    }
}

impl std::str::FromStr for StuApproach {
    type Err = CoolError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "majorized-marginal" | "marginal" => Ok(StuApproach::MajorizedMarginal),
            "passing-norm" | "passing" => Ok(StuApproach::PassingNorm),
            "geometric" => Ok(StuApproach::Geometric),
            other => Err(CoolError::InvalidArgument(format!("unknown STU approach '{other}'"))),
        }
    }
}

/// Output of a construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StuCertificate {
    pub approach: StuApproach,
    /// `M_0..M_k`.
    pub matrices: Vec<DoublyStochasticMatrix>,
    pub achieved_marginal: PopulationVector,
    pub target: PopulationVector,
    /// Max-norm distance between `achieved_marginal` and `target`.
    pub residual: f64,
    /// Mixing weights of the construction: the `α` of the passing-norm
    /// approach or the waypoint weights of the geometric approach.
    pub weights: Vec<f64>,
}

fn check_request(h: &Hamiltonian, beta_r: InverseTemperature, beta_prime: InverseTemperature) -> Result<()> {
    if beta_prime.beta() > beta_r.beta() {
        return Err(CoolError::Infeasible(format!(
            "β′ = {} exceeds β_R = {}: correlating unitaries cannot cool the marginals",
            beta_prime.beta(),
            beta_r.beta()
        )));
    }
    if h.dim() < 2 {
        return Err(CoolError::Dimension("need at least two levels".into()));
    }
    Ok(())
}

fn finish(
    approach: StuApproach,
    blocks: &BlockDecomposition,
    matrices: Vec<DoublyStochasticMatrix>,
    target: Vec<f64>,
    weights: Vec<f64>,
) -> Result<StuCertificate> {
    let achieved = marginal_transform(blocks, &matrices)?;
    let residual = achieved
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let achieved = achieved.into_iter().map(|x| x.max(0.0)).collect();
    Ok(StuCertificate {
        approach,
        matrices,
        achieved_marginal: PopulationVector::from_vec_unchecked(achieved),
        target: PopulationVector::from_vec_unchecked(target),
        residual,
        weights,
    })
}

fn identity_certificate(
    approach: StuApproach,
    h: &Hamiltonian,
    beta_r: InverseTemperature,
    n_weights: usize,
) -> Result<StuCertificate> {
    let d = h.dim();
    let mut weights = vec![0.0; n_weights];
    if let Some(w) = weights.first_mut() {
        *w = 1.0;
    }
    let blocks = latin_blocks(h, beta_r);
    let mats = vec![DoublyStochasticMatrix::identity(d); num_free_blocks(d) + 1];
    let target = gibbs_populations(h, beta_r).into_vec();
    finish(approach, &blocks, mats, target, weights)
}

/// Outcome of the commuting-partner problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Partner {
    Exists(DoublyStochasticMatrix),
    Infeasible(FarkasCertificate),
}

/// Constraint matrix and right-hand side for `(1 + Π^s) X = M (1 + Π^s)`
/// with `X` doubly stochastic, in the row-major variables of `X`.
pub fn commuting_partner_system(m: &DoublyStochasticMatrix, shift: usize) -> (na::DMatrix<f64>, Vec<f64>) {
    let d = m.dim();
    let rhs_mat = m.matrix() * (na::DMatrix::identity(d, d) + shift_matrix(d, shift));
    let var = |a: usize, b: usize| a * d + b;
    let rows = 2 * d + d * d;
    let mut a = na::DMatrix::zeros(rows, d * d);
    let mut b = vec![0.0; rows];
    for r in 0..d {
        for c in 0..d {
            a[(r, var(r, c))] = 1.0;
            a[(d + c, var(r, c))] = 1.0;
        }
        b[r] = 1.0;
        b[d + r] = 1.0;
    }
    for r in 0..d {
        for c in 0..d {
            let row = 2 * d + r * d + c;
            a[(row, var(r, c))] += 1.0;
            a[(row, var((r + d - shift % d) % d, c))] += 1.0;
            b[row] = rhs_mat[(r, c)];
        }
    }
    (a, b)
}

/// Doubly stochastic `X` with `(1 + Π^s) X = M (1 + Π^s)`, or a Farkas
/// certificate that none exists.
pub fn commuting_partner(m: &DoublyStochasticMatrix, shift: usize) -> Result<Partner> {
    let d = m.dim();
    let (a, b) = commuting_partner_system(m, shift);
    match find_feasible(&a, &b)? {
        Feasibility::Feasible(x) => {
            let mat = na::DMatrix::from_fn(d, d, |r, c| x[r * d + c].max(0.0));
            Ok(Partner::Exists(DoublyStochasticMatrix::new(mat)?))
        }
        Feasibility::Infeasible(cert) => Ok(Partner::Infeasible(cert)),
    }
}

/// The four-level permutation without a commuting partner for `s = 1`.
pub fn commute_counterexample() -> DoublyStochasticMatrix {
    DoublyStochasticMatrix::permutation(&[0, 3, 1, 2])
}

/// Three-level construction: `M_0` transfers the initial marginal straight to
/// the target and `M_1` is its commuting partner, assembled permutation by
/// permutation from a Birkhoff decomposition of `M_0`.
pub fn stu_d3_majorized_marginal(
    h: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<StuCertificate> {
    if h.dim() != 3 {
        return Err(CoolError::Unsupported(format!(
            "majorized-marginal construction needs d = 3, got {}",
            h.dim()
        )));
    }
    check_request(h, beta_r, beta_prime)?;
    let approach = StuApproach::MajorizedMarginal;
    if beta_prime == beta_r {
        return identity_certificate(approach, h, beta_r, 0);
    }
    let blocks = latin_blocks(h, beta_r);
    let p = gibbs_populations(h, beta_r).into_vec();
    let target = gibbs_populations(h, beta_prime).into_vec();
    let m0 = horn_transfer(&target, &p)?.matrix;
    let mut terms = Vec::new();
    for (w, perm) in birkhoff_decompose(&m0)? {
        match commuting_partner(&DoublyStochasticMatrix::permutation(&perm), 1)? {
            Partner::Exists(x) => terms.push((w, x)),
            Partner::Infeasible(_) => {
                return Err(CoolError::Internal(format!(
                    "permutation {perm:?} has no commuting partner in d = 3"
                )))
            }
        }
    }
    let m1 = DoublyStochasticMatrix::convex_combination(&terms)?;
    finish(approach, &blocks, vec![m0, m1], target, vec![])
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().sum()
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// Transfer between normalized versions of `from` and `to`; identity if either is zero.
fn normalized_transfer(to: &[f64], from: &[f64]) -> Result<DoublyStochasticMatrix> {
    let (nt, nf) = (norm1(to), norm1(from));
    if nt <= 0.0 || nf <= 0.0 {
        return Ok(DoublyStochasticMatrix::identity(to.len()));
    }
    Ok(horn_transfer(&scaled(to, 1.0 / nt), &scaled(from, 1.0 / nf))?.matrix)
}

/// True if consecutive gaps are non-increasing.
pub fn has_decreasing_gaps(h: &Hamiltonian) -> bool {
    h.gaps().windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

/// Passing-norm construction for `d ∈ {3, 4}` (decreasing gaps for `d = 4`).
///
/// Every block `i ≥ 1` is sent to a rescaled copy of the matching target
/// block; `r_0` absorbs the norm deficits through a convex mix of transfers.
pub fn stu_passing_norm(
    h: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<StuCertificate> {
    let d = h.dim();
    if d != 3 && d != 4 {
        return Err(CoolError::Unsupported(format!("passing-norm construction needs d ∈ {{3, 4}}, got {d}")));
    }
    if d == 4 && !has_decreasing_gaps(h) {
        return Err(CoolError::Unsupported(format!(
            "passing-norm construction in d = 4 needs non-increasing gaps, got {:?}",
            h.gaps()
        )));
    }
    check_request(h, beta_r, beta_prime)?;
    let approach = StuApproach::PassingNorm;
    if beta_prime == beta_r {
        return identity_certificate(approach, h, beta_r, num_free_blocks(d) + 1);
    }
    let r = latin_blocks(h, beta_r);
    let b = latin_blocks(h, beta_prime);
    let target = gibbs_populations(h, beta_prime).into_vec();
    let n0 = r.norm(0);
    // pieces of the r_0 image: (weight, normalized image)
    let mut pieces: Vec<(f64, Vec<f64>)> = vec![(b.norm(0) / n0, scaled(&b.vectors[0], 1.0 / b.norm(0)))];
    let mut mats = vec![DoublyStochasticMatrix::identity(d)];
    for i in 1..=num_free_blocks(d) {
        let (ri, bi) = (&r.vectors[i], &b.vectors[i]);
        mats.push(normalized_transfer(bi, ri)?);
        let nb = norm1(bi);
        if nb <= 0.0 {
            continue;
        }
        let deficit = 2.0 * block_weight(i, d) * (nb - norm1(ri)) / n0;
        let sym: Vec<f64> = bi.iter().zip(shift_vec(bi, i)).map(|(x, y)| x + y).collect();
        pieces.push((deficit, scaled(&sym, 1.0 / (2.0 * nb))));
    }
    let alpha: Vec<f64> = pieces.iter().map(|p| p.0).collect();
    if let Some(a) = alpha.iter().find(|&&a| a < -1e-12) {
        return Err(CoolError::Internal(format!("negative passing-norm weight {a}")));
    }
    let total: f64 = alpha.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(CoolError::Internal(format!("passing-norm weights sum to {total}")));
    }
    let r0n = scaled(&r.vectors[0], 1.0 / n0);
    let mut terms = Vec::new();
    for (w, img) in &pieces {
        if *w > 0.0 {
            terms.push((*w, horn_transfer(img, &r0n)?.matrix));
        }
    }
    mats[0] = DoublyStochasticMatrix::convex_combination(&terms)?;
    finish(approach, &r, mats, target, alpha)
}

/// Waypoints `v_0..v_{d-1}` in simplex coordinates: `v_j` is `x(τ(β_R))`
/// with its first `j` coordinates set to zero.
pub fn geometric_waypoints(x0: &[f64]) -> Vec<Vec<f64>> {
    let n = x0.len();
    (0..=n)
        .map(|j| (0..n).map(|i| if i >= j { x0[i] } else { 0.0 }).collect())
        .collect()
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let d = used.len();
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for v in 0..d {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                rec(cur, used, out);
                cur.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], &mut out);
    out
}

/// Vertices of the reachable-marginal polytope: one permutation per free block.
struct VertexTable {
    perms: Vec<Vec<usize>>,
    /// `images[n][σ]` is the contribution of block `n` under permutation `σ`.
    images: Vec<Vec<Vec<f64>>>,
    /// Every permutation tuple with its vertex in simplex coordinates.
    all: Vec<(Vec<usize>, Vec<f64>)>,
    /// `all` without repeated vertices.
    distinct: Vec<(Vec<usize>, Vec<f64>)>,
}

impl VertexTable {
    fn new(blocks: &BlockDecomposition) -> Self {
        let d = blocks.d;
        let perms = permutations(d);
        let images = (0..=num_free_blocks(d))
            .map(|n| {
                perms
                    .iter()
                    .map(|s| {
                        let t = DoublyStochasticMatrix::permutation(s).apply(&blocks.vectors[n]);
                        if n == 0 {
                            t
                        } else {
                            let c = block_weight(n, d);
                            t.iter().zip(shift_vec(&t, n)).map(|(a, b)| c * (a + b)).collect()
                        }
                    })
                    .collect()
            })
            .collect();
        let mut table = Self { perms, images, all: Vec::new(), distinct: Vec::new() };
        table.all = table
            .all_tuples()
            .into_iter()
            .map(|t| {
                let x = table.point(&t);
                (t, x)
            })
            .collect();
        table.distinct = dedupe(table.all.clone());
        table
    }

    fn point(&self, tuple: &[usize]) -> Vec<f64> {
        let d = self.perms[0].len();
        let mut p = vec![0.0; d];
        for (n, &s) in tuple.iter().enumerate() {
            for j in 0..d {
                p[j] += self.images[n][s][j];
            }
        }
        simplex_coordinates(&p)
    }

    fn all_tuples(&self) -> Vec<Vec<usize>> {
        let k1 = self.images.len();
        let np = self.perms.len();
        let total = np.pow(k1 as u32);
        (0..total)
            .map(|mut c| {
                (0..k1)
                    .map(|_| {
                        let s = c % np;
                        c /= np;
                        s
                    })
                    .collect()
            })
            .collect()
    }

    fn matrices(&self, tuples: &[Vec<usize>], weights: &[f64]) -> Result<Vec<DoublyStochasticMatrix>> {
        (0..self.images.len())
            .map(|n| {
                let terms: Vec<(f64, DoublyStochasticMatrix)> = tuples
                    .iter()
                    .zip(weights)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(t, &w)| (w, DoublyStochasticMatrix::permutation(&self.perms[t[n]])))
                    .collect();
                DoublyStochasticMatrix::convex_combination(&terms)
            })
            .collect()
    }
}

/// Drops tuples whose vertex coincides with an earlier one.
fn dedupe(points: Vec<(Vec<usize>, Vec<f64>)>) -> Vec<(Vec<usize>, Vec<f64>)> {
    let mut seen = std::collections::HashSet::new();
    points
        .into_iter()
        .filter(|(_, x)| seen.insert(x.iter().map(|v| (v * 1e12).round() as i64).collect::<Vec<_>>()))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const FW_MAX_ITERATIONS: usize = 2000;

/// Frank–Wolfe pass towards `target` collecting at most `cap` vertices.
fn greedy_candidates(points: &[(Vec<usize>, Vec<f64>)], target: &[f64], cap: usize) -> Vec<usize> {
    let dist2 = |x: &[f64]| x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let start = (0..points.len())
        .min_by(|&a, &b| dist2(&points[a].1).partial_cmp(&dist2(&points[b].1)).unwrap())
        .expect("non-empty vertex set");
    let mut chosen = vec![start];
    let mut y = points[start].1.clone();
    for _ in 0..FW_MAX_ITERATIONS {
        if chosen.len() >= cap {
            break;
        }
        let g: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
        if dot(&g, &g) < 1e-26 {
            break;
        }
        let s = (0..points.len())
            .min_by(|&a, &b| dot(&g, &points[a].1).partial_cmp(&dot(&g, &points[b].1)).unwrap())
            .unwrap();
        let dir: Vec<f64> = points[s].1.iter().zip(&y).map(|(a, b)| a - b).collect();
        let gap = -dot(&g, &dir);
        if gap <= 1e-16 {
            break;
        }
        let step = (gap / dot(&dir, &dir)).min(1.0);
        for (yi, di) in y.iter_mut().zip(&dir) {
            *yi += step * di;
        }
        if !chosen.contains(&s) {
            chosen.push(s);
        }
    }
    chosen
}

fn membership_weights(points: &[&(Vec<usize>, Vec<f64>)], target: &[f64]) -> Result<Option<Vec<f64>>> {
    let verts: Vec<Vec<f64>> = points.iter().map(|p| p.1.clone()).collect();
    match polytope_membership(target, &verts)? {
        Membership::Inside(w) => Ok(Some(w)),
        Membership::Outside { .. } => Ok(None),
    }
}

/// Matrices realizing waypoint `target` as a convex combination of vertices.
fn waypoint_matrices(table: &VertexTable, target: &[f64]) -> Result<Vec<DoublyStochasticMatrix>> {
    let d = table.perms[0].len();
    let (all, deduped) = (&table.all, &table.distinct);
    let mut attempts: Vec<Vec<&(Vec<usize>, Vec<f64>)>> = Vec::new();
    if d == 3 {
        // cyclic permutations on the off-diagonal block
        let cyclic: Vec<usize> = table
            .perms
            .iter()
            .enumerate()
            .filter(|(_, p)| (0..d).all(|j| p[j] == (p[0] + j) % d))
            .map(|(k, _)| k)
            .collect();
        attempts.push(all.iter().filter(|(t, _)| cyclic.contains(&t[1])).collect());
    } else if d >= 4 {
        let picks = greedy_candidates(deduped, target, 64);
        attempts.push(picks.iter().map(|&k| &deduped[k]).collect());
    }
    attempts.push(deduped.iter().collect());
    for cand in attempts {
        if let Some(w) = membership_weights(&cand, target)? {
            let tuples: Vec<Vec<usize>> = cand.iter().map(|p| p.0.clone()).collect();
            return table.matrices(&tuples, &w);
        }
    }
    Err(CoolError::Internal(format!(
        "waypoint {target:?} lies outside the reachable-marginal polytope"
    )))
}

/// Geometric construction for `d ∈ {2, 3, 4}`: the target is written as a
/// convex combination of waypoints, each realized by vertices of the
/// reachable-marginal polytope.
pub fn stu_geometric(
    h: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_prime: InverseTemperature,
) -> Result<StuCertificate> {
    let d = h.dim();
    if !(2..=4).contains(&d) {
        return Err(CoolError::Unsupported(format!("geometric construction needs d ∈ {{2, 3, 4}}, got {d}")));
    }
    check_request(h, beta_r, beta_prime)?;
    let approach = StuApproach::Geometric;
    if beta_prime == beta_r {
        return identity_certificate(approach, h, beta_r, d);
    }
    let k1 = num_free_blocks(d) + 1;
    let blocks = latin_blocks(h, beta_r);
    let p = gibbs_populations(h, beta_r).into_vec();
    let target = gibbs_populations(h, beta_prime).into_vec();
    let waypoints = geometric_waypoints(&simplex_coordinates(&p));
    let lambda = match polytope_membership(&simplex_coordinates(&target), &waypoints)? {
        Membership::Inside(w) => w,
        Membership::Outside { violation, .. } => {
            return Err(CoolError::Internal(format!(
                "target outside the waypoint simplex (violation {violation:e})"
            )))
        }
    };
    let table = VertexTable::new(&blocks);
    let mut acc = vec![na::DMatrix::<f64>::zeros(d, d); k1];
    for (j, &l) in lambda.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let mats = if j == 0 {
            vec![DoublyStochasticMatrix::identity(d); k1]
        } else if j == d - 1 {
            vec![DoublyStochasticMatrix::uniform(d); k1]
        } else {
            let wp = waypoints[j].clone();
            debug_assert!(from_simplex_coordinates(&wp).iter().all(|x| x.is_finite()));
            waypoint_matrices(&table, &wp)?
        };
        for (a, m) in acc.iter_mut().zip(&mats) {
            *a += m.matrix() * l;
        }
    }
    let mats = acc.into_iter().map(DoublyStochasticMatrix::from_matrix_unchecked).collect();
    finish(approach, &blocks, mats, target, lambda)
}

/// Dispatches to one approach. A passing-norm request in `d = 4` with
/// increasing gaps is served by the geometric approach; the returned flag
/// reports the reroute.
pub fn construct_stu(
    h: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_prime: InverseTemperature,
    approach: StuApproach,
) -> Result<(StuCertificate, bool)> {
    match approach {
        StuApproach::MajorizedMarginal => Ok((stu_d3_majorized_marginal(h, beta_r, beta_prime)?, false)),
        StuApproach::PassingNorm if h.dim() == 4 && !has_decreasing_gaps(h) => {
            Ok((stu_geometric(h, beta_r, beta_prime)?, true))
        }
        StuApproach::PassingNorm => Ok((stu_passing_norm(h, beta_r, beta_prime)?, false)),
        StuApproach::Geometric => Ok((stu_geometric(h, beta_r, beta_prime)?, false)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorization::majorizes;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn beta(b: f64) -> InverseTemperature {
        InverseTemperature::new(b).unwrap()
    }

    fn random_h(rng: &mut ChaCha8Rng, d: usize) -> Hamiltonian {
        let mut e: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..3.0)).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e[0] = 0.0;
        for i in 1..d {
            if e[i] - e[i - 1] < 0.05 {
                e[i] = e[i - 1] + 0.05;
            }
        }
        Hamiltonian::new(e).unwrap()
    }

    fn decreasing_h(rng: &mut ChaCha8Rng) -> Hamiltonian {
        let mut g: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..2.0)).collect();
        g.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Hamiltonian::new(vec![0.0, g[0], g[0] + g[1], g[0] + g[1] + g[2]]).unwrap()
    }

    fn is_ds(m: &DoublyStochasticMatrix) -> bool {
        DoublyStochasticMatrix::new(m.matrix().clone()).is_ok()
    }

    #[test]
    fn counterexample_has_no_partner() {
        let m = commute_counterexample();
        match commuting_partner(&m, 1).unwrap() {
            Partner::Infeasible(cert) => {
                assert!(cert.violation > 1e-9);
                let (a, _) = commuting_partner_system(&m, 1);
                assert!(cert.max_row_violation(&a) <= 1e-9);
            }
            Partner::Exists(x) => panic!("unexpected partner {x:?}"),
        }
    }

    #[test]
    fn d3_permutations_have_permutation_partners() {
        // (1 + Π) is invertible for odd d, so the partner is unique
        let inv = (na::DMatrix::identity(3, 3) + shift_matrix(3, 1)).try_inverse().unwrap();
        for p in permutations(3) {
            let pm = DoublyStochasticMatrix::permutation(&p);
            let direct = &inv * pm.matrix() * (na::DMatrix::identity(3, 3) + shift_matrix(3, 1));
            match commuting_partner(&pm, 1).unwrap() {
                Partner::Exists(x) => {
                    assert!((x.matrix() - &direct).amax() < 1e-12);
                    assert!(x.matrix().iter().all(|&v| v.abs() < 1e-12 || (v - 1.0).abs() < 1e-12));
                }
                Partner::Infeasible(_) => panic!("{p:?}"),
            }
        }
    }

    #[test]
    fn identity_when_no_temperature_change() {
        let h = Hamiltonian::new(vec![0.0, 0.7, 1.9]).unwrap();
        for f in [stu_d3_majorized_marginal, stu_passing_norm, stu_geometric] {
            let c = f(&h, beta(1.2), beta(1.2)).unwrap();
            assert!(c.residual < 1e-15);
            assert!(c.matrices.iter().all(|m| *m == DoublyStochasticMatrix::identity(3)));
        }
        let c = stu_geometric(&h, beta(1.2), beta(1.2)).unwrap();
        assert_eq!(c.weights, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn infinite_temperature_target() {
        let h = Hamiltonian::new(vec![0.0, 0.7, 1.9]).unwrap();
        for f in [stu_d3_majorized_marginal, stu_passing_norm, stu_geometric] {
            let c = f(&h, beta(1.2), beta(0.0)).unwrap();
            assert!(c.achieved_marginal.as_slice().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-9));
        }
        let c = stu_geometric(&h, beta(1.2), beta(0.0)).unwrap();
        assert!((c.weights[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_direction_is_rejected() {
        let h = Hamiltonian::new(vec![0.0, 0.7, 1.9]).unwrap();
        assert!(matches!(stu_geometric(&h, beta(1.0), beta(2.0)), Err(CoolError::Infeasible(_))));
        assert!(matches!(
            stu_d3_majorized_marginal(&h, beta(1.0), beta(2.0)),
            Err(CoolError::Infeasible(_))
        ));
    }

    #[test]
    fn d3_grid_all_approaches() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let h = random_h(&mut rng, 3);
            let br = rng.random_range(0.3..3.0);
            for g in 0..20 {
                let bp = beta(br * g as f64 / 19.0);
                let a = stu_d3_majorized_marginal(&h, beta(br), bp).unwrap();
                let b = stu_passing_norm(&h, beta(br), bp).unwrap();
                let c = stu_geometric(&h, beta(br), bp).unwrap();
                for cert in [&a, &b, &c] {
                    assert!(cert.residual < STU_RESIDUAL_TOL, "{:?} {}", cert.approach, cert.residual);
                    assert!(cert.matrices.iter().all(is_ds));
                }
                for j in 0..3 {
                    assert!((a.achieved_marginal[j] - b.achieved_marginal[j]).abs() < 1e-9);
                }
                let s: f64 = b.weights.iter().sum();
                assert!((s - 1.0).abs() < 1e-12 && b.weights.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn passing_norm_d4_example() {
        let h = Hamiltonian::new(vec![0.0, 1.5, 2.5, 3.0]).unwrap();
        let c = stu_passing_norm(&h, beta(1.0), beta(0.3)).unwrap();
        assert!(c.residual < 1e-9);
        let s: f64 = c.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12 && c.weights.iter().all(|&w| w >= 0.0));
        let g = stu_geometric(&h, beta(1.0), beta(0.3)).unwrap();
        assert!(g.residual < 1e-9);
    }

    #[test]
    fn passing_norm_rejects_increasing_gaps() {
        let h = Hamiltonian::new(vec![0.0, 0.5, 1.5, 3.0]).unwrap();
        assert!(matches!(stu_passing_norm(&h, beta(1.0), beta(0.3)), Err(CoolError::Unsupported(_))));
        let (c, rerouted) = construct_stu(&h, beta(1.0), beta(0.3), StuApproach::PassingNorm).unwrap();
        assert!(rerouted);
        assert_eq!(c.approach, StuApproach::Geometric);
        assert!(c.residual < 1e-9);
    }

    #[test]
    fn d4_geometric_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_h(&mut rng, 4);
        let br = 1.7;
        for g in 0..20 {
            let c = stu_geometric(&h, beta(br), beta(br * g as f64 / 19.0)).unwrap();
            assert!(c.residual < 1e-9, "{}", c.residual);
        }
        let hd = decreasing_h(&mut rng);
        for g in 0..5 {
            let bp = beta(br * g as f64 / 4.0);
            let a = stu_passing_norm(&hd, beta(br), bp).unwrap();
            let b = stu_geometric(&hd, beta(br), bp).unwrap();
            for j in 0..4 {
                assert!((a.achieved_marginal[j] - b.achieved_marginal[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn d2_geometric() {
        let h = Hamiltonian::qubit(1.0).unwrap();
        for bp in [0.0, 0.4, 1.1] {
            let c = stu_geometric(&h, beta(1.3), beta(bp)).unwrap();
            assert!(c.residual < 1e-9);
        }
    }

    #[test]
    fn zero_temperature_start() {
        let h = Hamiltonian::new(vec![0.0, 0.6, 1.0]).unwrap();
        let z = InverseTemperature::zero_temperature();
        for f in [stu_d3_majorized_marginal, stu_passing_norm, stu_geometric] {
            let c = f(&h, z, beta(0.8)).unwrap();
            assert!(c.residual < 1e-9);
        }
    }

    fn normalized(v: &[f64]) -> Vec<f64> {
        let s = norm1(v);
        v.iter().map(|x| x / s).collect()
    }

    fn arb_h(max_d: usize) -> impl Strategy<Value = Hamiltonian> {
        prop::collection::vec(0.01f64..2.0, 1..max_d).prop_map(|gaps| {
            let mut e = vec![0.0];
            for g in gaps {
                e.push(e.last().unwrap() + g);
            }
            Hamiltonian::new(e).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn block_norms_majorize_targets(h in arb_h(6), br in 0.01f64..4.0, frac in 0.0f64..1.0) {
            let r = latin_blocks(&h, beta(br));
            let b = latin_blocks(&h, beta(br * frac));
            for i in 0..h.dim() {
                prop_assert!(majorizes(&normalized(&r.vectors[i]), &normalized(&b.vectors[i])).holds);
            }
        }

        #[test]
        fn diagonal_block_norm_shrinks_with_temperature(h in arb_h(6), br in 0.01f64..4.0, f1 in 0.0f64..1.0, f2 in 0.0f64..1.0) {
            let (hi, lo) = if f1 > f2 { (f1, f2) } else { (f2, f1) };
            let n_hi = latin_blocks(&h, beta(br * hi)).norm(0);
            let n_lo = latin_blocks(&h, beta(br * lo)).norm(0);
            prop_assert!(n_lo <= n_hi + 1e-15);
            let p = gibbs_populations(&h, beta(br * hi));
            let sq: f64 = p.as_slice().iter().map(|x| x * x).sum();
            prop_assert!((sq - n_hi).abs() < 1e-14);
        }

        #[test]
        fn diagonal_block_majorizes_offdiagonal_sum(h in arb_h(8), br in 0.01f64..4.0) {
            let r = latin_blocks(&h, beta(br));
            let d = h.dim();
            let s: Vec<f64> = (0..d).map(|j| (1..d).map(|i| r.vectors[i][j]).sum()).collect();
            prop_assert!(majorizes(&normalized(&r.vectors[0]), &normalized(&s)).holds);
        }
    }
}
