//! Majorization, the prefix-sum "colder" preorder, T-transforms, Horn's
//! transfer construction, Birkhoff decomposition and passive sorting.

use nalgebra as na;

use crate::error::{CoolError, Result};

/// Absolute tolerance on partial sums.
pub const MAJORIZATION_TOL: f64 = 1e-10;
/// Tolerance for "equal totals".
pub const SUM_TOL: f64 = 1e-9;
/// Entries above this count as support in the Birkhoff matching.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Outcome of [`majorizes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorizationCheck {
    pub holds: bool,
    /// Totals differ by more than [`SUM_TOL`].
    pub sum_mismatch: bool,
    /// First descending prefix (0-based length minus one) where `x` falls short.
    pub first_violation: Option<usize>,
    /// Largest shortfall of a prefix sum of `x` below the one of `y`.
    pub deficit: f64,
}

/// Descending indices of `p`; ties keep their original order.
pub fn descending_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap_or(std::cmp::Ordering::Equal));
    idx
}

/// Stable descending sort.
pub fn passive_sort(p: &[f64]) -> Vec<f64> {
    descending_order(p).into_iter().map(|i| p[i]).collect()
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(CoolError::Dimension(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Does `x` majorize `y`? Panics on length mismatch; see [`try_majorizes`].
pub fn majorizes(x: &[f64], y: &[f64]) -> MajorizationCheck {
    try_majorizes(x, y).expect("majorizes: length mismatch")
}

pub fn try_majorizes(x: &[f64], y: &[f64]) -> Result<MajorizationCheck> {
    check_lengths(x, y)?;
    let xs = passive_sort(x);
    let ys = passive_sort(y);
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sum_mismatch = (sx - sy).abs() > SUM_TOL;
    let (mut px, mut py) = (0.0, 0.0);
    let mut first_violation = None;
    let mut deficit: f64 = 0.0;
    for k in 0..xs.len() {
        px += xs[k];
        py += ys[k];
        let short = py - px;
        if short > MAJORIZATION_TOL && first_violation.is_none() {
            first_violation = Some(k);
        }
        deficit = deficit.max(short);
    }
    Ok(MajorizationCheck {
        holds: !sum_mismatch && first_violation.is_none(),
        sum_mismatch,
        first_violation,
        deficit,
    })
}

/// Relation between two population vectors under prefix sums taken in the
/// given (energy) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumOrder {
    Colder,
    Hotter,
    Equal,
    Incomparable,
}

/// Compares prefix sums of `p` and `q` without reordering.
pub fn sum_compare(p: &[f64], q: &[f64]) -> Result<SumOrder> {
    check_lengths(p, q)?;
    let (mut sp, mut sq) = (0.0, 0.0);
    let (mut colder, mut hotter) = (true, true);
    for (a, b) in p.iter().zip(q) {
        sp += a;
        sq += b;
        if sp < sq - MAJORIZATION_TOL {
            colder = false;
        }
        if sp > sq + MAJORIZATION_TOL {
            hotter = false;
        }
    }
    Ok(match (colder, hotter) {
        (true, true) => SumOrder::Equal,
        (true, false) => SumOrder::Colder,
        (false, true) => SumOrder::Hotter,
        (false, false) => SumOrder::Incomparable,
    })
}

/// True when `p` is colder than or equal to `q`.
pub fn sum_colder_or_equal(p: &[f64], q: &[f64]) -> bool {
    matches!(sum_compare(p, q), Ok(SumOrder::Colder | SumOrder::Equal))
}

/// Real square matrix with non-negative entries and unit row and column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochasticMatrix(na::DMatrix<f64>);

impl DoublyStochasticMatrix {
    pub fn new(m: na::DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(CoolError::NotDoublyStochastic("matrix is not square".into()));
        }
        if let Some(v) = m.iter().find(|&&v| v < -SUPPORT_TOL || !v.is_finite()) {
            return Err(CoolError::NotDoublyStochastic(format!("entry {v} is negative")));
        }
        for i in 0..m.nrows() {
            let r = m.row(i).sum();
            let c = m.column(i).sum();
            if (r - 1.0).abs() > MAJORIZATION_TOL || (c - 1.0).abs() > MAJORIZATION_TOL {
                return Err(CoolError::NotDoublyStochastic(format!(
                    "row/column {i} sums to {r}/{c}"
                )));
            }
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: na::DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn identity(d: usize) -> Self {
        Self(na::DMatrix::identity(d, d))
    }

    /// Permutation matrix with a one at `(i, perm[i])`.
    pub fn permutation(perm: &[usize]) -> Self {
        let d = perm.len();
        let mut m = na::DMatrix::zeros(d, d);
        for (i, &j) in perm.iter().enumerate() {
            m[(i, j)] = 1.0;
        }
        Self(m)
    }

    /// Flat matrix with every entry `1/d`.
    pub fn uniform(d: usize) -> Self {
        Self(na::DMatrix::from_element(d, d, 1.0 / d as f64))
    }

    pub fn matrix(&self) -> &na::DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = na::DVector::from_column_slice(v);
        (&self.0 * x).iter().cloned().collect()
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0)
    }

    /// Convex combination `Σ w_k M_k`.
    pub fn convex_combination(terms: &[(f64, DoublyStochasticMatrix)]) -> Result<Self> {
        let d = terms
            .first()
            .map(|t| t.1.dim())
            .ok_or_else(|| CoolError::InvalidArgument("empty convex combination".into()))?;
        let mut m = na::DMatrix::zeros(d, d);
        for (w, t) in terms {
            m += &t.0 * *w;
        }
        Ok(Self(m))
    }
}

/// `T = (1 - t) 1 + t Q` where `Q` swaps `i` and `j`.
pub fn t_transform(t: f64, i: usize, j: usize, d: usize) -> Result<DoublyStochasticMatrix> {
    if i >= d || j >= d || i == j {
        return Err(CoolError::InvalidArgument(format!(
            "invalid T-transform indices ({i}, {j}) for d = {d}"
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(CoolError::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    let mut m = na::DMatrix::identity(d, d);
    m[(i, i)] = 1.0 - t;
    m[(j, j)] = 1.0 - t;
    m[(i, j)] = t;
    m[(j, i)] = t;
    Ok(DoublyStochasticMatrix(m))
}

/// One T-transform of a Horn chain, in sorted coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStep {
    pub i: usize,
    pub j: usize,
    pub t: f64,
}

/// Doubly stochastic transfer `M` with `M y = x`, together with its
/// T-transform chain and an orthogonal witness.
#[derive(Debug, Clone)]
pub struct HornTransfer {
    pub matrix: DoublyStochasticMatrix,
    /// Chain acting on the descending rearrangement of `y`.
    pub steps: Vec<TStep>,
    /// `order_y[k]` is the index of the k-th largest entry of `y`.
    pub order_y: Vec<usize>,
    pub order_x: Vec<usize>,
}

impl HornTransfer {
    /// Real orthogonal `O` with `diag(O diag(y) Oᵀ) = x`, built from one
    /// 2×2 rotation with `cos²θ = 1 - t` per T-transform.
    pub fn orthogonal(&self) -> na::DMatrix<f64> {
        let d = self.order_y.len();
        let mut r = na::DMatrix::identity(d, d);
        for s in &self.steps {
            let c = (1.0 - s.t).max(0.0).sqrt();
            let sn = s.t.max(0.0).sqrt();
            let mut g = na::DMatrix::identity(d, d);
            g[(s.i, s.i)] = c;
            g[(s.j, s.j)] = c;
            g[(s.i, s.j)] = -sn;
            g[(s.j, s.i)] = sn;
            r = g * r;
        }
        let sy = sorting_matrix(&self.order_y);
        let sx = sorting_matrix(&self.order_x);
        sx.transpose() * r * sy
    }
}

/// `S` with `(S v)_k = v[order[k]]`.
fn sorting_matrix(order: &[usize]) -> na::DMatrix<f64> {
    let d = order.len();
    let mut s = na::DMatrix::zeros(d, d);
    for (k, &i) in order.iter().enumerate() {
        s[(k, i)] = 1.0;
    }
    s
}

/// Builds `M` with `M y = x` as a product of at most `d - 1` T-transforms
/// (between the sorting permutations), given that `y` majorizes `x`.
pub fn horn_transfer(x: &[f64], y: &[f64]) -> Result<HornTransfer> {
    check_lengths(x, y)?;
    let chk = try_majorizes(y, x)?;
    if chk.sum_mismatch {
        return Err(CoolError::MajorizationFailure { index: x.len() - 1, deficit: chk.deficit });
    }
    if let Some(index) = chk.first_violation {
        return Err(CoolError::MajorizationFailure { index, deficit: chk.deficit });
    }
    let d = x.len();
    let order_y = descending_order(y);
    let order_x = descending_order(x);
    let mut a: Vec<f64> = order_y.iter().map(|&i| y[i]).collect();
    let xs: Vec<f64> = order_x.iter().map(|&i| x[i]).collect();
    let eq_tol = 1e-15;
    let mut steps = Vec::new();
    let mut chain = na::DMatrix::<f64>::identity(d, d);
    for _ in 0..d {
        let Some(k) = (0..d).find(|&k| a[k] < xs[k] - eq_tol) else {
            break;
        };
        let Some(j) = (0..k).rev().find(|&j| a[j] > xs[j] + eq_tol) else {
            break;
        };
        let up = a[j] - xs[j];
        let down = xs[k] - a[k];
        let delta = up.min(down);
        let t = (delta / (a[j] - a[k])).clamp(0.0, 1.0);
        let (aj, ak) = (a[j], a[k]);
        a[j] = (1.0 - t) * aj + t * ak;
        a[k] = t * aj + (1.0 - t) * ak;
        if up <= down {
            a[j] = xs[j];
        }
        if down <= up {
            a[k] = xs[k];
        }
        chain = t_transform(t, j, k, d)?.0 * chain;
        steps.push(TStep { i: j, j: k, t });
    }
    let sy = sorting_matrix(&order_y);
    let sx = sorting_matrix(&order_x);
    let m = sx.transpose() * chain * sy;
    Ok(HornTransfer {
        matrix: DoublyStochasticMatrix(m),
        steps,
        order_y,
        order_x,
    })
}

/// Maximum-weight perfect matching on the support of `m`; `None` when the
/// support admits no perfect matching.
fn max_weight_support_matching(m: &na::DMatrix<f64>) -> Option<Vec<usize>> {
    let n = m.nrows();
    let big = 1e6;
    let cost = |i: usize, j: usize| if m[(i, j)] > SUPPORT_TOL { -m[(i, j)] } else { big };
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm.iter()
        .enumerate()
        .all(|(i, &j)| m[(i, j)] > SUPPORT_TOL)
        .then_some(perm)
}

/// Drops terms until at most `limit` remain, keeping the same convex
/// combination (Carathéodory reduction in the affine hull of permutations).
fn caratheodory_reduce(terms: &mut Vec<(f64, Vec<usize>)>, d: usize, limit: usize) {
    while terms.len() > limit {
        let n = terms.len();
        let rows = d * d + 1;
        let mut a = na::DMatrix::<f64>::zeros(rows, n);
        for (c, (_, perm)) in terms.iter().enumerate() {
            for (i, &j) in perm.iter().enumerate() {
                a[(i * d + j, c)] = 1.0;
            }
            a[(d * d, c)] = 1.0;
        }
        let gram = a.transpose() * &a;
        let eig = na::linalg::SymmetricEigen::new(gram);
        let (kmin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
        let mut c: Vec<f64> = eig.eigenvectors.column(kmin).iter().cloned().collect();
        if !c.iter().any(|&x| x > 1e-12) {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        let mut alpha = f64::INFINITY;
        let mut drop = 0;
        for (k, &ck) in c.iter().enumerate() {
            if ck > 1e-12 {
                let r = terms[k].0 / ck;
                if r < alpha {
                    alpha = r;
                    drop = k;
                }
            }
        }
        if !alpha.is_finite() {
            break;
        }
        for (k, t) in terms.iter_mut().enumerate() {
            t.0 = (t.0 - alpha * c[k]).max(0.0);
        }
        terms[drop].0 = 0.0;
        terms.retain(|t| t.0 > 0.0);
    }
}

/// Writes `m` as `Σ w_k P_k` with at most `(d-1)² + 1` permutation matrices.
/// Each permutation is returned as `perm` with `P[(i, perm[i])] = 1`.
pub fn birkhoff_decompose(m: &DoublyStochasticMatrix) -> Result<Vec<(f64, Vec<usize>)>> {
    let m = DoublyStochasticMatrix::new(m.0.clone())?;
    let d = m.dim();
    let limit = (d - 1) * (d - 1) + 1;
    let mut residual = m.0.map(|v| if v > SUPPORT_TOL { v } else { 0.0 });
    let mut terms: Vec<(f64, Vec<usize>)> = Vec::new();
    for _ in 0..(d * d + 1) {
        if residual.iter().all(|&v| v <= SUPPORT_TOL) {
            break;
        }
        let Some(perm) = max_weight_support_matching(&residual) else {
            break;
        };
        let w = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| residual[(i, j)])
            .fold(f64::INFINITY, f64::min);
        for (i, &j) in perm.iter().enumerate() {
            let v = residual[(i, j)] - w;
            residual[(i, j)] = if v > SUPPORT_TOL { v } else { 0.0 };
        }
        terms.push((w, perm));
    }
    caratheodory_reduce(&mut terms, d, limit);
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{apply_unitary, diag_of, haar_random_unitary, DensityMatrix};
    use crate::spectra::average_energy;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn majorization_examples() {
        assert!(majorizes(&[1.0, 0.0], &[0.5, 0.5]).holds);
        assert!(majorizes(&[0.3, 0.7], &[0.3, 0.7]).holds);
        assert!(majorizes(&[0.5, 0.3, 0.2], &[0.4, 0.4, 0.2]).holds);
        assert!(!majorizes(&[0.4, 0.4, 0.2], &[0.5, 0.3, 0.2]).holds);
        let c = majorizes(&[1.0, 0.0], &[0.5, 0.4]);
        assert!(!c.holds && c.sum_mismatch);
        assert!(try_majorizes(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn sum_compare_examples() {
        assert_eq!(sum_compare(&[0.9, 0.1], &[0.6, 0.4]).unwrap(), SumOrder::Colder);
        assert_eq!(sum_compare(&[0.6, 0.4], &[0.9, 0.1]).unwrap(), SumOrder::Hotter);
        assert_eq!(sum_compare(&[0.6, 0.4], &[0.6, 0.4]).unwrap(), SumOrder::Equal);
        assert_eq!(
            sum_compare(&[0.5, 0.1, 0.4], &[0.4, 0.3, 0.3]).unwrap(),
            SumOrder::Incomparable
        );
    }

    #[test]
    fn t_transform_examples() {
        assert_eq!(t_transform(0.0, 0, 1, 2).unwrap(), DoublyStochasticMatrix::identity(2));
        assert_eq!(t_transform(1.0, 0, 1, 2).unwrap(), DoublyStochasticMatrix::permutation(&[1, 0]));
        assert_eq!(t_transform(0.5, 0, 1, 2).unwrap().apply(&[1.0, 0.0]), vec![0.5, 0.5]);
        assert!(t_transform(0.5, 1, 1, 2).is_err());
        assert!(t_transform(0.5, 0, 2, 2).is_err());
    }

    #[test]
    fn horn_examples() {
        let h = horn_transfer(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(h.matrix, DoublyStochasticMatrix::identity(2));
        let h = horn_transfer(&[0.7, 0.3], &[1.0, 0.0]).unwrap();
        assert_eq!(h.steps.len(), 1);
        assert!((h.steps[0].t - 0.3).abs() < 1e-15);
        let x = [1.0 / 3.0; 3];
        let h = horn_transfer(&x, &[0.5, 0.3, 0.2]).unwrap();
        assert!(close(&h.matrix.apply(&[0.5, 0.3, 0.2]), &x, 1e-12));
        assert!(h.steps.len() <= 2);
        match horn_transfer(&[0.5, 0.3, 0.2], &[0.4, 0.4, 0.2]) {
            Err(CoolError::MajorizationFailure { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn horn_orthogonal_witness() {
        let y = [0.1, 0.45, 0.25, 0.2];
        let x = [0.3, 0.2, 0.26, 0.24];
        let h = horn_transfer(&x, &y).unwrap();
        let o = h.orthogonal();
        let oo = &o * o.transpose();
        assert!((oo - na::DMatrix::identity(4, 4)).amax() < 1e-12);
        let rot = &o * na::DMatrix::from_diagonal(&na::DVector::from_column_slice(&y)) * o.transpose();
        let diag: Vec<f64> = rot.diagonal().iter().cloned().collect();
        assert!(close(&diag, &x, 1e-12));
    }

    #[test]
    fn birkhoff_examples() {
        let id = DoublyStochasticMatrix::identity(3);
        assert_eq!(birkhoff_decompose(&id).unwrap(), vec![(1.0, vec![0, 1, 2])]);
        let pi = DoublyStochasticMatrix::permutation(&[2, 0, 1]);
        let mix = DoublyStochasticMatrix::convex_combination(&[(0.5, id), (0.5, pi)]).unwrap();
        let mut terms = birkhoff_decompose(&mix).unwrap();
        terms.sort_by(|a, b| a.1.cmp(&b.1));
        assert_eq!(terms, vec![(0.5, vec![0, 1, 2]), (0.5, vec![2, 0, 1])]);
        let bad = DoublyStochasticMatrix::from_matrix_unchecked(na::DMatrix::from_element(2, 2, 0.7));
        assert!(birkhoff_decompose(&bad).is_err());
    }

    #[test]
    fn birkhoff_four_permutation_mix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut terms = Vec::new();
            let mut ws: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = ws.iter().sum();
            ws.iter_mut().for_each(|w| *w /= s);
            for w in ws {
                let perm = random_perm(4, &mut rng);
                terms.push((w, DoublyStochasticMatrix::permutation(&perm)));
            }
            let m = DoublyStochasticMatrix::convex_combination(&terms).unwrap();
            let dec = birkhoff_decompose(&m).unwrap();
            assert!(reconstruction_error(&m, &dec) < 1e-9);
        }
    }

    pub(crate) fn random_perm<R: Rng>(d: usize, rng: &mut R) -> Vec<usize> {
        let mut p: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = rng.random_range(0..=i);
            p.swap(i, j);
        }
        p
    }

    fn reconstruction_error(m: &DoublyStochasticMatrix, dec: &[(f64, Vec<usize>)]) -> f64 {
        let d = m.dim();
        let mut r = na::DMatrix::<f64>::zeros(d, d);
        for (w, p) in dec {
            for (i, &j) in p.iter().enumerate() {
                r[(i, j)] += w;
            }
        }
        (r - m.matrix()).amax()
    }

    fn random_ds(d: usize, seed: u64) -> DoublyStochasticMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=2 * d);
        let mut terms = Vec::new();
        let mut total = 0.0;
        for _ in 0..k {
            let w: f64 = rng.random::<f64>() + 1e-3;
            total += w;
            terms.push((w, DoublyStochasticMatrix::permutation(&random_perm(d, &mut rng))));
        }
        terms.iter_mut().for_each(|t| t.0 /= total);
        DoublyStochasticMatrix::convex_combination(&terms).unwrap()
    }

    fn prob_vec(raw: &[f64]) -> Vec<f64> {
        let s: f64 = raw.iter().sum::<f64>() + 1e-9;
        raw.iter().map(|x| (x + 1e-9 / raw.len() as f64) / s).collect()
    }

    #[test]
    fn passive_sort_examples() {
        assert_eq!(passive_sort(&[0.2, 0.5, 0.3]), vec![0.5, 0.3, 0.2]);
        assert_eq!(passive_sort(&[0.5, 0.3, 0.2]), vec![0.5, 0.3, 0.2]);
        assert_eq!(descending_order(&[0.25; 4]), vec![0, 1, 2, 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn hardy_littlewood_polya(raw in prop::collection::vec(0.0f64..1.0, 2..=8), seed in any::<u64>()) {
            let y = prob_vec(&raw);
            let m = random_ds(y.len(), seed);
            prop_assert!(majorizes(&y, &m.apply(&y)).holds);
        }

        #[test]
        fn horn_round_trip(raw in prop::collection::vec(0.0f64..1.0, 2..=8), seed in any::<u64>()) {
            let y = prob_vec(&raw);
            let x = random_ds(y.len(), seed).apply(&y);
            let h = horn_transfer(&x, &y).unwrap();
            prop_assert!(DoublyStochasticMatrix::new(h.matrix.matrix().clone()).is_ok());
            prop_assert!(close(&h.matrix.apply(&y), &x, 1e-10));
            prop_assert!(h.steps.len() < y.len());
        }

        #[test]
        fn birkhoff_reconstructs(seed in any::<u64>(), d in 2usize..=8) {
            let m = random_ds(d, seed);
            let dec = birkhoff_decompose(&m).unwrap();
            prop_assert!(dec.len() <= (d - 1) * (d - 1) + 1);
            let total: f64 = dec.iter().map(|t| t.0).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            prop_assert!(dec.iter().all(|t| t.0 >= 0.0));
            prop_assert!(reconstruction_error(&m, &dec) < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn colder_is_a_preorder(a in prop::collection::vec(0.0f64..1.0, 4), b in prop::collection::vec(0.0f64..1.0, 4), c in prop::collection::vec(0.0f64..1.0, 4)) {
            let (p, q, r) = (prob_vec(&a), prob_vec(&b), prob_vec(&c));
            prop_assert!(sum_colder_or_equal(&p, &p));
            if sum_colder_or_equal(&p, &q) && sum_colder_or_equal(&q, &r) {
                prop_assert!(sum_colder_or_equal(&p, &r));
            }
        }

        #[test]
        fn colder_means_lower_energy(a in prop::collection::vec(0.0f64..1.0, 4), b in prop::collection::vec(0.0f64..1.0, 4), gaps in prop::collection::vec(0.0f64..3.0, 3)) {
            let (p, q) = (prob_vec(&a), prob_vec(&b));
            let mut h = vec![0.0];
            for g in gaps { let l = *h.last().unwrap(); h.push(l + g); }
            if sum_colder_or_equal(&p, &q) {
                prop_assert!(average_energy(&p, &h).unwrap() <= average_energy(&q, &h).unwrap() + 1e-10);
            }
        }

        #[test]
        fn spectrum_is_colder_than_diagonal(raw in prop::collection::vec(0.0f64..1.0, 2..=6), seed in any::<u64>()) {
            let p = prob_vec(&raw);
            let rho = apply_unitary(&DensityMatrix::from_diag(&p), &haar_random_unitary(p.len(), seed)).unwrap();
            let ev = rho.eigenvalues();
            let diag = diag_of(&rho).unwrap();
            prop_assert!(sum_colder_or_equal(&ev, &diag));
        }
    }
}
