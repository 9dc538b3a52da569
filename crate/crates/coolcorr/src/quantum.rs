//! Dense joint systems: tensor products, partial traces, unitary conjugation,
//! Haar-random unitaries and energy-conservation checks.

use nalgebra as na;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoolError, Result};
use crate::spectra::{Hamiltonian, DEGENERACY_TOL, PROB_TOL};

pub type CMatrix = na::DMatrix<Complex64>;

/// Tolerance for `U U† = 1`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance for the commutator with a diagonal Hamiltonian.
pub const COMMUTATION_TOL: f64 = 1e-10;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Row-major labeling `(i, j) ↔ i·d_right + j` of a bipartite basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointIndex {
    pub d_left: usize,
    pub d_right: usize,
}

impl JointIndex {
    pub fn new(d_left: usize, d_right: usize) -> Self {
        Self { d_left, d_right }
    }

    pub fn dim(&self) -> usize {
        self.d_left * self.d_right
    }

    pub fn flat(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.d_left && j < self.d_right);
        i * self.d_right + j
    }

    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.d_right, k % self.d_right)
    }
}

/// Which factor of a bipartite system to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(CoolError::Dimension("density matrix must be square".into()));
        }
        let herm = max_abs(&(&m - m.adjoint()));
        if herm > PROB_TOL {
            return Err(CoolError::NotHermitian(herm));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > PROB_TOL || tr.im.abs() > PROB_TOL {
            return Err(CoolError::NotNormalized { sum: tr.re });
        }
        let rho = Self(m);
        let min_eig = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(CoolError::InvalidArgument(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Diagonal state with the given populations.
    pub fn from_diag(p: &[f64]) -> Self {
        let v = na::DVector::from_iterator(p.len(), p.iter().map(|&x| Complex64::new(x, 0.0)));
        Self(CMatrix::from_diagonal(&v))
    }

    /// Pure state `|ψ⟩⟨ψ|` from a normalized vector.
    pub fn pure(psi: &na::DVector<Complex64>) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(CoolError::NotNormalized { sum: n * n });
        }
        Ok(Self(psi * psi.adjoint()))
    }


    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = na::linalg::SymmetricEigen::new(h);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&x| x > 0.0)
            .map(|x| -x * x.ln())
            .sum()
    }

    /// Largest modulus among off-diagonal entries.
    pub fn max_offdiag(&self) -> f64 {
        let n = self.dim();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.0[(i, j)].norm());
                }
            }
        }
        m
    }
}

/// Square matrix with `U U† = 1` within [`UNITARY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(CoolError::Dimension("unitary must be square".into()));
        }
        let n = m.nrows();
        let dev = max_abs(&(&m * m.adjoint() - CMatrix::identity(n, n)));
        if dev > UNITARY_TOL {
            return Err(CoolError::NotUnitary(dev));
        }
        Ok(Self(m))
    }

    /// Real orthogonal matrix promoted to a unitary.
    pub fn from_real(m: &na::DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    /// Permutation unitary sending basis vector `j` to `perm[j]`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        let mut m = CMatrix::zeros(n, n);
        for (j, &i) in perm.iter().enumerate() {
            if i >= n || seen[i] {
                return Err(CoolError::InvalidArgument(format!("not a permutation: {perm:?}")));
            }
            seen[i] = true;
            m[(i, j)] = Complex64::new(1.0, 0.0);
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn compose(&self, other: &UnitaryMatrix) -> Result<UnitaryMatrix> {
        if self.dim() != other.dim() {
            return Err(CoolError::Dimension("unitary dimensions differ".into()));
        }
        Ok(Self(&self.0 * &other.0))
    }
}

/// Product populations under [`JointIndex`] ordering.
pub fn tensor_diag(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Kronecker product of two states.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix(a.0.kronecker(&b.0))
}

/// Joint energies `E_i + F_j` in [`JointIndex`] order (not re-sorted).
pub fn joint_hamiltonian(left: &Hamiltonian, right: &Hamiltonian) -> (Vec<f64>, JointIndex) {
    let idx = JointIndex::new(left.dim(), right.dim());
    let mut e = Vec::with_capacity(idx.dim());
    for &a in left.energies() {
        for &b in right.energies() {
            e.push(a + b);
        }
    }
    (e, idx)
}

/// `U ρ U†`.
pub fn apply_unitary(rho: &DensityMatrix, u: &UnitaryMatrix) -> Result<DensityMatrix> {
    if rho.dim() != u.dim() {
        return Err(CoolError::Dimension(format!(
            "state dimension {} does not match unitary dimension {}",
            rho.dim(),
            u.dim()
        )));
    }
    Ok(DensityMatrix(&u.0 * &rho.0 * u.0.adjoint()))
}

/// Reduced state of one factor.
pub fn partial_trace(rho: &DensityMatrix, idx: JointIndex, keep: Side) -> Result<DensityMatrix> {
    if rho.dim() != idx.dim() {
        return Err(CoolError::Dimension(format!(
            "state dimension {} does not match {}x{}",
            rho.dim(),
            idx.d_left,
            idx.d_right
        )));
    }
    let m = &rho.0;
    let out = match keep {
        Side::Left => {
            let d = idx.d_left;
            CMatrix::from_fn(d, d, |a, b| {
                (0..idx.d_right)
                    .map(|j| m[(idx.flat(a, j), idx.flat(b, j))])
                    .sum()
            })
        }
        Side::Right => {
            let d = idx.d_right;
            CMatrix::from_fn(d, d, |a, b| {
                (0..idx.d_left)
                    .map(|i| m[(idx.flat(i, a), idx.flat(i, b))])
                    .sum()
            })
        }
    };
    Ok(DensityMatrix(out))
}

/// Marginal of a joint population vector.
pub fn marginal(p: &[f64], idx: JointIndex, keep: Side) -> Vec<f64> {
    match keep {
        Side::Left => (0..idx.d_left)
            .map(|i| (0..idx.d_right).map(|j| p[idx.flat(i, j)]).sum())
            .collect(),
        Side::Right => (0..idx.d_right)
            .map(|j| (0..idx.d_left).map(|i| p[idx.flat(i, j)]).sum())
            .collect(),
    }
}

/// Real parts of the diagonal. Fails if any diagonal entry has an imaginary
/// part of at least `1e-12`.
pub fn diag_of(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rho.dim());
    for i in 0..rho.dim() {
        let z = rho.0[(i, i)];
        if z.im.abs() >= PROB_TOL {
            return Err(CoolError::NotHermitian(z.im.abs()));
        }
        out.push(z.re);
    }
    Ok(out)
}

/// Haar-distributed unitary drawn from `rng`.
pub fn haar_unitary_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitaryMatrix {
    let z = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        let rk = r[(k, k)];
        let phase = if rk.norm() > 0.0 { rk / rk.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, k)] *= phase;
        }
    }
    UnitaryMatrix(q)
}

/// Haar-distributed unitary, deterministic in `seed`.
pub fn haar_random_unitary(d: usize, seed: u64) -> UnitaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_with(d, &mut rng)
}

/// Groups indices whose energies agree within [`DEGENERACY_TOL`].
pub fn energy_groups(h_flat: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..h_flat.len()).collect();
    order.sort_by(|&a, &b| h_flat[a].partial_cmp(&h_flat[b]).unwrap().then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for k in order {
        if h_flat[k] - last > DEGENERACY_TOL || groups.is_empty() {
            groups.push(vec![k]);
        } else {
            groups.last_mut().unwrap().push(k);
        }
        last = h_flat[k];
    }
    for g in groups.iter_mut() {
        g.sort_unstable();
    }
    groups
}

/// Max-entry norm of `[U, diag(h)]` after grouping degenerate energies.
///
/// Entries linking indices of the same energy group contribute nothing, so
/// floating-point noise in nominally equal energies is ignored.
pub fn commutator_norm(u: &UnitaryMatrix, h_flat: &[f64]) -> Result<f64> {
    if u.dim() != h_flat.len() {
        return Err(CoolError::Dimension(format!(
            "unitary dimension {} does not match {} energies",
            u.dim(),
            h_flat.len()
        )));
    }
    let n = u.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let de = (h_flat[i] - h_flat[j]).abs();
            if de > DEGENERACY_TOL {
                worst = worst.max(u.0[(i, j)].norm() * de);
            }
        }
    }
    Ok(worst)
}

/// True iff `U` leaves every energy eigenspace of `diag(h_flat)` invariant.
pub fn commutes_with_hamiltonian(u: &UnitaryMatrix, h_flat: &[f64]) -> bool {
    matches!(commutator_norm(u, h_flat), Ok(x) if x < COMMUTATION_TOL)
}

/// Haar-random unitary inside each energy eigenspace.
pub fn random_energy_conserving_unitary<R: Rng + ?Sized>(h_flat: &[f64], rng: &mut R) -> UnitaryMatrix {
    let n = h_flat.len();
    let mut m = CMatrix::zeros(n, n);
    for g in energy_groups(h_flat) {
        let v = haar_unitary_with(g.len(), rng);
        for (a, &i) in g.iter().enumerate() {
            for (b, &j) in g.iter().enumerate() {
                m[(i, j)] = v.0[(a, b)];
            }
        }
    }
    UnitaryMatrix(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorization::majorizes;
    use crate::spectra::{gibbs_from_energies, gibbs_populations, InverseTemperature};
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn tensor_and_joint() {
        assert_eq!(tensor_diag(&[1.0, 0.0], &[1.0, 0.0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(tensor_diag(&[0.5, 0.5], &[0.5, 0.5]), vec![0.25; 4]);
        let h1 = Hamiltonian::new(vec![0.0, 1.0]).unwrap();
        let h2 = Hamiltonian::new(vec![0.0, 2.0]).unwrap();
        let (e, idx) = joint_hamiltonian(&h1, &h2);
        assert_eq!(e, vec![0.0, 2.0, 1.0, 3.0]);
        assert_eq!(idx.dim(), 4);
        let b = InverseTemperature::new(1.0).unwrap();
        let prod = tensor_diag(gibbs_populations(&h1, b).as_slice(), gibbs_populations(&h2, b).as_slice());
        let joint = gibbs_from_energies(&e, b);
        for (x, y) in prod.iter().zip(&joint) {
            assert!((x - y).abs() < 1e-15);
        }
        let h3 = Hamiltonian::new(vec![0.0, 0.4, 1.4]).unwrap();
        let (e, _) = joint_hamiltonian(&h1, &h3);
        let want = [0.0, 0.4, 1.4, 1.0, 1.4, 2.4];
        for (x, y) in e.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        let (e, idx) = joint_hamiltonian(&h3, &h3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(e[idx.flat(i, j)], e[idx.flat(j, i)]);
            }
        }
    }

    #[test]
    fn joint_index_roundtrip() {
        let idx = JointIndex::new(3, 4);
        for k in 0..12 {
            let (i, j) = idx.split(k);
            assert_eq!(idx.flat(i, j), k);
        }
    }

    #[test]
    fn unitary_action_basics() {
        let rho = DensityMatrix::from_diag(&[0.6, 0.3, 0.1]);
        let same = apply_unitary(&rho, &UnitaryMatrix::identity(3)).unwrap();
        assert_eq!(same, rho);
        let p = UnitaryMatrix::permutation(&[1, 2, 0]).unwrap();
        let moved = apply_unitary(&rho, &p).unwrap();
        assert_eq!(diag_of(&moved).unwrap(), vec![0.1, 0.6, 0.3]);
        assert!(apply_unitary(&rho, &UnitaryMatrix::identity(2)).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let a = DensityMatrix::from_diag(&[0.7, 0.3]);
        let b = DensityMatrix::from_diag(&[0.2, 0.5, 0.3]);
        let ab = tensor(&a, &b);
        let idx = JointIndex::new(2, 3);
        let ra = partial_trace(&ab, idx, Side::Left).unwrap();
        let rb = partial_trace(&ab, idx, Side::Right).unwrap();
        assert!(max_abs(&(ra.matrix() - a.matrix())) < 1e-12);
        assert!(max_abs(&(rb.matrix() - b.matrix())) < 1e-12);

        let d = 3;
        let mut psi = na::DVector::zeros(d * d);
        for i in 0..d {
            psi[i * d + i] = c(1.0 / (d as f64).sqrt());
        }
        let rho = DensityMatrix::pure(&psi).unwrap();
        let red = partial_trace(&rho, JointIndex::new(d, d), Side::Left).unwrap();
        let want = CMatrix::identity(d, d) * c(1.0 / d as f64);
        assert!(max_abs(&(red.matrix() - want)) < 1e-12);
    }

    #[test]
    fn random_states_keep_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u = haar_unitary_with(6, &mut rng);
            let rho = apply_unitary(&DensityMatrix::from_diag(&[0.4, 0.2, 0.15, 0.1, 0.1, 0.05]), &u).unwrap();
            assert!(DensityMatrix::new(rho.matrix().clone()).is_ok());
            for side in [Side::Left, Side::Right] {
                let r = partial_trace(&rho, JointIndex::new(2, 3), side).unwrap();
                assert!((r.matrix().trace().re - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn haar_is_deterministic_and_unitary() {
        let u1 = haar_random_unitary(5, 42);
        let u2 = haar_random_unitary(5, 42);
        assert_eq!(u1, u2);
        for k in 0..5 {
            let n: f64 = u1.matrix().column(k).iter().map(|z| z.norm_sqr()).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-12);
        }
        let u = haar_random_unitary(1, 3);
        assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(UnitaryMatrix::new(u1.matrix().clone()).is_ok());
    }

    #[test]
    fn haar_preserves_spectrum() {
        let rho = DensityMatrix::from_diag(&[0.5, 0.3, 0.2]);
        let u = haar_random_unitary(3, 11);
        let out = apply_unitary(&rho, &u).unwrap();
        for (a, b) in out.eigenvalues().iter().zip(rho.eigenvalues()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(max_abs(&(out.matrix() - out.matrix().adjoint())) < 1e-12);
    }

    #[test]
    fn diag_of_rejects_imaginary_diagonal() {
        let mut m = CMatrix::identity(2, 2) * c(0.5);
        m[(0, 0)] = Complex64::new(0.5, 1e-6);
        assert!(diag_of(&DensityMatrix(m)).is_err());
        assert_eq!(diag_of(&DensityMatrix::from_diag(&[0.25; 4])).unwrap(), vec![0.25; 4]);
    }

    #[test]
    fn commutation_examples() {
        let h = [0.0, 1.0, 1.0];
        assert!(commutes_with_hamiltonian(&UnitaryMatrix::identity(3), &h));
        assert!(commutes_with_hamiltonian(&UnitaryMatrix::permutation(&[0, 2, 1]).unwrap(), &h));
        assert!(!commutes_with_hamiltonian(&UnitaryMatrix::permutation(&[1, 0, 2]).unwrap(), &h));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = [0.0, 1.4, 0.4, 1.4, 1.0 + 0.4, 2.4];
        let u = random_energy_conserving_unitary(&e, &mut rng);
        assert!(commutes_with_hamiltonian(&u, &e));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn schur_diag_majorized_by_spectrum(
            raw in prop::collection::vec(0.0f64..1.0, 2..=8),
            seed in any::<u64>(),
        ) {
            let s: f64 = raw.iter().sum::<f64>() + 1e-3;
            let p: Vec<f64> = raw.iter().map(|x| (x + 1e-3 / raw.len() as f64) / s).collect();
            let rho = DensityMatrix::from_diag(&p);
            let u = haar_random_unitary(p.len(), seed);
            let out = apply_unitary(&rho, &u).unwrap();
            let d = diag_of(&out).unwrap();
            prop_assert!(majorizes(&p, &d).holds);
        }
    }
}
