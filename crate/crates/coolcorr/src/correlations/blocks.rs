//! Latin-square block decomposition of a symmetric two-party thermal state
//! and the induced linear map on the marginal.
//!
//! Block `i` holds the joint states `|j, j+i mod d⟩`. With `Π` the cyclic
//! shift `(Π v)_j = v_{j-1}`, the blocks satisfy `r_{d-i} = Π^i r_i`.

use nalgebra as na;

use crate::error::{CoolError, Result};
use crate::majorization::DoublyStochasticMatrix;
use crate::spectra::{gibbs_populations, Hamiltonian, InverseTemperature};

/// `Π^s v`.
pub fn shift_vec(v: &[f64], s: usize) -> Vec<f64> {
    let d = v.len();
    let mut out = vec![0.0; d];
    for j in 0..d {
        out[(j + s) % d] = v[j];
    }
    out
}

/// `Π^s` as a matrix.
pub fn shift_matrix(d: usize, s: usize) -> na::DMatrix<f64> {
    let mut m = na::DMatrix::zeros(d, d);
    for j in 0..d {
        m[((j + s) % d, j)] = 1.0;
    }
    m
}

/// Number of independent transforms minus one: `(d-1)/2` for odd `d`, `d/2` for even.
pub fn num_free_blocks(d: usize) -> usize {
    if d % 2 == 1 {
        (d - 1) / 2
    } else {
        d / 2
    }
}

/// Weight of `(1 + Π^i) M_i r_i`: one half only for the middle block of even `d`.
pub fn block_weight(i: usize, d: usize) -> f64 {
    1.0 / ((2 * i / d) as f64 + 1.0)
}

/// Flat joint index of position `j` in block `i`.
pub fn block_index(d: usize, i: usize, j: usize) -> usize {
    j * d + (j + i) % d
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().sum()
}

/// Block vectors of `τ(β) ⊗ τ(β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    pub d: usize,
    /// `vectors[i][j] = p_j p_{(j+i) mod d}`.
    pub vectors: Vec<Vec<f64>>,
}

impl BlockDecomposition {
    pub fn from_populations(p: &[f64]) -> Self {
        let d = p.len();
        let vectors = (0..d)
            .map(|i| (0..d).map(|j| p[j] * p[(j + i) % d]).collect())
            .collect();
        Self { d, vectors }
    }

    /// Joint flat indices of block `i`.
    pub fn block(&self, i: usize) -> Vec<usize> {
        (0..self.d).map(|j| block_index(self.d, i, j)).collect()
    }

    pub fn norm(&self, i: usize) -> f64 {
        norm1(&self.vectors[i])
    }

    /// Marginal `Σ_i r_i`.
    pub fn marginal(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| self.vectors.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// Block vectors of the initial state `τ(β_R) ⊗ τ(β_R)`.
pub fn latin_blocks(h: &Hamiltonian, beta: InverseTemperature) -> BlockDecomposition {
    BlockDecomposition::from_populations(gibbs_populations(h, beta).as_slice())
}

/// Block vectors of the target `τ(β′) ⊗ τ(β′)`.
pub type TargetBlocks = BlockDecomposition;

/// `p̃ = M_0 r_0 + Σ_{i=1..k} c_i (1 + Π^i) M_i r_i`.
pub fn marginal_transform(blocks: &BlockDecomposition, m: &[DoublyStochasticMatrix]) -> Result<Vec<f64>> {
    let d = blocks.d;
    let k = num_free_blocks(d);
    if m.len() != k + 1 {
        return Err(CoolError::Dimension(format!(
            "expected {} matrices for d = {d}, got {}",
            k + 1,
            m.len()
        )));
    }
    if m.iter().any(|x| x.dim() != d) {
        return Err(CoolError::Dimension("matrix dimension differs from d".into()));
    }
    let mut out = m[0].apply(&blocks.vectors[0]);
    for i in 1..=k {
        let t = m[i].apply(&blocks.vectors[i]);
        let c = block_weight(i, d);
        let s = shift_vec(&t, i);
        for j in 0..d {
            out[j] += c * (t[j] + s[j]);
        }
    }
    Ok(out)
}

/// `x_i = (i+1) p_{i+1} - Σ_{j≤i} p_j` for `i = 0..d-2`.
pub fn simplex_coordinates(p: &[f64]) -> Vec<f64> {
    let d = p.len();
    let mut out = Vec::with_capacity(d - 1);
    let mut acc = 0.0;
    for i in 0..d - 1 {
        acc += p[i];
        out.push((i + 1) as f64 * p[i + 1] - acc);
    }
    out
}

/// Matrix mapping `p` to `(x, Σ p)`.
pub fn coordinate_matrix(d: usize) -> na::DMatrix<f64> {
    let mut b = na::DMatrix::zeros(d, d);
    for i in 0..d - 1 {
        for j in 0..=i {
            b[(i, j)] = -1.0;
        }
        b[(i, i + 1)] = (i + 1) as f64;
    }
    for j in 0..d {
        b[(d - 1, j)] = 1.0;
    }
    b
}

/// Inverse of [`simplex_coordinates`] for normalized vectors.
pub fn from_simplex_coordinates(x: &[f64]) -> Vec<f64> {
    let d = x.len() + 1;
    // columns of the inverse: q_i = (e_{i+1} - (1/(i+1)) Σ_{j≤i} e_j) / (i+2), plus uniform
    let mut p = vec![1.0 / d as f64; d];
    for (i, &xi) in x.iter().enumerate() {
        let scale = xi / (i + 2) as f64;
        for pj in p.iter_mut().take(i + 1) {
            *pj -= scale / (i + 1) as f64;
        }
        p[i + 1] += scale;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn beta(b: f64) -> InverseTemperature {
        InverseTemperature::new(b).unwrap()
    }

    #[test]
    fn block_examples() {
        let h = Hamiltonian::qubit(1.0).unwrap();
        let b = latin_blocks(&h, beta(0.0));
        assert_eq!(b.vectors, vec![vec![0.25, 0.25], vec![0.25, 0.25]]);
        let h3 = Hamiltonian::new(vec![0.0, 0.3, 1.1]).unwrap();
        let b = latin_blocks(&h3, beta(1.3));
        for i in 1..3 {
            let s = shift_vec(&b.vectors[i], i);
            for j in 0..3 {
                assert!((s[j] - b.vectors[3 - i][j]).abs() < 1e-14);
            }
        }
        let total: f64 = (0..3).map(|i| b.norm(i)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let z = latin_blocks(&h3, InverseTemperature::zero_temperature());
        assert_eq!(z.vectors[0], vec![1.0, 0.0, 0.0]);
        assert!(z.vectors[1..].iter().all(|r| r.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn blocks_form_a_latin_square() {
        for d in 2..=6 {
            let b = BlockDecomposition::from_populations(&vec![1.0 / d as f64; d]);
            let mut seen = vec![false; d * d];
            for i in 0..d {
                let idx = b.block(i);
                let mut rows = vec![false; d];
                let mut cols = vec![false; d];
                for &k in &idx {
                    assert!(!seen[k]);
                    seen[k] = true;
                    rows[k / d] = true;
                    cols[k % d] = true;
                }
                assert!(rows.iter().all(|&x| x) && cols.iter().all(|&x| x));
            }
            assert!(seen.iter().all(|&x| x));
        }
    }

    #[test]
    fn transform_examples() {
        let h = Hamiltonian::new(vec![0.0, 0.4, 0.9, 1.7]).unwrap();
        let b = latin_blocks(&h, beta(1.0));
        let ids = vec![DoublyStochasticMatrix::identity(4); 3];
        let p = marginal_transform(&b, &ids).unwrap();
        let g = gibbs_populations(&h, beta(1.0));
        for j in 0..4 {
            assert!((p[j] - g[j]).abs() < 1e-15);
        }
        assert!(marginal_transform(&b, &ids[..2]).is_err());
        let h2 = Hamiltonian::qubit(1.0).unwrap();
        let b2 = latin_blocks(&h2, beta(1.0));
        let swaps = vec![DoublyStochasticMatrix::permutation(&[1, 0]); 2];
        let p = marginal_transform(&b2, &swaps).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn coordinate_examples() {
        assert!(simplex_coordinates(&[0.25; 4]).iter().all(|x| x.abs() < 1e-15));
        assert_eq!(simplex_coordinates(&[1.0, 0.0, 0.0]), vec![-1.0, -1.0]);
        let h = Hamiltonian::new(vec![0.0, 0.5, 0.6, 2.0]).unwrap();
        for b in [0.0, 0.3, 1.0, 5.0] {
            let x = simplex_coordinates(gibbs_populations(&h, beta(b)).as_slice());
            assert!(x.iter().all(|&v| v <= 1e-15));
        }
    }

    proptest! {
        #[test]
        fn coordinates_round_trip(raw in prop::collection::vec(0.0f64..1.0, 2..=8)) {
            let s: f64 = raw.iter().sum::<f64>() + 1e-9;
            let p: Vec<f64> = raw.iter().map(|x| (x + 1e-9 / raw.len() as f64) / s).collect();
            let x = simplex_coordinates(&p);
            let q = from_simplex_coordinates(&x);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // the explicit inverse agrees with inverting the coordinate matrix
            let b = coordinate_matrix(p.len());
            let mut xs = x.clone();
            xs.push(1.0);
            let inv = b.try_inverse().unwrap() * na::DVector::from_vec(xs);
            for (a, b) in p.iter().zip(inv.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
