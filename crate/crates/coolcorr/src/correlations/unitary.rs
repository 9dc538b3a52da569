//! Assembly of the joint unitary `⊕_i O_i` from a certificate, and dense
//! evaluation of the resulting state.

use nalgebra as na;

use super::blocks::{block_index, num_free_blocks, shift_vec, BlockDecomposition};
use super::mutual_information;
use super::stu::{StuCertificate, STU_RESIDUAL_TOL};
use crate::error::{CoolError, Result};
use crate::majorization::horn_transfer;
use crate::quantum::{apply_unitary, partial_trace, tensor_diag, CMatrix, DensityMatrix, JointIndex, Side, UnitaryMatrix};
use crate::spectra::{gibbs_populations, shannon_entropy, Hamiltonian, InverseTemperature};

/// Image of every block `r_0..r_{d-1}` under the certificate, completed by
/// the cyclic symmetry `t_{d-i} = Π^i t_i`.
pub fn block_images(cert: &StuCertificate, blocks: &BlockDecomposition) -> Result<Vec<Vec<f64>>> {
    let d = blocks.d;
    let k = num_free_blocks(d);
    if cert.matrices.len() != k + 1 || cert.matrices.iter().any(|m| m.dim() != d) {
        return Err(CoolError::Dimension(format!(
            "certificate with {} matrices does not fit d = {d}",
            cert.matrices.len()
        )));
    }
    let mut images = vec![Vec::new(); d];
    images[0] = cert.matrices[0].apply(&blocks.vectors[0]);
    for i in 1..=k {
        let t = cert.matrices[i].apply(&blocks.vectors[i]);
        if 2 * i == d {
            let s = shift_vec(&t, i);
            images[i] = t.iter().zip(&s).map(|(a, b)| 0.5 * (a + b)).collect();
        } else {
            images[d - i] = shift_vec(&t, i);
            images[i] = t;
        }
    }
    Ok(images)
}

/// Block-diagonal unitary on `d²` whose block `i` is a real orthogonal
/// T-transform witness sending `r_i` to its certified image.
pub fn build_stu_unitary(cert: &StuCertificate, blocks: &BlockDecomposition) -> Result<UnitaryMatrix> {
    if !(cert.residual < STU_RESIDUAL_TOL) {
        return Err(CoolError::InvalidArgument(format!(
            "certificate residual {:e} is not below {STU_RESIDUAL_TOL:e}",
            cert.residual
        )));
    }
    let d = blocks.d;
    let images = block_images(cert, blocks)?;
    let mut u = na::DMatrix::<f64>::zeros(d * d, d * d);
    for (i, t) in images.iter().enumerate() {
        let o = horn_transfer(t, &blocks.vectors[i])
            .map_err(|e| CoolError::Internal(format!("block {i} image is not reachable: {e}")))?
            .orthogonal();
        for a in 0..d {
            for b in 0..d {
                u[(block_index(d, i, a), block_index(d, i, b))] = o[(a, b)];
            }
        }
    }
    UnitaryMatrix::from_real(&u)
}

/// Dense evaluation of `U τ(β_R)^{⊗2} U†`.
#[derive(Debug, Clone, PartialEq)]
pub struct StuEvaluation {
    pub marginal_a: Vec<f64>,
    pub marginal_b: Vec<f64>,
    /// Largest off-diagonal modulus over both marginals.
    pub max_offdiag: f64,
    /// Max-norm distance of both marginals to `τ(β′)`.
    pub marginal_error: f64,
    /// `‖marginal_a - marginal_b‖_max`.
    pub symmetry_gap: f64,
    pub mutual_information: f64,
    pub marginal_entropy_sum: f64,
    pub energy: f64,
}

pub fn evaluate_stu(
    h: &Hamiltonian,
    beta_r: InverseTemperature,
    beta_prime: InverseTemperature,
    u: &UnitaryMatrix,
) -> Result<StuEvaluation> {
    let d = h.dim();
    let idx = JointIndex::new(d, d);
    let p = gibbs_populations(h, beta_r);
    let rho = DensityMatrix::from_diag(&tensor_diag(p.as_slice(), p.as_slice()));
    let out = apply_unitary(&rho, u)?;
    let ra = partial_trace(&out, idx, Side::Left)?;
    let rb = partial_trace(&out, idx, Side::Right)?;
    let diag = |m: &CMatrix| (0..d).map(|j| m[(j, j)].re).collect::<Vec<f64>>();
    let (ma, mb) = (diag(ra.matrix()), diag(rb.matrix()));
    let target = gibbs_populations(h, beta_prime);
    let marginal_error = (0..d)
        .map(|j| (ma[j] - target[j]).abs().max((mb[j] - target[j]).abs()))
        .fold(0.0, f64::max);
    let symmetry_gap = (0..d).map(|j| (ma[j] - mb[j]).abs()).fold(0.0, f64::max);
    let e = h.energies();
    let mut energy = 0.0;
    for a in 0..d {
        for b in 0..d {
            let k = idx.flat(a, b);
            energy += out.matrix()[(k, k)].re * (e[a] + e[b]);
        }
    }
    Ok(StuEvaluation {
        max_offdiag: ra.max_offdiag().max(rb.max_offdiag()),
        marginal_entropy_sum: ra.entropy() + rb.entropy(),
        mutual_information: mutual_information(&out, idx)?,
        marginal_a: ma,
        marginal_b: mb,
        marginal_error,
        symmetry_gap,
        energy,
    })
}

/// `2 S(τ(β′)) - 2 S(τ(β_R))`: the information gained by any state with
/// thermal marginals at `β′` starting from `τ(β_R)^{⊗2}`.
pub fn expected_information(h: &Hamiltonian, beta_r: InverseTemperature, beta_prime: InverseTemperature) -> f64 {
    2.0 * (shannon_entropy(gibbs_populations(h, beta_prime).as_slice())
        - shannon_entropy(gibbs_populations(h, beta_r).as_slice()))
}

