//! Dense two-phase simplex for small linear programs in standard form
//! `A x = b, x ≥ 0`, with Farkas certificates on infeasibility.

use nalgebra as na;

use crate::error::{CoolError, Result};

const PIVOT_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

/// `y` with `Aᵀ y ≤ 0` and `bᵀ y > 0`, normalized to `max |y_i| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub y: Vec<f64>,
    /// `bᵀ y` after normalization.
    pub violation: f64,
}

impl FarkasCertificate {
    /// Largest entry of `Aᵀ y`; should be `≤ 0` up to rounding.
    pub fn max_row_violation(&self, a: &na::DMatrix<f64>) -> f64 {
        let y = na::DVector::from_column_slice(&self.y);
        (a.transpose() * y).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible(FarkasCertificate),
    Unbounded,
}

struct Tableau {
    m: usize,
    n: usize,
    /// `m` constraint rows followed by the objective row; last column is the rhs.
    t: na::DMatrix<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.t.ncols();
        let p = self.t[(r, c)];
        for j in 0..cols {
            self.t[(r, j)] /= p;
        }
        for i in 0..=self.m {
            if i != r {
                let f = self.t[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        let v = self.t[(r, j)];
                        self.t[(i, j)] -= f * v;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule on columns `< allowed`. Returns false on unboundedness.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        let rhs = self.t.ncols() - 1;
        for _ in 0..MAX_PIVOTS {
            let Some(c) = (0..allowed).find(|&j| self.t[(self.m, j)] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[(i, c)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14
                                || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(CoolError::Internal("simplex pivot limit reached".into()))
    }

    fn solution(&self) -> Vec<f64> {
        let rhs = self.t.ncols() - 1;
        let mut x = vec![0.0; self.n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.t[(i, rhs)].max(0.0);
            }
        }
        x
    }
}

/// Minimizes `cᵀ x` subject to `A x = b`, `x ≥ 0`.
pub fn minimize(c: &[f64], a: &na::DMatrix<f64>, b: &[f64]) -> Result<LpOutcome> {
    let (m, n) = a.shape();
    if b.len() != m || c.len() != n {
        return Err(CoolError::Dimension(format!(
            "LP shapes disagree: A is {m}x{n}, b has {}, c has {}",
            b.len(),
            c.len()
        )));
    }
    let mut sign = vec![1.0; m];
    let mut t = na::DMatrix::<f64>::zeros(m + 1, n + m + 1);
    for i in 0..m {
        if b[i] < 0.0 {
            sign[i] = -1.0;
        }
        for j in 0..n {
            t[(i, j)] = sign[i] * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = sign[i] * b[i];
    }
    // phase-1 reduced costs: -(sum of rows) on structural columns
    for j in 0..n {
        t[(m, j)] = -(0..m).map(|i| t[(i, j)]).sum::<f64>();
    }
    t[(m, n + m)] = -(0..m).map(|i| t[(i, n + m)]).sum::<f64>();
    let mut tab = Tableau { m, n, t, basis: (n..n + m).collect() };
    tab.optimize(n + m)?;
    let phase1 = -tab.t[(m, n + m)];
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if phase1 > FEASIBILITY_TOL * scale {
        // y_i = 1 - reduced cost of artificial i, mapped back through the row signs
        let mut y: Vec<f64> = (0..m).map(|i| sign[i] * (1.0 - tab.t[(m, n + i)])).collect();
        let ymax = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if ymax > 0.0 {
            y.iter_mut().for_each(|v| *v /= ymax);
        }
        let violation = y.iter().zip(b).map(|(u, v)| u * v).sum();
        return Ok(LpOutcome::Infeasible(FarkasCertificate { y, violation }));
    }
    // drive artificial variables out of the basis
    let mut redundant = Vec::new();
    for r in 0..m {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.t[(r, j)].abs() > PIVOT_TOL) {
                Some(j) => tab.pivot(r, j),
                None => redundant.push(r),
            }
        }
    }
    for &r in &redundant {
        for j in 0..tab.t.ncols() {
            tab.t[(r, j)] = 0.0;
        }
    }
    // phase-2 objective row
    for j in 0..n + m + 1 {
        tab.t[(m, j)] = if j < n { c[j] } else { 0.0 };
    }
    for r in 0..m {
        let bcol = tab.basis[r];
        if bcol < n && !redundant.contains(&r) {
            let cb = c[bcol];
            if cb != 0.0 {
                for j in 0..n + m + 1 {
                    let v = tab.t[(r, j)];
                    tab.t[(m, j)] -= cb * v;
                }
            }
        }
    }
    if !tab.optimize(n)? {
        return Ok(LpOutcome::Unbounded);
    }
    let x = tab.solution();
    let value = x.iter().zip(c).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Feasibility of `A x = b, x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible(FarkasCertificate),
}

pub fn find_feasible(a: &na::DMatrix<f64>, b: &[f64]) -> Result<Feasibility> {
    let c = vec![0.0; a.ncols()];
    match minimize(&c, a, b)? {
        LpOutcome::Optimal { x, .. } => Ok(Feasibility::Feasible(x)),
        LpOutcome::Infeasible(cert) => Ok(Feasibility::Infeasible(cert)),
        LpOutcome::Unbounded => Err(CoolError::Internal("zero objective reported unbounded".into())),
    }
}

/// Result of a convex-hull membership query.
#[derive(Debug, Clone, PartialEq)]
pub enum Membership {
    /// Convex weights, one per vertex.
    Inside(Vec<f64>),
    /// Hyperplane `normal · v + offset ≤ 0` for every vertex, while the
    /// target gives `violation > 0` (distance units).
    Outside { normal: Vec<f64>, offset: f64, violation: f64 },
}

/// Is `target` in the convex hull of `vertices`?
pub fn polytope_membership(target: &[f64], vertices: &[Vec<f64>]) -> Result<Membership> {
    let dim = target.len();
    if vertices.is_empty() || vertices.iter().any(|v| v.len() != dim) {
        return Err(CoolError::Dimension("vertex dimensions disagree with target".into()));
    }
    let n = vertices.len();
    let mut a = na::DMatrix::<f64>::zeros(dim + 1, n);
    for (k, v) in vertices.iter().enumerate() {
        for i in 0..dim {
            a[(i, k)] = v[i];
        }
        a[(dim, k)] = 1.0;
    }
    let mut b = target.to_vec();
    b.push(1.0);
    match find_feasible(&a, &b)? {
        Feasibility::Feasible(w) => Ok(Membership::Inside(w)),
        Feasibility::Infeasible(cert) => {
            let normal = cert.y[..dim].to_vec();
            let offset = cert.y[dim];
            let nn = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            let raw: f64 = normal.iter().zip(target).map(|(u, v)| u * v).sum::<f64>() + offset;
            let violation = if nn > 0.0 { raw / nn } else { raw };
            Ok(Membership::Outside { normal, offset, violation })
        }
    }
}
