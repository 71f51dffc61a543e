//! Residues of the canonical logarithmic extension of a local system at a
//! puncture, integer twists of eigenblocks, and reconstruction of the
//! monodromy from a residue.

use std::f64::consts::PI;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json::{complex_to_json, matrix_to_json};
use crate::linalg::{
    cluster_eigenvalues, eigenvalues, frobenius, hconcat, identity, inverse, invariance_residual, singular_values, svd,
    CMatrix, C64,
};

/// Eigenvalues closer than this (relative) share one generalized block.
pub const CLUSTER_RTOL: f64 = 1e-7;
/// Frobenius tolerance for exp(2πi·R) = m.
pub const MONODROMY_TOL: f64 = 1e-8;
/// Arguments within this distance below 2π wrap to 0.
const ARG_WRAP_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct EigenBlock {
    pub eigenvalue: C64,
    /// log e with imaginary part in [0, 2π), shifted by −2πi·n after a twist by n.
    pub log_choice: C64,
    /// log(e⁻¹·m|_B) in the coordinates of `basis`.
    pub nilpotent: CMatrix,
    /// Orthonormal columns spanning the generalized eigenspace.
    pub basis: CMatrix,
    pub dim: usize,
}

impl EigenBlock {
    /// (1/2πi)(log_choice·Id + N) in block coordinates.
    pub fn residue(&self) -> CMatrix {
        (identity(self.dim) * self.log_choice + &self.nilpotent) / two_pi_i()
    }
}

#[derive(Clone, Debug)]
pub struct ResidueData {
    pub blocks: Vec<EigenBlock>,
    pub residue: CMatrix,
    /// Integer shift applied to each block since normalization.
    pub shifts: Vec<i64>,
}

impl ResidueData {
    pub fn rank(&self) -> usize {
        self.residue.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.shifts.iter().all(|&n| n == 0)
    }

    fn assemble(blocks: &[EigenBlock]) -> Result<CMatrix> {
        let frame = hconcat(&blocks.iter().map(|b| &b.basis).collect::<Vec<_>>());
        let r = frame.nrows();
        let mut diag = CMatrix::zeros(r, r);
        let mut at = 0;
        for b in blocks {
            diag.view_mut((at, at), (b.dim, b.dim)).copy_from(&b.residue());
            at += b.dim;
        }
        Ok(&frame * diag * inverse(&frame)?)
    }

    pub fn to_json(&self) -> Value {
        let blocks: Vec<Value> = self
            .blocks
            .iter()
            .map(|b| {
                json!({
                    "eigenvalue": complex_to_json(b.eigenvalue),
                    "log": complex_to_json(b.log_choice),
                    "dim": b.dim,
                    "nilpotent": matrix_to_json(&b.nilpotent),
                    "basis": matrix_to_json(&b.basis),
                })
            })
            .collect();
        json!({"blocks": blocks, "residue": matrix_to_json(&self.residue), "shifts": self.shifts})
    }
}

fn two_pi_i() -> C64 {
    C64::new(0.0, 2.0 * PI)
}

/// log e with argument in [0, 2π).
pub fn branch_log(e: C64) -> C64 {
    let mut arg = e.im.atan2(e.re);
    if arg < 0.0 {
        arg += 2.0 * PI;
    }
    if arg >= 2.0 * PI - ARG_WRAP_TOL {
        arg = 0.0;
    }
    C64::new(e.norm().ln(), arg)
}

/// log(Id + X) by its power series; X must have small spectral radius.
fn log_unipotent(x: &CMatrix) -> CMatrix {
    let k = x.nrows();
    let mut out = CMatrix::zeros(k, k);
    let mut power = identity(k);
    for j in 1..=64 {
        power = &power * x;
        let size = frobenius(&power);
        if size == 0.0 {
            break;
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        out += &power * C64::from(sign / j as f64);
        if size < 1e-18 && j >= k {
            break;
        }
    }
    out
}

pub fn deligne_residue(m: &CMatrix) -> Result<ResidueData> {
    let r = m.nrows();
    if r == 0 || m.ncols() != r {
        return Err(Error::DimensionMismatch("monodromy must be square and nonempty".into()));
    }
    inverse(m)?;
    let clusters = cluster_eigenvalues(&eigenvalues(m)?, CLUSTER_RTOL);
    let scale = frobenius(m).max(1.0);
    let mut blocks = Vec::with_capacity(clusters.len());
    for (lambda, k) in clusters {
        let shifted = m - identity(r) * lambda;
        let mut power = identity(r);
        for _ in 0..k {
            power *= &shifted;
        }
        // The k right singular vectors of smallest singular value span ker((m − λ)^k).
        let d = svd(&power);
        let cols: Vec<_> = (r - k..r).map(|i| d.v_h.row(i).adjoint()).collect();
        let basis = CMatrix::from_columns(&cols);
        let defect = invariance_residual(m, &basis);
        if defect > 1e-8 {
            let sv = singular_values(&power);
            let separation = if k < r { sv[r - k - 1] / scale.powi(k as i32) } else { 1.0 };
            return Err(Error::Numerical(format!(
                "eigenvalue cluster at {lambda} of size {k} is not separated (separation {separation:.3e}, invariance defect {defect:.3e})"
            )));
        }
        let restricted = basis.adjoint() * m * &basis;
        let e = restricted.trace() / k as f64;
        let nilpotent = log_unipotent(&(&restricted / e - identity(k)));
        blocks.push(EigenBlock { eigenvalue: e, log_choice: branch_log(e), nilpotent, basis, dim: k });
    }
    let residue = ResidueData::assemble(&blocks)?;
    Ok(ResidueData { shifts: vec![0; blocks.len()], blocks, residue })
}

/// −Σ Re(eigenvalues of the residues), with multiplicity, over all punctures.
pub fn extension_degree(data: &[ResidueData]) -> f64 {
    -data.iter().map(|d| d.residue.trace().re).sum::<f64>()
}

/// Shifts the residue of block α by −n_α·Id.
pub fn rhd_twist(data: &ResidueData, shifts: &[i64]) -> Result<ResidueData> {
    if shifts.len() != data.blocks.len() {
        return Err(Error::Precondition(format!("{} shifts for {} eigenblocks", shifts.len(), data.blocks.len())));
    }
    let blocks: Vec<EigenBlock> = data
        .blocks
        .iter()
        .zip(shifts)
        .map(|(b, &n)| EigenBlock { log_choice: b.log_choice - two_pi_i() * n as f64, ..b.clone() })
        .collect();
    Ok(ResidueData {
        residue: ResidueData::assemble(&blocks)?,
        shifts: data.shifts.iter().zip(shifts).map(|(a, b)| a + b).collect(),
        blocks,
    })
}

/// exp(2πi·R) against m in Frobenius distance.
pub fn monodromy_defect(data: &ResidueData, m: &CMatrix) -> Result<f64> {
    if m.shape() != data.residue.shape() {
        return Err(Error::DimensionMismatch(format!(
            "monodromy {}x{} against residue {}x{}",
            m.nrows(),
            m.ncols(),
            data.rank(),
            data.rank()
        )));
    }
    Ok(frobenius(&((&data.residue * two_pi_i()).exp() - m)))
}

pub fn verify_monodromy(data: &ResidueData, m: &CMatrix) -> Result<bool> {
    Ok(monodromy_defect(data, m)? < MONODROMY_TOL)
}

/// Residue data of ρ(γ) restricted to each level of a compatible flag,
/// in orthonormal coordinates of the level.
pub fn flag_residues(gamma: &CMatrix, flag: &crate::linalg::Flag) -> Result<Vec<ResidueData>> {
    (1..=flag.depth())
        .map(|l| {
            let q = flag.orthonormal_level(l);
            deligne_residue(&(q.adjoint() * gamma * &q))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, hermitian_eigenvalues};

    fn close(a: &CMatrix, b: &CMatrix) -> bool {
        frobenius(&(a - b)) < 1e-12
    }

    #[test]
    fn residue_examples() {
        assert!(close(&deligne_residue(&identity(2)).unwrap().residue, &CMatrix::zeros(2, 2)));

        let d = deligne_residue(&from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap();
        assert!(close(&d.residue, &from_real_rows(&[&[0.0, 0.0], &[0.0, 0.5]])));
        assert!((extension_degree(&[d.clone()]) + 0.5).abs() < 1e-12);

        let half = d.blocks.iter().position(|b| b.eigenvalue.re < 0.0).unwrap();
        let mut shifts = vec![0; d.blocks.len()];
        shifts[half] = 1;
        let t = rhd_twist(&d, &shifts).unwrap();
        assert!(close(&t.residue, &from_real_rows(&[&[0.0, 0.0], &[0.0, -0.5]])));
        assert!((extension_degree(&[t.clone()]) - 0.5).abs() < 1e-12);
        assert!(verify_monodromy(&t, &from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap());
        assert!(!t.is_normalized());

        let u = deligne_residue(&from_real_rows(&[&[1.0, 1.0], &[0.0, 1.0]])).unwrap();
        let expected = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]) / two_pi_i();
        assert!(close(&u.residue, &expected));
    }

    #[test]
    fn verify_examples() {
        let zero = deligne_residue(&identity(2)).unwrap();
        assert!(verify_monodromy(&zero, &identity(2)).unwrap());
        let d = deligne_residue(&from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap();
        assert!(!verify_monodromy(&d, &identity(2)).unwrap());
        assert!(rhd_twist(&d, &[1]).is_err());
        assert!(deligne_residue(&CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn branch_cut() {
        assert_eq!(branch_log(C64::new(1.0, 0.0)), C64::new(0.0, 0.0));
        assert_eq!(branch_log(C64::new(1.0, -1e-300)).im, 0.0);
        assert!((branch_log(C64::new(0.0, -1.0)).im - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn unitary_monodromy_has_hermitian_free_real_parts() {
        let m = from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let d = deligne_residue(&m).unwrap();
        let re = hermitian_eigenvalues(&crate::linalg::hermitian_part(&d.residue));
        assert!(re.iter().all(|&x| (0.0..1.0).contains(&x)));
        assert!(verify_monodromy(&d, &m).unwrap());
    }
}
