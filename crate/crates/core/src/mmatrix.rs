//! Nonsingular M-matrix test for Z-matrices, decided three ways.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::norms::EIG_TOL;

/// Lower end of the weight box `[δ, 1]`.
pub const WEIGHT_FLOOR: f64 = 1e-9;

/// Slack below which the LP answer counts as "no positive certificate".
pub(crate) const SLACK_TOL: f64 = 1e-10;

/// Leading principal minors are only cross-checked up to this size.
pub const MINOR_CHECK_DIM: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MMatrixVerdict {
    /// LP decision: a positive `ξ` with `Cξ > 0` exists.
    pub is_m_matrix: bool,
    /// The maximal `s` with `Cξ ≥ s·1`, `ξ ∈ [δ, 1]`.
    pub slack: f64,
    pub witness: Option<Vec<f64>>,
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub eigen_verdict: bool,
    pub leading_minors: Option<Vec<f64>>,
    pub minors_verdict: Option<bool>,
}

impl MMatrixVerdict {
    /// All characterizations that were computed agree.
    pub fn consistent(&self) -> bool {
        self.is_m_matrix == self.eigen_verdict
            && self.minors_verdict.is_none_or(|m| m == self.is_m_matrix)
    }
}

fn check_z(c: &DMatrix<f64>) -> Result<()> {
    if c.nrows() != c.ncols() || c.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "expected a nonempty square matrix, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    for r in 0..c.nrows() {
        for col in 0..c.ncols() {
            let v = c[(r, col)];
            if !v.is_finite() {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {col}) is not finite"
                )));
            }
            if r != col && v > 0.0 {
                return Err(Error::NotZMatrix {
                    row: r,
                    col,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Max-slack LP: maximize `s` subject to `Cξ ≥ s·1`, `δ ≤ ξ ≤ 1`, `Σξ ≥ 1`.
/// Returns `(s, ξ)`. The sum row keeps `ξ` off the floor when `s < 0`.
pub fn positive_certificate(c: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let m = c.nrows();
    let mut obj = vec![0.0; m + 1];
    obj[m] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    for r in 0..m {
        let mut row: Vec<f64> = (0..m).map(|k| c[(r, k)]).collect();
        row.push(-1.0);
        lp.constrain(row, Relation::Ge, 0.0);
    }
    for k in 0..m {
        lp.bounds(k, Some(WEIGHT_FLOOR), Some(1.0));
    }
    let mut sum = vec![1.0; m];
    sum.push(0.0);
    lp.constrain(sum, Relation::Ge, 1.0);
    lp.free(m);
    match lp.solve()? {
        LpOutcome::Optimal { mut x, objective } => {
            x.truncate(m);
            Ok((objective, x))
        }
        other => Err(Error::Lp(format!(
            "max-slack problem is always feasible and bounded, got {other:?}"
        ))),
    }
}

pub fn eigenvalues(c: &DMatrix<f64>) -> Vec<Complex64> {
    let schur = Schur::try_new(c.clone(), EIG_TOL, 0).unwrap_or_else(|| Schur::new(c.clone()));
    schur.complex_eigenvalues().iter().copied().collect()
}

pub fn leading_minors(c: &DMatrix<f64>) -> Vec<f64> {
    (1..=c.nrows())
        .map(|k| c.view((0, 0), (k, k)).into_owned().determinant())
        .collect()
}

/// Decides whether the Z-matrix `c` is a nonsingular M-matrix.
pub fn is_m_matrix(c: &DMatrix<f64>) -> Result<MMatrixVerdict> {
    check_z(c)?;
    let (slack, xi) = positive_certificate(c)?;
    let is_m = slack > SLACK_TOL;
    let eig = eigenvalues(c);
    let eigen_verdict = eig.iter().all(|z| z.re > EIG_TOL);
    let (leading_minors, minors_verdict) = if c.nrows() <= MINOR_CHECK_DIM {
        let minors = leading_minors(c);
        let ok = minors.iter().all(|d| *d > 0.0);
        (Some(minors), Some(ok))
    } else {
        (None, None)
    };
    Ok(MMatrixVerdict {
        is_m_matrix: is_m,
        slack,
        witness: is_m.then_some(xi),
        eigenvalues: eig.iter().map(|z| (z.re, z.im)).collect(),
        eigen_verdict,
        leading_minors,
        minors_verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_m_matrix() {
        let v = is_m_matrix(&DMatrix::identity(3, 3)).unwrap();
        assert!(v.is_m_matrix && v.consistent());
        let w = v.witness.unwrap();
        assert!(w.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert!((v.slack - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_boundary_is_rejected() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let v = is_m_matrix(&c).unwrap();
        assert!(!v.is_m_matrix);
        assert!(v.consistent());
    }

    #[test]
    fn positive_off_diagonal_rejected() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -1.0, 1.0]);
        assert!(matches!(
            is_m_matrix(&c),
            Err(Error::NotZMatrix { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            is_m_matrix(&DMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn witness_has_positive_image() {
        let c = DMatrix::from_row_slice(3, 3, &[4.0, -1.0, -2.0, -1.0, 3.0, -1.0, -0.5, -2.0, 5.0]);
        let v = is_m_matrix(&c).unwrap();
        assert!(v.is_m_matrix && v.consistent());
        let xi = nalgebra::DVector::from_vec(v.witness.unwrap());
        assert!((&c * xi).iter().all(|x| *x > 0.0));
    }
}
