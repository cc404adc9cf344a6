//! Weighted vector norms and the matching matrix measures (logarithmic norms).
//!
//! The ∞-norm divides by the weights, the 1- and 2-norms multiply:
//!
//! * `‖v‖_{ξ,∞} = max_j |v_j| / ξ_j`
//! * `‖v‖_{ξ,1} = Σ_j ξ_j |v_j|`
//! * `‖v‖_{ξ,2} = (Σ_j ξ_j v_j²)^{1/2}`

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Inf,
    One,
    Two,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::Inf, NormKind::One, NormKind::Two];
}

pub(crate) fn check_weights(xi: &[f64]) -> Result<()> {
    match xi
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        Some((index, &value)) => Err(Error::NonPositiveWeight { index, value }),
        None => Ok(()),
    }
}

/// Weighted norm; `xi` must be positive and as long as `v` (not checked on the hot path).
pub fn weighted_norm(v: &[f64], xi: &[f64], kind: NormKind) -> f64 {
    debug_assert_eq!(v.len(), xi.len());
    match kind {
        NormKind::Inf => v
            .iter()
            .zip(xi)
            .map(|(x, w)| (x / w).abs())
            .fold(0.0, f64::max),
        NormKind::One => v.iter().zip(xi).map(|(x, w)| (w * x).abs()).sum(),
        NormKind::Two => v.iter().zip(xi).map(|(x, w)| w * x * x).sum::<f64>().sqrt(),
    }
}

pub(crate) const EIG_TOL: f64 = 1e-9;

pub(crate) fn symmetric_max_eigenvalue(m: DMatrix<f64>) -> f64 {
    let eig =
        SymmetricEigen::try_new(m.clone(), EIG_TOL, 0).unwrap_or_else(|| SymmetricEigen::new(m));
    eig.eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Matrix measure of `a` for the weighted norm of `kind`.
///
/// * `One`: `max_j [a_jj + Σ_{i≠j} (ξ_i/ξ_j)|a_ij|]` (column form).
/// * `Inf`: `max_i [a_ii + Σ_{j≠i} (ξ_j/ξ_i)|a_ij|]` (row form).
/// * `Two`: the supremum of `(d/dt ‖w‖²_{ξ,2}) / ‖w‖²_{ξ,2}` along `ẇ = Aw`, i.e.
///   `λ_max(Ξ^{-1/2}(ΞA + AᵀΞ)Ξ^{-1/2})`. With `ξ = 1` this is `λ_max(A + Aᵀ)`;
///   see [`two_norm_symmetric_part`] for the unnormalized `λ_max(ΞA + AᵀΞ)`.
pub fn matrix_measure(a: &DMatrix<f64>, xi: &[f64], kind: NormKind) -> Result<f64> {
    let m = a.nrows();
    if a.ncols() != m || xi.len() != m {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, weights have length {}",
            a.nrows(),
            a.ncols(),
            xi.len()
        )));
    }
    check_weights(xi)?;
    Ok(match kind {
        NormKind::One => (0..m)
            .map(|j| {
                a[(j, j)]
                    + (0..m)
                        .filter(|&i| i != j)
                        .map(|i| xi[i] / xi[j] * a[(i, j)].abs())
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max),
        NormKind::Inf => (0..m)
            .map(|i| {
                a[(i, i)]
                    + (0..m)
                        .filter(|&j| j != i)
                        .map(|j| xi[j] / xi[i] * a[(i, j)].abs())
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max),
        NormKind::Two => {
            let s = DMatrix::from_fn(m, m, |i, j| {
                (xi[i] * a[(i, j)] + a[(j, i)] * xi[j]) / (xi[i] * xi[j]).sqrt()
            });
            symmetric_max_eigenvalue(s)
        }
    })
}

/// `λ_max(ΞA + AᵀΞ)` with `Ξ = diag(ξ)`, without the `Ξ^{-1/2}` normalization.
/// Coincides with the 2-norm measure when `ξ = 1`.
pub fn two_norm_symmetric_part(a: &DMatrix<f64>, xi: &[f64]) -> Result<f64> {
    let m = a.nrows();
    if a.ncols() != m || xi.len() != m {
        return Err(Error::Dimension(
            "matrix and weights disagree in size".into(),
        ));
    }
    check_weights(xi)?;
    Ok(symmetric_max_eigenvalue(DMatrix::from_fn(m, m, |i, j| {
        xi[i] * a[(i, j)] + a[(j, i)] * xi[j]
    })))
}
