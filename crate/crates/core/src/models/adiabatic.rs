//! Adiabatic energies, eigenvectors and nonadiabatic couplings from a diabatic
//! potential and its gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_sorted;

/// Smallest adiabatic gap for which couplings are computed.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AdiabaticData {
    /// Ascending adiabatic energies.
    pub energies: DVector<f64>,
    /// Columns are adiabatic states in the diabatic basis.
    pub u: DMatrix<f64>,
    /// `U^T (dV/dR_l) U` per nuclear DOF.
    pub grad_u: Vec<DMatrix<f64>>,
    /// `d[l][(k, j)] = <k | d/dR_l | j>`, antisymmetric.
    pub d: Vec<DMatrix<f64>>,
}

impl AdiabaticData {
    pub fn n_states(&self) -> usize {
        self.energies.len()
    }

    /// Adiabatic force on surface `k`: `-(U^T dV U)_kk`.
    pub fn surface_force(&self, k: usize) -> Vec<f64> {
        self.grad_u.iter().map(|g| -g[(k, k)]).collect()
    }
}

/// Diagonalizes `v` and builds the couplings. Eigenvector signs follow
/// `prev_u` by overlap when given, otherwise the first nonzero component of
/// each column is made positive.
pub fn adiabatize(
    r: &[f64],
    v: &DMatrix<f64>,
    grad: &[DMatrix<f64>],
    prev_u: Option<&DMatrix<f64>>,
) -> Result<AdiabaticData> {
    let n = v.nrows();
    let (energies, mut u) = symmetric_eigen_sorted(v);
    for k in 0..n {
        let flip = match prev_u {
            Some(prev) => prev.column(k).dot(&u.column(k)) < 0.0,
            None => {
                let first = u.column(k).iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(0.0);
                first < 0.0
            }
        };
        if flip {
            u.column_mut(k).neg_mut();
        }
    }
    for k in 1..n {
        let gap = energies[k] - energies[k - 1];
        if gap < DEGENERACY_THRESHOLD {
            return Err(Error::Degenerate { position: r.to_vec(), gap });
        }
    }
    let ut = u.transpose();
    let grad_u: Vec<DMatrix<f64>> = grad.iter().map(|g| &ut * g * &u).collect();
    let d = grad_u
        .iter()
        .map(|g| DMatrix::from_fn(n, n, |k, j| if k == j { 0.0 } else { g[(k, j)] / (energies[j] - energies[k]) }))
        .collect();
    Ok(AdiabaticData { energies, u, grad_u, d })
}
