//! Exact quantum references at desk scale.

mod dvr;
mod fock;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::linalg::{apply, expm_hermitian};

pub use dvr::{
    dvr_converged, packet_from_model, split_operator_dvr, DvrResult, GridSpec, Wavepacket, CONVERGENCE_TOLERANCE,
    LEAKAGE_LIMIT,
};
pub use fock::{
    fock_converged, fock_propagate, fock_thermal, thermal_occupations, FockInit, FockResult, FockSpec, ModeState,
};

/// `|<n| exp(-i V t) |psi0>|^2` at each requested time.
pub fn frozen_nuclei_exact(v: &DMatrix<C64>, psi0: &[C64], times: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![C64::new(0.0, 0.0); psi0.len()];
    times
        .iter()
        .map(|&t| {
            apply(&expm_hermitian(v, t), psi0, &mut out);
            out.iter().map(|z| z.norm_sqr()).collect()
        })
        .collect()
}
