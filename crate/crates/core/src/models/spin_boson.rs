//! Two-site system bilinearly coupled to a discretized Ohmic bath, in reduced
//! units (unit mass, hbar = 1).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DiabaticModel, InitialNuclearSpec, KineticConvention, LinearVibronicModel, ModelKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinBosonParams {
    /// bias
    pub epsilon: f64,
    /// tunneling
    pub delta: f64,
    /// Kondo parameter
    pub alpha: f64,
    pub omega_c: f64,
    /// inverse temperature; `inf` is allowed for a zero-temperature bath
    pub beta: f64,
    pub n_modes: usize,
}

impl Default for SpinBosonParams {
    fn default() -> Self {
        SpinBosonParams { epsilon: 1.0, delta: 1.0, alpha: 0.1, omega_c: 1.0, beta: 5.0, n_modes: 300 }
    }
}

/// Discrete frequencies and couplings of the Ohmic density
/// `J(w) = pi/2 alpha w exp(-w / w_c)`.
pub fn ohmic_bath(alpha: f64, omega_c: f64, n_modes: usize) -> (Vec<f64>, Vec<f64>) {
    let nb = n_modes as f64;
    let scale = (alpha * omega_c / (1.0 + nb)).sqrt();
    (1..=n_modes)
        .map(|j| {
            let w = -omega_c * (1.0 - j as f64 / (1.0 + nb)).ln();
            (w, w * scale)
        })
        .unzip()
}

fn coth(x: f64) -> f64 {
    if x > 20.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

pub fn build_spin_boson(params: &SpinBosonParams) -> Result<DiabaticModel> {
    let SpinBosonParams { epsilon, delta, alpha, omega_c, beta, n_modes } = *params;
    if n_modes == 0 || !(omega_c > 0.0) || !(alpha >= 0.0) || !(beta > 0.0) {
        return Err(Error::Invalid(format!("invalid spin-boson parameters {params:?}")));
    }
    let (freqs, coups) = ohmic_bath(alpha, omega_c, n_modes);
    let v0 = DMatrix::from_row_slice(2, 2, &[epsilon, delta, delta, -epsilon]);
    let couplings = coups.iter().map(|&c| DMatrix::from_row_slice(2, 2, &[-c, 0.0, 0.0, c])).collect();
    let lin = LinearVibronicModel { v0, freqs: freqs.clone(), convention: KineticConvention::MassWeighted, couplings };
    let var_r = freqs.iter().map(|&w| coth(beta * w / 2.0) / (2.0 * w)).collect();
    let var_p = freqs.iter().map(|&w| w / 2.0 * coth(beta * w / 2.0)).collect();
    let init = InitialNuclearSpec { mean_r: vec![0.0; n_modes], mean_p: vec![0.0; n_modes], var_r, var_p };
    let echo = vec![
        ("epsilon".to_string(), epsilon.to_string()),
        ("delta".into(), delta.to_string()),
        ("alpha".into(), alpha.to_string()),
        ("omega_c".into(), omega_c.to_string()),
        ("beta".into(), beta.to_string()),
        ("n_modes".into(), n_modes.to_string()),
    ];
    Ok(DiabaticModel::new("spin-boson", ModelKind::Linear(lin), vec![1.0; n_modes], init, 0)?.with_params(echo))
}
