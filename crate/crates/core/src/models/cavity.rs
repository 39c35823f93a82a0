//! Multi-level atom in a one-dimensional lossless cavity, dipole coupling to
//! standing-wave modes, atomic units.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DiabaticModel, InitialNuclearSpec, KineticConvention, LinearVibronicModel, ModelKind};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 137.035999;
/// `eps_0 = 1 / (4 pi)` in atomic units.
pub const VACUUM_PERMITTIVITY: f64 = 1.0 / (4.0 * std::f64::consts::PI);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    pub levels: Vec<f64>,
    /// `(n, m, mu_nm)` with 0-based level indices; applied symmetrically.
    pub dipoles: Vec<(usize, usize, f64)>,
    pub length: f64,
    pub atom_position: f64,
    pub n_modes: usize,
}

impl CavityParams {
    pub fn three_level() -> Self {
        let length = 236200.0;
        CavityParams {
            levels: vec![-0.6738, -0.2798, -0.1547],
            // no direct 1 <-> 3 dipole
            dipoles: vec![(0, 1, -1.034), (1, 2, -2.536)],
            length,
            atom_position: length / 2.0,
            n_modes: 400,
        }
    }

    /// Reduction to the two lowest atomic levels.
    pub fn two_level() -> Self {
        let full = Self::three_level();
        CavityParams { levels: full.levels[..2].to_vec(), dipoles: vec![(0, 1, -1.034)], ..full }
    }

    pub fn mode_frequency(&self, j: usize) -> f64 {
        j as f64 * std::f64::consts::PI * SPEED_OF_LIGHT / self.length
    }

    /// `lambda_j(r0) = sqrt(2 / (eps_0 L)) sin(j pi r0 / L)`
    pub fn mode_coupling(&self, j: usize) -> f64 {
        (2.0 / (VACUUM_PERMITTIVITY * self.length)).sqrt()
            * (j as f64 * std::f64::consts::PI * self.atom_position / self.length).sin()
    }
}

pub fn build_cavity(params: &CavityParams) -> Result<DiabaticModel> {
    let f = params.levels.len();
    if params.n_modes == 0
        || !(params.length > 0.0)
        || !(params.atom_position > 0.0 && params.atom_position < params.length)
        || f == 0
    {
        return Err(Error::Invalid(format!("invalid cavity parameters {params:?}")));
    }
    let mut mu = DMatrix::<f64>::zeros(f, f);
    for &(n, m, value) in &params.dipoles {
        if n >= f || m >= f || n == m {
            return Err(Error::Invalid(format!("dipole ({n}, {m}) out of range")));
        }
        mu[(n, m)] = value;
        mu[(m, n)] = value;
    }
    let freqs: Vec<f64> = (1..=params.n_modes).map(|j| params.mode_frequency(j)).collect();
    let couplings = (1..=params.n_modes).map(|j| &mu * (params.mode_frequency(j) * params.mode_coupling(j))).collect();
    let lin = LinearVibronicModel {
        v0: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(params.levels.clone())),
        freqs: freqs.clone(),
        convention: KineticConvention::MassWeighted,
        couplings,
    };
    let n = params.n_modes;
    let init = InitialNuclearSpec {
        mean_r: vec![0.0; n],
        mean_p: vec![0.0; n],
        var_r: freqs.iter().map(|w| 0.5 / w).collect(),
        var_p: freqs.iter().map(|w| 0.5 * w).collect(),
    };
    let echo = vec![
        ("levels".to_string(), format!("{:?}", params.levels)),
        ("dipoles".into(), format!("{:?}", params.dipoles)),
        ("length".into(), params.length.to_string()),
        ("atom_position".into(), params.atom_position.to_string()),
        ("n_modes".into(), n.to_string()),
        ("speed_of_light".into(), SPEED_OF_LIGHT.to_string()),
    ];
    // the highest level starts occupied
    Ok(DiabaticModel::new("cavity", ModelKind::Linear(lin), vec![1.0; n], init, f - 1)?.with_params(echo))
}
