//! Linear vibronic coupling model in dimensionless normal modes. Inputs are
//! in eV and converted to Hartree at build time.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DiabaticModel, InitialNuclearSpec, KineticConvention, LinearVibronicModel, ModelKind};
use crate::error::{Error, Result};

pub const EV_TO_HARTREE: f64 = 0.0367493;
/// One atomic unit of time in femtoseconds.
pub const HARTREE_TIME_TO_FS: f64 = 0.02418884;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvcmParams {
    pub frequencies_ev: Vec<f64>,
    pub energies_ev: Vec<f64>,
    /// `kappa[n][k]`: diagonal linear coupling of mode `k` on state `n`.
    pub kappa_ev: Vec<Vec<f64>>,
    /// `(n, m, k, lambda)`: off-diagonal coupling through mode `k`.
    pub lambda_ev: Vec<(usize, usize, usize, f64)>,
    pub initial_state: usize,
}

impl LvcmParams {
    /// Two-state, three-mode S1/S2 pyrazine model.
    pub fn pyrazine() -> Self {
        LvcmParams {
            frequencies_ev: vec![0.126, 0.074, 0.118],
            energies_ev: vec![3.94, 4.84],
            kappa_ev: vec![vec![0.037, -0.105, 0.0], vec![-0.254, 0.149, 0.0]],
            lambda_ev: vec![(0, 1, 2, 0.262)],
            initial_state: 1,
        }
    }
}

pub fn build_lvcm(params: &LvcmParams) -> Result<DiabaticModel> {
    let f = params.energies_ev.len();
    let n = params.frequencies_ev.len();
    if f == 0 || n == 0 || params.kappa_ev.len() != f || params.kappa_ev.iter().any(|row| row.len() != n) {
        return Err(Error::Invalid("inconsistent LVCM dimensions".into()));
    }
    let freqs: Vec<f64> = params.frequencies_ev.iter().map(|w| w * EV_TO_HARTREE).collect();
    let v0 = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        f,
        params.energies_ev.iter().map(|e| e * EV_TO_HARTREE),
    ));
    let mut couplings = vec![DMatrix::<f64>::zeros(f, f); n];
    for (state, row) in params.kappa_ev.iter().enumerate() {
        for (k, kappa) in row.iter().enumerate() {
            couplings[k][(state, state)] = kappa * EV_TO_HARTREE;
        }
    }
    for &(a, b, k, value) in &params.lambda_ev {
        if a >= f || b >= f || a == b || k >= n {
            return Err(Error::Invalid(format!("lambda ({a}, {b}, mode {k}) out of range")));
        }
        couplings[k][(a, b)] = value * EV_TO_HARTREE;
        couplings[k][(b, a)] = value * EV_TO_HARTREE;
    }
    let lin =
        LinearVibronicModel { v0, freqs: freqs.clone(), convention: KineticConvention::FrequencyWeighted, couplings };
    // ground state of H0 in weighted modes
    let init =
        InitialNuclearSpec { mean_r: vec![0.0; n], mean_p: vec![0.0; n], var_r: vec![0.5; n], var_p: vec![0.5; n] };
    let echo = vec![
        ("frequencies_ev".to_string(), format!("{:?}", params.frequencies_ev)),
        ("energies_ev".into(), format!("{:?}", params.energies_ev)),
        ("kappa_ev".into(), format!("{:?}", params.kappa_ev)),
        ("lambda_ev".into(), format!("{:?}", params.lambda_ev)),
        ("ev_to_hartree".into(), EV_TO_HARTREE.to_string()),
    ];
    Ok(DiabaticModel::new("lvcm", ModelKind::Linear(lin), freqs, init, params.initial_state)?.with_params(echo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_support::*;

    #[test]
    fn vertical_gap() {
        let m = build_lvcm(&LvcmParams::pyrazine()).unwrap();
        let v = m.potential(&[0.0; 3]);
        assert!(((v[(1, 1)] - v[(0, 0)]) / EV_TO_HARTREE - 0.90).abs() < 1e-12);
        assert_eq!(m.initial_state(), 1);
    }

    #[test]
    fn off_diagonal_depends_only_on_third_mode() {
        let m = build_lvcm(&LvcmParams::pyrazine()).unwrap();
        let a = m.potential(&[0.7, -1.2, 0.4]);
        let b = m.potential(&[-2.0, 3.0, 0.4]);
        assert!((a[(0, 1)] - b[(0, 1)]).abs() < 1e-16);
        assert!((a[(0, 1)] - 0.262 * EV_TO_HARTREE * 0.4).abs() < 1e-15);
    }

    /// Term-by-term evaluation of H0 + Hl + Hc at random points.
    #[test]
    fn potential_reproduces_terms() {
        let p = LvcmParams::pyrazine();
        let m = build_lvcm(&p).unwrap();
        for r in random_points(3, 100, 4.0, 12) {
            let v = m.potential(&r);
            let h0: f64 = (0..3).map(|k| 0.5 * p.frequencies_ev[k] * r[k] * r[k]).sum();
            for n in 0..2 {
                let hl = p.energies_ev[n] + (0..3).map(|k| p.kappa_ev[n][k] * r[k]).sum::<f64>();
                assert!((v[(n, n)] - (h0 + hl) * EV_TO_HARTREE).abs() < 1e-14);
            }
            assert!((v[(0, 1)] - 0.262 * r[2] * EV_TO_HARTREE).abs() < 1e-15);
        }
        assert_gradient_matches(&m, &random_points(3, 100, 4.0, 13));
    }

    #[test]
    fn uncoupled_model_has_flat_coupling() {
        let p = LvcmParams { kappa_ev: vec![vec![0.0; 3], vec![0.0; 3]], lambda_ev: vec![], ..LvcmParams::pyrazine() };
        let m = build_lvcm(&p).unwrap();
        let v = m.potential(&[1.0, 2.0, 3.0]);
        assert_eq!(v[(0, 1)], 0.0);
        assert!(((v[(1, 1)] - v[(0, 0)]) / EV_TO_HARTREE - 0.9).abs() < 1e-12);
    }

    #[test]
    fn inverse_mass_is_frequency() {
        let m = build_lvcm(&LvcmParams::pyrazine()).unwrap();
        assert!((m.inv_mass()[0] - 0.126 * EV_TO_HARTREE).abs() < 1e-15);
    }
}
