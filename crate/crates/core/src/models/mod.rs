//! Benchmark composite-system Hamiltonians in the diabatic representation.
//!
//! Every model is `H = P^T M^-1 P / 2 + V(R)` with a real symmetric `F x F`
//! potential matrix. State-independent harmonic energy of the linear models
//! lives on the diagonal of `V`, so gradients include the harmonic force.

mod adiabatic;
mod cavity;
mod linear;
mod lvcm;
mod spin_boson;
mod tully;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use adiabatic::{adiabatize, AdiabaticData, DEGENERACY_THRESHOLD};
pub use cavity::{build_cavity, CavityParams, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
pub use linear::{KineticConvention, LinearVibronicModel};
pub use lvcm::{build_lvcm, LvcmParams, EV_TO_HARTREE, HARTREE_TIME_TO_FS};
pub use spin_boson::{build_spin_boson, ohmic_bath, SpinBosonParams};
pub use tully::{build_tully, TullyModel, TullyParams, TullyVariant};

use crate::error::{Error, Result};

/// Independent Gaussian Wigner distribution per nuclear DOF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialNuclearSpec {
    pub mean_r: Vec<f64>,
    pub mean_p: Vec<f64>,
    pub var_r: Vec<f64>,
    pub var_p: Vec<f64>,
}

impl InitialNuclearSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.mean_r.len();
        if self.mean_p.len() != n || self.var_r.len() != n || self.var_p.len() != n {
            return Err(Error::Invalid("nuclear spec vectors differ in length".into()));
        }
        if self.var_r.iter().chain(&self.var_p).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Invalid("nuclear variances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Tully(TullyModel),
    Linear(LinearVibronicModel),
    /// R-independent potential; the nuclei feel no force.
    Constant(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiabaticModel {
    pub name: String,
    pub kind: ModelKind,
    inv_mass: Vec<f64>,
    nuclear_init: InitialNuclearSpec,
    initial_state: usize,
    /// Parameter echo for output headers.
    pub params: Vec<(String, String)>,
}

impl DiabaticModel {
    pub fn new(
        name: impl Into<String>,
        kind: ModelKind,
        inv_mass: Vec<f64>,
        nuclear_init: InitialNuclearSpec,
        initial_state: usize,
    ) -> Result<Self> {
        nuclear_init.validate()?;
        let model =
            DiabaticModel { name: name.into(), kind, inv_mass, nuclear_init, initial_state, params: Vec::new() };
        let n = model.n_dof();
        if model.inv_mass.len() != n || model.nuclear_init.mean_r.len() != n {
            return Err(Error::Invalid(format!(
                "model {} has {n} nuclear DOFs but {} inverse masses and {} initial means",
                model.name,
                model.inv_mass.len(),
                model.nuclear_init.mean_r.len()
            )));
        }
        if initial_state >= model.n_states() {
            return Err(Error::Invalid(format!("initial state {initial_state} out of range")));
        }
        Ok(model)
    }

    /// A frozen-nuclei copy: the potential is fixed at `r` and all gradients
    /// vanish. The nuclear DOF count and sampler are kept.
    pub fn frozen_at(&self, r: &[f64]) -> DiabaticModel {
        DiabaticModel {
            name: format!("{}-frozen", self.name),
            kind: ModelKind::Constant(self.potential(r)),
            inv_mass: self.inv_mass.clone(),
            nuclear_init: self.nuclear_init.clone(),
            initial_state: self.initial_state,
            params: self.params.clone(),
        }
    }

    /// Constant two-level model `[[e, coupling], [coupling, -e]]` with one
    /// dummy nuclear DOF.
    pub fn constant(v: DMatrix<f64>, initial_state: usize) -> Result<Self> {
        let init = InitialNuclearSpec { mean_r: vec![0.0], mean_p: vec![0.0], var_r: vec![0.5], var_p: vec![0.5] };
        DiabaticModel::new("constant", ModelKind::Constant(v), vec![1.0], init, initial_state)
    }

    pub fn with_params(mut self, params: Vec<(String, String)>) -> Self {
        self.params = params;
        self
    }

    pub fn with_initial_state(mut self, state: usize) -> Result<Self> {
        if state >= self.n_states() {
            return Err(Error::Invalid(format!("initial state {state} out of range")));
        }
        self.initial_state = state;
        Ok(self)
    }

    pub fn with_nuclear_init(mut self, init: InitialNuclearSpec) -> Result<Self> {
        init.validate()?;
        if init.mean_r.len() != self.n_dof() {
            return Err(Error::Invalid("nuclear spec does not match DOF count".into()));
        }
        self.nuclear_init = init;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        match &self.kind {
            ModelKind::Tully(_) => 2,
            ModelKind::Linear(l) => l.n_states(),
            ModelKind::Constant(v) => v.nrows(),
        }
    }

    pub fn n_dof(&self) -> usize {
        match &self.kind {
            ModelKind::Tully(_) => 1,
            ModelKind::Linear(l) => l.n_modes(),
            ModelKind::Constant(_) => self.inv_mass.len(),
        }
    }

    pub fn inv_mass(&self) -> &[f64] {
        &self.inv_mass
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn nuclear_init(&self) -> &InitialNuclearSpec {
        &self.nuclear_init
    }

    pub fn linear_form(&self) -> Option<&LinearVibronicModel> {
        match &self.kind {
            ModelKind::Linear(l) => Some(l),
            _ => None,
        }
    }

    pub fn kinetic_energy(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_mass).map(|(p, w)| p * p * w).sum::<f64>()
    }

    pub fn potential(&self, r: &[f64]) -> DMatrix<f64> {
        let f = self.n_states();
        let mut v = DMatrix::zeros(f, f);
        self.potential_into(r, &mut v);
        v
    }

    pub fn potential_into(&self, r: &[f64], v: &mut DMatrix<f64>) {
        match &self.kind {
            ModelKind::Tully(t) => t.potential_into(r[0], v),
            ModelKind::Linear(l) => l.potential_into(r, v),
            ModelKind::Constant(c) => v.copy_from(c),
        }
    }

    /// `grad[l] = dV / dR_l`, one `F x F` matrix per nuclear DOF.
    pub fn gradient(&self, r: &[f64]) -> Vec<DMatrix<f64>> {
        let f = self.n_states();
        let mut g = vec![DMatrix::zeros(f, f); self.n_dof()];
        self.gradient_into(r, &mut g);
        g
    }

    pub fn gradient_into(&self, r: &[f64], grad: &mut [DMatrix<f64>]) {
        match &self.kind {
            ModelKind::Tully(t) => t.gradient_into(r[0], &mut grad[0]),
            ModelKind::Linear(l) => l.gradient_into(r, grad),
            ModelKind::Constant(_) => grad.iter_mut().for_each(|g| g.fill(0.0)),
        }
    }

    /// `out_l = -sum_nm dV_nm/dR_l rho_nm` for a real symmetric `rho`.
    pub fn force_into(&self, r: &[f64], rho: &DMatrix<f64>, out: &mut [f64]) {
        match &self.kind {
            ModelKind::Tully(t) => out[0] = t.force(r[0], rho),
            ModelKind::Linear(l) => l.force_into(r, rho, out),
            ModelKind::Constant(_) => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    pub fn sample_nuclear_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let spec = &self.nuclear_init;
        let n = self.n_dof();
        let mut r = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        for k in 0..n {
            let zr: f64 = rng.sample(StandardNormal);
            let zp: f64 = rng.sample(StandardNormal);
            r.push(spec.mean_r[k] + spec.var_r[k].sqrt() * zr);
            p.push(spec.mean_p[k] + spec.var_p[k].sqrt() * zp);
        }
        (r, p)
    }
}
