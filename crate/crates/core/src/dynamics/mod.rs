//! Trajectory integrators: mapping dynamics (CMM and wMM) in either
//! representation, Ehrenfest, and fewest-switches surface hopping.
//!
//! Every method uses the same palindromic splitting per step
//!
//! `kick(dt/2) rotate(R0, dt/2) drift(dt) rotate(R1, dt/2) kick(dt/2)`
//!
//! where `rotate` is the exact electronic propagator at fixed nuclear
//! configuration. The composition is symmetric, so it is time-reversible and
//! second order.

mod ehrenfest;
mod fssh;
mod mapping;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{adiabatize, AdiabaticData, DiabaticModel};
use crate::phasespace::{draw_gamma, sample_constraint_sphere, ElectronicMappingState, GammaScheme};

pub use fssh::{hop_probabilities, rescale_momentum, RescaleOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    Diabatic,
    Adiabatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// CMM for `Single`, wMM for `SymmetricPair`.
    Mapping(GammaScheme),
    Ehrenfest,
    Fssh {
        frustrated_reversal: bool,
    },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Mapping(s @ GammaScheme::Single { .. }) => format!("cmm[{}]", s.label()),
            Method::Mapping(s) => format!("wmm[{}]", s.label()),
            Method::Ehrenfest => "ehrenfest".into(),
            Method::Fssh { frustrated_reversal } => format!("fssh[reversal={frustrated_reversal}]"),
        }
    }

    /// Number of stratified gamma branches.
    pub fn n_branches(&self) -> usize {
        match self {
            Method::Mapping(s) => s.n_branches(),
            _ => 1,
        }
    }

    pub fn validate(&self, model: &DiabaticModel, representation: Representation) -> Result<()> {
        match self {
            Method::Mapping(s) => s.validate(model.n_states()),
            Method::Ehrenfest if representation == Representation::Adiabatic => {
                Err(Error::Invalid("Ehrenfest is propagated in the diabatic representation".into()))
            }
            Method::Fssh { .. } if representation == Representation::Diabatic => {
                Err(Error::Invalid("FSSH requires the adiabatic representation".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub max_time: f64,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub representation: Representation,
}

fn one() -> usize {
    1
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.max_time >= 0.0 && self.max_time.is_finite()) {
            return Err(Error::Invalid(format!("max_time must be non-negative, got {}", self.max_time)));
        }
        if self.record_stride == 0 {
            return Err(Error::Invalid("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.max_time / self.dt + 1e-9).floor() as usize
    }

    /// Times at which the sink is invoked.
    pub fn record_times(&self) -> Vec<f64> {
        (0..=self.n_steps()).step_by(self.record_stride).map(|k| k as f64 * self.dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Electronic {
    /// Mapping variables in the basis of the propagation representation.
    Mapping(ElectronicMappingState),
    /// Wavefunction amplitudes: diabatic for Ehrenfest, adiabatic for FSSH.
    Amplitudes { c: Vec<C64>, active: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub electronic: Electronic,
    pub t: f64,
    /// Adiabatic eigenvectors at `r` when propagating adiabatically; keeps
    /// eigenvector signs continuous along the trajectory.
    pub frame: Option<DMatrix<f64>>,
}

impl TrajectoryState {
    pub fn mapping(&self) -> Option<&ElectronicMappingState> {
        match &self.electronic {
            Electronic::Mapping(m) => Some(m),
            _ => None,
        }
    }

    fn check_finite(&self) -> Result<()> {
        let ok = self.r.iter().chain(&self.p).all(|x| x.is_finite())
            && match &self.electronic {
                Electronic::Mapping(m) => m.g.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
                Electronic::Amplitudes { c, .. } => c.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite { time: self.t, what: format!("R = {:?}, P = {:?}", self.r, self.p) })
        }
    }

    /// Per-trajectory population estimators in the diabatic basis. Mapping
    /// states give `|g_n|^2 / 2 - gamma`, Ehrenfest `|c_n|^2`, FSSH
    /// `|U_{n,active}|^2`.
    pub fn diabatic_populations(&self, model: &DiabaticModel) -> Result<Vec<f64>> {
        match &self.electronic {
            Electronic::Mapping(m) => {
                let g = match &self.frame {
                    Some(u) => to_diabatic(u, &m.g),
                    None => m.g.clone(),
                };
                Ok(g.iter().map(|z| 0.5 * z.norm_sqr() - m.gamma).collect())
            }
            Electronic::Amplitudes { c, active: None } => Ok(c.iter().map(|z| z.norm_sqr()).collect()),
            Electronic::Amplitudes { active: Some(a), .. } => {
                let u = match &self.frame {
                    Some(u) => u.clone(),
                    None => self.adiabatic_frame(model)?,
                };
                Ok((0..u.nrows()).map(|n| u[(n, *a)].powi(2)).collect())
            }
        }
    }

    /// Population estimators in the adiabatic basis at the current `R`.
    pub fn adiabatic_populations(&self, model: &DiabaticModel) -> Result<Vec<f64>> {
        match &self.electronic {
            Electronic::Mapping(m) => {
                let g = match &self.frame {
                    Some(_) => m.g.clone(),
                    None => to_adiabatic(&self.adiabatic_frame(model)?, &m.g),
                };
                Ok(g.iter().map(|z| 0.5 * z.norm_sqr() - m.gamma).collect())
            }
            Electronic::Amplitudes { c, active: None } => {
                let u = self.adiabatic_frame(model)?;
                Ok(to_adiabatic(&u, c).iter().map(|z| z.norm_sqr()).collect())
            }
            Electronic::Amplitudes { c, active: Some(a) } => {
                Ok((0..c.len()).map(|n| if n == *a { 1.0 } else { 0.0 }).collect())
            }
        }
    }

    fn adiabatic_frame(&self, model: &DiabaticModel) -> Result<DMatrix<f64>> {
        let v = model.potential(&self.r);
        let grad: Vec<DMatrix<f64>> = Vec::new();
        Ok(adiabatize(&self.r, &v, &grad, self.frame.as_ref())?.u)
    }
}

/// `g = U g~`
pub(crate) fn to_diabatic(u: &DMatrix<f64>, gt: &[C64]) -> Vec<C64> {
    let n = gt.len();
    (0..n).map(|i| (0..n).map(|k| gt[k] * u[(i, k)]).sum()).collect()
}

/// `g~ = U^T g`
pub(crate) fn to_adiabatic(u: &DMatrix<f64>, g: &[C64]) -> Vec<C64> {
    let n = g.len();
    (0..n).map(|k| (0..n).map(|i| g[i] * u[(i, k)]).sum()).collect()
}

/// Real part of the mapping density `Re(g_n g_m^*) / 2 - gamma delta_nm`.
pub(crate) fn mapping_density(g: &[C64], gamma: f64, out: &mut DMatrix<f64>) {
    let n = g.len();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = 0.5 * (g[i].re * g[j].re + g[i].im * g[j].im);
        }
        out[(i, i)] -= gamma;
    }
}

/// `Re(c_n c_m^*)`
pub(crate) fn amplitude_density(c: &[C64], out: &mut DMatrix<f64>) {
    mapping_density(c, 0.0, out);
    *out *= 2.0;
}

/// Force `-sum_kl (U^T dV U)_kl rho~_kl` from adiabatic data.
pub(crate) fn adiabatic_force(data: &AdiabaticData, rho: &DMatrix<f64>, out: &mut [f64]) {
    for (o, g) in out.iter_mut().zip(&data.grad_u) {
        *o = -g.iter().zip(rho.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Hermitian `diag(E) - i v.d`.
pub(crate) fn effective_hamiltonian(data: &AdiabaticData, inv_mass: &[f64], p: &[f64]) -> DMatrix<C64> {
    let n = data.n_states();
    let mut h = DMatrix::<C64>::zeros(n, n);
    for (l, d) in data.d.iter().enumerate() {
        let v = inv_mass[l] * p[l];
        if v == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] -= C64::new(0.0, v * d[(i, j)]);
            }
        }
    }
    for i in 0..n {
        h[(i, i)] += data.energies[i];
    }
    h
}

/// Draws the initial phase point of trajectory `branch` and returns it with
/// the initial electronic weight `F K_nn(x0, p0)` (1 for wavefunction
/// methods). Nuclear coordinates are drawn first, then the electronic state.
pub fn initialize<R: Rng + ?Sized>(
    model: &DiabaticModel,
    method: &Method,
    representation: Representation,
    branch: usize,
    rng: &mut R,
) -> Result<(TrajectoryState, f64)> {
    method.validate(model, representation)?;
    let f = model.n_states();
    let init = model.initial_state();
    let (r, p) = model.sample_nuclear_initial(rng);
    let frame = match representation {
        Representation::Diabatic => None,
        Representation::Adiabatic => {
            let v = model.potential(&r);
            Some(adiabatize(&r, &v, &[], None)?.u)
        }
    };
    let (electronic, a0) = match method {
        Method::Mapping(scheme) => {
            let (gamma, weight) = draw_gamma(scheme, branch)?;
            let mut state = sample_constraint_sphere(f, gamma, rng)?;
            state.weight = weight;
            let a0 = f as f64 * (0.5 * state.g[init].norm_sqr() - gamma);
            if let Some(u) = &frame {
                state.g = to_adiabatic(u, &state.g);
            }
            (Electronic::Mapping(state), a0)
        }
        Method::Ehrenfest => {
            let mut c = vec![C64::new(0.0, 0.0); f];
            c[init] = C64::new(1.0, 0.0);
            (Electronic::Amplitudes { c, active: None }, 1.0)
        }
        Method::Fssh { .. } => {
            let u = frame.as_ref().expect("adiabatic frame");
            let c: Vec<C64> = (0..f).map(|k| C64::new(u[(init, k)], 0.0)).collect();
            let xi: f64 = rng.random();
            let mut acc = 0.0;
            let mut active = f - 1;
            for (k, ck) in c.iter().enumerate() {
                acc += ck.norm_sqr();
                if xi < acc {
                    active = k;
                    break;
                }
            }
            (Electronic::Amplitudes { c, active: Some(active) }, 1.0)
        }
    };
    Ok((TrajectoryState { r, p, electronic, t: 0.0, frame }, a0))
}

/// Advances trajectory states; owns scratch buffers and the adiabatic cache.
pub struct Integrator<'m> {
    model: &'m DiabaticModel,
    method: Method,
    representation: Representation,
    pub(crate) v: DMatrix<f64>,
    pub(crate) rho: DMatrix<f64>,
    pub(crate) grad: Vec<DMatrix<f64>>,
    pub(crate) force: Vec<f64>,
    /// Adiabatic data at the last end-of-step position.
    pub(crate) cached: Option<(Vec<f64>, AdiabaticData)>,
}

impl<'m> Integrator<'m> {
    pub fn new(model: &'m DiabaticModel, method: Method, representation: Representation) -> Result<Self> {
        method.validate(model, representation)?;
        let f = model.n_states();
        Ok(Integrator {
            model,
            method,
            representation,
            v: DMatrix::zeros(f, f),
            rho: DMatrix::zeros(f, f),
            grad: vec![DMatrix::zeros(f, f); model.n_dof()],
            force: vec![0.0; model.n_dof()],
            cached: None,
        })
    }

    pub fn model(&self) -> &DiabaticModel {
        self.model
    }

    /// One step of size `dt` (negative `dt` runs backwards for mapping and
    /// Ehrenfest).
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut TrajectoryState, dt: f64, rng: &mut R) -> Result<()> {
        match (&self.method, self.representation) {
            (Method::Mapping(_), Representation::Diabatic) => self.step_mapping_diabatic(state, dt),
            (Method::Mapping(_), Representation::Adiabatic) => self.step_mapping_adiabatic(state, dt)?,
            (Method::Ehrenfest, _) => self.step_ehrenfest(state, dt),
            (Method::Fssh { frustrated_reversal }, _) => {
                let reversal = *frustrated_reversal;
                self.step_fssh(state, dt, reversal, rng)?
            }
        }
        state.t += dt;
        state.check_finite()
    }

    /// Adiabatic data at `r`, taken from the cache when `r` matches exactly.
    pub(crate) fn adiabatic_at(&mut self, r: &[f64], prev: Option<&DMatrix<f64>>) -> Result<AdiabaticData> {
        if let Some((cr, data)) = self.cached.take() {
            if cr.as_slice() == r {
                return Ok(data);
            }
        }
        self.model.potential_into(r, &mut self.v);
        self.model.gradient_into(r, &mut self.grad);
        adiabatize(r, &self.v, &self.grad, prev)
    }

    pub(crate) fn store(&mut self, r: &[f64], data: AdiabaticData) {
        self.cached = Some((r.to_vec(), data));
    }

    /// Conserved energy of the method: eq-34 mapping Hamiltonian in either
    /// representation, mean-field energy for Ehrenfest, active-surface energy
    /// for FSSH.
    pub fn energy(&mut self, state: &TrajectoryState) -> Result<f64> {
        let ke = self.model.kinetic_energy(&state.p);
        let pot = match (&state.electronic, &state.frame) {
            (Electronic::Mapping(m), None) => {
                self.model.potential_into(&state.r, &mut self.v);
                mapping_density(&m.g, m.gamma, &mut self.rho);
                self.v.component_mul(&self.rho).sum()
            }
            (Electronic::Mapping(m), Some(u)) => {
                let data = self.adiabatic_at(&state.r, Some(u))?;
                let e = (0..m.g.len()).map(|n| data.energies[n] * (0.5 * m.g[n].norm_sqr() - m.gamma)).sum();
                self.store(&state.r, data);
                e
            }
            (Electronic::Amplitudes { c, active: None }, _) => {
                self.model.potential_into(&state.r, &mut self.v);
                amplitude_density(c, &mut self.rho);
                self.v.component_mul(&self.rho).sum()
            }
            (Electronic::Amplitudes { active: Some(a), .. }, frame) => {
                let data = self.adiabatic_at(&state.r, frame.as_ref())?;
                let e = data.energies[*a];
                self.store(&state.r, data);
                e
            }
        };
        Ok(ke + pot)
    }
}

/// What the sink sees at each recorded step.
pub struct Snapshot<'a> {
    pub index: usize,
    pub state: &'a TrajectoryState,
    pub diabatic_populations: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub final_state: TrajectoryState,
    pub n_steps: usize,
    pub n_records: usize,
    pub initial_energy: f64,
    /// `max_t |E(t) - E(0)|` over recorded steps.
    pub max_energy_deviation: f64,
}

impl TrajectorySummary {
    pub fn relative_energy_drift(&self) -> f64 {
        self.max_energy_deviation / self.initial_energy.abs().max(f64::MIN_POSITIVE)
    }
}

/// Runs one trajectory from `init` to `cfg.max_time`, calling `sink` every
/// `cfg.record_stride` steps including step 0.
pub fn run_trajectory<R, S>(
    model: &DiabaticModel,
    method: &Method,
    init: TrajectoryState,
    cfg: &IntegratorConfig,
    rng: &mut R,
    mut sink: S,
) -> Result<TrajectorySummary>
where
    R: Rng + ?Sized,
    S: FnMut(&Snapshot),
{
    cfg.validate()?;
    let mut integ = Integrator::new(model, method.clone(), cfg.representation)?;
    let mut state = init;
    let n_steps = cfg.n_steps();
    let e0 = integ.energy(&state)?;
    let mut max_dev: f64 = 0.0;
    let mut n_records = 0;
    for step in 0..=n_steps {
        if step > 0 {
            integ.step(&mut state, cfg.dt, rng)?;
        }
        if step % cfg.record_stride == 0 {
            let pops = state.diabatic_populations(model)?;
            sink(&Snapshot { index: n_records, state: &state, diabatic_populations: &pops });
            n_records += 1;
            max_dev = max_dev.max((integ.energy(&state)? - e0).abs());
        }
    }
    Ok(TrajectorySummary { final_state: state, n_steps, n_records, initial_energy: e0, max_energy_deviation: max_dev })
}
