use super::{adiabatic_force, effective_hamiltonian, mapping_density, Electronic, Integrator, TrajectoryState};
use crate::error::Result;
use crate::linalg::{apply, expm_hermitian, expm_real_symmetric};
use num_complex::Complex64 as C64;

impl Integrator<'_> {
    fn mapping_kick(&mut self, state: &mut TrajectoryState, h: f64) {
        let Electronic::Mapping(m) = &state.electronic else { unreachable!() };
        mapping_density(&m.g, m.gamma, &mut self.rho);
        self.model.force_into(&state.r, &self.rho, &mut self.force);
        for (p, f) in state.p.iter_mut().zip(&self.force) {
            *p += h * f;
        }
    }

    pub(crate) fn drift(&self, state: &mut TrajectoryState, dt: f64) {
        for ((r, p), w) in state.r.iter_mut().zip(&state.p).zip(self.model.inv_mass()) {
            *r += dt * w * p;
        }
    }

    /// `g <- exp(-i V(R) h) g`
    fn rotate_diabatic(&mut self, r: &[f64], g: &mut [C64], h: f64) {
        self.model.potential_into(r, &mut self.v);
        let u = expm_real_symmetric(&self.v, h);
        let mut out = vec![C64::new(0.0, 0.0); g.len()];
        apply(&u, g, &mut out);
        g.copy_from_slice(&out);
    }

    pub(crate) fn rotate_amplitudes(&mut self, state: &mut TrajectoryState, h: f64) {
        let r = state.r.clone();
        let g = match &mut state.electronic {
            Electronic::Mapping(m) => &mut m.g,
            Electronic::Amplitudes { c, .. } => c,
        };
        self.rotate_diabatic(&r, g, h);
    }

    pub(crate) fn step_mapping_diabatic(&mut self, state: &mut TrajectoryState, dt: f64) {
        self.mapping_kick(state, 0.5 * dt);
        self.rotate_amplitudes(state, 0.5 * dt);
        self.drift(state, dt);
        self.rotate_amplitudes(state, 0.5 * dt);
        self.mapping_kick(state, 0.5 * dt);
    }

    pub(crate) fn step_mapping_adiabatic(&mut self, state: &mut TrajectoryState, dt: f64) -> Result<()> {
        let a0 = self.adiabatic_at(&state.r, state.frame.as_ref())?;
        let kick = |integ: &mut Self, state: &mut TrajectoryState, data: &crate::models::AdiabaticData| {
            let Electronic::Mapping(m) = &state.electronic else { unreachable!() };
            mapping_density(&m.g, m.gamma, &mut integ.rho);
            adiabatic_force(data, &integ.rho, &mut integ.force);
            for (p, f) in state.p.iter_mut().zip(&integ.force) {
                *p += 0.5 * dt * f;
            }
        };
        kick(self, state, &a0);
        let rotate = |state: &mut TrajectoryState, data: &crate::models::AdiabaticData, inv_mass: &[f64]| {
            let h = effective_hamiltonian(data, inv_mass, &state.p);
            let u = expm_hermitian(&h, 0.5 * dt);
            let Electronic::Mapping(m) = &mut state.electronic else { unreachable!() };
            let mut out = vec![C64::new(0.0, 0.0); m.g.len()];
            apply(&u, &m.g, &mut out);
            m.g = out;
        };
        rotate(state, &a0, self.model.inv_mass());
        self.drift(state, dt);
        let a1 = self.adiabatic_at(&state.r, Some(&a0.u))?;
        rotate(state, &a1, self.model.inv_mass());
        kick(self, state, &a1);
        state.frame = Some(a1.u.clone());
        self.store(&state.r.clone(), a1);
        Ok(())
    }
}
