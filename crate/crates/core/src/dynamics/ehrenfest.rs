use super::{amplitude_density, Electronic, Integrator, TrajectoryState};

impl Integrator<'_> {
    fn mean_field_kick(&mut self, state: &mut TrajectoryState, h: f64) {
        let Electronic::Amplitudes { c, .. } = &state.electronic else { unreachable!() };
        amplitude_density(c, &mut self.rho);
        self.model.force_into(&state.r, &self.rho, &mut self.force);
        for (p, f) in state.p.iter_mut().zip(&self.force) {
            *p += h * f;
        }
    }

    pub(crate) fn step_ehrenfest(&mut self, state: &mut TrajectoryState, dt: f64) {
        self.mean_field_kick(state, 0.5 * dt);
        self.rotate_amplitudes(state, 0.5 * dt);
        self.drift(state, dt);
        self.rotate_amplitudes(state, 0.5 * dt);
        self.mean_field_kick(state, 0.5 * dt);
    }
}
