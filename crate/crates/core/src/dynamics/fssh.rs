use num_complex::Complex64 as C64;
use rand::Rng;

use super::{effective_hamiltonian, Electronic, Integrator, TrajectoryState};
use crate::error::Result;
use crate::linalg::{apply, expm_hermitian};
use crate::models::AdiabaticData;

/// Fewest-switches hop probabilities out of `active` over one step.
///
/// The amplitude equation `dc_k/dt = -i E_k c_k - sum_l (v.d_kl) c_l` moves
/// population from `k` to `l` at the rate `2 Re[c_k^* c_l (v.d_kl)]`, so
/// `g_kl = max(0, 2 dt Re[c_k^* c_l (v.d_kl)] / |c_k|^2)`.
pub fn hop_probabilities(data: &AdiabaticData, c: &[C64], velocity: &[f64], active: usize, dt: f64) -> Vec<f64> {
    let f = c.len();
    let pk = c[active].norm_sqr();
    (0..f)
        .map(|l| {
            if l == active || pk == 0.0 {
                return 0.0;
            }
            let vd: f64 = data.d.iter().zip(velocity).map(|(d, v)| v * d[(active, l)]).sum();
            let flux = 2.0 * (c[active].conj() * c[l]).re * vd;
            (dt * flux / pk).max(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescaleOutcome {
    Hopped,
    /// Not enough kinetic energy along the coupling direction.
    Frustrated,
}

/// Adjusts `p` along `direction` so that `KE(p') + delta_e = KE(p)`, taking
/// the smaller-magnitude root of `a s^2 + b s + delta_e = 0`.
pub fn rescale_momentum(p: &mut [f64], direction: &[f64], inv_mass: &[f64], delta_e: f64) -> RescaleOutcome {
    let a: f64 = 0.5 * direction.iter().zip(inv_mass).map(|(d, w)| d * d * w).sum::<f64>();
    let b: f64 = p.iter().zip(direction).zip(inv_mass).map(|((p, d), w)| p * d * w).sum();
    if a == 0.0 {
        return if delta_e <= 0.0 && b == 0.0 { RescaleOutcome::Hopped } else { RescaleOutcome::Frustrated };
    }
    let disc = b * b - 4.0 * a * delta_e;
    if disc < 0.0 {
        return RescaleOutcome::Frustrated;
    }
    let sign = if b >= 0.0 { 1.0 } else { -1.0 };
    let s = (-b + sign * disc.sqrt()) / (2.0 * a);
    for (pi, d) in p.iter_mut().zip(direction) {
        *pi += s * d;
    }
    RescaleOutcome::Hopped
}

impl Integrator<'_> {
    fn surface_kick(&mut self, state: &mut TrajectoryState, data: &AdiabaticData, h: f64) {
        let Electronic::Amplitudes { active: Some(a), .. } = &state.electronic else { unreachable!() };
        for (p, g) in state.p.iter_mut().zip(&data.grad_u) {
            *p -= h * g[(*a, *a)];
        }
    }

    fn rotate_adiabatic(&self, state: &mut TrajectoryState, data: &AdiabaticData, h: f64) {
        let ham = effective_hamiltonian(data, self.model.inv_mass(), &state.p);
        let u = expm_hermitian(&ham, h);
        let Electronic::Amplitudes { c, .. } = &mut state.electronic else { unreachable!() };
        let mut out = vec![C64::new(0.0, 0.0); c.len()];
        apply(&u, c, &mut out);
        *c = out;
    }

    pub(crate) fn step_fssh<R: Rng + ?Sized>(
        &mut self,
        state: &mut TrajectoryState,
        dt: f64,
        reversal: bool,
        rng: &mut R,
    ) -> Result<()> {
        let a0 = self.adiabatic_at(&state.r, state.frame.as_ref())?;
        self.surface_kick(state, &a0, 0.5 * dt);
        self.rotate_adiabatic(state, &a0, 0.5 * dt);
        self.drift(state, dt);
        let a1 = self.adiabatic_at(&state.r, Some(&a0.u))?;
        self.rotate_adiabatic(state, &a1, 0.5 * dt);
        self.surface_kick(state, &a1, 0.5 * dt);
        self.attempt_hop(state, &a1, dt, reversal, rng);
        state.frame = Some(a1.u.clone());
        self.store(&state.r.clone(), a1);
        Ok(())
    }

    fn attempt_hop<R: Rng + ?Sized>(
        &self,
        state: &mut TrajectoryState,
        data: &AdiabaticData,
        dt: f64,
        reversal: bool,
        rng: &mut R,
    ) {
        let inv_mass = self.model.inv_mass();
        let velocity: Vec<f64> = state.p.iter().zip(inv_mass).map(|(p, w)| p * w).collect();
        let Electronic::Amplitudes { c, active: Some(active) } = &mut state.electronic else { unreachable!() };
        let probs = hop_probabilities(data, c, &velocity, *active, dt.abs());
        // one draw per step keeps the random stream aligned across trajectories
        let xi: f64 = rng.random();
        let mut acc = 0.0;
        let Some(target) = probs.iter().position(|&g| {
            acc += g;
            xi < acc
        }) else {
            return;
        };
        let k = *active;
        let direction: Vec<f64> = data.d.iter().map(|d| d[(k, target)]).collect();
        let delta_e = data.energies[target] - data.energies[k];
        match rescale_momentum(&mut state.p, &direction, inv_mass, delta_e) {
            RescaleOutcome::Hopped => *active = target,
            RescaleOutcome::Frustrated if reversal => {
                let target_force: f64 = data.grad_u.iter().zip(&direction).map(|(g, d)| -g[(target, target)] * d).sum();
                let pd: f64 = velocity.iter().zip(&direction).map(|(v, d)| v * d).sum();
                if target_force * pd < 0.0 {
                    let a: f64 = direction.iter().zip(inv_mass).map(|(d, w)| d * d * w).sum();
                    for (p, d) in state.p.iter_mut().zip(&direction) {
                        *p -= 2.0 * pd / a * d;
                    }
                }
            }
            RescaleOutcome::Frustrated => {}
        }
    }
}
