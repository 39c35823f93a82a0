//! Split-operator propagation of a two-component wavepacket on a uniform
//! grid for one-dimensional scattering models.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ChannelBasis, ChannelTable};
use crate::linalg::{expm_real_symmetric, symmetric_eigen_sorted};
use crate::models::DiabaticModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
    pub dt: f64,
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_points as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_max > self.r_min) || !self.n_points.is_power_of_two() || self.n_points < 16 || !(self.dt > 0.0) {
            return Err(Error::Invalid(format!("invalid grid {self:?}")));
        }
        Ok(())
    }
}

/// `psi(R, 0) ∝ exp[-alpha (R - R0)^2 / 2 + i (R - R0) P0]` on one diabatic state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wavepacket {
    pub alpha: f64,
    pub r0: f64,
    pub p0: f64,
    pub init_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DvrResult {
    pub times: Vec<f64>,
    /// `[time][state]` diabatic populations.
    pub populations: Vec<Vec<f64>>,
    pub diabatic: ChannelTable,
    pub adiabatic: ChannelTable,
    /// `max_t |norm(t) - 1|`
    pub norm_error: f64,
    /// Largest probability seen in the outer grid margins.
    pub boundary: f64,
    /// `<(R - <R>)^2>` at each record, summed over states.
    pub width_sq: Vec<f64>,
}

/// Largest tolerated probability in the outer margins of the grid.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

pub fn split_operator_dvr(
    model: &DiabaticModel,
    packet: Wavepacket,
    grid: GridSpec,
    t_final: f64,
    record_every: usize,
    divide_r: f64,
) -> Result<DvrResult> {
    grid.validate()?;
    if model.n_dof() != 1 || model.n_states() != 2 {
        return Err(Error::Oracle("split-operator oracle needs a 1-D two-state model".into()));
    }
    if packet.init_state >= 2 || !(packet.alpha > 0.0) || record_every == 0 {
        return Err(Error::Invalid(format!("invalid wavepacket {packet:?}")));
    }
    let n = grid.n_points;
    let dx = grid.dx();
    let xs: Vec<f64> = (0..n).map(|j| grid.r_min + j as f64 * dx).collect();
    let mass = 1.0 / model.inv_mass()[0];

    let mut psi = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
    for (j, &x) in xs.iter().enumerate() {
        let d = x - packet.r0;
        psi[packet.init_state][j] = C64::from_polar((-0.5 * packet.alpha * d * d).exp(), d * packet.p0);
    }
    let norm0: f64 = psi[packet.init_state].iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
    psi[packet.init_state].iter_mut().for_each(|z| *z /= norm0.sqrt());

    let dk = 2.0 * PI / (n as f64 * dx);
    let kinetic_half: Vec<C64> = (0..n)
        .map(|j| {
            let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dk;
            C64::from_polar(1.0 / n as f64, -0.5 * grid.dt * k * k / (2.0 * mass))
        })
        .collect();
    let potential: Vec<[C64; 4]> = xs
        .iter()
        .map(|&x| {
            let u = expm_real_symmetric(&model.potential(&[x]), grid.dt);
            [u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]]
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let kinetic = |psi: &mut [Vec<C64>; 2], fwd: &Arc<dyn Fft<f64>>, inv: &Arc<dyn Fft<f64>>| {
        for comp in psi.iter_mut() {
            fwd.process(comp);
            comp.iter_mut().zip(&kinetic_half).for_each(|(z, k)| *z *= k);
            inv.process(comp);
        }
    };

    let margin = (n / 20).max(4);
    let n_steps = (t_final / grid.dt).round() as usize;
    let mut times = Vec::new();
    let mut populations = Vec::new();
    let mut width_sq = Vec::new();
    let mut norm_error: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for step in 0..=n_steps {
        if step > 0 {
            kinetic(&mut psi, &fwd, &inv);
            for j in 0..n {
                let (a, b) = (psi[0][j], psi[1][j]);
                let u = &potential[j];
                psi[0][j] = u[0] * a + u[1] * b;
                psi[1][j] = u[2] * a + u[3] * b;
            }
            kinetic(&mut psi, &fwd, &inv);
        }
        if step % record_every == 0 || step == n_steps {
            let pops: Vec<f64> = psi.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).collect();
            norm_error = norm_error.max((pops.iter().sum::<f64>() - 1.0).abs());
            let edge: f64 = psi
                .iter()
                .map(|c| c[..margin].iter().chain(&c[n - margin..]).map(|z| z.norm_sqr()).sum::<f64>() * dx)
                .sum();
            boundary = boundary.max(edge);
            let dens: Vec<f64> = (0..n).map(|j| (psi[0][j].norm_sqr() + psi[1][j].norm_sqr()) * dx).collect();
            let mean: f64 = dens.iter().zip(&xs).map(|(d, x)| d * x).sum();
            width_sq.push(dens.iter().zip(&xs).map(|(d, x)| d * (x - mean).powi(2)).sum());
            times.push(step as f64 * grid.dt);
            populations.push(pops);
        }
    }
    if boundary > LEAKAGE_LIMIT {
        return Err(Error::Oracle(format!(
            "wavepacket reached the grid boundary (probability {boundary:.2e} in the margins); enlarge [r_min, r_max]"
        )));
    }

    let mut dia = [0.0; 4];
    let mut adia = [0.0; 4];
    let mut inside = 0.0;
    for (j, &x) in xs.iter().enumerate() {
        let side = if x > divide_r { 0 } else { 2 };
        let (a, b) = (psi[0][j], psi[1][j]);
        dia[side] += a.norm_sqr() * dx;
        dia[side + 1] += b.norm_sqr() * dx;
        // eigenvector signs do not matter for populations
        let (_, u) = symmetric_eigen_sorted(&model.potential(&[x]));
        let a0 = a * u[(0, 0)] + b * u[(1, 0)];
        let a1 = a * u[(0, 1)] + b * u[(1, 1)];
        adia[side] += a0.norm_sqr() * dx;
        adia[side + 1] += a1.norm_sqr() * dx;
        if (x - divide_r).abs() < 4.0 {
            inside += (a.norm_sqr() + b.norm_sqr()) * dx;
        }
    }
    let table = |basis, v: [f64; 4]| ChannelTable {
        basis,
        names: vec!["T0".into(), "T1".into(), "R0".into(), "R1".into()],
        values: v.to_vec(),
        stderr: vec![0.0; 4],
        n_inside: usize::from(inside > 1e-3),
    };
    Ok(DvrResult {
        times,
        populations,
        diabatic: table(ChannelBasis::Diabatic, dia),
        adiabatic: table(ChannelBasis::Adiabatic, adia),
        norm_error,
        boundary,
        width_sq,
    })
}

/// Channel agreement required between a run and its refinement.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-3;

/// Runs at `grid` and again with twice the points and half the step; fails
/// unless every channel agrees to [`CONVERGENCE_TOLERANCE`]. Returns the
/// refined run.
pub fn dvr_converged(
    model: &DiabaticModel,
    packet: Wavepacket,
    grid: GridSpec,
    t_final: f64,
    divide_r: f64,
) -> Result<DvrResult> {
    let coarse = split_operator_dvr(model, packet, grid, t_final, 1, divide_r)?;
    let fine_grid = GridSpec { n_points: 2 * grid.n_points, dt: grid.dt / 2.0, ..grid };
    let fine = split_operator_dvr(model, packet, fine_grid, t_final, 2, divide_r)?;
    let diff = [(&coarse.diabatic, &fine.diabatic), (&coarse.adiabatic, &fine.adiabatic)]
        .iter()
        .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    if diff >= CONVERGENCE_TOLERANCE {
        return Err(Error::NotConverged(format!(
            "channels changed by {diff:.2e} under grid refinement; use more points or a smaller dt"
        )));
    }
    Ok(fine)
}

/// Gaussian packet matching a model's Wigner initial conditions.
pub fn packet_from_model(model: &DiabaticModel) -> Result<Wavepacket> {
    let init = model.nuclear_init();
    if init.mean_r.len() != 1 {
        return Err(Error::Invalid("grid propagation needs one nuclear coordinate".into()));
    }
    Ok(Wavepacket {
        alpha: 1.0 / (2.0 * init.var_r[0]),
        r0: init.mean_r[0],
        p0: init.mean_p[0],
        init_state: model.initial_state(),
    })
}
