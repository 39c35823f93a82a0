//! Truncated-Fock propagation for models whose potential is at most linear in
//! each harmonic coordinate. The Hamiltonian is applied matrix-free on the
//! product basis `|n> (x) |o_1 ... o_N>` and exponentiated by short-iterative
//! Lanczos steps.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DiabaticModel, KineticConvention, LinearVibronicModel};

/// Largest product-basis dimension accepted.
pub const MAX_DIMENSION: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockSpec {
    /// Highest occupation kept per mode.
    pub n_max: Vec<usize>,
    /// Lanczos time step.
    pub dt: f64,
}

impl FockSpec {
    pub fn uniform(n_modes: usize, n_max: usize, dt: f64) -> Self {
        FockSpec { n_max: vec![n_max; n_modes], dt }
    }

    pub fn enlarged(&self, by: usize) -> Self {
        FockSpec { n_max: self.n_max.iter().map(|n| n + by).collect(), dt: self.dt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModeState {
    Fock(usize),
    /// Coherent state centred at `(r0, p0)` in the model's coordinates.
    Coherent {
        r0: f64,
        p0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockInit {
    pub electronic: usize,
    pub modes: Vec<ModeState>,
}

impl FockInit {
    pub fn ground(electronic: usize, n_modes: usize) -> Self {
        FockInit { electronic, modes: vec![ModeState::Fock(0); n_modes] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockResult {
    pub times: Vec<f64>,
    /// `[time][state]`
    pub populations: Vec<Vec<f64>>,
    /// `[time][mode]` expectation of the mode coordinate.
    pub mean_r: Vec<Vec<f64>>,
    pub norm_error: f64,
    pub energy_error: f64,
}

struct Operator<'a> {
    lin: &'a LinearVibronicModel,
    n_states: usize,
    dims: Vec<usize>,
    strides: Vec<usize>,
    bath_dim: usize,
    /// Coordinate prefactor `R = x0 (a + a^dagger)` per mode.
    x0: Vec<f64>,
    /// Diagonal harmonic energy per bath index.
    bath_energy: Vec<f64>,
    /// Occupation of each mode per bath index.
    occ: Vec<Vec<u16>>,
    shift: f64,
}

impl<'a> Operator<'a> {
    fn new(model: &'a DiabaticModel, spec: &FockSpec) -> Result<Self> {
        let lin = model
            .linear_form()
            .ok_or_else(|| Error::Oracle(format!("model {} is not linear in harmonic modes", model.name)))?;
        if spec.n_max.len() != lin.n_modes() {
            return Err(Error::Invalid("n_max must list one cutoff per mode".into()));
        }
        if spec.n_max.iter().any(|&n| n < 2) || !(spec.dt > 0.0) {
            return Err(Error::Invalid(format!("invalid Fock spec {spec:?}")));
        }
        let dims: Vec<usize> = spec.n_max.iter().map(|n| n + 1).collect();
        let bath_dim = dims.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
        let f = lin.n_states();
        match bath_dim.and_then(|b| b.checked_mul(f)) {
            Some(total) if total <= MAX_DIMENSION => {}
            _ => {
                return Err(Error::Oracle(format!(
                    "Fock basis too large for cutoffs {:?}; reduce n_max or the mode count",
                    spec.n_max
                )))
            }
        }
        let bath_dim = bath_dim.unwrap();
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let x0: Vec<f64> = lin
            .freqs
            .iter()
            .map(|w| match lin.convention {
                KineticConvention::MassWeighted => (0.5 / w).sqrt(),
                KineticConvention::FrequencyWeighted => 0.5f64.sqrt(),
            })
            .collect();
        let mut occ = vec![vec![0u16; dims.len()]; bath_dim];
        let mut bath_energy = vec![0.0; bath_dim];
        for b in 0..bath_dim {
            for k in 0..dims.len() {
                let o = (b / strides[k]) % dims[k];
                occ[b][k] = o as u16;
                bath_energy[b] += lin.freqs[k] * (o as f64 + 0.5);
            }
        }
        let shift = (0..f).map(|n| lin.v0[(n, n)]).sum::<f64>() / f as f64;
        Ok(Operator { lin, n_states: f, dims, strides, bath_dim, x0, bath_energy, occ, shift })
    }

    fn dim(&self) -> usize {
        self.n_states * self.bath_dim
    }

    /// `R_k phi` on the bath factor, written into `out`.
    fn coordinate(&self, k: usize, phi: &[C64], out: &mut [C64]) {
        let s = self.strides[k];
        let top = self.dims[k] - 1;
        for b in 0..self.bath_dim {
            let o = self.occ[b][k] as usize;
            let mut acc = C64::new(0.0, 0.0);
            if o < top {
                acc += phi[b + s] * ((o + 1) as f64).sqrt();
            }
            if o > 0 {
                acc += phi[b - s] * (o as f64).sqrt();
            }
            out[b] = acc * self.x0[k];
        }
    }

    /// `out = (H - shift) psi`
    fn apply(&self, psi: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let d = self.bath_dim;
        let v0 = &self.lin.v0;
        for n in 0..self.n_states {
            let on = &mut out[n * d..(n + 1) * d];
            for b in 0..d {
                on[b] = psi[n * d + b] * (self.bath_energy[b] + v0[(n, n)] - self.shift);
            }
            for m in 0..self.n_states {
                if m != n && v0[(n, m)] != 0.0 {
                    for b in 0..d {
                        on[b] += psi[m * d + b] * v0[(n, m)];
                    }
                }
            }
        }
        for (k, lk) in self.lin.couplings.iter().enumerate() {
            for m in 0..self.n_states {
                if (0..self.n_states).all(|n| lk[(n, m)] == 0.0) {
                    continue;
                }
                self.coordinate(k, &psi[m * d..(m + 1) * d], scratch);
                for n in 0..self.n_states {
                    let c = lk[(n, m)];
                    if c != 0.0 {
                        for b in 0..d {
                            out[n * d + b] += scratch[b] * c;
                        }
                    }
                }
            }
        }
    }

    fn initial(&self, init: &FockInit) -> Result<Vec<C64>> {
        if init.electronic >= self.n_states || init.modes.len() != self.dims.len() {
            return Err(Error::Invalid("initial Fock state does not match the model".into()));
        }
        let factors: Vec<Vec<C64>> = init
            .modes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let dim = self.dims[k];
                match *m {
                    ModeState::Fock(o) if o < dim => {
                        let mut v = vec![C64::new(0.0, 0.0); dim];
                        v[o] = C64::new(1.0, 0.0);
                        Ok(v)
                    }
                    ModeState::Fock(o) => Err(Error::Invalid(format!("occupation {o} exceeds cutoff of mode {k}"))),
                    ModeState::Coherent { r0, p0 } => {
                        // R = x0 (a + a^dagger), P = i (a^dagger - a) / (2 x0)
                        let alpha = C64::new(r0 / (2.0 * self.x0[k]), p0 * self.x0[k]);
                        let mut v = Vec::with_capacity(dim);
                        let mut term = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
                        for o in 0..dim {
                            if o > 0 {
                                term = term * alpha / (o as f64).sqrt();
                            }
                            v.push(term);
                        }
                        Ok(v)
                    }
                }
            })
            .collect::<Result<_>>()?;
        let mut psi = vec![C64::new(0.0, 0.0); self.dim()];
        let base = init.electronic * self.bath_dim;
        for b in 0..self.bath_dim {
            let mut amp = C64::new(1.0, 0.0);
            for (k, f) in factors.iter().enumerate() {
                amp *= f[self.occ[b][k] as usize];
            }
            psi[base + b] = amp;
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= norm);
        Ok(psi)
    }

    fn observe(&self, psi: &[C64], scratch: &mut [C64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.bath_dim;
        let pops = (0..self.n_states).map(|n| psi[n * d..(n + 1) * d].iter().map(|z| z.norm_sqr()).sum()).collect();
        let mut mean_r = vec![0.0; self.dims.len()];
        for (k, r) in mean_r.iter_mut().enumerate() {
            for n in 0..self.n_states {
                let block = &psi[n * d..(n + 1) * d];
                self.coordinate(k, block, scratch);
                *r += block.iter().zip(scratch.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
            }
        }
        (pops, mean_r)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// One short-iterative Lanczos step `psi <- exp(-i H dt) psi`, growing the
/// Krylov space until the residual estimate drops below `tol`.
fn lanczos_step(op: &Operator, psi: &mut [C64], dt: f64, tol: f64, scratch: &mut [C64]) -> Result<()> {
    const MAX_KRYLOV: usize = 60;
    let dim = psi.len();
    let norm0 = dot(psi, psi).re.sqrt();
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|z| z / norm0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w, scratch);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalization keeps the small basis orthonormal
        for q in &basis {
            let c = dot(q, &w);
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
        let b = dot(&w, &w).re.sqrt();
        let m = alpha.len();
        let coeffs = krylov_exponential(&alpha, &beta, dt);
        let residual = b * coeffs[m - 1].norm();
        if residual < tol || b < 1e-14 {
            psi.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (q, c) in basis.iter().zip(&coeffs) {
                psi.iter_mut().zip(q).for_each(|(x, y)| *x += c * y * norm0);
            }
            return Ok(());
        }
        if m >= MAX_KRYLOV {
            return Err(Error::Oracle(format!(
                "Lanczos did not converge (residual {residual:.2e}); reduce the Fock dt"
            )));
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
}

/// `exp(-i T dt) e_1` for the tridiagonal `T`.
fn krylov_exponential(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let v = eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)];
                    C64::from_polar(v, -eig.eigenvalues[k] * dt)
                })
                .sum()
        })
        .collect()
}

/// Propagates one pure initial state and records populations every
/// `dt_record` up to `t_final`.
pub fn fock_propagate(
    model: &DiabaticModel,
    spec: &FockSpec,
    init: &FockInit,
    t_final: f64,
    dt_record: f64,
) -> Result<FockResult> {
    let op = Operator::new(model, spec)?;
    if !(dt_record > 0.0) {
        return Err(Error::Invalid("dt_record must be positive".into()));
    }
    let mut psi = op.initial(init)?;
    let mut scratch = vec![C64::new(0.0, 0.0); op.bath_dim];
    let mut hpsi = vec![C64::new(0.0, 0.0); op.dim()];
    let energy = |psi: &[C64], hpsi: &mut [C64], scratch: &mut [C64]| {
        op.apply(psi, hpsi, scratch);
        dot(psi, hpsi).re
    };
    let e0 = energy(&psi, &mut hpsi, &mut scratch);
    let n_records = (t_final / dt_record + 1e-9).floor() as usize;
    let substeps = (dt_record / spec.dt).ceil().max(1.0) as usize;
    let h = dt_record / substeps as f64;
    let mut out = FockResult {
        times: Vec::new(),
        populations: Vec::new(),
        mean_r: Vec::new(),
        norm_error: 0.0,
        energy_error: 0.0,
    };
    for rec in 0..=n_records {
        if rec > 0 {
            for _ in 0..substeps {
                lanczos_step(&op, &mut psi, h, 1e-12, &mut scratch)?;
            }
        }
        let (pops, mean_r) = op.observe(&psi, &mut scratch);
        out.norm_error = out.norm_error.max((pops.iter().sum::<f64>() - 1.0).abs());
        out.energy_error = out.energy_error.max((energy(&psi, &mut hpsi, &mut scratch) - e0).abs());
        out.times.push(rec as f64 * dt_record);
        out.populations.push(pops);
        out.mean_r.push(mean_r);
    }
    Ok(out)
}

/// Boltzmann-weighted occupation tuples of the bath at inverse temperature
/// `beta`, pruned below `cutoff` and renormalized. Deterministic
/// enumeration in place of sampling.
pub fn thermal_occupations(freqs: &[f64], beta: f64, cutoff: f64) -> Vec<(Vec<usize>, f64)> {
    let mut tuples: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for &w in freqs {
        let q = (-beta * w).exp();
        let mut next = Vec::new();
        for (occ, p) in &tuples {
            let mut o = 0;
            loop {
                let pk = p * (1.0 - q) * q.powi(o as i32);
                if pk < cutoff {
                    break;
                }
                let mut v = occ.clone();
                v.push(o);
                next.push((v, pk));
                o += 1;
            }
        }
        tuples = next;
    }
    let total: f64 = tuples.iter().map(|t| t.1).sum();
    tuples.iter_mut().for_each(|t| t.1 /= total);
    tuples
}

/// Thermal bath average over Boltzmann-weighted Fock states.
pub fn fock_thermal(
    model: &DiabaticModel,
    spec: &FockSpec,
    electronic: usize,
    beta: f64,
    cutoff: f64,
    t_final: f64,
    dt_record: f64,
) -> Result<FockResult> {
    let lin = model.linear_form().ok_or_else(|| Error::Oracle("model is not linear".into()))?;
    let tuples = thermal_occupations(&lin.freqs, beta, cutoff);
    let mut acc: Option<FockResult> = None;
    for (occ, p) in tuples {
        // keep the occupied level well inside the truncated space
        let local = FockSpec { n_max: spec.n_max.iter().zip(&occ).map(|(n, o)| n + o).collect(), dt: spec.dt };
        let init = FockInit { electronic, modes: occ.iter().map(|&o| ModeState::Fock(o)).collect() };
        let r = fock_propagate(model, &local, &init, t_final, dt_record)?;
        match &mut acc {
            None => {
                let mut first = r;
                scale(&mut first, p);
                acc = Some(first);
            }
            Some(a) => {
                for (x, y) in a.populations.iter_mut().flatten().zip(r.populations.iter().flatten()) {
                    *x += p * y;
                }
                for (x, y) in a.mean_r.iter_mut().flatten().zip(r.mean_r.iter().flatten()) {
                    *x += p * y;
                }
                a.norm_error = a.norm_error.max(r.norm_error);
                a.energy_error = a.energy_error.max(r.energy_error);
            }
        }
    }
    acc.ok_or_else(|| Error::Oracle("no thermal states above the cutoff".into()))
}

fn scale(r: &mut FockResult, p: f64) {
    r.populations.iter_mut().flatten().for_each(|x| *x *= p);
    r.mean_r.iter_mut().flatten().for_each(|x| *x *= p);
}

/// Runs `propagate` at `spec` and at `spec` enlarged by two quanta per mode;
/// fails unless all populations agree to `1e-3`.
pub fn fock_converged<F>(spec: &FockSpec, propagate: F) -> Result<FockResult>
where
    F: Fn(&FockSpec) -> Result<FockResult>,
{
    let base = propagate(spec)?;
    let bigger = spec.enlarged(2);
    let check = propagate(&bigger)?;
    let diff = base
        .populations
        .iter()
        .flatten()
        .zip(check.populations.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if diff >= 1e-3 {
        let suggest: Vec<usize> = spec.n_max.iter().map(|n| n + 4).collect();
        return Err(Error::NotConverged(format!(
            "populations changed by {diff:.2e} when n_max grew by 2; try n_max = {suggest:?}"
        )));
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_spin_boson, InitialNuclearSpec, ModelKind, SpinBosonParams};
    use crate::oracles::frozen_nuclei_exact;

    fn single_mode(w: f64, convention: KineticConvention) -> DiabaticModel {
        let lin = LinearVibronicModel {
            v0: DMatrix::zeros(1, 1),
            freqs: vec![w],
            convention,
            couplings: vec![DMatrix::zeros(1, 1)],
        };
        let init = InitialNuclearSpec { mean_r: vec![0.0], mean_p: vec![0.0], var_r: vec![0.5], var_p: vec![0.5] };
        let inv = lin.inv_mass();
        DiabaticModel::new("mode", ModelKind::Linear(lin), inv, init, 0).unwrap()
    }

    #[test]
    fn coherent_state_oscillates() {
        for conv in [KineticConvention::MassWeighted, KineticConvention::FrequencyWeighted] {
            let w = 0.7;
            let m = single_mode(w, conv);
            let r0 = 1.3;
            let init = FockInit { electronic: 0, modes: vec![ModeState::Coherent { r0, p0: 0.0 }] };
            let res = fock_propagate(&m, &FockSpec::uniform(1, 40, 0.5), &init, 20.0, 0.5).unwrap();
            for (t, r) in res.times.iter().zip(&res.mean_r) {
                assert!((r[0] - r0 * (w * t).cos()).abs() < 1e-8, "{conv:?} t={t}: {}", r[0]);
            }
            assert!(res.norm_error < 1e-10 && res.energy_error < 1e-8);
        }
    }

    #[test]
    fn uncoupled_bath_matches_frozen_oracle() {
        let params = SpinBosonParams { alpha: 0.0, n_modes: 2, ..SpinBosonParams::default() };
        let m = build_spin_boson(&params).unwrap();
        let res = fock_propagate(&m, &FockSpec::uniform(2, 3, 0.2), &FockInit::ground(0, 2), 10.0, 0.5).unwrap();
        let v = m.linear_form().unwrap().v0.map(|x| C64::new(x, 0.0));
        let exact = frozen_nuclei_exact(&v, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &res.times);
        for (a, b) in res.populations.iter().zip(&exact) {
            assert!((a[0] - b[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn coupled_bath_conserves_norm_and_energy() {
        let params = SpinBosonParams { n_modes: 3, alpha: 0.5, ..SpinBosonParams::default() };
        let m = build_spin_boson(&params).unwrap();
        let res = fock_propagate(&m, &FockSpec::uniform(3, 8, 0.2), &FockInit::ground(0, 3), 5.0, 0.25).unwrap();
        assert!(res.norm_error < 1e-10, "{}", res.norm_error);
        assert!(res.energy_error < 1e-8, "{}", res.energy_error);
    }

    #[test]
    fn thermal_weights() {
        let t = thermal_occupations(&[0.5, 1.0], 2.0, 1e-9);
        let total: f64 = t.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let ground = t.iter().find(|x| x.0 == vec![0, 0]).unwrap().1;
        let expect = (1.0 - (-1.0f64).exp()) * (1.0 - (-2.0f64).exp());
        assert!((ground - expect).abs() < 1e-7);
    }

    #[test]
    fn oversized_basis_is_rejected() {
        let m = build_spin_boson(&SpinBosonParams { n_modes: 8, ..SpinBosonParams::default() }).unwrap();
        let err = fock_propagate(&m, &FockSpec::uniform(8, 9, 0.1), &FockInit::ground(0, 8), 1.0, 0.5);
        assert!(matches!(err, Err(Error::Oracle(_))));
    }

    #[test]
    fn convergence_gate_flags_small_cutoffs() {
        let m = build_spin_boson(&SpinBosonParams { n_modes: 1, alpha: 5.0, ..SpinBosonParams::default() }).unwrap();
        let run = |s: &FockSpec| fock_propagate(&m, s, &FockInit::ground(0, 1), 10.0, 0.5);
        assert!(matches!(fock_converged(&FockSpec::uniform(1, 2, 0.2), run), Err(Error::NotConverged(_))));
        assert!(fock_converged(&FockSpec::uniform(1, 30, 0.2), run).is_ok());
    }
}
