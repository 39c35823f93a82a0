//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The exported functions are thin wrappers over plain Rust functions with
//! `String` errors, so the same code paths are tested natively.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

use phasedyn::dynamics::{IntegratorConfig, Method, Representation};
use phasedyn::ensemble::{run_ensemble, EnsembleConfig, EnsembleRequest};
use phasedyn::estimators::{ChannelBasis, ChannelSpec, ObservableSpec};
use phasedyn::marginals::{marginal_f2, support_radius};
use phasedyn::models::{build_tully, DiabaticModel, TullyParams, TullyVariant};
use phasedyn::oracles::frozen_nuclei_exact;
use phasedyn::phasespace::GammaScheme;

/// Single self-inverse gamma for `delta == 0`, otherwise the weighted pair.
pub fn scheme(delta: f64) -> Result<GammaScheme, String> {
    let s = if delta == 0.0 { GammaScheme::self_inverse(2) } else { GammaScheme::symmetric_pair(delta, 2) };
    s.map_err(|e| e.to_string())
}

/// Closed-form two-state marginal of `K_nm` on a `bins x bins` grid
/// covering the support, row-major with `x_0` along rows.
pub fn marginal_grid(delta: f64, n: usize, m: usize, bins: usize) -> Result<Vec<f64>, String> {
    if n > 1 || m > 1 || bins == 0 {
        return Err("entry must be 0 or 1 and bins positive".into());
    }
    let s = scheme(delta)?;
    let r = support_radius(&s, 2);
    let h = 2.0 * r / bins as f64;
    let mut out = Vec::with_capacity(bins * bins);
    for i in 0..bins {
        for j in 0..bins {
            let (x0, x1) = (-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h);
            out.push(marginal_f2(&s, x0, x1).map_err(|e| e.to_string())?[(n, m)]);
        }
    }
    Ok(out)
}

/// Ensemble `P0(t)` with standard errors next to the exact propagator.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct FrozenSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub exact: Vec<f64>,
}

pub fn frozen_series(
    bias: f64,
    coupling: f64,
    delta: f64,
    n_trajectories: usize,
    t_max: f64,
    seed: u64,
) -> Result<FrozenSeries, String> {
    let v = DMatrix::from_row_slice(2, 2, &[bias, coupling, coupling, -bias]);
    let model = DiabaticModel::constant(v.clone(), 0).map_err(|e| e.to_string())?;
    let dt = 0.05;
    let stride = ((t_max / dt) / 100.0).ceil().max(1.0) as usize;
    let req = EnsembleRequest {
        model: &model,
        method: Method::Mapping(scheme(delta)?),
        integrator: IntegratorConfig {
            dt,
            max_time: t_max,
            record_stride: stride,
            representation: Representation::Diabatic,
        },
        observables: vec![ObservableSpec::Population { n: 0 }],
        channels: None,
        ensemble: EnsembleConfig { n_trajectories, seed, workers: 1, normalize: false },
    };
    let res = run_ensemble(&req).map_err(|e| e.to_string())?;
    let s = res.series;
    let psi0 = [num(1.0), num(0.0)];
    let vc = v.map(num);
    let exact = frozen_nuclei_exact(&vc, &psi0, &s.times).into_iter().map(|p| p[0]).collect();
    Ok(FrozenSeries { times: s.times.clone(), mean: s.values[0].clone(), stderr: s.stderr[0].clone(), exact })
}

fn num(x: f64) -> nalgebra::Complex<f64> {
    nalgebra::Complex::new(x, 0.0)
}

/// `[T0, T0_err, T1, T1_err, R0, R0_err, R1, R1_err]` for one incident
/// momentum. ECR channels are adiabatic, the others diabatic.
pub fn tully_channels(
    variant: &str,
    p0: f64,
    method: &str,
    n_trajectories: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let variant: TullyVariant = variant.parse().map_err(|e: phasedyn::Error| e.to_string())?;
    if !(p0 > 0.0) {
        return Err("incident momentum must be positive".into());
    }
    let params = TullyParams::default_for(variant).with_p0(p0);
    let model = build_tully(&params).map_err(|e| e.to_string())?;
    let (method, representation) = match method {
        "cmm" => (Method::Mapping(scheme(0.0)?), Representation::Diabatic),
        "wmm" => (Method::Mapping(scheme(0.05)?), Representation::Diabatic),
        "ehrenfest" => (Method::Ehrenfest, Representation::Diabatic),
        "fssh" => (Method::Fssh { frustrated_reversal: true }, Representation::Adiabatic),
        other => return Err(format!("unknown method '{other}'")),
    };
    let basis = if variant == TullyVariant::Ecr { ChannelBasis::Adiabatic } else { ChannelBasis::Diabatic };
    // out through the coupling region and back, with room to spare
    let max_time = (2.0 * params.r0.abs() + 12.0) * params.mass / p0;
    let dt = if variant == TullyVariant::Ecr { 0.5 } else { 1.0 };
    let req = EnsembleRequest {
        model: &model,
        method,
        integrator: IntegratorConfig { dt, max_time, record_stride: usize::MAX, representation },
        observables: ObservableSpec::defaults(2),
        channels: Some(ChannelSpec { basis, ..Default::default() }),
        ensemble: EnsembleConfig { n_trajectories, seed, workers: 1, normalize: false },
    };
    let ch = run_ensemble(&req).map_err(|e| e.to_string())?.channels.ok_or("no channels")?;
    Ok(ch.values.iter().zip(&ch.stderr).flat_map(|(v, e)| [*v, *e]).collect())
}

#[wasm_bindgen(js_name = supportRadius)]
pub fn support_radius_js(delta: f64) -> Result<f64, JsError> {
    Ok(support_radius(&scheme(delta).map_err(|e| JsError::new(&e))?, 2))
}

#[wasm_bindgen(js_name = marginalGrid)]
pub fn marginal_grid_js(delta: f64, n: usize, m: usize, bins: usize) -> Result<Vec<f64>, JsError> {
    marginal_grid(delta, n, m, bins).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = frozenSeries)]
pub fn frozen_series_js(
    bias: f64,
    coupling: f64,
    delta: f64,
    n_trajectories: usize,
    t_max: f64,
    seed: u32,
) -> Result<FrozenSeries, JsError> {
    frozen_series(bias, coupling, delta, n_trajectories, t_max, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tullyChannels)]
pub fn tully_channels_js(
    variant: &str,
    p0: f64,
    method: &str,
    n_trajectories: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    tully_channels(variant, p0, method, n_trajectories, seed as u64).map_err(|e| JsError::new(&e))
}
