//! Ensemble runner: fans trajectories out over workers and reduces them in a
//! fixed order, so results do not depend on the worker count.
//!
//! Trajectory `i` draws from its own ChaCha8 stream (`set_stream(i)` on the
//! master seed) and belongs to gamma branch `i % B`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{initialize, run_trajectory, IntegratorConfig, Method};
use crate::error::{Error, Result};
use crate::estimators::{
    channel_values, Accumulator, ChannelBasis, ChannelSpec, ChannelTable, EnsembleSeries, ObservableSpec,
};
use crate::models::DiabaticModel;
use crate::phasespace::draw_gamma;

/// Trajectories per reduction chunk. Fixed so that the floating-point merge
/// tree is the same for every worker count.
pub const CHUNK_SIZE: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Divide by the instantaneous trace estimate.
    #[serde(default)]
    pub normalize: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone)]
pub struct EnsembleRequest<'a> {
    pub model: &'a DiabaticModel,
    pub method: Method,
    pub integrator: IntegratorConfig,
    pub observables: Vec<ObservableSpec>,
    pub channels: Option<ChannelSpec>,
    pub ensemble: EnsembleConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub series: EnsembleSeries,
    pub channels: Option<ChannelTable>,
    pub max_relative_energy_drift: f64,
    /// First few failure messages with their trajectory index.
    pub failures: Vec<(usize, String)>,
}

struct ChunkResult {
    series: Accumulator,
    channels: Option<Accumulator>,
    n_inside: usize,
    max_drift: f64,
    failures: Vec<(usize, String)>,
    n_failed: usize,
}

/// Independent random stream of trajectory `index`.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn run_ensemble(req: &EnsembleRequest) -> Result<EnsembleResult> {
    let model = req.model;
    let n = req.ensemble.n_trajectories;
    if n == 0 {
        return Err(Error::Invalid("n_trajectories must be positive".into()));
    }
    if req.ensemble.workers == 0 {
        return Err(Error::Invalid("workers must be at least 1".into()));
    }
    req.integrator.validate()?;
    req.method.validate(model, req.integrator.representation)?;
    if req.channels.is_some() && model.n_dof() != 1 {
        return Err(Error::Invalid("scattering channels need a one-dimensional nuclear model".into()));
    }
    let f = model.n_states();
    let coefs: Vec<Vec<f64>> = req.observables.iter().map(|o| o.coefficients(f)).collect::<Result<_>>()?;
    let n_branches = req.method.n_branches();
    let times = req.integrator.record_times();
    let n_chunks = n.div_ceil(CHUNK_SIZE);

    let run_chunk = |c: usize| -> ChunkResult {
        let mut out = ChunkResult {
            series: Accumulator::new(n_branches, times.len(), coefs.len()),
            channels: req.channels.map(|_| Accumulator::new(n_branches, 1, 2 * f)),
            n_inside: 0,
            max_drift: 0.0,
            failures: Vec::new(),
            n_failed: 0,
        };
        for i in c * CHUNK_SIZE..((c + 1) * CHUNK_SIZE).min(n) {
            match run_one(req, &coefs, times.len(), i) {
                Ok(t) => {
                    out.series.push(t.branch, &t.values, &t.traces);
                    if let (Some(acc), Some((vals, trace, inside))) = (&mut out.channels, t.channel) {
                        acc.push(t.branch, &vals, &[trace]);
                        out.n_inside += inside as usize;
                    }
                    out.max_drift = out.max_drift.max(t.drift);
                }
                Err(e) => {
                    out.n_failed += 1;
                    if out.failures.len() < 5 {
                        out.failures.push((i, e.to_string()));
                    }
                }
            }
        }
        out
    };

    let chunks = map_chunks(n_chunks, req.ensemble.workers, run_chunk)?;

    let mut series = Accumulator::new(n_branches, times.len(), coefs.len());
    let mut channels = req.channels.map(|_| Accumulator::new(n_branches, 1, 2 * f));
    let (mut n_inside, mut n_failed, mut max_drift) = (0, 0, 0.0f64);
    let mut failures = Vec::new();
    for c in &chunks {
        series.merge(&c.series);
        if let (Some(a), Some(b)) = (&mut channels, &c.channels) {
            a.merge(b);
        }
        n_inside += c.n_inside;
        n_failed += c.n_failed;
        max_drift = max_drift.max(c.max_drift);
        failures.extend(c.failures.iter().cloned());
    }
    failures.truncate(5);
    if n_failed > 0 {
        log::warn!("{n_failed} of {n} trajectories failed; first: {:?}", failures.first());
    }

    let weights: Vec<f64> = match &req.method {
        Method::Mapping(s) => (0..n_branches).map(|b| draw_gamma(s, b).map(|x| x.1)).collect::<Result<_>>()?,
        _ => vec![1.0],
    };
    let (vals, errs) = series.finish(&weights, req.ensemble.normalize)?;
    let n_obs = coefs.len();
    let series = EnsembleSeries {
        names: req.observables.iter().map(|o| o.name()).collect(),
        values: (0..n_obs).map(|o| vals.iter().map(|g| g[o]).collect()).collect(),
        stderr: (0..n_obs).map(|o| errs.iter().map(|g| g[o]).collect()).collect(),
        times,
        n_trajectories: n - n_failed,
        n_failed,
        metadata: metadata(req),
    };
    let channels = match (channels, req.channels) {
        (Some(acc), Some(spec)) => {
            let (v, e) = acc.finish(&weights, req.ensemble.normalize)?;
            if n_inside > 0 {
                log::warn!("{n_inside} trajectories still inside the interaction region at the final time");
            }
            let names = (0..f).map(|k| format!("T{k}")).chain((0..f).map(|k| format!("R{k}"))).collect();
            Some(ChannelTable { basis: spec.basis, names, values: v[0].clone(), stderr: e[0].clone(), n_inside })
        }
        _ => None,
    };
    Ok(EnsembleResult { series, channels, max_relative_energy_drift: max_drift, failures })
}

struct TrajectoryOutput {
    branch: usize,
    values: Vec<f64>,
    traces: Vec<f64>,
    channel: Option<(Vec<f64>, f64, bool)>,
    drift: f64,
}

fn run_one(req: &EnsembleRequest, coefs: &[Vec<f64>], n_times: usize, index: usize) -> Result<TrajectoryOutput> {
    let model = req.model;
    let mut rng = trajectory_rng(req.ensemble.seed, index);
    let branch = index % req.method.n_branches();
    let (init, a0) = initialize(model, &req.method, req.integrator.representation, branch, &mut rng)?;
    let n_obs = coefs.len();
    let mut values = vec![0.0; n_times * n_obs];
    let mut traces = vec![0.0; n_times];
    let summary = run_trajectory(model, &req.method, init, &req.integrator, &mut rng, |snap| {
        let pops = snap.diabatic_populations;
        traces[snap.index] = a0 * pops.iter().sum::<f64>();
        for (o, c) in coefs.iter().enumerate() {
            values[snap.index * n_obs + o] = a0 * c.iter().zip(pops).map(|(c, p)| c * p).sum::<f64>();
        }
    })?;
    let channel = match req.channels {
        Some(spec) => {
            let s = &summary.final_state;
            let pops = match spec.basis {
                ChannelBasis::Diabatic => s.diabatic_populations(model)?,
                ChannelBasis::Adiabatic => s.adiabatic_populations(model)?,
            };
            let vals: Vec<f64> = channel_values(s.r[0], &pops, spec.divide_r).iter().map(|x| a0 * x).collect();
            let inside = (s.r[0] - spec.divide_r).abs() < spec.interaction_radius;
            Some((vals, a0 * pops.iter().sum::<f64>(), inside))
        }
        None => None,
    };
    Ok(TrajectoryOutput { branch, values, traces, channel, drift: summary.relative_energy_drift() })
}

#[cfg(feature = "parallel")]
fn map_chunks<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, workers: usize, f: F) -> Result<Vec<T>> {
    use rayon::prelude::*;
    if workers == 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T, F: Fn(usize) -> T>(n: usize, _workers: usize, f: F) -> Result<Vec<T>> {
    Ok((0..n).map(f).collect())
}

fn metadata(req: &EnsembleRequest) -> Vec<(String, String)> {
    let mut m = vec![
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("model".into(), req.model.name.clone()),
        ("method".into(), req.method.label()),
        ("representation".into(), format!("{:?}", req.integrator.representation).to_lowercase()),
        ("dt".into(), req.integrator.dt.to_string()),
        ("max_time".into(), req.integrator.max_time.to_string()),
        ("record_stride".into(), req.integrator.record_stride.to_string()),
        ("seed".into(), req.ensemble.seed.to_string()),
        ("requested_trajectories".into(), req.ensemble.n_trajectories.to_string()),
        ("estimator".into(), if req.ensemble.normalize { "trace-normalized" } else { "raw" }.into()),
        ("initial_state".into(), req.model.initial_state().to_string()),
    ];
    for (k, v) in &req.model.params {
        m.push((format!("model.{k}"), v.clone()));
    }
    m
}
