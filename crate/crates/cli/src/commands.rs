use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use phasedyn::ensemble::{run_ensemble, EnsembleConfig, EnsembleRequest, EnsembleResult};
use phasedyn::estimators::{fmt_num, write_metadata, EnsembleSeries, ObservableSpec};
use phasedyn::marginals::{hybrid_joint, marginal_f2_grid, marginal_mc, support_radius, Grid2D, Projection};
use phasedyn::models::DiabaticModel;
use phasedyn::oracles::{
    dvr_converged, fock_converged, fock_propagate, fock_thermal, frozen_nuclei_exact, packet_from_model,
    split_operator_dvr, FockInit, FockResult, FockSpec, GridSpec,
};

use crate::config::{
    from_table, parse, parse_value, read_toml, set_dotted, MarginalsBlock, MarginalsConfig, OracleBlock, OracleConfig,
    RunConfig,
};

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, table: &mut toml::Table) -> anyhow::Result<()> {
        if let Some(seed) = self.seed {
            set_dotted(table, "ensemble.seed", toml::Value::Integer(seed as i64)).context("--seed")?;
        }
        if let Some(w) = self.workers {
            set_dotted(table, "ensemble.workers", toml::Value::Integer(w as i64)).context("--workers")?;
        }
        Ok(())
    }
}

/// Above this failed fraction a run is an error; above a tenth of it, a warning.
pub const MAX_FAILED_FRACTION: f64 = 0.10;
pub const WARN_FAILED_FRACTION: f64 = 0.01;

/// Parses a config file; schema errors carry the file's line numbers.
pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<(T, toml::Table)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = parse(&text).with_context(|| format!("in {}", path.display()))?;
    Ok((cfg, read_toml(path)?))
}

pub fn load_run(path: &Path, ov: &Overrides) -> anyhow::Result<(RunConfig, toml::Table)> {
    let (_, mut table) = load::<RunConfig>(path)?;
    ov.apply(&mut table)?;
    let mut cfg: RunConfig = from_table(&table).with_context(|| format!("in {}", path.display()))?;
    if let Some(out) = &ov.out {
        cfg.output.directory = out.clone();
    }
    cfg.validate()?;
    Ok((cfg, table))
}

/// Runs the ensemble a config describes. Times in the config and in the
/// returned series are in the model's reporting unit.
pub fn execute_run(cfg: &RunConfig) -> anyhow::Result<EnsembleResult> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let method = cfg.method.resolve(model.n_states())?;
    let (unit, scale) = cfg.model.time_unit();
    let mut integrator = cfg.integrator.clone();
    integrator.dt /= scale;
    integrator.max_time /= scale;
    let observables = cfg.output.observables.clone().unwrap_or_else(|| ObservableSpec::defaults(model.n_states()));
    let req = EnsembleRequest {
        model: &model,
        method,
        integrator,
        observables,
        channels: cfg.output.channels,
        ensemble: EnsembleConfig {
            n_trajectories: cfg.ensemble.n_trajectories,
            seed: cfg.ensemble.seed,
            workers: cfg.ensemble.workers,
            normalize: cfg.output.normalize,
        },
    };
    let mut result = run_ensemble(&req)?;
    result.series.times.iter_mut().for_each(|t| *t *= scale);
    result.series.metadata.push(("time_unit".into(), unit.into()));
    check_failures(&result)?;
    Ok(result)
}

fn check_failures(result: &EnsembleResult) -> anyhow::Result<()> {
    let s = &result.series;
    let frac = s.n_failed as f64 / s.n_trajectories.max(1) as f64;
    let first = result.failures.first().map(|(i, m)| format!(" (first: trajectory {i}: {m})")).unwrap_or_default();
    if frac > MAX_FAILED_FRACTION {
        bail!("{} of {} trajectories failed{first}", s.n_failed, s.n_trajectories);
    }
    if frac > WARN_FAILED_FRACTION {
        log::warn!("{} of {} trajectories failed{first}", s.n_failed, s.n_trajectories);
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn meta_text(resolved: &toml::Table, extra: &[(String, String)]) -> anyhow::Result<String> {
    let mut out = format!("# phasedyn {}\n", env!("CARGO_PKG_VERSION"));
    write_metadata(&mut out, extra);
    out.push('\n');
    out.push_str(&toml::to_string(resolved)?);
    Ok(out)
}

/// Writes `series.csv`, optional `channels.csv` and `meta.txt` into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, result: &EnsembleResult) -> anyhow::Result<()> {
    write_file(dir, "series.csv", &result.series.to_csv())?;
    if let Some(ch) = &result.channels {
        write_file(dir, "channels.csv", &ch.to_csv(&result.series.metadata))?;
    }
    let resolved = toml::Table::try_from(cfg)?;
    let extra = vec![
        ("n_trajectories".to_string(), result.series.n_trajectories.to_string()),
        ("n_failed".to_string(), result.series.n_failed.to_string()),
        ("max_relative_energy_drift".to_string(), format!("{:e}", result.max_relative_energy_drift)),
    ];
    write_file(dir, "meta.txt", &meta_text(&resolved, &extra)?)?;
    Ok(())
}

pub fn cmd_run(path: &Path, ov: &Overrides) -> anyhow::Result<PathBuf> {
    let (cfg, _) = load_run(path, ov)?;
    let result = execute_run(&cfg)?;
    write_run(&cfg.output.directory, &cfg, &result)?;
    Ok(cfg.output.directory.clone())
}

/// Result of one sweep point.
pub struct SweepPoint {
    pub value: String,
    pub result: EnsembleResult,
}

/// Runs every value of `param` (a dotted config path such as `model.p0`).
pub fn execute_sweep(
    table: &toml::Table,
    param: &str,
    values: &[String],
) -> anyhow::Result<Vec<(RunConfig, SweepPoint)>> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        let mut t = table.clone();
        set_dotted(&mut t, param, parse_value(v)).with_context(|| format!("sweep parameter '{param}'"))?;
        let cfg: RunConfig = from_table(&t).with_context(|| format!("{param} = {v}"))?;
        let result = execute_run(&cfg).with_context(|| format!("{param} = {v}"))?;
        out.push((cfg, SweepPoint { value: v.clone(), result }));
    }
    Ok(out)
}

/// One row per value: channel coefficients when present, otherwise
/// final-time observables.
pub fn sweep_summary(param: &str, points: &[SweepPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# sweep = {param}");
    if let Some(first) = points.first() {
        write_metadata(&mut out, &first.result.series.metadata);
    }
    let names: Vec<String> = match points.first().map(|p| &p.result) {
        Some(r) => match &r.channels {
            Some(ch) => ch.names.clone(),
            None => r.series.names.clone(),
        },
        None => vec![],
    };
    out.push_str("value");
    for n in &names {
        let _ = write!(out, ",{n},{n}_err");
    }
    out.push('\n');
    for p in points {
        out.push_str(&p.value);
        let (vals, errs): (Vec<f64>, Vec<f64>) = match &p.result.channels {
            Some(ch) => (ch.values.clone(), ch.stderr.clone()),
            None => {
                let s = &p.result.series;
                s.values.iter().zip(&s.stderr).map(|(v, e)| (*v.last().unwrap(), *e.last().unwrap())).unzip()
            }
        };
        for (v, e) in vals.iter().zip(&errs) {
            let _ = write!(out, ",{},{}", fmt_num(*v), fmt_num(*e));
        }
        out.push('\n');
    }
    out
}

fn dir_name(param: &str, value: &str) -> String {
    format!("{param}={value}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "=.-_".contains(c) { c } else { '_' })
        .collect()
}

pub fn cmd_sweep(path: &Path, param: &str, values: &[String], ov: &Overrides) -> anyhow::Result<PathBuf> {
    let (cfg, table) = load_run(path, ov)?;
    let root = cfg.output.directory.clone();
    let points = execute_sweep(&table, param, values)?;
    let mut summary = Vec::with_capacity(points.len());
    for (cfg, point) in points {
        write_run(&root.join(dir_name(param, &point.value)), &cfg, &point.result)?;
        summary.push(point);
    }
    write_file(&root, "summary.csv", &sweep_summary(param, &summary))
}

/// Oracle output in the ensemble series layout, with zero errors.
pub struct OracleOutput {
    pub series: EnsembleSeries,
    pub channels: Vec<(String, String)>,
}

fn series_from_populations(times: Vec<f64>, pops: &[Vec<f64>], metadata: Vec<(String, String)>) -> EnsembleSeries {
    let f = pops.first().map_or(0, |p| p.len());
    let values: Vec<Vec<f64>> = (0..f).map(|n| pops.iter().map(|p| p[n]).collect()).collect();
    EnsembleSeries {
        stderr: vec![vec![0.0; times.len()]; f],
        times,
        names: (0..f).map(|n| format!("P{n}")).collect(),
        values,
        n_trajectories: 1,
        n_failed: 0,
        metadata,
    }
}

pub fn execute_oracle(cfg: &OracleConfig) -> anyhow::Result<OracleOutput> {
    let model = cfg.model.build().context("[model]")?;
    let (unit, scale) = cfg.model.time_unit();
    let mut meta = model.params.clone();
    meta.insert(0, ("model".into(), model.name.clone()));
    meta.push(("time_unit".into(), unit.into()));
    match cfg.oracle {
        OracleBlock::Dvr { r_min, r_max, n_points, dt, t_final, record_every, divide_r } => {
            let packet = packet_from_model(&model)?;
            let grid = GridSpec { r_min, r_max, n_points, dt: dt / scale };
            let t_final = t_final / scale;
            // the series comes from the requested grid; channels from the refined one
            let run = split_operator_dvr(&model, packet, grid, t_final, record_every, divide_r)?;
            let conv = dvr_converged(&model, packet, grid, t_final, divide_r)?;
            meta.push(("oracle".into(), "split-operator grid".into()));
            meta.push(("grid".into(), format!("[{r_min}, {r_max}] x {n_points}, dt = {dt}")));
            meta.push(("norm_error".into(), format!("{:e}", run.norm_error)));
            let times = run.times.iter().map(|t| t * scale).collect();
            let series = series_from_populations(times, &run.populations, meta.clone());
            let channels = vec![
                ("channels_diabatic.csv".to_string(), conv.diabatic.to_csv(&meta)),
                ("channels_adiabatic.csv".to_string(), conv.adiabatic.to_csv(&meta)),
            ];
            Ok(OracleOutput { series, channels })
        }
        OracleBlock::Fock { n_max, dt, t_final, dt_record, thermal_cutoff, check_convergence } => {
            let n_modes = model.n_dof();
            let spec = FockSpec::uniform(n_modes, n_max, dt / scale);
            let (t_final, dt_record) = (t_final / scale, dt_record / scale);
            let propagate = |s: &FockSpec| -> phasedyn::Result<FockResult> {
                match cfg.model.bath_beta() {
                    Some(beta) if beta.is_finite() => {
                        fock_thermal(&model, s, model.initial_state(), beta, thermal_cutoff, t_final, dt_record)
                    }
                    _ => {
                        fock_propagate(&model, s, &FockInit::ground(model.initial_state(), n_modes), t_final, dt_record)
                    }
                }
            };
            let r = if check_convergence { fock_converged(&spec, propagate)? } else { propagate(&spec)? };
            meta.push(("oracle".into(), "truncated Fock basis".into()));
            meta.push(("n_max".into(), n_max.to_string()));
            meta.push(("norm_error".into(), format!("{:e}", r.norm_error)));
            let times = r.times.iter().map(|t| t * scale).collect();
            Ok(OracleOutput { series: series_from_populations(times, &r.populations, meta), channels: vec![] })
        }
        OracleBlock::Frozen { t_final, dt_record } => {
            if !(dt_record > 0.0) || !(t_final >= 0.0) {
                bail!("[oracle] needs dt_record > 0 and t_final >= 0");
            }
            let frozen = model.frozen_at(&model.nuclear_init().mean_r);
            let v = frozen_potential(&frozen);
            let mut psi0 = vec![C64::new(0.0, 0.0); model.n_states()];
            psi0[model.initial_state()] = C64::new(1.0, 0.0);
            let n = (t_final / dt_record + 1e-9).floor() as usize;
            let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt_record).collect();
            let model_times: Vec<f64> = times.iter().map(|t| t / scale).collect();
            let pops = frozen_nuclei_exact(&v, &psi0, &model_times);
            meta.push(("oracle".into(), "frozen nuclei".into()));
            Ok(OracleOutput { series: series_from_populations(times, &pops, meta), channels: vec![] })
        }
    }
}

fn frozen_potential(model: &DiabaticModel) -> DMatrix<C64> {
    let r = vec![0.0; model.n_dof()];
    model.potential(&r).map(|x| C64::new(x, 0.0))
}

pub fn cmd_oracle(path: &Path, ov: &Overrides) -> anyhow::Result<PathBuf> {
    let (mut cfg, table) = load::<OracleConfig>(path)?;
    if let Some(out) = &ov.out {
        cfg.output.directory = out.clone();
    }
    let out = execute_oracle(&cfg)?;
    let dir = &cfg.output.directory;
    write_file(dir, "oracle.csv", &out.series.to_csv())?;
    for (name, text) in &out.channels {
        write_file(dir, name, text)?;
    }
    write_file(dir, "meta.txt", &meta_text(&table, &[])?)?;
    Ok(dir.clone())
}

pub fn execute_marginals(cfg: &MarginalsConfig) -> anyhow::Result<String> {
    Ok(match cfg.marginals {
        MarginalsBlock::MonteCarlo {
            n_states,
            pair,
            plane,
            scheme,
            axes,
            half_width,
            bins,
            n_samples,
            seed,
            radius_scaled,
        } => {
            let scheme = scheme.resolve(n_states)?;
            let proj = Projection { pair, plane: plane.unwrap_or((0, 1)), axes };
            let grid = marginal_mc(n_states, proj, &scheme, Grid2D { half_width, bins }, n_samples, seed)?;
            grid.to_csv(radius_scaled.then(|| support_radius(&scheme, n_states)))
        }
        MarginalsBlock::Analytic { pair, scheme, half_width, bins, subsamples, radius_scaled } => {
            let scheme = scheme.resolve(2)?;
            let grid = marginal_f2_grid(&scheme, pair.0, pair.1, Grid2D { half_width, bins }, subsamples)?;
            grid.to_csv(radius_scaled.then(|| support_radius(&scheme, 2)))
        }
        MarginalsBlock::Hybrid { state, half_width, points } => {
            if points < 2 {
                bail!("[marginals] hybrid grid needs at least two points per axis");
            }
            let axis: Vec<f64> =
                (0..points).map(|i| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64).collect();
            hybrid_joint(state, &axis, &axis)?.to_csv(state)
        }
    })
}

pub fn cmd_marginals(path: &Path, ov: &Overrides) -> anyhow::Result<PathBuf> {
    let (mut cfg, table) = load::<MarginalsConfig>(path)?;
    if let Some(out) = &ov.out {
        cfg.output.directory = out.clone();
    }
    let csv = execute_marginals(&cfg)?;
    write_file(&cfg.output.directory, "meta.txt", &meta_text(&table, &[])?)?;
    write_file(&cfg.output.directory, "marginals.csv", &csv)
}
