//! TOML run configuration. Every table rejects unknown keys, and model blocks
//! only list overrides on top of the published defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use phasedyn::dynamics::{IntegratorConfig, Method};
use phasedyn::estimators::{ChannelSpec, ObservableSpec};
use phasedyn::models::{
    build_cavity, build_lvcm, build_spin_boson, build_tully, CavityParams, DiabaticModel, LvcmParams, SpinBosonParams,
    TullyParams, TullyVariant, HARTREE_TIME_TO_FS,
};
use phasedyn::phasespace::GammaScheme;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Tully(TullyConfig),
    SpinBoson(SpinBosonConfig),
    Cavity(CavityConfig),
    Lvcm(LvcmConfig),
    /// Constant `[[bias, coupling], [coupling, -bias]]`; nuclei are inert.
    TwoLevel(TwoLevelConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TullyConfig {
    pub variant: TullyVariant,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub e0: Option<f64>,
    pub mass: Option<f64>,
    pub r0: Option<f64>,
    pub p0: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinBosonConfig {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub omega_c: Option<f64>,
    pub beta: Option<f64>,
    pub n_modes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityPreset {
    #[default]
    ThreeLevel,
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    #[serde(default)]
    pub preset: CavityPreset,
    pub length: Option<f64>,
    pub atom_position: Option<f64>,
    pub n_modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LvcmConfig {
    pub frequencies_ev: Option<Vec<f64>>,
    pub energies_ev: Option<Vec<f64>>,
    pub kappa_ev: Option<Vec<Vec<f64>>>,
    pub lambda_ev: Option<Vec<(usize, usize, usize, f64)>>,
    pub initial_state: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelConfig {
    #[serde(default)]
    pub bias: f64,
    pub coupling: f64,
    #[serde(default)]
    pub initial_state: usize,
}

impl ModelConfig {
    pub fn build(&self) -> anyhow::Result<DiabaticModel> {
        let model = match self {
            ModelConfig::Tully(c) => {
                let d = TullyParams::default_for(c.variant);
                build_tully(&TullyParams {
                    variant: c.variant,
                    a: c.a.unwrap_or(d.a),
                    b: c.b.unwrap_or(d.b),
                    c: c.c.unwrap_or(d.c),
                    d: c.d.unwrap_or(d.d),
                    e0: c.e0.unwrap_or(d.e0),
                    mass: c.mass.unwrap_or(d.mass),
                    r0: c.r0.unwrap_or(d.r0),
                    p0: c.p0.unwrap_or(d.p0),
                    alpha: c.alpha.unwrap_or(d.alpha),
                })?
            }
            ModelConfig::SpinBoson(c) => build_spin_boson(&self.spin_boson_params(c))?,
            ModelConfig::Cavity(c) => {
                let d = match c.preset {
                    CavityPreset::ThreeLevel => CavityParams::three_level(),
                    CavityPreset::TwoLevel => CavityParams::two_level(),
                };
                let length = c.length.unwrap_or(d.length);
                build_cavity(&CavityParams {
                    length,
                    atom_position: c.atom_position.unwrap_or(length / 2.0),
                    n_modes: c.n_modes.unwrap_or(d.n_modes),
                    ..d
                })?
            }
            ModelConfig::Lvcm(c) => build_lvcm(&lvcm_params(c))?,
            ModelConfig::TwoLevel(c) => {
                let v = DMatrix::from_row_slice(2, 2, &[c.bias, c.coupling, c.coupling, -c.bias]);
                DiabaticModel::constant(v, c.initial_state)?
                    .with_params(vec![("bias".into(), c.bias.to_string()), ("coupling".into(), c.coupling.to_string())])
            }
        };
        Ok(model)
    }

    fn spin_boson_params(&self, c: &SpinBosonConfig) -> SpinBosonParams {
        let d = SpinBosonParams::default();
        SpinBosonParams {
            epsilon: c.epsilon.unwrap_or(d.epsilon),
            delta: c.delta.unwrap_or(d.delta),
            alpha: c.alpha.unwrap_or(d.alpha),
            omega_c: c.omega_c.unwrap_or(d.omega_c),
            beta: c.beta.unwrap_or(d.beta),
            n_modes: c.n_modes.unwrap_or(d.n_modes),
        }
    }

    /// Inverse temperature of a thermal bath, if the model has one.
    pub fn bath_beta(&self) -> Option<f64> {
        match self {
            ModelConfig::SpinBoson(c) => Some(self.spin_boson_params(c).beta),
            _ => None,
        }
    }

    /// Config times are given in this unit; the models work in atomic or
    /// reduced units.
    pub fn time_unit(&self) -> (&'static str, f64) {
        match self {
            ModelConfig::Lvcm(_) => ("fs", HARTREE_TIME_TO_FS),
            ModelConfig::Tully(_) | ModelConfig::Cavity(_) => ("au", 1.0),
            _ => ("reduced", 1.0),
        }
    }
}

fn lvcm_params(c: &LvcmConfig) -> LvcmParams {
    let d = LvcmParams::pyrazine();
    LvcmParams {
        frequencies_ev: c.frequencies_ev.clone().unwrap_or(d.frequencies_ev),
        energies_ev: c.energies_ev.clone().unwrap_or(d.energies_ev),
        kappa_ev: c.kappa_ev.clone().unwrap_or(d.kappa_ev),
        lambda_ev: c.lambda_ev.clone().unwrap_or(d.lambda_ev),
        initial_state: c.initial_state.unwrap_or(d.initial_state),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    /// Single gamma; defaults to the self-inverse value.
    Cmm {
        gamma: Option<f64>,
    },
    /// Symmetric gamma pair `(+delta, -delta)`.
    Wmm {
        delta: f64,
    },
    Ehrenfest {},
    Fssh {
        #[serde(default = "yes")]
        frustrated_reversal: bool,
    },
}

fn yes() -> bool {
    true
}

impl MethodConfig {
    pub fn resolve(&self, n_states: usize) -> anyhow::Result<Method> {
        Ok(match *self {
            MethodConfig::Cmm { gamma: None } => Method::Mapping(GammaScheme::self_inverse(n_states)?),
            MethodConfig::Cmm { gamma: Some(g) } => Method::Mapping(GammaScheme::single(g, n_states)?),
            MethodConfig::Wmm { delta } => Method::Mapping(GammaScheme::symmetric_pair(delta, n_states)?),
            MethodConfig::Ehrenfest {} => Method::Ehrenfest,
            MethodConfig::Fssh { frustrated_reversal } => Method::Fssh { frustrated_reversal },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub n_trajectories: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    /// Divide populations by the ensemble trace estimate.
    #[serde(default)]
    pub normalize: bool,
    /// Defaults to every population plus the trace.
    pub observables: Option<Vec<ObservableSpec>>,
    /// Final-time transmission/reflection split (one nuclear DOF only).
    pub channels: Option<ChannelSpec>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: default_dir(), normalize: false, observables: None, channels: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub method: MethodConfig,
    pub integrator: IntegratorConfig,
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.ensemble.n_trajectories == 0 {
            bail!("[ensemble] n_trajectories must be at least 1");
        }
        if self.ensemble.workers == 0 {
            bail!("[ensemble] workers must be at least 1");
        }
        self.integrator.validate().context("[integrator]")?;
        let model = self.model.build().context("[model]")?;
        let method = self.method.resolve(model.n_states()).context("[method]")?;
        method.validate(&model, self.integrator.representation).context("[method]")?;
        if self.output.channels.is_some() && model.n_dof() != 1 {
            bail!("[output.channels] needs a model with one nuclear coordinate");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleBlock {
    /// Grid wavepacket propagation for one-coordinate models; the packet is
    /// taken from the model's initial conditions.
    Dvr {
        r_min: f64,
        r_max: f64,
        n_points: usize,
        dt: f64,
        t_final: f64,
        #[serde(default = "one")]
        record_every: usize,
        #[serde(default)]
        divide_r: f64,
    },
    /// Truncated harmonic-oscillator basis for linear vibronic models. With
    /// a thermal bath the Boltzmann sum is cut at `thermal_cutoff`.
    Fock {
        n_max: usize,
        dt: f64,
        t_final: f64,
        dt_record: f64,
        #[serde(default = "default_cutoff")]
        thermal_cutoff: f64,
        /// Rerun with two more quanta per mode and require agreement.
        #[serde(default = "yes")]
        check_convergence: bool,
    },
    /// Electronic evolution with the potential frozen at the mean nuclear
    /// position.
    Frozen { t_final: f64, dt_record: f64 },
}

fn default_cutoff() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub model: ModelConfig,
    pub oracle: OracleBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    Single { gamma: Option<f64> },
    Pair { delta: f64 },
}

impl SchemeConfig {
    pub fn resolve(&self, n_states: usize) -> anyhow::Result<GammaScheme> {
        Ok(match *self {
            SchemeConfig::Single { gamma: None } => GammaScheme::self_inverse(n_states)?,
            SchemeConfig::Single { gamma: Some(g) } => GammaScheme::single(g, n_states)?,
            SchemeConfig::Pair { delta } => GammaScheme::symmetric_pair(delta, n_states)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalsBlock {
    /// Histogram over the sphere.
    MonteCarlo {
        n_states: usize,
        pair: (usize, usize),
        /// Defaults to `(0, 1)`.
        plane: Option<(usize, usize)>,
        scheme: SchemeConfig,
        #[serde(default)]
        axes: phasedyn::marginals::MarginalAxes,
        half_width: f64,
        bins: usize,
        n_samples: usize,
        seed: u64,
        #[serde(default)]
        radius_scaled: bool,
    },
    /// Closed form for two states, averaged over each bin.
    Analytic {
        pair: (usize, usize),
        scheme: SchemeConfig,
        half_width: f64,
        bins: usize,
        #[serde(default = "default_sub")]
        subsamples: usize,
        #[serde(default)]
        radius_scaled: bool,
    },
    /// Discrete blocks of a spin coupled to an oscillator on an `(R, P)` grid.
    Hybrid { state: phasedyn::marginals::HybridState, half_width: f64, points: usize },
}

fn default_sub() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalsConfig {
    pub marginals: MarginalsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

pub fn read_toml(path: &Path) -> anyhow::Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_table(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_table(text: &str) -> anyhow::Result<toml::Table> {
    Ok(text.parse::<toml::Table>()?)
}

/// Typed view of a raw table. Errors quote the offending line when the
/// parser reports a span.
pub fn from_table<T: serde::de::DeserializeOwned>(table: &toml::Table) -> anyhow::Result<T> {
    let text = toml::to_string(table)?;
    toml::from_str(&text).map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))
}

pub fn parse<T: serde::de::DeserializeOwned>(text: &str) -> anyhow::Result<T> {
    toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid configuration: {e}"))
}

/// Sets `a.b.c = value` in a raw table, creating nothing: every table on the
/// path must already exist.
pub fn set_dotted(table: &mut toml::Table, path: &str, value: toml::Value) -> anyhow::Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    let (last, head) = parts.split_last().filter(|(l, _)| !l.is_empty()).context("empty parameter path")?;
    let mut cur = table;
    for p in head {
        cur = cur
            .get_mut(*p)
            .and_then(|v| v.as_table_mut())
            .with_context(|| format!("no table '{p}' on the path '{path}'"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Number-or-string value as it would be written in TOML.
pub fn parse_value(s: &str) -> toml::Value {
    if let Ok(i) = s.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = s.parse::<f64>() {
        return toml::Value::Float(f);
    }
    match s {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(s.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAC: &str = r#"
[model]
kind = "tully"
variant = "sac"
p0 = 20.0

[method]
kind = "cmm"

[integrator]
dt = 1.0
max_time = 100.0

[ensemble]
n_trajectories = 10
seed = 1
"#;

    #[test]
    fn parses_and_validates() {
        let c: RunConfig = parse(SAC).unwrap();
        c.validate().unwrap();
        assert_eq!(c.ensemble.workers, 1);
        assert_eq!(c.model.build().unwrap().nuclear_init().mean_p, vec![20.0]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let bad = SAC.replace("p0 = 20.0", "p0 = 20.0\nmomentum = 3");
        let e = parse::<RunConfig>(&bad).unwrap_err().to_string();
        assert!(e.contains("momentum"), "{e}");
        let bad = SAC.replace("seed = 1", "seed = 1\nthreads = 4");
        let e = parse::<RunConfig>(&bad).unwrap_err().to_string();
        assert!(e.contains("line 17"), "{e}");
    }

    #[test]
    fn zero_trajectories_rejected() {
        let c: RunConfig = parse(&SAC.replace("n_trajectories = 10", "n_trajectories = 0")).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn dotted_override() {
        let mut t = parse_table(SAC).unwrap();
        set_dotted(&mut t, "model.p0", parse_value("25")).unwrap();
        set_dotted(&mut t, "method.gamma", parse_value("0.2")).unwrap();
        let c: RunConfig = from_table(&t).unwrap();
        assert_eq!(c.model.build().unwrap().nuclear_init().mean_p, vec![25.0]);
        assert_eq!(c.method, MethodConfig::Cmm { gamma: Some(0.2) });
        assert!(set_dotted(&mut t, "nothing.here", parse_value("1")).is_err());
        set_dotted(&mut t, "model.bogus", parse_value("1")).unwrap();
        assert!(from_table::<RunConfig>(&t).is_err());
    }

    #[test]
    fn method_variants() {
        for (text, ok) in [
            ("kind = \"wmm\"\ndelta = 0.1", true),
            ("kind = \"fssh\"", true),
            ("kind = \"ehrenfest\"", true),
            ("kind = \"ehrenfest\"\ngamma = 1", false),
            ("kind = \"nope\"", false),
        ] {
            #[derive(Deserialize)]
            #[allow(dead_code)]
            struct W {
                method: MethodConfig,
            }
            let r = parse::<W>(&format!("[method]\n{text}\n"));
            assert_eq!(r.is_ok(), ok, "{text}");
        }
    }
}
