//! Weighted ensemble estimators.
//!
//! Each trajectory contributes `a0 * f(t)`, where `a0 = F K_nn(x0, p0)` is the
//! initial electronic weight and `f` a population estimator. With `B`
//! stratified gamma branches of signed weights `w_b`, the raw estimator is
//! `sum_b w_b mean_b(a0 f)` with stratified variance
//! `sum_b w_b^2 var_b / n_b`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasespace::ElectronicMappingState;

/// `[group][obs]` values.
type Table = Vec<Vec<f64>>;

/// `F K_nn(x0, p0)` for the initial density `|n><n|`.
pub fn initial_electronic_weight(state0: &ElectronicMappingState, init_state: usize) -> f64 {
    state0.n_states() as f64 * (0.5 * state0.g[init_state].norm_sqr() - state0.gamma)
}

/// `|g_n|^2 / 2 - gamma`
pub fn population_estimate(state: &ElectronicMappingState, n: usize) -> f64 {
    0.5 * state.g[n].norm_sqr() - state.gamma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Population {
        n: usize,
    },
    /// `P_a - P_b`
    PopulationDifference {
        a: usize,
        b: usize,
    },
    Total,
}

impl ObservableSpec {
    pub fn name(&self) -> String {
        match self {
            ObservableSpec::Population { n } => format!("P{n}"),
            ObservableSpec::PopulationDifference { a, b } => format!("D{a}{b}"),
            ObservableSpec::Total => "trace".into(),
        }
    }

    /// Coefficients `c_n` such that the observable is `sum_n c_n P_n`.
    pub fn coefficients(&self, n_states: usize) -> Result<Vec<f64>> {
        let mut c = vec![0.0; n_states];
        let check = |i: usize| {
            if i < n_states {
                Ok(())
            } else {
                Err(Error::Invalid(format!("state index {i} out of range for {n_states} states")))
            }
        };
        match *self {
            ObservableSpec::Population { n } => {
                check(n)?;
                c[n] = 1.0;
            }
            ObservableSpec::PopulationDifference { a, b } => {
                check(a)?;
                check(b)?;
                c[a] += 1.0;
                c[b] -= 1.0;
            }
            ObservableSpec::Total => c.iter_mut().for_each(|x| *x = 1.0),
        }
        Ok(c)
    }

    /// All populations followed by the trace.
    pub fn defaults(n_states: usize) -> Vec<ObservableSpec> {
        let mut v: Vec<_> = (0..n_states).map(|n| ObservableSpec::Population { n }).collect();
        v.push(ObservableSpec::Total);
        v
    }
}

/// Running mean, second moment and co-moment with a paired quantity, in a
/// form that merges exactly (Chan et al. pairwise update).
#[derive(Debug, Clone, Default, PartialEq)]
struct Moments {
    n: f64,
    mean_y: f64,
    mean_t: f64,
    m2_y: f64,
    m2_t: f64,
    c_yt: f64,
}

impl Moments {
    fn push(&mut self, y: f64, t: f64) {
        self.n += 1.0;
        let dy = y - self.mean_y;
        let dt = t - self.mean_t;
        self.mean_y += dy / self.n;
        self.mean_t += dt / self.n;
        self.m2_y += dy * (y - self.mean_y);
        self.m2_t += dt * (t - self.mean_t);
        self.c_yt += dy * (t - self.mean_t);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = o.clone();
            return;
        }
        let n = self.n + o.n;
        let dy = o.mean_y - self.mean_y;
        let dt = o.mean_t - self.mean_t;
        let f = self.n * o.n / n;
        self.m2_y += o.m2_y + dy * dy * f;
        self.m2_t += o.m2_t + dt * dt * f;
        self.c_yt += o.c_yt + dy * dt * f;
        self.mean_y += dy * o.n / n;
        self.mean_t += dt * o.n / n;
        self.n = n;
    }

    fn var(&self, m2: f64) -> f64 {
        if self.n > 1.0 {
            m2 / (self.n - 1.0)
        } else {
            0.0
        }
    }
}

/// Per-branch moments of `n_groups x n_obs` quantities, each paired with
/// its group's trace for optional ratio normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    n_groups: usize,
    n_obs: usize,
    /// `[branch][group * n_obs + obs]`
    branches: Vec<Vec<Moments>>,
}

impl Accumulator {
    pub fn new(n_branches: usize, n_groups: usize, n_obs: usize) -> Self {
        Accumulator { n_groups, n_obs, branches: vec![vec![Moments::default(); n_groups * n_obs]; n_branches] }
    }

    /// Adds one trajectory: `values[group * n_obs + obs]` and `traces[group]`,
    /// both already multiplied by the initial electronic weight.
    pub fn push(&mut self, branch: usize, values: &[f64], traces: &[f64]) {
        let b = &mut self.branches[branch];
        for g in 0..self.n_groups {
            for o in 0..self.n_obs {
                b[g * self.n_obs + o].push(values[g * self.n_obs + o], traces[g]);
            }
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        for (mine, theirs) in self.branches.iter_mut().zip(&other.branches) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.merge(b);
            }
        }
    }

    pub fn count(&self) -> usize {
        self.branches.iter().map(|b| b.first().map_or(0.0, |m| m.n)).sum::<f64>() as usize
    }

    pub fn branch_counts(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.first().map_or(0.0, |m| m.n) as usize).collect()
    }

    /// Estimates and standard errors, `[group][obs]`. `weights` are the
    /// signed branch weights.
    pub fn finish(&self, weights: &[f64], normalize: bool) -> Result<(Table, Table)> {
        if self.count() == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let active: Vec<usize> = (0..self.branches.len()).filter(|&b| self.branches[b][0].n > 0.0).collect();
        if active.len() != self.branches.len() {
            return Err(Error::Invalid("a gamma branch has no successful trajectories".into()));
        }
        let mut values = vec![vec![0.0; self.n_obs]; self.n_groups];
        let mut errors = vec![vec![0.0; self.n_obs]; self.n_groups];
        for g in 0..self.n_groups {
            for o in 0..self.n_obs {
                let k = g * self.n_obs + o;
                let mut y = 0.0;
                let mut t = 0.0;
                for (b, w) in self.branches.iter().zip(weights) {
                    y += w * b[k].mean_y;
                    t += w * b[k].mean_t;
                }
                let (value, var) = if normalize {
                    let r = y / t;
                    let var: f64 = self
                        .branches
                        .iter()
                        .zip(weights)
                        .map(|(b, w)| {
                            let m = &b[k];
                            let v = m.var(m.m2_y) - 2.0 * r * m.var(m.c_yt) + r * r * m.var(m.m2_t);
                            w * w * v.max(0.0) / m.n
                        })
                        .sum();
                    (r, var / (t * t))
                } else {
                    let var: f64 =
                        self.branches.iter().zip(weights).map(|(b, w)| w * w * b[k].var(b[k].m2_y) / b[k].n).sum();
                    (y, var)
                };
                values[g][o] = value;
                errors[g][o] = var.max(0.0).sqrt();
            }
        }
        Ok((values, errors))
    }
}

/// Time series of ensemble observables.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[obs][time]`
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub n_trajectories: usize,
    pub n_failed: usize,
    pub metadata: Vec<(String, String)>,
}

impl EnsembleSeries {
    pub fn column(&self, name: &str) -> Option<(&[f64], &[f64])> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((&self.values[i], &self.stderr[i]))
    }

    /// `#`-prefixed metadata, then `t, obs1, obs1_err, ...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        write_metadata(&mut out, &self.metadata);
        let _ = writeln!(out, "# n_trajectories = {}", self.n_trajectories);
        let _ = writeln!(out, "# n_failed = {}", self.n_failed);
        out.push('t');
        for n in &self.names {
            let _ = write!(out, ",{n},{n}_err");
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{}", fmt_num(*t));
            for (v, e) in self.values.iter().zip(&self.stderr) {
                let _ = write!(out, ",{},{}", fmt_num(v[i]), fmt_num(e[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Transmission and reflection channel populations at the final time.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    pub basis: ChannelBasis,
    /// `T0, T1, ..., R0, R1, ...`
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Trajectories still inside the interaction region at the final time.
    pub n_inside: usize,
}

impl ChannelTable {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.values[i], self.stderr[i]))
    }

    pub fn transmission(&self, n: usize) -> (f64, f64) {
        self.get(&format!("T{n}")).expect("channel")
    }

    pub fn reflection(&self, n: usize) -> (f64, f64) {
        self.get(&format!("R{n}")).expect("channel")
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `#`-prefixed metadata, then one `channel, value, stderr` row each.
    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut out = String::new();
        write_metadata(&mut out, metadata);
        let _ = writeln!(out, "# basis = {:?}", self.basis);
        let _ = writeln!(out, "# n_inside = {}", self.n_inside);
        out.push_str("channel,value,stderr\n");
        for ((n, v), e) in self.names.iter().zip(&self.values).zip(&self.stderr) {
            let _ = writeln!(out, "{n},{},{}", fmt_num(*v), fmt_num(*e));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChannelBasis {
    #[default]
    Diabatic,
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub basis: ChannelBasis,
    #[serde(default)]
    pub divide_r: f64,
    /// Trajectories ending with `|R - divide_r|` below this are counted as
    /// still interacting.
    #[serde(default = "default_interaction_radius")]
    pub interaction_radius: f64,
}

fn default_interaction_radius() -> f64 {
    4.0
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec { basis: ChannelBasis::Diabatic, divide_r: 0.0, interaction_radius: default_interaction_radius() }
    }
}

/// Splits final populations into `[T_0.., R_0..]` for one trajectory.
pub fn channel_values(r_final: f64, populations: &[f64], divide_r: f64) -> Vec<f64> {
    let f = populations.len();
    let mut out = vec![0.0; 2 * f];
    let offset = if r_final > divide_r { 0 } else { f };
    out[offset..offset + f].copy_from_slice(populations);
    out
}

pub fn write_metadata(out: &mut String, metadata: &[(String, String)]) {
    for (k, v) in metadata {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

/// Shortest representation that round-trips, so CSVs are exact.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}
