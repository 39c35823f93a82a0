//! Mapping kernels, gamma algebra and sampling on (weighted) constraint
//! coordinate-momentum phase space.
//!
//! Mapping variables are stored as `g = x + i p`. For `F` discrete states the
//! constraint surface is `sum_n |g_n|^2 / 2 = 1 + F gamma`, a (2F-1)-sphere.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// `chi(gamma) = F gamma^2 + 2 gamma`.
pub fn chi(gamma: f64, n_states: usize) -> f64 {
    n_states as f64 * gamma * gamma + 2.0 * gamma
}

/// The gamma that makes the kernel its own inverse, `(sqrt(1 + F) - 1) / F`.
pub fn gamma_star(n_states: usize) -> Result<f64> {
    if n_states == 0 {
        return domain("gamma_star needs at least one state");
    }
    let f = n_states as f64;
    Ok(((1.0 + f).sqrt() - 1.0) / f)
}

/// Quasi-probability weights of the symmetric pair `gamma = +delta, -delta`.
pub fn pair_weights(delta: f64, n_states: usize) -> Result<(f64, f64)> {
    if n_states == 0 {
        return domain("pair_weights needs at least one state");
    }
    let upper = 1.0 / n_states as f64;
    if !(delta > 0.0 && delta < upper) {
        return domain(format!("delta = {delta} outside (0, {upper})"));
    }
    let chi_plus = chi(delta, n_states);
    let chi_minus = chi(-delta, n_states);
    let denom = chi_plus - chi_minus;
    Ok(((1.0 - chi_minus) / denom, (chi_plus - 1.0) / denom))
}

fn check_gamma(gamma: f64, n_states: usize) -> Result<()> {
    if n_states == 0 {
        return domain("need at least one state");
    }
    if !(1.0 + n_states as f64 * gamma > 0.0) || !gamma.is_finite() {
        return domain(format!("gamma = {gamma} outside the admissible region (-1/{n_states}, inf)"));
    }
    Ok(())
}

/// Area of the constraint surface, `(2 pi)^F / Gamma(F) (1 + F gamma)^(F-1)`.
pub fn sphere_area(gamma: f64, n_states: usize) -> Result<f64> {
    check_gamma(gamma, n_states)?;
    let f = n_states as f64;
    let gamma_fn: f64 = (1..n_states).map(|k| k as f64).product();
    Ok((2.0 * std::f64::consts::PI).powf(f) / gamma_fn * (1.0 + f * gamma).powf(f - 1.0))
}

/// Distribution of the gamma parameter over trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaScheme {
    Single { gamma: f64 },
    SymmetricPair { delta: f64, w_plus: f64, w_minus: f64 },
}

impl GammaScheme {
    pub fn single(gamma: f64, n_states: usize) -> Result<Self> {
        check_gamma(gamma, n_states)?;
        Ok(GammaScheme::Single { gamma })
    }

    /// Single gamma at the self-inverse value.
    pub fn self_inverse(n_states: usize) -> Result<Self> {
        Ok(GammaScheme::Single { gamma: gamma_star(n_states)? })
    }

    pub fn symmetric_pair(delta: f64, n_states: usize) -> Result<Self> {
        let (w_plus, w_minus) = pair_weights(delta, n_states)?;
        Ok(GammaScheme::SymmetricPair { delta, w_plus, w_minus })
    }

    pub fn n_branches(&self) -> usize {
        match self {
            GammaScheme::Single { .. } => 1,
            GammaScheme::SymmetricPair { .. } => 2,
        }
    }

    /// Check the scheme against a state count.
    pub fn validate(&self, n_states: usize) -> Result<()> {
        match *self {
            GammaScheme::Single { gamma } => check_gamma(gamma, n_states),
            GammaScheme::SymmetricPair { delta, w_plus, w_minus } => {
                let (wp, wm) = pair_weights(delta, n_states)?;
                if (wp - w_plus).abs() > 1e-12 || (wm - w_minus).abs() > 1e-12 {
                    return domain(format!(
                        "pair weights ({w_plus}, {w_minus}) inconsistent with delta = {delta}, F = {n_states}"
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            GammaScheme::Single { gamma } => format!("single(gamma={gamma})"),
            GammaScheme::SymmetricPair { delta, .. } => format!("symmetric_pair(delta={delta})"),
        }
    }
}

/// `(gamma, weight)` of the requested branch of a scheme.
pub fn draw_gamma(scheme: &GammaScheme, branch: usize) -> Result<(f64, f64)> {
    match (*scheme, branch) {
        (GammaScheme::Single { gamma }, 0) => Ok((gamma, 1.0)),
        (GammaScheme::SymmetricPair { delta, w_plus, .. }, 0) => Ok((delta, w_plus)),
        (GammaScheme::SymmetricPair { delta, w_minus, .. }, 1) => Ok((-delta, w_minus)),
        _ => Err(Error::InvalidBranch { branch, available: scheme.n_branches() }),
    }
}

/// Mapping variables of `F` discrete states, with the trajectory's gamma and
/// signed statistical weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectronicMappingState {
    /// `g_n = x_n + i p_n`
    pub g: Vec<C64>,
    pub gamma: f64,
    pub weight: f64,
}

impl ElectronicMappingState {
    pub fn from_xp(x: &[f64], p: &[f64], gamma: f64, weight: f64) -> Self {
        assert_eq!(x.len(), p.len(), "x and p lengths differ");
        let g = x.iter().zip(p).map(|(&a, &b)| C64::new(a, b)).collect();
        ElectronicMappingState { g, gamma, weight }
    }

    pub fn n_states(&self) -> usize {
        self.g.len()
    }

    pub fn x(&self) -> Vec<f64> {
        self.g.iter().map(|z| z.re).collect()
    }

    pub fn p(&self) -> Vec<f64> {
        self.g.iter().map(|z| z.im).collect()
    }

    /// `sum_n (x_n^2 + p_n^2) / 2`
    pub fn half_norm_sq(&self) -> f64 {
        0.5 * self.g.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// Distance from the constraint surface of this state's gamma.
    pub fn constraint_residual(&self) -> f64 {
        self.half_norm_sq() - (1.0 + self.n_states() as f64 * self.gamma)
    }
}

/// Draw a point uniformly on the constraint surface: 2F standard normals
/// rescaled to squared norm `2 (1 + F gamma)`.
pub fn sample_constraint_sphere<R: Rng + ?Sized>(
    n_states: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<ElectronicMappingState> {
    check_gamma(gamma, n_states)?;
    let mut g: Vec<C64> =
        (0..n_states).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
    let norm_sq: f64 = g.iter().map(|z| z.norm_sqr()).sum();
    let scale = (2.0 * (1.0 + n_states as f64 * gamma) / norm_sq).sqrt();
    for z in &mut g {
        *z *= scale;
    }
    Ok(ElectronicMappingState { g, gamma, weight: 1.0 })
}

/// Hermitian `F x F` matrix of phase-space functions.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix(pub DMatrix<C64>);

impl KernelMatrix {
    pub fn entry(&self, n: usize, m: usize) -> C64 {
        self.0[(n, m)]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let a = &self.0;
        let n = a.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// `K_nm = g_n conj(g_m) / 2 - gamma delta_nm`.
pub fn kernel(state: &ElectronicMappingState) -> KernelMatrix {
    let f = state.n_states();
    let mut k = DMatrix::<C64>::zeros(f, f);
    for n in 0..f {
        for m in 0..f {
            k[(n, m)] = 0.5 * state.g[n] * state.g[m].conj();
        }
        k[(n, n)] -= state.gamma;
    }
    KernelMatrix(k)
}

/// `K^-1_nm = (1+F)/(2(1+F gamma)^2) g_n conj(g_m) - (1-gamma)/(1+F gamma) delta_nm`.
pub fn inverse_kernel(state: &ElectronicMappingState) -> Result<KernelMatrix> {
    let f = state.n_states();
    let ff = f as f64;
    let radius = 1.0 + ff * state.gamma;
    if radius == 0.0 {
        return domain("inverse kernel is singular at 1 + F gamma = 0");
    }
    let outer = (1.0 + ff) / (2.0 * radius * radius);
    let shift = (1.0 - state.gamma) / radius;
    let mut k = DMatrix::<C64>::zeros(f, f);
    for n in 0..f {
        for m in 0..f {
            k[(n, m)] = outer * state.g[n] * state.g[m].conj();
        }
        k[(n, n)] -= shift;
    }
    Ok(KernelMatrix(k))
}
