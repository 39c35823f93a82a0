//! Marginal quasi-probability distributions of kernel entries on (weighted)
//! constraint phase space, and hybrid joint distributions of a spin-1/2
//! coupled to a harmonic mode.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Matrix2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fmt_num, write_metadata};
use crate::phasespace::{draw_gamma, kernel, pair_weights, sample_constraint_sphere, GammaScheme};

/// Closed-form two-state marginal at `(x1, x2)`; zero outside the disc
/// `x1^2 + x2^2 <= 2(1 + 2 gamma)`.
pub fn marginal_f2_analytic(x1: f64, x2: f64, gamma: f64) -> Matrix2<f64> {
    let r2 = 2.0 * (1.0 + 2.0 * gamma);
    if x1 * x1 + x2 * x2 > r2 {
        return Matrix2::zeros();
    }
    let c = 1.0 / (2.0 * PI * (1.0 + 2.0 * gamma));
    let d = 0.5 * (x1 * x1 - x2 * x2);
    Matrix2::new(1.0 + d, x1 * x2, x1 * x2, 1.0 - d) * c
}

/// Symmetric-pair marginal: `w+ M(Delta) + w- M(-Delta)`, each on its own disc.
pub fn marginal_f2_weighted(x1: f64, x2: f64, delta: f64) -> Result<Matrix2<f64>> {
    let (wp, wm) = pair_weights(delta, 2)?;
    Ok(marginal_f2_analytic(x1, x2, delta) * wp + marginal_f2_analytic(x1, x2, -delta) * wm)
}

/// Exact two-state marginal for any scheme.
pub fn marginal_f2(scheme: &GammaScheme, x1: f64, x2: f64) -> Result<Matrix2<f64>> {
    match *scheme {
        GammaScheme::Single { gamma } => Ok(marginal_f2_analytic(x1, x2, gamma)),
        GammaScheme::SymmetricPair { delta, .. } => marginal_f2_weighted(x1, x2, delta),
    }
}

/// Largest support radius of the scheme, `sqrt(2(1 + F gamma_max))`.
pub fn support_radius(scheme: &GammaScheme, n_states: usize) -> f64 {
    let g = match *scheme {
        GammaScheme::Single { gamma } => gamma,
        GammaScheme::SymmetricPair { delta, .. } => delta,
    };
    (2.0 * (1.0 + n_states as f64 * g)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MarginalAxes {
    /// `(x_i, x_j)`
    #[default]
    XX,
    /// `(x_i, p_j)`
    XP,
}

/// Uniform square grid of bins centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2D {
    pub half_width: f64,
    pub bins: usize,
}

impl Grid2D {
    pub fn width(&self) -> f64 {
        2.0 * self.half_width / self.bins as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins).map(|i| -self.half_width + (i as f64 + 0.5) * w).collect()
    }

    fn index(&self, x: f64) -> Option<usize> {
        let i = ((x + self.half_width) / self.width()).floor();
        (i >= 0.0 && i < self.bins as f64).then_some(i as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalGrid {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    /// Row-major `[i1 * bins + i2]`.
    pub values: Vec<C64>,
    pub stderr_re: Vec<f64>,
    pub stderr_im: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

impl MarginalGrid {
    pub fn at(&self, i1: usize, i2: usize) -> C64 {
        self.values[i1 * self.axis2.len() + i2]
    }

    /// Header, then rows `x1, x2, re, im, stderr`. With `scale`, coordinates
    /// are divided by it (radius-scaled export).
    pub fn to_csv(&self, scale: Option<f64>) -> String {
        let s = scale.unwrap_or(1.0);
        let mut out = String::new();
        write_metadata(&mut out, &self.metadata);
        if let Some(s) = scale {
            let _ = writeln!(out, "# coordinate_scale = {s}");
        }
        out.push_str("x1,x2,re,im,stderr\n");
        for (i, a) in self.axis1.iter().enumerate() {
            for (j, b) in self.axis2.iter().enumerate() {
                let k = i * self.axis2.len() + j;
                let err = self.stderr_re[k].hypot(self.stderr_im[k]);
                let v = self.values[k];
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_num(a / s),
                    fmt_num(b / s),
                    fmt_num(v.re),
                    fmt_num(v.im),
                    fmt_num(err)
                );
            }
        }
        out
    }
}

/// Samples per reduction shard; fixed for determinism.
const SHARD: usize = 1 << 16;

#[derive(Clone)]
struct BinSums {
    n: usize,
    re: Vec<f64>,
    re2: Vec<f64>,
    im: Vec<f64>,
    im2: Vec<f64>,
}

impl BinSums {
    fn new(bins: usize) -> Self {
        BinSums { n: 0, re: vec![0.0; bins], re2: vec![0.0; bins], im: vec![0.0; bins], im2: vec![0.0; bins] }
    }

    fn merge(&mut self, o: &BinSums) {
        self.n += o.n;
        for (a, b) in [(&mut self.re, &o.re), (&mut self.re2, &o.re2), (&mut self.im, &o.im), (&mut self.im2, &o.im2)] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Which kernel entry to project and onto which coordinate plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Projection {
    /// Kernel entry `K_nm`.
    pub pair: (usize, usize),
    /// Coordinate indices `(i, j)` of the plane `(x_i, x_j)` or `(x_i, p_j)`.
    pub plane: (usize, usize),
    #[serde(default)]
    pub axes: MarginalAxes,
}

impl Projection {
    /// `K_nm` on the `(x_n, x_m)` plane.
    pub fn natural(n: usize, m: usize) -> Self {
        Projection { pair: (n, m), plane: (n, m), axes: MarginalAxes::XX }
    }

    /// Two-state entry on the `(x_0, x_1)` plane.
    pub fn two_state(n: usize, m: usize) -> Self {
        Projection { pair: (n, m), plane: (0, 1), axes: MarginalAxes::XX }
    }
}

/// Histogram estimate of the marginal of `K_nm` over all other sphere
/// coordinates, with measure `F dx dp / Omega` and stratified gamma branches.
pub fn marginal_mc(
    n_states: usize,
    proj: Projection,
    scheme: &GammaScheme,
    grid: Grid2D,
    n_samples: usize,
    seed: u64,
) -> Result<MarginalGrid> {
    let Projection { pair: (n, m), plane: (pi, pj), axes } = proj;
    if n_states < 2 || [n, m, pi, pj].iter().any(|&k| k >= n_states) {
        return Err(Error::Invalid(format!("bad marginal request {proj:?} for F = {n_states}")));
    }
    if axes == MarginalAxes::XX && pi == pj {
        return Err(Error::Invalid("the (x_i, x_i) plane is degenerate; use the XP axes".into()));
    }
    scheme.validate(n_states)?;
    let b = scheme.n_branches();
    let nb = grid.bins * grid.bins;
    let per_branch = n_samples / b;
    if per_branch == 0 {
        return Err(Error::Invalid("n_samples too small".into()));
    }
    if (per_branch as f64) / (nb as f64) < 10.0 {
        log::warn!("fewer than 10 expected samples per bin; marginal estimates will be noisy");
    }
    let shards_per_branch = per_branch.div_ceil(SHARD);
    let run = |job: usize| -> Result<BinSums> {
        let (branch, shard) = (job / shards_per_branch, job % shards_per_branch);
        let (gamma, _) = draw_gamma(scheme, branch)?;
        let mut rng = crate::ensemble::trajectory_rng(seed, job);
        let count = SHARD.min(per_branch - shard * SHARD);
        let mut sums = BinSums::new(nb);
        sums.n = count;
        for _ in 0..count {
            let s = sample_constraint_sphere(n_states, gamma, &mut rng)?;
            let (a, c) = match axes {
                MarginalAxes::XX => (s.g[pi].re, s.g[pj].re),
                MarginalAxes::XP => (s.g[pi].re, s.g[pj].im),
            };
            if let (Some(i), Some(j)) = (grid.index(a), grid.index(c)) {
                let k = kernel(&s).entry(n, m);
                let idx = i * grid.bins + j;
                sums.re[idx] += k.re;
                sums.re2[idx] += k.re * k.re;
                sums.im[idx] += k.im;
                sums.im2[idx] += k.im * k.im;
            }
        }
        Ok(sums)
    };
    let jobs = b * shards_per_branch;
    let shards: Vec<Result<BinSums>> = map_jobs(jobs, run);
    let mut branch_sums = vec![BinSums::new(nb); b];
    for (job, s) in shards.into_iter().enumerate() {
        branch_sums[job / shards_per_branch].merge(&s?);
    }
    let area = grid.width() * grid.width();
    let f = n_states as f64;
    let mut values = vec![C64::new(0.0, 0.0); nb];
    let mut var_re = vec![0.0; nb];
    let mut var_im = vec![0.0; nb];
    for (branch, sums) in branch_sums.iter().enumerate() {
        let (_, w) = draw_gamma(scheme, branch)?;
        let nn = sums.n as f64;
        let scale = w * f / area;
        for k in 0..nb {
            let (mr, mi) = (sums.re[k] / nn, sums.im[k] / nn);
            values[k] += C64::new(mr, mi) * scale;
            var_re[k] += scale * scale * (sums.re2[k] / nn - mr * mr).max(0.0) / (nn - 1.0).max(1.0);
            var_im[k] += scale * scale * (sums.im2[k] / nn - mi * mi).max(0.0) / (nn - 1.0).max(1.0);
        }
    }
    let axes_label = match axes {
        MarginalAxes::XX => format!("x{pi},x{pj}"),
        MarginalAxes::XP => format!("x{pi},p{pj}"),
    };
    Ok(MarginalGrid {
        axis1: grid.centers(),
        axis2: grid.centers(),
        values,
        stderr_re: var_re.iter().map(|v| v.sqrt()).collect(),
        stderr_im: var_im.iter().map(|v| v.sqrt()).collect(),
        metadata: vec![
            ("axes".into(), axes_label),
            ("gamma-scheme".into(), scheme.label()),
            ("nm-pair".into(), format!("({n},{m})")),
            ("n_states".into(), n_states.to_string()),
            ("n_samples".into(), (per_branch * b).to_string()),
            ("seed".into(), seed.to_string()),
        ],
    })
}

/// Exact two-state marginal on the same bins, averaged over each bin on a
/// `sub x sub` midpoint sub-grid so that it is comparable with histograms.
pub fn marginal_f2_grid(scheme: &GammaScheme, n: usize, m: usize, grid: Grid2D, sub: usize) -> Result<MarginalGrid> {
    if n > 1 || m > 1 || sub == 0 {
        return Err(Error::Invalid("two-state marginal needs n, m in {0, 1}".into()));
    }
    let w = grid.width();
    let centers = grid.centers();
    let mut values = Vec::with_capacity(grid.bins * grid.bins);
    for &a in &centers {
        for &c in &centers {
            let mut acc = 0.0;
            for i in 0..sub {
                for j in 0..sub {
                    let x1 = a - 0.5 * w + (i as f64 + 0.5) * w / sub as f64;
                    let x2 = c - 0.5 * w + (j as f64 + 0.5) * w / sub as f64;
                    acc += marginal_f2(scheme, x1, x2)?[(n, m)];
                }
            }
            values.push(C64::new(acc / (sub * sub) as f64, 0.0));
        }
    }
    let nb = values.len();
    Ok(MarginalGrid {
        axis1: centers.clone(),
        axis2: centers,
        values,
        stderr_re: vec![0.0; nb],
        stderr_im: vec![0.0; nb],
        metadata: vec![
            ("axes".into(), "x0,x1".into()),
            ("gamma-scheme".into(), scheme.label()),
            ("nm-pair".into(), format!("({n},{m})")),
            ("source".into(), "closed form".into()),
        ],
    })
}

#[cfg(feature = "parallel")]
fn map_jobs<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Wigner function of `|v><w|` for the unit-frequency oscillator, `v, w <= 1`.
pub fn oscillator_wigner(v: usize, w: usize, r: f64, p: f64) -> Result<C64> {
    let r2 = r * r + p * p;
    let g = (-r2).exp() / PI;
    Ok(match (v, w) {
        (0, 0) => C64::new(g, 0.0),
        (1, 1) => C64::new((2.0 * r2 - 1.0) * g, 0.0),
        (0, 1) => C64::new(r, p) * (2.0f64.sqrt() * g),
        (1, 0) => C64::new(r, -p) * (2.0f64.sqrt() * g),
        _ => return Err(Error::Invalid("only oscillator levels 0 and 1 have closed forms here".into())),
    })
}

/// Composite spin-1/2 plus oscillator pure states. Spin up is state 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridState {
    /// `(|0>|down> + |1>|up>) / sqrt(2)`
    Bell,
    /// `(|0> + |1>)(|up> + |down>) / 2`
    ProductCat,
}

impl HybridState {
    /// `c[v][s]`: amplitude of oscillator level `v` with spin `s`.
    pub fn amplitudes(&self) -> [[f64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            HybridState::Bell => [[0.0, h], [h, 0.0]],
            HybridState::ProductCat => [[0.5, 0.5], [0.5, 0.5]],
        }
    }
}

/// Discrete block `B_nm(R, P) = W[<m|rho|n>](R, P)`; the joint distribution
/// of the `(n, m)` pair is `B_nm(R, P) K_nm(x_0, x_1)`, all entries on one plane.
pub fn hybrid_block(state: HybridState, r: f64, p: f64) -> Result<[[C64; 2]; 2]> {
    let c = state.amplitudes();
    let mut b = [[C64::new(0.0, 0.0); 2]; 2];
    for (n, row) in b.iter_mut().enumerate() {
        for (m, entry) in row.iter_mut().enumerate() {
            // <m|rho|n> = sum_{v,w} c[v][m] c[w][n] |v><w|
            for (v, cv) in c.iter().enumerate() {
                for (w, cw) in c.iter().enumerate() {
                    let amp = cv[m] * cw[n];
                    if amp != 0.0 {
                        *entry += oscillator_wigner(v, w, r, p)? * amp;
                    }
                }
            }
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridGrid {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    /// `[ir * p.len() + ip]`
    pub blocks: Vec<[[C64; 2]; 2]>,
}

impl HybridGrid {
    /// Joint value `sum_nm B_nm(R, P) K_nm(x1, x2)` at one cell.
    pub fn joint(&self, cell: usize, scheme: &GammaScheme, x1: f64, x2: f64) -> Result<C64> {
        let k = marginal_f2(scheme, x1, x2)?;
        let b = &self.blocks[cell];
        Ok((0..2).flat_map(|n| (0..2).map(move |m| (n, m))).map(|(n, m)| b[n][m] * k[(n, m)]).sum())
    }

    /// Rows `R, P, n, m, re, im`.
    pub fn to_csv(&self, state: HybridState) -> String {
        let mut out = format!("# state = {state:?}\nR,P,n,m,re,im\n");
        for (i, r) in self.r.iter().enumerate() {
            for (j, p) in self.p.iter().enumerate() {
                let b = &self.blocks[i * self.p.len() + j];
                for (n, row) in b.iter().enumerate() {
                    for (m, z) in row.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "{},{},{n},{m},{},{}",
                            fmt_num(*r),
                            fmt_num(*p),
                            fmt_num(z.re),
                            fmt_num(z.im)
                        );
                    }
                }
            }
        }
        out
    }
}

pub fn hybrid_joint(state: HybridState, r_grid: &[f64], p_grid: &[f64]) -> Result<HybridGrid> {
    let mut blocks = Vec::with_capacity(r_grid.len() * p_grid.len());
    for &r in r_grid {
        for &p in p_grid {
            blocks.push(hybrid_block(state, r, p)?);
        }
    }
    Ok(HybridGrid { r: r_grid.to_vec(), p: p_grid.to_vec(), blocks })
}

/// Largest entry modulus of a block.
pub fn block_norm(b: &[[C64; 2]; 2]) -> f64 {
    b.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasespace::gamma_star;

    #[test]
    fn origin_values() {
        let g = gamma_star(2).unwrap();
        let k = marginal_f2_analytic(0.0, 0.0, g);
        assert!((k[(0, 0)] - 0.0919).abs() < 1e-4);
        assert_eq!(k[(0, 1)], 0.0);
        let k = marginal_f2_analytic(0.7, -0.4, 0.1);
        assert!((k.trace() - 1.0 / (PI * 1.2)).abs() < 1e-15);
    }

    /// Each diagonal entry integrates to one over its disc.
    #[test]
    fn diagonal_integrates_to_one() {
        for scheme in [GammaScheme::single(0.3, 2).unwrap(), GammaScheme::symmetric_pair(0.1, 2).unwrap()] {
            let r = support_radius(&scheme, 2);
            let n = 1200;
            let h = 2.0 * r / n as f64;
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x1 = -r + (i as f64 + 0.5) * h;
                    let x2 = -r + (j as f64 + 0.5) * h;
                    sum += marginal_f2(&scheme, x1, x2).unwrap()[(0, 0)] * h * h;
                }
            }
            assert!((sum - 1.0).abs() < 5e-3, "{}: {sum}", scheme.label());
        }
    }

    #[test]
    fn weighted_support_and_hollow_core() {
        let delta = 0.05;
        let outer = (2.0f64 * (1.0 + 2.0 * delta)).sqrt();
        let inner = (2.0f64 * (1.0 - 2.0 * delta)).sqrt();
        assert_eq!(marginal_f2_weighted(outer * 1.01, 0.0, delta).unwrap(), Matrix2::zeros());
        for k in 0..12 {
            let th = k as f64 * PI / 6.0;
            let (c, s) = (th.cos(), th.sin());
            let core = marginal_f2_weighted(0.5 * inner * c, 0.5 * inner * s, delta).unwrap()[(0, 0)].abs();
            let ring = 0.5 * (inner + outer);
            let rim = marginal_f2_weighted(ring * c, ring * s, delta).unwrap()[(0, 0)].abs();
            assert!(core < rim, "angle {th}: {core} vs {rim}");
        }
    }

    #[test]
    fn small_delta_cancels_inside() {
        let v = marginal_f2_weighted(0.3, -0.5, 1e-3).unwrap();
        assert!(v.amax() < 1e-4, "{v}");
    }

    #[test]
    fn off_diagonal_is_odd() {
        let grid = Grid2D { half_width: 1.8, bins: 12 };
        let mc = marginal_mc(2, Projection::two_state(0, 1), &GammaScheme::single(0.2, 2).unwrap(), grid, 400_000, 3)
            .unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let a = mc.at(i, j).re;
                let b = mc.at(11 - i, j).re;
                let e = mc.stderr_re[i * 12 + j].hypot(mc.stderr_re[(11 - i) * 12 + j]);
                assert!((a + b).abs() < 4.0 * e + 1e-12);
            }
        }
    }

    #[test]
    fn mc_matches_closed_form_on_interior_bins() {
        let scheme = GammaScheme::single(gamma_star(2).unwrap(), 2).unwrap();
        let grid = Grid2D { half_width: 1.7, bins: 10 };
        let mc = marginal_mc(2, Projection::two_state(0, 1), &scheme, grid, 2_000_000, 9).unwrap();
        let exact = marginal_f2_grid(&scheme, 0, 1, grid, 8).unwrap();
        let r = support_radius(&scheme, 2);
        let w = grid.width();
        for i in 0..10 {
            for j in 0..10 {
                let (a, b) = (mc.axis1[i].abs() + 0.5 * w, mc.axis2[j].abs() + 0.5 * w);
                if a * a + b * b >= r * r {
                    continue;
                }
                let k = i * 10 + j;
                assert!((mc.values[k].re - exact.values[k].re).abs() < 4.5 * mc.stderr_re[k]);
            }
        }
    }

    #[test]
    fn mc_grid_is_deterministic() {
        let s = GammaScheme::symmetric_pair(0.1, 3).unwrap();
        let g = Grid2D { half_width: 1.6, bins: 6 };
        let a = marginal_mc(3, Projection { pair: (0, 2), plane: (0, 2), axes: MarginalAxes::XP }, &s, g, 100_000, 4)
            .unwrap();
        let b = marginal_mc(3, Projection { pair: (0, 2), plane: (0, 2), axes: MarginalAxes::XP }, &s, g, 100_000, 4)
            .unwrap();
        assert_eq!(a.to_csv(None), b.to_csv(None));
    }

    /// Three states: every diagonal marginal integrates to one, so the trace
    /// integrates to F.
    #[test]
    fn three_state_diagonals_normalized() {
        let s = GammaScheme::single(gamma_star(3).unwrap(), 3).unwrap();
        let r = support_radius(&s, 3);
        let g = Grid2D { half_width: r * 1.01, bins: 8 };
        let area = g.width() * g.width();
        let mut trace = 0.0;
        for n in 0..3 {
            let mc =
                marginal_mc(3, Projection { pair: (n, n), plane: (n, n), axes: MarginalAxes::XP }, &s, g, 200_000, 11)
                    .unwrap();
            let total: f64 = mc.values.iter().map(|z| z.re * area).sum();
            let err = mc.stderr_re.iter().map(|e| (e * area).powi(2)).sum::<f64>().sqrt();
            assert!((total - 1.0).abs() < 4.0 * err, "state {n}: {total} +- {err}");
            assert!(mc.values.iter().all(|z| z.im.abs() < 1e-15));
            trace += total;
        }
        assert!((trace - 3.0).abs() < 0.05);
    }

    #[test]
    fn wigner_closed_forms_are_normalized() {
        let n = 400;
        let h = 12.0 / n as f64;
        let mut tr = [0.0; 3];
        for i in 0..n {
            for j in 0..n {
                let (r, p) = (-6.0 + (i as f64 + 0.5) * h, -6.0 + (j as f64 + 0.5) * h);
                tr[0] += oscillator_wigner(0, 0, r, p).unwrap().re * h * h;
                tr[1] += oscillator_wigner(1, 1, r, p).unwrap().re * h * h;
                tr[2] += oscillator_wigner(0, 1, r, p).unwrap().norm() * 0.0;
            }
        }
        assert!((tr[0] - 1.0).abs() < 1e-9 && (tr[1] - 1.0).abs() < 1e-9);
        let z = oscillator_wigner(0, 1, 0.3, -0.2).unwrap();
        assert_eq!(z.conj(), oscillator_wigner(1, 0, 0.3, -0.2).unwrap());
        assert!(oscillator_wigner(2, 0, 0.0, 0.0).is_err());
    }

    #[test]
    fn product_state_factorizes() {
        let g = hybrid_joint(HybridState::ProductCat, &[-1.0, 0.0, 0.5], &[-0.3, 0.8]).unwrap();
        for b in &g.blocks {
            for row in b {
                for z in row {
                    assert!((z - b[0][0]).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn bell_state_decays_and_differs_from_product() {
        let far = hybrid_block(HybridState::Bell, 5.0 * 0.6, 5.0 * 0.8).unwrap();
        assert!(block_norm(&far) < 1e-6);
        let near = hybrid_block(HybridState::Bell, 0.4, 0.3).unwrap();
        let cat = hybrid_block(HybridState::ProductCat, 0.4, 0.3).unwrap();
        let diff = near.iter().flatten().zip(cat.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff > 1e3 * f64::EPSILON);
        // Hermitian block
        assert!((near[0][1] - near[1][0].conj()).norm() < 1e-15);
    }
}
