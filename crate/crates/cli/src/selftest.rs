//! Fast invariant checks: sphere moments, kernel identities, weights, short
//! trajectory energy drift and closed-form marginals.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use phasedyn::dynamics::{initialize, run_trajectory, IntegratorConfig, Method, Representation};
use phasedyn::ensemble::trajectory_rng;
use phasedyn::linalg::expm_real_symmetric;
use phasedyn::marginals::marginal_f2_weighted;
use phasedyn::models::{build_tully, DiabaticModel, TullyParams, TullyVariant};
use phasedyn::phasespace::{
    chi, draw_gamma, gamma_star, inverse_kernel, kernel, pair_weights, sample_constraint_sphere, GammaScheme,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    /// `measured <= tolerance` unless the check says otherwise.
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, passed: measured <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, passed: measured >= tolerance }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelftestOptions {
    pub samples: usize,
    pub seed: u64,
    /// Replaces the self-inverse gamma wherever it is used; a negative control.
    pub gamma_override: Option<f64>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions { samples: 200_000, seed: 2024, gamma_override: None }
    }
}

fn self_inverse_gamma(f: usize, opts: &SelftestOptions) -> f64 {
    opts.gamma_override.unwrap_or_else(|| gamma_star(f).expect("F >= 1"))
}

/// Largest entrywise difference between the kernel and its inverse at
/// `gamma` over random sphere points.
pub fn kernel_inverse_gap(f: usize, gamma: f64, points: usize, seed: u64) -> f64 {
    let mut rng = trajectory_rng(seed, f);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let s = sample_constraint_sphere(f, gamma, &mut rng).expect("admissible gamma");
        let k = kernel(&s).0;
        let ki = inverse_kernel(&s).expect("regular").0;
        worst = worst.max((k - ki).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    worst
}

#[derive(Clone, Copy, Default)]
struct Stat {
    n: f64,
    sum: f64,
    sum2: f64,
}

impl Stat {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum2 += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    fn var_of_mean(&self) -> f64 {
        let m = self.mean();
        ((self.sum2 / self.n - m * m).max(0.0)) / (self.n - 1.0).max(1.0)
    }
}

/// `|estimate - exact|` in standard errors; exact agreement with no spread
/// counts as zero.
fn z_score(est: f64, exact: f64, var: f64) -> f64 {
    let diff = (est - exact).abs();
    if diff <= 1e-12 {
        0.0
    } else if var > 0.0 {
        diff / var.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Largest z-score among the second and fourth sphere moments against
/// `(1 + F gamma)/F delta_ij` and `(1 + F gamma)^2 / (F (F + 1))` times the
/// pairing sum.
pub fn moment_z(f: usize, gamma: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = trajectory_rng(seed, 1000 + f);
    let xi = 1.0 + f as f64 * gamma;
    let second = xi / f as f64;
    let fourth = xi * xi / (f as f64 * (f as f64 + 1.0));
    // x0^2, p0^2, x0 p0, x0^4, x0^2 p0^2, x0^2 x1^2, x0^3 x1
    let exact = [second, second, 0.0, 3.0 * fourth, fourth, fourth, 0.0];
    let mut stats = [Stat::default(); 7];
    for _ in 0..samples {
        let s = sample_constraint_sphere(f, gamma, &mut rng).expect("admissible gamma");
        let (x0, p0, x1) = (s.g[0].re, s.g[0].im, s.g[1 % f].re);
        let vals = [x0 * x0, p0 * p0, x0 * p0, x0.powi(4), x0 * x0 * p0 * p0, x0 * x0 * x1 * x1, x0.powi(3) * x1];
        for (st, v) in stats.iter_mut().zip(vals) {
            st.push(v);
        }
    }
    let take = if f > 1 { 7 } else { 5 };
    stats[..take].iter().zip(&exact).map(|(s, e)| z_score(s.mean(), *e, s.var_of_mean())).fold(0.0, f64::max)
}

/// Largest z-score of `F sum_b w_b <K_nm K_lk>_b` against
/// `delta_nk delta_ml` over all index quadruples, with the kernel used as
/// its own inverse.
pub fn duality_z(f: usize, scheme: &GammaScheme, samples: usize, seed: u64) -> f64 {
    let n_idx = f * f * f * f;
    let mut est = vec![C64::new(0.0, 0.0); n_idx];
    let mut var = vec![(0.0, 0.0); n_idx];
    let per_branch = samples / scheme.n_branches();
    for branch in 0..scheme.n_branches() {
        let (gamma, w) = draw_gamma(scheme, branch).expect("branch");
        let mut rng = trajectory_rng(seed, 2000 + branch);
        let mut re = vec![Stat::default(); n_idx];
        let mut im = vec![Stat::default(); n_idx];
        for _ in 0..per_branch {
            let s = sample_constraint_sphere(f, gamma, &mut rng).expect("admissible gamma");
            let k = kernel(&s).0;
            let mut idx = 0;
            for n in 0..f {
                for m in 0..f {
                    for l in 0..f {
                        for kk in 0..f {
                            let v = k[(n, m)] * k[(l, kk)] * f as f64;
                            re[idx].push(v.re);
                            im[idx].push(v.im);
                            idx += 1;
                        }
                    }
                }
            }
        }
        for i in 0..n_idx {
            est[i] += C64::new(re[i].mean(), im[i].mean()) * w;
            var[i].0 += w * w * re[i].var_of_mean();
            var[i].1 += w * w * im[i].var_of_mean();
        }
    }
    let mut worst: f64 = 0.0;
    let mut idx = 0;
    for n in 0..f {
        for m in 0..f {
            for l in 0..f {
                for kk in 0..f {
                    let exact = if n == kk && m == l { 1.0 } else { 0.0 };
                    worst = worst.max(z_score(est[idx].re, exact, var[idx].0));
                    worst = worst.max(z_score(est[idx].im, 0.0, var[idx].1));
                    idx += 1;
                }
            }
        }
    }
    worst
}

/// Largest residual of `w+ + w- = 1` and `w+ chi(+D) + w- chi(-D) = 1` over
/// `count` deltas spread across `(0, 1/F)`.
pub fn pair_weight_residual(f: usize, count: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = trajectory_rng(seed, 3000 + f);
    let upper = 1.0 / f as f64;
    (0..count)
        .map(|_| {
            let d = upper * rng.random_range(1e-6..1.0 - 1e-6);
            let (wp, wm) = pair_weights(d, f).expect("admissible delta");
            let norm = (wp + wm - 1.0).abs();
            let second = (wp * chi(d, f) + wm * chi(-d, f) - 1.0).abs();
            norm.max(second)
        })
        .fold(0.0, f64::max)
}

/// Largest deviation of one frozen-nuclei mapping trajectory from the exact
/// electronic propagator, over `steps` steps of `dt`.
pub fn frozen_unitary_error(scheme: GammaScheme, delta: f64, dt: f64, steps: usize, seed: u64) -> f64 {
    let v = DMatrix::from_row_slice(2, 2, &[0.0, delta, delta, 0.0]);
    let model = DiabaticModel::constant(v.clone(), 0).expect("two-level model");
    let method = Method::Mapping(scheme);
    let mut rng = trajectory_rng(seed, 0);
    let (init, _) = initialize(&model, &method, Representation::Diabatic, 0, &mut rng).expect("initial state");
    let g0: Vec<C64> = init.mapping().expect("mapping").g.clone();
    let cfg = IntegratorConfig {
        dt,
        max_time: dt * steps as f64,
        record_stride: 1,
        representation: Representation::Diabatic,
    };
    let mut worst: f64 = 0.0;
    run_trajectory(&model, &method, init, &cfg, &mut rng, |snap| {
        let t = snap.state.t;
        let u = expm_real_symmetric(&v, t);
        let g = &snap.state.mapping().expect("mapping").g;
        for n in 0..2 {
            let exact: C64 = (0..2).map(|m| u[(n, m)] * g0[m]).sum();
            worst = worst.max((exact - g[n]).norm());
        }
    })
    .expect("trajectory");
    worst
}

/// Relative energy drift of one trajectory; the initial state is the same
/// for every `dt` so drifts can be compared across steps.
pub fn trajectory_drift(
    model: &DiabaticModel,
    method: &Method,
    representation: Representation,
    dt: f64,
    max_time: f64,
    seed: u64,
) -> phasedyn::Result<f64> {
    let mut rng = trajectory_rng(seed, 0);
    let (init, _) = initialize(model, method, representation, 0, &mut rng)?;
    let cfg = IntegratorConfig { dt, max_time, record_stride: 1, representation };
    Ok(run_trajectory(model, method, init, &cfg, &mut rng, |_| {})?.relative_energy_drift())
}

/// Mean `|K_00|` of the weighted two-state marginal inside the inner disc
/// divided by its mean over the annulus between the two discs.
pub fn hollow_ratio(delta: f64) -> f64 {
    let inner = (2.0 * (1.0 - 2.0 * delta)).sqrt();
    let outer = (2.0 * (1.0 + 2.0 * delta)).sqrt();
    let mean_over = |r_lo: f64, r_hi: f64| {
        let (nr, nt) = (200, 64);
        let (mut acc, mut area) = (0.0, 0.0);
        for i in 0..nr {
            let r = r_lo + (r_hi - r_lo) * (i as f64 + 0.5) / nr as f64;
            for j in 0..nt {
                let th = 2.0 * std::f64::consts::PI * j as f64 / nt as f64;
                acc += r * marginal_f2_weighted(r * th.cos(), r * th.sin(), delta).expect("delta")[(0, 0)].abs();
                area += r;
            }
        }
        acc / area
    };
    mean_over(0.0, inner) / mean_over(inner, outer)
}

/// Midpoint integral of the closed-form diagonal marginal over its support.
pub fn analytic_marginal_mass(scheme: &GammaScheme) -> f64 {
    let r = phasedyn::marginals::support_radius(scheme, 2);
    let n = 600;
    let h = 2.0 * r / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (x1, x2) = (-r + (i as f64 + 0.5) * h, -r + (j as f64 + 0.5) * h);
            sum += phasedyn::marginals::marginal_f2(scheme, x1, x2).expect("scheme")[(0, 0)];
        }
    }
    sum * h * h
}

pub fn run_selftest(opts: &SelftestOptions) -> Vec<Check> {
    let mut out = Vec::new();
    for f in [2, 3, 5] {
        let g = self_inverse_gamma(f, opts);
        out.push(Check::at_most(
            format!("kernel equals inverse at gamma*, F={f}"),
            kernel_inverse_gap(f, g, 200, opts.seed),
            1e-12,
        ));
    }
    for f in [2, 3, 5] {
        for (i, gamma) in [0.0, self_inverse_gamma(f, opts), 0.3].into_iter().enumerate() {
            out.push(Check::at_most(
                format!("sphere moments (z), F={f} gamma={gamma:.4}"),
                moment_z(f, gamma, opts.samples, opts.seed + i as u64),
                3.0,
            ));
        }
    }
    for f in [2, 3] {
        let scheme = GammaScheme::Single { gamma: self_inverse_gamma(f, opts) };
        out.push(Check::at_most(
            format!("duality (z), single gamma*, F={f}"),
            duality_z(f, &scheme, opts.samples, opts.seed),
            3.0,
        ));
    }
    let pair = GammaScheme::symmetric_pair(0.1, 2).expect("delta");
    out.push(Check::at_most(
        "duality (z), symmetric pair delta=0.1, F=2",
        duality_z(2, &pair, opts.samples, opts.seed),
        3.0,
    ));
    out.push(Check::at_most(
        "pair weight identities, F=2,3,5",
        [2, 3, 5].map(|f| pair_weight_residual(f, 100, opts.seed)).into_iter().fold(0.0, f64::max),
        1e-12,
    ));
    let (wp, wm) = pair_weights(0.1, 2).expect("delta");
    out.push(Check::at_most("pair weights at delta=0.1, F=2", (wp - 2.95).abs().max((wm + 1.95).abs()), 1e-12));
    out.push(Check::at_most(
        "frozen-nuclei CMM matches the propagator",
        frozen_unitary_error(GammaScheme::Single { gamma: self_inverse_gamma(2, opts) }, 0.2, 0.05, 400, opts.seed),
        1e-10,
    ));
    let sac = build_tully(&TullyParams::default_for(TullyVariant::Sac).with_p0(20.0)).expect("model");
    let cmm = Method::Mapping(GammaScheme::Single { gamma: self_inverse_gamma(2, opts) });
    let d1 = trajectory_drift(&sac, &cmm, Representation::Diabatic, 1.0, 400.0, opts.seed).unwrap_or(f64::INFINITY);
    let d2 = trajectory_drift(&sac, &cmm, Representation::Diabatic, 0.5, 400.0, opts.seed).unwrap_or(f64::INFINITY);
    out.push(Check::at_most("SAC energy drift at dt=1", d1, 1e-5));
    out.push(Check::at_least("SAC drift ratio dt -> dt/2", d1 / d2, 3.5));
    for scheme in [GammaScheme::Single { gamma: self_inverse_gamma(2, opts) }, pair] {
        out.push(Check::at_most(
            format!("analytic marginal mass, {}", scheme.label()),
            (analytic_marginal_mass(&scheme) - 1.0).abs(),
            5e-3,
        ));
    }
    out.push(Check::at_most("weighted marginal hollow ratio, delta=0.05", hollow_ratio(0.05), 0.2));
    out
}

pub fn report(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        let cmp = if c.passed { "ok  " } else { "FAIL" };
        let _ = writeln!(out, "{cmp} {:<52} measured {:.3e}  tolerance {:.3e}", c.name, c.measured, c.tolerance);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(out, "{} checks, {failed} failed", checks.len());
    out
}
