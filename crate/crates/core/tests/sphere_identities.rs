//! Monte Carlo identities on the constraint sphere.

use phasedyn::ensemble::trajectory_rng;
use phasedyn::phasespace::{draw_gamma, gamma_star, inverse_kernel, kernel, sample_constraint_sphere, GammaScheme};

const SAMPLES: usize = 200_000;

struct Mean {
    n: f64,
    sum: f64,
    sum2: f64,
}

impl Mean {
    fn new() -> Self {
        Mean { n: 0.0, sum: 0.0, sum2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum2 += x * x;
    }

    fn value(&self) -> f64 {
        self.sum / self.n
    }

    fn var(&self) -> f64 {
        (self.sum2 / self.n - self.value().powi(2)).max(0.0) / (self.n - 1.0)
    }
}

fn within(est: f64, exact: f64, var: f64, k: f64) -> bool {
    (est - exact).abs() <= k * var.sqrt() + 1e-12
}

/// `F <K_nm>` is the identity for every gamma and for the weighted pair.
#[test]
fn resolution_of_identity() {
    let schemes = [
        (2, GammaScheme::single(0.0, 2).unwrap()),
        (3, GammaScheme::self_inverse(3).unwrap()),
        (2, GammaScheme::symmetric_pair(0.1, 2).unwrap()),
    ];
    for (f, scheme) in schemes {
        let mut est = vec![(0.0, 0.0); f * f];
        for branch in 0..scheme.n_branches() {
            let (gamma, w) = draw_gamma(&scheme, branch).unwrap();
            let mut rng = trajectory_rng(11, branch);
            let mut acc: Vec<Mean> = (0..f * f).map(|_| Mean::new()).collect();
            for _ in 0..SAMPLES {
                let k = kernel(&sample_constraint_sphere(f, gamma, &mut rng).unwrap()).0;
                for (i, a) in acc.iter_mut().enumerate() {
                    a.push(f as f64 * k[(i / f, i % f)].re);
                }
            }
            for (e, a) in est.iter_mut().zip(&acc) {
                e.0 += w * a.value();
                e.1 += w * w * a.var();
            }
        }
        for (i, (v, var)) in est.iter().enumerate() {
            let exact = if i / f == i % f { 1.0 } else { 0.0 };
            assert!(within(*v, exact, *var, 4.0), "{}: entry {i} = {v}", scheme.label());
        }
    }
}

/// With the general inverse kernel, `F <K_nm K^-1_lk> = delta_nk delta_ml`
/// holds for any admissible gamma.
#[test]
fn duality_with_inverse_kernel() {
    for f in [2, 3] {
        for gamma in [0.0, 0.2] {
            let mut rng = trajectory_rng(5, f);
            let n_idx = f.pow(4);
            let mut acc: Vec<Mean> = (0..n_idx).map(|_| Mean::new()).collect();
            for _ in 0..SAMPLES / 2 {
                let s = sample_constraint_sphere(f, gamma, &mut rng).unwrap();
                let (k, ki) = (kernel(&s).0, inverse_kernel(&s).unwrap().0);
                for (idx, a) in acc.iter_mut().enumerate() {
                    let (n, m, l, kk) = (idx / f.pow(3), idx / (f * f) % f, idx / f % f, idx % f);
                    a.push(f as f64 * (k[(n, m)] * ki[(l, kk)]).re);
                }
            }
            for (idx, a) in acc.iter().enumerate() {
                let (n, m, l, kk) = (idx / f.pow(3), idx / (f * f) % f, idx / f % f, idx % f);
                let exact = if n == kk && m == l { 1.0 } else { 0.0 };
                assert!(within(a.value(), exact, a.var(), 4.0), "F={f} gamma={gamma} ({n}{m}{l}{kk}) = {}", a.value());
            }
        }
    }
}

/// Uniformity: the sample mean of `|g_n|^2 / 2` is `(1 + F gamma) / F`.
#[test]
fn occupation_moments() {
    for f in [2, 5] {
        let gamma = gamma_star(f).unwrap();
        let mut rng = trajectory_rng(8, f);
        let mut a = Mean::new();
        for _ in 0..SAMPLES {
            let s = sample_constraint_sphere(f, gamma, &mut rng).unwrap();
            a.push(0.5 * s.g[f - 1].norm_sqr());
        }
        let exact = (1.0 + f as f64 * gamma) / f as f64;
        assert!(within(a.value(), exact, a.var(), 4.0), "F={f}: {}", a.value());
    }
}
