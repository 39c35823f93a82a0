//! Small dense helpers: Hermitian exponentials and sorted symmetric
//! eigendecompositions. Two-state systems take closed-form paths since they
//! sit in the inner loop of every trajectory step.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// `exp(-i H t)` for Hermitian `h`.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let n = h.nrows();
    if n == 2 {
        let (a, b, d) = (h[(0, 0)].re, h[(0, 1)], h[(1, 1)].re);
        return expm_hermitian_2x2(a, b, d, t);
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, C64::from_polar(1.0, -h[(0, 0)].re * t));
    }
    let eig = h.clone().symmetric_eigen();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let phase = C64::from_polar(1.0, -eig.eigenvalues[k] * t);
        let col = eig.eigenvectors.column(k);
        for i in 0..n {
            let ci = col[i] * phase;
            for j in 0..n {
                out[(i, j)] += ci * col[j].conj();
            }
        }
    }
    out
}

/// Closed form of `exp(-i H t)` for `H = [[a, b], [b*, d]]`.
pub fn expm_hermitian_2x2(a: f64, b: C64, d: f64, t: f64) -> DMatrix<C64> {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let omega = (half * half + b.norm_sqr()).sqrt();
    let (s, c) = (omega * t).sin_cos();
    // sin(omega t) / omega without the 0/0 at omega = 0
    let sinc = if omega * t.abs() < 1e-8 { t } else { s / omega };
    let global = C64::from_polar(1.0, -mean * t);
    let i = C64::i();
    let m00 = global * (c - i * sinc * half);
    let m11 = global * (c + i * sinc * half);
    let m01 = global * (-i * sinc * b);
    let m10 = global * (-i * sinc * b.conj());
    DMatrix::from_row_slice(2, 2, &[m00, m01, m10, m11])
}

pub fn expm_real_symmetric(v: &DMatrix<f64>, t: f64) -> DMatrix<C64> {
    if v.nrows() == 2 {
        return expm_hermitian_2x2(v[(0, 0)], C64::new(v[(0, 1)], 0.0), v[(1, 1)], t);
    }
    expm_hermitian(&v.map(|x| C64::new(x, 0.0)), t)
}

/// Eigendecomposition of a real symmetric matrix with ascending eigenvalues.
/// Eigenvectors are the columns of the returned matrix; their signs are not
/// fixed here.
pub fn symmetric_eigen_sorted(v: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = v.nrows();
    if n == 2 {
        let (a, b, d) = (v[(0, 0)], v[(0, 1)], v[(1, 1)]);
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let r = half.hypot(b);
        let theta = 0.5 * b.atan2(half);
        let (s, c) = theta.sin_cos();
        let vals = DVector::from_vec(vec![mean - r, mean + r]);
        let vecs = DMatrix::from_row_slice(2, 2, &[-s, c, c, s]);
        return (vals, vecs);
    }
    let eig = v.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// `y = M x` for a complex matrix and vector slice, written into `out`.
pub fn apply(m: &DMatrix<C64>, x: &[C64], out: &mut [C64]) {
    let n = x.len();
    for i in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            acc += m[(i, j)] * x[j];
        }
        out[i] = acc;
    }
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn check_symmetric(v: &DMatrix<f64>, tol: f64) -> Result<()> {
    let n = v.nrows();
    for i in 0..n {
        for j in 0..i {
            if (v[(i, j)] - v[(j, i)]).abs() > tol {
                return Err(Error::Invalid(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    v[(i, j)],
                    v[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut h = DMatrix::<C64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = C64::new(next(), 0.0);
            for j in 0..i {
                let z = C64::new(next(), next());
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    /// Truncated Taylor series as an independent route to exp(-iHt).
    fn taylor_expm(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        let n = h.nrows();
        let a = h * C64::new(0.0, -t);
        let mut term = DMatrix::<C64>::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * &a / C64::new(k as f64, 0.0);
            sum += &term;
        }
        sum
    }

    #[test]
    fn closed_form_matches_taylor() {
        for n in [2, 3, 4] {
            let h = random_hermitian(n, 7 + n as u64);
            let exact = taylor_expm(&h, 1.3);
            assert!(max_abs_diff(&expm_hermitian(&h, 1.3), &exact) < 1e-12);
        }
    }

    #[test]
    fn propagator_is_unitary_and_reversible() {
        let h = random_hermitian(3, 3);
        let u = expm_hermitian(&h, 0.7);
        let back = expm_hermitian(&h, -0.7);
        let id = DMatrix::<C64>::identity(3, 3);
        assert!(max_abs_diff(&(&u * &back), &id) < 1e-12);
        assert!(max_abs_diff(&(&u * u.adjoint()), &id) < 1e-12);
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let v = DMatrix::<f64>::zeros(2, 2);
        let u = expm_real_symmetric(&v, 5.0);
        assert!(max_abs_diff(&u, &DMatrix::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn sorted_eigen_diagonalizes() {
        let v = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.3, 0.2, -0.5, 0.1, -0.3, 0.1, 0.4]);
        let (e, u) = symmetric_eigen_sorted(&v);
        assert!(e[0] <= e[1] && e[1] <= e[2]);
        let d = u.transpose() * &v * &u;
        for i in 0..3 {
            assert!((d[(i, i)] - e[i]).abs() < 1e-12);
        }
        let v2 = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, -0.2, -0.1]);
        let (e2, u2) = symmetric_eigen_sorted(&v2);
        let d2 = u2.transpose() * &v2 * &u2;
        assert!((d2[(0, 1)]).abs() < 1e-14 && (d2[(0, 0)] - e2[0]).abs() < 1e-14);
        assert!(e2[0] < e2[1]);
    }
}
