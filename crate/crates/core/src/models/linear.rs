use nalgebra::DMatrix;

/// How the harmonic part of a mode is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KineticConvention {
    /// `(P^2 + omega^2 R^2) / 2`, unit mass.
    MassWeighted,
    /// `omega (P^2 + R^2) / 2`, dimensionless normal-mode coordinates.
    FrequencyWeighted,
}

/// Harmonic modes with potential terms at most linear in each coordinate:
///
/// `V(R) = V0 + sum_k L_k R_k + I sum_k u_k(R_k)`
///
/// where `u_k` is the harmonic potential of mode `k` in its convention.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearVibronicModel {
    pub v0: DMatrix<f64>,
    pub freqs: Vec<f64>,
    pub convention: KineticConvention,
    /// One symmetric `F x F` coupling matrix per mode.
    pub couplings: Vec<DMatrix<f64>>,
}

impl LinearVibronicModel {
    pub fn n_states(&self) -> usize {
        self.v0.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.freqs.len()
    }

    /// Inverse mass per mode in this convention.
    pub fn inv_mass(&self) -> Vec<f64> {
        match self.convention {
            KineticConvention::MassWeighted => vec![1.0; self.n_modes()],
            KineticConvention::FrequencyWeighted => self.freqs.clone(),
        }
    }

    fn harmonic(&self, k: usize, r: f64) -> (f64, f64) {
        let w = self.freqs[k];
        match self.convention {
            KineticConvention::MassWeighted => (0.5 * w * w * r * r, w * w * r),
            KineticConvention::FrequencyWeighted => (0.5 * w * r * r, w * r),
        }
    }

    pub(crate) fn potential_into(&self, r: &[f64], v: &mut DMatrix<f64>) {
        v.copy_from(&self.v0);
        let mut bath = 0.0;
        for (k, lk) in self.couplings.iter().enumerate() {
            for (a, b) in v.iter_mut().zip(lk.iter()) {
                *a += r[k] * b;
            }
            bath += self.harmonic(k, r[k]).0;
        }
        for n in 0..v.nrows() {
            v[(n, n)] += bath;
        }
    }

    pub(crate) fn gradient_into(&self, r: &[f64], grad: &mut [DMatrix<f64>]) {
        for (k, g) in grad.iter_mut().enumerate() {
            g.copy_from(&self.couplings[k]);
            let dh = self.harmonic(k, r[k]).1;
            for n in 0..g.nrows() {
                g[(n, n)] += dh;
            }
        }
    }

    pub(crate) fn force_into(&self, r: &[f64], rho: &DMatrix<f64>, out: &mut [f64]) {
        let trace = rho.trace();
        for (k, lk) in self.couplings.iter().enumerate() {
            let contraction: f64 = lk.iter().zip(rho.iter()).map(|(a, b)| a * b).sum();
            out[k] = -(contraction + self.harmonic(k, r[k]).1 * trace);
        }
    }
}
