//! One-dimensional two-state scattering models (single avoided crossing,
//! dual avoided crossing, extended coupling with reflection) in atomic units.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DiabaticModel, InitialNuclearSpec, ModelKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TullyVariant {
    Sac,
    Dac,
    Ecr,
}

impl std::str::FromStr for TullyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sac" => Ok(TullyVariant::Sac),
            "dac" => Ok(TullyVariant::Dac),
            "ecr" => Ok(TullyVariant::Ecr),
            other => Err(Error::Invalid(format!("unknown Tully variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TullyModel {
    pub variant: TullyVariant,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e0: f64,
}

impl TullyModel {
    /// `(V11, V22, V12)`
    pub fn elements(&self, r: f64) -> (f64, f64, f64) {
        let TullyModel { a, b, c, d, e0, .. } = *self;
        match self.variant {
            TullyVariant::Sac => {
                let v11 = a * (1.0 - (-b * r.abs()).exp()) * r.signum();
                let v11 = if r == 0.0 { 0.0 } else { v11 };
                (v11, -v11, c * (-d * r * r).exp())
            }
            TullyVariant::Dac => (0.0, -a * (-b * r * r).exp() + e0, c * (-d * r * r).exp()),
            TullyVariant::Ecr => {
                // both branches give C at R = 0
                let v12 = if r < 0.0 { c * (b * r).exp() } else { c * (2.0 - (-b * r).exp()) };
                (e0, -e0, v12)
            }
        }
    }

    /// `(dV11/dR, dV22/dR, dV12/dR)`
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        let TullyModel { a, b, c, d, .. } = *self;
        match self.variant {
            TullyVariant::Sac => {
                let d11 = a * b * (-b * r.abs()).exp();
                (d11, -d11, -2.0 * c * d * r * (-d * r * r).exp())
            }
            TullyVariant::Dac => (0.0, 2.0 * a * b * r * (-b * r * r).exp(), -2.0 * c * d * r * (-d * r * r).exp()),
            TullyVariant::Ecr => {
                let d12 = if r < 0.0 { c * b * (b * r).exp() } else { c * b * (-b * r).exp() };
                (0.0, 0.0, d12)
            }
        }
    }

    pub(crate) fn potential_into(&self, r: f64, v: &mut DMatrix<f64>) {
        let (v11, v22, v12) = self.elements(r);
        v[(0, 0)] = v11;
        v[(1, 1)] = v22;
        v[(0, 1)] = v12;
        v[(1, 0)] = v12;
    }

    pub(crate) fn gradient_into(&self, r: f64, g: &mut DMatrix<f64>) {
        let (d11, d22, d12) = self.derivatives(r);
        g[(0, 0)] = d11;
        g[(1, 1)] = d22;
        g[(0, 1)] = d12;
        g[(1, 0)] = d12;
    }

    pub(crate) fn force(&self, r: f64, rho: &DMatrix<f64>) -> f64 {
        let (d11, d22, d12) = self.derivatives(r);
        -(d11 * rho[(0, 0)] + d22 * rho[(1, 1)] + d12 * (rho[(0, 1)] + rho[(1, 0)]))
    }
}

/// Model constants plus the initial wavepacket `exp[-alpha (R-R0)^2/2 + i (R-R0) P0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TullyParams {
    pub variant: TullyVariant,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e0: f64,
    pub mass: f64,
    pub r0: f64,
    pub p0: f64,
    pub alpha: f64,
}

impl TullyParams {
    pub fn default_for(variant: TullyVariant) -> Self {
        let base = TullyParams {
            variant,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            e0: 0.0,
            mass: 2000.0,
            r0: 0.0,
            p0: 10.0,
            alpha: 1.0,
        };
        match variant {
            TullyVariant::Sac => TullyParams { a: 0.01, b: 1.6, c: 0.005, d: 1.0, r0: -3.8, ..base },
            TullyVariant::Dac => TullyParams { a: 0.10, b: 0.28, e0: 0.05, c: 0.015, d: 0.06, r0: -10.0, ..base },
            TullyVariant::Ecr => TullyParams { e0: -0.0006, b: 0.9, c: 0.1, r0: -13.0, ..base },
        }
    }

    pub fn with_p0(mut self, p0: f64) -> Self {
        self.p0 = p0;
        self
    }

    pub fn model(&self) -> TullyModel {
        TullyModel { variant: self.variant, a: self.a, b: self.b, c: self.c, d: self.d, e0: self.e0 }
    }
}

pub fn build_tully(params: &TullyParams) -> Result<DiabaticModel> {
    if !(params.mass > 0.0) || !(params.alpha > 0.0) {
        return Err(Error::Invalid("Tully mass and alpha must be positive".into()));
    }
    // Wigner transform of the Gaussian packet: exp[-alpha (R-R0)^2 - (P-P0)^2 / alpha]
    let init = InitialNuclearSpec {
        mean_r: vec![params.r0],
        mean_p: vec![params.p0],
        var_r: vec![1.0 / (2.0 * params.alpha)],
        var_p: vec![params.alpha / 2.0],
    };
    let name = format!("tully-{:?}", params.variant).to_lowercase();
    let p = params;
    let echo = vec![
        ("variant".to_string(), format!("{:?}", p.variant)),
        ("A".into(), p.a.to_string()),
        ("B".into(), p.b.to_string()),
        ("C".into(), p.c.to_string()),
        ("D".into(), p.d.to_string()),
        ("E0".into(), p.e0.to_string()),
        ("mass".into(), p.mass.to_string()),
        ("R0".into(), p.r0.to_string()),
        ("P0".into(), p.p0.to_string()),
        ("alpha".into(), p.alpha.to_string()),
    ];
    Ok(DiabaticModel::new(name, ModelKind::Tully(params.model()), vec![1.0 / p.mass], init, 0)?.with_params(echo))
}
