//! Economic primitives: the prior, virtual value, signal family and the
//! buyer-side quantities derived from them.

mod noise;
mod prior;
mod signal;

use std::sync::Arc;

pub use noise::{Logistic, Noise, Normal, NormalMixture};
pub use prior::{Beta, Prior, Uniform};
pub use signal::{SignalFamily, TruthOrNoise};

use crate::error::{Error, Result};
use crate::numerics::{find_root, QuadratureSpec};

const PSI_ROOT_TOL: f64 = 1e-14;

/// A prior and a signal family bound together with the quadrature settings
/// used for every dv₂ integral.
#[derive(Debug, Clone)]
pub struct Model {
    prior: Arc<dyn Prior>,
    signal: Arc<dyn SignalFamily>,
    quadrature: QuadratureSpec,
    v1_star: f64,
}

impl Model {
    pub fn new(prior: Arc<dyn Prior>, signal: Arc<dyn SignalFamily>, quadrature: QuadratureSpec) -> Result<Self> {
        quadrature.validate()?;
        let mut model = Self {
            prior,
            signal,
            quadrature,
            v1_star: f64::NAN,
        };
        model.v1_star = model.psi_inverse(0.0)?;
        Ok(model)
    }

    /// Uniform prior with standard normal truth-or-noise signal.
    pub fn uniform_normal() -> Self {
        Self::new(
            Arc::new(Uniform),
            Arc::new(TruthOrNoise::new(Normal::standard())),
            QuadratureSpec::default(),
        )
        .expect("reference model is valid")
    }

    pub fn prior(&self) -> &dyn Prior {
        &*self.prior
    }

    pub fn signal(&self) -> &dyn SignalFamily {
        &*self.signal
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quadrature
    }

    /// ψ(v₁) = v₁ − (1 − G)/g, unchecked.
    pub fn psi(&self, v1: f64) -> f64 {
        v1 - self.prior.inverse_hazard(v1)
    }

    /// Smallest v₁ ∈ [0, 1] with ψ(v₁) = y; clamps to the ends outside ψ's range.
    pub fn psi_inverse(&self, y: f64) -> Result<f64> {
        if y >= self.psi(1.0) {
            return Ok(1.0);
        }
        if y <= self.psi(0.0) {
            return Ok(0.0);
        }
        find_root(|v| self.psi(v) - y, 0.0, 1.0, PSI_ROOT_TOL)
    }

    /// ψ⁻¹(0).
    pub fn v1_star(&self) -> f64 {
        self.v1_star
    }
}

fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x,
            domain: "[0, 1]",
        })
    }
}

fn check_open_unit(what: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x,
            domain: "(0, 1)",
        })
    }
}

pub fn virtual_value(prior: &dyn Prior, v1: f64) -> Result<f64> {
    check_unit("v1", v1)?;
    Ok(v1 - prior.inverse_hazard(v1))
}

/// C = 1 − (1 − q₁)F(v₂|q₁).
pub fn total_consumption(signal: &dyn SignalFamily, v2: f64, q1: f64) -> Result<f64> {
    check_unit("q1", q1)?;
    Ok(1.0 - (1.0 - q1) * signal.cdf(v2, q1))
}

/// Marginal rate of substitution M between trial size and second-stage price.
pub fn mrs(signal: &dyn SignalFamily, v2: f64, q1: f64) -> Result<f64> {
    check_open_unit("q1", q1)?;
    let f = signal.pdf(v2, q1);
    if !(f > 0.0) {
        return Err(Error::Domain {
            what: "f(v2|q1)",
            value: f,
            domain: "(0, inf)",
        });
    }
    let big_f = signal.cdf(v2, q1);
    let tilt = if v2 == 0.0 { 0.0 } else { signal.dcdf_dq1(v2, q1) / f };
    Ok(-big_f / ((1.0 - q1) * f) + tilt)
}

/// ξ = −F + (1 − q₁)∂F/∂q₁; unchecked.
pub(crate) fn xi_raw(signal: &dyn SignalFamily, v2: f64, q1: f64) -> f64 {
    -signal.cdf(v2, q1) + (1.0 - q1) * signal.dcdf_dq1(v2, q1)
}

pub fn xi(signal: &dyn SignalFamily, v2: f64, q1: f64) -> Result<f64> {
    check_open_unit("q1", q1)?;
    Ok(xi_raw(signal, v2, q1))
}

/// Buyer's expected payoff from holding trial q₁ with second-stage price p₂.
pub fn interim_payoff(signal: &dyn SignalFamily, q1: f64, p2: f64, v1: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_unit("q1", q1)?;
    check_unit("v1", v1)?;
    if !(p2 >= 0.0) {
        return Err(Error::Domain {
            what: "p2",
            value: p2,
            domain: "[0, inf)",
        });
    }
    interim_payoff_raw(signal, q1, p2, v1, spec)
}

pub(crate) fn interim_payoff_raw(
    signal: &dyn SignalFamily,
    q1: f64,
    p2: f64,
    v1: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if q1 >= 1.0 {
        return Ok(v1);
    }
    if p2 == f64::INFINITY {
        return Ok(q1 * v1);
    }
    Ok(q1 * v1 + (1.0 - q1) * signal.expected_excess(q1, p2 - v1, spec)?)
}

/// ∂w/∂v₁.
pub fn w3(signal: &dyn SignalFamily, q1: f64, p2: f64, v1: f64) -> Result<f64> {
    check_unit("q1", q1)?;
    Ok(1.0 - (1.0 - q1) * signal.cdf(p2 - v1, q1))
}

/// ∂²w/∂v₁∂q₁.
pub fn w31(signal: &dyn SignalFamily, q1: f64, p2: f64, v1: f64) -> Result<f64> {
    check_open_unit("q1", q1)?;
    Ok(-xi_raw(signal, p2 - v1, q1))
}

/// ∂²w/∂v₁∂p₂.
pub fn w32(signal: &dyn SignalFamily, q1: f64, p2: f64, v1: f64) -> Result<f64> {
    check_open_unit("q1", q1)?;
    Ok(-(1.0 - q1) * signal.pdf(p2 - v1, q1))
}
