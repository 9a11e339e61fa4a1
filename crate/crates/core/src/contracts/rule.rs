use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{check_sorted, interp_linear};
use crate::solver::AllocationTable;

/// A first-stage allocation q₁(·) that is zero below its participation cutoff.
pub trait FirstStageRule: Send + Sync + Debug {
    fn q1(&self, v1: f64) -> f64;
    fn cutoff(&self) -> f64;
    fn name(&self) -> String;
}

impl FirstStageRule for AllocationTable {
    fn q1(&self, v1: f64) -> f64 {
        self.q1_at(v1)
    }

    fn cutoff(&self) -> f64 {
        self.tilde_v1()
    }

    fn name(&self) -> String {
        "optimal".into()
    }
}

/// q₁(v₁) = ψ(v₁)^power for v₁ ≥ `from`, zero below.
#[derive(Debug, Clone)]
pub struct VirtualValuePower {
    model: Model,
    power: f64,
    from: f64,
}

impl VirtualValuePower {
    pub fn new(model: &Model, power: f64, from: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid("power", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&from) {
            return Err(Error::invalid("from", "must lie in [0, 1]"));
        }
        if model.psi(from) < 0.0 {
            return Err(Error::invalid(
                "from",
                "psi must be non-negative above the switch point",
            ));
        }
        Ok(Self {
            model: model.clone(),
            power,
            from,
        })
    }

    /// ψ²·1{v₁ ≥ v₁*}.
    pub fn squared(model: &Model) -> Self {
        Self {
            model: model.clone(),
            power: 2.0,
            from: model.v1_star(),
        }
    }

    pub fn power(&self) -> f64 {
        self.power
    }
}

impl FirstStageRule for VirtualValuePower {
    fn q1(&self, v1: f64) -> f64 {
        if v1 < self.from {
            return 0.0;
        }
        self.model.psi(v1).max(0.0).powf(self.power).min(1.0)
    }

    fn cutoff(&self) -> f64 {
        self.from
    }

    fn name(&self) -> String {
        format!("psi^{}", self.power)
    }
}

/// Piecewise-linear rule through tabulated points, zero below `cutoff`.
///
/// Interpolation uses every node, so nodes below the cutoff should carry
/// values that make sense as left neighbours of the first node above it.
#[derive(Debug, Clone)]
pub struct TabulatedRule {
    v1: Vec<f64>,
    q1: Vec<f64>,
    cutoff: f64,
}

impl TabulatedRule {
    pub fn new(v1: Vec<f64>, q1: Vec<f64>, cutoff: f64) -> Result<Self> {
        check_sorted(&v1)?;
        if v1.is_empty() || v1.len() != q1.len() {
            return Err(Error::invalid("q1", "needs one value per v1 node"));
        }
        if let Some(bad) = q1.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::invalid("q1", format!("{bad} is outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&cutoff) {
            return Err(Error::invalid("cutoff", "must lie in [0, 1]"));
        }
        Ok(Self { v1, q1, cutoff })
    }
}

impl FirstStageRule for TabulatedRule {
    fn q1(&self, v1: f64) -> f64 {
        if v1 < self.cutoff {
            0.0
        } else {
            interp_linear(&self.v1, &self.q1, v1)
        }
    }

    fn cutoff(&self) -> f64 {
        self.cutoff
    }

    fn name(&self) -> String {
        "tabulated".into()
    }
}
