use std::sync::Arc;

use serde::Serialize;

use super::rule::FirstStageRule;
use crate::error::{Error, Result};
use crate::model::{interim_payoff_raw, Model};
use crate::numerics::{check_sorted, cumulative_integral, one_sided_offset};
use crate::solver::AllocationTable;

/// A try-and-decide contract (p₁, q₁; p₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contract {
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
}

impl Contract {
    /// Non-participation: nothing consumed, nothing paid, no option.
    pub fn null() -> Self {
        Self {
            p1: 0.0,
            q1: 0.0,
            p2: f64::INFINITY,
        }
    }

    pub fn is_null(&self) -> bool {
        self.p1 == 0.0 && self.q1 == 0.0 && self.p2 == f64::INFINITY
    }
}

/// Envelope-implemented payments for a first-stage rule with the threshold
/// second stage q₂ = (1 − q₁)·1{ψ(v₁) + v₂ ≥ 0}.
///
/// The cumulative term ∫₀^{v₁}(1 − q₁(x))F(−ψ(x)|q₁(x))dx is accumulated by
/// trapezoids on `grid` with the rule's cutoff as an exact node.
#[derive(Debug, Clone)]
pub struct ContractSchedule {
    model: Model,
    rule: Arc<dyn FirstStageRule>,
    grid: Vec<f64>,
    cutoff_index: usize,
    ci: Vec<f64>,
    p2_override: Option<f64>,
}

impl ContractSchedule {
    pub fn new(model: &Model, rule: Arc<dyn FirstStageRule>, grid: &[f64]) -> Result<Self> {
        check_sorted(grid)?;
        if grid.first() != Some(&0.0) || grid.last() != Some(&1.0) {
            return Err(Error::invalid("grid", "must run from 0 to 1"));
        }
        let cutoff = rule.cutoff();
        let mut grid = grid.to_vec();
        if !grid.contains(&cutoff) {
            grid.push(cutoff);
            grid.sort_by(f64::total_cmp);
        }
        let cutoff_index = grid.iter().position(|&v| v == cutoff).expect("cutoff inserted");
        let mut out = Self {
            model: model.clone(),
            rule,
            grid,
            cutoff_index,
            ci: Vec::new(),
            p2_override: None,
        };
        let ci = cumulative_integral(|x| out.integrand(x), &out.grid, cutoff)?;
        out.ci = ci;
        Ok(out)
    }

    pub fn optimal(model: &Model, alloc: &AllocationTable) -> Result<Self> {
        Self::new(model, Arc::new(alloc.clone()), alloc.v1_grid())
    }

    /// Same trial sizes and p₁, but every participating contract carries the
    /// strike `p2` instead of the inverse hazard.
    pub fn with_constant_p2(mut self, p2: f64) -> Self {
        self.p2_override = Some(p2);
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn rule(&self) -> &dyn FirstStageRule {
        &*self.rule
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cutoff(&self) -> f64 {
        self.grid[self.cutoff_index]
    }

    pub fn cutoff_index(&self) -> usize {
        self.cutoff_index
    }

    /// Grid nodes at or above the cutoff.
    pub fn participating_grid(&self) -> &[f64] {
        &self.grid[self.cutoff_index..]
    }

    /// (1 − q₁(x))F(−ψ(x)|q₁(x)), the slope deficit of U(x, x).
    pub fn integrand(&self, x: f64) -> f64 {
        let q = self.rule.q1(x);
        (1.0 - q) * self.model.signal().cdf(-self.model.psi(x), q)
    }

    /// ∫₀^{v₁} of [`Self::integrand`], exact on grid nodes and completed by a
    /// partial trapezoid between them.
    pub fn consumption_integral(&self, v1: f64) -> f64 {
        let v = v1.clamp(0.0, 1.0);
        let k = self.grid.partition_point(|&x| x <= v) - 1;
        let xk = self.grid[k];
        if v == xk {
            return self.ci[k];
        }
        let yk = if k == self.cutoff_index {
            self.integrand(xk + one_sided_offset(xk))
        } else {
            self.integrand(xk)
        };
        self.ci[k] + 0.5 * (v - xk) * (yk + self.integrand(v))
    }

    pub fn q1(&self, v1: f64) -> f64 {
        self.rule.q1(v1)
    }

    /// p₂*(v₁) = (1 − G(v₁))/g(v₁).
    pub fn p2(&self, v1: f64) -> f64 {
        self.model.prior().inverse_hazard(v1)
    }

    /// p₁ = (1 − q₁)[∫_{−∞}^{−ψ}F dv₂ − p₂*] + ∫₀^{v₁}(1 − q₁)F(−ψ|q₁)dx; zero below the cutoff.
    pub fn p1(&self, v1: f64) -> Result<f64> {
        check_unit(v1)?;
        if v1 < self.cutoff() {
            return Ok(0.0);
        }
        let q = self.q1(v1);
        let p2 = self.p2(v1);
        let option = if q >= 1.0 {
            0.0
        } else {
            (1.0 - q)
                * (self
                    .model
                    .signal()
                    .integral_of_cdf(q, -self.model.psi(v1), self.model.quadrature())?
                    - p2)
        };
        Ok(option + self.consumption_integral(v1))
    }

    /// The contract assigned to report r₁. Reports below the cutoff receive
    /// (0, 0; p₂*(r₁)), which the threshold rule never exercises on path.
    pub fn contract(&self, r1: f64) -> Result<Contract> {
        check_unit(r1)?;
        if r1 < self.cutoff() {
            return Ok(Contract {
                p1: 0.0,
                q1: 0.0,
                p2: self.p2(r1),
            });
        }
        Ok(Contract {
            p1: self.p1(r1)?,
            q1: self.q1(r1),
            p2: self.p2_override.unwrap_or_else(|| self.p2(r1)),
        })
    }

    /// Envelope form U(v₁, v₁) = v₁ − ∫₀^{v₁}(1 − q₁)F(−ψ|q₁)dx.
    pub fn utility(&self, v1: f64) -> f64 {
        v1 - self.consumption_integral(v1)
    }

    /// U(v₁, r₁) = w(q₁(r₁), p₂(r₁), v₁) − p₁(r₁).
    pub fn payoff(&self, v1: f64, r1: f64) -> Result<f64> {
        let c = self.contract(r1)?;
        contract_payoff(&self.model, &c, v1)
    }

    /// p₁ + (1 − q₁)p₂(1 − F(−ψ|q₁)); zero below the cutoff.
    pub fn expected_payment(&self, v1: f64) -> Result<f64> {
        check_unit(v1)?;
        if v1 < self.cutoff() {
            return Ok(0.0);
        }
        let c = self.contract(v1)?;
        let buy = 1.0 - self.model.signal().cdf(c.p2 - v1, c.q1);
        Ok(c.p1 + (1.0 - c.q1) * c.p2 * buy)
    }

    /// Whether type v₁ exercises the option after observing v₂.
    pub fn exercises(&self, v1: f64, v2: f64) -> bool {
        self.model.psi(v1) + v2 >= 0.0
    }

    /// t(v₁, v₂) = p₁ + (1 − q₁)p₂·1{ψ(v₁) + v₂ ≥ 0}.
    pub fn transfer(&self, v1: f64, v2: f64) -> Result<f64> {
        let c = self.contract(v1)?;
        if self.exercises(v1, v2) && c.q1 < 1.0 {
            Ok(c.p1 + (1.0 - c.q1) * c.p2)
        } else {
            Ok(c.p1)
        }
    }
}

/// Interim payoff of type v₁ holding contract `c`.
pub fn contract_payoff(model: &Model, c: &Contract, v1: f64) -> Result<f64> {
    Ok(interim_payoff_raw(model.signal(), c.q1, c.p2, v1, model.quadrature())? - c.p1)
}

fn check_unit(v1: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v1) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "v1",
            value: v1,
            domain: "[0, 1]",
        })
    }
}
