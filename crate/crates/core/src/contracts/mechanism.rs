use std::fmt;

use super::schedule::ContractSchedule;
use crate::error::Result;

/// A direct mechanism (q₁, q₂, t) over reports (r₁, r₂).
pub trait DirectMechanism: Send + Sync + fmt::Debug {
    fn q1(&self, r1: f64) -> f64;
    fn q2(&self, r1: f64, r2: f64) -> f64;
    fn transfer(&self, r1: f64, r2: f64) -> Result<f64>;
    fn name(&self) -> String;
}

/// The direct mechanism behind a [`ContractSchedule`]: q₂ and the option
/// price switch on at r₂ = −ψ(r₁).
#[derive(Debug, Clone)]
pub struct ThresholdMechanism {
    schedule: ContractSchedule,
}

impl ThresholdMechanism {
    pub fn new(schedule: ContractSchedule) -> Self {
        Self { schedule }
    }

    pub fn schedule(&self) -> &ContractSchedule {
        &self.schedule
    }
}

impl DirectMechanism for ThresholdMechanism {
    fn q1(&self, r1: f64) -> f64 {
        self.schedule.q1(r1)
    }

    fn q2(&self, r1: f64, r2: f64) -> f64 {
        if self.schedule.exercises(r1, r2) {
            1.0 - self.schedule.q1(r1)
        } else {
            0.0
        }
    }

    fn transfer(&self, r1: f64, r2: f64) -> Result<f64> {
        self.schedule.transfer(r1, r2)
    }

    fn name(&self) -> String {
        format!("threshold[{}]", self.schedule.rule().name())
    }
}

type Q1Fn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type PairFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A mechanism given by three closures.
pub struct ClosureMechanism {
    name: String,
    q1: Q1Fn,
    q2: PairFn,
    t: PairFn,
}

impl ClosureMechanism {
    pub fn new(
        name: impl Into<String>,
        q1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        t: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            q1: Box::new(q1),
            q2: Box::new(q2),
            t: Box::new(t),
        }
    }
}

impl fmt::Debug for ClosureMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureMechanism")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

impl DirectMechanism for ClosureMechanism {
    fn q1(&self, r1: f64) -> f64 {
        (self.q1)(r1)
    }

    fn q2(&self, r1: f64, r2: f64) -> f64 {
        (self.q2)(r1, r2)
    }

    fn transfer(&self, r1: f64, r2: f64) -> Result<f64> {
        Ok((self.t)(r1, r2))
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Sells nothing and charges nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullMechanism;

impl DirectMechanism for NullMechanism {
    fn q1(&self, _r1: f64) -> f64 {
        0.0
    }

    fn q2(&self, _r1: f64, _r2: f64) -> f64 {
        0.0
    }

    fn transfer(&self, _r1: f64, _r2: f64) -> Result<f64> {
        Ok(0.0)
    }

    fn name(&self) -> String {
        "null".into()
    }
}
