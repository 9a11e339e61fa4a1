use serde::Serialize;

use super::schedule::{contract_payoff, Contract, ContractSchedule};
use crate::error::{Error, Result};
use crate::model::Model;

/// Consecutive differences must exceed this for a "strict" menu invariant.
pub const STRICT_TOL: f64 = 1e-10;

/// Allowed gap in p₁(ṽ₁) = q₁(ṽ₁)p₂(ṽ₁).
pub const CUTOFF_PRICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MenuEntry {
    pub v1: f64,
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
}

impl MenuEntry {
    pub fn contract(&self) -> Contract {
        Contract {
            p1: self.p1,
            q1: self.q1,
            p2: self.p2,
        }
    }

    /// p₁ + (1 − q₁)p₂, the price of buying everything.
    pub fn buyout_total(&self) -> f64 {
        self.p1 + (1.0 - self.q1) * self.p2
    }
}

/// Which line of the menu a buyer picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Null,
    Entry(usize),
}

/// One contract per grid type in [cutoff, 1] plus the null option.
#[derive(Debug, Clone)]
pub struct ContractMenu {
    entries: Vec<MenuEntry>,
    cutoff: f64,
}

impl ContractMenu {
    pub fn entries(&self) -> &[MenuEntry] {
        &self.entries
    }

    pub fn null_entry(&self) -> Contract {
        Contract::null()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Utility-maximizing line for type v₁ by full scan. The null option wins
    /// ties, then the earliest entry.
    pub fn best_response(&self, model: &Model, v1: f64) -> Result<(Selection, f64)> {
        let mut best = (Selection::Null, 0.0);
        for (i, e) in self.entries.iter().enumerate() {
            let u = contract_payoff(model, &e.contract(), v1)?;
            if u > best.1 {
                best = (Selection::Entry(i), u);
            }
        }
        Ok(best)
    }

    pub fn contract(&self, s: Selection) -> Contract {
        match s {
            Selection::Null => Contract::null(),
            Selection::Entry(i) => self.entries[i].contract(),
        }
    }
}

/// Builds the menu on the schedule's grid and checks the payment
/// monotonicity suite on every adjacent pair of nodes.
pub fn build_menu(schedule: &ContractSchedule) -> Result<ContractMenu> {
    let grid = schedule.grid();
    let k0 = schedule.cutoff_index();
    let contracts = grid.iter().map(|&v| schedule.contract(v)).collect::<Result<Vec<_>>>()?;
    let payments = grid
        .iter()
        .map(|&v| schedule.expected_payment(v))
        .collect::<Result<Vec<_>>>()?;

    let last = grid.len() - 1;
    if contracts[last].p2.abs() > 1e-12 {
        return Err(violation("p2(1) = 0", grid[last], grid[last]));
    }
    for i in 0..last {
        let (a, b) = (&contracts[i], &contracts[i + 1]);
        if !(a.p2 - b.p2 > STRICT_TOL) {
            return Err(violation("p2 strictly decreasing", grid[i], grid[i + 1]));
        }
        let buyout = |c: &Contract| c.p1 + (1.0 - c.q1) * c.p2;
        if !(buyout(a) - buyout(b) > STRICT_TOL) {
            return Err(violation("buyout total strictly decreasing", grid[i], grid[i + 1]));
        }
        if i < k0 && payments[i] != 0.0 {
            return Err(violation("expected payment zero below cutoff", grid[i], grid[i]));
        }
        if i >= k0 {
            if !(b.p1 - a.p1 > STRICT_TOL) {
                return Err(violation("p1 strictly increasing", grid[i], grid[i + 1]));
            }
            if !(payments[i + 1] - payments[i] > STRICT_TOL) {
                return Err(violation("expected payment strictly increasing", grid[i], grid[i + 1]));
            }
        }
    }
    let c = &contracts[k0];
    if c.p1 < -CUTOFF_PRICE_TOL || (c.p1 - c.q1 * c.p2).abs() > CUTOFF_PRICE_TOL {
        return Err(violation("p1 at cutoff equals q1 p2", grid[k0], grid[k0]));
    }

    let entries = grid[k0..]
        .iter()
        .zip(&contracts[k0..])
        .map(|(&v1, c)| MenuEntry {
            v1,
            p1: c.p1,
            q1: c.q1,
            p2: c.p2,
        })
        .collect();
    Ok(ContractMenu {
        entries,
        cutoff: schedule.cutoff(),
    })
}

fn violation(invariant: &'static str, v1_a: f64, v1_b: f64) -> Error {
    Error::MenuInvariant { invariant, v1_a, v1_b }
}
