//! Optimal payments, the try-and-decide menu and direct mechanisms.

mod mechanism;
mod menu;
mod rule;
mod schedule;

pub use mechanism::{ClosureMechanism, DirectMechanism, NullMechanism, ThresholdMechanism};
pub use menu::{build_menu, ContractMenu, MenuEntry, Selection, CUTOFF_PRICE_TOL, STRICT_TOL};
pub use rule::{FirstStageRule, TabulatedRule, VirtualValuePower};
pub use schedule::{contract_payoff, Contract, ContractSchedule};

use crate::error::Result;
use crate::model::{Model, Prior};
use crate::numerics::integrate_cells;
use crate::solver::profit_at_psi;

/// p₂*(v₁) = (1 − G(v₁))/g(v₁).
pub fn p2_star(prior: &dyn Prior, v1: f64) -> f64 {
    prior.inverse_hazard(v1)
}

pub fn p1_star(schedule: &ContractSchedule, v1: f64) -> Result<f64> {
    schedule.p1(v1)
}

pub fn t_star(schedule: &ContractSchedule, v1: f64, v2: f64) -> Result<f64> {
    schedule.transfer(v1, v2)
}

pub fn expected_payment(schedule: &ContractSchedule, v1: f64) -> Result<f64> {
    schedule.expected_payment(v1)
}

/// U(v₁, r₁) for the menu line `entry`.
pub fn buyer_utility(model: &Model, entry: &MenuEntry, v1: f64) -> Result<f64> {
    contract_payoff(model, &entry.contract(), v1)
}

/// Ex ante revenue ∫ Π(q₁(v₁), v₁) g(v₁) dv₁, one Gauss–Kronrod integral per
/// grid cell above the cutoff. Types below the cutoff contribute nothing.
pub fn revenue(schedule: &ContractSchedule) -> Result<f64> {
    let model = schedule.model();
    integrate_cells(
        |v| {
            let q = schedule.q1(v);
            profit_at_psi(model.signal(), q, model.psi(v), model.quadrature()).unwrap_or(f64::NAN)
                * model.prior().pdf(v)
        },
        schedule.participating_grid(),
        model.quadrature(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Beta, Uniform};
    use crate::numerics::{integrate, GridSpec};
    use crate::solver::{first_best, social_surplus, solve_allocation, AllocationTable, DEFAULT_TOL};
    use std::sync::{Arc, OnceLock};

    struct Fixture {
        model: Model,
        alloc: AllocationTable,
        schedule: ContractSchedule,
    }

    fn fx() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let model = Model::uniform_normal();
            let alloc = solve_allocation(&model, &GridSpec::default(), DEFAULT_TOL).unwrap();
            let schedule = ContractSchedule::optimal(&model, &alloc).unwrap();
            Fixture { model, alloc, schedule }
        })
    }

    #[test]
    fn p2_examples() {
        assert_eq!(p2_star(&Uniform, 0.5), 0.5);
        assert_eq!(p2_star(&Uniform, 1.0), 0.0);
        // Beta(2, 2): G(½) = ½, g(½) = 6·¼.
        let b = Beta::new(2.0, 2.0).unwrap();
        assert!((p2_star(&b, 0.5) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn p1_examples() {
        let f = fx();
        let s = &f.schedule;
        let tilde = f.alloc.tilde_v1();
        assert_eq!(p1_star(s, 0.2).unwrap(), 0.0);
        assert_eq!(p1_star(s, tilde - 1e-9).unwrap(), 0.0);
        let at = p1_star(s, tilde).unwrap();
        let expect = f.alloc.q1_at_tilde_plus() * (1.0 - tilde);
        assert!((at - expect).abs() < 1e-9, "{at} vs {expect}");
        let (a, b) = (p1_star(s, 0.6).unwrap(), p1_star(s, 0.7).unwrap());
        assert!(a > 0.0 && b > a);
    }

    #[test]
    fn t_star_examples() {
        let f = fx();
        let s = &f.schedule;
        assert_eq!(t_star(s, 0.3, 0.0).unwrap(), 0.0);
        let p1 = p1_star(s, 1.0).unwrap();
        for v2 in [-1.0, 0.0, 2.0] {
            assert_eq!(t_star(s, 1.0, v2).unwrap(), p1);
        }
        for v1 in [0.45, 0.6, 0.8] {
            let th = -f.model.psi(v1);
            let jump = t_star(s, v1, th).unwrap() - t_star(s, v1, th - 1e-9).unwrap();
            let c = s.contract(v1).unwrap();
            assert!((jump - (1.0 - c.q1) * c.p2).abs() < 1e-15);
        }
    }

    #[test]
    fn menu_structure() {
        let f = fx();
        let menu = build_menu(&f.schedule).unwrap();
        let tilde = f.alloc.tilde_v1();
        let n_above = f.alloc.v1_grid().iter().filter(|&&v| v >= tilde).count();
        assert_eq!(menu.len(), n_above);
        assert_eq!(menu.entries()[0].v1, tilde);
        for e in menu.entries() {
            assert_eq!(e.p2, 1.0 - e.v1);
        }
        assert!(menu
            .entries()
            .windows(2)
            .all(|w| w[1].buyout_total() < w[0].buyout_total()));
        assert!(menu.null_entry().is_null());
    }

    #[test]
    fn payments_and_utility() {
        let f = fx();
        let s = &f.schedule;
        let tilde = f.alloc.tilde_v1();
        assert_eq!(s.utility(0.0), 0.0);
        assert_eq!(s.payoff(0.0, 0.0).unwrap(), 0.0);
        let mut prev = f64::NEG_INFINITY;
        for &v in s.grid() {
            let env = s.utility(v);
            let direct = s.payoff(v, v).unwrap();
            assert!((env - direct).abs() < 1e-5, "v = {v}: {env} vs {direct}");
            assert!(env >= -1e-9 && env >= prev - 1e-15);
            prev = env;
            if v < tilde {
                assert!(env.abs() < 1e-15);
                assert_eq!(expected_payment(s, v).unwrap(), 0.0);
            }
        }
        assert_eq!(expected_payment(s, 1.0).unwrap(), p1_star(s, 1.0).unwrap());
        for &v in s.grid() {
            for v2 in [-1.5, -0.3, -0.05, 0.0, 0.2, 1.0] {
                let c = s.contract(v).unwrap();
                let buy = f.model.psi(v) + v2 >= 0.0;
                let want = c.p1 + if buy { (1.0 - c.q1) * c.p2 } else { 0.0 };
                assert_eq!(t_star(s, v, v2).unwrap(), want);
            }
        }
    }

    #[test]
    fn menu_entries_match_schedule_payoffs() {
        let f = fx();
        let menu = build_menu(&f.schedule).unwrap();
        let e = menu.entries()[40];
        for v in [0.1, 0.5, 0.9] {
            let u = buyer_utility(&f.model, &e, v).unwrap();
            assert_eq!(u, f.schedule.payoff(v, e.v1).unwrap());
        }
    }

    #[test]
    fn revenue_bounds_and_accounting() {
        let f = fx();
        let r = revenue(&f.schedule).unwrap();
        // Selling nothing up front earns ∫_{½}^{1} (2v − 1) dv = ¼.
        let zero = TabulatedRule::new(vec![0.0, 1.0], vec![0.0, 0.0], f.model.v1_star()).unwrap();
        let s0 = ContractSchedule::new(&f.model, Arc::new(zero), f.alloc.v1_grid()).unwrap();
        let r0 = revenue(&s0).unwrap();
        assert!((r0 - 0.25).abs() < 1e-10, "{r0}");
        assert!(r > r0);

        let fb = first_best(&f.model, &f.alloc, &GridSpec::default(), DEFAULT_TOL).unwrap();
        let surplus = social_surplus(&f.model, &fb).unwrap();
        assert!(r < surplus, "{r} vs {surplus}");

        let spec = f.model.quadrature();
        let paid = integrate_cells(
            |v| f.schedule.expected_payment(v).unwrap() * f.model.prior().pdf(v),
            f.schedule.participating_grid(),
            spec,
        )
        .unwrap();
        assert!((paid - r).abs() < 1e-5, "{paid} vs {r}");
        let direct = integrate(|v| f.model.psi(v), 0.5, 1.0, spec).unwrap();
        assert!((direct - r0).abs() < 1e-12);
    }

    #[test]
    fn constant_strike_keeps_p1() {
        let f = fx();
        let s = f.schedule.clone().with_constant_p2(0.3);
        assert_eq!(s.p1(0.7).unwrap(), f.schedule.p1(0.7).unwrap());
        assert_eq!(s.contract(0.7).unwrap().p2, 0.3);
        assert_eq!(s.contract(0.2).unwrap().p2, 0.8);
    }

    #[test]
    fn threshold_mechanism_matches_schedule() {
        let f = fx();
        let m = ThresholdMechanism::new(f.schedule.clone());
        let v1 = 0.7;
        let th = -f.model.psi(v1);
        assert_eq!(m.q2(v1, th), 1.0 - m.q1(v1));
        assert_eq!(m.q2(v1, th - 1e-12), 0.0);
        assert_eq!(m.transfer(v1, 0.5).unwrap(), t_star(&f.schedule, v1, 0.5).unwrap());
        assert_eq!(NullMechanism.transfer(0.3, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn squared_rule_shape() {
        let m = &fx().model;
        let r = VirtualValuePower::squared(m);
        assert_eq!(r.cutoff(), 0.5);
        assert_eq!(r.q1(0.49), 0.0);
        assert_eq!(r.q1(0.5), 0.0);
        assert!((r.q1(0.75) - 0.25).abs() < 1e-15);
        assert_eq!(r.q1(1.0), 1.0);
    }
}
