use std::sync::{Arc, OnceLock};

use contract_forge::contracts::{build_menu, ContractMenu, ContractSchedule};
use contract_forge::model::{
    w3, w31, w32, xi, Beta, Logistic, Model, Normal, Prior, SignalFamily, TruthOrNoise, Uniform,
};
use contract_forge::numerics::{GridSpec, QuadratureSpec};
use contract_forge::simulate::simulate_menu;
use contract_forge::solver::{solve_allocation, DEFAULT_TOL};
use contract_forge::verify::{delta, integral_by_parts_check, IC_TOL_REL};
use proptest::prelude::*;

struct Solved {
    schedule: ContractSchedule,
    menu: ContractMenu,
    ic_tol: f64,
}

fn solved() -> &'static Solved {
    static S: OnceLock<Solved> = OnceLock::new();
    S.get_or_init(|| {
        let model = Model::uniform_normal();
        let alloc = solve_allocation(&model, &GridSpec::default(), DEFAULT_TOL).unwrap();
        let schedule = ContractSchedule::optimal(&model, &alloc).unwrap();
        let menu = build_menu(&schedule).unwrap();
        let max_u = schedule
            .grid()
            .iter()
            .map(|&v| schedule.utility(v).abs())
            .fold(0.0, f64::max);
        Solved {
            schedule,
            menu,
            ic_tol: IC_TOL_REL * max_u,
        }
    })
}

fn logistic() -> Arc<dyn SignalFamily> {
    Arc::new(TruthOrNoise::new(Logistic::new(1.0).unwrap()))
}

fn signals() -> Vec<Arc<dyn SignalFamily>> {
    vec![Arc::new(TruthOrNoise::new(Normal::standard())), logistic()]
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn no_misreport_gains(v in 0.0..=1.0f64, r in 0.0..=1.0f64) {
        let s = solved();
        let d = delta(&s.schedule, v, r).unwrap();
        prop_assert!(d >= -s.ic_tol, "delta({v}, {r}) = {d}");
    }

    #[test]
    fn truthful_utility_is_nondecreasing(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let s = &solved().schedule;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(s.payoff(hi, hi).unwrap() >= s.payoff(lo, lo).unwrap() - 1e-12);
    }

    #[test]
    fn marginal_payoff_bounds(q in 0.01..0.99f64, p2 in 0.0..2.0f64, v in 0.0..=1.0f64, which in 0usize..2) {
        let signal = &signals()[which];
        let d = w3(signal.as_ref(), q, p2, v).unwrap();
        prop_assert!(d >= q - 1e-12 && d <= 1.0, "w3 = {d}");
        prop_assert!(w32(signal.as_ref(), q, p2, v).unwrap() <= 0.0);
        prop_assert_eq!(w31(signal.as_ref(), q, p2, v).unwrap(), -xi(signal.as_ref(), p2 - v, q).unwrap());
    }

    #[test]
    fn cdf_derivative_matches_differences(v2 in -5.0..5.0f64, q in 0.05..0.95f64, which in 0usize..2) {
        let signal = &signals()[which];
        let h = 1e-6;
        let fd = (signal.cdf(v2, q + h) - signal.cdf(v2, q - h)) / (2.0 * h);
        prop_assert!((fd - signal.dcdf_dq1(v2, q)).abs() < 1e-6);
        // More consumption spreads the estimate out around zero.
        prop_assert!(signal.dcdf_dq1(v2, q) * v2 <= 0.0);
    }

    #[test]
    fn integration_by_parts_holds(a in -6.0..6.0f64, q in 0.01..=1.0f64, which in 0usize..2) {
        let signal = &signals()[which];
        let r = integral_by_parts_check(signal.as_ref(), a, q, &QuadratureSpec::default()).unwrap();
        prop_assert!(r <= 1e-7, "residual {r}");
    }

    #[test]
    fn virtual_value_inverts(v in 0.0..=1.0f64, alpha in 1.0..4.0f64, beta in 1.0..4.0f64) {
        let priors: [Arc<dyn Prior>; 2] = [Arc::new(Uniform), Arc::new(Beta::new(alpha, beta).unwrap())];
        for prior in priors {
            let m = Model::new(prior, logistic(), QuadratureSpec::default()).unwrap();
            let back = m.psi_inverse(m.psi(v)).unwrap();
            prop_assert!((back - v).abs() < 1e-8, "{} at {v}: {back}", m.prior().name());
        }
    }
}

proptest! {
    #![proptest_config(config(8))]

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>()) {
        let s = solved();
        let a = simulate_menu(s.schedule.model(), &s.menu, 5_000, seed).unwrap();
        let b = simulate_menu(s.schedule.model(), &s.menu, 5_000, seed).unwrap();
        prop_assert_eq!(a.result, b.result);
    }
}
