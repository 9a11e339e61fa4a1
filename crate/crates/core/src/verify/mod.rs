//! Incentive-compatibility verification and identity checks.

mod counterexample;

pub use counterexample::{counterexample_mechanism, counterexample_schedule, fixed_threshold_delta, phi_hat};

use std::cell::RefCell;

use rayon::prelude::*;
use serde::Serialize;

use crate::contracts::{contract_payoff, ContractSchedule, DirectMechanism, ThresholdMechanism};
use crate::error::{Error, Result};
use crate::model::SignalFamily;
use crate::numerics::{integrate_cells, linspace, QuadratureSpec};

/// Relative IC tolerance; the absolute tolerance is this times max |U(v₁, v₁)|.
pub const IC_TOL_REL: f64 = 1e-6;

/// Step for the centered differences of q₁ and p₂.
const DERIVATIVE_STEP: f64 = 1e-7;

/// Global IC over a square (v₁, r₁) lattice on [0, 1].
#[derive(Debug, Clone, Serialize)]
pub struct ICReport {
    pub lattice: Vec<f64>,
    /// `delta[i][j]` = Δ(lattice[i], lattice[j]).
    pub delta: Vec<Vec<f64>>,
    pub min_delta: f64,
    pub argmin: (f64, f64),
    pub ic_tol: f64,
    pub max_abs_utility: f64,
    pub pass: bool,
    pub second_stage_ok: bool,
    pub envelope_max_err: f64,
}

/// Δ(v₁, r₁) = U(v₁, v₁) − U(v₁, r₁).
pub fn delta(schedule: &ContractSchedule, v1: f64, r1: f64) -> Result<f64> {
    Ok(schedule.payoff(v1, v1)? - schedule.payoff(v1, r1)?)
}

pub fn verify_global_ic(schedule: &ContractSchedule, lattice_n: usize, rel_tol: f64) -> Result<ICReport> {
    if lattice_n < 2 {
        return Err(Error::invalid("lattice_n", "must be at least 2"));
    }
    let model = schedule.model();
    let lattice = linspace(0.0, 1.0, lattice_n);
    let contracts = lattice
        .iter()
        .map(|&r| schedule.contract(r))
        .collect::<Result<Vec<_>>>()?;
    let payoffs = lattice
        .par_iter()
        .map(|&v| {
            contracts
                .iter()
                .map(|c| contract_payoff(model, c, v))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let delta: Vec<Vec<f64>> = payoffs
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|u| row[i] - u).collect())
        .collect();
    let max_abs_utility = (0..lattice_n).map(|i| payoffs[i][i].abs()).fold(0.0, f64::max);
    let ic_tol = rel_tol * max_abs_utility;

    let mut min_delta = f64::INFINITY;
    let mut argmin = (f64::NAN, f64::NAN);
    for (i, row) in delta.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            if d < min_delta {
                min_delta = d;
                argmin = (lattice[i], lattice[j]);
            }
        }
    }
    let second_stage_ok = verify_second_stage(
        &ThresholdMechanism::new(schedule.clone()),
        &SecondStageLattice::default(),
    )?
    .ok();
    let envelope_max_err = envelope_check(schedule)?;
    Ok(ICReport {
        lattice,
        delta,
        min_delta,
        argmin,
        ic_tol,
        max_abs_utility,
        pass: min_delta >= -ic_tol,
        second_stage_ok,
        envelope_max_err,
    })
}

/// Runs `f` inside a quadrature callback, parking the first error.
fn guarded<'a>(slot: &'a RefCell<Option<Error>>, f: impl Fn(f64) -> Result<f64> + 'a) -> impl Fn(f64) -> f64 + 'a {
    move |x| match f(x) {
        Ok(y) => y,
        Err(e) => {
            slot.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    }
}

fn centered_difference(f: impl Fn(f64) -> f64, x: f64, lo: f64, hi: f64) -> f64 {
    let a = (x - DERIVATIVE_STEP).max(lo);
    let b = (x + DERIVATIVE_STEP).min(hi);
    (f(b) - f(a)) / (b - a)
}

/// Ξ(y) = −∫_{−∞}^{y}F + (1 − q₁)∫_{−∞}^{y}∂F/∂q₁, an antiderivative of ξ.
fn xi_antiderivative(signal: &dyn SignalFamily, q1: f64, y: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(-signal.integral_of_cdf(q1, y, spec)? + (1.0 - q1) * signal.integral_of_dcdf_dq1(q1, y, spec)?)
}

/// ∫_{−ψ(x)}^{x − v₁ − ψ(x)} ξ(y, q₁(x)) dy, which equals ∫_x^{v₁} w₃₁ ds.
pub fn inner_xi_integral(schedule: &ContractSchedule, v1: f64, x: f64) -> Result<f64> {
    let model = schedule.model();
    let spec = model.quadrature();
    let q = schedule.q1(x);
    let a = -model.psi(x);
    let b = x - v1 + a;
    Ok(xi_antiderivative(model.signal(), q, b, spec)? - xi_antiderivative(model.signal(), q, a, spec)?)
}

/// The double-integral form ∫_{r₁}^{v₁}∫_x^{v₁}[w₃₁q₁′(x) + w₃₂p₂′(x)] ds dx.
/// Both types must lie on the same side of the cutoff.
pub fn delta_double_integral(schedule: &ContractSchedule, v1: f64, r1: f64) -> Result<f64> {
    let cutoff = schedule.cutoff();
    if (v1 < cutoff) != (r1 < cutoff) {
        return Err(Error::Domain {
            what: "r1",
            value: r1,
            domain: "same side of the cutoff as v1",
        });
    }
    if v1 == r1 {
        return Ok(0.0);
    }
    let model = schedule.model();
    let signal = model.signal();
    let spec = model.quadrature();
    let (side_lo, side_hi) = if v1 >= cutoff { (cutoff, 1.0) } else { (0.0, cutoff) };

    let inner = |x: f64| -> Result<f64> {
        let q = schedule.q1(x);
        let dq = centered_difference(|y| schedule.q1(y), x, side_lo, side_hi);
        let dp2 = centered_difference(|y| schedule.p2(y), x, side_lo, side_hi);
        let a = schedule.p2(x) - x;
        let b = schedule.p2(x) - v1;
        let mut out = -dp2 * (1.0 - q) * (signal.cdf(a, q) - signal.cdf(b, q));
        if dq != 0.0 {
            out += dq * (xi_antiderivative(signal, q, b, spec)? - xi_antiderivative(signal, q, a, spec)?);
        }
        Ok(out)
    };

    let (lo, hi, sign) = if r1 < v1 { (r1, v1, 1.0) } else { (v1, r1, -1.0) };
    let mut nodes = vec![lo];
    nodes.extend(schedule.grid().iter().copied().filter(|&g| g > lo && g < hi));
    nodes.push(hi);
    let slot = RefCell::new(None);
    let value = integrate_cells(guarded(&slot, inner), &nodes, spec);
    if let Some(e) = slot.into_inner() {
        return Err(e);
    }
    Ok(sign * value?)
}

/// r₂ = v₁ + v₂ − r₁: the second-stage report that restores the true
/// posterior value after a first-stage lie.
pub fn misreport_followup(v1: f64, r1: f64, v2: f64) -> f64 {
    v1 + v2 - r1
}

/// Lattice for second-stage checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondStageLattice {
    pub n_v1: usize,
    pub n_v2: usize,
    pub v2_lo: f64,
    pub v2_hi: f64,
}

impl Default for SecondStageLattice {
    fn default() -> Self {
        Self {
            n_v1: 101,
            n_v2: 801,
            v2_lo: -4.0,
            v2_hi: 4.0,
        }
    }
}

/// Report beyond this magnitude realizes the "always" or "never" outcome.
const EXTREME_REPORT: f64 = 1e6;

#[derive(Debug, Clone, Serialize)]
pub struct SecondStageReport {
    pub monotone_ok: bool,
    pub envelope_max_err: f64,
    pub envelope_tol: f64,
    /// Largest distance between the buy/no-buy best-response switch and the
    /// switch of q₂, in v₂ units.
    pub threshold_max_gap: f64,
    pub threshold_tol: f64,
    pub witness: Option<(f64, f64)>,
}

impl SecondStageReport {
    pub fn ok(&self) -> bool {
        self.monotone_ok && self.envelope_max_err <= self.envelope_tol && self.threshold_max_gap <= self.threshold_tol
    }
}

/// Second-stage payoff of (v₁, v₂) reporting r₂ after a truthful r₁ = v₁,
/// net of first-stage consumption.
fn stage2_payoff(mech: &dyn DirectMechanism, v1: f64, v2: f64, r2: f64) -> Result<f64> {
    Ok((v1 + v2) * mech.q2(v1, r2) - mech.transfer(v1, r2)?)
}

/// Per-row result: monotone, envelope error, threshold gap, first non-monotone cell.
type RowCheck = (bool, f64, f64, Option<(f64, f64)>);

/// Monotonicity of q₂ in v₂, the second-stage envelope identity and the
/// location of the buy/no-buy switch.
pub fn verify_second_stage(mech: &dyn DirectMechanism, lattice: &SecondStageLattice) -> Result<SecondStageReport> {
    let v1s = linspace(0.0, 1.0, lattice.n_v1);
    let v2s = linspace(lattice.v2_lo, lattice.v2_hi, lattice.n_v2);
    let h = (lattice.v2_hi - lattice.v2_lo) / (lattice.n_v2 - 1) as f64;

    let rows = v1s
        .par_iter()
        .map(|&v1| -> Result<RowCheck> {
            let q2: Vec<f64> = v2s.iter().map(|&v2| mech.q2(v1, v2)).collect();
            let mut witness = None;
            for k in 1..q2.len() {
                if q2[k] < q2[k - 1] {
                    witness.get_or_insert((v1, v2s[k]));
                }
            }
            let pi = v2s
                .iter()
                .map(|&v2| stage2_payoff(mech, v1, v2, v2))
                .collect::<Result<Vec<f64>>>()?;
            let mut cum = 0.0;
            let mut env_err: f64 = 0.0;
            for k in 1..v2s.len() {
                cum += 0.5 * h * (q2[k] + q2[k - 1]);
                env_err = env_err.max((pi[k] - pi[0] - cum).abs());
            }

            let alloc_switch = v2s.iter().zip(&q2).find(|(_, &q)| q > 0.0).map(|(&v2, _)| v2);
            let mut buy_switch = None;
            if mech.q2(v1, EXTREME_REPORT) != mech.q2(v1, -EXTREME_REPORT) {
                for &v2 in &v2s {
                    let buy = stage2_payoff(mech, v1, v2, EXTREME_REPORT)?;
                    let skip = stage2_payoff(mech, v1, v2, -EXTREME_REPORT)?;
                    if buy >= skip {
                        buy_switch = Some(v2);
                        break;
                    }
                }
            }
            let gap = match (alloc_switch, buy_switch) {
                (Some(a), Some(b)) => (a - b).abs(),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            };
            Ok((witness.is_none(), env_err, gap, witness))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = SecondStageReport {
        monotone_ok: true,
        envelope_max_err: 0.0,
        envelope_tol: h,
        threshold_max_gap: 0.0,
        threshold_tol: h * (1.0 + 1e-9),
        witness: None,
    };
    for (mono, env, gap, witness) in rows {
        report.monotone_ok &= mono;
        report.envelope_max_err = report.envelope_max_err.max(env);
        report.threshold_max_gap = report.threshold_max_gap.max(gap);
        if report.witness.is_none() {
            report.witness = witness;
        }
    }
    Ok(report)
}

/// |∫_{−∞}^{a} v₂ f dv₂ − [aF(a) − ∫_{−∞}^{a} F dv₂]|.
pub fn integral_by_parts_check(signal: &dyn SignalFamily, a: f64, q1: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(q1 > 0.0) {
        return Err(Error::Domain {
            what: "q1",
            value: q1,
            domain: "(0, 1]",
        });
    }
    let lhs = signal.expectation(q1, f64::NEG_INFINITY, a, &|v2| v2, spec)?;
    let rhs = if a == f64::INFINITY {
        0.0
    } else {
        a * signal.cdf(a, q1) - signal.integral_of_cdf(q1, a, spec)?
    };
    Ok((lhs - rhs).abs())
}

/// Largest gap between a centered difference of U(v₁, v₁) and
/// 1 − (1 − q₁)F(−ψ|q₁) over grid nodes whose stencil stays on one side of
/// the cutoff.
pub fn envelope_check(schedule: &ContractSchedule) -> Result<f64> {
    let grid = schedule.grid();
    let cutoff = schedule.cutoff();
    let u = grid
        .iter()
        .map(|&v| schedule.payoff(v, v))
        .collect::<Result<Vec<f64>>>()?;
    let mut worst: f64 = 0.0;
    for i in 1..grid.len() - 1 {
        let (a, b) = (grid[i - 1], grid[i + 1]);
        if a < cutoff && cutoff <= b {
            continue;
        }
        let fd = (u[i + 1] - u[i - 1]) / (b - a);
        worst = worst.max((fd - (1.0 - schedule.integrand(grid[i]))).abs());
    }
    Ok(worst)
}
