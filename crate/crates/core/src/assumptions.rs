//! Lattice certification of the standing assumptions on the prior and the
//! signal family.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Model, Prior, SignalFamily};
use crate::numerics::linspace;

const MAX_WITNESSES: usize = 32;
// Relative slack for monotonicity of the hazard-type ratios.
const MONOTONE_SLACK: f64 = 1e-12;

/// Resolution of the (v₂, q₁) certification lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub n_v2: usize,
    pub n_q1: usize,
    /// Mass of F(·|q₁) left outside the v₂ span of each row.
    pub tail_mass: f64,
}

impl Default for Lattice {
    fn default() -> Self {
        Self {
            n_v2: 256,
            n_q1: 256,
            tail_mass: 1e-9,
        }
    }
}

impl Lattice {
    /// Interior trial sizes j/(n+1), j = 1..n.
    pub fn q1_points(&self) -> Vec<f64> {
        (1..=self.n_q1).map(|j| j as f64 / (self.n_q1 + 1) as f64).collect()
    }

    fn v2_row(&self, signal: &dyn SignalFamily, q1: f64) -> Vec<f64> {
        let (lo, hi) = signal.support(q1, self.tail_mass);
        linspace(lo, hi, self.n_v2)
    }
}

/// A lattice point where a check failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub check: &'static str,
    pub q1: f64,
    pub v2: f64,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum A1Route {
    /// F/f increasing and (∂F/∂q₁)/f decreasing in v₂.
    SufficientPair,
    /// Direct scan of the sign pattern of M.
    SingleCrossing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub ok: bool,
    pub witnesses: Vec<Witness>,
}

impl CheckOutcome {
    fn from_rows(rows: Vec<Vec<Witness>>) -> Self {
        let witnesses: Vec<Witness> = rows.into_iter().flatten().take(MAX_WITNESSES).collect();
        Self {
            ok: witnesses.is_empty(),
            witnesses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption1Outcome {
    pub ok: bool,
    pub route: Option<A1Route>,
    pub single_crossing_ok: bool,
    pub sufficient_pair_ok: bool,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub rotation_ok: bool,
    pub a1_ok: bool,
    pub a1_route: Option<A1Route>,
    pub a2_ok: bool,
    pub remark3_ok: bool,
    pub witnesses: Vec<Witness>,
}

impl AssumptionReport {
    /// The solver's precondition: both numbered assumptions hold.
    pub fn certified(&self) -> bool {
        self.a1_ok && self.a2_ok
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.rotation_ok {
            out.push("rotation order");
        }
        if !self.a1_ok {
            out.push("assumption 1 (sign pattern of M)");
        }
        if !self.a2_ok {
            out.push("assumption 2 (decreasing inverse hazard)");
        }
        if !self.remark3_ok {
            out.push("uniqueness certificate for the trial size");
        }
        out
    }
}

fn mrs_value(signal: &dyn SignalFamily, v2: f64, q1: f64) -> Option<f64> {
    let f = signal.pdf(v2, q1);
    if !(f > 0.0) || !f.is_finite() {
        return None;
    }
    let m = -signal.cdf(v2, q1) / ((1.0 - q1) * f) + signal.dcdf_dq1(v2, q1) / f;
    m.is_finite().then_some(m)
}

/// Rotation order: sign ∂F/∂q₁ = −sign v₂ on the lattice.
pub fn check_rotation(signal: &dyn SignalFamily, lattice: &Lattice) -> CheckOutcome {
    let rows = lattice
        .q1_points()
        .into_par_iter()
        .map(|q1| {
            let mut bad = Vec::new();
            for v2 in lattice.v2_row(signal, q1) {
                let d = signal.dcdf_dq1(v2, q1);
                let ok = if v2 < 0.0 {
                    d > 0.0
                } else if v2 > 0.0 {
                    d < 0.0
                } else {
                    d == 0.0
                };
                if !ok {
                    bad.push(Witness {
                        check: "rotation",
                        q1,
                        v2,
                        value: d,
                        detail: "dF/dq1 has the wrong sign".into(),
                    });
                }
            }
            bad
        })
        .collect();
    CheckOutcome::from_rows(rows)
}

/// Single crossing of M in v₂: for each q₁, once M ≤ 0 it stays strictly negative as v₂ grows.
/// Also evaluates the sufficient pair and reports which route certifies it.
pub fn check_assumption1(signal: &dyn SignalFamily, lattice: &Lattice) -> Assumption1Outcome {
    let rows: Vec<(Vec<Witness>, bool)> = lattice
        .q1_points()
        .into_par_iter()
        .map(|q1| {
            let v2s = lattice.v2_row(signal, q1);
            let mut bad = Vec::new();
            let mut first_nonpos: Option<f64> = None;
            let mut pair_ok = true;
            let mut prev_ratio: Option<f64> = None;
            let mut prev_tilt: Option<f64> = None;
            for &v2 in &v2s {
                let Some(m) = mrs_value(signal, v2, q1) else { continue };
                match first_nonpos {
                    Some(start) if m >= 0.0 => bad.push(Witness {
                        check: "assumption1",
                        q1,
                        v2,
                        value: m,
                        detail: format!("M <= 0 at v2 = {start:.6} but M >= 0 here"),
                    }),
                    None if m <= 0.0 => first_nonpos = Some(v2),
                    _ => {}
                }
                let f = signal.pdf(v2, q1);
                let ratio = signal.cdf(v2, q1) / f;
                let tilt = signal.dcdf_dq1(v2, q1) / f;
                if let Some(p) = prev_ratio {
                    if ratio < p - MONOTONE_SLACK * p.abs().max(1.0) {
                        pair_ok = false;
                    }
                }
                if let Some(p) = prev_tilt {
                    if tilt > p + MONOTONE_SLACK * p.abs().max(1.0) {
                        pair_ok = false;
                    }
                }
                prev_ratio = Some(ratio);
                prev_tilt = Some(tilt);
            }
            (bad, pair_ok)
        })
        .collect();

    let sufficient_pair_ok = rows.iter().all(|r| r.1);
    let outcome = CheckOutcome::from_rows(rows.into_iter().map(|r| r.0).collect());
    let route = if sufficient_pair_ok {
        Some(A1Route::SufficientPair)
    } else if outcome.ok {
        Some(A1Route::SingleCrossing)
    } else {
        None
    };
    Assumption1Outcome {
        ok: outcome.ok,
        route,
        single_crossing_ok: outcome.ok,
        sufficient_pair_ok,
        witnesses: outcome.witnesses,
    }
}

/// Monotone inverse hazard: (1 − G)/g strictly decreasing on `n` evenly spaced points of [0, 1].
pub fn check_assumption2(prior: &dyn Prior, n: usize) -> CheckOutcome {
    let vs = linspace(0.0, 1.0, n.max(2));
    let hs: Vec<f64> = vs.iter().map(|&v| prior.inverse_hazard(v)).collect();
    let mut bad = Vec::new();
    for i in 1..vs.len() {
        if !(hs[i] < hs[i - 1]) {
            bad.push(Witness {
                check: "assumption2",
                q1: f64::NAN,
                v2: vs[i],
                value: hs[i],
                detail: format!(
                    "(1-G)/g = {:.6e} at v1 = {:.6} is not below {:.6e} at v1 = {:.6}",
                    hs[i],
                    vs[i],
                    hs[i - 1],
                    vs[i - 1]
                ),
            });
        }
    }
    CheckOutcome::from_rows(vec![bad])
}

/// Uniqueness certificate: for v₂ ≤ 0 and q₁ < q₁′, M(v₂, q₁) ≤ 0 implies M(v₂, q₁′) < 0.
///
/// The v₂ columns span the negative half of the widest row; cells where the
/// density vanishes numerically are skipped.
pub fn check_remark3(signal: &dyn SignalFamily, lattice: &Lattice) -> CheckOutcome {
    let qs = lattice.q1_points();
    let q_max = *qs.last().expect("non-empty lattice");
    let (lo, _) = signal.support(q_max, lattice.tail_mass);
    let v2s = linspace(lo.min(0.0), 0.0, lattice.n_v2);
    let columns = v2s
        .into_par_iter()
        .map(|v2| {
            let mut bad = Vec::new();
            let mut first_nonpos: Option<f64> = None;
            for &q1 in &qs {
                let (a, b) = signal.support(q1, lattice.tail_mass);
                if v2 < a || v2 > b {
                    continue;
                }
                let Some(m) = mrs_value(signal, v2, q1) else { continue };
                match first_nonpos {
                    Some(start) if m >= 0.0 => bad.push(Witness {
                        check: "remark3",
                        q1,
                        v2,
                        value: m,
                        detail: format!("M <= 0 at q1 = {start:.6} but M >= 0 at larger q1"),
                    }),
                    None if m <= 0.0 => first_nonpos = Some(q1),
                    _ => {}
                }
            }
            bad
        })
        .collect();
    CheckOutcome::from_rows(columns)
}

pub fn check_model(model: &Model, lattice: &Lattice, n_v1: usize) -> AssumptionReport {
    let signal = model.signal();
    let rotation = check_rotation(signal, lattice);
    let a1 = check_assumption1(signal, lattice);
    let a2 = check_assumption2(model.prior(), n_v1.max(lattice.n_q1));
    let r3 = check_remark3(signal, lattice);
    let mut witnesses = rotation.witnesses;
    witnesses.extend(a1.witnesses);
    witnesses.extend(a2.witnesses);
    witnesses.extend(r3.witnesses);
    AssumptionReport {
        rotation_ok: rotation.ok,
        a1_ok: a1.ok,
        a1_route: a1.route,
        a2_ok: a2.ok,
        remark3_ok: r3.ok,
        witnesses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Beta, Logistic, Normal, NormalMixture, TruthOrNoise, Uniform};

    fn trimodal() -> TruthOrNoise<NormalMixture> {
        TruthOrNoise::new(NormalMixture::new(vec![(0.2, -3.0, 0.2), (0.4, -1.0, 0.2), (0.4, 2.5, 0.2)]).unwrap())
    }

    #[test]
    fn normal_and_logistic_pass_by_sufficient_pair() {
        let lat = Lattice::default();
        let n = TruthOrNoise::new(Normal::standard());
        let a1 = check_assumption1(&n, &lat);
        assert!(a1.ok && a1.sufficient_pair_ok);
        assert_eq!(a1.route, Some(A1Route::SufficientPair));
        let l = TruthOrNoise::new(Logistic::new(1.0).unwrap());
        assert!(check_assumption1(&l, &lat).ok);
        assert!(check_rotation(&n, &lat).ok);
        assert!(check_rotation(&l, &lat).ok);
    }

    #[test]
    fn tilt_ratio_is_minus_v2_over_q() {
        let n = TruthOrNoise::new(Normal::standard());
        for &(v2, q) in &[(-0.7, 0.3), (0.4, 0.8), (1.1, 0.5)] {
            let r = n.dcdf_dq1(v2, q) / n.pdf(v2, q);
            assert!((r + v2 / q).abs() < 1e-13);
        }
    }

    #[test]
    fn trimodal_mixture_breaks_assumption1() {
        let lat = Lattice::default();
        let s = trimodal();
        let a1 = check_assumption1(&s, &lat);
        assert!(!a1.ok);
        assert!(!a1.sufficient_pair_ok);
        assert!(!a1.witnesses.is_empty());

        // Dense scan of one row confirms M changes sign more than once.
        let q = 0.5;
        let (lo, hi) = s.support(q, 1e-9);
        let mut flips = 0;
        let mut prev: Option<bool> = None;
        for v2 in linspace(lo, hi, 100_001) {
            if let Some(m) = mrs_value(&s, v2, q) {
                let neg = m < 0.0;
                if prev.is_some_and(|p| p != neg) {
                    flips += 1;
                }
                prev = Some(neg);
            }
        }
        assert!(flips >= 2, "flips {flips}");
    }

    #[test]
    fn remark3_examples() {
        let lat = Lattice::default();
        assert!(check_remark3(&TruthOrNoise::new(Normal::standard()), &lat).ok);
        let s = trimodal();
        let r = check_remark3(&s, &lat);
        assert!(!r.ok && !r.witnesses.is_empty());
        // v₂ = 0 column is negative for every q₁.
        for q in lat.q1_points() {
            assert!(mrs_value(&s, 0.0, q).unwrap() < 0.0);
        }
    }

    #[test]
    fn assumption2_examples() {
        assert!(check_assumption2(&Uniform, 1001).ok);
        assert!(check_assumption2(&Beta::new(2.0, 2.0).unwrap(), 1001).ok);
        let r = check_assumption2(&Beta::new(0.5, 2.0).unwrap(), 1001);
        assert!(!r.ok);
        assert_eq!(r.witnesses[0].v2, 0.001);
    }

    #[test]
    fn report_is_reproducible() {
        let model = Model::new(
            std::sync::Arc::new(Uniform),
            std::sync::Arc::new(trimodal()),
            Default::default(),
        )
        .unwrap();
        let lat = Lattice {
            n_v2: 128,
            n_q1: 64,
            tail_mass: 1e-9,
        };
        let a = check_model(&model, &lat, 64);
        let b = check_model(&model, &lat, 64);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert!(!a.a1_ok && a.a2_ok && !a.certified());
        assert!(a.witnesses.iter().all(|w| w.value.is_finite()));
    }
}
