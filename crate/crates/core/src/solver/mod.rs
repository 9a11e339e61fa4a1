//! Seller-optimal trial sizes, participation cutoffs, second-stage rule and
//! the first-best benchmark.

mod first_best;

use rayon::prelude::*;

pub use first_best::{first_best, social_surplus, FirstBestTable};

use crate::error::{Error, Result};
use crate::model::{Model, SignalFamily};
use crate::numerics::{
    bisect_predicate, find_root, interp_linear, linspace, maximize_global, GridSpec, Maximum, QuadratureSpec,
};

/// Largest trial size searched; the optimum never sits at the full unit.
pub const Q1_MAX: f64 = 1.0 - 1e-9;
/// Extra points placed on each side of the cutoff, spread over the refinement window.
pub const REFINEMENT_POINTS: usize = 8;
const CUTOFF_TOL: f64 = 1e-12;
const FOC_ROOT_TOL: f64 = 1e-15;
/// Default x-tolerance for the golden-section stage.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Π expressed through the virtual value directly: ψ + (1 − q₁)∫_{−∞}^{−ψ} F dv₂.
pub fn profit_at_psi(signal: &dyn SignalFamily, q1: f64, psi: f64, spec: &QuadratureSpec) -> Result<f64> {
    if psi == f64::NEG_INFINITY {
        return Ok(if q1 == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if q1 >= 1.0 {
        return Ok(psi);
    }
    Ok(psi + (1.0 - q1) * signal.integral_of_cdf(q1, -psi, spec)?)
}

/// Seller's expected revenue contribution Π(q₁, v₁) of a type-v₁ buyer.
pub fn profit(model: &Model, q1: f64, v1: f64) -> Result<f64> {
    profit_at_psi(model.signal(), q1, model.psi(v1), model.quadrature())
}

fn foc_at_psi(signal: &dyn SignalFamily, q1: f64, psi: f64, spec: &QuadratureSpec) -> Result<f64> {
    let upper = -psi;
    Ok(-signal.integral_of_cdf(q1, upper, spec)? + (1.0 - q1) * signal.integral_of_dcdf_dq1(q1, upper, spec)?)
}

/// ∂Π/∂q₁ = ∫_{−∞}^{−ψ} ξ dv₂, for q₁ ∈ (0, 1).
pub fn foc_residual(model: &Model, q1: f64, v1: f64) -> Result<f64> {
    if !(q1 > 0.0 && q1 < 1.0) {
        return Err(Error::Domain {
            what: "q1",
            value: q1,
            domain: "(0, 1)",
        });
    }
    foc_at_psi(model.signal(), q1, model.psi(v1), model.quadrature())
}

/// Global maximizer of q₁ ↦ Π at the given virtual value. Zero wins only if
/// it is strictly better than every positive trial size.
pub(crate) fn argmax_at_psi(
    signal: &dyn SignalFamily,
    psi: f64,
    spec: &QuadratureSpec,
    grid: &GridSpec,
    tol: f64,
) -> Result<f64> {
    let pi = |q: f64| profit_at_psi(signal, q, psi, spec).unwrap_or(f64::NAN);
    let pi_zero = profit_at_psi(signal, 0.0, psi, spec)?;
    let Maximum { argmax, .. } = maximize_global(pi, 0.0, Q1_MAX, grid, tol);
    if argmax == 0.0 {
        return Ok(0.0);
    }

    // Polish with the first-order condition inside the coarse bracket.
    let step = Q1_MAX / (grid.n_q1.max(2) - 1) as f64;
    let lo = (argmax - step).max(1e-12);
    let hi = (argmax + step).min(Q1_MAX);
    let foc = |q: f64| foc_at_psi(signal, q, psi, spec).unwrap_or(f64::NAN);
    let mut q = argmax;
    if foc(lo) > 0.0 && foc(hi) < 0.0 {
        if let Ok(root) = find_root(foc, lo, hi, FOC_ROOT_TOL) {
            if pi(root) >= pi(argmax) - 1e-15 * pi(argmax).abs().max(1.0) {
                q = root;
            }
        }
    }
    Ok(if pi(q) >= pi_zero { q } else { 0.0 })
}

/// q₁*(v₁): global maximizer of Π(·, v₁) over [0, 1).
pub fn solve_q1_star(model: &Model, v1: f64, grid: &GridSpec, tol: f64) -> Result<f64> {
    argmax_at_psi(model.signal(), model.psi(v1), model.quadrature(), grid, tol)
}

/// Participation cutoff ṽ₁ (smallest type with a positive trial) and v₁* = ψ⁻¹(0).
pub fn find_cutoffs(model: &Model, grid: &GridSpec, tol: f64) -> Result<(f64, f64)> {
    let v1_star = model.v1_star();
    let tilde = bisect_predicate(
        |v| solve_q1_star(model, v, grid, tol).map(|q| q > 0.0).unwrap_or(false),
        0.0,
        v1_star,
        CUTOFF_TOL,
    )?;
    Ok((tilde, v1_star))
}

/// Gridded optimal trial sizes together with the cutoffs.
#[derive(Debug, Clone)]
pub struct AllocationTable {
    v1_grid: Vec<f64>,
    q1_star: Vec<f64>,
    tilde_v1: f64,
    v1_star: f64,
    tilde_index: usize,
    possibly_non_unique: bool,
}

impl AllocationTable {
    /// Builds a table from precomputed values. `v1_grid` must be sorted and
    /// contain `tilde_v1`.
    pub fn from_parts(v1_grid: Vec<f64>, q1_star: Vec<f64>, tilde_v1: f64, v1_star: f64) -> Result<Self> {
        crate::numerics::check_sorted(&v1_grid)?;
        if v1_grid.len() != q1_star.len() {
            return Err(Error::invalid("q1_star", "length differs from v1_grid"));
        }
        let tilde_index = v1_grid
            .iter()
            .position(|&v| v == tilde_v1)
            .ok_or_else(|| Error::invalid("v1_grid", "must contain the cutoff"))?;
        Ok(Self {
            v1_grid,
            q1_star,
            tilde_v1,
            v1_star,
            tilde_index,
            possibly_non_unique: false,
        })
    }

    pub fn v1_grid(&self) -> &[f64] {
        &self.v1_grid
    }

    pub fn q1_star(&self) -> &[f64] {
        &self.q1_star
    }

    pub fn tilde_v1(&self) -> f64 {
        self.tilde_v1
    }

    pub fn v1_star(&self) -> f64 {
        self.v1_star
    }

    /// Index of ṽ₁ in the grid.
    pub fn tilde_index(&self) -> usize {
        self.tilde_index
    }

    /// Right limit q₁*(ṽ₁⁺), the positive branch at the cutoff.
    pub fn q1_at_tilde_plus(&self) -> f64 {
        self.q1_star[self.tilde_index]
    }

    /// Set when the uniqueness certificate failed; the table still holds the
    /// global maximizers with ties broken upward.
    pub fn possibly_non_unique(&self) -> bool {
        self.possibly_non_unique
    }

    pub fn set_possibly_non_unique(&mut self, flag: bool) {
        self.possibly_non_unique = flag;
    }

    /// Zero below ṽ₁, piecewise linear on [ṽ₁, 1].
    pub fn q1_at(&self, v1: f64) -> f64 {
        if v1 < self.tilde_v1 {
            return 0.0;
        }
        let k = self.tilde_index;
        interp_linear(&self.v1_grid[k..], &self.q1_star[k..], v1)
    }
}

/// Grid on [0, 1] with the cutoff and its refinement band inserted.
pub fn refined_grid(grid: &GridSpec, tilde_v1: f64) -> Vec<f64> {
    let mut pts = linspace(0.0, 1.0, grid.n_v1);
    let w = grid.refinement_window;
    if w > 0.0 {
        let m = REFINEMENT_POINTS as f64;
        for k in 1..=REFINEMENT_POINTS {
            let d = w * k as f64 / m;
            for x in [tilde_v1 - d, tilde_v1 + d] {
                if (0.0..=1.0).contains(&x) {
                    pts.push(x);
                }
            }
        }
    }
    // Drop points too close to the cutoff so it stays an exact node.
    let min_gap = 1e-9;
    pts.retain(|&x| (x - tilde_v1).abs() > min_gap);
    pts.push(tilde_v1);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= min_gap && *a != tilde_v1);
    pts
}

/// Solves q₁* on the refined grid.
pub fn solve_allocation(model: &Model, grid: &GridSpec, tol: f64) -> Result<AllocationTable> {
    grid.validate()?;
    let (tilde_v1, v1_star) = find_cutoffs(model, grid, tol)?;
    let v1_grid = refined_grid(grid, tilde_v1);
    let q1_star = v1_grid
        .par_iter()
        .map(|&v| solve_q1_star(model, v, grid, tol))
        .collect::<Result<Vec<f64>>>()?;
    AllocationTable::from_parts(v1_grid, q1_star, tilde_v1, v1_star)
}

/// q₂*: buy the remainder iff ψ(v₁) + v₂ ≥ 0.
pub fn q2_star(alloc: &AllocationTable, model: &Model, v1: f64, v2: f64) -> f64 {
    if model.psi(v1) + v2 >= 0.0 {
        1.0 - alloc.q1_at(v1)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::xi;
    use std::sync::OnceLock;

    fn model() -> &'static Model {
        static M: OnceLock<Model> = OnceLock::new();
        M.get_or_init(Model::uniform_normal)
    }

    fn table() -> &'static AllocationTable {
        static T: OnceLock<AllocationTable> = OnceLock::new();
        T.get_or_init(|| solve_allocation(model(), &GridSpec::default(), DEFAULT_TOL).unwrap())
    }

    /// Brute force: best of `n` equally spaced trial sizes.
    fn dense_argmax(v1: f64, n: usize) -> (f64, f64) {
        let m = model();
        let mut best = (0.0, profit(m, 0.0, v1).unwrap());
        for i in 1..n {
            let q = i as f64 / n as f64;
            let p = profit(m, q, v1).unwrap();
            if p > best.1 {
                best = (q, p);
            }
        }
        best
    }

    #[test]
    fn profit_examples() {
        let m = model();
        for &v in &[0.0, 0.2, 0.45, 0.49] {
            assert_eq!(profit(m, 0.0, v).unwrap(), 0.0);
        }
        assert!((profit(m, 0.0, 0.8).unwrap() - 0.6).abs() < 1e-15);
        for &v in &[0.3, 0.6, 1.0] {
            let near_one = profit(m, 1.0 - 1e-9, v).unwrap();
            assert!((near_one - m.psi(v)).abs() < 1e-8);
            assert_eq!(profit(m, 1.0, v).unwrap(), m.psi(v));
        }
    }

    #[test]
    fn profit_matches_cdf_quadrature() {
        let m = model();
        let s = m.signal();
        let spec = m.quadrature();
        for &(q, v) in &[(0.2, 0.45), (0.5, 0.7), (0.8, 0.95), (0.05, 0.3)] {
            let psi = m.psi(v);
            let i = s
                .integrate_dv2(q, f64::NEG_INFINITY, -psi, &|v2| s.cdf(v2, q), spec)
                .unwrap();
            let direct = psi + (1.0 - q) * i;
            assert!((direct - profit(m, q, v).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn two_local_maxima_at_045() {
        let m = model();
        let v = 0.45;
        let n = 2000;
        let vals: Vec<f64> = (0..=n)
            .map(|i| profit(m, i as f64 / n as f64 * Q1_MAX, v).unwrap())
            .collect();
        let mut local = Vec::new();
        for i in 0..=n {
            let left = i == 0 || vals[i] >= vals[i - 1];
            let right = i == n || vals[i] >= vals[i + 1];
            if left && right {
                local.push(i);
            }
        }
        assert!(local.len() >= 2, "local maxima at {local:?}");
        assert_eq!(local[0], 0);
        let q = solve_q1_star(m, v, &GridSpec::default(), DEFAULT_TOL).unwrap();
        assert!(q > 0.403);
        assert!(profit(m, q, v).unwrap() > profit(m, 0.0, v).unwrap());
    }

    #[test]
    fn foc_residual_matches_xi_quadrature_and_finite_difference() {
        let m = model();
        let s = m.signal();
        let spec = m.quadrature();
        for &(q, v) in &[(0.2, 0.45), (0.5, 0.7), (0.8, 0.95), (0.35, 0.2), (0.6, 0.5)] {
            let psi = m.psi(v);
            let by_xi = s
                .integrate_dv2(q, f64::NEG_INFINITY, -psi, &|v2| xi(s, v2, q).unwrap(), spec)
                .unwrap();
            let r = foc_residual(m, q, v).unwrap();
            assert!((r - by_xi).abs() < 1e-9, "({q},{v}): {r} vs {by_xi}");
            let h = 1e-5;
            let fd = (profit(m, q + h, v).unwrap() - profit(m, q - h, v).unwrap()) / (2.0 * h);
            assert!((r - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn below_cutoff_the_foc_is_negative_everywhere() {
        let m = model();
        for i in 1..200 {
            let q = i as f64 / 200.0;
            assert!(foc_residual(m, q, 0.3).unwrap() <= 0.0);
        }
        assert_eq!(solve_q1_star(m, 0.3, &GridSpec::default(), DEFAULT_TOL).unwrap(), 0.0);
    }

    #[test]
    fn interior_solution_matches_dense_oracle() {
        let m = model();
        for &v in &[0.5, 0.7, 0.9, 1.0] {
            let q = solve_q1_star(m, v, &GridSpec::default(), DEFAULT_TOL).unwrap();
            let (qd, _) = dense_argmax(v, 1_000_000);
            assert!((q - qd).abs() < 1e-4, "v={v}: {q} vs {qd}");
            assert!(foc_residual(m, q, v).unwrap().abs() < 1e-7);
        }
    }

    #[test]
    fn cutoffs() {
        let t = table();
        assert!((t.v1_star() - 0.5).abs() < 1e-12);
        assert!(t.tilde_v1() < t.v1_star());
        assert!(t.tilde_v1() > 0.42 && t.tilde_v1() < 0.44);
        // Scan oracle at step 1e-4 brackets the cutoff.
        let m = model();
        let g = GridSpec::default();
        let below = ((t.tilde_v1() * 1e4).floor()) / 1e4;
        let above = below + 1e-4;
        assert_eq!(solve_q1_star(m, below, &g, DEFAULT_TOL).unwrap(), 0.0);
        assert!(solve_q1_star(m, above, &g, DEFAULT_TOL).unwrap() > 0.0);
    }

    #[test]
    fn table_invariants() {
        let t = table();
        let m = model();
        let k = t.tilde_index();
        for (i, (&v, &q)) in t.v1_grid().iter().zip(t.q1_star()).enumerate() {
            assert!(q < 1.0 - 1e-6);
            if i < k {
                assert!(v < t.tilde_v1());
                assert_eq!(q, 0.0);
            }
        }
        for i in k..t.v1_grid().len() - 1 {
            assert!(t.q1_star()[i + 1] > t.q1_star()[i]);
            let p0 = profit(m, t.q1_star()[i], t.v1_grid()[i]).unwrap();
            let p1 = profit(m, t.q1_star()[i + 1], t.v1_grid()[i + 1]).unwrap();
            assert!(p1 > p0);
        }
        for i in k + 1..t.v1_grid().len() {
            let (v, q) = (t.v1_grid()[i], t.q1_star()[i]);
            assert!(foc_residual(m, q, v).unwrap().abs() <= 1e-6);
            let x = xi(m.signal(), -m.psi(v), q).unwrap();
            assert!(x < 0.0);
        }
        assert_eq!(t.q1_at(0.2), 0.0);
        assert_eq!(t.q1_at(t.tilde_v1()), t.q1_at_tilde_plus());
    }

    #[test]
    fn second_stage_rule() {
        let t = table();
        let m = model();
        assert_eq!(q2_star(t, m, 1.0, -0.999), 1.0 - t.q1_at(1.0));
        assert_eq!(q2_star(t, m, 1.0, -1.001), 0.0);
        assert_eq!(q2_star(t, m, 0.3, 0.0), 0.0);
        assert_eq!(q2_star(t, m, 0.6, -0.1), 1.0 - t.q1_at(0.6));
    }

    #[test]
    fn refined_grid_contains_cutoff_and_band() {
        let g = GridSpec::default();
        let pts = refined_grid(&g, 0.4269);
        assert!(pts.contains(&0.4269));
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 1.0);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
        let band = pts
            .iter()
            .filter(|&&x| (x - 0.4269).abs() <= g.refinement_window + 1e-15)
            .count();
        assert!(band > 2 * REFINEMENT_POINTS);
    }
}
