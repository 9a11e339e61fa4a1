use rayon::prelude::*;

use super::{argmax_at_psi, profit_at_psi, AllocationTable};
use crate::error::Result;
use crate::model::Model;
use crate::numerics::{integrate_cells, interp_linear, GridSpec};

/// Efficient trial sizes on the allocation grid, computed two ways.
#[derive(Debug, Clone)]
pub struct FirstBestTable {
    v1_grid: Vec<f64>,
    q1_fb: Vec<f64>,
    q1_fb_direct: Vec<f64>,
}

impl FirstBestTable {
    pub fn v1_grid(&self) -> &[f64] {
        &self.v1_grid
    }

    /// q₁*(ψ⁻¹(v₁)) read off the allocation table.
    pub fn q1_fb(&self) -> &[f64] {
        &self.q1_fb
    }

    /// Direct maximizers of the surplus v₁ + (1 − q₁)∫_{−∞}^{−v₁} F dv₂.
    pub fn q1_fb_direct(&self) -> &[f64] {
        &self.q1_fb_direct
    }

    pub fn q1_fb_at(&self, v1: f64) -> f64 {
        interp_linear(&self.v1_grid, &self.q1_fb, v1)
    }

    /// Efficient second-stage rule: buy the remainder iff v₁ + v₂ ≥ 0.
    pub fn q2_fb(&self, v1: f64, v2: f64) -> f64 {
        if v1 + v2 >= 0.0 {
            1.0 - self.q1_fb_at(v1)
        } else {
            0.0
        }
    }

    pub fn max_composition_gap(&self) -> f64 {
        self.q1_fb
            .iter()
            .zip(&self.q1_fb_direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn first_best(model: &Model, alloc: &AllocationTable, grid: &GridSpec, tol: f64) -> Result<FirstBestTable> {
    let v1_grid = alloc.v1_grid().to_vec();
    let rows = v1_grid
        .par_iter()
        .map(|&v| {
            let composed = alloc.q1_at(model.psi_inverse(v)?);
            let direct = argmax_at_psi(model.signal(), v, model.quadrature(), grid, tol)?;
            Ok((composed, direct))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (q1_fb, q1_fb_direct) = rows.into_iter().unzip();
    Ok(FirstBestTable {
        v1_grid,
        q1_fb,
        q1_fb_direct,
    })
}

/// Expected efficient surplus ∫ Π̃(q₁^FB(v₁), v₁) g(v₁) dv₁.
pub fn social_surplus(model: &Model, fb: &FirstBestTable) -> Result<f64> {
    let spec = model.quadrature();
    integrate_cells(
        |v| {
            let q = fb.q1_fb_at(v);
            profit_at_psi(model.signal(), q, v, spec).unwrap_or(f64::NAN) * model.prior().pdf(v)
        },
        fb.v1_grid(),
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_allocation, DEFAULT_TOL};

    #[test]
    fn first_best_properties() {
        let m = Model::uniform_normal();
        let g = GridSpec::default();
        let alloc = solve_allocation(&m, &g, DEFAULT_TOL).unwrap();
        let fb = first_best(&m, &alloc, &g, DEFAULT_TOL).unwrap();
        let n = fb.v1_grid().len();
        assert!((fb.q1_fb()[n - 1] - alloc.q1_star()[n - 1]).abs() < 1e-12);
        assert!(fb.max_composition_gap() < 1e-4, "gap {}", fb.max_composition_gap());
        for i in 0..n {
            let v = fb.v1_grid()[i];
            if v < 1.0 - 1e-3 {
                assert!(fb.q1_fb()[i] > alloc.q1_star()[i], "v = {v}");
            }
        }
        assert!(fb.q1_fb().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(fb.q2_fb(0.3, -0.3), 1.0 - fb.q1_fb_at(0.3));
        assert_eq!(fb.q2_fb(0.3, -0.31), 0.0);
    }
}
