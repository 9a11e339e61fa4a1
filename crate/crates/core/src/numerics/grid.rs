use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization of the first-stage type space and of the trial-quantity search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Evenly spaced points on [0, 1], endpoints included.
    pub n_v1: usize,
    /// Coarse scan points for the trial quantity on [0, 1).
    pub n_q1: usize,
    /// Half-width of the band around the participation cutoff that gets extra points.
    pub refinement_window: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_v1: 257,
            n_q1: 201,
            refinement_window: 0.02,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_v1 < 64 {
            return Err(Error::invalid("grid.n_v1", "must be at least 64"));
        }
        if self.n_q1 < 64 {
            return Err(Error::invalid("grid.n_q1", "must be at least 64"));
        }
        if !(self.refinement_window >= 0.0 && self.refinement_window < 0.5) {
            return Err(Error::invalid("grid.refinement_window", "must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `lo` to `hi`; the last point is exactly `hi`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            let mut xs: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
            xs[n - 1] = hi;
            xs
        }
    }
}

pub fn check_sorted(grid: &[f64]) -> Result<()> {
    for (i, w) in grid.windows(2).enumerate() {
        if !(w[1] >= w[0]) {
            return Err(Error::UnsortedGrid { index: i + 1 });
        }
    }
    Ok(())
}

/// Offset used to read one-sided limits of an integrand at a known jump.
pub fn one_sided_offset(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

/// Running trapezoid integral of `f` over a sorted `grid`, starting at `grid[0]`.
///
/// The rule is applied separately on each side of `split_at` so a jump there
/// is not smeared across a cell: the left piece closes with the left limit
/// of `f` and the right piece opens with the right limit. Returned values are
/// aligned with `grid`.
pub fn cumulative_integral<F: Fn(f64) -> f64>(f: F, grid: &[f64], split_at: f64) -> Result<Vec<f64>> {
    check_sorted(grid)?;
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let split = split_at.clamp(grid[0], grid[grid.len() - 1]);
    let eps = one_sided_offset(split);

    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev_x = grid[0];
    let mut prev_y = if grid[0] == split { f(split + eps) } else { f(grid[0]) };
    let mut crossed = grid[0] >= split;
    out.push(0.0);

    for &x in &grid[1..] {
        if !crossed && x >= split {
            // Close the left piece at the left limit, reopen at the right limit.
            let left = f(split - eps);
            acc += 0.5 * (split - prev_x) * (prev_y + left);
            prev_x = split;
            prev_y = f(split + eps);
            crossed = true;
            if x == split {
                out.push(acc);
                continue;
            }
        }
        let y = f(x);
        acc += 0.5 * (x - prev_x) * (prev_y + y);
        prev_x = x;
        prev_y = y;
        out.push(acc);
    }
    Ok(out)
}

/// Linear interpolation on sorted nodes, clamped to the end values outside.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&g| g <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    if x1 == x0 {
        return ys[k];
    }
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}
