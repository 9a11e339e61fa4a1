//! Deterministic scalar calculus: quadrature, roots, 1-D global maximization,
//! running integrals and interpolation.

mod grid;
mod optimize;
mod quadrature;
mod roots;

pub use grid::{check_sorted, cumulative_integral, interp_linear, linspace, one_sided_offset, GridSpec};
pub use optimize::{golden_section, maximize_global, maximize_with_points, Maximum};
pub use quadrature::{integrate, integrate_cells, QuadratureSpec};
pub use roots::{bisect_predicate, find_root};
