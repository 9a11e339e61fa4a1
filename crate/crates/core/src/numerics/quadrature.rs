//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy controls shared by every integral the crate evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Target for the summed absolute error estimate.
    pub abs_tol: f64,
    /// Maximum number of interval bisections before giving up.
    pub max_subdivisions: usize,
    /// Probability mass that may be cut off when an unbounded domain is truncated.
    pub tail_mass: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            max_subdivisions: 400,
            tail_mass: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::invalid("quadrature.abs_tol", "must be a positive finite number"));
        }
        if !(self.tail_mass > 0.0 && self.tail_mass <= 1e-6) {
            return Err(Error::invalid("quadrature.tail_mass", "must lie in (0, 1e-6]"));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::invalid("quadrature.max_subdivisions", "must be at least 8"));
        }
        Ok(())
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut pairs = [(0.0, 0.0); 7];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let (lo, hi) = (f(center - dx), f(center + dx));
        pairs[j] = (lo, hi);
        kronrod += wk * (lo + hi);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    // Error scaling as in QUADPACK's qk15.
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (&(lo, hi), &wk) in pairs.iter().zip(WGK.iter()) {
        asc += wk * ((lo - mean).abs() + (hi - mean).abs());
    }
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error,
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Interval bisection is driven by the segment with the largest error
/// estimate; the final sum runs over segments in left-to-right order so the
/// result is bit-reproducible.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFiniteBounds { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, spec).map(|v| -v);
    }

    let mut segments = vec![kronrod15(&f, a, b)];
    let mut subdivisions = 0;
    loop {
        let (total, err) = segments.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        if !total.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                a,
                b,
                subdivisions,
                estimate: total,
                error_estimate: err,
            });
        }
        // Roundoff floor: errors below a few ulps of the total cannot be reduced further.
        if err <= spec.abs_tol || err <= 64.0 * f64::EPSILON * total.abs() {
            break;
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, be), (i, s)| {
                if s.error > be {
                    (i, s.error)
                } else {
                    (bi, be)
                }
            });
        let seg = segments[worst];
        let mid = 0.5 * (seg.a + seg.b);
        if subdivisions >= spec.max_subdivisions || mid <= seg.a || mid >= seg.b {
            return Err(Error::QuadratureNonConvergence {
                a,
                b,
                subdivisions,
                estimate: total,
                error_estimate: err,
            });
        }
        segments[worst] = kronrod15(&f, seg.a, mid);
        segments.push(kronrod15(&f, mid, seg.b));
        subdivisions += 1;
    }

    segments.sort_by(|l, r| l.a.total_cmp(&r.a));
    Ok(segments.iter().map(|s| s.value).sum())
}

/// Integrates `f` cell by cell over consecutive `nodes`; used where the
/// integrand is only piecewise smooth between known breakpoints.
pub fn integrate_cells<F: Fn(f64) -> f64>(f: F, nodes: &[f64], spec: &QuadratureSpec) -> Result<f64> {
    let mut total = 0.0;
    for w in nodes.windows(2) {
        total += integrate(&f, w[0], w[1], spec)?;
    }
    Ok(total)
}
