use std::fmt::Debug;

use rand::{Rng, RngCore};

use super::noise::Noise;
use crate::error::{Error, Result};
use crate::numerics::{integrate, QuadratureSpec};

/// Conditional law of the posterior estimate v₂ given a trial of size q₁.
///
/// At q₁ = 0 the law is a point mass at zero: `cdf` is the step 1{v₂ ≥ 0}
/// and `pdf` is zero away from the origin.
pub trait SignalFamily: Send + Sync + Debug {
    fn cdf(&self, v2: f64, q1: f64) -> f64;
    fn pdf(&self, v2: f64, q1: f64) -> f64;
    fn dcdf_dq1(&self, v2: f64, q1: f64) -> f64;

    /// Draws `(v2, v_tilde2)`: the posterior estimate and the true second-stage value.
    fn sample(&self, q1: f64, rng: &mut dyn RngCore) -> (f64, f64);

    /// Interval carrying all but `tail_mass` of the law of v₂.
    fn support(&self, q1: f64, tail_mass: f64) -> (f64, f64);

    fn name(&self) -> String;

    /// ∫ g(v₂) dv₂ over `[lo, hi]`; infinite limits are replaced by the
    /// matching end of `support`.
    fn integrate_dv2(&self, q1: f64, lo: f64, hi: f64, g: &dyn Fn(f64) -> f64, spec: &QuadratureSpec) -> Result<f64> {
        if q1 == 0.0 && (!lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Domain {
                what: "q1",
                value: q1,
                domain: "(0, 1] for unbounded dv2 integrals",
            });
        }
        let (a, b) = self.support(q1, spec.tail_mass);
        let lo = if lo == f64::NEG_INFINITY { a } else { lo };
        let hi = if hi == f64::INFINITY { b } else { hi };
        if hi <= lo {
            return Ok(0.0);
        }
        integrate(g, lo, hi, spec)
    }

    /// E[g(v₂); lo < v₂ ≤ hi].
    fn expectation(&self, q1: f64, lo: f64, hi: f64, g: &dyn Fn(f64) -> f64, spec: &QuadratureSpec) -> Result<f64> {
        if q1 == 0.0 {
            return Ok(if lo < 0.0 && 0.0 <= hi { g(0.0) } else { 0.0 });
        }
        self.integrate_dv2(q1, lo, hi, &|v2| g(v2) * self.pdf(v2, q1), spec)
    }

    /// ∫_{−∞}^{upper} F(v₂|q₁) dv₂.
    fn integral_of_cdf(&self, q1: f64, upper: f64, spec: &QuadratureSpec) -> Result<f64> {
        if q1 == 0.0 {
            return Ok(upper.max(0.0));
        }
        let (a, _) = self.support(q1, spec.tail_mass);
        if upper <= a {
            return Ok(0.0);
        }
        self.integrate_dv2(q1, f64::NEG_INFINITY, upper, &|v2| self.cdf(v2, q1), spec)
    }

    /// ∫_{−∞}^{upper} ∂F/∂q₁(v₂|q₁) dv₂, for q₁ > 0.
    fn integral_of_dcdf_dq1(&self, q1: f64, upper: f64, spec: &QuadratureSpec) -> Result<f64> {
        if !(q1 > 0.0) {
            return Err(Error::Domain {
                what: "q1",
                value: q1,
                domain: "(0, 1]",
            });
        }
        let (a, _) = self.support(q1, spec.tail_mass);
        if upper <= a {
            return Ok(0.0);
        }
        self.integrate_dv2(q1, f64::NEG_INFINITY, upper, &|v2| self.dcdf_dq1(v2, q1), spec)
    }

    /// E[(v₂ − x)⁺]; uses E[v₂] = 0.
    fn expected_excess(&self, q1: f64, x: f64, spec: &QuadratureSpec) -> Result<f64> {
        Ok(self.integral_of_cdf(q1, x, spec)? - x)
    }
}

/// v₂ = q₁·s where s equals the true value ṽ₂ with probability q₁ and is an
/// independent draw from H otherwise; hence F(v₂|q₁) = H(v₂/q₁).
#[derive(Debug, Clone)]
pub struct TruthOrNoise<N: Noise> {
    noise: N,
}

impl<N: Noise> TruthOrNoise<N> {
    pub fn new(noise: N) -> Self {
        Self { noise }
    }

    pub fn noise(&self) -> &N {
        &self.noise
    }

    fn s_bounds(&self, q1: f64, lo: f64, hi: f64, tail_mass: f64) -> (f64, f64) {
        let a = if lo == f64::NEG_INFINITY {
            self.noise.quantile(0.5 * tail_mass)
        } else {
            lo / q1
        };
        let b = if hi == f64::INFINITY {
            self.noise.quantile(1.0 - 0.5 * tail_mass)
        } else {
            hi / q1
        };
        (a, b)
    }
}

impl<N: Noise> SignalFamily for TruthOrNoise<N> {
    fn cdf(&self, v2: f64, q1: f64) -> f64 {
        if q1 == 0.0 {
            if v2 >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.noise.cdf(v2 / q1)
        }
    }

    fn pdf(&self, v2: f64, q1: f64) -> f64 {
        if q1 == 0.0 {
            if v2 == 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            self.noise.pdf(v2 / q1) / q1
        }
    }

    fn dcdf_dq1(&self, v2: f64, q1: f64) -> f64 {
        if q1 == 0.0 || v2 == 0.0 {
            return 0.0;
        }
        let s = v2 / q1;
        -(s / q1) * self.noise.pdf(s)
    }

    fn sample(&self, q1: f64, rng: &mut dyn RngCore) -> (f64, f64) {
        let truth = self.noise.sample(rng);
        let reveal: f64 = rng.random();
        let s = if reveal < q1 { truth } else { self.noise.sample(rng) };
        (q1 * s, truth)
    }

    fn support(&self, q1: f64, tail_mass: f64) -> (f64, f64) {
        (
            q1 * self.noise.quantile(0.5 * tail_mass),
            q1 * self.noise.quantile(1.0 - 0.5 * tail_mass),
        )
    }

    fn name(&self) -> String {
        format!("truth_or_noise[{}]", self.noise.name())
    }

    fn integrate_dv2(&self, q1: f64, lo: f64, hi: f64, g: &dyn Fn(f64) -> f64, spec: &QuadratureSpec) -> Result<f64> {
        if q1 == 0.0 {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Domain {
                    what: "q1",
                    value: q1,
                    domain: "(0, 1] for unbounded dv2 integrals",
                });
            }
            return integrate(g, lo, hi, spec);
        }
        let (a, b) = self.s_bounds(q1, lo, hi, spec.tail_mass);
        if b <= a {
            return Ok(0.0);
        }
        Ok(q1 * integrate(|s| g(q1 * s), a, b, spec)?)
    }

    fn expectation(&self, q1: f64, lo: f64, hi: f64, g: &dyn Fn(f64) -> f64, spec: &QuadratureSpec) -> Result<f64> {
        if q1 == 0.0 {
            return Ok(if lo < 0.0 && 0.0 <= hi { g(0.0) } else { 0.0 });
        }
        let (a, b) = self.s_bounds(q1, lo, hi, spec.tail_mass);
        if b <= a {
            return Ok(0.0);
        }
        integrate(|s| g(q1 * s) * self.noise.pdf(s), a, b, spec)
    }

    fn integral_of_cdf(&self, q1: f64, upper: f64, _spec: &QuadratureSpec) -> Result<f64> {
        if q1 == 0.0 {
            return Ok(upper.max(0.0));
        }
        // ∫_{−∞}^{x} H = x + E[(S − x)⁺] for mean-zero S.
        Ok(upper + q1 * self.noise.stop_loss(upper / q1))
    }

    fn integral_of_dcdf_dq1(&self, q1: f64, upper: f64, _spec: &QuadratureSpec) -> Result<f64> {
        if !(q1 > 0.0) {
            return Err(Error::Domain {
                what: "q1",
                value: q1,
                domain: "(0, 1]",
            });
        }
        let x = upper / q1;
        Ok(self.noise.stop_loss(x) + x * (1.0 - self.noise.cdf(x)))
    }

    fn expected_excess(&self, q1: f64, x: f64, _spec: &QuadratureSpec) -> Result<f64> {
        if q1 == 0.0 {
            return Ok((-x).max(0.0));
        }
        Ok(q1 * self.noise.stop_loss(x / q1))
    }
}
