use std::fmt::Debug;

use rand::{Rng, RngCore};
use rand_distr::Distribution;
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};

/// Distribution of the first-stage value on [0, 1].
pub trait Prior: Send + Sync + Debug {
    fn cdf(&self, v1: f64) -> f64;
    fn pdf(&self, v1: f64) -> f64;

    /// 1 − G(v₁), computed without cancellation where possible.
    fn survival(&self, v1: f64) -> f64 {
        1.0 - self.cdf(v1)
    }

    /// (1 − G)/g with the conventions 0 at v₁ = 1 and +∞ where g vanishes.
    fn inverse_hazard(&self, v1: f64) -> f64 {
        let s = self.survival(v1);
        if s <= 0.0 {
            return 0.0;
        }
        let g = self.pdf(v1);
        if g <= 0.0 {
            return f64::INFINITY;
        }
        s / g
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Prior for Uniform {
    fn cdf(&self, v1: f64) -> f64 {
        v1.clamp(0.0, 1.0)
    }

    fn pdf(&self, v1: f64) -> f64 {
        if (0.0..=1.0).contains(&v1) {
            1.0
        } else {
            0.0
        }
    }

    fn survival(&self, v1: f64) -> f64 {
        1.0 - v1.clamp(0.0, 1.0)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        rng.random::<f64>()
    }

    fn name(&self) -> String {
        "uniform".into()
    }
}

#[derive(Debug, Clone)]
pub struct Beta {
    alpha: f64,
    beta: f64,
    ln_norm: f64,
    sampler: rand_distr::Beta<f64>,
}

impl Beta {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("prior.alpha", "must be positive and finite"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("prior.beta", "must be positive and finite"));
        }
        let sampler = rand_distr::Beta::new(alpha, beta).map_err(|e| Error::invalid("prior", e.to_string()))?;
        Ok(Self {
            alpha,
            beta,
            ln_norm: ln_beta(alpha, beta),
            sampler,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

// (k) ln x with 0·ln 0 = 0.
fn xlogy(k: f64, x: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * x.ln()
    }
}

impl Prior for Beta {
    fn cdf(&self, v1: f64) -> f64 {
        if v1 <= 0.0 {
            0.0
        } else if v1 >= 1.0 {
            1.0
        } else {
            beta_reg(self.alpha, self.beta, v1)
        }
    }

    fn pdf(&self, v1: f64) -> f64 {
        if !(0.0..=1.0).contains(&v1) {
            return 0.0;
        }
        (xlogy(self.alpha - 1.0, v1) + xlogy(self.beta - 1.0, 1.0 - v1) - self.ln_norm).exp()
    }

    fn survival(&self, v1: f64) -> f64 {
        if v1 <= 0.0 {
            1.0
        } else if v1 >= 1.0 {
            0.0
        } else {
            beta_reg(self.beta, self.alpha, 1.0 - v1)
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.sampler.sample(rng)
    }

    fn name(&self) -> String {
        format!("beta({}, {})", self.alpha, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_basics() {
        let u = Uniform;
        assert_eq!(u.cdf(0.0), 0.0);
        assert_eq!(u.cdf(1.0), 1.0);
        assert_eq!(u.inverse_hazard(0.25), 0.75);
        assert_eq!(u.inverse_hazard(1.0), 0.0);
    }

    #[test]
    fn beta22_closed_forms() {
        // G(x) = 3x² − 2x³, g(x) = 6x(1 − x).
        let b = Beta::new(2.0, 2.0).unwrap();
        for &x in &[0.1, 0.3, 0.5, 0.77] {
            let g = 3.0 * x * x - 2.0 * x * x * x;
            assert!((b.cdf(x) - g).abs() < 1e-14);
            assert!((b.survival(x) - (1.0 - g)).abs() < 1e-14);
            assert!((b.pdf(x) - 6.0 * x * (1.0 - x)).abs() < 1e-13);
        }
        assert_eq!(b.cdf(0.0), 0.0);
        assert_eq!(b.cdf(1.0), 1.0);
        assert_eq!(b.inverse_hazard(1.0), 0.0);
    }

    #[test]
    fn beta_endpoint_densities() {
        let b = Beta::new(0.5, 2.0).unwrap();
        assert!(b.pdf(0.0).is_infinite());
        assert_eq!(b.inverse_hazard(0.0), 0.0);
        let b = Beta::new(1.0, 1.0).unwrap();
        assert!((b.pdf(0.0) - 1.0).abs() < 1e-14);
        let b = Beta::new(3.0, 2.0).unwrap();
        assert_eq!(b.pdf(0.0), 0.0);
        assert!(b.inverse_hazard(0.0).is_infinite());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Beta::new(0.0, 1.0).is_err());
        assert!(Beta::new(1.0, f64::NAN).is_err());
    }
}
