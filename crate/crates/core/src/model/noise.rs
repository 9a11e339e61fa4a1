//! Mean-zero noise distributions H for the truth-or-noise signal.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt::Debug;

use libm::erfc;
use rand::distr::Open01;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::numerics::find_root;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub trait Noise: Send + Sync + Debug {
    fn cdf(&self, x: f64) -> f64;
    fn pdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;

    /// E[(S − x)⁺].
    fn stop_loss(&self, x: f64) -> f64;

    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    fn name(&self) -> String;
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

fn std_normal_stop_loss(z: f64) -> f64 {
    // φ(z) − z(1 − Φ(z)); the upper tail is taken from erfc directly.
    std_normal_pdf(z) - z * 0.5 * erfc(z * FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, Copy)]
pub struct Normal {
    scale: f64,
}

impl Normal {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("noise.scale", "must be positive and finite"));
        }
        Ok(Self { scale })
    }

    pub fn standard() -> Self {
        Self { scale: 1.0 }
    }
}

impl Noise for Normal {
    fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf(x / self.scale)
    }

    fn pdf(&self, x: f64) -> f64 {
        std_normal_pdf(x / self.scale) / self.scale
    }

    fn quantile(&self, p: f64) -> f64 {
        -SQRT_2 * self.scale * erfc_inv(2.0 * p)
    }

    fn stop_loss(&self, x: f64) -> f64 {
        self.scale * std_normal_stop_loss(x / self.scale)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.scale * z
    }

    fn name(&self) -> String {
        format!("normal({})", self.scale)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Logistic {
    scale: f64,
}

impl Logistic {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("noise.scale", "must be positive and finite"));
        }
        Ok(Self { scale })
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

impl Noise for Logistic {
    fn cdf(&self, x: f64) -> f64 {
        let t = x / self.scale;
        if t >= 0.0 {
            1.0 / (1.0 + (-t).exp())
        } else {
            let e = t.exp();
            e / (1.0 + e)
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        let e = (-(x / self.scale).abs()).exp();
        e / (self.scale * (1.0 + e) * (1.0 + e))
    }

    fn quantile(&self, p: f64) -> f64 {
        self.scale * (p / (1.0 - p)).ln()
    }

    fn stop_loss(&self, x: f64) -> f64 {
        self.scale * softplus(-x / self.scale)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile(u)
    }

    fn name(&self) -> String {
        format!("logistic({})", self.scale)
    }
}

/// Finite mixture of normals with overall mean zero.
#[derive(Debug, Clone)]
pub struct NormalMixture {
    components: Vec<(f64, f64, f64)>,
}

impl NormalMixture {
    /// `components` are `(weight, mean, sd)` triples; weights must sum to one
    /// and the mixture mean must be zero.
    pub fn new(components: Vec<(f64, f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("noise.components", "empty mixture"));
        }
        if components
            .iter()
            .any(|&(w, m, s)| !(w > 0.0) || !m.is_finite() || !(s > 0.0))
        {
            return Err(Error::invalid("noise.components", "need positive weights and scales"));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("noise.components", "weights must sum to one"));
        }
        let mean: f64 = components.iter().map(|c| c.0 * c.1).sum();
        if mean.abs() > 1e-12 {
            return Err(Error::invalid("noise.components", "mixture mean must be zero"));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, f64, f64)] {
        &self.components
    }
}

impl Noise for NormalMixture {
    fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, m, s)| w * std_normal_cdf((x - m) / s))
            .sum()
    }

    fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, m, s)| w * std_normal_pdf((x - m) / s) / s)
            .sum()
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let lo = self
            .components
            .iter()
            .map(|&(_, m, s)| m - 40.0 * s)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .components
            .iter()
            .map(|&(_, m, s)| m + 40.0 * s)
            .fold(f64::NEG_INFINITY, f64::max);
        find_root(|x| self.cdf(x) - p, lo, hi, 1e-14).unwrap_or(f64::NAN)
    }

    fn stop_loss(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, m, s)| w * s * std_normal_stop_loss((x - m) / s))
            .sum()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        let mut acc = 0.0;
        for &(w, m, s) in &self.components {
            acc += w;
            if u < acc {
                return m + s * z;
            }
        }
        let &(_, m, s) = self.components.last().expect("non-empty mixture");
        m + s * z
    }

    fn name(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|(w, m, s)| format!("{w}@N({m},{s})"))
            .collect();
        format!("mixture[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadratureSpec};

    fn families() -> Vec<Box<dyn Noise>> {
        vec![
            Box::new(Normal::standard()),
            Box::new(Normal::new(0.7).unwrap()),
            Box::new(Logistic::new(1.0).unwrap()),
            Box::new(NormalMixture::new(vec![(0.2, -3.0, 0.2), (0.4, -1.0, 0.2), (0.4, 2.5, 0.2)]).unwrap()),
        ]
    }

    #[test]
    fn normal_reference_values() {
        let n = Normal::standard();
        assert_eq!(n.cdf(0.0), 0.5);
        assert!((n.pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((n.cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((n.quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((n.stop_loss(0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
    }

    #[test]
    fn stop_loss_matches_quadrature() {
        let spec = QuadratureSpec::default();
        for h in families() {
            for &x in &[-2.0, -0.3, 0.0, 0.8, 2.2] {
                let hi = h.quantile(1.0 - 1e-15);
                let direct = integrate(|s| (s - x) * h.pdf(s), x, hi, &spec).unwrap();
                assert!((direct - h.stop_loss(x)).abs() < 1e-9, "{} at {x}", h.name());
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf_and_mean_is_zero() {
        let spec = QuadratureSpec::default();
        for h in families() {
            for &p in &[1e-6, 0.1, 0.5, 0.93] {
                assert!((h.cdf(h.quantile(p)) - p).abs() < 1e-10, "{}", h.name());
            }
            let (lo, hi) = (h.quantile(1e-15), h.quantile(1.0 - 1e-15));
            let mean = integrate(|s| s * h.pdf(s), lo, hi, &spec).unwrap();
            assert!(mean.abs() < 1e-9, "{} mean {mean}", h.name());
        }
    }

    #[test]
    fn mixture_validation() {
        assert!(NormalMixture::new(vec![(0.5, 1.0, 1.0), (0.5, 0.0, 1.0)]).is_err());
        assert!(NormalMixture::new(vec![(0.5, 0.0, 1.0)]).is_err());
    }
}
