use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::contracts::{FirstStageRule, TabulatedRule, VirtualValuePower};
use crate::error::{Error, Result};
use crate::model::{Beta, Logistic, Model, Noise, Normal, Prior, SignalFamily, TruthOrNoise, Uniform};
use crate::numerics::{GridSpec, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Uniform,
    Beta { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Normal { scale: f64 },
    Logistic { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalSpec {
    TruthOrNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcSpec {
    pub lattice_n: usize,
    /// Relative tolerance, scaled by max |U(v₁, v₁)|.
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub n_draws: u64,
    pub seed: u64,
}

/// A complete model and run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub prior: PriorSpec,
    pub noise: NoiseSpec,
    pub signal: SignalSpec,
    pub grid: GridSpec,
    pub quadrature: QuadratureSpec,
    pub ic: IcSpec,
    pub mc: McSpec,
    pub output_dir: PathBuf,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(path.display().to_string(), format!("cannot read spec: {e}")))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match self.prior {
            PriorSpec::Uniform => {}
            PriorSpec::Beta { alpha, beta } => {
                positive("prior.params.alpha", alpha)?;
                positive("prior.params.beta", beta)?;
            }
        }
        match self.noise {
            NoiseSpec::Normal { scale } | NoiseSpec::Logistic { scale } => positive("noise.params.scale", scale)?,
        }
        self.grid.validate()?;
        self.quadrature.validate()?;
        if self.ic.lattice_n < 2 {
            return Err(Error::invalid("ic.lattice_n", "must be at least 2"));
        }
        positive("ic.tol", self.ic.tol)?;
        if self.mc.n_draws == 0 {
            return Err(Error::invalid("mc.n_draws", "must be at least 1"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::invalid("output_dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        let prior: Arc<dyn Prior> = match self.prior {
            PriorSpec::Uniform => Arc::new(Uniform),
            PriorSpec::Beta { alpha, beta } => Arc::new(Beta::new(alpha, beta)?),
        };
        let signal: Arc<dyn SignalFamily> = match self.noise {
            NoiseSpec::Normal { scale } => truth_or_noise(Normal::new(scale)?),
            NoiseSpec::Logistic { scale } => truth_or_noise(Logistic::new(scale)?),
        };
        Model::new(prior, signal, self.quadrature)
    }
}

fn truth_or_noise<N: Noise + 'static>(noise: N) -> Arc<dyn SignalFamily> {
    Arc::new(TruthOrNoise::new(noise))
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be a positive finite number"))
    }
}

/// First-stage rule to audit, read from a mechanism file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    /// q₁ = ψ^power above `from` (default v₁*), zero below.
    VirtualValuePower {
        power: f64,
        from: Option<f64>,
    },
    Tabulated {
        v1: Vec<f64>,
        q1: Vec<f64>,
        cutoff: f64,
    },
}

impl MechanismSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(path.display().to_string(), format!("cannot read mechanism: {e}")))?;
        Self::from_json(&text)
    }

    pub fn build_rule(&self, model: &Model) -> Result<Arc<dyn FirstStageRule>> {
        Ok(match self {
            MechanismSpec::VirtualValuePower { power, from } => {
                Arc::new(VirtualValuePower::new(model, *power, from.unwrap_or(model.v1_star()))?)
            }
            MechanismSpec::Tabulated { v1, q1, cutoff } => {
                Arc::new(TabulatedRule::new(v1.clone(), q1.clone(), *cutoff)?)
            }
        })
    }
}
