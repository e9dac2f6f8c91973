use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::metric::{ConformalDecayMetric, FlatMetric, MetricField};
use super::potential::{
    AngularProfile, GaussianBump, HarmonicWell, HomogeneousPotential, PotentialSpec, RadialPower,
    ScalarField, ZeroField,
};
use super::SymbolModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum MetricConfig {
    #[default]
    Flat,
    /// `(1 + amplitude <x>^(-mu)) identity`
    Conformal { amplitude: f64, mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum LongRangeConfig {
    #[default]
    Zero,
    Homogeneous {
        beta: f64,
        #[serde(default = "default_r0")]
        r0: f64,
        profile: AngularProfile,
    },
    /// `omega^2 |x|^2 / 2`; violates the decay assumptions.
    Harmonic { omega: f64 },
}

fn default_r0() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum ShortRangeConfig {
    #[default]
    Zero,
    /// `amplitude <x>^power`
    RadialPower { amplitude: f64, power: f64 },
    /// `amplitude exp(-|x|^2 / (2 width^2))`
    Gaussian { amplitude: f64, width: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default)]
    pub long_range: LongRangeConfig,
    #[serde(default)]
    pub short_range: ShortRangeConfig,
}

/// Model section of an experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    /// Shared long-range exponent; derived from the components when absent.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_nu")]
    pub nu: f64,
}

fn default_nu() -> f64 {
    2.0
}

impl ModelConfig {
    pub fn free(dim: usize) -> Self {
        Self {
            dim,
            metric: MetricConfig::Flat,
            potential: PotentialConfig::default(),
            mu: None,
            nu: default_nu(),
        }
    }

    /// Homogeneity degree of the long-range part, if any.
    pub fn beta(&self) -> Option<f64> {
        match &self.potential.long_range {
            LongRangeConfig::Homogeneous { beta, .. } => Some(*beta),
            _ => None,
        }
    }

    pub fn blend_radius(&self) -> Option<f64> {
        match &self.potential.long_range {
            LongRangeConfig::Homogeneous { r0, .. } => Some(*r0),
            _ => None,
        }
    }

    /// Exponent `mu` used by the model: explicit, or the weakest component.
    pub fn effective_mu(&self) -> f64 {
        if let Some(mu) = self.mu {
            return mu;
        }
        let metric_mu = match &self.metric {
            MetricConfig::Flat => 1.0,
            MetricConfig::Conformal { mu, .. } => *mu,
        };
        let potential_mu = self.beta().map_or(1.0, |b| (2.0 - b).min(1.0));
        metric_mu.min(potential_mu)
    }

    pub fn build(&self) -> Result<SymbolModel> {
        let d = self.dim;
        if d == 0 {
            return Err(Error::Configuration("model.dim must be positive".into()));
        }
        let metric: Arc<dyn MetricField> = match &self.metric {
            MetricConfig::Flat => Arc::new(FlatMetric::new(d)),
            MetricConfig::Conformal { amplitude, mu } => {
                if !(*mu > 0.0) {
                    return Err(Error::Configuration(format!(
                        "metric mu must be positive, got {mu}"
                    )));
                }
                if !(*amplitude > -1.0) {
                    return Err(Error::Configuration(format!(
                        "metric amplitude {amplitude} makes a(x) indefinite"
                    )));
                }
                Arc::new(ConformalDecayMetric::new(d, *amplitude, *mu))
            }
        };
        let mu = self.effective_mu();
        let nu = self.nu;
        let mut spec = match &self.potential.long_range {
            LongRangeConfig::Zero => PotentialSpec::zero(d, mu, nu),
            LongRangeConfig::Homogeneous { beta, r0, profile } => {
                let h = HomogeneousPotential::new(d, *beta, *r0, profile.clone())?;
                PotentialSpec::homogeneous(h).with_exponents(mu, nu)
            }
            LongRangeConfig::Harmonic { omega } => PotentialSpec::zero(d, mu, nu)
                .with_long_range(Arc::new(HarmonicWell::new(d, *omega)))
                .non_admissible(),
        };
        let short: Arc<dyn ScalarField> = match &self.potential.short_range {
            ShortRangeConfig::Zero => Arc::new(ZeroField::new(d)),
            ShortRangeConfig::RadialPower { amplitude, power } => {
                Arc::new(RadialPower::new(d, *amplitude, *power))
            }
            ShortRangeConfig::Gaussian { amplitude, width } => {
                if !(*width > 0.0) {
                    return Err(Error::Configuration(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
                Arc::new(GaussianBump::new(d, *amplitude, *width))
            }
        };
        spec = spec.with_short_range(short);
        SymbolModel::new(metric, spec)
    }
}
