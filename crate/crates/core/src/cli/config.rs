use serde::{Deserialize, Serialize};

use crate::distributions::ValueDistribution;
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::numerics::{RandomStream, DEFAULT_CHUNK, DEFAULT_SAMPLES};
use crate::resale::{Budget, Method, ResalePolicy};

pub const MIN_MC_SAMPLES: usize = 1_000;

fn default_true() -> bool {
    true
}

fn default_method() -> Method {
    Method::MonteCarlo
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_seed() -> u64 {
    42
}

fn default_rel_tol() -> f64 {
    1e-9
}

/// One experiment: builders, resale policy and numerical settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub builders: Vec<ValueDistribution>,
    pub policy: ResalePolicy,
    #[serde(default = "default_true")]
    pub include_nonbuilder: bool,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config { path, message: e.into_inner().to_string() }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let config_err = |path: &str, message: String| Error::Config { path: path.into(), message };
        if self.builders.len() < 2 {
            return Err(config_err("builders", format!("need at least two builders, got {}", self.builders.len())));
        }
        if self.method == Method::MonteCarlo && self.samples < MIN_MC_SAMPLES {
            return Err(config_err("samples", format!("monte_carlo needs at least {MIN_MC_SAMPLES} samples")));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(config_err("rel_tol", format!("must lie in (0, 1e-2], got {}", self.rel_tol)));
        }
        if self.method == Method::Quadrature && !(self.builders.len() == 2 && self.policy == ResalePolicy::OptimalOffer)
        {
            return Err(config_err(
                "method",
                "quadrature is available for two builders with the optimal_offer policy only".into(),
            ));
        }
        self.game_spec().map(|_| ()).map_err(|e| match e {
            Error::Config { .. } => e,
            other => config_err("policy", other.to_string()),
        })
    }

    pub fn budget(&self) -> Budget {
        Budget { samples: self.samples, rel_tol: self.rel_tol, chunk: DEFAULT_CHUNK }
    }

    pub fn stream(&self) -> RandomStream {
        RandomStream::new(self.seed)
    }

    pub fn game_spec(&self) -> Result<GameSpec> {
        let spec = GameSpec::new(self.builders.clone(), self.policy, self.method, self.budget(), self.stream())?;
        Ok(if self.include_nonbuilder { spec } else { spec.without_nonbuilder() })
    }
}

/// Two uniform builders, `U[0, 5/4]` against `U[0, 1]`, optimal offers,
/// evaluated by quadrature.
pub fn example1() -> ExperimentConfig {
    ExperimentConfig {
        name: "example1".into(),
        builders: vec![
            ValueDistribution::uniform(0.0, 1.25).expect("valid"),
            ValueDistribution::uniform(0.0, 1.0).expect("valid"),
        ],
        policy: ResalePolicy::OptimalOffer,
        include_nonbuilder: true,
        method: Method::Quadrature,
        samples: DEFAULT_SAMPLES,
        seed: 42,
        rel_tol: 1e-9,
    }
}

/// Three lognormal builders with `mu = (2.18, 1.99, 1.0)`, `sigma = 1`,
/// reselling through a second-price auction with reserve three times the
/// owner's value.
pub fn example2() -> ExperimentConfig {
    ExperimentConfig {
        name: "example2".into(),
        builders: [2.18, 1.99, 1.0].iter().map(|&mu| ValueDistribution::lognormal(mu, 1.0).expect("valid")).collect(),
        policy: ResalePolicy::MarkupSecondPrice { markup: 3.0 },
        include_nonbuilder: true,
        method: Method::MonteCarlo,
        samples: DEFAULT_SAMPLES,
        seed: 42,
        rel_tol: 1e-9,
    }
}
