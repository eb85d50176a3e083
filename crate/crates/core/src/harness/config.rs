use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::DConvention;
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::registry::{EstimatorRegistry, PenaltyPoint};

/// Which value of the restricted eigenvalue goes into the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiChoice {
    /// Smallest Gram eigenvalue; the resulting bound is certified.
    #[default]
    Lower,
    /// Smallest sampled cone quotient; tighter but not certified.
    UpperEstimate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub records: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

fn default_methods() -> Vec<String> {
    vec!["tenet".to_string()]
}

fn default_tol() -> f64 {
    1e-8
}

fn default_phi_samples() -> usize {
    1000
}

/// Monte Carlo experiment over a `(lambda, alpha, rho)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub c: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub phi: PhiChoice,
    #[serde(default)]
    pub d_convention: DConvention,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_phi_samples")]
    pub phi_samples: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

fn check_grid(name: &str, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if let Some(v) = values.iter().find(|v| !(lo..=hi).contains(*v)) {
        return Err(Error::Config(format!(
            "{name} value {v} outside [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        check_grid("lambda", &self.lambdas, 0.0, f64::MAX)?;
        check_grid("alpha", &self.alphas, 0.0, 1.0)?;
        check_grid("rho", &self.rhos, 0.0, 1.0)?;
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::Config(format!("c must be > 0, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods list is empty".into()));
        }
        let reg = EstimatorRegistry::builtin();
        for m in &self.methods {
            reg.get(m).map_err(|_| {
                Error::Config(format!(
                    "unknown method {m:?}; known: {}",
                    reg.names().join(", ")
                ))
            })?;
        }
        Ok(())
    }

    /// Grid points in lambda-major order.
    pub fn grid(&self) -> Vec<PenaltyPoint> {
        let mut out = Vec::with_capacity(self.lambdas.len() * self.alphas.len() * self.rhos.len());
        for &lambda in &self.lambdas {
            for &alpha in &self.alphas {
                for &rho in &self.rhos {
                    out.push(PenaltyPoint { lambda, alpha, rho });
                }
            }
        }
        out
    }
}

fn default_pairs() -> usize {
    0
}

/// Source-then-target pipeline on a block-correlated design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupingConfig {
    /// Target problem; should use a `duplicated-block` covariance.
    pub scenario: Scenario,
    /// Sample size of the source data set, which shares the target's truth.
    pub source_n: usize,
    pub source_lambda: f64,
    pub source_rho: f64,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Also fit the variant without the transfer ridge term.
    #[serde(default)]
    pub remark: bool,
    /// Minimum number of precondition-met pairs the run should produce.
    #[serde(default = "default_pairs")]
    pub min_pairs: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

impl GroupingConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        check_grid("lambda", &self.lambdas, f64::MIN_POSITIVE, f64::MAX)?;
        check_grid("alpha", &self.alphas, 0.0, 1.0)?;
        check_grid("rho", &self.rhos, 0.0, 1.0)?;
        if self.rhos.contains(&1.0) {
            return Err(Error::Config("grouping bounds need rho < 1".into()));
        }
        if self.replications == 0 || self.source_n == 0 {
            return Err(Error::Config(
                "replications and source_n must be >= 1".into(),
            ));
        }
        if !(self.source_lambda > 0.0) || !(0.0..1.0).contains(&self.source_rho) {
            return Err(Error::Config(
                "source fit needs lambda > 0 and rho in [0, 1)".into(),
            ));
        }
        if !matches!(
            self.scenario.covariance,
            crate::model::Covariance::DuplicatedBlock { .. }
        ) {
            return Err(Error::Config(
                "grouping scenario needs a duplicated-block covariance".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        lambdas = [0.1, 0.2]
        alphas = [0.5]
        rhos = [0.5, 1.0]
        c = 0.5
        replications = 3
        seed = 9

        [scenario]
        n = 30
        p = 5
        s = 2
        covariance = { kind = "identity" }
        noise = { kind = "gaussian", sigma = 0.5 }
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.methods, vec!["tenet"]);
        assert_eq!(cfg.phi, PhiChoice::Lower);
        assert_eq!(cfg.d_convention, DConvention::ProofConsistent);
        assert_eq!(cfg.grid().len(), 4);
        assert_eq!(
            cfg.grid()[1],
            PenaltyPoint {
                lambda: 0.1,
                alpha: 0.5,
                rho: 1.0
            }
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            MINIMAL.replace("replications = 3", "replications = 0"),
            MINIMAL.replace("alphas = [0.5]", "alphas = []"),
            MINIMAL.replace("rhos = [0.5, 1.0]", "rhos = [1.5]"),
            MINIMAL.replace("c = 0.5", "c = 0.5\nmethods = [\"ridge\"]"),
            MINIMAL.replace("seed = 9", "seed = 9\nbogus = 1"),
            MINIMAL.replace("c = 0.5", "c = 0.0"),
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
