use nalgebra::DVector;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::linalg::l1;

/// Parameters of the regularizer
///
/// `R = alpha * {rho1 |b|_1 + (1 - rho1) |b|_2^2}
///    + (1 - alpha) * {rho1 |b - bt|_1 + rho2 |b - bt|_2^2}`
///
/// scaled by `lambda`. A coupled spec has `rho2 = 1 - rho1`, which is the
/// Transfer Elastic Net penalty; the uncoupled form with `rho2 = 0` moves
/// all transfer through the l1 term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltySpec {
    lambda: f64,
    alpha: f64,
    rho1: f64,
    rho2: f64,
    coupled: bool,
    #[serde(skip)]
    beta_tilde: DVector<f64>,
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

impl PenaltySpec {
    pub fn coupled(lambda: f64, alpha: f64, rho: f64, beta_tilde: DVector<f64>) -> Result<Self> {
        let spec = Self {
            lambda,
            alpha,
            rho1: rho,
            rho2: 1.0 - rho,
            coupled: true,
            beta_tilde,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn generalized(
        lambda: f64,
        alpha: f64,
        rho1: f64,
        rho2: f64,
        beta_tilde: DVector<f64>,
    ) -> Result<Self> {
        let spec = Self {
            lambda,
            alpha,
            rho1,
            rho2,
            coupled: false,
            beta_tilde,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        unit_interval("alpha", self.alpha)?;
        unit_interval("rho1", self.rho1)?;
        unit_interval("rho2", self.rho2)?;
        if self.beta_tilde.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "source estimate must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn rho1(&self) -> f64 {
        self.rho1
    }
    pub fn rho2(&self) -> f64 {
        self.rho2
    }
    pub fn is_coupled(&self) -> bool {
        self.coupled
    }
    pub fn beta_tilde(&self) -> &DVector<f64> {
        &self.beta_tilde
    }

    pub fn with_beta_tilde(&self, beta_tilde: DVector<f64>) -> Self {
        Self {
            beta_tilde,
            ..self.clone()
        }
    }

    /// `lambda * alpha * rho1`.
    pub fn l1_weight(&self) -> f64 {
        self.lambda * self.alpha * self.rho1
    }
    /// `lambda * (1 - alpha) * rho1`.
    pub fn transfer_l1_weight(&self) -> f64 {
        self.lambda * (1.0 - self.alpha) * self.rho1
    }
    /// `lambda * alpha * (1 - rho1)`.
    pub fn ridge_weight(&self) -> f64 {
        self.lambda * self.alpha * (1.0 - self.rho1)
    }
    /// `lambda * (1 - alpha) * rho2`.
    pub fn transfer_ridge_weight(&self) -> f64 {
        self.lambda * (1.0 - self.alpha) * self.rho2
    }

    /// `lambda * R(beta, beta_tilde)`.
    pub fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        check_len(
            "coefficient length vs source length",
            self.beta_tilde.len(),
            beta.len(),
        )?;
        let diff = beta - &self.beta_tilde;
        Ok(self.l1_weight() * l1(beta)
            + self.ridge_weight() * beta.norm_squared()
            + self.transfer_l1_weight() * l1(&diff)
            + self.transfer_ridge_weight() * diff.norm_squared())
    }
}
