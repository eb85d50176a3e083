//! Named estimators behind a common trait, selected at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bound_enet, bound_tenet, bound_tlasso, BoundReport, DConvention, Ingredients, Method,
};
use crate::error::{Error, Result};
use crate::solver::PenaltySpec;

/// One point of a tuning grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPoint {
    pub lambda: f64,
    pub alpha: f64,
    pub rho: f64,
}

pub trait Estimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn method(&self) -> Method;

    /// The `(lambda, alpha, rho)` the estimator actually uses at `point`;
    /// specializations pin one coordinate.
    fn effective(&self, point: PenaltyPoint) -> PenaltyPoint;

    /// The vector the penalty shrinks toward, given the available source.
    fn anchor(&self, beta_tilde: &DVector<f64>) -> DVector<f64>;

    fn penalty(&self, point: PenaltyPoint, beta_tilde: &DVector<f64>) -> Result<PenaltySpec>;

    fn bound(&self, ing: &Ingredients, phi: f64, convention: DConvention) -> Result<BoundReport>;
}

pub struct TransferElasticNet;
pub struct ElasticNet;
pub struct TransferLasso;

impl Estimator for TransferElasticNet {
    fn name(&self) -> &'static str {
        "tenet"
    }

    fn method(&self) -> Method {
        Method::TENet
    }

    fn effective(&self, point: PenaltyPoint) -> PenaltyPoint {
        point
    }

    fn anchor(&self, beta_tilde: &DVector<f64>) -> DVector<f64> {
        beta_tilde.clone()
    }

    fn penalty(&self, point: PenaltyPoint, beta_tilde: &DVector<f64>) -> Result<PenaltySpec> {
        PenaltySpec::coupled(point.lambda, point.alpha, point.rho, beta_tilde.clone())
    }

    fn bound(&self, ing: &Ingredients, phi: f64, convention: DConvention) -> Result<BoundReport> {
        bound_tenet(ing, phi, convention)
    }
}

impl Estimator for ElasticNet {
    fn name(&self) -> &'static str {
        "enet"
    }

    fn method(&self) -> Method {
        Method::ENet
    }

    fn effective(&self, point: PenaltyPoint) -> PenaltyPoint {
        PenaltyPoint {
            alpha: 1.0,
            ..point
        }
    }

    fn anchor(&self, beta_tilde: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(beta_tilde.len())
    }

    fn penalty(&self, point: PenaltyPoint, beta_tilde: &DVector<f64>) -> Result<PenaltySpec> {
        PenaltySpec::coupled(point.lambda, 1.0, point.rho, self.anchor(beta_tilde))
    }

    fn bound(&self, ing: &Ingredients, phi: f64, _: DConvention) -> Result<BoundReport> {
        bound_enet(ing, phi)
    }
}

impl Estimator for TransferLasso {
    fn name(&self) -> &'static str {
        "tlasso"
    }

    fn method(&self) -> Method {
        Method::TLasso
    }

    fn effective(&self, point: PenaltyPoint) -> PenaltyPoint {
        PenaltyPoint { rho: 1.0, ..point }
    }

    fn anchor(&self, beta_tilde: &DVector<f64>) -> DVector<f64> {
        beta_tilde.clone()
    }

    fn penalty(&self, point: PenaltyPoint, beta_tilde: &DVector<f64>) -> Result<PenaltySpec> {
        PenaltySpec::generalized(point.lambda, point.alpha, 1.0, 0.0, beta_tilde.clone())
    }

    fn bound(&self, ing: &Ingredients, phi: f64, _: DConvention) -> Result<BoundReport> {
        bound_tlasso(ing, phi)
    }
}

#[derive(Clone, Default)]
pub struct EstimatorRegistry {
    entries: BTreeMap<String, Arc<dyn Estimator>>,
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding `tenet`, `enet` and `tlasso`.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(TransferElasticNet));
        reg.register(Arc::new(ElasticNet));
        reg.register(Arc::new(TransferLasso));
        reg
    }

    /// Adds `est`, replacing any estimator already registered under its name.
    pub fn register(&mut self, est: Arc<dyn Estimator>) {
        self.entries.insert(est.name().to_string(), est);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Estimator>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownEstimator(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}
