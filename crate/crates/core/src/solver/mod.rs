//! Coordinate-descent minimizer of the Transfer Elastic Net objective
//!
//! `L(b) = 1/(2n) |y - X b|^2 + lambda * R(b, bt)`
//!
//! Each coordinate update solves its univariate subproblem exactly with
//! [`two_kink_prox`]; convergence is certified by the KKT residual rather
//! than by the size of the last step.

mod penalty;
mod prox;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use penalty::PenaltySpec;
pub use prox::{soft_threshold, two_kink_prox, two_kink_subdifferential};

use crate::error::{check_len, Error, Result};
use crate::linalg::{gram, sym_eigenvalues};
use crate::model::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepOrder {
    #[default]
    Cyclic,
    Randomized {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// KKT residual at which the fit is declared converged.
    pub tol: f64,
    pub max_sweeps: usize,
    pub order: SweepOrder,
    /// Initial coefficients. Defaults to the source estimate, which also fixes
    /// the tie-breaking when the objective is not strictly convex.
    pub warm_start: Option<DVector<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 10_000,
            order: SweepOrder::Cyclic,
            warm_start: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every sweep.
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_hat)
    }
}

fn check_dims(beta: &DVector<f64>, data: &Dataset, pen: &PenaltySpec) -> Result<()> {
    check_len("coefficient length vs design columns", data.p(), beta.len())?;
    check_len(
        "source length vs design columns",
        data.p(),
        pen.beta_tilde().len(),
    )
}

/// Value of the objective at `beta`.
pub fn objective(beta: &DVector<f64>, data: &Dataset, pen: &PenaltySpec) -> Result<f64> {
    check_dims(beta, data, pen)?;
    let resid = data.y() - data.x() * beta;
    Ok(resid.norm_squared() / (2.0 * data.n() as f64) + pen.value(beta)?)
}

/// Distance from zero to the subdifferential interval of coordinate `j`,
/// given `grad_j`, the derivative of every smooth term.
fn coordinate_violation(grad_j: f64, beta_j: f64, tilde_j: f64, a: f64, c: f64) -> f64 {
    let (mut lo, mut hi) = (grad_j, grad_j);
    let mut widen = |x: f64, w: f64| {
        if x > 0.0 {
            lo += w;
            hi += w;
        } else if x < 0.0 {
            lo -= w;
            hi -= w;
        } else {
            lo -= w;
            hi += w;
        }
    };
    widen(beta_j, a);
    widen(beta_j - tilde_j, c);
    lo.max(-hi).max(0.0)
}

fn kkt_from_correlations(xtr_over_n: &DVector<f64>, beta: &DVector<f64>, pen: &PenaltySpec) -> f64 {
    let tilde = pen.beta_tilde();
    let (a, c) = (pen.l1_weight(), pen.transfer_l1_weight());
    let (r1, r2) = (pen.ridge_weight(), pen.transfer_ridge_weight());
    (0..beta.len())
        .map(|j| {
            let grad = -xtr_over_n[j] + 2.0 * r1 * beta[j] + 2.0 * r2 * (beta[j] - tilde[j]);
            coordinate_violation(grad, beta[j], tilde[j], a, c)
        })
        .fold(0.0, f64::max)
}

/// Largest per-coordinate distance from zero to the subdifferential of the
/// objective at `beta`. Zero exactly at the minimizer.
pub fn kkt_residual(beta: &DVector<f64>, data: &Dataset, pen: &PenaltySpec) -> Result<f64> {
    check_dims(beta, data, pen)?;
    let resid = data.y() - data.x() * beta;
    let xtr = data.x().tr_mul(&resid) / data.n() as f64;
    Ok(kkt_from_correlations(&xtr, beta, pen))
}

/// Coordinate-descent state: the current iterate and its residual `y - X b`.
///
/// Exposed so callers can drive single coordinate updates, e.g. to observe
/// the objective after every step.
pub struct CoordinateDescent<'a> {
    data: &'a Dataset,
    pen: &'a PenaltySpec,
    beta: DVector<f64>,
    resid: DVector<f64>,
    col_sq: Vec<f64>,
}

impl<'a> CoordinateDescent<'a> {
    pub fn new(data: &'a Dataset, pen: &'a PenaltySpec, start: DVector<f64>) -> Result<Self> {
        check_dims(&start, data, pen)?;
        let n = data.n() as f64;
        let col_sq: Vec<f64> = data
            .x()
            .column_iter()
            .map(|c| c.norm_squared() / n)
            .collect();
        let resid = data.y() - data.x() * &start;
        Ok(Self {
            data,
            pen,
            beta: start,
            resid,
            col_sq,
        })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// Curvature of coordinate `j`'s subproblem:
    /// `|X_j|^2/n + 2 lambda [alpha (1 - rho1) + (1 - alpha) rho2]`.
    pub fn curvature(&self, j: usize) -> f64 {
        self.col_sq[j] + 2.0 * (self.pen.ridge_weight() + self.pen.transfer_ridge_weight())
    }

    /// Exactly minimizes the objective over coordinate `j`.
    pub fn update(&mut self, j: usize) -> Result<f64> {
        let n = self.data.n() as f64;
        let col = self.data.x().column(j);
        let old = self.beta[j];
        let tilde_j = self.pen.beta_tilde()[j];
        let q = self.curvature(j);
        let a = self.pen.l1_weight();
        let c = self.pen.transfer_l1_weight();

        let new = if q > 0.0 {
            let z = col.dot(&self.resid) / n
                + self.col_sq[j] * old
                + 2.0 * self.pen.transfer_ridge_weight() * tilde_j;
            two_kink_prox(q, z, a, c, tilde_j)?
        } else if a == 0.0 && c == 0.0 {
            // empty column with no penalty on it: any value is optimal
            old
        } else {
            return Err(Error::DegenerateCurvature(j));
        };

        let step = new - old;
        if step != 0.0 {
            self.resid.axpy(-step, &col, 1.0);
            self.beta[j] = new;
        }
        Ok(new)
    }

    pub fn sweep(&mut self, order: &[usize]) -> Result<()> {
        for &j in order {
            self.update(j)?;
        }
        Ok(())
    }

    /// Recomputes the residual from scratch and returns `(objective, kkt)`.
    fn refresh(&mut self) -> Result<(f64, f64)> {
        self.resid = self.data.y() - self.data.x() * &self.beta;
        let n = self.data.n() as f64;
        let xtr = self.data.x().tr_mul(&self.resid) / n;
        let obj = self.resid.norm_squared() / (2.0 * n) + self.pen.value(&self.beta)?;
        Ok((obj, kkt_from_correlations(&xtr, &self.beta, self.pen)))
    }
}

/// Minimizes the objective. A fit that hits `max_sweeps` is returned with
/// `converged = false` instead of an error.
pub fn fit(data: &Dataset, pen: &PenaltySpec, opts: &SolverOptions) -> Result<FitResult> {
    opts.validate()?;
    let start = opts
        .warm_start
        .clone()
        .unwrap_or_else(|| pen.beta_tilde().clone());
    check_dims(&start, data, pen)?;

    if pen.lambda() == 0.0 && needs_gradient_fallback(data.x()) {
        return least_squares_gradient(data, pen, start, opts);
    }

    let p = data.p();
    let mut cd = CoordinateDescent::new(data, pen, start)?;
    let mut order: Vec<usize> = (0..p).collect();
    let mut rng = match opts.order {
        SweepOrder::Randomized { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        SweepOrder::Cyclic => None,
    };

    let (mut obj, mut kkt) = cd.refresh()?;
    let mut trace = Vec::new();
    let mut sweeps = 0;
    while kkt > opts.tol && sweeps < opts.max_sweeps {
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        cd.sweep(&order)?;
        sweeps += 1;
        (obj, kkt) = cd.refresh()?;
        trace.push(obj);
    }

    Ok(FitResult {
        beta_hat: cd.beta.as_slice().to_vec(),
        objective: obj,
        kkt_residual: kkt,
        iterations: sweeps,
        converged: kkt <= opts.tol,
        trace,
    })
}

fn needs_gradient_fallback(x: &DMatrix<f64>) -> bool {
    if x.ncols() > x.nrows() {
        return true;
    }
    let eig = sym_eigenvalues(&gram(x));
    let top = eig.last().copied().unwrap_or(0.0);
    eig[0] <= 1e-12 * top.max(f64::MIN_POSITIVE)
}

/// Fixed-step gradient descent on the unpenalized least-squares loss with
/// step `1 / |X^T X / n|_2`, used when `lambda = 0` and the Gram matrix is
/// singular.
fn least_squares_gradient(
    data: &Dataset,
    pen: &PenaltySpec,
    start: DVector<f64>,
    opts: &SolverOptions,
) -> Result<FitResult> {
    let n = data.n() as f64;
    let top = sym_eigenvalues(&gram(data.x()))
        .last()
        .copied()
        .unwrap_or(0.0);
    let mut beta = start;
    let mut trace = Vec::new();
    let budget = opts.max_sweeps.saturating_mul(10);
    let mut grad = -data.x().tr_mul(&(data.y() - data.x() * &beta)) / n;
    let mut iters = 0;
    if top > 0.0 {
        while grad.amax() > opts.tol && iters < budget {
            beta.axpy(-1.0 / top, &grad, 1.0);
            let resid = data.y() - data.x() * &beta;
            grad = -data.x().tr_mul(&resid) / n;
            trace.push(resid.norm_squared() / (2.0 * n));
            iters += 1;
        }
    }
    let kkt = grad.amax();
    Ok(FitResult {
        objective: objective(&beta, data, pen)?,
        beta_hat: beta.as_slice().to_vec(),
        kkt_residual: kkt,
        iterations: iters,
        converged: kkt <= opts.tol,
        trace,
    })
}

/// Elastic Net: `alpha = 1`, no source.
pub fn fit_enet(data: &Dataset, lambda: f64, rho: f64, opts: &SolverOptions) -> Result<FitResult> {
    let pen = PenaltySpec::coupled(lambda, 1.0, rho, DVector::zeros(data.p()))?;
    fit(data, &pen, opts)
}

/// Transfer Lasso: `rho1 = 1`, `rho2 = 0`. The default warm start at the
/// source makes the result deterministic when the minimizer is not unique.
pub fn fit_tlasso(
    data: &Dataset,
    beta_tilde: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<FitResult> {
    let pen = PenaltySpec::generalized(lambda, alpha, 1.0, 0.0, beta_tilde.clone())?;
    fit(data, &pen, opts)
}
