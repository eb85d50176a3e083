//! Grouping-effect bounds: how far apart the estimates of two correlated
//! predictors can be.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{l1, l2};
use crate::model::Dataset;
use crate::solver::PenaltySpec;

/// Coordinates within this distance of a kink count as sitting on it.
pub const KINK_TOL: f64 = 1e-12;

/// One CSV row of a grouping experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingReport {
    pub j: usize,
    pub k: usize,
    pub r_jk: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub bound: f64,
    pub observed: f64,
    pub preconditions_met: bool,
}

impl GroupingReport {
    /// The inequality the bound promises, checked only when it applies.
    pub fn holds(&self, tol: f64) -> bool {
        !self.preconditions_met || self.observed <= self.bound + tol
    }
}

fn check_index(p: usize, index: usize) -> Result<()> {
    if index >= p {
        return Err(Error::IndexOutOfRange { index, p });
    }
    Ok(())
}

/// `X_j^T X_k / n`, the sample correlation for standardized columns.
pub fn column_correlation(x: &DMatrix<f64>, j: usize, k: usize) -> Result<f64> {
    check_index(x.ncols(), j)?;
    check_index(x.ncols(), k)?;
    let r = x.column(j).dot(&x.column(k)) / x.nrows() as f64;
    Ok(r.clamp(-1.0, 1.0))
}

/// Both strict sign conditions: `b_j b_k > 0` and
/// `(b_j - t_j)(b_k - t_k) > 0`. A coordinate within [`KINK_TOL`] of `0` or
/// of its source value fails them.
pub fn grouping_preconditions(
    beta_hat: &DVector<f64>,
    beta_tilde: &DVector<f64>,
    j: usize,
    k: usize,
) -> bool {
    if beta_hat.len() != beta_tilde.len() || j >= beta_hat.len() || k >= beta_hat.len() {
        return false;
    }
    let off_kink = |x: f64| x.abs() > KINK_TOL;
    let (bj, bk) = (beta_hat[j], beta_hat[k]);
    let (dj, dk) = (bj - beta_tilde[j], bk - beta_tilde[k]);
    [bj, bk, dj, dk].into_iter().all(off_kink) && bj * bk > 0.0 && dj * dk > 0.0
}

fn report(
    data: &Dataset,
    beta_hat: &DVector<f64>,
    beta_tilde: &DVector<f64>,
    z: f64,
    shift: f64,
    j: usize,
    k: usize,
) -> Result<GroupingReport> {
    check_len("estimate length", data.p(), beta_hat.len())?;
    let r_jk = column_correlation(data.x(), j, k)?;
    Ok(GroupingReport {
        j,
        k,
        r_jk,
        z,
        bound: z * (1.0 - r_jk).max(0.0).sqrt() + shift,
        observed: (beta_hat[j] - beta_hat[k]).abs(),
        preconditions_met: grouping_preconditions(beta_hat, beta_tilde, j, k),
    })
}

/// Grouping bound for the coupled penalty:
/// `Z sqrt(1 - r_jk) + (1 - alpha)|t_j - t_k|` with
/// `Z^2 = (|y|^2 + 2n lambda (1-alpha) rho |t|_1 + 2n lambda (1-alpha)(1-rho) |t|^2)
///        / (2n lambda^2 (1-rho)^2)`.
pub fn grouping_bound(
    data: &Dataset,
    pen: &PenaltySpec,
    beta_hat: &DVector<f64>,
    j: usize,
    k: usize,
) -> Result<GroupingReport> {
    if !pen.is_coupled() {
        return Err(Error::WrongPenaltyShape(
            "grouping bound needs the coupled penalty",
        ));
    }
    let (lambda, alpha, rho) = (pen.lambda(), pen.alpha(), pen.rho1());
    if lambda == 0.0 {
        return Err(Error::DegenerateParameters(
            "grouping bound needs lambda != 0",
        ));
    }
    if rho == 1.0 {
        return Err(Error::DegenerateParameters("grouping bound needs rho != 1"));
    }
    let tilde = pen.beta_tilde();
    check_index(data.p(), j)?;
    check_index(data.p(), k)?;
    let n = data.n() as f64;
    let num = data.y().norm_squared()
        + 2.0 * n * lambda * (1.0 - alpha) * rho * l1(tilde)
        + 2.0 * n * lambda * (1.0 - alpha) * (1.0 - rho) * tilde.norm_squared();
    let z = (num / (2.0 * n * (lambda * (1.0 - rho)).powi(2))).sqrt();
    let shift = (1.0 - alpha) * (tilde[j] - tilde[k]).abs();
    report(data, beta_hat, tilde, z, shift, j, k)
}

/// Grouping bound for the penalty without the transfer ridge term
/// (`rho2 = 0`): `Z sqrt(1 - r_jk)` with
/// `Z^2 = (|y|^2 + 2n lambda (1-alpha) rho1 |t|_1) / (2n alpha^2 lambda^2 (1-rho1)^2)`.
pub fn grouping_bound_remark(
    data: &Dataset,
    pen: &PenaltySpec,
    beta_hat: &DVector<f64>,
    j: usize,
    k: usize,
) -> Result<GroupingReport> {
    if pen.is_coupled() || pen.rho2() != 0.0 {
        return Err(Error::WrongPenaltyShape("remark bound needs rho2 = 0"));
    }
    let (lambda, alpha, rho1) = (pen.lambda(), pen.alpha(), pen.rho1());
    if alpha == 0.0 || rho1 == 1.0 || lambda == 0.0 {
        return Err(Error::DegenerateParameters(
            "remark bound needs alpha != 0, rho1 != 1 and lambda != 0",
        ));
    }
    let tilde = pen.beta_tilde();
    check_index(data.p(), j)?;
    check_index(data.p(), k)?;
    let n = data.n() as f64;
    let num = data.y().norm_squared() + 2.0 * n * lambda * (1.0 - alpha) * rho1 * l1(tilde);
    let z = (num / (2.0 * n * (alpha * lambda * (1.0 - rho1)).powi(2))).sqrt();
    report(data, beta_hat, tilde, z, 0.0, j, k)
}

/// Elastic Net grouping bound on the source side:
/// `|y'|_2 sqrt(2m(1 - r'_jk)) / (2m lambda' (1 - rho'))`.
pub fn source_grouping_bound(
    source: &Dataset,
    lambda_prime: f64,
    rho_prime: f64,
    j: usize,
    k: usize,
) -> Result<f64> {
    if lambda_prime == 0.0 || rho_prime == 1.0 {
        return Err(Error::DegenerateParameters(
            "source bound needs lambda' != 0 and rho' != 1",
        ));
    }
    let m = source.n() as f64;
    let r = column_correlation(source.x(), j, k)?;
    Ok(l2(source.y()) * (2.0 * m * (1.0 - r).max(0.0)).sqrt()
        / (2.0 * m * lambda_prime * (1.0 - rho_prime)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_design, standardize, Covariance, DesignSpec};
    use crate::solver::{fit, fit_enet, SolverOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn duplicated(seed: u64, n: usize, p: usize, r: f64) -> Dataset {
        let spec = DesignSpec {
            n,
            p,
            covariance: Covariance::DuplicatedBlock { r, group_size: 2 },
        };
        let mut x = generate_design(&spec, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let beta = DVector::from_fn(p, |j, _| if j < 4 { 1.0 } else { 0.0 });
        if r == 1.0 {
            let c0 = x.column(0).into_owned();
            x.set_column(1, &c0);
        }
        let y = &x * beta + DVector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        standardize(&y, &x).unwrap().0
    }

    #[test]
    fn correlation_examples() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0,
            ],
        );
        assert_eq!(column_correlation(&x, 1, 1).unwrap(), 1.0);
        assert_eq!(column_correlation(&x, 0, 1).unwrap(), 0.0);
        let dup = DMatrix::from_fn(4, 2, |i, _| x[(i, 0)]);
        assert_eq!(column_correlation(&dup, 0, 1).unwrap(), 1.0);
        assert!(matches!(
            column_correlation(&x, 0, 3),
            Err(Error::IndexOutOfRange { index: 3, p: 3 })
        ));
    }

    #[test]
    fn precondition_examples() {
        let zero = DVector::zeros(2);
        assert!(grouping_preconditions(
            &DVector::from_vec(vec![1.0, 2.0]),
            &zero,
            0,
            1
        ));
        assert!(!grouping_preconditions(
            &DVector::from_vec(vec![1.0, -1.0]),
            &zero,
            0,
            1
        ));
        let tilde = DVector::from_vec(vec![1.5, 1.0]);
        assert!(!grouping_preconditions(
            &DVector::from_vec(vec![1.0, 2.0]),
            &tilde,
            0,
            1
        ));
        assert!(!grouping_preconditions(
            &DVector::from_vec(vec![1.0, 1.0]),
            &tilde,
            0,
            1
        ));
    }

    #[test]
    fn alpha_one_is_classical_enet_bound() {
        let data = duplicated(1, 60, 6, 0.95);
        let (lambda, rho) = (0.2, 0.4);
        let tilde = DVector::from_fn(6, |j, _| j as f64 - 2.0);
        let pen = PenaltySpec::coupled(lambda, 1.0, rho, tilde).unwrap();
        let beta = DVector::zeros(6);
        let rep = grouping_bound(&data, &pen, &beta, 0, 1).unwrap();
        let n = 60.0f64;
        let z = l2(data.y()) / (lambda * (1.0 - rho) * (2.0 * n).sqrt());
        assert!((rep.z - z).abs() < 1e-12 * z);
        assert!((rep.bound - z * (1.0 - rep.r_jk).sqrt()).abs() < 1e-12 * z);

        let remark =
            PenaltySpec::generalized(lambda, 1.0, rho, 0.0, pen.beta_tilde().clone()).unwrap();
        let rep2 = grouping_bound_remark(&data, &remark, &beta, 0, 1).unwrap();
        assert!((rep2.bound - rep.bound).abs() < 1e-12 * z);
    }

    #[test]
    fn degenerate_parameters_rejected() {
        let data = duplicated(2, 30, 4, 0.9);
        let b = DVector::zeros(4);
        let t = DVector::zeros(4);
        let rho_one = PenaltySpec::coupled(0.2, 0.5, 1.0, t.clone()).unwrap();
        assert!(matches!(
            grouping_bound(&data, &rho_one, &b, 0, 1),
            Err(Error::DegenerateParameters(_))
        ));
        let zero_lambda = PenaltySpec::coupled(0.0, 0.5, 0.5, t.clone()).unwrap();
        assert!(matches!(
            grouping_bound(&data, &zero_lambda, &b, 0, 1),
            Err(Error::DegenerateParameters(_))
        ));
        let coupled = PenaltySpec::coupled(0.2, 0.5, 0.5, t.clone()).unwrap();
        assert!(matches!(
            grouping_bound_remark(&data, &coupled, &b, 0, 1),
            Err(Error::WrongPenaltyShape(_))
        ));
        let ridge = PenaltySpec::generalized(0.2, 0.5, 0.5, 0.3, t.clone()).unwrap();
        assert!(matches!(
            grouping_bound_remark(&data, &ridge, &b, 0, 1),
            Err(Error::WrongPenaltyShape(_))
        ));
        let alpha_zero = PenaltySpec::generalized(0.2, 0.0, 0.5, 0.0, t).unwrap();
        assert!(matches!(
            grouping_bound_remark(&data, &alpha_zero, &b, 0, 1),
            Err(Error::DegenerateParameters(_))
        ));
        assert!(matches!(
            source_grouping_bound(&data, 0.2, 1.0, 0, 1),
            Err(Error::DegenerateParameters(_))
        ));
    }

    #[test]
    fn perfect_correlation_and_equal_source_gives_zero() {
        let data = duplicated(3, 40, 4, 1.0);
        let tilde = DVector::from_vec(vec![0.7, 0.7, 0.1, 0.0]);
        let pen = PenaltySpec::coupled(0.1, 0.5, 0.5, tilde).unwrap();
        let rep = grouping_bound(&data, &pen, &DVector::zeros(4), 0, 1).unwrap();
        assert!((rep.r_jk - 1.0).abs() < 1e-12);
        assert!(rep.bound < 1e-5);
        assert!(source_grouping_bound(&data, 0.2, 0.3, 0, 1).unwrap() < 1e-5);
    }

    #[test]
    fn fitted_pairs_respect_bounds() {
        let opts = SolverOptions::with_tol(1e-10);
        let mut checked = 0;
        for seed in 0..6 {
            let data = duplicated(10 + seed, 80, 8, 0.99);
            let source = fit_enet(&data, 0.3, 0.5, &opts).unwrap().beta();
            for alpha in [0.3, 0.7, 1.0] {
                let pen = PenaltySpec::coupled(0.05, alpha, 0.5, source.clone()).unwrap();
                let beta = fit(&data, &pen, &opts).unwrap().beta();
                let remark_pen =
                    PenaltySpec::generalized(0.05, alpha, 0.5, 0.0, source.clone()).unwrap();
                let beta_r = fit(&data, &remark_pen, &opts).unwrap().beta();
                for (j, k) in [(0, 1), (2, 3), (4, 5), (6, 7)] {
                    let rep = grouping_bound(&data, &pen, &beta, j, k).unwrap();
                    assert!(rep.holds(1e-9), "{rep:?}");
                    let rem = grouping_bound_remark(&data, &remark_pen, &beta_r, j, k).unwrap();
                    assert!(rem.holds(1e-9), "{rem:?}");
                    checked += rep.preconditions_met as usize;
                }
            }
        }
        assert!(checked > 10, "{checked}");
    }

    #[test]
    fn source_bound_holds_and_scales() {
        let opts = SolverOptions::with_tol(1e-10);
        let data = duplicated(5, 100, 6, 0.99);
        for (lambda, rho) in [(0.05, 0.2), (0.2, 0.5), (0.5, 0.9)] {
            let beta = fit_enet(&data, lambda, rho, &opts).unwrap().beta();
            for j in 0..6 {
                for k in 0..6 {
                    let b = source_grouping_bound(&data, lambda, rho, j, k).unwrap();
                    assert!((beta[j] - beta[k]).abs() <= b + 1e-9);
                }
            }
            let once = source_grouping_bound(&data, lambda, rho, 0, 1).unwrap();
            let twice = source_grouping_bound(&data, 2.0 * lambda, rho, 0, 1).unwrap();
            assert!((twice - once / 2.0).abs() <= 1e-12 * once);
        }
    }
}
