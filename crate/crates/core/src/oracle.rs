//! Brute-force reference minimizers for small problems.
//!
//! Nothing here shares code with the solver: the objective is re-implemented
//! locally and the one-dimensional minimizer uses search rather than the
//! closed form.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::solver::PenaltySpec;

/// Largest dimension [`full_oracle`] accepts.
pub const MAX_ORACLE_DIM: usize = 3;

const GRID_STEP: f64 = 1e-4;
const MAX_GRID_POINTS: usize = 4001;
const TERNARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Grid1d,
    ProjectedSubgradient,
    CoordinateGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    #[serde(serialize_with = "crate::linalg::serialize_dvector")]
    pub beta: DVector<f64>,
    pub objective: f64,
    pub method: OracleMethod,
}

/// `g(b1) - g(b2)` for `g(b) = q/2 b^2 - z b + a|b| + c|b - t|`, arranged so
/// that nearby points do not lose everything to cancellation.
fn g_diff(q: f64, z: f64, a: f64, c: f64, t: f64, b1: f64, b2: f64) -> f64 {
    let d = b1 - b2;
    d * (0.5 * q * (b1 + b2) - z) + a * abs_diff(b1, b2, d) + c * abs_diff(b1 - t, b2 - t, d)
}

/// `|u1| - |u2|` given `d = u1 - u2`, exact when both share a sign.
fn abs_diff(u1: f64, u2: f64, d: f64) -> f64 {
    if u1 >= 0.0 && u2 >= 0.0 {
        d
    } else if u1 <= 0.0 && u2 <= 0.0 {
        -d
    } else {
        u1.abs() - u2.abs()
    }
}

/// Minimizer of `q/2 b^2 - z b + a|b| + c|b - t|` by grid search followed by
/// ternary refinement.
///
/// The grid spans `[min(0,t) - |z|/q - 1, max(0,t) + |z|/q + 1]`, which must
/// contain the minimizer, at step `1e-4` but never more than a few thousand
/// points; it only has to bracket the minimum, the ternary stage supplies
/// the precision.
pub fn prox_oracle(q: f64, z: f64, a: f64, c: f64, t: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::NonpositiveCurvature(q));
    }
    let reach = z.abs() / q + 1.0;
    let start = t.min(0.0) - reach;
    let end = t.max(0.0) + reach;
    let points = (((end - start) / GRID_STEP).ceil() as usize + 1).clamp(3, MAX_GRID_POINTS);
    let step = (end - start) / (points - 1) as f64;
    let at = |i: usize| start + step * i as f64;

    // first grid index where g stops decreasing
    let mut k = points - 1;
    for i in 0..points - 1 {
        if g_diff(q, z, a, c, t, at(i + 1), at(i)) >= 0.0 {
            k = i;
            break;
        }
    }
    let mut lo = at(k.saturating_sub(1));
    let mut hi = at((k + 1).min(points - 1));

    for _ in 0..500 {
        if hi - lo <= TERNARY_TOL {
            break;
        }
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if !(lo < m1 && m1 < m2 && m2 < hi) {
            break;
        }
        if g_diff(q, z, a, c, t, m1, m2) <= 0.0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut best = 0.5 * (lo + hi);
    for kink in [0.0, t] {
        if g_diff(q, z, a, c, t, kink, best) < 0.0 {
            best = kink;
        }
    }
    Ok(best)
}

struct Problem<'a> {
    data: &'a Dataset,
    lambda: f64,
    alpha: f64,
    rho1: f64,
    rho2: f64,
    tilde: &'a DVector<f64>,
}

impl Problem<'_> {
    fn smooth(&self, beta: &DVector<f64>) -> f64 {
        let n = self.data.n() as f64;
        let r = self.data.y() - self.data.x() * beta;
        let diff = beta - self.tilde;
        r.norm_squared() / (2.0 * n)
            + self.lambda
                * (self.alpha * (1.0 - self.rho1) * beta.norm_squared()
                    + (1.0 - self.alpha) * self.rho2 * diff.norm_squared())
    }

    fn kink_weights(&self) -> (f64, f64) {
        (
            self.lambda * self.alpha * self.rho1,
            self.lambda * (1.0 - self.alpha) * self.rho1,
        )
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        let (a, c) = self.kink_weights();
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l1_diff: f64 = beta
            .iter()
            .zip(self.tilde.iter())
            .map(|(b, t)| (b - t).abs())
            .sum();
        self.smooth(beta) + a * l1 + c * l1_diff
    }

    fn subgradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let n = self.data.n() as f64;
        let (a, c) = self.kink_weights();
        let r = self.data.y() - self.data.x() * beta;
        let mut g = -(self.data.x().transpose() * r) / n;
        for j in 0..beta.len() {
            let d = beta[j] - self.tilde[j];
            g[j] += 2.0
                * self.lambda
                * (self.alpha * (1.0 - self.rho1) * beta[j] + (1.0 - self.alpha) * self.rho2 * d)
                + a * beta[j].signum() * (beta[j] != 0.0) as u8 as f64
                + c * d.signum() * (d != 0.0) as u8 as f64;
        }
        g
    }

    /// Exact minimization along coordinate `j`. The smooth part restricted to
    /// the coordinate is a quadratic whose coefficients are read off three
    /// evaluations, so no closed-form derivation is shared with the solver.
    fn coordinate_min(&self, beta: &mut DVector<f64>, j: usize) -> Result<()> {
        let keep = beta[j];
        let mut eval = |b: f64| {
            beta[j] = b;
            self.smooth(beta)
        };
        let (f_minus, f_zero, f_plus) = (eval(-1.0), eval(0.0), eval(1.0));
        beta[j] = keep;
        let q = f_plus + f_minus - 2.0 * f_zero;
        let z = -(f_plus - f_minus) / 2.0;
        let (a, c) = self.kink_weights();
        beta[j] = prox_oracle(q, z, a, c, self.tilde[j])?;
        Ok(())
    }
}

/// Reference minimizer of the penalized objective for `p <= 3`.
///
/// Projected subgradient descent with step `1/(L sqrt(k+1))` runs from 50
/// random starts plus the source and the origin; the best end point is then
/// polished by exact coordinate sweeps until it stops moving.
pub fn full_oracle(data: &Dataset, pen: &PenaltySpec, seed: u64) -> Result<OracleResult> {
    let p = data.p();
    if p > MAX_ORACLE_DIM {
        return Err(Error::DimensionTooLarge(p));
    }
    crate::error::check_len("source length", p, pen.beta_tilde().len())?;
    let prob = Problem {
        data,
        lambda: pen.lambda(),
        alpha: pen.alpha(),
        rho1: pen.rho1(),
        rho2: pen.rho2(),
        tilde: pen.beta_tilde(),
    };

    let n = data.n() as f64;
    let lip = (data.x().transpose() * data.x()).norm() / n
        + 2.0 * prob.lambda * (prob.alpha * (1.0 - prob.rho1) + (1.0 - prob.alpha) * prob.rho2)
        + 1e-12;
    let scale = 1.0 + prob.tilde.amax() + data.y().amax();
    let radius = 100.0 * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<DVector<f64>> = vec![prob.tilde.clone(), DVector::zeros(p)];
    for _ in 0..50 {
        starts.push(DVector::from_fn(p, |_, _| rng.random_range(-scale..=scale)));
    }

    let mut best = DVector::zeros(p);
    let mut best_val = f64::INFINITY;
    for start in starts {
        let mut beta = start;
        for k in 0..2000 {
            let g = prob.subgradient(&beta);
            beta -= g / (lip * ((k + 1) as f64).sqrt());
            beta.apply(|b| *b = b.clamp(-radius, radius));
            let v = prob.value(&beta);
            if v < best_val {
                best_val = v;
                best.copy_from(&beta);
            }
        }
    }

    let mut polished = best.clone();
    for _ in 0..100_000 {
        let before = polished.clone();
        for j in 0..p {
            prob.coordinate_min(&mut polished, j)?;
        }
        if (&polished - &before).amax() <= 1e-14 * (1.0 + polished.amax()) {
            break;
        }
    }
    let polished_val = prob.value(&polished);
    if polished_val <= best_val {
        Ok(OracleResult {
            beta: polished,
            objective: polished_val,
            method: OracleMethod::CoordinateGrid,
        })
    } else {
        Ok(OracleResult {
            beta: best,
            objective: best_val,
            method: OracleMethod::ProjectedSubgradient,
        })
    }
}
