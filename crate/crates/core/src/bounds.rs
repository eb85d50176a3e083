//! Closed-form error bounds, the restricted cone and its eigenvalue bracket.
//!
//! The cone `B(alpha, rho, c, delta)` collects the directions `v` with
//!
//! ```text
//! (alpha rho - c)|v_Sc|_1 + (1 - alpha) rho |v - delta|_1
//!     <= (alpha rho + c)|v_S|_1 + (1 - alpha) rho |delta|_1 + 2 (1 - rho) |delta_alpha|_2 |v|_2
//! ```
//!
//! and `phi(B)` is the smallest Gram Rayleigh quotient over it. `phi` is never
//! computed exactly: [`phi_lower`] bounds it from below (the global smallest
//! eigenvalue) and [`phi_upper_estimate`] from above (the best sampled cone
//! member). Bounds plugged with the lower end stay valid because every `U`
//! is non-increasing in `phi`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{bottom_eigenvector, gram, l1, l2, rayleigh_quotient, sym_eigenvalues};
use crate::model::support_of;

/// Relative slack used when comparing two bound values.
pub const COMPARISON_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    pub alpha: f64,
    pub rho: f64,
    pub c: f64,
    pub delta: DVector<f64>,
    pub delta_alpha: DVector<f64>,
    pub support: Vec<usize>,
}

impl ConeSpec {
    pub fn new(
        alpha: f64,
        rho: f64,
        c: f64,
        delta: DVector<f64>,
        delta_alpha: DVector<f64>,
        support: Vec<usize>,
    ) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cone margin c must be > 0, got {c}"
            )));
        }
        check_len(
            "delta_alpha length vs delta length",
            delta.len(),
            delta_alpha.len(),
        )?;
        let p = delta.len();
        if let Some(&bad) = support.iter().find(|&&j| j >= p) {
            return Err(Error::IndexOutOfRange { index: bad, p });
        }
        Ok(Self {
            alpha,
            rho,
            c,
            delta,
            delta_alpha,
            support,
        })
    }

    /// Cone for truth `beta_star` and source `beta_tilde`.
    pub fn from_truth(
        alpha: f64,
        rho: f64,
        c: f64,
        beta_star: &DVector<f64>,
        beta_tilde: &DVector<f64>,
    ) -> Result<Self> {
        check_len(
            "source length vs truth length",
            beta_star.len(),
            beta_tilde.len(),
        )?;
        let delta = beta_tilde - beta_star;
        let delta_alpha = &delta - beta_tilde * alpha;
        Self::new(alpha, rho, c, delta, delta_alpha, support_of(beta_star))
    }

    pub fn p(&self) -> usize {
        self.delta.len()
    }

    fn support_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.p()];
        for &j in &self.support {
            mask[j] = true;
        }
        mask
    }

    /// Left- and right-hand sides of the defining inequality at `v`.
    pub fn sides(&self, v: &DVector<f64>) -> Result<(f64, f64)> {
        check_len("direction length", self.p(), v.len())?;
        let mask = self.support_mask();
        let (mut on_s, mut off_s) = (0.0, 0.0);
        for (x, in_s) in v.iter().zip(&mask) {
            if *in_s {
                on_s += x.abs();
            } else {
                off_s += x.abs();
            }
        }
        let (a, r, c) = (self.alpha, self.rho, self.c);
        let lhs = (a * r - c) * off_s + (1.0 - a) * r * l1(&(v - &self.delta));
        let rhs = (a * r + c) * on_s
            + (1.0 - a) * r * l1(&self.delta)
            + 2.0 * (1.0 - r) * l2(&self.delta_alpha) * l2(v);
        Ok((lhs, rhs))
    }
}

pub fn cone_contains(v: &DVector<f64>, spec: &ConeSpec) -> Result<bool> {
    let (lhs, rhs) = spec.sides(v)?;
    Ok(lhs <= rhs)
}

/// Smallest eigenvalue of `X^T X / n`, with values below the numerical rank
/// threshold `1e-12 * largest` reported as exactly zero.
pub fn phi_lower(x: &DMatrix<f64>) -> f64 {
    let eig = sym_eigenvalues(&gram(x));
    let top = eig.last().copied().unwrap_or(0.0);
    let bottom = eig[0];
    if x.ncols() > x.nrows() || bottom <= 1e-12 * top.max(f64::MIN_POSITIVE) {
        0.0
    } else {
        bottom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiBracket {
    pub lower: f64,
    pub upper: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Candidate directions for probing the cone, drawn round-robin from four
/// fixed families:
///
/// 0. dense standard Gaussian vectors;
/// 1. Gaussian vectors supported on `S`;
/// 2. `t * delta` plus a small Gaussian perturbation, `t` uniform in `[-2, 2]`;
/// 3. bottom eigenvectors of the Gram matrix restricted to `S` plus a random
///    handful of off-support columns (the low-curvature sparse directions).
///
/// Caller-supplied vectors (e.g. estimation errors) are always tried as well.
pub struct CandidateSampler<'a> {
    spec: &'a ConeSpec,
    gram: Option<DMatrix<f64>>,
    off_support: Vec<usize>,
    rng: ChaCha8Rng,
    drawn: usize,
}

impl<'a> CandidateSampler<'a> {
    pub fn new(spec: &'a ConeSpec, x: Option<&DMatrix<f64>>, seed: u64) -> Self {
        let mask = spec.support_mask();
        let off_support = (0..spec.p()).filter(|j| !mask[*j]).collect();
        Self {
            spec,
            gram: x.map(gram),
            off_support,
            rng: ChaCha8Rng::seed_from_u64(seed),
            drawn: 0,
        }
    }

    fn gaussian(&mut self) -> DVector<f64> {
        let p = self.spec.p();
        DVector::from_fn(p, |_, _| self.rng.sample::<f64, _>(StandardNormal))
    }

    fn restricted_bottom(&mut self, gram: &DMatrix<f64>) -> DVector<f64> {
        let p = self.spec.p();
        let extra_max = self.off_support.len().min(2 * self.spec.support.len() + 2);
        let mut cols = self.spec.support.clone();
        if extra_max > 0 {
            let k = self.rng.random_range(1..=extra_max);
            let picks = sample(&mut self.rng, self.off_support.len(), k);
            cols.extend(picks.into_iter().map(|i| self.off_support[i]));
        }
        if cols.is_empty() {
            return self.gaussian();
        }
        let sub = gram.select_rows(&cols).select_columns(&cols);
        let (_, vec) = bottom_eigenvector(&sub);
        let mut v = DVector::zeros(p);
        for (i, &j) in cols.iter().enumerate() {
            v[j] = vec[i];
        }
        if self.rng.random::<bool>() {
            v.neg_mut();
        }
        v
    }

    pub fn next_candidate(&mut self) -> DVector<f64> {
        let family = self.drawn % 4;
        self.drawn += 1;
        match family {
            0 => self.gaussian(),
            1 if !self.spec.support.is_empty() => {
                let mut v = self.gaussian();
                let mask = self.spec.support_mask();
                for (x, keep) in v.iter_mut().zip(mask) {
                    if !keep {
                        *x = 0.0;
                    }
                }
                v
            }
            2 if l1(&self.spec.delta) > 0.0 => {
                let t = self.rng.random_range(-2.0..=2.0);
                let noise = self.gaussian() * 0.05;
                &self.spec.delta * t + noise
            }
            3 => match self.gram.take() {
                Some(g) => {
                    let v = self.restricted_bottom(&g);
                    self.gram = Some(g);
                    v
                }
                None => self.gaussian(),
            },
            _ => self.gaussian(),
        }
    }
}

/// Smallest Rayleigh quotient among sampled cone members; an upper estimate
/// of `phi(B)`.
pub fn phi_upper_estimate(
    x: &DMatrix<f64>,
    spec: &ConeSpec,
    n_samples: usize,
    seed: u64,
    extra: &[DVector<f64>],
) -> Result<f64> {
    check_len("cone dimension vs design columns", x.ncols(), spec.p())?;
    if n_samples == 0 && extra.is_empty() {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    let mut best: Option<f64> = None;
    let mut consider = |v: &DVector<f64>| -> Result<()> {
        if cone_contains(v, spec)? {
            if let Some(q) = rayleigh_quotient(x, v) {
                best = Some(best.map_or(q, |b: f64| b.min(q)));
            }
        }
        Ok(())
    };
    for v in extra {
        consider(v)?;
    }
    let mut sampler = CandidateSampler::new(spec, Some(x), seed);
    for _ in 0..n_samples {
        let v = sampler.next_candidate();
        consider(&v)?;
    }
    best.ok_or(Error::NoConeMemberSampled)
}

pub fn phi_bracket(
    x: &DMatrix<f64>,
    spec: &ConeSpec,
    n_samples: usize,
    seed: u64,
    extra: &[DVector<f64>],
) -> Result<PhiBracket> {
    Ok(PhiBracket {
        lower: phi_lower(x),
        upper: phi_upper_estimate(x, spec, n_samples, seed, extra)?,
        samples: n_samples,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "tenet")]
    TENet,
    #[serde(rename = "enet")]
    ENet,
    #[serde(rename = "tlasso")]
    TLasso,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::TENet => "tenet",
            Method::ENet => "enet",
            Method::TLasso => "tlasso",
        }
    }
}

/// Which discriminant to use in the Transfer Elastic Net bound.
///
/// `AsStated` carries the extra factor `alpha` on the `|delta_alpha|_2` term
/// inside `D`; `ProofConsistent` drops it so that `D` is the discriminant of
/// the quadratic the bound solves, which is what makes the `delta = 0`
/// simplification come out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DConvention {
    AsStated,
    #[default]
    ProofConsistent,
}

/// Scalar inputs shared by all three bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ingredients {
    pub lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    pub c: f64,
    pub s: usize,
    pub delta_l1: f64,
    pub delta_alpha_l2: f64,
    pub beta_star_l2: f64,
}

impl Ingredients {
    pub fn from_truth(
        lambda: f64,
        alpha: f64,
        rho: f64,
        c: f64,
        beta_star: &DVector<f64>,
        beta_tilde: &DVector<f64>,
    ) -> Result<Self> {
        let cone = ConeSpec::from_truth(alpha, rho, c, beta_star, beta_tilde)?;
        Ok(Self {
            lambda,
            alpha,
            rho,
            c,
            s: cone.support.len(),
            delta_l1: l1(&cone.delta),
            delta_alpha_l2: l2(&cone.delta_alpha),
            beta_star_l2: l2(beta_star),
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c must be > 0, got {}",
                self.c
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(
                "alpha and rho must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: Method,
    pub u: f64,
    /// Discriminant; only the Transfer Elastic Net bound has one.
    pub d: Option<f64>,
    pub ingredients: Ingredients,
    pub phi: f64,
    pub probability: Option<f64>,
    pub d_convention: Option<DConvention>,
}

impl BoundReport {
    pub fn with_probability(mut self, n: usize, sigma: f64, p: usize) -> Self {
        let ing = &self.ingredients;
        self.probability = Some(success_probability(n, ing.c, ing.lambda, sigma, p));
        self
    }
}

pub fn bound_tenet(ing: &Ingredients, phi: f64, convention: DConvention) -> Result<BoundReport> {
    ing.validate()?;
    let Ingredients {
        lambda,
        alpha,
        rho,
        c,
        ..
    } = *ing;
    let denom = 2.0 * lambda * (1.0 - rho) + phi;
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator(denom));
    }
    let sparse_term = (alpha * rho + c) * lambda * (ing.s as f64).sqrt();
    let shift_term = 2.0 * lambda * (1.0 - rho) * ing.delta_alpha_l2;
    let inner = match convention {
        DConvention::AsStated => sparse_term + alpha * shift_term,
        DConvention::ProofConsistent => sparse_term + shift_term,
    };
    let d = inner * inner + 2.0 * lambda * (1.0 - alpha) * rho * ing.delta_l1 * denom;
    let u = (sparse_term + shift_term + d.sqrt()) / denom;
    Ok(BoundReport {
        method: Method::TENet,
        u,
        d: Some(d),
        ingredients: *ing,
        phi,
        probability: None,
        d_convention: Some(convention),
    })
}

pub fn bound_enet(ing: &Ingredients, phi: f64) -> Result<BoundReport> {
    ing.validate()?;
    let Ingredients { lambda, rho, c, .. } = *ing;
    let denom = 2.0 * lambda * (1.0 - rho) + phi;
    if !(denom > 0.0) {
        return Err(Error::DegenerateDenominator(denom));
    }
    let u = (2.0 * (rho + c) * lambda * (ing.s as f64).sqrt()
        + 4.0 * lambda * (1.0 - rho) * ing.beta_star_l2)
        / denom;
    Ok(BoundReport {
        method: Method::ENet,
        u,
        d: None,
        ingredients: *ing,
        phi,
        probability: None,
        d_convention: None,
    })
}

pub fn bound_tlasso(ing: &Ingredients, phi: f64) -> Result<BoundReport> {
    ing.validate()?;
    if !(phi > 0.0) {
        return Err(Error::DegenerateDenominator(phi));
    }
    let Ingredients {
        lambda, alpha, c, ..
    } = *ing;
    let head = (alpha + c) * lambda * (ing.s as f64).sqrt();
    let u = (head + (head * head + 2.0 * lambda * (1.0 - alpha) * ing.delta_l1 * phi).sqrt()) / phi;
    Ok(BoundReport {
        method: Method::TLasso,
        u,
        d: None,
        ingredients: *ing,
        phi,
        probability: None,
        d_convention: None,
    })
}

/// `exp(-n c^2 lambda^2 / (2 sigma^2) + log(2p))`, capped at 1.
pub fn failure_probability(n: usize, c: f64, lambda: f64, sigma: f64, p: usize) -> f64 {
    let signal = n as f64 * (c * lambda).powi(2);
    if sigma == 0.0 {
        return if signal > 0.0 { 0.0 } else { 1.0 };
    }
    let exponent = -signal / (2.0 * sigma * sigma) + (2.0 * p as f64).ln();
    exponent.exp().min(1.0)
}

/// Probability with which the error bounds hold, clipped to `[0, 1]`.
/// With `sigma = 0` the noise term vanishes and the result is 1 whenever
/// `c * lambda > 0`.
pub fn success_probability(n: usize, c: f64, lambda: f64, sigma: f64, p: usize) -> f64 {
    (1.0 - failure_probability(n, c, lambda, sigma, p)).max(0.0)
}

fn at_least(a: f64, b: f64) -> bool {
    a >= b - COMPARISON_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop1Outcome {
    pub u_tenet: f64,
    pub u_enet: f64,
    /// `U_ENet >= U_TENet`.
    pub holds: bool,
    /// `phi_TENet >= phi_ENet`, the cone-inclusion prerequisite.
    pub phi_order_holds: bool,
}

/// Compares the Transfer Elastic Net and Elastic Net bounds for an exact
/// source (`delta = 0`).
pub fn compare_prop1(ing: &Ingredients, phi_tenet: f64, phi_enet: f64) -> Result<Prop1Outcome> {
    if ing.delta_l1 != 0.0 {
        return Err(Error::NonzeroDelta);
    }
    let tenet = bound_tenet(ing, phi_tenet, DConvention::ProofConsistent)?;
    let enet = bound_enet(ing, phi_enet)?;
    Ok(Prop1Outcome {
        u_tenet: tenet.u,
        u_enet: enet.u,
        holds: at_least(enet.u, tenet.u),
        phi_order_holds: phi_tenet >= phi_enet,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop2Outcome {
    pub u_tenet: f64,
    pub u_tlasso: f64,
    /// `sqrt(s)/2 >= |beta_star_S|_2`.
    pub norm_condition: bool,
    /// `phi_TENet + 2 lambda (1 - rho) >= phi_TLasso`.
    pub phi_condition: bool,
    pub condition_holds: bool,
    /// `U_TLasso >= U_TENet`.
    pub conclusion_holds: bool,
}

/// Compares the Transfer Elastic Net and Transfer Lasso bounds for an exact
/// source. `ing.beta_star_l2` is the norm of the support block, which is the
/// whole truth.
pub fn compare_prop2(ing: &Ingredients, phi_tenet: f64, phi_tlasso: f64) -> Result<Prop2Outcome> {
    if ing.delta_l1 != 0.0 {
        return Err(Error::NonzeroDelta);
    }
    let tenet = bound_tenet(ing, phi_tenet, DConvention::ProofConsistent)?;
    let tlasso = bound_tlasso(ing, phi_tlasso)?;
    let norm_condition = (ing.s as f64).sqrt() / 2.0 >= ing.beta_star_l2;
    let phi_condition = phi_tenet + 2.0 * ing.lambda * (1.0 - ing.rho) >= phi_tlasso;
    Ok(Prop2Outcome {
        u_tenet: tenet.u,
        u_tlasso: tlasso.u,
        norm_condition,
        phi_condition,
        condition_holds: norm_condition && phi_condition,
        conclusion_holds: at_least(tlasso.u, tenet.u),
    })
}

/// Sample size above which the Gaussian-design restricted eigenvalue
/// conclusion is guaranteed: `((72 M)^2 / gamma) * F^2 * ln p` with
/// `F = (2 alpha rho sqrt(s) + 2 (1 - rho) |delta_alpha|_2) / (2 alpha rho - c - rho)`.
#[allow(clippy::too_many_arguments)]
pub fn required_sample_size(
    alpha: f64,
    rho: f64,
    c: f64,
    s: usize,
    delta_alpha_norm: f64,
    gamma: f64,
    max_diag: f64,
    p: usize,
) -> Result<f64> {
    let margin = 2.0 * alpha * rho - c - rho;
    if !(margin > 0.0) {
        return Err(Error::ConeMarginViolated(margin));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be > 0, got {gamma}"
        )));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("p must be >= 1".into()));
    }
    let f = (2.0 * alpha * rho * (s as f64).sqrt() + 2.0 * (1.0 - rho) * delta_alpha_norm) / margin;
    Ok((72.0 * max_diag).powi(2) / gamma * f * f * (p as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreCheck {
    pub sampled_min_quotient: f64,
    pub threshold: f64,
    pub holds: bool,
}

/// Checks the sampled cone Rayleigh quotients against `gamma / 64`.
pub fn check_gre_conclusion(
    x: &DMatrix<f64>,
    spec: &ConeSpec,
    gamma: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GreCheck> {
    let q = phi_upper_estimate(x, spec, n_samples, seed, &[])?;
    let threshold = gamma / 64.0;
    Ok(GreCheck {
        sampled_min_quotient: q,
        threshold,
        holds: q > threshold,
    })
}

/// Samples members of `B(alpha, rho, c, 0)` and counts those that fall
/// outside `B(1, rho, c, 0)`. Returns `(members, violations)`.
pub fn cone_inclusion_violations(
    alpha: f64,
    rho: f64,
    c: f64,
    beta_star: &DVector<f64>,
    members_wanted: usize,
    seed: u64,
) -> Result<(usize, usize)> {
    let inner = ConeSpec::from_truth(alpha, rho, c, beta_star, beta_star)?;
    let outer = ConeSpec::from_truth(1.0, rho, c, beta_star, beta_star)?;
    let mut sampler = CandidateSampler::new(&inner, None, seed);
    let (mut members, mut violations) = (0, 0);
    let budget = members_wanted.saturating_mul(50).max(1000);
    for _ in 0..budget {
        if members >= members_wanted {
            break;
        }
        let v = sampler.next_candidate();
        if cone_contains(&v, &inner)? {
            members += 1;
            if !cone_contains(&v, &outer)? {
                violations += 1;
            }
        }
    }
    Ok((members, violations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_design, Covariance, DesignSpec};
    use proptest::prelude::*;

    fn truth() -> DVector<f64> {
        DVector::from_vec(vec![1.0, -0.5, 0.0, 0.0, 2.0, 0.0])
    }

    fn ingredients(lambda: f64, alpha: f64, rho: f64, c: f64, shift: f64) -> Ingredients {
        let beta = truth();
        let mut tilde = beta.clone();
        tilde[2] += shift;
        tilde[0] -= 0.5 * shift;
        Ingredients::from_truth(lambda, alpha, rho, c, &beta, &tilde).unwrap()
    }

    #[test]
    fn zero_direction_is_in_every_cone() {
        let beta = truth();
        let tilde = beta.map(|b| b + 0.3);
        for (alpha, rho) in [(0.0, 0.0), (0.3, 0.7), (1.0, 1.0)] {
            let spec = ConeSpec::from_truth(alpha, rho, 0.4, &beta, &tilde).unwrap();
            let (lhs, rhs) = spec.sides(&DVector::zeros(6)).unwrap();
            assert_eq!(lhs, rhs);
            assert!(cone_contains(&DVector::zeros(6), &spec).unwrap());
        }
    }

    #[test]
    fn delta_direction_is_in_cone() {
        let beta = truth();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let tilde = beta.map(|b| b + rng.sample::<f64, _>(StandardNormal));
            let alpha = rng.random_range(0.0..=1.0);
            let rho = rng.random_range(0.0..=1.0);
            let c = rng.random_range(0.01..2.0);
            let spec = ConeSpec::from_truth(alpha, rho, c, &beta, &tilde).unwrap();
            assert!(cone_contains(&spec.delta.clone(), &spec).unwrap());
        }
    }

    #[test]
    fn classical_cone_at_alpha_rho_one() {
        let beta = truth();
        let tilde = beta.map(|b| b * 3.0 - 1.0);
        let c = 0.5;
        let spec = ConeSpec::from_truth(1.0, 1.0, c, &beta, &tilde).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let v = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let on: f64 = [0, 1, 4].iter().map(|&j| v[j].abs()).sum();
            let off: f64 = [2, 3, 5].iter().map(|&j| v[j].abs()).sum();
            assert_eq!(
                cone_contains(&v, &spec).unwrap(),
                (1.0 - c) * off <= (1.0 + c) * on
            );
        }
    }

    #[test]
    fn cone_rejects_wrong_dimension() {
        let spec = ConeSpec::from_truth(0.5, 0.5, 0.5, &truth(), &truth()).unwrap();
        assert!(matches!(
            cone_contains(&DVector::zeros(3), &spec),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn phi_lower_examples() {
        let h = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        assert!((phi_lower(&h) - 1.0).abs() < 1e-14);

        let wide = generate_design(
            &DesignSpec {
                n: 3,
                p: 6,
                covariance: Covariance::Identity,
            },
            1,
        )
        .unwrap();
        assert_eq!(phi_lower(&wide), 0.0);

        let mut dup = generate_design(
            &DesignSpec {
                n: 30,
                p: 3,
                covariance: Covariance::Identity,
            },
            2,
        )
        .unwrap();
        let first = dup.column(0).into_owned();
        dup.set_column(2, &first);
        assert_eq!(phi_lower(&dup), 0.0);
    }

    #[test]
    fn phi_upper_on_orthonormal_design_is_one() {
        let h = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let beta = DVector::from_vec(vec![1.0, 0.0]);
        let spec = ConeSpec::from_truth(0.6, 0.4, 0.3, &beta, &beta.map(|b| b + 0.2)).unwrap();
        let up = phi_upper_estimate(&h, &spec, 200, 7, &[]).unwrap();
        assert!((up - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_pair_has_near_null_cone_direction() {
        let spec = DesignSpec {
            n: 200,
            p: 10,
            covariance: Covariance::DuplicatedBlock {
                r: 0.999,
                group_size: 2,
            },
        };
        let x = generate_design(&spec, 3).unwrap();
        let beta = DVector::from_fn(10, |j, _| if j < 2 { 1.0 } else { 0.0 });
        let cone = ConeSpec::from_truth(1.0, 1.0, 0.5, &beta, &beta).unwrap();
        let mut pair = DVector::zeros(10);
        pair[0] = 1.0;
        pair[1] = -1.0;
        assert!(cone_contains(&pair, &cone).unwrap());
        let with_pair = phi_upper_estimate(&x, &cone, 50, 1, &[pair]).unwrap();
        assert!(with_pair < 0.01);
        let sampled = phi_upper_estimate(&x, &cone, 400, 1, &[]).unwrap();
        assert!(sampled < 0.01, "{sampled}");
        assert!(phi_lower(&x) <= sampled + 1e-9);
    }

    #[test]
    fn no_member_is_an_error() {
        // (alpha rho - c) |v_Sc| dominates and the support is empty
        let beta = DVector::zeros(4);
        let spec = ConeSpec::from_truth(1.0, 1.0, 0.1, &beta, &beta).unwrap();
        let x = DMatrix::identity(4, 4);
        assert!(matches!(
            phi_upper_estimate(&x, &spec, 50, 0, &[]),
            Err(Error::NoConeMemberSampled)
        ));
    }

    #[test]
    fn tenet_with_exact_source_simplifies() {
        let ing = ingredients(0.3, 0.6, 0.4, 0.2, 0.0);
        let phi = 0.7;
        let got = bound_tenet(&ing, phi, DConvention::ProofConsistent)
            .unwrap()
            .u;
        let (l, a, r, c) = (0.3, 0.6, 0.4, 0.2);
        let s = 3f64.sqrt();
        let want = (2.0 * (a * r + c) * l * s + 4.0 * l * a * (1.0 - r) * l2(&truth()))
            / (2.0 * l * (1.0 - r) + phi);
        assert!((got - want).abs() < 1e-14);
        let stated = bound_tenet(&ing, phi, DConvention::AsStated).unwrap().u;
        assert!(stated < got);
    }

    #[test]
    fn specializations_agree() {
        for shift in [0.0, 0.4, -1.3] {
            for conv in [DConvention::AsStated, DConvention::ProofConsistent] {
                let a1 = ingredients(0.25, 1.0, 0.35, 0.3, shift);
                let t = bound_tenet(&a1, 0.6, conv).unwrap().u;
                let e = bound_enet(&a1, 0.6).unwrap().u;
                assert!((t - e).abs() <= 1e-12 * e.max(1.0));

                let r1 = ingredients(0.25, 0.4, 1.0, 0.3, shift);
                let t = bound_tenet(&r1, 0.6, conv).unwrap().u;
                let l = bound_tlasso(&r1, 0.6).unwrap().u;
                assert!((t - l).abs() <= 1e-12 * l.max(1.0));
            }
        }
    }

    #[test]
    fn enet_and_tlasso_examples() {
        let ing = ingredients(0.5, 1.0, 1.0, 0.25, 0.0);
        let lasso = 2.0 * 1.25 * 0.5 * 3f64.sqrt() / 0.8;
        assert!((bound_enet(&ing, 0.8).unwrap().u - lasso).abs() < 1e-14);
        assert!((bound_tlasso(&ing, 0.8).unwrap().u - lasso).abs() < 1e-14);

        let zero = Ingredients {
            s: 0,
            beta_star_l2: 0.0,
            delta_l1: 0.0,
            delta_alpha_l2: 0.0,
            ..ing
        };
        assert_eq!(
            bound_enet(&Ingredients { rho: 0.5, ..zero }, 0.8)
                .unwrap()
                .u,
            0.0
        );

        let exact = ingredients(0.5, 0.3, 1.0, 0.25, 0.0);
        let want = 2.0 * 0.55 * 0.5 * 3f64.sqrt() / 0.8;
        assert!((bound_tlasso(&exact, 0.8).unwrap().u - want).abs() < 1e-14);

        let no_lambda = ingredients(0.0, 0.3, 1.0, 0.25, 1.0);
        assert_eq!(bound_tlasso(&no_lambda, 0.8).unwrap().u, 0.0);
        assert!(matches!(
            bound_tlasso(&exact, 0.0),
            Err(Error::DegenerateDenominator(_))
        ));
        assert!(matches!(
            bound_tenet(
                &ingredients(0.5, 0.3, 1.0, 0.25, 0.0),
                0.0,
                DConvention::default()
            ),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn success_probability_examples() {
        assert_eq!(success_probability(100, 1.0, 0.0, 1.0, 5), 0.0);
        let fail = failure_probability(400, 1.0, 0.5, 1.0, 10);
        let want = 20.0 * (-50f64).exp();
        assert!((fail - want).abs() <= 1e-12 * want);
        assert!((fail - 3.8575e-21).abs() < 1e-24);
        assert_eq!(success_probability(400, 1.0, 0.5, 0.0, 10), 1.0);
        let mut prev = 0.0;
        for n in (10..2000).step_by(10) {
            let p = success_probability(n, 0.5, 0.2, 1.0, 20);
            assert!(p >= prev);
            prev = p;
        }
        assert!(prev > 0.99);
    }

    #[test]
    fn prop1_examples() {
        let equal = compare_prop1(&ingredients(0.3, 1.0, 0.5, 0.2, 0.0), 0.5, 0.5).unwrap();
        assert!(equal.holds);
        assert!((equal.u_tenet - equal.u_enet).abs() < 1e-14);
        let half = compare_prop1(&ingredients(0.3, 0.5, 0.5, 0.2, 0.0), 0.5, 0.5).unwrap();
        assert!(half.holds && half.u_tenet < half.u_enet);
        assert!(matches!(
            compare_prop1(&ingredients(0.3, 0.5, 0.5, 0.2, 0.1), 0.5, 0.5),
            Err(Error::NonzeroDelta)
        ));
    }

    #[test]
    fn prop2_examples() {
        let beta = DVector::from_vec(vec![0.5, -0.5, 0.5, 0.5, 0.0]);
        let ing = Ingredients::from_truth(0.2, 0.6, 0.5, 0.1, &beta, &beta).unwrap();
        let out = compare_prop2(&ing, 0.4, 0.4).unwrap();
        assert!(out.norm_condition);
        assert!(out.condition_holds && out.conclusion_holds);

        let lasso = Ingredients { rho: 1.0, ..ing };
        let out = compare_prop2(&lasso, 0.4, 0.4).unwrap();
        assert!(out.phi_condition);
        assert!((out.u_tenet - out.u_tlasso).abs() < 1e-14);
    }

    #[test]
    fn sample_size_examples() {
        let s = 4;
        let n = required_sample_size(1.0, 1.0, 0.5, s, 3.0, 0.5, 1.0, 50).unwrap();
        let want = 72f64.powi(2) * 16.0 * s as f64 * 50f64.ln() / 0.5;
        assert!((n - want).abs() <= 1e-9 * want);
        assert_eq!(
            required_sample_size(1.0, 1.0, 0.5, s, 0.0, 1.0, 1.0, 1).unwrap(),
            0.0
        );
        assert!(matches!(
            required_sample_size(1.0, 1.0, 1.0, s, 0.0, 1.0, 1.0, 10),
            Err(Error::ConeMarginViolated(_))
        ));
    }

    #[test]
    fn gre_on_orthonormal_design() {
        let h = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let beta = DVector::from_vec(vec![1.0, 0.0]);
        let spec = ConeSpec::from_truth(1.0, 1.0, 0.5, &beta, &beta).unwrap();
        let out = check_gre_conclusion(&h, &spec, 1.0, 100, 0).unwrap();
        assert!(out.holds);
        assert!((out.sampled_min_quotient - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gre_fails_for_tiny_n() {
        let x = generate_design(
            &DesignSpec {
                n: 2,
                p: 50,
                covariance: Covariance::Identity,
            },
            9,
        )
        .unwrap();
        let beta = DVector::from_fn(50, |j, _| if j < 5 { 1.0 } else { 0.0 });
        let spec = ConeSpec::from_truth(1.0, 1.0, 0.5, &beta, &beta).unwrap();
        let out = check_gre_conclusion(&x, &spec, 1.0, 2000, 1).unwrap();
        assert!(!out.holds);
    }

    #[test]
    fn lemma2_sampler_finds_members() {
        for alpha in [0.6, 0.8, 1.0] {
            let (members, violations) =
                cone_inclusion_violations(alpha, 0.7, 0.3, &truth(), 200, 1).unwrap();
            assert_eq!(members, 200);
            assert_eq!(violations, 0);
        }
    }

    proptest! {
        #[test]
        fn bracket_is_ordered(seed in 0u64..500, alpha in 0f64..=1.0, rho in 0f64..=1.0, c in 0.05f64..1.0) {
            let x = generate_design(&DesignSpec { n: 15, p: 6, covariance: Covariance::Toeplitz { r: 0.6 } }, seed).unwrap();
            let spec = ConeSpec::from_truth(alpha, rho, c, &truth(), &truth().map(|b| b * 0.8)).unwrap();
            let bracket = phi_bracket(&x, &spec, 64, seed, &[]).unwrap();
            prop_assert!(bracket.lower <= bracket.upper + 1e-9);
        }

        #[test]
        fn tenet_bound_decreases_in_phi(
            lambda in 0.01f64..1.0, alpha in 0f64..=1.0, rho in 0f64..=1.0, c in 0.05f64..1.0,
            shift in -1f64..1.0, phi in 0.05f64..2.0,
        ) {
            let ing = ingredients(lambda, alpha, rho, c, shift);
            for conv in [DConvention::AsStated, DConvention::ProofConsistent] {
                let lo = bound_tenet(&ing, phi, conv).unwrap().u;
                let hi = bound_tenet(&ing, phi * 1.5, conv).unwrap().u;
                prop_assert!(hi <= lo * (1.0 + 1e-12));
                prop_assert!(lo >= 0.0);
                prop_assert!(bound_tenet(&ing, phi, conv).unwrap().d.unwrap() >= 0.0);
            }
        }

        #[test]
        fn success_probability_monotone(
            n in 1usize..500, c in 0.1f64..2.0, lambda in 0.01f64..1.0, sigma in 0.1f64..3.0, p in 1usize..100,
        ) {
            let base = success_probability(n, c, lambda, sigma, p);
            prop_assert!((0.0..=1.0).contains(&base));
            prop_assert!(success_probability(n + 10, c, lambda, sigma, p) >= base);
            prop_assert!(success_probability(n, c, lambda * 1.1, sigma, p) >= base);
            prop_assert!(success_probability(n, c, lambda, sigma * 1.1, p) <= base);
            prop_assert!(success_probability(n, c, lambda, sigma, p + 5) <= base);
        }

        #[test]
        fn lemma2_inclusion(seed in 0u64..200, alpha in 0f64..=1.0, rho in 0f64..=1.0, c in 0.05f64..1.0) {
            let (members, violations) = cone_inclusion_violations(alpha, rho, c, &truth(), 200, seed).unwrap();
            // the inner cone may collapse to {0}, so only violations are checked
            let _ = members;
            prop_assert_eq!(violations, 0);
        }
    }
}
