//! Data containers, standardization and synthetic problem generation.
//!
//! Every generator is a pure function of its spec and a `u64` seed. Synthetic
//! problems are standardized after the noise has been added, and the true
//! coefficients are reported in the standardized scale (`beta_star`) as well
//! as the raw scale they were drawn in (`beta_star_raw`).

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{derive_seed, l1, sym_eigenvalues};

/// Centered response and standardized design: `sum(y) = 0`, and for every
/// column `sum(X_j) = 0` and `sum(X_j^2) / n = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
}

impl Dataset {
    /// Wraps `(y, X)` without standardizing. Only the shapes are checked; the
    /// solver accepts arbitrary columns, which the oracle and closed-form
    /// tests rely on.
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        check_len("response length vs design rows", x.nrows(), y.len())?;
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidParameter("empty design".into()));
        }
        Ok(Self { y, x })
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Checks the centering and scaling identities to `tol` (scaled by `n`
    /// for the sums).
    pub fn is_standardized(&self, tol: f64) -> bool {
        let n = self.n() as f64;
        if self.y.sum().abs() > tol * n {
            return false;
        }
        self.x
            .column_iter()
            .all(|col| col.sum().abs() <= tol * n && (col.norm_squared() / n - 1.0).abs() <= tol)
    }
}

/// Shifts and scales applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub y_shift: f64,
    pub x_shift: Vec<f64>,
    pub x_scale: Vec<f64>,
}

impl Standardization {
    /// Maps standardized-scale coefficients back to the raw predictors.
    pub fn to_raw(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            beta.len(),
            beta.iter().zip(&self.x_scale).map(|(b, s)| b / s),
        )
    }

    /// Maps raw-scale coefficients to the standardized predictors.
    pub fn to_standardized(&self, beta_raw: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            beta_raw.len(),
            beta_raw.iter().zip(&self.x_scale).map(|(b, s)| b * s),
        )
    }

    /// Raw-scale intercept implied by standardized coefficients.
    pub fn intercept(&self, beta: &DVector<f64>) -> f64 {
        let raw = self.to_raw(beta);
        self.y_shift
            - raw
                .iter()
                .zip(&self.x_shift)
                .map(|(b, m)| b * m)
                .sum::<f64>()
    }
}

/// Centers `y` and standardizes every column of `X` with divisor `n`.
pub fn standardize(
    y_raw: &DVector<f64>,
    x_raw: &DMatrix<f64>,
) -> Result<(Dataset, Standardization)> {
    check_len("response length vs design rows", x_raw.nrows(), y_raw.len())?;
    let n = x_raw.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    let nf = n as f64;

    let y_shift = y_raw.mean();
    let y = y_raw.map(|v| v - y_shift);

    let mut x = x_raw.clone();
    let mut x_shift = Vec::with_capacity(x.ncols());
    let mut x_scale = Vec::with_capacity(x.ncols());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.sum() / nf;
        col.add_scalar_mut(-mean);
        let var = col.norm_squared() / nf;
        if !(var > 1e-24 * (1.0 + mean * mean)) {
            return Err(Error::ZeroVarianceColumn(j));
        }
        let scale = var.sqrt();
        col.unscale_mut(scale);
        x_shift.push(mean);
        x_scale.push(scale);
    }

    Ok((
        Dataset { y, x },
        Standardization {
            y_shift,
            x_shift,
            x_scale,
        },
    ))
}

/// True coefficient vector and its support.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModel {
    pub beta_star: DVector<f64>,
    pub support: Vec<usize>,
    pub sigma: f64,
}

impl TrueModel {
    pub fn new(beta_star: DVector<f64>, sigma: f64) -> Self {
        let support = support_of(&beta_star);
        Self {
            beta_star,
            support,
            sigma,
        }
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }
}

pub fn support_of(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Source estimate `beta_tilde` together with `delta = beta_tilde - beta_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceEstimate {
    pub beta_tilde: DVector<f64>,
    pub delta: DVector<f64>,
}

impl SourceEstimate {
    pub fn new(beta_tilde: DVector<f64>, beta_star: &DVector<f64>) -> Result<Self> {
        check_len("source length", beta_star.len(), beta_tilde.len())?;
        let delta = &beta_tilde - beta_star;
        Ok(Self { beta_tilde, delta })
    }

    /// `(1 - alpha) * beta_tilde - beta_star`, computed as `delta - alpha * beta_tilde`.
    pub fn delta_alpha(&self, alpha: f64) -> DVector<f64> {
        &self.delta - &self.beta_tilde * alpha
    }

    pub fn delta_l1(&self) -> f64 {
        l1(&self.delta)
    }
}

/// Population covariance family for Gaussian designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Covariance {
    Identity,
    /// Unit diagonal, every off-diagonal entry equal to `r`.
    Equicorrelated {
        r: f64,
    },
    /// `Sigma_jk = r^|j - k|`.
    Toeplitz {
        r: f64,
    },
    /// Consecutive blocks of `group_size` columns with within-block
    /// correlation `r`; independent across blocks.
    DuplicatedBlock {
        r: f64,
        group_size: usize,
    },
}

impl Covariance {
    pub fn matrix(&self, p: usize) -> DMatrix<f64> {
        match *self {
            Covariance::Identity => DMatrix::identity(p, p),
            Covariance::Equicorrelated { r } => {
                DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { r })
            }
            Covariance::Toeplitz { r } => {
                DMatrix::from_fn(p, p, |i, j| r.powi(i.abs_diff(j) as i32))
            }
            Covariance::DuplicatedBlock { r, group_size } => {
                let g = group_size.max(1);
                DMatrix::from_fn(p, p, |i, j| {
                    if i == j {
                        1.0
                    } else if i / g == j / g {
                        r
                    } else {
                        0.0
                    }
                })
            }
        }
    }
}

/// Gaussian design `N(0, Sigma)` with `n` i.i.d. rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub n: usize,
    pub p: usize,
    pub covariance: Covariance,
}

impl DesignSpec {
    pub fn sigma(&self) -> DMatrix<f64> {
        self.covariance.matrix(self.p)
    }

    /// Smallest eigenvalue of `Sigma`; a valid `gamma` for every cone.
    pub fn gamma(&self) -> f64 {
        sym_eigenvalues(&self.sigma())[0]
    }

    /// `M = max_j Sigma_jj`.
    pub fn max_diagonal(&self) -> f64 {
        self.sigma().diagonal().max()
    }
}

/// Square root factor `L` with `L L^T = Sigma`, via the eigendecomposition so
/// that singular (e.g. perfectly duplicated) covariances are allowed.
fn covariance_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = nalgebra::SymmetricEigen::new(sigma.clone());
    let scale = sigma.diagonal().amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::NonPsdCovariance(min));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

pub fn generate_design(spec: &DesignSpec, seed: u64) -> Result<DMatrix<f64>> {
    if spec.n == 0 || spec.p == 0 {
        return Err(Error::InvalidParameter(
            "design needs n >= 1 and p >= 1".into(),
        ));
    }
    let factor = covariance_factor(&spec.sigma())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(spec.n, spec.p, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(z * factor.transpose())
}

/// Noise family. All three are sub-Gaussian with variance proxy `sigma^2`:
/// the Gaussian and the scaled Rademacher exactly, and the uniform on
/// `[-sigma*sqrt(3), sigma*sqrt(3)]` because a symmetric uniform is strictly
/// sub-Gaussian (proxy equals its variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    ScaledRademacher { sigma: f64 },
    Uniform { sigma: f64 },
}

impl NoiseSpec {
    /// Square root of the sub-Gaussian variance proxy.
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sigma }
            | NoiseSpec::ScaledRademacher { sigma }
            | NoiseSpec::Uniform { sigma } => sigma,
        }
    }
}

pub fn generate_noise(spec: &NoiseSpec, n: usize, seed: u64) -> Result<DVector<f64>> {
    let sigma = spec.sigma();
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("noise length must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = match *spec {
        NoiseSpec::Gaussian { .. } => {
            let dist = Normal::new(0.0, sigma).expect("sigma checked above");
            DVector::from_fn(n, |_, _| dist.sample(&mut rng))
        }
        NoiseSpec::ScaledRademacher { .. } => {
            DVector::from_fn(n, |_, _| if rng.random::<bool>() { sigma } else { -sigma })
        }
        NoiseSpec::Uniform { .. } => {
            let half = sigma * 3f64.sqrt();
            DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0) * half)
        }
    };
    Ok(v)
}

/// `y = X beta_star + noise` in the raw scale.
pub fn generate_response(
    x: &DMatrix<f64>,
    beta_star: &DVector<f64>,
    noise: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(
        "coefficient length vs design columns",
        x.ncols(),
        beta_star.len(),
    )?;
    check_len("noise length vs design rows", x.nrows(), noise.len())?;
    Ok(x * beta_star + noise)
}

/// How the source estimate departs from the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    Exact,
    /// `k` distinct coordinates shifted by `+-magnitude`.
    SparseShift {
        k: usize,
        magnitude: f64,
    },
    /// Every coordinate shifted by `N(0, tau^2)`.
    DenseGaussian {
        tau: f64,
    },
}

pub fn make_source(
    beta_star: &DVector<f64>,
    perturbation: &Perturbation,
    seed: u64,
) -> Result<SourceEstimate> {
    let p = beta_star.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tilde = beta_star.clone();
    match *perturbation {
        Perturbation::Exact => {}
        Perturbation::SparseShift { k, magnitude } => {
            if k > p || !magnitude.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sparse shift needs k <= p and finite magnitude (k = {k}, p = {p})"
                )));
            }
            for j in sample(&mut rng, p, k).into_iter() {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                tilde[j] += sign * magnitude;
            }
        }
        Perturbation::DenseGaussian { tau } => {
            if !(tau >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tau must be >= 0, got {tau}"
                )));
            }
            if tau > 0.0 {
                let dist = Normal::new(0.0, tau).expect("tau checked above");
                for v in tilde.iter_mut() {
                    *v += dist.sample(&mut rng);
                }
            }
        }
    }
    SourceEstimate::new(tilde, beta_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportPlacement {
    #[default]
    Random,
    /// The first `s` columns; used with block designs so the signal sits on
    /// the correlated groups.
    Leading,
}

/// Full description of one synthetic problem, readable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    /// Absolute value of every nonzero raw-scale coefficient; signs are random.
    #[serde(default = "default_magnitude")]
    pub beta_magnitude: f64,
    #[serde(default)]
    pub support: SupportPlacement,
    pub covariance: Covariance,
    pub noise: NoiseSpec,
    #[serde(default = "default_source")]
    pub source: Perturbation,
    #[serde(default)]
    pub seed: u64,
}

fn default_magnitude() -> f64 {
    1.0
}

fn default_source() -> Perturbation {
    Perturbation::Exact
}

/// One realized problem. `beta_star` and `source` live in the standardized
/// scale of `data`; `noise` is the centered noise, so
/// `data.y() == data.x() * beta_star + noise` holds up to rounding.
#[derive(Debug, Clone)]
pub struct Instance {
    pub data: Dataset,
    pub standardization: Standardization,
    pub truth: TrueModel,
    pub beta_star_raw: DVector<f64>,
    pub noise: DVector<f64>,
    pub source: SourceEstimate,
}

const STREAM_TRUTH: u64 = 1;
const STREAM_DESIGN: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_SOURCE: u64 = 4;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("scenario needs n >= 1 and p >= 1".into()));
        }
        if self.s > self.p {
            return Err(Error::Config(format!(
                "s = {} exceeds p = {}",
                self.s, self.p
            )));
        }
        if !(self.beta_magnitude > 0.0) {
            return Err(Error::Config("beta_magnitude must be positive".into()));
        }
        if !(self.noise.sigma() >= 0.0) {
            return Err(Error::Config("noise sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn design(&self) -> DesignSpec {
        DesignSpec {
            n: self.n,
            p: self.p,
            covariance: self.covariance,
        }
    }

    /// Raw-scale sparse truth drawn from `seed`.
    pub fn draw_truth(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_TRUTH));
        let mut support: Vec<usize> = match self.support {
            SupportPlacement::Random => sample(&mut rng, self.p, self.s).into_vec(),
            SupportPlacement::Leading => (0..self.s).collect(),
        };
        support.sort_unstable();
        let mut beta = DVector::zeros(self.p);
        for j in support {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            beta[j] = sign * self.beta_magnitude;
        }
        beta
    }

    pub fn realize(&self, seed: u64) -> Result<Instance> {
        self.validate()?;
        let beta_star_raw = self.draw_truth(seed);
        let x_raw = generate_design(&self.design(), derive_seed(seed, STREAM_DESIGN))?;
        let noise_raw = generate_noise(&self.noise, self.n, derive_seed(seed, STREAM_NOISE))?;
        let y_raw = generate_response(&x_raw, &beta_star_raw, &noise_raw)?;
        let (data, standardization) = standardize(&y_raw, &x_raw)?;

        let beta_star = standardization.to_standardized(&beta_star_raw);
        let noise_mean = noise_raw.mean();
        let noise = noise_raw.map(|e| e - noise_mean);
        let source = make_source(&beta_star, &self.source, derive_seed(seed, STREAM_SOURCE))?;

        Ok(Instance {
            data,
            standardization,
            truth: TrueModel::new(beta_star, self.noise.sigma()),
            beta_star_raw,
            noise,
            source,
        })
    }
}
