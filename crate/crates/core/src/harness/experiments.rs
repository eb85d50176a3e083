use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, GroupingConfig, PhiChoice};
use crate::bounds::{
    check_gre_conclusion, compare_prop1, compare_prop2, cone_contains, cone_inclusion_violations,
    phi_lower, phi_upper_estimate, required_sample_size, success_probability, ConeSpec,
    Ingredients,
};
use crate::error::{Error, Result};
use crate::grouping::{
    grouping_bound, grouping_bound_remark, source_grouping_bound, GroupingReport,
};
use crate::linalg::{derive_seed, l1, l2};
use crate::model::{
    generate_design, generate_noise, generate_response, standardize, Covariance, Dataset,
    DesignSpec, Instance, Scenario,
};
use crate::registry::{EstimatorRegistry, PenaltyPoint};
use crate::solver::{fit, fit_enet, objective, PenaltySpec, SolverOptions};

/// One fitted replication at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub seed: u64,
    pub method: String,
    pub lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    pub error: f64,
    pub bound: f64,
    pub probability: f64,
    pub cone_member: bool,
    pub kkt_residual: f64,
    /// False when the solver stopped before reaching its tolerance.
    #[serde(skip, default = "valid_default")]
    pub valid: bool,
}

fn valid_default() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub method: String,
    pub lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    pub replications: usize,
    pub valid: usize,
    pub covered: usize,
    pub coverage: f64,
    pub probability: f64,
    pub standard_error: f64,
    pub cone_fraction: f64,
    pub vacuous: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub phi: PhiChoice,
    /// Bounds built from a sampled eigenvalue estimate are not guarantees.
    pub certified: bool,
    pub points: Vec<PointSummary>,
    pub all_pass: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<ReplicationRecord>,
    pub summary: ExperimentSummary,
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn replication_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, 1000 + rep as u64)
}

fn run_replication(
    cfg: &ExperimentConfig,
    registry: &EstimatorRegistry,
    grid: &[PenaltyPoint],
    seed: u64,
) -> Result<Vec<ReplicationRecord>> {
    let inst = cfg.scenario.realize(seed)?;
    let data = &inst.data;
    let beta_star = &inst.truth.beta_star;
    let tilde = &inst.source.beta_tilde;
    let phi_low = phi_lower(data.x());
    let opts = SolverOptions::with_tol(cfg.tol);
    let sigma = cfg.scenario.noise.sigma();

    let mut out = Vec::with_capacity(grid.len() * cfg.methods.len());
    for name in &cfg.methods {
        let est = registry.get(name)?;
        let mut warm: Option<DVector<f64>> = None;
        for &point in grid {
            let eff = est.effective(point);
            let anchor = est.anchor(tilde);
            let pen = est.penalty(point, tilde)?;
            let run_opts = SolverOptions {
                warm_start: warm.clone(),
                ..opts.clone()
            };
            let res = fit(data, &pen, &run_opts)?;
            let beta_hat = res.beta();
            warm = Some(beta_hat.clone());

            let v = &beta_hat - beta_star;
            let cone = ConeSpec::from_truth(eff.alpha, eff.rho, cfg.c, beta_star, &anchor)?;
            let phi = match cfg.phi {
                PhiChoice::Lower => phi_low,
                PhiChoice::UpperEstimate => phi_upper_estimate(
                    data.x(),
                    &cone,
                    cfg.phi_samples,
                    seed,
                    std::slice::from_ref(&v),
                )?,
            };
            let ing =
                Ingredients::from_truth(eff.lambda, eff.alpha, eff.rho, cfg.c, beta_star, &anchor)?;
            let bound = match est.bound(&ing, phi, cfg.d_convention) {
                Ok(rep) => rep.u,
                Err(Error::DegenerateDenominator(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            out.push(ReplicationRecord {
                seed,
                method: name.clone(),
                lambda: eff.lambda,
                alpha: eff.alpha,
                rho: eff.rho,
                error: l2(&v),
                bound,
                probability: success_probability(data.n(), cfg.c, eff.lambda, sigma, data.p()),
                cone_member: cone_contains(&v, &cone)?,
                kkt_residual: res.kkt_residual,
                valid: res.converged,
            });
        }
    }
    Ok(out)
}

fn summarize(
    cfg: &ExperimentConfig,
    grid: &[PenaltyPoint],
    records: &[ReplicationRecord],
) -> ExperimentSummary {
    let per_rep = grid.len() * cfg.methods.len();
    let mut points = Vec::with_capacity(per_rep);
    for (mi, name) in cfg.methods.iter().enumerate() {
        for gi in 0..grid.len() {
            let idx = mi * grid.len() + gi;
            let rows: Vec<&ReplicationRecord> = records.iter().skip(idx).step_by(per_rep).collect();
            let valid: Vec<&&ReplicationRecord> = rows.iter().filter(|r| r.valid).collect();
            let covered = valid.iter().filter(|r| r.error <= r.bound).count();
            let members = valid.iter().filter(|r| r.cone_member).count();
            let nv = valid.len().max(1) as f64;
            let probability = rows[0].probability;
            let coverage = covered as f64 / nv;
            let standard_error = (probability * (1.0 - probability) / nv).sqrt();
            let vacuous = probability <= 0.0;
            points.push(PointSummary {
                method: name.clone(),
                lambda: rows[0].lambda,
                alpha: rows[0].alpha,
                rho: rows[0].rho,
                replications: rows.len(),
                valid: valid.len(),
                covered,
                coverage,
                probability,
                standard_error,
                cone_fraction: members as f64 / nv,
                vacuous,
                pass: vacuous || coverage >= probability - 3.0 * standard_error,
            });
        }
    }
    let all_pass = points.iter().all(|p| p.pass);
    ExperimentSummary {
        phi: cfg.phi,
        certified: cfg.phi == PhiChoice::Lower,
        points,
        all_pass,
    }
}

/// Fits every replication at every grid point and compares the error with the
/// bound. Replications run in parallel; records come back in replication
/// order, then method, then grid order, whatever the scheduling.
pub fn run_theorem1_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let registry = EstimatorRegistry::builtin();
    let grid = cfg.grid();
    let per_rep: Vec<Vec<ReplicationRecord>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| run_replication(cfg, &registry, &grid, replication_seed(cfg.seed, rep)))
        .collect::<Result<_>>()?;
    let records: Vec<ReplicationRecord> = per_rep.into_iter().flatten().collect();
    let summary = summarize(cfg, &grid, &records);
    Ok(ExperimentOutcome { records, summary })
}

/// Fraction of converged replications whose error direction lies in the cone.
pub fn run_cone_membership_check(cfg: &ExperimentConfig) -> Result<f64> {
    let outcome = run_theorem1_experiment(cfg)?;
    let valid: Vec<_> = outcome.records.iter().filter(|r| r.valid).collect();
    if valid.is_empty() {
        return Ok(0.0);
    }
    Ok(valid.iter().filter(|r| r.cone_member).count() as f64 / valid.len() as f64)
}

/// Objective written through the augmented design `X~ = [X; sqrt(2n lambda (1-rho)) I]`
/// and response `y~ = (y, 0)`.
pub fn augmented_objective(beta: &DVector<f64>, data: &Dataset, pen: &PenaltySpec) -> Result<f64> {
    if !pen.is_coupled() {
        return Err(Error::WrongPenaltyShape(
            "augmented form needs the coupled penalty",
        ));
    }
    let (n, p) = (data.n(), data.p());
    let (lambda, alpha, rho) = (pen.lambda(), pen.alpha(), pen.rho1());
    let tilde = pen.beta_tilde();
    let scale = (2.0 * n as f64 * lambda * (1.0 - rho)).sqrt();
    let mut x_aug = DMatrix::zeros(n + p, p);
    x_aug.rows_mut(0, n).copy_from(data.x());
    for j in 0..p {
        x_aug[(n + j, j)] = scale;
    }
    let mut y_aug = DVector::zeros(n + p);
    y_aug.rows_mut(0, n).copy_from(data.y());
    let resid = y_aug - x_aug * beta;
    Ok(resid.norm_squared() / (2.0 * n as f64)
        + lambda * alpha * rho * l1(beta)
        + lambda * (1.0 - alpha) * rho * l1(&(beta - tilde))
        - 2.0 * lambda * (1.0 - alpha) * (1.0 - rho) * beta.dot(tilde)
        + lambda * (1.0 - alpha) * (1.0 - rho) * tilde.norm_squared())
}

/// Largest gap between the direct and augmented objective over `points`
/// random coefficient vectors per grid point.
pub fn run_augmented_identity_check(cfg: &ExperimentConfig, points: usize) -> Result<f64> {
    cfg.validate()?;
    let inst = cfg.scenario.realize(cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 77));
    let mut worst = 0.0f64;
    for point in cfg.grid() {
        let pen = PenaltySpec::coupled(
            point.lambda,
            point.alpha,
            point.rho,
            inst.source.beta_tilde.clone(),
        )?;
        for _ in 0..points {
            let beta = DVector::from_fn(inst.data.p(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let direct = objective(&beta, &inst.data, &pen)?;
            let aug = augmented_objective(&beta, &inst.data, &pen)?;
            worst = worst.max((direct - aug).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropositionRow {
    pub lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    pub u_tenet: f64,
    pub u_enet: f64,
    pub u_tlasso: f64,
    pub prop1_holds: bool,
    pub prop2_condition: bool,
    pub prop2_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropositionSummary {
    pub rows: Vec<PropositionRow>,
    pub prop1_violations: usize,
    /// Points where the stated conditions hold but the conclusion fails.
    pub prop2_violations: usize,
    pub prop2_condition_points: usize,
    pub inclusion_members: usize,
    pub inclusion_violations: usize,
}

/// Evaluates both bound comparisons on the config grid for one exact-source
/// instance, and samples the cone inclusion behind the first of them.
pub fn run_proposition_experiments(
    cfg: &ExperimentConfig,
    inclusion_members: usize,
) -> Result<PropositionSummary> {
    cfg.validate()?;
    let inst = cfg.scenario.realize(cfg.seed)?;
    let beta_star = &inst.truth.beta_star;
    let phi = phi_lower(inst.data.x());
    let mut rows = Vec::new();
    for point in cfg.grid() {
        let ing = Ingredients::from_truth(
            point.lambda,
            point.alpha,
            point.rho,
            cfg.c,
            beta_star,
            beta_star,
        )?;
        let p1 = compare_prop1(&ing, phi, phi)?;
        let p2 = compare_prop2(&ing, phi, phi)?;
        rows.push(PropositionRow {
            lambda: point.lambda,
            alpha: point.alpha,
            rho: point.rho,
            u_tenet: p1.u_tenet,
            u_enet: p1.u_enet,
            u_tlasso: p2.u_tlasso,
            prop1_holds: p1.holds,
            prop2_condition: p2.condition_holds,
            prop2_holds: p2.conclusion_holds,
        });
    }

    let pairs: Vec<(f64, f64)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| cfg.rhos.iter().map(move |&r| (a, r)))
        .collect();
    // some cones are {0}, so keep going in rounds until the target is met
    let per_pair = inclusion_members.div_ceil(pairs.len());
    let (mut members, mut violations) = (0, 0);
    for round in 0..10u64 {
        if members >= inclusion_members {
            break;
        }
        for (i, &(alpha, rho)) in pairs.iter().enumerate() {
            let seed = derive_seed(cfg.seed, 500 + 1000 * round + i as u64);
            let (m, v) = cone_inclusion_violations(alpha, rho, cfg.c, beta_star, per_pair, seed)?;
            members += m;
            violations += v;
        }
    }

    Ok(PropositionSummary {
        prop1_violations: rows.iter().filter(|r| !r.prop1_holds).count(),
        prop2_violations: rows
            .iter()
            .filter(|r| r.prop2_condition && !r.prop2_holds)
            .count(),
        prop2_condition_points: rows.iter().filter(|r| r.prop2_condition).count(),
        rows,
        inclusion_members: members,
        inclusion_violations: violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreCurveSpec {
    pub p: usize,
    pub s: usize,
    pub alpha: f64,
    pub rho: f64,
    pub c: f64,
    pub seeds: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrePoint {
    pub n: usize,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreCurve {
    pub points: Vec<GrePoint>,
    /// Sample size the restricted eigenvalue guarantee asks for.
    pub required_n: f64,
    pub monotone: bool,
}

/// Empirical rate at which sampled cone quotients of an identity-covariance
/// Gaussian design stay above `gamma / 64`, for each `n`.
pub fn run_gre_curve(spec: &GreCurveSpec, ns: &[usize]) -> Result<GreCurve> {
    let gamma = 1.0;
    let beta_star = DVector::from_fn(spec.p, |j, _| if j < spec.s { 1.0 } else { 0.0 });
    let cone = ConeSpec::from_truth(spec.alpha, spec.rho, spec.c, &beta_star, &beta_star)?;
    let delta_alpha = l2(&cone.delta_alpha);
    let required_n = required_sample_size(
        spec.alpha,
        spec.rho,
        spec.c,
        spec.s,
        delta_alpha,
        gamma,
        1.0,
        spec.p,
    )?;
    let mut points = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let design = DesignSpec {
            n,
            p: spec.p,
            covariance: Covariance::Identity,
        };
        let successes = (0..spec.seeds)
            .into_par_iter()
            .map(|k| -> Result<bool> {
                let seed = derive_seed(spec.seed, (ni * 100_000 + k) as u64);
                let x = generate_design(&design, seed)?;
                Ok(check_gre_conclusion(&x, &cone, gamma, spec.samples, seed)?.holds)
            })
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|h| *h)
            .count();
        points.push(GrePoint {
            n,
            successes,
            trials: spec.seeds,
            rate: successes as f64 / spec.seeds as f64,
        });
    }
    let monotone = points.windows(2).all(|w| w[1].rate >= w[0].rate);
    Ok(GreCurve {
        points,
        required_n,
        monotone,
    })
}

/// Which penalty produced a grouping row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingVariant {
    Coupled,
    NoTransferRidge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingRow {
    pub variant: GroupingVariant,
    pub seed: u64,
    pub lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    pub report: GroupingReport,
    /// `(1 - alpha)` times the source-side bound for the same pair.
    pub transferred_source_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingOutcome {
    pub rows: Vec<GroupingRow>,
    pub pairs_checked: usize,
    pub violations: usize,
    /// Source fits that broke the source-side bound on some pair.
    pub source_violations: usize,
    pub enough_pairs: bool,
}

impl GroupingOutcome {
    pub fn reports(&self) -> Vec<GroupingReport> {
        self.rows.iter().map(|r| r.report).collect()
    }
}

/// Source data sharing the target truth: `m` fresh rows from the same design
/// family, standardized on their own.
pub fn source_dataset(
    scenario: &Scenario,
    inst: &Instance,
    m: usize,
    seed: u64,
) -> Result<Dataset> {
    let design = DesignSpec {
        n: m,
        ..scenario.design()
    };
    let x = generate_design(&design, derive_seed(seed, 11))?;
    let noise = generate_noise(&scenario.noise, m, derive_seed(seed, 12))?;
    let y = generate_response(&x, &inst.beta_star_raw, &noise)?;
    Ok(standardize(&y, &x)?.0)
}

fn block_pairs(cov: &Covariance, p: usize) -> Vec<(usize, usize)> {
    let size = match *cov {
        Covariance::DuplicatedBlock { group_size, .. } => group_size.max(1),
        _ => 1,
    };
    let mut out = Vec::new();
    for start in (0..p).step_by(size) {
        let end = (start + size).min(p);
        for j in start..end {
            for k in j + 1..end {
                out.push((j, k));
            }
        }
    }
    out
}

/// Fits an Elastic Net source, then the target estimator on every grid point,
/// and reports every within-block pair.
pub fn run_grouping_experiment(cfg: &GroupingConfig) -> Result<GroupingOutcome> {
    cfg.validate()?;
    let pairs = block_pairs(&cfg.scenario.covariance, cfg.scenario.p);
    let opts = SolverOptions::with_tol(cfg.tol);
    let per_rep: Vec<(Vec<GroupingRow>, usize)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<GroupingRow>, usize)> {
            let seed = replication_seed(cfg.seed, rep);
            let inst = cfg.scenario.realize(seed)?;
            let source = source_dataset(&cfg.scenario, &inst, cfg.source_n, seed)?;
            let tilde = fit_enet(&source, cfg.source_lambda, cfg.source_rho, &opts)?.beta();
            let mut source_bad = 0;
            let mut source_bounds = Vec::with_capacity(pairs.len());
            for &(j, k) in &pairs {
                let b = source_grouping_bound(&source, cfg.source_lambda, cfg.source_rho, j, k)?;
                if (tilde[j] - tilde[k]).abs() > b + 1e-9 {
                    source_bad += 1;
                }
                source_bounds.push(b);
            }

            let mut rows = Vec::new();
            for &lambda in &cfg.lambdas {
                for &alpha in &cfg.alphas {
                    for &rho in &cfg.rhos {
                        let mut variants = vec![(
                            GroupingVariant::Coupled,
                            PenaltySpec::coupled(lambda, alpha, rho, tilde.clone())?,
                        )];
                        if cfg.remark && alpha > 0.0 {
                            variants.push((
                                GroupingVariant::NoTransferRidge,
                                PenaltySpec::generalized(lambda, alpha, rho, 0.0, tilde.clone())?,
                            ));
                        }
                        for (variant, pen) in variants {
                            let beta = fit(&inst.data, &pen, &opts)?.beta();
                            for (pi, &(j, k)) in pairs.iter().enumerate() {
                                let report = match variant {
                                    GroupingVariant::Coupled => {
                                        grouping_bound(&inst.data, &pen, &beta, j, k)?
                                    }
                                    GroupingVariant::NoTransferRidge => {
                                        grouping_bound_remark(&inst.data, &pen, &beta, j, k)?
                                    }
                                };
                                rows.push(GroupingRow {
                                    variant,
                                    seed,
                                    lambda,
                                    alpha,
                                    rho,
                                    report,
                                    transferred_source_bound: (1.0 - alpha) * source_bounds[pi],
                                });
                            }
                        }
                    }
                }
            }
            Ok((rows, source_bad))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut source_violations = 0;
    for (r, bad) in per_rep {
        rows.extend(r);
        source_violations += bad;
    }
    let pairs_checked = rows.iter().filter(|r| r.report.preconditions_met).count();
    let violations = rows.iter().filter(|r| !r.report.holds(1e-9)).count();
    Ok(GroupingOutcome {
        pairs_checked,
        violations,
        source_violations,
        enough_pairs: pairs_checked >= cfg.min_pairs,
        rows,
    })
}
