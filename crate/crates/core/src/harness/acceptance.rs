//! The end-to-end acceptance criteria, shared by `tenet check` and the
//! `acceptance` test target.

use std::fmt;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{ExperimentConfig, GroupingConfig};
use super::experiments::{
    run_augmented_identity_check, run_cone_membership_check, run_gre_curve,
    run_grouping_experiment, run_proposition_experiments, run_theorem1_experiment, source_dataset,
    write_csv, GreCurveSpec, GroupingVariant,
};
use crate::error::Result;
use crate::grouping::{grouping_bound_remark, source_grouping_bound};
use crate::linalg::derive_seed;
use crate::model::Dataset;
use crate::oracle::{full_oracle, prox_oracle};
use crate::solver::{fit, fit_enet, two_kink_prox, PenaltySpec, SolverOptions};

pub const COVERAGE_CONFIG: &str = include_str!("../../configs/coverage.toml");
pub const NOISELESS_CONFIG: &str = include_str!("../../configs/noiseless.toml");
pub const PROPOSITIONS_CONFIG: &str = include_str!("../../configs/propositions.toml");
pub const GROUPING_CONFIG: &str = include_str!("../../configs/grouping.toml");
pub const SMOKE_CONFIG: &str = include_str!("../../configs/smoke.toml");

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{mark}] criterion {:>2}: {} ({})",
            self.id, self.title, self.detail
        )
    }
}

fn outcome(
    id: usize,
    title: &'static str,
    run: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let start = Instant::now();
    let (passed, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome {
        id,
        title,
        passed,
        detail: format!("{detail}; {:.1}s", start.elapsed().as_secs_f64()),
    }
}

/// Closed-form prox against the search oracle on `10^5` random draws.
pub fn prox_correctness() -> CriterionOutcome {
    outcome(1, "two-kink prox matches the search oracle", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..100_000 {
            let q = 10.0 * (1.0 - rng.random::<f64>());
            let z = rng.random_range(-10.0..=10.0);
            let a = rng.random_range(0.0..=5.0);
            let c = rng.random_range(0.0..=5.0);
            let t = rng.random_range(-5.0..=5.0);
            let closed = two_kink_prox(q, z, a, c, t)?;
            let searched = prox_oracle(q, z, a, c, t)?;
            worst = worst.max((closed - searched).abs() / closed.abs().max(1.0));
        }
        let secs = start.elapsed().as_secs_f64();
        Ok((
            worst <= 1e-8 && secs < 10.0,
            format!("max scaled gap {worst:.2e} over 100000 draws"),
        ))
    })
}

fn random_instance(seed: u64, n: usize, p: usize) -> Result<(Dataset, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let tilde = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok((Dataset::new(y, x)?, tilde))
}

/// Coordinate descent against the brute-force oracle on 100 tiny instances.
pub fn solver_certification() -> CriterionOutcome {
    outcome(2, "solver matches the brute-force oracle", || {
        let start = Instant::now();
        let lambdas = [0.01, 0.1, 0.3, 0.8];
        let alphas = [0.0, 0.3, 0.7, 1.0];
        let rhos = [0.0, 0.5, 1.0];
        let opts = SolverOptions::with_tol(1e-9);
        let (mut worst_gap, mut worst_kkt) = (0.0f64, 0.0f64);
        for i in 0..100u64 {
            let p = 1 + (i % 3) as usize;
            let n = if (i / 3) % 2 == 0 { 5 } else { 20 };
            let (data, tilde) = random_instance(derive_seed(2, i), n, p)?;
            let pen = PenaltySpec::coupled(
                lambdas[(i % 4) as usize],
                alphas[((i / 4) % 4) as usize],
                rhos[((i / 16) % 3) as usize],
                tilde,
            )?;
            let res = fit(&data, &pen, &opts)?;
            let reference = full_oracle(&data, &pen, i)?;
            worst_gap = worst_gap.max((res.beta() - &reference.beta).amax());
            worst_kkt = worst_kkt.max(res.kkt_residual);
        }
        let secs = start.elapsed().as_secs_f64();
        Ok((
            worst_gap <= 1e-4 && worst_kkt <= 1e-8 && secs < 60.0,
            format!("max sup-norm gap {worst_gap:.2e}, max KKT residual {worst_kkt:.2e}"),
        ))
    })
}

fn hadamard(order: usize) -> DMatrix<f64> {
    let mut h = DMatrix::from_element(1, 1, 1.0);
    while h.nrows() < order {
        let k = h.nrows();
        let mut next = DMatrix::zeros(2 * k, 2 * k);
        next.view_mut((0, 0), (k, k)).copy_from(&h);
        next.view_mut((0, k), (k, k)).copy_from(&h);
        next.view_mut((k, 0), (k, k)).copy_from(&h);
        next.view_mut((k, k), (k, k)).copy_from(&(-&h));
        h = next;
    }
    h
}

/// Elastic Net on an orthonormal design against its closed form.
pub fn closed_form_check() -> CriterionOutcome {
    outcome(3, "orthonormal Elastic Net closed form", || {
        let x = hadamard(8).columns(1, 4).into_owned();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = DVector::from_fn(8, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(y, x)?;
        let z = data.x().transpose() * data.y() / 8.0;
        let opts = SolverOptions::with_tol(1e-12);
        let mut worst = 0.0f64;
        for lambda in [0.01, 0.05, 0.1, 0.3, 0.6] {
            for rho in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let got = fit_enet(&data, lambda, rho, &opts)?.beta();
                for j in 0..4 {
                    let shrunk = z[j].signum() * (z[j].abs() - lambda * rho).max(0.0);
                    worst = worst.max((got[j] - shrunk / (1.0 + 2.0 * lambda * (1.0 - rho))).abs());
                }
            }
        }
        Ok((worst <= 1e-8, format!("max gap {worst:.2e} on a 5x5 grid")))
    })
}

/// Empirical coverage of the error bound on the shipped coverage config.
pub fn bound_coverage() -> CriterionOutcome {
    outcome(4, "error bound coverage", || {
        let start = Instant::now();
        let cfg = ExperimentConfig::from_toml(COVERAGE_CONFIG)?;
        let out = run_theorem1_experiment(&cfg)?;
        let secs = start.elapsed().as_secs_f64();
        let nonvacuous = out.summary.points.iter().all(|p| !p.vacuous);
        let worst = out
            .summary
            .points
            .iter()
            .map(|p| p.coverage - (p.probability - 3.0 * p.standard_error))
            .fold(f64::INFINITY, f64::min);
        let min_cov = out
            .summary
            .points
            .iter()
            .map(|p| p.coverage)
            .fold(f64::INFINITY, f64::min);
        let min_valid = out
            .summary
            .points
            .iter()
            .map(|p| p.valid)
            .min()
            .unwrap_or(0);
        Ok((
            out.summary.all_pass && nonvacuous && min_valid >= 200 && secs < 300.0,
            format!(
                "{} points, min coverage {min_cov:.3}, min slack {worst:.3}, >= {min_valid} valid fits per point",
                out.summary.points.len()
            ),
        ))
    })
}

/// Noiseless fits land in the restricted cone.
pub fn cone_membership() -> CriterionOutcome {
    outcome(5, "noiseless error directions lie in the cone", || {
        let cfg = ExperimentConfig::from_toml(NOISELESS_CONFIG)?;
        let frac = run_cone_membership_check(&cfg)?;
        Ok((frac == 1.0, format!("member fraction {frac}")))
    })
}

/// Direct and augmented objective forms agree.
pub fn augmented_identity() -> CriterionOutcome {
    outcome(6, "augmented objective identity", || {
        let mut cfg = ExperimentConfig::from_toml(COVERAGE_CONFIG)?;
        cfg.scenario.source = crate::model::Perturbation::DenseGaussian { tau: 0.5 };
        cfg.lambdas = vec![0.0, 0.2, 0.5];
        cfg.rhos = vec![0.0, 0.5, 1.0];
        let per_point = 1000usize.div_ceil(cfg.grid().len());
        let dev = run_augmented_identity_check(&cfg, per_point)?;
        Ok((
            dev <= 1e-9,
            format!(
                "max deviation {dev:.2e} over {} points",
                per_point * cfg.grid().len()
            ),
        ))
    })
}

/// Transfer Elastic Net bound never exceeds the Elastic Net one for an exact
/// source, and the underlying cone inclusion survives sampling.
pub fn proposition1() -> CriterionOutcome {
    outcome(7, "exact-source bound beats the Elastic Net bound", || {
        let cfg = ExperimentConfig::from_toml(PROPOSITIONS_CONFIG)?;
        let sum = run_proposition_experiments(&cfg, 10_000)?;
        Ok((
            sum.rows.len() == 125
                && sum.prop1_violations == 0
                && sum.inclusion_members >= 10_000
                && sum.inclusion_violations == 0,
            format!(
                "{} grid points, {} violations; {} sampled cone members, {} inclusion violations",
                sum.rows.len(),
                sum.prop1_violations,
                sum.inclusion_members,
                sum.inclusion_violations
            ),
        ))
    })
}

/// Transfer Lasso bound dominates wherever its conditions hold.
pub fn proposition2() -> CriterionOutcome {
    outcome(
        8,
        "exact-source bound beats the Transfer Lasso bound",
        || {
            let cfg = ExperimentConfig::from_toml(PROPOSITIONS_CONFIG)?;
            let sum = run_proposition_experiments(&cfg, 0)?;
            Ok((
                sum.prop2_condition_points > 0 && sum.prop2_violations == 0,
                format!(
                    "{} of {} points meet the conditions, {} violations",
                    sum.prop2_condition_points,
                    sum.rows.len(),
                    sum.prop2_violations
                ),
            ))
        },
    )
}

/// Restricted eigenvalue success rate grows with `n`.
pub fn gre_trend() -> CriterionOutcome {
    outcome(9, "restricted eigenvalue success curve", || {
        let spec = GreCurveSpec {
            p: 50,
            s: 4,
            alpha: 1.0,
            rho: 1.0,
            c: 0.5,
            seeds: 100,
            samples: 400,
            seed: 9,
        };
        let ns = [25, 50, 100, 200, 400];
        let curve = run_gre_curve(&spec, &ns)?;
        let last = curve.points.last().map(|p| p.successes).unwrap_or(0);
        let rates: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("n={}:{}", p.n, p.successes))
            .collect();
        Ok((
            curve.monotone && last >= 95,
            format!(
                "successes/100 {}; guarantee needs n >= {:.3e}, run scaled by {:.0}",
                rates.join(" "),
                curve.required_n,
                curve.required_n / 400.0
            ),
        ))
    })
}

fn load_grouping() -> Result<GroupingConfig> {
    GroupingConfig::from_toml(GROUPING_CONFIG)
}

/// Within-block pairs of the coupled fits respect the grouping bound.
pub fn grouping_theorem() -> CriterionOutcome {
    outcome(10, "grouping bound on correlated pairs", || {
        let cfg = load_grouping()?;
        let out = run_grouping_experiment(&cfg)?;
        let coupled: Vec<_> = out
            .rows
            .iter()
            .filter(|r| r.variant == GroupingVariant::Coupled)
            .collect();
        let met = coupled
            .iter()
            .filter(|r| r.report.preconditions_met)
            .count();
        let bad = coupled.iter().filter(|r| !r.report.holds(1e-9)).count();
        let min_r = coupled
            .iter()
            .map(|r| r.report.r_jk)
            .fold(f64::INFINITY, f64::min);
        Ok((
            bad == 0 && met >= 50 && min_r >= 0.99,
            format!("{met} pairs meet the preconditions, {bad} violations, min r {min_r:.4}"),
        ))
    })
}

/// Same check for the variant without the transfer ridge term, plus the
/// bound's insensitivity to the source values on the pair.
pub fn grouping_remark() -> CriterionOutcome {
    outcome(11, "grouping bound without the transfer ridge term", || {
        let cfg = load_grouping()?;
        let out = run_grouping_experiment(&cfg)?;
        let rows: Vec<_> = out
            .rows
            .iter()
            .filter(|r| r.variant == GroupingVariant::NoTransferRidge)
            .collect();
        let met = rows.iter().filter(|r| r.report.preconditions_met).count();
        let bad = rows.iter().filter(|r| !r.report.holds(1e-9)).count();

        let opts = SolverOptions::with_tol(cfg.tol);
        let inst = cfg.scenario.realize(cfg.seed)?;
        let source = source_dataset(&cfg.scenario, &inst, cfg.source_n, cfg.seed)?;
        let tilde = fit_enet(&source, cfg.source_lambda, cfg.source_rho, &opts)?.beta();
        let (lambda, alpha, rho) = (cfg.lambdas[0], cfg.alphas[0].max(0.1), cfg.rhos[0]);
        let pen = PenaltySpec::generalized(lambda, alpha, rho, 0.0, tilde.clone())?;
        let beta = fit(&inst.data, &pen, &opts)?.beta();
        let mut worst = 0.0f64;
        for (j, k) in [(0, 1), (2, 3)] {
            let base = grouping_bound_remark(&inst.data, &pen, &beta, j, k)?.bound;
            // move all the pair's mass onto j, then split it evenly: l1 norm fixed
            let total = tilde[j].abs() + tilde[k].abs();
            for (tj, tk) in [(total, 0.0), (total / 2.0, -total / 2.0), (0.0, -total)] {
                let mut moved = tilde.clone();
                moved[j] = tj;
                moved[k] = tk;
                let other = PenaltySpec::generalized(lambda, alpha, rho, 0.0, moved)?;
                let b = grouping_bound_remark(&inst.data, &other, &beta, j, k)?.bound;
                worst = worst.max((b - base).abs() / base.max(1e-300));
            }
        }
        Ok((
            bad == 0 && met >= 50 && worst <= 1e-12,
            format!("{met} pairs meet the preconditions, {bad} violations, source-shift sensitivity {worst:.1e}"),
        ))
    })
}

/// Source-side Elastic Net bound holds on every pair and scales as `1/lambda'`.
pub fn source_pipeline() -> CriterionOutcome {
    outcome(12, "source Elastic Net grouping bound", || {
        let cfg = load_grouping()?;
        let opts = SolverOptions::with_tol(cfg.tol);
        let (mut pairs, mut bad, mut worst_scale) = (0usize, 0usize, 0.0f64);
        for rep in 0..cfg.replications {
            let seed = derive_seed(cfg.seed, 9000 + rep as u64);
            let inst = cfg.scenario.realize(seed)?;
            let source = source_dataset(&cfg.scenario, &inst, cfg.source_n, seed)?;
            for (lambda, rho) in [(cfg.source_lambda, cfg.source_rho), (0.05, 0.2), (0.5, 0.8)] {
                let tilde = fit_enet(&source, lambda, rho, &opts)?.beta();
                for j in 0..source.p() {
                    for k in j + 1..source.p() {
                        let b = source_grouping_bound(&source, lambda, rho, j, k)?;
                        pairs += 1;
                        if (tilde[j] - tilde[k]).abs() > b + 1e-9 {
                            bad += 1;
                        }
                        let doubled = source_grouping_bound(&source, 2.0 * lambda, rho, j, k)?;
                        if b > 0.0 {
                            worst_scale = worst_scale.max((doubled - b / 2.0).abs() / (b / 2.0));
                        }
                    }
                }
            }
        }
        Ok((
            bad == 0 && worst_scale <= 1e-12,
            format!("{pairs} pairs, {bad} violations, halving error {worst_scale:.1e}"),
        ))
    })
}

/// Two runs of the same config give the same bytes. With `exe` the check goes
/// through the `simulate` subcommand; otherwise it runs in process.
pub fn determinism(exe: Option<&Path>) -> CriterionOutcome {
    outcome(13, "simulate output is byte-identical across runs", || {
        let runs: Vec<Vec<u8>> = match exe {
            Some(exe) => {
                let dir = std::env::temp_dir().join(format!("tenet-check-{}", std::process::id()));
                std::fs::create_dir_all(&dir)?;
                let config = dir.join("smoke.toml");
                std::fs::write(&config, SMOKE_CONFIG)?;
                let mut runs = Vec::new();
                for i in 0..2 {
                    let records = dir.join(format!("records-{i}.csv"));
                    let status = Command::new(exe)
                        .arg("simulate")
                        .arg(&config)
                        .arg("--records")
                        .arg(&records)
                        .arg("--quiet")
                        .status()?;
                    if !status.success() {
                        return Ok((false, format!("simulate exited with {status}")));
                    }
                    runs.push(std::fs::read(&records)?);
                }
                let _ = std::fs::remove_dir_all(&dir);
                runs
            }
            None => {
                let cfg = ExperimentConfig::from_toml(SMOKE_CONFIG)?;
                let mut runs = Vec::new();
                for _ in 0..2 {
                    let mut buf = Vec::new();
                    write_csv(&run_theorem1_experiment(&cfg)?.records, &mut buf)?;
                    runs.push(buf);
                }
                runs
            }
        };
        Ok((
            !runs[0].is_empty() && runs[0] == runs[1],
            format!("{} bytes per run", runs[0].len()),
        ))
    })
}

/// Runs every criterion in order.
pub fn run_all(exe: Option<&Path>) -> Vec<CriterionOutcome> {
    vec![
        prox_correctness(),
        solver_certification(),
        closed_form_check(),
        bound_coverage(),
        cone_membership(),
        augmented_identity(),
        proposition1(),
        proposition2(),
        gre_trend(),
        grouping_theorem(),
        grouping_remark(),
        source_pipeline(),
        determinism(exe),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_parse() {
        for text in [
            COVERAGE_CONFIG,
            NOISELESS_CONFIG,
            PROPOSITIONS_CONFIG,
            SMOKE_CONFIG,
        ] {
            ExperimentConfig::from_toml(text).unwrap();
        }
        load_grouping().unwrap();
    }

    #[test]
    fn hadamard_columns_are_orthonormal() {
        let x = hadamard(8).columns(1, 4).into_owned();
        let g = x.transpose() * &x / 8.0;
        assert!((g - DMatrix::identity(4, 4)).amax() < 1e-15);
    }
}
