use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tenet::bounds::{bound_tenet, cone_contains, ConeSpec, DConvention, Ingredients};
use tenet::grouping::grouping_bound;
use tenet::model::{standardize, Dataset};
use tenet::oracle::full_oracle;
use tenet::solver::{fit, kkt_residual, objective, PenaltySpec, SolverOptions};

fn gaussian(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    (x, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oracle_and_solver_objectives_agree(
        seed in 0u64..10_000, p in 1usize..=3, big in any::<bool>(),
        lambda in 0.0f64..1.0, alpha in 0.0f64..=1.0, rho in 0.0f64..=1.0,
    ) {
        let n = if big { 20 } else { 5 };
        let (x, mut rng) = gaussian(seed, n, p);
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let tilde = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = Dataset::new(y, x).unwrap();
        let pen = PenaltySpec::coupled(lambda, alpha, rho, tilde).unwrap();
        let res = fit(&data, &pen, &SolverOptions::with_tol(1e-10)).unwrap();
        let reference = full_oracle(&data, &pen, seed).unwrap();
        let f = objective(&res.beta(), &data, &pen).unwrap();
        prop_assert!(reference.objective <= f + 1e-6);
        prop_assert!(f <= reference.objective + 1e-6);
        prop_assert!((res.beta() - &reference.beta).amax() < 1e-4);
    }

    #[test]
    fn noiseless_errors_are_in_the_cone(
        seed in 0u64..10_000, lambda in 0.05f64..1.0, alpha in 0.0f64..=1.0, rho in 0.3f64..=1.0,
        shift in 0.0f64..0.5,
    ) {
        let (x_raw, mut rng) = gaussian(seed, 80, 10);
        let x = standardize(&DVector::zeros(80), &x_raw).unwrap().0.x().clone();
        let beta_std = DVector::from_fn(10, |j, _| if j < 3 { 0.5 + 0.2 * j as f64 } else { 0.0 });
        let data = Dataset::new(&x * &beta_std, x).unwrap();
        let tilde = beta_std.map(|b| b + shift * rng.sample::<f64, _>(StandardNormal));
        let pen = PenaltySpec::coupled(lambda, alpha, rho, tilde.clone()).unwrap();
        let res = fit(&data, &pen, &SolverOptions::with_tol(1e-10)).unwrap();
        prop_assert!(res.converged);
        prop_assert!(kkt_residual(&res.beta(), &data, &pen).unwrap() <= 1e-9);
        // without noise any c > 0 works; use one the analysis covers
        let c = 0.5 * alpha * rho + 1e-3;
        let cone = ConeSpec::from_truth(alpha, rho, c, &beta_std, &tilde).unwrap();
        prop_assert!(cone_contains(&(res.beta() - &beta_std), &cone).unwrap());
    }

    #[test]
    fn stated_discriminant_never_exceeds_proof_one(
        lambda in 0.0f64..2.0, alpha in 0.0f64..=1.0, rho in 0.0f64..=1.0, c in 0.01f64..1.0,
        s in 0usize..20, delta_l1 in 0.0f64..5.0, delta_alpha in 0.0f64..5.0, phi in 0.01f64..3.0,
    ) {
        let ing = Ingredients {
            lambda, alpha, rho, c, s, delta_l1, delta_alpha_l2: delta_alpha, beta_star_l2: 0.0,
        };
        let stated = bound_tenet(&ing, phi, DConvention::AsStated).unwrap();
        let proof = bound_tenet(&ing, phi, DConvention::ProofConsistent).unwrap();
        prop_assert!(stated.d.unwrap() <= proof.d.unwrap() * (1.0 + 1e-12) + 1e-300);
        prop_assert!(stated.u <= proof.u * (1.0 + 1e-12));
        prop_assert!(stated.u.is_finite() && stated.u >= 0.0);
    }

    #[test]
    fn grouping_z_shrinks_with_lambda(seed in 0u64..10_000, lambda in 0.01f64..1.0, rho in 0.0f64..0.95) {
        let (x_raw, mut rng) = gaussian(seed, 40, 4);
        let y_raw = DVector::from_fn(40, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (data, _) = standardize(&y_raw, &x_raw).unwrap();
        let zeros = DVector::zeros(4);
        let z = |l: f64| {
            let pen = PenaltySpec::coupled(l, 1.0, rho, zeros.clone()).unwrap();
            grouping_bound(&data, &pen, &zeros, 0, 1).unwrap().z
        };
        prop_assert!(z(lambda * 1.5) <= z(lambda));
    }
}
