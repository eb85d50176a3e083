use crate::error::{Error, Result};

#[inline]
fn sign_left(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn sign_right(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Subdifferential `[lo, hi]` of `g(b) = q/2 b^2 - z b + a|b| + c|b - t|` at `b`.
pub fn two_kink_subdifferential(q: f64, z: f64, a: f64, c: f64, t: f64, b: f64) -> (f64, f64) {
    let smooth = q * b - z;
    (
        smooth + a * sign_left(b) + c * sign_left(b - t),
        smooth + a * sign_right(b) + c * sign_right(b - t),
    )
}

/// Exact minimizer of `g(b) = q/2 b^2 - z b + a|b| + c|b - t|` for `q > 0`.
///
/// `g` is strictly convex with kinks at `0` and `t`, so its subdifferential is
/// monotone: walk the breakpoints left to right and stop at the first piece
/// whose subdifferential reaches zero.
pub fn two_kink_prox(q: f64, z: f64, a: f64, c: f64, t: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::NonpositiveCurvature(q));
    }
    let (lo, hi) = if t < 0.0 { (t, 0.0) } else { (0.0, t) };

    let (lo_minus, lo_plus) = two_kink_subdifferential(q, z, a, c, t, lo);
    if lo_minus > 0.0 {
        return Ok(((z + a + c) / q).min(lo));
    }
    if lo_plus >= 0.0 {
        return Ok(lo);
    }
    if lo < hi {
        let (hi_minus, hi_plus) = two_kink_subdifferential(q, z, a, c, t, hi);
        if hi_minus > 0.0 {
            // between the kinks: b has the sign of t and b - t the opposite one
            let b = if t > 0.0 {
                (z - a + c) / q
            } else {
                (z + a - c) / q
            };
            return Ok(b.clamp(lo, hi));
        }
        if hi_plus >= 0.0 {
            return Ok(hi);
        }
    }
    Ok(((z - a - c) / q).max(hi))
}

/// `sign(z) * max(|z| - a, 0)`.
pub fn soft_threshold(z: f64, a: f64) -> f64 {
    if z > a {
        z - a
    } else if z < -a {
        z + a
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(q: f64, z: f64, a: f64, c: f64, t: f64, b: f64) -> f64 {
        0.5 * q * b * b - z * b + a * b.abs() + c * (b - t).abs()
    }

    #[test]
    fn unpenalized_and_lasso_examples() {
        assert_eq!(two_kink_prox(1.0, 0.7, 0.0, 0.0, 3.0).unwrap(), 0.7);
        assert!((two_kink_prox(1.0, 0.7, 0.5, 0.0, -2.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn two_kink_example_against_grid() {
        // g(b) = b^2/2 - 0.9b + 0.3|b| + 0.3|b - 1|
        let got = two_kink_prox(1.0, 0.9, 0.3, 0.3, 1.0).unwrap();
        // On (0, 1) the stationarity condition is b - 0.9 + 0.3 - 0.3 = 0.
        assert!((got - 0.9).abs() < 1e-15);
        let mut best = (f64::INFINITY, 0.0);
        let mut b = -5.0;
        while b <= 5.0 {
            let v = objective(1.0, 0.9, 0.3, 0.3, 1.0, b);
            if v < best.0 {
                best = (v, b);
            }
            b += 1e-5;
        }
        assert!((best.1 - got).abs() < 2e-5);
    }

    #[test]
    fn lands_exactly_on_kinks() {
        assert_eq!(two_kink_prox(1.0, 0.2, 0.5, 0.1, 2.0).unwrap(), 0.0);
        assert_eq!(two_kink_prox(2.0, 3.0, 0.1, 5.0, 1.0).unwrap(), 1.0);
        assert_eq!(two_kink_prox(2.0, -3.0, 0.1, 5.0, -1.0).unwrap(), -1.0);
    }

    #[test]
    fn rejects_nonpositive_curvature() {
        assert!(matches!(
            two_kink_prox(0.0, 1.0, 0.0, 0.0, 0.0),
            Err(Error::NonpositiveCurvature(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20_000))]

        #[test]
        fn zero_in_subdifferential(
            q in 1e-3f64..10.0, z in -10f64..10.0, a in 0f64..5.0, c in 0f64..5.0, t in -5f64..5.0,
        ) {
            let b = two_kink_prox(q, z, a, c, t).unwrap();
            let (lo, hi) = two_kink_subdifferential(q, z, a, c, t, b);
            let slack = 1e-12 * (1.0 + z.abs() + a + c + (q * b).abs());
            prop_assert!(lo <= slack && hi >= -slack, "b={b} lo={lo} hi={hi}");
        }

        #[test]
        fn reduces_to_soft_threshold(q in 1e-3f64..10.0, z in -10f64..10.0, a in 0f64..5.0, t in -5f64..5.0) {
            let b = two_kink_prox(q, z, a, 0.0, t).unwrap();
            prop_assert!((b - soft_threshold(z, a) / q).abs() <= 1e-12 * (1.0 + b.abs()));
        }

        #[test]
        fn no_neighbor_is_better(
            q in 0.1f64..10.0, z in -10f64..10.0, a in 0f64..5.0, c in 0f64..5.0, t in -5f64..5.0,
        ) {
            let b = two_kink_prox(q, z, a, c, t).unwrap();
            let g = objective(q, z, a, c, t, b);
            for h in [1e-3, -1e-3, 1e-1, -1e-1] {
                prop_assert!(objective(q, z, a, c, t, b + h) >= g - 1e-12);
            }
        }
    }
}
