//! Adaptive threshold from the "first significant jump" in sorted row norms.
//!
//! True support rows tend to have large, spread-out norms while spurious rows
//! cluster near zero. Sorting the norms ascending and stopping at the first
//! adjacent gap larger than `tau` separates the two groups; the value just
//! below the gap becomes the threshold.

use crate::model::RowNormVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpResult {
    /// Sorted value just below the first qualifying gap, or `+inf`.
    pub theta: f64,
    /// 1-based position `j` in the ascending sequence such that
    /// `t[j+1] - t[j] > tau`.
    pub jump_index: Option<usize>,
    pub found: bool,
}

impl JumpResult {
    fn none() -> Self {
        JumpResult {
            theta: f64::INFINITY,
            jump_index: None,
            found: false,
        }
    }
}

/// `tau = max_j t_j / n` for a sample count `n`; the adaptive driver picks
/// `n` through [`crate::multistage::TauNormalization`].
pub fn compute_tau(t: &RowNormVector, n: usize) -> f64 {
    assert!(n >= 1, "sample count must be positive");
    t.max() / n as f64
}

/// Scans the ascending sequence for the first gap strictly larger than `tau`.
///
/// Ties are ordered by original index. With fewer than two values, or no
/// qualifying gap, the result is `found = false` with `theta = +inf`, which
/// leaves every row penalized.
pub fn first_significant_jump(t: &RowNormVector, tau: f64) -> JumpResult {
    let mut sorted = t.values().to_vec();
    if sorted.len() < 2 {
        return JumpResult::none();
    }
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .position(|pair| pair[1] - pair[0] > tau)
        .map_or_else(JumpResult::none, |k| JumpResult {
            theta: sorted[k],
            jump_index: Some(k + 1),
            found: true,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norms(v: &[f64]) -> RowNormVector {
        RowNormVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tau_formula() {
        assert_eq!(compute_tau(&norms(&[0.0; 5]), 17), 0.0);
        assert_eq!(compute_tau(&norms(&[3.0, 30.0, 1.0]), 600), 0.05);
    }

    #[test]
    fn jump_found_in_unsorted_input() {
        let r = first_significant_jump(&norms(&[5.0, 0.0, 0.01, 0.0]), 0.5);
        assert!(r.found);
        assert_eq!(r.jump_index, Some(3));
        assert_eq!(r.theta, 0.01);
    }

    #[test]
    fn constant_sequence_has_no_jump() {
        let r = first_significant_jump(&norms(&[2.0; 4]), 0.1);
        assert!(!r.found);
        assert_eq!(r.jump_index, None);
        assert!(r.theta.is_infinite());
    }

    #[test]
    fn first_jump_wins_over_largest() {
        let r = first_significant_jump(&norms(&[0.0, 1.0, 2.0, 10.0]), 0.5);
        assert_eq!(r.jump_index, Some(1));
        assert_eq!(r.theta, 0.0);
    }

    #[test]
    fn gap_equal_to_tau_does_not_count() {
        let r = first_significant_jump(&norms(&[0.0, 0.5, 3.0]), 0.5);
        assert_eq!(r.jump_index, Some(2));
        assert_eq!(r.theta, 0.5);
    }

    #[test]
    fn short_inputs() {
        assert!(!first_significant_jump(&norms(&[]), 0.0).found);
        assert!(!first_significant_jump(&norms(&[4.0]), 0.0).found);
    }

    proptest! {
        #[test]
        fn scale_equivariance(v in prop::collection::vec(0.0f64..100.0, 2..40),
                              tau in 0.0f64..20.0, c in 0.01f64..100.0) {
            // powers of two keep the scaling exact
            let c = c.log2().round().exp2();
            let base = first_significant_jump(&norms(&v), tau);
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let r = first_significant_jump(&norms(&scaled), tau * c);
            prop_assert_eq!(r.jump_index, base.jump_index);
            prop_assert_eq!(r.theta, base.theta * c);
        }

        #[test]
        fn theta_is_an_element(v in prop::collection::vec(0.0f64..10.0, 0..30), tau in 0.0f64..3.0) {
            let r = first_significant_jump(&norms(&v), tau);
            prop_assert!(r.theta.is_infinite() || v.contains(&r.theta));
            prop_assert_eq!(r.found, r.jump_index.is_some());
        }

        #[test]
        fn smaller_tau_moves_jump_earlier(v in prop::collection::vec(0.0f64..10.0, 2..30),
                                          a in 0.0f64..3.0, b in 0.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let at_lo = first_significant_jump(&norms(&v), lo);
            let at_hi = first_significant_jump(&norms(&v), hi);
            if let Some(k) = at_hi.jump_index {
                prop_assert!(at_lo.jump_index.unwrap() <= k);
            }
        }

        #[test]
        fn zero_tau_gives_minimum(v in prop::collection::vec(0.0f64..10.0, 2..30)) {
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assume!(v.iter().any(|&x| x != min));
            prop_assert_eq!(first_significant_jump(&norms(&v), 0.0).theta, min);
        }
    }
}
