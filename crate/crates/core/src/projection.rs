//! Projection of a type distribution onto per-type box constraints.
//!
//! The feasible set is `{p : lower[g] <= p[g] <= upper[g], Σp = 1}`. The
//! projection is proportional water-filling: groups that violate a bound
//! are clamped to it and the remaining mass is shared among the free groups
//! in proportion to their original probabilities, until nothing violates.
//! The fixed point has the form `p'[g] = clamp(λ p[g], lower[g], upper[g])`
//! for a single scale `λ`, and for two types it coincides with clamping the
//! first coordinate to its feasible interval.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bandit::Distribution;
use crate::error::Error;
use crate::SUM_TOLERANCE;

const POLYTOPE_TOLERANCE: f64 = 1e-12;

/// Lower and upper bounds on the probability mass of each type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConstraints")]
pub struct ConstraintConfig {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawConstraints {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawConstraints> for ConstraintConfig {
    type Error = Error;

    fn try_from(raw: RawConstraints) -> Result<Self, Self::Error> {
        Self::new(raw.lower, raw.upper)
    }
}

impl ConstraintConfig {
    /// Requires `0 <= lower[g] <= upper[g] <= 1` and `Σlower <= 1 <= Σupper`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, Error> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.len() < 2 {
            return Err(Error::TooFewTypes);
        }
        let in_range = |x: &f64| (0.0..=1.0).contains(x);
        let boxes_ok = lower
            .iter()
            .zip(&upper)
            .all(|(l, u)| in_range(l) && in_range(u) && l <= u);
        let low: f64 = lower.iter().sum();
        let high: f64 = upper.iter().sum();
        if !boxes_ok || low > 1.0 + POLYTOPE_TOLERANCE || high < 1.0 - POLYTOPE_TOLERANCE {
            return Err(Error::EmptyPolytope);
        }
        Ok(Self { lower, upper })
    }

    /// Bounds `[0, 1]` on every type; projection is the identity.
    pub fn unconstrained(num_types: usize) -> Self {
        Self {
            lower: vec![0.0; num_types],
            upper: vec![1.0; num_types],
        }
    }

    /// Two-type bounds from a range on the first type; the second type gets
    /// the complementary range `[1 - upper, 1 - lower]`.
    pub fn two_type(lower_first: f64, upper_first: f64) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&lower_first)
            || !(0.0..=1.0).contains(&upper_first)
            || lower_first > upper_first
        {
            return Err(Error::EmptyPolytope);
        }
        Self::new(
            vec![lower_first, 1.0 - upper_first],
            vec![upper_first, 1.0 - lower_first],
        )
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Whether `probs` satisfies every bound exactly and sums to one within
    /// [`SUM_TOLERANCE`].
    pub fn contains(&self, probs: &[f64]) -> bool {
        probs.len() == self.len()
            && probs
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(p, (l, u))| l <= p && p <= u)
            && (probs.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE
    }
}

/// Projects `dist` onto the constraint polytope of `cfg`.
///
/// Returns `dist` unchanged when it is already feasible. Each round fixes
/// at least one group, so the loop runs at most `N` rounds.
pub fn project_to_constraints(dist: &Distribution, cfg: &ConstraintConfig) -> Result<Distribution, Error> {
    if dist.len() != cfg.len() {
        return Err(Error::DimensionMismatch {
            expected: cfg.len(),
            got: dist.len(),
        });
    }
    if cfg.len() < 2 {
        return Err(Error::EmptyPolytope);
    }
    let original = dist.probs();
    if cfg.contains(original) {
        return Ok(dist.clone());
    }

    let n = original.len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut out = vec![0.0; n];
    loop {
        let fixed_mass: f64 = fixed.iter().flatten().sum();
        let residual = 1.0 - fixed_mass;
        let free: Vec<usize> = (0..n).filter(|&g| fixed[g].is_none()).collect();
        if free.is_empty() {
            break;
        }
        let free_mass: f64 = free.iter().map(|&g| original[g]).sum();
        // All free groups had zero probability: share the residual evenly.
        let share = |g: usize| {
            if free_mass > 0.0 {
                residual * original[g] / free_mass
            } else {
                residual / free.len() as f64
            }
        };

        let mut clamped_total = fixed_mass;
        let mut any_low = false;
        let mut any_high = false;
        for &g in &free {
            let q = share(g);
            out[g] = q;
            if q < cfg.lower[g] {
                any_low = true;
                clamped_total += cfg.lower[g];
            } else if q > cfg.upper[g] {
                any_high = true;
                clamped_total += cfg.upper[g];
            } else {
                clamped_total += q;
            }
        }
        if !any_low && !any_high {
            break;
        }

        // The clamped total is monotone in the common scale. Above one the
        // final scale is smaller, so every group now below its lower bound
        // stays there; below one, the upper violators stay clamped.
        let fix_low = clamped_total >= 1.0;
        let fix_high = clamped_total <= 1.0;
        for &g in &free {
            if fix_low && out[g] < cfg.lower[g] {
                fixed[g] = Some(cfg.lower[g]);
            } else if fix_high && out[g] > cfg.upper[g] {
                fixed[g] = Some(cfg.upper[g]);
            }
        }
    }
    for (g, value) in fixed.iter().enumerate() {
        if let Some(v) = value {
            out[g] = *v;
        }
    }
    Ok(Distribution::from_raw(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec::Vec;

    fn dist(p: &[f64]) -> Distribution {
        Distribution::new(p.to_vec()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn clamps_two_types_to_caps() {
        let cfg = ConstraintConfig::new(vec![0.2, 0.2], vec![0.8, 0.8]).unwrap();
        let out = project_to_constraints(&dist(&[0.95, 0.05]), &cfg).unwrap();
        assert_close(out.probs(), &[0.8, 0.2], 1e-15);
    }

    #[test]
    fn feasible_input_is_returned_exactly() {
        let cfg = ConstraintConfig::new(vec![0.2, 0.2], vec![0.8, 0.8]).unwrap();
        let d = dist(&[0.5, 0.5]);
        assert_eq!(project_to_constraints(&d, &cfg).unwrap(), d);
    }

    #[test]
    fn lower_bound_on_third_type_rescales_the_rest() {
        let cfg = ConstraintConfig::new(vec![0.0, 0.0, 0.25], vec![1.0, 1.0, 1.0]).unwrap();
        let out = project_to_constraints(&dist(&[0.7, 0.2, 0.1]), &cfg).unwrap();
        assert_close(out.probs(), &[0.75 * 0.7 / 0.9, 0.75 * 0.2 / 0.9, 0.25], 1e-15);
        assert_close(out.probs(), &[0.583_333, 0.166_667, 0.25], 1e-6);
    }

    #[test]
    fn mixed_violations_resolve_in_the_right_direction() {
        // Clamping both violators at once would give 0.9 + 0.3 > 1.
        let cfg = ConstraintConfig::new(vec![0.3, 0.3], vec![0.9, 0.9]).unwrap();
        let out = project_to_constraints(&dist(&[0.95, 0.05]), &cfg).unwrap();
        assert_close(out.probs(), &[0.7, 0.3], 1e-15);
    }

    #[test]
    fn zero_probability_groups_share_leftover_mass() {
        let cfg = ConstraintConfig::new(vec![0.0; 3], vec![0.5, 1.0, 1.0]).unwrap();
        let out = project_to_constraints(&dist(&[1.0, 0.0, 0.0]), &cfg).unwrap();
        assert_close(out.probs(), &[0.5, 0.25, 0.25], 1e-15);
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        let err = ConstraintConfig::new(vec![0.6, 0.6], vec![1.0, 1.0]).unwrap_err();
        assert_eq!(err.to_string(), "empty constraint polytope");
        assert!(ConstraintConfig::new(vec![0.0, 0.0], vec![0.4, 0.4]).is_err());
        assert!(ConstraintConfig::new(vec![0.5, 0.0], vec![0.4, 1.0]).is_err());
        assert!(ConstraintConfig::two_type(0.7, 0.3).is_err());
    }

    #[test]
    fn two_type_bounds_are_complementary() {
        let cfg = ConstraintConfig::two_type(0.2, 0.8).unwrap();
        assert_eq!(cfg.lower()[0], 0.2);
        assert_eq!(cfg.upper()[0], 0.8);
        assert!((cfg.lower()[1] - 0.2).abs() < 1e-15);
        assert!((cfg.upper()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pinned_constraints_give_the_pinned_point() {
        let cfg = ConstraintConfig::two_type(0.5, 0.5).unwrap();
        let out = project_to_constraints(&dist(&[0.9, 0.1]), &cfg).unwrap();
        assert_close(out.probs(), &[0.5, 0.5], 0.0);
    }

    use proptest::prelude::*;

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("degenerate", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-9).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    fn case() -> impl Strategy<Value = (Vec<f64>, ConstraintConfig)> {
        (2usize..6).prop_flat_map(|n| {
            (
                simplex(n),
                simplex(n),
                prop::collection::vec(0.0f64..1.0, n),
                0.0f64..1.0,
            )
                .prop_map(move |(p, anchor, spread, slack)| {
                    // Boxes around a feasible anchor point.
                    let lower: Vec<f64> = anchor.iter().zip(&spread).map(|(a, s)| a * (1.0 - s)).collect();
                    let upper: Vec<f64> = anchor
                        .iter()
                        .zip(&spread)
                        .map(|(a, s)| (a + (1.0 - a) * s * slack).min(1.0))
                        .collect();
                    (p, ConstraintConfig::new(lower, upper).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn output_is_feasible_and_idempotent((p, cfg) in case()) {
            let d = Distribution::new(p).unwrap();
            let once = project_to_constraints(&d, &cfg).unwrap();
            prop_assert!(cfg.contains(once.probs()), "{:?} {:?}", once, cfg);
            let twice = project_to_constraints(&once, &cfg).unwrap();
            for (a, b) in once.probs().iter().zip(twice.probs()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
