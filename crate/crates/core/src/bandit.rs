//! Exponential-weights learner whose arms are content types.
//!
//! The learner keeps one positive weight per type. Its sampling
//! distribution mixes the normalized weights with a uniform exploration
//! term, and a click on a type multiplies that type's weight by
//! `exp(eta * r_hat / N)` where `r_hat` is the importance-weighted reward.
//! Weights are renormalized to sum to one after every update; the induced
//! distribution is invariant under positive rescaling.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::types::TypeIndex;
use crate::SUM_TOLERANCE;

/// Learning and exploration rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditParams {
    pub eta: f64,
    pub gamma: f64,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            gamma: 0.1,
        }
    }
}

impl BanditParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidLearningRate(self.eta));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidExploration(self.gamma));
        }
        Ok(())
    }
}

/// A probability vector over content types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Checks that every entry lies in `[0, 1]` and the entries sum to one
    /// within [`SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self, Error> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no entries"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidDistribution("entry outside [0, 1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution("entries do not sum to 1"));
        }
        Ok(Self { probs })
    }

    /// Wraps a vector the caller has already shown to be a distribution.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!(Self::new(probs.clone()).is_ok(), "{probs:?}");
        Self { probs }
    }

    pub fn uniform(num_types: usize) -> Self {
        Self {
            probs: vec![1.0 / num_types as f64; num_types],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, index: TypeIndex) -> Option<f64> {
        self.probs.get(index.0).copied()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

/// A click on an article of `clicked_type`. Articles that were shown but
/// not clicked receive reward zero implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSignal {
    pub clicked_type: TypeIndex,
    pub value: f64,
}

impl RewardSignal {
    pub fn click(clicked_type: TypeIndex) -> Self {
        Self {
            clicked_type,
            value: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    weights: Vec<f64>,
    eta: f64,
    gamma: f64,
    t: u64,
}

impl BanditState {
    /// Uniform weights, iteration zero.
    pub fn init(num_types: usize, params: BanditParams) -> Result<Self, Error> {
        if num_types < 2 {
            return Err(Error::TooFewTypes);
        }
        params.validate()?;
        Ok(Self {
            weights: vec![1.0 / num_types as f64; num_types],
            eta: params.eta,
            gamma: params.gamma,
            t: 0,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_types(&self) -> usize {
        self.weights.len()
    }

    pub fn params(&self) -> BanditParams {
        BanditParams {
            eta: self.eta,
            gamma: self.gamma,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// `(1 - gamma) * w / Σw + gamma / N`.
    pub fn base_distribution(&self) -> Distribution {
        Distribution::from_raw(mixture(&self.weights, self.gamma))
    }

    /// Importance-weighted exponential update.
    ///
    /// `sampling_dist` must be the distribution the clicked page was built
    /// from: the projected one for a constrained feed.
    pub fn update(&self, signal: RewardSignal, sampling_dist: &Distribution) -> Result<Self, Error> {
        let n = self.weights.len();
        if sampling_dist.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sampling_dist.len(),
            });
        }
        let clicked = signal.clicked_type.get();
        if clicked >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: clicked + 1,
            });
        }
        let shown_with = sampling_dist.probs()[clicked];
        if shown_with <= 0.0 {
            return Err(Error::ZeroProbabilityClick);
        }
        if signal.value == 0.0 {
            return Ok(self.no_click_step());
        }

        let estimate = importance_weighted_estimate(signal, sampling_dist);
        let mut weights: Vec<f64> = self
            .weights
            .iter()
            .zip(&estimate)
            .map(|(w, r)| w * libm::exp(self.eta * r / n as f64))
            .collect();
        normalize(&mut weights);
        Ok(Self {
            weights,
            t: self.t + 1,
            ..*self
        })
    }

    /// An iteration without a click: weights untouched, counter advanced.
    pub fn no_click_step(&self) -> Self {
        Self {
            weights: self.weights.clone(),
            t: self.t + 1,
            ..*self
        }
    }
}

/// `r_hat[g] = value / p[g]` for the clicked type, zero elsewhere.
///
/// Its expectation under `p` (summing over which type was shown) equals the
/// true reward vector.
pub fn importance_weighted_estimate(signal: RewardSignal, sampling_dist: &Distribution) -> Vec<f64> {
    let mut estimate = vec![0.0; sampling_dist.len()];
    let g = signal.clicked_type.get();
    estimate[g] = signal.value / sampling_dist.probs()[g];
    estimate
}

pub(crate) fn mixture(weights: &[f64], gamma: f64) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let uniform = gamma / weights.len() as f64;
    weights
        .iter()
        .map(|w| (1.0 - gamma) * w / total + uniform)
        .collect()
}

fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn state(weights: &[f64], eta: f64, gamma: f64) -> BanditState {
        BanditState {
            weights: weights.to_vec(),
            eta,
            gamma,
            t: 0,
        }
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn init_is_uniform() {
        let s = BanditState::init(2, BanditParams::default()).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.5]);
        assert_eq!(s.t(), 0);
        let s = BanditState::init(3, BanditParams::default()).unwrap();
        assert_close(s.weights(), &[1.0 / 3.0; 3], 0.0);
    }

    #[test]
    fn init_rejects_bad_input() {
        let p = BanditParams::default();
        let err = BanditState::init(1, p).unwrap_err();
        assert_eq!(err.to_string(), "need at least two types");
        assert!(matches!(
            BanditState::init(2, BanditParams { eta: 0.0, gamma: 0.1 }),
            Err(Error::InvalidLearningRate(_))
        ));
        assert!(matches!(
            BanditState::init(2, BanditParams { eta: 0.5, gamma: 1.0 }),
            Err(Error::InvalidExploration(_))
        ));
        assert!(matches!(
            BanditState::init(2, BanditParams { eta: 0.5, gamma: -0.1 }),
            Err(Error::InvalidExploration(_))
        ));
    }

    #[test]
    fn base_distribution_examples() {
        assert_close(state(&[0.5, 0.5], 0.5, 0.1).base_distribution().probs(), &[0.5, 0.5], 1e-15);
        assert_close(state(&[0.8, 0.2], 0.5, 0.0).base_distribution().probs(), &[0.8, 0.2], 1e-15);
        // 0.9 * 0.8 + 0.05, 0.9 * 0.2 + 0.05
        assert_close(state(&[0.8, 0.2], 0.5, 0.1).base_distribution().probs(), &[0.77, 0.23], 1e-12);
    }

    #[test]
    fn click_update_example() {
        let s = state(&[0.5, 0.5], 0.5, 0.1);
        let dist = Distribution::new(vec![0.5, 0.5]).unwrap();
        let next = s.update(RewardSignal::click(TypeIndex(0)), &dist).unwrap();
        // exp(0.5 * 2 / 2) = e^0.5; normalize (0.5 e^0.5, 0.5)
        let e = 0.5f64.exp();
        assert_close(next.weights(), &[e / (e + 1.0), 1.0 / (e + 1.0)], 1e-15);
        assert_close(next.weights(), &[0.6225, 0.3775], 5e-5);
        assert_eq!(next.t(), 1);
    }

    #[test]
    fn zero_reward_is_identity_on_weights() {
        let s = state(&[0.7, 0.3], 0.5, 0.1);
        let dist = s.base_distribution();
        let signal = RewardSignal {
            clicked_type: TypeIndex(1),
            value: 0.0,
        };
        let next = s.update(signal, &dist).unwrap();
        assert_eq!(next.weights(), s.weights());
        assert_eq!(next.t(), 1);
    }

    #[test]
    fn zero_probability_click_is_rejected() {
        let s = state(&[0.5, 0.5], 0.5, 0.1);
        let dist = Distribution::new(vec![1.0, 0.0]).unwrap();
        let err = s.update(RewardSignal::click(TypeIndex(1)), &dist).unwrap_err();
        assert_eq!(err.to_string(), "clicked type had zero display probability");
    }

    #[test]
    fn no_click_step_examples() {
        let mut s = state(&[0.7, 0.3], 0.5, 0.1);
        s.t = 4;
        let next = s.no_click_step();
        assert_eq!(next.weights(), &[0.7, 0.3]);
        assert_eq!(next.t(), 5);
        assert_eq!(next.base_distribution(), s.base_distribution());
        assert_eq!(state(&[0.5, 0.5], 0.5, 0.1).no_click_step().t(), 1);
    }

    #[test]
    fn minority_click_raises_its_weight_ratio() {
        let s = state(&[0.9, 0.1], 0.5, 0.1);
        let next = s
            .update(RewardSignal::click(TypeIndex(1)), &s.base_distribution())
            .unwrap();
        assert!(next.weights()[1] / next.weights()[0] > 0.1 / 0.9);
    }

    fn weights_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6f64..1.0, 2..6).prop_map(|mut w| {
            normalize(&mut w);
            w
        })
    }

    proptest! {
        #[test]
        fn click_moves_base_distribution_towards_clicked_type(
            weights in weights_strategy(),
            pick in 0usize..6,
            eta in 0.01f64..2.0,
            gamma in 0.0f64..0.9,
        ) {
            let s = state(&weights, eta, gamma);
            let g = pick % weights.len();
            let before = s.base_distribution();
            let next = s.update(RewardSignal::click(TypeIndex(g)), &before).unwrap();
            let after = next.base_distribution();
            for h in 0..weights.len() {
                if h == g {
                    prop_assert!(after.probs()[h] > before.probs()[h]);
                } else {
                    prop_assert!(after.probs()[h] < before.probs()[h]);
                }
            }
            let sum: f64 = next.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(next.weights().iter().all(|w| *w > 0.0 && w.is_finite()));
        }

        #[test]
        fn renormalization_does_not_change_distribution(
            weights in weights_strategy(),
            pick in 0usize..6,
            gamma in 0.0f64..0.9,
        ) {
            let s = state(&weights, 0.5, gamma);
            let g = pick % weights.len();
            let dist = s.base_distribution();
            let next = s.update(RewardSignal::click(TypeIndex(g)), &dist).unwrap();
            let n = weights.len() as f64;
            let raw: Vec<f64> = weights
                .iter()
                .enumerate()
                .map(|(h, w)| if h == g { w * libm::exp(0.5 / dist.probs()[g] / n) } else { *w })
                .collect();
            let unnormalized = mixture(&raw, gamma);
            for (a, b) in next.base_distribution().probs().iter().zip(&unnormalized) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
