mod support;

use balanced_news_core::bandit::importance_weighted_estimate;
use balanced_news_core::feed::slot_bounds;
use balanced_news_core::{
    allocate_slots, project_to_constraints, ConstraintConfig, Distribution, RewardSignal, TypeIndex,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn projection_matches_tv_grid_oracle_for_two_types() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let (q, lower, upper) = random_grid_case(&mut rng);
        let cfg = ConstraintConfig::new(lower.clone(), upper.clone()).unwrap();
        let dist = Distribution::new(q.clone()).unwrap();
        let projected = project_to_constraints(&dist, &cfg).unwrap();
        let oracle = tv_grid_projection(&q, &lower, &upper).expect("non-empty box");
        for g in 0..2 {
            assert!(
                (projected.probs()[g] - oracle[g]).abs() < 1e-9,
                "q={q:?} lower={lower:?} upper={upper:?}: got {:?}, oracle {oracle:?}",
                projected.probs()
            );
        }
    }
}

#[test]
fn projection_is_feasible_idempotent_and_identity_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..2_000 {
        let n = rng.gen_range(2..=6);
        let (cfg, witness) = random_constraints(&mut rng, n);
        let q = random_distribution(&mut rng, n);
        let p = project_to_constraints(&q, &cfg).unwrap();
        assert!(cfg.contains(p.probs()), "{:?} -> {:?} outside {cfg:?}", q.probs(), p.probs());
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert_eq!(project_to_constraints(&p, &cfg).unwrap(), p);
        assert_eq!(project_to_constraints(&witness, &cfg).unwrap(), witness);
    }
}

#[test]
fn rounding_matches_l1_oracle_on_the_grid() {
    for n in 2..=3 {
        for p in simplex_grid(n, 100) {
            let dist = Distribution::new(p.clone()).unwrap();
            for k in 1..=12 {
                let got = allocate_slots(&dist, k, None).unwrap().counts;
                let want = l1_rounding(&p, k, None).unwrap();
                assert_eq!(got, want, "p={p:?} K={k}");
            }
        }
    }
}

#[test]
fn constrained_rounding_matches_l1_oracle_for_two_types() {
    let bounds_grid = [(0.0, 1.0), (0.2, 0.8), (0.3, 0.5), (0.5, 0.5), (0.25, 0.75)];
    for p in simplex_grid(2, 100) {
        let dist = Distribution::new(p.clone()).unwrap();
        for &(lo, hi) in &bounds_grid {
            let cfg = ConstraintConfig::two_type(lo, hi).unwrap();
            for k in 1..=12 {
                let bounds = slot_bounds(&cfg, k);
                match l1_rounding(&p, k, Some(&bounds)) {
                    Some(want) => {
                        let got = allocate_slots(&dist, k, Some(&cfg)).unwrap().counts;
                        assert_eq!(got, want, "p={p:?} bounds=({lo},{hi}) K={k}");
                    }
                    None => assert!(allocate_slots(&dist, k, Some(&cfg)).is_err()),
                }
            }
        }
    }
}

#[test]
fn importance_weighted_estimate_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1_000 {
        let n = rng.gen_range(2..=6);
        let dist = random_positive_distribution(&mut rng, n);
        let rewards: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut expectation = vec![0.0; n];
        for (g, &r) in rewards.iter().enumerate() {
            let signal = RewardSignal {
                clicked_type: TypeIndex(g),
                value: r,
            };
            let estimate = importance_weighted_estimate(signal, &dist);
            for (e, x) in expectation.iter_mut().zip(&estimate) {
                *e += dist.probs()[g] * x;
            }
        }
        for (e, r) in expectation.iter().zip(&rewards) {
            assert!((e - r).abs() <= 1e-12, "{expectation:?} vs {rewards:?}");
        }
    }
}

#[test]
fn oracle_self_checks() {
    assert_eq!(compositions(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    assert_eq!(simplex_grid(3, 100).len(), 5151);
    assert_eq!(l1_rounding(&[0.5, 0.5], 3, None), Some(vec![2, 1]));
    assert_eq!(l1_rounding(&[0.95, 0.05], 10, Some(&[(2, 8), (2, 8)])), Some(vec![8, 2]));
    assert_eq!(tv_grid_projection(&[0.95, 0.05], &[0.2, 0.2], &[0.8, 0.8]), Some([0.8, 0.19999999999999996]));
}
