//! Brute-force reference implementations and random case generators.
//!
//! Also compiled into the `balanced-news` acceptance target.

#![allow(dead_code)]

use balanced_news_core::{ConstraintConfig, Distribution};
use rand::Rng;

/// Grid step of the two-type projection oracle.
pub const GRID_STEP: f64 = 1e-4;
const GRID_POINTS: u32 = 10_000;
const FEASIBILITY_SLACK: f64 = 1e-12;
const COST_TIE: f64 = 1e-9;

/// Total-variation-closest feasible point for two types, found by scanning
/// every grid point `(k/10000, 1 - k/10000)`. Returns `None` when no grid
/// point is feasible.
pub fn tv_grid_projection(q: &[f64], lower: &[f64], upper: &[f64]) -> Option<[f64; 2]> {
    assert_eq!(q.len(), 2);
    let mut best: Option<(f64, [f64; 2])> = None;
    for k in 0..=GRID_POINTS {
        let p0 = f64::from(k) / f64::from(GRID_POINTS);
        let p = [p0, 1.0 - p0];
        let feasible = (0..2).all(|g| {
            p[g] >= lower[g] - FEASIBILITY_SLACK && p[g] <= upper[g] + FEASIBILITY_SLACK
        });
        if !feasible {
            continue;
        }
        let tv = 0.5 * ((p[0] - q[0]).abs() + (p[1] - q[1]).abs());
        if best.is_none_or(|(b, _)| tv < b) {
            best = Some((tv, p));
        }
    }
    best.map(|(_, p)| p)
}

/// Every vector of `n` non-negative integers summing to `total`, in
/// lexicographically decreasing order.
pub fn compositions(total: usize, n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, n - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Integer vector summing to `page_size` closest in L1 to `p * page_size`,
/// optionally restricted to per-type `(min, max)` counts. Costs within
/// `1e-9` count as ties; among ties the lexicographically greatest vector
/// wins (extra slots go to lower type indices).
pub fn l1_rounding(p: &[f64], page_size: usize, bounds: Option<&[(usize, usize)]>) -> Option<Vec<usize>> {
    let targets: Vec<f64> = p.iter().map(|x| x * page_size as f64).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for c in compositions(page_size, p.len()) {
        if let Some(bounds) = bounds {
            if c.iter().zip(bounds).any(|(n, (lo, hi))| n < lo || n > hi) {
                continue;
            }
        }
        let cost: f64 = c.iter().zip(&targets).map(|(n, x)| (*n as f64 - x).abs()).sum();
        // Candidates arrive in decreasing lexicographic order, so only a
        // strictly cheaper one replaces the incumbent.
        if best.as_ref().is_none_or(|(b, _)| cost < b - COST_TIE) {
            best = Some((cost, c));
        }
    }
    best.map(|(_, c)| c)
}

/// All distributions over `n` types whose entries are multiples of `1/steps`.
pub fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    compositions(steps, n)
        .into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / steps as f64).collect())
        .collect()
}

/// Random distribution over `n` types; roughly one in five has an exact zero.
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Distribution {
    let mut raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    if rng.gen_bool(0.2) {
        let g = rng.gen_range(0..n);
        raw[g] = 0.0;
    }
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    Distribution::new(probs).expect("normalized")
}

/// Random strictly positive distribution over `n` types.
pub fn random_positive_distribution(rng: &mut impl Rng, n: usize) -> Distribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01f64..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Distribution::new(raw.iter().map(|x| x / total).collect()).expect("normalized")
}

/// Random non-empty constraint box together with a point inside it.
///
/// Bounds are built around the witness, so feasibility holds by
/// construction. Some cases pin a type (`lower == upper`) or leave it
/// unconstrained.
pub fn random_constraints(rng: &mut impl Rng, n: usize) -> (ConstraintConfig, Distribution) {
    let witness = random_distribution(rng, n);
    let x = witness.probs();
    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    for &xg in x {
        match rng.gen_range(0..10) {
            0 => {
                lower.push(xg);
                upper.push(xg);
            }
            1 => {
                lower.push(0.0);
                upper.push(1.0);
            }
            _ => {
                lower.push(xg * rng.gen::<f64>());
                upper.push(xg + (1.0 - xg) * rng.gen::<f64>());
            }
        }
    }
    let cfg = ConstraintConfig::new(lower, upper).expect("witness lies inside the box");
    (cfg, witness)
}

/// Random two-type case whose input and bounds all sit on the oracle grid.
pub fn random_grid_case(rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let pick = |rng: &mut dyn rand::RngCore| f64::from(rng.gen_range(0..=GRID_POINTS)) / f64::from(GRID_POINTS);
    loop {
        let q0 = pick(rng);
        let (mut l0, mut u0) = (pick(rng), pick(rng));
        let (mut l1, mut u1) = (pick(rng), pick(rng));
        if l0 > u0 {
            std::mem::swap(&mut l0, &mut u0);
        }
        if l1 > u1 {
            std::mem::swap(&mut l1, &mut u1);
        }
        // Keep the box non-empty: some p0 in [l0, u0] has 1 - p0 in [l1, u1].
        if l0.max(1.0 - u1) <= u0.min(1.0 - l1) {
            return (vec![q0, 1.0 - q0], vec![l0, l1], vec![u0, u1]);
        }
    }
}
