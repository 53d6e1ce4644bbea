//! From a type distribution to a concrete page of `K` articles.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{Distribution, RewardSignal};
use crate::error::Error;
use crate::projection::ConstraintConfig;
use crate::types::TypeIndex;

/// Remainders closer than this are treated as tied.
const TIE_TOLERANCE: f64 = 1e-9;
/// Slack when turning real bounds into integer slot bounds, so that e.g.
/// `0.57 * 100` still floors to 57.
const BOUND_SLACK: f64 = 1e-9;

/// Article ids already shown on one feed.
pub type SeenSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub url: String,
    pub source_domain: String,
    pub type_index: TypeIndex,
    /// Popularity score, higher is more popular.
    pub rating: f64,
    /// Seconds since the Unix epoch.
    pub published_at: i64,
}

/// Popularity-ranked articles, one list per type.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pools {
    by_type: Vec<Vec<Article>>,
}

impl Pools {
    /// Partitions `articles` by type and sorts each pool by rating
    /// descending, then publication time descending, then id ascending.
    /// Articles whose type index is out of range are dropped.
    pub fn from_articles(num_types: usize, articles: impl IntoIterator<Item = Article>) -> Self {
        let mut by_type = vec![Vec::new(); num_types];
        for article in articles {
            if let Some(pool) = by_type.get_mut(article.type_index.get()) {
                pool.push(article);
            }
        }
        for pool in &mut by_type {
            pool.sort_by(popularity_order);
        }
        Self { by_type }
    }

    pub fn num_types(&self) -> usize {
        self.by_type.len()
    }

    pub fn pool(&self, index: TypeIndex) -> &[Article] {
        self.by_type.get(index.get()).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Article]> {
        self.by_type.iter().map(Vec::as_slice)
    }

    pub fn total_len(&self) -> usize {
        self.by_type.iter().map(Vec::len).sum()
    }
}

/// Total order used for pools: rating desc, published_at desc, id asc.
pub fn popularity_order(a: &Article, b: &Article) -> Ordering {
    b.rating
        .total_cmp(&a.rating)
        .then_with(|| b.published_at.cmp(&a.published_at))
        .then_with(|| a.id.cmp(&b.id))
}

/// Integer slot counts per type for one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAllocation {
    pub counts: Vec<usize>,
    pub page_size: usize,
}

/// Integer slot bounds `[ceil(lower K), floor(upper K)]` per type.
pub fn slot_bounds(cfg: &ConstraintConfig, page_size: usize) -> Vec<(usize, usize)> {
    let k = page_size as f64;
    cfg.lower()
        .iter()
        .zip(cfg.upper())
        .map(|(l, u)| {
            let lo = libm::ceil(l * k - BOUND_SLACK).max(0.0) as usize;
            let hi = (libm::floor(u * k + BOUND_SLACK) as usize).min(page_size);
            (lo, hi)
        })
        .collect()
}

/// Rounds `dist * page_size` to integer counts and, when `cfg` is given,
/// repairs the counts into the per-page integer bounds.
///
/// Rounding is largest-remainder: floors first, then one extra slot each to
/// the largest fractional remainders, ties to the lowest type index. Repair
/// moves one slot at a time from the type furthest over its cap to the type
/// furthest under its floor (ties to the lowest index). When only one side
/// violates, the other end of the move is the type whose count is furthest
/// from its fractional target in the needed direction.
pub fn allocate_slots(
    dist: &Distribution,
    page_size: usize,
    cfg: Option<&ConstraintConfig>,
) -> Result<SlotAllocation, Error> {
    if page_size == 0 {
        return Err(Error::EmptyPage);
    }
    let targets: Vec<f64> = dist.probs().iter().map(|p| p * page_size as f64).collect();
    let mut counts = largest_remainder(&targets, page_size);

    if let Some(cfg) = cfg {
        if cfg.len() != dist.len() {
            return Err(Error::DimensionMismatch {
                expected: dist.len(),
                got: cfg.len(),
            });
        }
        let bounds = slot_bounds(cfg, page_size);
        let min_total: usize = bounds.iter().map(|b| b.0).sum();
        let max_total: usize = bounds.iter().map(|b| b.1).sum();
        if bounds.iter().any(|(lo, hi)| lo > hi) || min_total > page_size || max_total < page_size {
            return Err(Error::UnsatisfiableAtPageSize { page_size });
        }
        repair(&mut counts, &targets, &bounds);
    }
    Ok(SlotAllocation { counts, page_size })
}

fn largest_remainder(targets: &[f64], page_size: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = targets.iter().map(|x| libm::floor(*x).max(0.0) as usize).collect();
    let remainders: Vec<f64> = targets.iter().zip(&counts).map(|(x, c)| x - *c as f64).collect();
    let assigned: usize = counts.iter().sum();
    let mut extra = page_size.saturating_sub(assigned);
    let mut given = vec![false; targets.len()];
    while extra > 0 {
        if given.iter().all(|g| *g) {
            given.iter_mut().for_each(|g| *g = false);
        }
        let best = argmax_by(targets.len(), |g| (!given[g]).then_some(remainders[g]));
        if let Some(g) = best {
            counts[g] += 1;
            given[g] = true;
        }
        extra -= 1;
    }
    // Only reachable when the distribution sums slightly above one.
    while counts.iter().sum::<usize>() > page_size {
        let g = argmax_by(counts.len(), |g| (counts[g] > 0).then(|| counts[g] as f64 - targets[g]))
            .expect("a positive count exists");
        counts[g] -= 1;
    }
    counts
}

fn repair(counts: &mut [usize], targets: &[f64], bounds: &[(usize, usize)]) {
    loop {
        let over = argmax_by(counts.len(), |g| {
            (counts[g] > bounds[g].1).then(|| (counts[g] - bounds[g].1) as f64)
        });
        let under = argmax_by(counts.len(), |g| {
            (counts[g] < bounds[g].0).then(|| (bounds[g].0 - counts[g]) as f64)
        });
        let (from, to) = match (over, under) {
            (None, None) => return,
            (Some(from), Some(to)) => (from, to),
            (Some(from), None) => {
                let to = argmax_by(counts.len(), |g| {
                    (counts[g] < bounds[g].1).then(|| targets[g] - counts[g] as f64)
                });
                (from, to.expect("total capacity covers the page"))
            }
            (None, Some(to)) => {
                let from = argmax_by(counts.len(), |g| {
                    (counts[g] > bounds[g].0).then(|| counts[g] as f64 - targets[g])
                });
                (from.expect("total floor fits in the page"), to)
            }
        };
        counts[from] -= 1;
        counts[to] += 1;
    }
}

/// Index with the largest key; keys within [`TIE_TOLERANCE`] of the
/// current best do not displace it, so ties go to the lowest index.
fn argmax_by(len: usize, key: impl Fn(usize) -> Option<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for g in 0..len {
        if let Some(k) = key(g) {
            match best {
                Some((_, b)) if k <= b + TIE_TOLERANCE => {}
                _ => best = Some((g, k)),
            }
        }
    }
    best.map(|(g, _)| g)
}

/// One iteration's page for one feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedPage {
    pub iteration: u64,
    pub slots: Vec<Article>,
    pub allocation: SlotAllocation,
    /// The continuous distribution the allocation came from; click updates
    /// importance-weight against it.
    pub sampling_dist: Distribution,
}

impl FeedPage {
    pub fn count_of(&self, index: TypeIndex) -> usize {
        self.slots.iter().filter(|a| a.type_index == index).count()
    }

    /// Share of slots holding articles of `index`.
    pub fn fraction_of(&self, index: TypeIndex) -> f64 {
        self.count_of(index) as f64 / self.allocation.page_size as f64
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|a| a.id.as_str())
    }
}

/// Fills a page: for each type the `counts[g]` most popular articles not
/// yet in `seen`, then a shuffle keyed by `(seed, iteration)`. Selected ids
/// are added to `seen`. On error `seen` is left untouched.
pub fn compose_page(
    alloc: &SlotAllocation,
    pools: &Pools,
    seen: &mut SeenSet,
    iteration: u64,
    sampling_dist: &Distribution,
    seed: u64,
) -> Result<FeedPage, Error> {
    if alloc.counts.len() != pools.num_types() {
        return Err(Error::DimensionMismatch {
            expected: pools.num_types(),
            got: alloc.counts.len(),
        });
    }
    let mut slots = Vec::with_capacity(alloc.page_size);
    for (g, &count) in alloc.counts.iter().enumerate() {
        let type_index = TypeIndex(g);
        let picked: Vec<&Article> = pools
            .pool(type_index)
            .iter()
            .filter(|a| !seen.contains(&a.id))
            .take(count)
            .collect();
        if picked.len() < count {
            return Err(Error::PoolExhausted {
                type_index,
                shortfall: count - picked.len(),
            });
        }
        slots.extend(picked.into_iter().cloned());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    slots.shuffle(&mut rng);

    seen.extend(slots.iter().map(|a| a.id.clone()));
    Ok(FeedPage {
        iteration,
        slots,
        allocation: alloc.clone(),
        sampling_dist: sampling_dist.clone(),
    })
}

/// A click on `article_id` rewards that article's type with 1.
pub fn resolve_click(page: &FeedPage, article_id: &str) -> Result<RewardSignal, Error> {
    page.slots
        .iter()
        .find(|a| a.id == article_id)
        .map(|a| RewardSignal::click(a.type_index))
        .ok_or_else(|| Error::UnknownArticle(article_id.into()))
}
