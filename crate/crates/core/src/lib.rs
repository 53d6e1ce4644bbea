//! Core of the balanced news engine.
//!
//! Everything here is a pure function over plain values and builds without
//! `std` (an allocator is required):
//!
//! - [`bandit`]: exponential-weights learner over content types, with
//!   importance-weighted click updates.
//! - [`projection`]: proportional water-filling onto per-type box
//!   constraints.
//! - [`feed`]: slot allocation for a page of `K` articles and page
//!   composition from popularity-ranked pools.
//!
//! IO, persistence and the session loop live in the `balanced-news` crate.

#![no_std]

extern crate alloc;

pub mod bandit;
pub mod error;
pub mod feed;
pub mod projection;
pub mod types;

pub use bandit::{BanditParams, BanditState, Distribution, RewardSignal};
pub use error::Error;
pub use feed::{
    allocate_slots, compose_page, resolve_click, Article, FeedPage, Pools, SeenSet,
    SlotAllocation,
};
pub use projection::{project_to_constraints, ConstraintConfig};
pub use types::{TypeIndex, TypeLabels};

/// Tolerance on `Σp = 1` for a [`Distribution`].
pub const SUM_TOLERANCE: f64 = 1e-9;
