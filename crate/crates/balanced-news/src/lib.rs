//! Balanced news feeds on top of `balanced-news-core`: corpus ingestion,
//! dual-feed sessions with an append-only event log, the HTTP service and
//! the scenario simulator.

pub mod api;
pub mod ingestion;
pub mod service;
pub mod simulator;
pub mod session;
pub mod store;
