//! Slotted simulator of a fog network with clustering-driven proactive result
//! caching and matching-based task offloading.
//!
//! A run trains on a window of request history (clustering UNs and ranking
//! task popularity per cluster), then simulates slot by slot: arrivals, cache
//! hits, deferred-acceptance matching under a reliability budget, uplink and
//! compute queues. Two baselines share the engine: one without caching, one
//! that matches purely on link quality.

pub mod caching;
pub mod clustering;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod radio;
pub mod rng;

pub use config::{FadingModel, Scheme, ScenarioConfig, TrafficScope};
pub use engine::{run, Engine, RequestRecord, RunResult, RunStats};
pub use error::{Error, Result};
pub use metrics::{summarize, RunSummary};
