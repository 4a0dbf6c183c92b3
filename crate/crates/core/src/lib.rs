//! Joint cache placement and similarity-based delivery for multi-hop caching
//! networks.
//!
//! A request for a content travels along a fixed path toward a source and may
//! be answered with a *similar* content found in a cache on the way, paying a
//! dissimilarity penalty instead of extra delay. Placement `X` and delivery `Q`
//! are relaxed to `[0, 1]`, the availability constraints are dualised, and the
//! resulting min-max problem is solved by alternating projected gradient
//! descent/ascent ([`hibsa`]) offline, or from Poisson request observations
//! ([`online`]). Greedy rounding turns the relaxed iterates into integer
//! decisions.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod baselines;
pub mod cost;
pub mod error;
pub mod exact;
pub mod gradients;
pub mod hibsa;
pub mod model;
pub mod online;
pub mod projection;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Scenario64 = model::Scenario<f64>;
pub type Scenario32 = model::Scenario<f32>;
pub type PrimalState64 = cost::PrimalState<f64>;
pub type DualState64 = cost::DualState<f64>;
pub type SolverConfig64 = hibsa::SolverConfig<f64>;
pub type OfflineSolution64 = hibsa::OfflineSolution<f64>;
pub type OnlineConfig64 = online::OnlineConfig<f64>;
pub type PerCacheConfig64 = baselines::PerCacheConfig<f64>;
