//! Network-MIMO TDD cellular analysis: lattice geometry, pilot-contaminated
//! channel statistics, closed-form large-system rates, a finite-dimension
//! Monte Carlo oracle, per-bin scheme optimization and fairness scheduling.

pub mod asymptotic;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod optimizer;
pub mod scalar;
pub mod scheduler;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Layout64 = geometry::Layout<f64>;
pub type Scenario64 = channel::Scenario<f64>;
pub type SchemeConfig64 = asymptotic::SchemeConfig<f64>;
pub type Layout32 = geometry::Layout<f32>;
pub type Scenario32 = channel::Scenario<f32>;
pub type SchemeConfig32 = asymptotic::SchemeConfig<f32>;
