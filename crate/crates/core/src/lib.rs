//! Analytic theory and Monte Carlo validation of N-class slotted-Aloha
//! networks with Poisson sources, Rayleigh link distances and Rayleigh fading.
//!
//! The closed-form modules (`model`, `analytic`, `stability`, `optimize`) are
//! generic over [`Scalar`] (`f32` or `f64`); the simulator runs in `f64`.
//! Concrete `f64` aliases are exported at the crate root.

pub mod analytic;
pub mod error;
pub mod model;
pub mod optimize;
pub mod scalar;
pub mod simulate;
pub mod special;
pub mod stability;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TrafficClass = model::TrafficClass<f64>;
pub type NetworkConfig = model::NetworkConfig<f64>;
pub type DerivedConstants = model::DerivedConstants<f64>;
pub type StationaryMetrics = analytic::StationaryMetrics<f64>;
pub type SingleClassResult = analytic::SingleClassResult<f64>;
pub type DelayWeights = optimize::DelayWeights<f64>;
pub type PowerAllocation = optimize::PowerAllocation<f64>;
pub type RateEnvelope = optimize::RateEnvelope<f64>;

pub type TrafficClassF32 = model::TrafficClass<f32>;
pub type NetworkConfigF32 = model::NetworkConfig<f32>;
pub type StationaryMetricsF32 = analytic::StationaryMetrics<f32>;

pub use analytic::{multi_class_metrics, physical_identity_lhs, share_identity_residuals, single_class};
pub use model::{derive_constants, AnalysisMode};
pub use optimize::{max_d2d_rate, numeric_power_oracle, optimal_powers};
pub use stability::{check_permutation_region, check_region, dominant_sequence_check, feasibility_over_powers, StabilityVerdict};
