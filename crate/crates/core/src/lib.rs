//! Estimation of the roughness parameter `H` of stochastic volatility from
//! uniformly sampled high-frequency log prices.
//!
//! The crate is organised bottom-up:
//!
//! * [`stats`]: spot variance, realized autocovariances `V̂`, and `Φ^H_ℓ`;
//! * [`simulate`]: a rough-volatility market simulator with latent paths;
//! * [`hurst`]: pilot, debiased and rate-optimal estimators plus the
//!   `H = 1/2` gate;
//! * [`asymptotics`]: covariance constants, variance estimators and
//!   confidence intervals;
//! * [`pipeline`]: the end-to-end estimate with inference attached.

pub mod asymptotics;
pub mod error;
pub mod hurst;
pub mod kernel;
pub mod pipeline;
pub mod quad;
pub mod simulate;
pub mod stats;

pub use error::{Error, ErrorKind, Result, Stage};
pub use hurst::{EstimationConfig, HurstEstimate};
pub use pipeline::{estimate_with_inference, PipelineOutput};
pub use simulate::{simulate_market, ModelParams, SimulatedMarket};
pub use stats::PriceSeries;
