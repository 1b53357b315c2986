//! DAG factorization machines for click-through-rate prediction, together
//! with explicit-interaction teachers (CIN, cross network), shallow baselines,
//! a knowledge-distillation pipeline, brute-force propagation oracles and
//! efficiency accounting.
//!
//! All models share one forward implementation per network, generic over a
//! [`numcore::Scalar`]: `f64` for training and inference, and an instrumented
//! type for exact FLOP counts. Backward passes are analytic and validated
//! against finite differences.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod distill;
mod error;
pub mod interactions;
pub mod metrics;
pub mod model;
pub mod network;
pub mod numcore;
pub mod oracle;
pub mod pipeline;
pub mod teachers;

pub use error::{Error, Result};
pub use model::{Model, ModelSpec, Teacher};
pub use network::Network;
