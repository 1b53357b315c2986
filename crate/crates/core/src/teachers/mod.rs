//! Explicit-interaction teachers (CIN, cross network) and shallow baselines.

pub mod baselines;
pub mod cin;
pub mod crossnet;

pub use baselines::{Pairwise, PairwiseKind, PairwiseSpec, TinyMlp, TinyMlpSpec, TINY_MLP_HIDDEN};
pub use cin::{Cin, CinSpec, DEFAULT_CIN_LAYER_SIZE};
pub use crossnet::{CrossNet, CrossNetSpec};

/// Default teacher depth.
pub const DEFAULT_DEPTH: usize = 3;
