//! Instrumented arithmetic for exact operation counting.
//!
//! [`Counted`] wraps an `f64` and records every `+` and `*` in thread-local
//! counters. Running a model's forward pass with it gives the operation count
//! that the closed-form FLOP formulas must reproduce.

use std::cell::Cell;
use std::ops::{Add, Mul};

use crate::data::Instance;
use crate::error::Result;
use crate::model::{Model, ModelSpec};
use crate::numcore::{from_f64_vec, Scalar};

thread_local! {
    static MULTS: Cell<u64> = const { Cell::new(0) };
    static ADDS: Cell<u64> = const { Cell::new(0) };
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Counted(pub f64);

impl Add for Counted {
    type Output = Counted;

    #[inline]
    fn add(self, rhs: Counted) -> Counted {
        ADDS.with(|c| c.set(c.get() + 1));
        Counted(self.0 + rhs.0)
    }
}

impl Mul for Counted {
    type Output = Counted;

    #[allow(clippy::suspicious_arithmetic_impl)]
    #[inline]
    fn mul(self, rhs: Counted) -> Counted {
        MULTS.with(|c| c.set(c.get() + 1));
        Counted(self.0 * rhs.0)
    }
}

impl Scalar for Counted {
    fn from_f64(v: f64) -> Self {
        Counted(v)
    }

    fn to_f64(self) -> f64 {
        self.0
    }

    fn relu(self) -> Self {
        Counted(self.0.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub mults: u64,
    pub adds: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.mults + self.adds
    }
}

/// Run `f` and return its result with the operations it performed on
/// [`Counted`] values on this thread.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let before = (MULTS.with(Cell::get), ADDS.with(Cell::get));
    let out = f();
    let counts = OpCounts {
        mults: MULTS.with(Cell::get) - before.0,
        adds: ADDS.with(Cell::get) - before.1,
    };
    (out, counts)
}

/// Closed-form FLOPs of one single-instance forward pass (mult = 1, add = 1,
/// embedding lookup = 0).
pub fn count_flops(spec: &ModelSpec) -> Result<u64> {
    Ok(spec.build()?.flops())
}

/// Operations actually executed by one forward pass of `model` on `instance`.
pub fn instrumented_flops(model: &Model, instance: &Instance) -> Result<OpCounts> {
    let emb: Vec<Counted> = from_f64_vec(&model.embed(&instance.indices)?);
    let (_, counts) = count_ops(|| model.forward_scalar(&emb));
    Ok(counts)
}
