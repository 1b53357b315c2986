//! Dense tensors, named parameter storage, the Adam optimizer and a
//! finite-difference gradient checker.
//!
//! Every model supplies its own analytic backward pass; `grad_check` is how
//! those passes are validated.

mod adam;
mod gradcheck;
mod params;
mod scalar;
mod tensor;

pub use adam::{adam_step, BETA1, BETA2, EPSILON};
pub use gradcheck::{grad_check, grad_check_sampled, GradCheckReport, REL_FLOOR};
pub use params::{AdamState, Grads, Param, ParamStore};
pub use scalar::{axpy, dot, dot_w, from_f64_vec, sum, to_f64_vec, vec_mat, Scalar};
pub use tensor::Tensor;
