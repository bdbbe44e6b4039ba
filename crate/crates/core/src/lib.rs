//! Partially linear regression `y = X beta + f(t) + u` by wavelet-domain
//! penalized least squares.
//!
//! The l1 penalty on the wavelet coefficients of `f` turns the estimation of
//! `beta` into a Huber M-estimation problem on the detail coefficients.
//! `beta` is fitted first with a half-quadratic solver ([`robust`]), and `f`
//! is then recovered by soft thresholding the residual coefficients ([`plm`]).

// negated comparisons reject NaN parameters; filter taps keep every digit
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod backfit;
pub mod cli;
pub mod dwt;
pub mod error;
pub mod plm;
pub mod robust;
pub mod sim;
pub mod threshold;

pub use error::{PlmError, Result};
