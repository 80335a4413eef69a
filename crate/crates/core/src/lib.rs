//! Equation-free simulation of heterogeneous diffusion and neural surrogates
//! for the resulting coarse right-hand sides.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod equation_free;
pub mod error;
pub mod experiment;
pub mod features;
pub mod field;
pub mod homogenization;
pub mod learner;
pub mod linalg;
pub mod micro;
pub mod rollout;
pub mod spectral;
pub mod stencil;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/micro.md")]
    mod micro {}
    #[doc = include_str!("../../../book/src/homogenization.md")]
    mod homogenization {}
    #[doc = include_str!("../../../book/src/equation_free.md")]
    mod equation_free {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/rollout.md")]
    mod rollout {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
