//! Channel deficiency between families of quantum states, and convergence
//! diagnostics for inhomogeneous quantum and classical Markov processes.

// `!(x >= 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod classical;
pub mod cli;
pub mod conic;
pub mod deficiency;
pub mod divergences;
pub mod error;
pub mod markov;
pub mod operators;
pub mod selftest;

pub use error::{Error, Result};
