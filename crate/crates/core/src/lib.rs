//! Physics-informed solver for the 1D heat equation, run on a simulated
//! micro-ring weight-bank accelerator and trained with forward passes only.
//!
//! * [`pde`]: the benchmark, collocation sampling, stencil residuals and loss.
//! * [`hardware`]: ring transfer curves, converters, noise, tiled products.
//! * [`model`]: the 2-4-4-4-1 network mapped onto the bank.
//! * [`zo`]: zeroth-order gradient estimation, Adam, the training loop.
//! * [`eval`]: grid evaluation and l2 errors.
//! * [`config`] and [`runner`]: the experiment driver behind the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod eval;
pub mod hardware;
pub mod model;
pub mod pde;
pub mod rng;
pub mod runner;
pub mod zo;

pub use error::{Error, Result};
