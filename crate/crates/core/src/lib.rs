//! Successive passage times of Brownian motion through a straight line
//! `S(t) = a + b·t`, the excursion (last-zero) law that drives them, and the
//! reductions that carry the results over to time-changed and conjugated
//! diffusions.
//!
//! Everything analytic lives in [`linear_passage`] and [`successive`]; the
//! [`mc`] module is an independent Monte Carlo oracle used to cross-check
//! those laws.

pub mod cli;
pub mod error;
pub mod linear_passage;
pub mod mc;
pub mod numerics;
pub mod successive;
pub mod transforms;
pub mod verify;

pub use error::{Error, Result};
