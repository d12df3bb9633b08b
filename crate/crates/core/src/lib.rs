//! Numerical laboratory for ahead-of-time execution auctions whose winner
//! resells the proposal right just in time.
//!
//! The crate computes, for a set of builders with known value distributions,
//! the expected period-2 payoffs under each possible owner, the resulting
//! willingness to pay in the period-1 auction, the equilibrium winner and
//! the proposal shares compared with a plain just-in-time auction.

pub mod cli;
pub mod distributions;
pub mod error;
pub mod game;
pub mod numerics;
pub mod resale;
pub mod verify;

pub use distributions::{Law, ValueDistribution};
pub use error::{Error, Result};
