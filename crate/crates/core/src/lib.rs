//! Frame-level Monte-Carlo simulator of the Aloha-NOMA uplink random access
//! protocol.
//!
//! Active IoT devices superpose a known training word at equal power; the
//! gateway estimates how many are present with a sequence of Neyman-Pearson
//! boundary tests, aborts the frame when the count exceeds its SIC degree,
//! and otherwise lets devices pick power levels at random until the picks are
//! distinct (or the attempt budget runs out).
//!
//! - [`stats`]: Gaussian tail function, its inverse and seeded random streams
//! - [`channel`]: superposed training observation in white Gaussian noise
//! - [`detector`]: sequential multi-hypothesis active-count detector
//! - [`protocol`]: the five-phase gateway frame state machine
//! - [`simulation`]: binomial traffic, throughput estimation and sweeps
//! - [`cli`]: configuration handling and CSV producing commands

pub mod channel;
pub mod cli;
pub mod detector;
mod error;
pub mod protocol;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
