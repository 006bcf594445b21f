//! Absurd-world benchmark toolchain.
//!
//! A familiar game is split into symbol slots, actions and rules. Each
//! [`world::RulesetVariant`] fixes some of those slots to values that break
//! real-world convention while leaving the bookkeeping needed to solve the
//! task unchanged. The crate generates prompts for those variants with exact
//! ground truth, runs them against chat backends, and scores and analyzes the
//! resulting run journals.

pub mod analysis;
pub mod error;
pub mod fixtures;
pub mod generator;
pub mod harness;
pub mod oracle;
pub mod scoring;
pub mod seed;
pub mod world;

pub use error::{Error, Result};
