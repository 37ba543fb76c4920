//! Adjustable-autonomy planning.
//!
//! An agent facing a decision can act on its own or hand control to other
//! entities (typically people) who may decide better but respond slowly.
//! This crate evaluates and optimizes such transfer-of-control strategies,
//! compiles problem instances into finite MDPs and solves them under hard
//! forbidding/requiring constraints.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is off.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod eu;
pub mod math;
pub mod mdp;
pub mod model;
pub mod rng;
pub mod search;
pub mod solver;
pub mod strategy;
pub mod synthetic;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
