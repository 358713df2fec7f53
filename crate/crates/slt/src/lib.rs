//! Strong-lottery-ticket toolkit for frozen random networks.
//!
//! Finds high-accuracy subnetworks inside randomly weighted, partially
//! frozen (pre-pruned + locked) networks via edge-popup score optimization,
//! serializes the result in a seed-reconstructible compressed form, and
//! empirically verifies the subset-sum approximation lemmas that underpin
//! ticket existence in frozen networks.

pub mod arch;
pub mod error;
pub mod freeze;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
pub mod data;
pub mod harness;
pub mod pack;
pub mod search;
pub mod ssa;
