//! Minimax-optimal quantization of linear models under a budget of `B` bits
//! per dimension.
//!
//! The crate provides Parseval frames and the fast Walsh-Hadamard transform
//! ([`frames`]), democratic and near-democratic embeddings ([`embeddings`]),
//! scalar quantizers ([`quantizers`]), the four learning codes behind a
//! common trait and name registry ([`codes`]), closed-form risk bounds
//! ([`bounds`]), layer-wise quantization of two-layer ReLU networks ([`nn`])
//! and a seeded Monte-Carlo harness ([`simkit`]).

pub mod bounds;
pub mod codes;
pub mod embeddings;
pub mod error;
pub mod frames;
pub mod io;
pub mod linalg;
pub mod nn;
pub mod quantizers;
pub mod rng;
pub mod simkit;

pub use error::{Error, Result};
