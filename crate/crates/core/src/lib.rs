//! Scoring RNA 3D structural models with a physics-aware multiplex graph
//! neural network.
//!
//! The pipeline runs from atomic coordinates ([`geom`]) to two-plex graphs
//! ([`graph`]), through the network ([`model`]) built on a small autodiff
//! engine ([`tensor`]), to training ([`train`]) and decoy ranking ([`eval`]).

pub mod cli;
pub mod error;
pub mod eval;
pub mod geom;
pub mod graph;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
