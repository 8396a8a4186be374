//! Recurrent asynchronous multimodal networks for monocular depth estimation
//! from simulated event streams and intensity frames.
//!
//! The crate is organised around a small reverse-mode autodiff tensor engine
//! ([`tensor`]) on top of which the network ([`model`]), the losses ([`loss`])
//! and the training loop ([`trainer`]) are built. Event streams are produced
//! by a contrast-threshold camera simulator ([`events`]) from synthetic
//! layered scenes ([`data`]) and converted to voxel-grid network inputs
//! ([`representation`]).

pub mod config;
pub mod data;
pub mod error;
pub mod events;
pub mod gradcheck;
pub mod io;
pub mod loss;
pub mod model;
pub mod representation;
pub mod scalar;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
