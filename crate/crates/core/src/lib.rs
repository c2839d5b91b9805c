//! Geometry-regularized autoencoders and uniform-speed geodesic curves on
//! learned data manifolds.
//!
//! The pipeline is staged:
//!
//! 1. sample (or load) a point cloud on a low-dimensional manifold ([`datasets`]),
//! 2. compute a local-tangent-space-alignment chart of it ([`ltsa`]),
//! 3. train an encoder/decoder pair that reproduces the data and is pulled
//!    towards that chart ([`autoencoder`], built on [`nn`]),
//! 4. fit a cubic latent curve between two encoded samples whose decoded image
//!    has constant speed, no tangential acceleration and minimal length
//!    ([`curve`], [`losses`]),
//! 5. score the result against closed-form geodesics ([`oracle`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line front end live in the companion `unigeo` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autoencoder;
pub mod curve;
pub mod datasets;
pub mod decoder;
mod error;
pub mod linalg;
pub mod losses;
pub mod ltsa;
pub mod nn;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::Matrix;
