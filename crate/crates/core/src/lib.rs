//! Airborne pathogen transmission as a layered communication system:
//! emission, droplet channels (still-air cloud, windy-air plume and puff),
//! threshold reception, and a mobile-node epidemic network on top.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod emission;
pub mod error;
pub mod geom;
pub mod io;
pub mod mohanet;
pub mod plume;
pub mod reception;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
