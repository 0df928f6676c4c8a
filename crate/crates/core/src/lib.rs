//! Core library for the smoothrace testbed.
//!
//! The pieces fit together like this: [`track`] and [`env`] provide a
//! deterministic top-down racing simulator whose observations are camera
//! images rendered by [`render`]; [`augment`] perturbs those images for
//! robustness training and for the spatial smoothness regularizer; [`nn`] is
//! a small CPU autodiff stack for the policy and critic networks; [`sac`]
//! implements the soft actor-critic update with temporal and spatial action
//! smoothness penalties; [`replay`] handles multi-actor experience
//! collection with prioritized replay; [`runner`] drives training and
//! evaluation end to end; and [`smoothness`] computes the spectral
//! smoothness metrics used to evaluate trained policies.

pub mod augment;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod nn;
pub mod obs;
pub mod render;
pub mod replay;
pub mod rng;
pub mod runner;
pub mod sac;
pub mod smoothness;
pub mod track;

pub use error::{CoreError, Result};
