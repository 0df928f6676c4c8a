//! Experience replay.
//!
//! Actors accumulate episode steps in a [`LocalBuffer`], which assembles
//! n-step transitions as soon as their reward window closes and hands them
//! over in batches. The shared [`GlobalBuffer`] is a fixed-capacity ring
//! with proportional prioritized sampling backed by a sum tree; new
//! transitions enter at the current maximum priority so they are seen at
//! least once before their TD error takes over.

mod buffer;
mod tree;

pub use buffer::{n_step_return, GlobalBuffer, LocalBuffer, SampleBatch, Transition};
pub use tree::{MaxTree, SumTree};
