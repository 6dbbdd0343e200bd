//! Permutation-invariant sensory layers built from context-sensitive
//! two-point units, a point-neuron attention baseline, a cart-pole
//! swing-up environment and an evolution-strategies trainer.

pub mod envs;
pub mod error;
pub mod es;
pub mod harness;
pub mod layer;
pub mod modulation;
pub mod numerics;
pub mod policy;
pub mod reference;
pub mod rng;

pub use error::{Error, Result};
