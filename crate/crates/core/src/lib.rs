//! Computational ergodic theory at desk scale.
//!
//! Subshifts of finite type and their Parry measures, Markov-partition coding
//! of hyperbolic toral automorphisms, the weak* metric on measures, pseudo-orbit
//! shadowing, the quasi-orbit schedule behind saturated sets, and the Katok
//! slowdown map with Pesin-block diagnostics.

pub mod cli;
pub mod error;
pub mod katok_map;
pub mod saturation;
pub mod sft;
pub mod shadowing;
pub mod toral;
pub mod weakstar;

pub use error::{Error, Result};
