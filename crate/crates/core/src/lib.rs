//! Susskind-Glogower cosine and sine phase distributions of a single optical
//! mode, computed three ways: exactly from a known state, through
//! coarse-grained phase states, and by direct sampling from balanced-homodyne
//! quadrature data with the phase-sampling kernel.

pub mod error;
pub mod cache;
pub mod fock;
pub mod homodyne;
pub mod kernel;
pub mod pattern;
pub mod phase;
pub mod quadrature;
pub mod sampler;
pub mod summation;

pub use error::{Error, Result};
