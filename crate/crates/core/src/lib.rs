//! Per-pixel probabilistic fusion of land-cover class probabilities.
//!
//! Each fine-grid pixel gets a small directed model: two fine-resolution
//! sources (`A`, a clean scene, and `B`, a partly clouded scene) are combined
//! into an intermediate distribution `LL`, which is then combined with a
//! coarse-resolution source `M` into the final land-cover posterior `R`.
//! The conditional tables are driven by data quality: a cloud/shadow fraction
//! from spectral unmixing weights `A` against `B`, and a reliability weight
//! built from coarse-cell group agreement and time-series completeness
//! weights `LL` against `M`.
//!
//! The crate is `no_std` (with `alloc`). File formats, thread pools and the
//! command line live in the `lcfuse` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod align;
pub mod assess;
pub mod classify;
mod error;
pub mod exec;
pub mod features;
mod math;
pub mod pgm;
pub mod raster;
pub mod unmix;

pub use error::{Error, Result};
