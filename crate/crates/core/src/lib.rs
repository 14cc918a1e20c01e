//! Reconstruction of coefficients and initial data from single passive
//! boundary traces of the 1D wave and heat equations.
//!
//! Layers, bottom up: sampled [`profile`]s and [`trace`]s, the
//! Sturm–Liouville solver in [`sturm`], coordinate and gauge changes in
//! [`liouville`], forward solvers in [`wave`] and [`heat`], spectral
//! extraction, inversion, and the experiment runner.

pub mod error;
pub mod numerics;
pub mod profile;
pub mod trace;
pub mod modes;
pub mod sturm;
pub mod liouville;
pub mod wave;
pub mod heat;
pub mod extraction;
pub mod inverse;
pub mod config;
pub mod experiment;

pub use error::{Error, Result};
pub use modes::{Mode, ModeSet, SpectrumCounts};
pub use profile::{Profile, ProfileKind};
pub use trace::{BoundaryTrace, TraceFlavor};
