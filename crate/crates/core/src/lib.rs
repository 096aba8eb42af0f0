//! Spectrum of a three-level ladder coupled linearly to a harmonic oscillator.

pub mod dressed_levels;
pub mod error;
pub mod fock_window;
pub mod linalg;
pub mod oscillator;
pub mod rotation_coupling;
pub mod splittings;
pub mod trilevel_core;
pub mod validate;

pub use error::{Error, Result};
pub use trilevel_core::{AdiabaticPoint, CubicCoefficients, Level, ModelParams};
pub use dressed_levels::{ContourPoint, DressedLevel, RaySet, ResonanceContour};
pub use fock_window::{AnticrossingGap, FockWindow, GapSearch, LineSegment, MapGrid, Sector, SharpnessPoint, TrackedLevels};
pub use rotation_coupling::{CouplingSample, ElementMethod, MatrixElementRequest, OscillatorStates};
pub use splittings::{SplittingRecord, SplittingSettings};
