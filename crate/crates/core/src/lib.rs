//! Far-field spectral correlation functions of one- and two-photon light
//! scattered by a weak anisotropic dielectric in the first Born approximation.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: unit directions, transverse projectors and polarization bases.
//! * [`scatterer`]: susceptibility models and their momentum-space transforms.
//! * [`states`]: incident-field states described by their amplitude data.
//! * [`correlators`]: narrowband amplitudes and the correlators Φ⁽¹⁾, Φ⁽²⁾.
//! * [`oracle`]: direct solid-angle quadrature of the un-factorized amplitudes.
//! * [`analysis`]: scans, visibility, extrema spacing and the Dₙ domains.
//! * [`inverse`]: separation/scale recovery from scanned signals.
//! * [`scenario`]: named presets wiring the above into reproducible experiments.
//!
//! Units follow c = ħ = ε₀ = 1 throughout. All correlators are defined up to a
//! fixed positive constant per state.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod correlators;
mod error;
pub mod geometry;
pub mod inverse;
pub mod oracle;
pub mod quadrature;
pub mod scatterer;
pub mod scenario;
pub mod states;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Real 3-vector used for positions, momenta and polarization vectors.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Complex 3-vector, e.g. a field amplitude.
pub type CVec3 = nalgebra::Vector3<Complex64>;
/// Real 3×3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Complex 3×3 matrix.
pub type CMat3 = nalgebra::Matrix3<Complex64>;
