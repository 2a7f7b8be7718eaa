//! Modelling, analysis, optimization and tolerancing of bi-convex spherical
//! micro lenses.
//!
//! Lengths are micrometers everywhere; wavelengths are accepted in nanometers
//! and converted once where a ray-optics quantity needs them.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] and [`prescription`]: spherical caps and sequential lens
//!   prescriptions (with their JSON file format).
//! * [`paraxial`]: closed-form NA, diffraction spot and focal length.
//! * [`raytrace`]: exact ray tracing, spot diagrams, fans and longitudinal /
//!   transverse spherical aberration.
//! * [`aberration_fit`]: the transverse aberration power series and its
//!   least-squares fit.
//! * [`design`]: Nelder–Mead design optimization at fixed NA.
//! * [`reflow`]: volume-conserving reflow of resist cylinders into caps.
//! * [`tolerance`]: seeded Monte Carlo propagation of fabrication scatter.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aberration_fit;
pub mod design;
pub mod error;
pub mod exec;
pub mod export;
pub mod geometry;
pub mod lens;
pub mod numeric;
pub mod paraxial;
pub mod prescription;
pub mod raytrace;
pub mod reflow;
pub mod tolerance;

pub use error::{OpticsError, Result};
pub use exec::Exec;
pub use geometry::{cap_radius, cap_sag, CapGeometry};
pub use lens::LensDesign;
pub use prescription::{LensPrescription, Material, SphericalSurface, Violation};

/// He-Ne laser line used throughout the reference design.
pub const HE_NE_WAVELENGTH_NM: f64 = 632.8;

/// Default refractive index of PDMS near 633 nm.
pub const PDMS_INDEX: f64 = 1.43;
