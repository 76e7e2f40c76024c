//! Near-field bending beam synthesis for uniform linear arrays.
//!
//! The crate is `no_std` (with `alloc`) and covers the numerical side of the
//! problem: array and trajectory geometry, spherical-wave channels with
//! blockage, the tangent-method baseline, a Hermitian SDP solver for the
//! max-min subproblem, the penalty/SCA outer loop and field evaluation.
//! File formats and the command-line front end live in the `bendbeam` crate.
//!
//! ```
//! use bendbeam_core::maxmin::SolverConfig;
//! use bendbeam_core::pipeline::{synthesize, Method, Scenario};
//! use bendbeam_core::{ArrayGeometry, Scheme, Trajectory};
//!
//! # fn main() -> bendbeam_core::Result<()> {
//! let geom = ArrayGeometry::from_frequency(16, 300e9, None)?;
//! let traj = Trajectory::parabola(0.5, 0.0024, 0.024)?;
//! let scenario = Scenario::new(geom, traj, 20, Vec::new())?;
//! let abf = synthesize(&scenario, Method::Proposed(Scheme::Abf), &SolverConfig::default())?;
//! let tm = synthesize(&scenario, Method::Tangent, &SolverConfig::default())?;
//! assert!(abf.p_min >= tm.p_min);
//! # Ok(())
//! # }
//! ```

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod error;
pub mod fieldmap;
pub mod geometry;
pub mod linalg;
pub mod maxmin;
pub mod pipeline;
pub mod sdp;
pub mod tangent;

pub use channel::{Beamformer, ChannelMatrix, ChannelVector, Scheme};
pub use error::{Error, Result};
pub use geometry::{ArrayGeometry, Obstacle, Point2, SamplePoints, Trajectory};
pub use linalg::{CMatrix, C64};

/// Speed of light in m/s, rounded so that 300 GHz is exactly a 1 mm wavelength.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
