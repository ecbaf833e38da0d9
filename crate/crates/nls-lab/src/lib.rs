//! Numerical laboratory for the focusing energy-critical NLS with an
//! inverse-square potential in three dimensions,
//!
//!     (i∂_t - 𝓛_a) u + |u|⁴ u = 0,    𝓛_a = -Δ + a/|x|²,   a ∈ (-1/4+4/25, 0),
//!
//! restricted to radial data. The crate builds the explicit ground state W
//! and its linearization, verifies the spectral trichotomy of the linearized
//! flow, constructs the threshold orbits by a Lyapunov-Perron fixed point,
//! integrates the radial flow with a split-step scheme, and implements the
//! modulation / virial diagnostics used to classify orbits at the threshold
//! energy as stationary, converging, scattering, or blowing up.

pub mod config;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod ground_state;
pub mod linalg;
pub mod modulation;
pub mod params;
pub mod rates;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sector;
pub mod spectral;
pub mod threshold;
pub mod virial;

pub use error::{Error, Result};
pub use grid::{Grading, GridHandle, RadialGrid};
pub use ground_state::GroundState;
pub use params::PhysParams;
pub use sector::{PotentialCoeff, RadialField, SectorHandle, SectorScheme};
