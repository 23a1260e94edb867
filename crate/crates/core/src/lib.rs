//! Numerical laboratory for the one-dimensional granular-media equation
//!
//! ```text
//! ∂t μ = ∂xx μ + ∂x( μ (V' + W' * μ) )
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`potentials`]: analytic exterior and interaction potentials with
//!   verified convexity metadata.
//! * [`measures`]: grid densities, particle ensembles, convolutions and the
//!   free energy.
//! * [`transport`]: exact 1-D optimal transport, the Wasserstein dissipation
//!   functional and the WJ-inequality probes.
//! * [`dynamics`]: finite-volume and interacting-particle solvers.
//! * [`stationary`]: self-consistent Gibbs fixed points.
//! * [`harness`]: scenario configs, rate fitting, CSV/SVG artifacts and the
//!   CLI driver.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod measures;
pub mod potentials;
pub mod stationary;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{GridMeasure, GridSpec, ParticleEnsemble};
pub use potentials::PotentialSpec;
