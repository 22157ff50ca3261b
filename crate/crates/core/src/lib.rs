//! Numerical toolkit for Gaussian optimality questions on the Gaussian
//! Z-interference channel.
//!
//! * [`gaussian`]: exact algebra of Gaussian-derivative mixtures.
//! * [`entropy`]: differential entropy and Fisher information on grids.
//! * [`counterexample`]: non-Gaussian constructions beating Gaussian inputs.
//! * [`hessian`]: second-order analysis at Gaussian stationary points.
//! * [`hk`]: Gaussian Han-Kobayashi quantities and their envelopes.
//! * [`geometry`]: planar Minkowski sums and mixed areas.

pub mod error;
pub mod gaussian;
pub mod quadrature;
pub mod entropy;
pub mod linalg;
pub mod hessian;
pub mod counterexample;
pub mod envelope;
pub mod hk;
pub mod geometry;

pub use error::{Error, Result};
pub use gaussian::{GaussDerivMixture, HermitePolynomial, ShiftedMixture, Term};
pub use entropy::{EntropyExpansion, GridDensity, GridSpec, TailModel};
pub use linalg::PsdMatrix;
pub use hessian::{HermiteCoeffVector, HessianReport, Stability};
pub use counterexample::{ConjectureParams, Law, Recipe, VerticalPerturbation};
pub use hk::HKParams;
pub use geometry::{ConvexBody2D, MinkowskiSum, Polygon, RoundedPolygon};
