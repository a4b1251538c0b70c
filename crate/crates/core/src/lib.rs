//! Curvature flows of strictly convex hypersurfaces in the round sphere.
//!
//! The crate covers the algebra of curvature functions ([`curvfun`]),
//! axisymmetric radial graphs ([`hypersurface`]), the Gauss-map polar dual
//! ([`dual`]), time integration of the contracting and expanding flows
//! ([`flow`]), rescaled-flow observables ([`diagnostics`]) and the scenario
//! runner behind the `sphereflow` binary ([`cli`]).

pub mod cli;
pub mod curvfun;
pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod flow;
pub mod hypersurface;
pub mod rng;

pub use error::{Error, Result};
