//! Numerical laboratory for capillary hypersurfaces of revolution in a
//! half-space or slab of `R^{n+1}`: profile generation, verification of the
//! classical integral identities, and volume-constrained stability analysis.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delaunay;
pub mod error;
pub mod geometry;
pub mod identity;
pub mod numerics;
pub mod ode;
pub mod stability;
pub mod sweep;
pub mod testfn;

pub use error::{CapstabError, Result};
pub use geometry::{
    areas, boundary_frame, curvature_data, robin_coefficient, CapillaryProblem, Domain, End,
    EndpointKind, ProfileCurve, RevolutionSurface, Wall,
};
