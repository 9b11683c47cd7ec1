//! Certified reduced-basis solver for steady buoyancy-driven flow in a
//! cavity of parametric height.
//!
//! The crate implements the full pipeline: full-order VMS-Smagorinsky
//! Boussinesq finite-element solver on a reference square (P2-P2-P1),
//! empirical interpolation of the eddy viscosity, greedy reduced-basis
//! construction with supremizer enrichment, an online reduced Newton solver,
//! and a Brezzi-Rappaz-Raviart a-posteriori error certificate.

pub mod artifact;
pub mod assembly;
pub mod certification;
pub mod eim;
pub mod error;
pub mod fom;
pub mod mesh;
pub mod params;
pub mod pipeline;
pub mod quadrature;
pub mod rb;
pub mod sparse;
pub mod spaces;
pub mod system;

pub use error::{Error, Result};
pub use params::{ParameterBox, ParameterPoint};
