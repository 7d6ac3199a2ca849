//! Immersed finite element (IFE) solvers for second-order elliptic interface
//! problems on interface-unfitted Cartesian meshes.
//!
//! The crate covers the whole pipeline: mesh generation and cut detection
//! against a level-set interface ([`geometry`]), cut-cell quadrature
//! ([`quadrature`]), local linear/bilinear IFE bases ([`ife_local`]), global
//! assembly of the classic and partially penalized bilinear forms
//! ([`assembly`]), sparse iterative solvers ([`linsolve`]), error norms
//! against manufactured solutions ([`postprocess`]), numerical probes of the
//! trace/coercivity estimates ([`verify`]), and the experiment driver
//! ([`harness`]).

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod ife_local;
pub mod linsolve;
pub mod postprocess;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::Point;
