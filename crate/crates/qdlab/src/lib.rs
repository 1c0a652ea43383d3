//! qdlab — a numerical laboratory for one-phase and multiphase quadrature
//! domains of subharmonic functions in the plane.
//!
//! The crate is organised around partial balayage on uniform grids:
//!
//! * [`measure`] — atomic and density measures, mollification, and the
//!   concentration criteria that govern when a measure admits a quadrature
//!   domain.
//! * [`potential`] — fundamental solutions, Newtonian and Green potentials,
//!   and the Laplacian-consistent grid rasterization of mollified atoms.
//! * [`solver`] — the projected red-black SOR kernel (deterministic across
//!   thread counts).
//! * [`balayage`] — one-phase partial balayage `W_D^mu` with structure
//!   decomposition of the swept measure.
//! * [`multiphase`] — segregated-state energy minimization, the disjoint
//!   one-phase construction with its two-phase membrane upgrade, and
//!   quadrature domains for tuples of point masses.
//! * [`verify`] — a-posteriori certification (PDE characterization, strong
//!   multiphase inequality, quadrature inequalities, fixed-point property).
//! * [`analytic`] — closed-form radial profiles, the equal-energy root, the
//!   ring-system nonexistence search, and the sector junction threshold.
//! * [`cli`] — the `qdlab` command-line front end and file formats.
//!
//! The `examples/` directory is the primary guided interface: each example
//! exercises one capability end to end and writes its artifacts to a
//! directory of your choice.

pub mod analytic;
pub mod balayage;
pub mod cli;
pub mod error;
pub mod grid;
pub mod measure;
pub mod multiphase;
pub mod potential;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
