//! Finite element discretization of the Darcy-Cahn-Hilliard system on the
//! unit square, with a convex-splitting time discretization solved by a
//! nonlinear (FAS) multigrid method.
//!
//! The crate is `no_std` and only needs an allocator. File formats and the
//! command-line driver live in the companion `dch-cli` crate.
//!
//! Module layout follows the data flow of one time step:
//!
//! * [`mesh`] builds the nested triangulations and transfer operators,
//! * [`assembly`] assembles P1 matrices, load vectors and error norms,
//! * [`system`] evaluates the discrete operator, residuals and diagnostics,
//! * [`smoother`] and [`multigrid`] solve the nonlinear system of one step,
//! * [`integrator`] marches in time,
//! * [`mms`] holds the manufactured solution and refinement studies.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod error;
pub mod field;
pub mod integrator;
pub mod mesh;
pub mod mms;
pub mod multigrid;
pub mod quadrature;
pub mod smoother;
pub mod sparse;
pub mod system;

pub use error::{DchError, Result};
pub use field::NodalField;
pub use integrator::{InitialCondition, Simulation, StepRecord};
pub use mesh::{build_hierarchy, MeshHierarchy, MeshLevel};
pub use multigrid::{MgWorkspace, SolveReport};
pub use sparse::CsrMatrix;
pub use system::{DchParams, DchState, SourceTriple};
