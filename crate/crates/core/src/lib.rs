//! Finite-element solver for the monodomain cardiac model.
//!
//! The transmembrane potential `v` obeys a reaction-diffusion equation with
//! homogeneous Neumann boundary conditions, coupled to a gating variable `w`
//! through a reduced ionic model:
//!
//! ```text
//! v_t = div(D ∇v) + I_ion(v, w) + I_app
//! w_t = g(v, w)
//! ```
//!
//! Space is discretized with continuous P1 elements on a uniform triangulation
//! of a rectangle, time with a linearized backward Euler scheme: diffusion is
//! implicit, the reaction terms are taken from the previous step. The
//! [`verification`] module measures the resulting space and time convergence
//! rates, which should approach 2 in `h` and 1 in `k`.

pub mod cli;
pub mod error;
pub mod fem;
pub mod ionic;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod verification;

pub use error::{Error, Result};
pub use fem::{assemble_mass, assemble_stiffness, interpolate_nodal, l2_norm, DiffusionTensor};
pub use ionic::{ApParams, IonicModel, MsParams, Reaction};
pub use mesh::{build_uniform_mesh, Bounds, TriMesh};
pub use solver::{Monodomain, SolverConfig, SolverState};
pub use sparse::{cg_solve, CgOptions, CsrMatrix};
pub use verification::{compute_rates, convergence_study, ConvergenceRecord, StudyConfig};
