//! Level-set reinitialization by alternating evolution and correction.
//!
//! The crate evolves a level-set function under a geometric Hamiltonian
//! `c(x,t)|grad u|`, relaxes it toward the signed distance to its zero set
//! with the corrector `beta(u)(1 - |grad u|)`, and studies the single
//! homogenized equation `u_t = c|grad u| + theta beta(u) h(grad u)` that the
//! alternating scheme converges to.

pub mod cell;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod grid;
pub mod model;
pub mod oracles;
pub mod scheme;

pub use error::{Error, Result};
pub use grid::{Field, GhostPolicy, Grid, SolverMeta, Trajectory};
pub use model::{BetaKind, CorrectorSpec, H1Spec, HVariant, Schedule, Velocity};
