//! Compile discrete Abelian spin models onto Z2 lattice gauge theory instances
//! and check the result by exact enumeration.

pub mod backend;
pub mod cli;
pub mod engine;
pub mod error;
pub mod extract;
pub mod geometry;
pub mod gf2;
pub mod lgt;
pub mod model;
pub mod observables;
pub mod qlevel;
pub mod quantum;
pub mod rewrite;
pub mod walsh;

pub use error::{Error, Result};
pub use geometry::{Boundary, LatticeGeometry};
pub use model::{evaluate_energy, Coupling, Interaction, SpinModel, Term, TermKind};
