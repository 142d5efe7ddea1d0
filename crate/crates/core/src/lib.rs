//! Numerical laboratory for the cohomogeneity-one Ricci-flat system on
//! Wallach-space principal orbits.
//!
//! The flow lives on the six-dimensional phase space `(X1, X2, X3, Z1, Z2, Z3)`
//! restricted to the conservation-law variety `C` and the hyperplane `H = 1`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod dynamics;
pub mod error;
pub mod flow;
pub mod orbit_data;
pub mod recovery;
pub mod regions;
pub mod shooting;
pub mod special;
pub mod spectra;

pub use dynamics::State;
pub use error::{FlowError, Result};
pub use orbit_data::{CaseId, CaseParams};
