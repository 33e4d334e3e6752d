//! File formats, rig ingestion and the command-line front end of the MPI
//! toolkit. The algorithms live in `mpiforge-core`.

pub mod cli;
pub mod error;
pub mod parallel;
pub mod pngio;
pub mod rig;
pub mod store;

pub use error::{Error, Result};
