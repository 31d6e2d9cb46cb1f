pub mod bifurcation;
pub mod certify;
pub mod cli;
pub mod contour;
pub mod error;
pub mod field;
pub mod hamiltonian_family;
pub mod melnikov;
pub mod ode;
pub mod poly;
pub mod return_maps;

pub use error::{Error, Result};
