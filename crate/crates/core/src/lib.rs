pub mod error;
pub mod hamiltonian;
pub mod hj;
pub mod io;
pub mod kinetic;
pub mod numerics;
pub mod operators;
pub mod perron;
pub mod spectral;
pub mod unbounded;
pub mod velocity;

pub use error::{Error, Result};
