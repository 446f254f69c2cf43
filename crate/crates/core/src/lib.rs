//! Semiclassical energy asymptotics for Coulomb systems: Thomas–Fermi
//! theory, Weyl phase-space integrals, negative-eigenvalue traces and the
//! Scott correction with and without self-generated magnetic fields.

pub mod error;
pub mod exec;
pub mod model;
pub mod quad;
pub mod tf;
pub mod hydrogen;
pub mod weyl;
pub mod radial;
pub mod jet;
pub mod multiscale;
pub mod pauli;
pub mod expansion;
pub mod cli;

pub use error::{Error, Result};
