//! Parity-adapted U(D)-spin coherent states and phase-space localization
//! measures, applied to the D-level Lipkin-Meshkov-Glick model.

pub mod cli;
pub mod coherent;
pub mod error;
pub mod fock;
pub mod husimi;
pub mod lmg;
pub mod parity;
pub mod selftest;
pub mod variational;

pub use error::{Error, Result};
