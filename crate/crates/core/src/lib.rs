//! Formal verification of neural-network surrogates for power-system
//! dispatch and security-constrained power flow.

pub mod cli;
pub mod dualopt;
pub mod error;
pub mod gridopf;
pub mod lpcore;
pub mod minenc;
pub mod netmodel;
pub mod relax;
pub mod verifier;
pub mod trainer;
mod textfmt;

pub use error::{Error, Result};
pub use textfmt::sha256_hex;
