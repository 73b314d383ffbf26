//! Unambiguous discrimination of multiparticle quantum states with local
//! operations and classical communication (LOCC).
//!
//! The crate decides, for a finite ensemble of (possibly mixed, possibly
//! entangled) states, whether the states can be unambiguously identified
//! with nonzero probability, both with arbitrary measurements and with
//! separable/LOCC measurements, and builds the certificates:
//!
//! * global and per-party POVMs ([`discrimination`]),
//! * product vectors found by subspace search ([`search`]),
//! * entanglement witnesses when no product vector exists ([`witness`]),
//! * a Monte Carlo run of the local protocol ([`simulate`]).

pub mod discrimination;
pub mod error;
pub mod linalg;
pub mod search;
pub mod simulate;
pub mod state;
pub mod witness;

pub use error::{Error, Result};
