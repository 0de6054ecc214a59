//! Fisher-information bounds, simulation and estimators for quantum phase
//! estimation on multi-mode initial states.

pub mod bench;
pub mod bounds;
pub mod dirichlet;
pub mod error;
pub mod estimators;
pub mod fim;
pub mod linalg;
pub mod rng;
pub mod schedules;
pub mod simulate;
pub mod spectrum;

pub use error::{QpeError, Result};
pub use fim::{BlockFim, ProtocolKind};
pub use spectrum::{PhaseFamily, Spectrum};
