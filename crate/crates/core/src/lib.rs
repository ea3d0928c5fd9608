//! Team formation, routing and scheduling of multi-skilled technicians with
//! deterministic and robust MILP models, an exact adversary for fixed plans,
//! demand-scenario simulation and an exhaustive oracle for tiny instances.

pub mod adversary;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod milp;
pub mod models;
pub mod oracle;
pub mod scenario;

pub use error::{Error, Result};
