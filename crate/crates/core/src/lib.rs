pub mod cli;
pub mod cube;
pub mod error;
pub mod exact;
pub mod l1lp;
pub mod learner;
pub mod orthopoly;
pub mod planted;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod sqlab;
pub mod witness;

pub use error::{Error, Result};
