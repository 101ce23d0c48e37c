//! Hierarchical multi-task learning on a simulated interactive table.

pub mod arm;
pub mod batch;
pub mod config;
pub mod dmp;
pub mod error;
pub mod eval;
pub mod index;
pub mod interest;
pub mod learner;
pub mod memory;
pub mod outcome;
pub mod strategy;
pub mod table;
pub mod teachers;
pub mod world;

pub use error::{Error, Result};
