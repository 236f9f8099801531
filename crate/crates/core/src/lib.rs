#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod accountant;
pub mod acquisition;
pub mod error;
pub mod mechanisms;
pub mod orchestrator;
pub mod schedule;
pub mod selection;
pub mod trainer;

pub use error::{Error, Result};
