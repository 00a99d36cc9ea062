pub mod error;
pub mod exactla;
pub mod rs_spec;
pub mod groups;
pub mod stability;
pub mod mutation;
pub mod census;
pub mod calculators;

pub use error::{Error, Result};
