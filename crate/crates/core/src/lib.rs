pub mod error;
pub mod mpcc;
pub mod propagation;
pub mod sim;
pub mod stp;
pub mod track;
pub mod vehicle;

pub use error::{Error, Result};
