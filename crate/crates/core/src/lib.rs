pub mod error;
pub mod geometry;

pub use error::{Error, Result};
pub mod bmo;
pub mod maximal;
pub mod stokes;
pub mod verify;
pub mod cli;
