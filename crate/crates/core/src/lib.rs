pub mod correction;
pub mod decomposable;
pub mod demand;
pub mod error;
pub mod eval;
pub mod existence;
pub mod forecast;
pub mod network;
pub mod optkernel;
pub mod twostage;

pub use error::{Error, Result};
