pub mod baselines;
pub mod datagen;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod io;
pub mod model;
pub mod phasefield;
pub mod simulate;

pub use error::{Error, Result};
pub use exec::Exec;
