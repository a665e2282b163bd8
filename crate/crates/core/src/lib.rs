pub mod bias;
pub mod bootstrap;
pub mod error;
pub mod exec;
pub mod families;
pub mod fit;
pub mod linalg;
pub mod links;
pub mod model;
pub mod simulate;
pub mod specialfns;

pub use error::{Error, Result};
