pub mod dynamics;
pub mod error;
pub mod fisher;
pub mod grape;
pub mod shift;
pub mod linalg;

pub use error::{CoreError, Result};
