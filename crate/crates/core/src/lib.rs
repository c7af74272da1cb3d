pub mod attention;
pub mod attgraph;
pub mod coords;
pub mod error;
pub mod grad;
pub mod motionseg;
pub mod num;
pub mod stream;

pub use error::{Error, Result};
pub use num::Real;
