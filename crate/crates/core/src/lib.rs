pub mod cli;
pub mod error;
pub mod io;
pub mod perfsim;
pub mod prediction;
pub mod quant;
pub mod refblock;
pub mod sparsity;
pub mod tensor;

pub use error::{Error, Result};
