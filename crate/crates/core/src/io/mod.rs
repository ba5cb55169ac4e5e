//! Tensor files, run configuration and report serialization.

mod config;
mod report;
mod tensor_file;

pub use config::{RunConfig, SweepGrid, SweepPoint, WeightSource};
pub use report::{render_report, to_csv_record, to_csv_rows, to_json, write_report, ReportFormat};
pub use tensor_file::{read_tensor, write_tensor, Dtype, TensorData, TensorFile, MAGIC, VERSION};
