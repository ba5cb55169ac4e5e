//! Grid over similarity threshold and window size, written as CSV to stdout.

use localsparse::cli::{sweep, SWEEP_HEADER};
use localsparse::io::{to_csv_rows, RunConfig};

const CONFIG: &str = r#"
seed = 11

[spls]
k_ratio = 0.15
similarity_threshold = 0.4
ffn_threshold = 3
window = 8
seq_len = 32
d_model = 64
heads = 4
d_ff = 128

[sweep]
similarity_threshold = [0.1, 0.3, 0.5, 0.7, 0.9]
window = [2, 4, 8]
"#;

fn main() -> localsparse::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG)?;
    print!("{}", to_csv_rows(&SWEEP_HEADER, &sweep(&cfg)?)?);
    Ok(())
}
