//! Writes an int8 tensor file, dumps its bytes and reads it back.

use localsparse::io::{read_tensor, write_tensor, TensorFile};
use localsparse::tensor::QTensor;

fn main() -> localsparse::Result<()> {
    let t = QTensor::new(2, 2, vec![1, -2, 3, 4], 0.05)?;
    let dir = std::env::temp_dir().join("localsparse-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("x.esat");
    write_tensor(&path, &TensorFile::from_qtensor(&t))?;
    let bytes = std::fs::read(&path)?;
    let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
    println!("{} bytes: {}", bytes.len(), hex.join(" "));
    let back = read_tensor(&path)?.to_qtensor()?;
    println!("round trip equal: {}", back == t);
    Ok(())
}
