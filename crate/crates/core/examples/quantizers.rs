//! Level tables and projection error of HLog, PoT and APoT at 8 bits.

use localsparse::quant::{apot_quantize, hlog_quantize, pot_quantize, Method};

fn main() -> localsparse::Result<()> {
    print!("{}", localsparse::cli::compare_quant(8)?);
    println!();
    print!("{}", localsparse::cli::quant_table(Method::HLog, 8, false)?);
    println!();
    println!("{:>5} {:>5} {:>5} {:>5}", "x", "hlog", "pot", "apot");
    for x in [-128i8, -100, -18, -3, 0, 5, 7, 42, 90, 127] {
        println!(
            "{x:>5} {:>5} {:>5} {:>5}",
            hlog_quantize(x).value(),
            pot_quantize(x).value(),
            apot_quantize(x).value()
        );
    }
    Ok(())
}
