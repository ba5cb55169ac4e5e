//! The shift detector, shift judgment array and converter on the operands 42 and -18.

use localsparse::quant::{converter_accumulate, hlog_quantize, sja_multiply};

fn main() {
    let a = hlog_quantize(42);
    let b = hlog_quantize(-18);
    println!("42  -> code {:05b} = {}", a.pack(), a.value());
    println!("-18 -> code {:05b} = {}", b.pack(), b.value());
    let p = sja_multiply(a, b);
    println!(
        "product exponents ({}, {:?}), word {:09b}, value {}",
        p.e1(),
        p.e2(),
        p.pack(),
        p.value()
    );

    let xs = [42i8, -7, 90, 3];
    let ws = [-18i8, 64, 5, -128];
    let products: Vec<_> = xs.iter().zip(&ws).map(|(&x, &w)| sja_multiply(hlog_quantize(x), hlog_quantize(w))).collect();
    let exact: i32 = xs.iter().zip(&ws).map(|(&x, &w)| i32::from(x) * i32::from(w)).sum();
    println!("dot {xs:?} . {ws:?}: shift-add {} vs exact {exact}", converter_accumulate(&products));
}
