//! Shift judgment array (addition-only multiply) and the converter.

use super::{Form, HLogCode};
use crate::error::{Error, Result};

/// Largest exponent a product can carry (two 4-bit fields).
pub const MAX_PRODUCT_EXPONENT: u8 = 15;

/// Product of two HLog codes: `sign * (2^e1 + 2^e2)`, `e2` optional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProductCode {
    negative: bool,
    e1: u8,
    e2: Option<u8>,
    zero: bool,
}

impl ProductCode {
    pub const ZERO: ProductCode = ProductCode {
        negative: false,
        e1: 0,
        e2: None,
        zero: true,
    };

    /// 9-bit word reserved for zero: `e2 > e1` never occurs otherwise.
    pub const PACKED_ZERO: u16 = 0x00F;

    pub fn new(negative: bool, e1: u8, e2: Option<u8>) -> Result<Self> {
        if e1 > MAX_PRODUCT_EXPONENT || e2.is_some_and(|e| e >= e1) {
            return Err(Error::InvalidParameter(format!(
                "invalid product exponents ({e1}, {e2:?})"
            )));
        }
        Ok(Self {
            negative,
            e1,
            e2,
            zero: false,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn is_negative(&self) -> bool {
        !self.zero && self.negative
    }

    pub fn e1(&self) -> u8 {
        self.e1
    }

    pub fn e2(&self) -> Option<u8> {
        self.e2
    }

    pub fn value(&self) -> i32 {
        if self.zero {
            return 0;
        }
        let m = (1i32 << self.e1) + self.e2.map_or(0, |e| 1i32 << e);
        if self.negative {
            -m
        } else {
            m
        }
    }

    /// `[sign | e1:4 | e2:4]`; `e2 == e1` encodes an absent second term.
    pub fn pack(&self) -> u16 {
        if self.zero {
            return Self::PACKED_ZERO;
        }
        let sign = u16::from(self.negative) << 8;
        sign | (u16::from(self.e1) << 4) | u16::from(self.e2.unwrap_or(self.e1))
    }

    pub fn unpack(word: u16) -> Result<Self> {
        if word == Self::PACKED_ZERO {
            return Ok(Self::ZERO);
        }
        if word > 0x1FF {
            return Err(Error::InvalidParameter(format!(
                "product word {word:#x} wider than 9 bits"
            )));
        }
        let e1 = ((word >> 4) & 0xF) as u8;
        let low = (word & 0xF) as u8;
        let e2 = (low != e1).then_some(low);
        Self::new(word & 0x100 != 0, e1, e2)
    }
}

/// Multiply two HLog codes with exponent additions only.
///
/// With `a = 2^ma` or `1.5 * 2^ma` (and likewise `b`):
/// - Single x Single: `2^(ma+mb)`
/// - Single x Sum:    `2^(ma+mb) + 2^(ma+mb-1)`
/// - Sum x Sum:       `2.25 * 2^(ma+mb) = 2^(ma+mb+1) + 2^(ma+mb-2)`
pub fn sja_multiply(a: HLogCode, b: HLogCode) -> ProductCode {
    if a.is_zero() || b.is_zero() {
        return ProductCode::ZERO;
    }
    let m = a.exponent() + b.exponent();
    let (e1, e2) = match (a.form(), b.form()) {
        (Form::Single, Form::Single) => (m, None),
        (Form::Single, Form::Sum) | (Form::Sum, Form::Single) => (m, Some(m - 1)),
        (Form::Sum, Form::Sum) => (m + 1, Some(m - 2)),
    };
    ProductCode {
        negative: a.is_negative() != b.is_negative(),
        e1,
        e2,
        zero: false,
    }
}

/// Sign-grouped exponent histogram accumulator.
#[derive(Debug, Clone, Default)]
pub struct Converter {
    positive: [u32; 16],
    negative: [u32; 16],
}

impl Converter {
    /// Longest sequence the 32-bit result is guaranteed to hold.
    pub const MAX_TERMS: usize = 1 << 16;

    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, p: ProductCode) {
        if p.zero {
            return;
        }
        let counts = if p.negative {
            &mut self.negative
        } else {
            &mut self.positive
        };
        counts[usize::from(p.e1)] += 1;
        if let Some(e2) = p.e2 {
            counts[usize::from(e2)] += 1;
        }
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Positive group total minus negative group total.
    pub fn finish(&self) -> i32 {
        let weigh = |counts: &[u32; 16]| -> i64 {
            counts
                .iter()
                .enumerate()
                .map(|(e, &c)| i64::from(c) << e)
                .sum()
        };
        let total = weigh(&self.positive) - weigh(&self.negative);
        i32::try_from(total).expect("converter sum exceeds 32 bits; too many terms")
    }
}

/// Exact sum of a product sequence, at most [`Converter::MAX_TERMS`] long.
pub fn converter_accumulate(products: &[ProductCode]) -> i32 {
    assert!(products.len() <= Converter::MAX_TERMS);
    let mut c = Converter::new();
    for &p in products {
        c.push(p);
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::hlog_quantize;

    fn code(neg: bool, e: u8, form: Form) -> HLogCode {
        HLogCode::new(neg, e, form).unwrap()
    }

    #[test]
    fn worked_product() {
        let p = sja_multiply(hlog_quantize(42), hlog_quantize(-18));
        assert!(p.is_negative());
        assert_eq!((p.e1(), p.e2()), (9, Some(8)));
        assert_eq!(p.value(), -768);
    }

    #[test]
    fn sum_by_sum_case() {
        let three = code(false, 1, Form::Sum);
        let p = sja_multiply(three, three);
        assert_eq!((p.e1(), p.e2(), p.value()), (3, Some(0), 9));
    }

    #[test]
    fn zero_operand() {
        assert!(sja_multiply(HLogCode::ZERO, code(true, 3, Form::Sum)).is_zero());
        assert!(sja_multiply(code(true, 3, Form::Sum), HLogCode::ZERO).is_zero());
    }

    #[test]
    fn converter_examples() {
        assert_eq!(converter_accumulate(&[]), 0);
        let p = ProductCode::new(false, 9, Some(8)).unwrap();
        let n = ProductCode::new(true, 9, Some(8)).unwrap();
        assert_eq!(converter_accumulate(&[p, n]), 0);
        let nine = ProductCode::new(false, 3, Some(0)).unwrap();
        let minus_two = ProductCode::new(true, 1, None).unwrap();
        assert_eq!(converter_accumulate(&[nine, nine, minus_two]), 16);
    }

    #[test]
    fn converter_holds_max_terms() {
        let biggest = sja_multiply(hlog_quantize(-128), hlog_quantize(127));
        let terms = vec![biggest; Converter::MAX_TERMS];
        assert_eq!(converter_accumulate(&terms), -(1 << 30));
    }

    #[test]
    fn product_words() {
        let p = ProductCode::new(true, 9, Some(8)).unwrap();
        assert_eq!(p.pack(), 0b1_1001_1000);
        assert_eq!(ProductCode::unpack(p.pack()).unwrap(), p);
        let single = ProductCode::new(false, 4, None).unwrap();
        assert_eq!(single.pack(), 0b0_0100_0100);
        assert_eq!(ProductCode::unpack(single.pack()).unwrap(), single);
        assert!(ProductCode::unpack(ProductCode::PACKED_ZERO).unwrap().is_zero());
        assert!(ProductCode::unpack(0x200).is_err());
        assert!(ProductCode::new(false, 3, Some(5)).is_err());
    }
}
