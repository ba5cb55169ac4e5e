//! Scalar logarithmic quantizers.
//!
//! HLog keeps every power of two plus the midpoint `2^m + 2^(m-1)` between
//! neighbouring powers. A value is projected to its nearest level; a value
//! exactly between two levels goes to the larger one.
//!
//! The shift detector never compares against a level table. With the leading
//! one of the magnitude at bit `p` and the next two bits `b1 b2`, the
//! magnitude lies in `[2^p, 2^(p+1))` and the three candidate levels are
//! `2^p`, `1.5 * 2^p` and `2^(p+1)`:
//!
//! | b1 b2 | magnitude range (units of 2^p) | code        |
//! |-------|--------------------------------|-------------|
//! | 00    | [1, 1.25)                      | (p, Single) |
//! | 01    | [1.25, 1.5)                    | (p, Sum)    |
//! | 10    | [1.5, 1.75)                    | (p, Sum)    |
//! | 11    | [1.75, 2)                      | (p+1, Single) |
//!
//! The range boundaries 1.25 and 1.75 are the midpoints between candidate
//! levels. Both land on the first pattern of the upper range, which is the
//! tie-to-larger rule. Bits below `b2` only move the magnitude inside a
//! range, so the rule is exact nearest-level projection.

mod datapath;
mod levels;

pub use datapath::{converter_accumulate, sja_multiply, Converter, ProductCode};
pub use levels::{error_stats, hlog_levels, ErrorStats, LevelTable, Method};

use crate::error::{Error, Result};

/// Highest exponent an 8-bit magnitude can quantize to (`2^7 = 128`).
pub const MAX_EXPONENT: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Form {
    /// `2^m`
    Single,
    /// `2^m + 2^(m-1)`
    Sum,
}

/// One HLog-quantized scalar, as produced by the shift detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HLogCode {
    negative: bool,
    exponent: u8,
    form: Form,
    zero: bool,
}

impl HLogCode {
    pub const ZERO: HLogCode = HLogCode {
        negative: false,
        exponent: 0,
        form: Form::Single,
        zero: true,
    };

    /// Packed 5-bit word reserved for zero. `(exponent 0, Sum)` is not a valid level.
    pub const PACKED_ZERO: u8 = 0b00001;

    pub fn new(negative: bool, exponent: u8, form: Form) -> Result<Self> {
        let valid = match form {
            Form::Single => exponent <= MAX_EXPONENT,
            Form::Sum => (1..MAX_EXPONENT).contains(&exponent),
        };
        if !valid {
            return Err(Error::InvalidParameter(format!(
                "no HLog level for exponent {exponent} with {form:?} form"
            )));
        }
        Ok(Self {
            negative,
            exponent,
            form,
            zero: false,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn is_negative(&self) -> bool {
        !self.zero && self.negative
    }

    pub fn exponent(&self) -> u8 {
        self.exponent
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn magnitude(&self) -> u32 {
        if self.zero {
            return 0;
        }
        match self.form {
            Form::Single => 1 << self.exponent,
            Form::Sum => (1 << self.exponent) + (1 << (self.exponent - 1)),
        }
    }

    pub fn value(&self) -> i32 {
        let m = self.magnitude() as i32;
        if self.is_negative() {
            -m
        } else {
            m
        }
    }

    /// `[sign | exponent:3 | form]`, sign in bit 4.
    pub fn pack(&self) -> u8 {
        if self.zero {
            return Self::PACKED_ZERO;
        }
        let sign = u8::from(self.negative) << 4;
        let form = u8::from(self.form == Form::Sum);
        sign | (self.exponent << 1) | form
    }

    pub fn unpack(word: u8) -> Result<Self> {
        if word == Self::PACKED_ZERO {
            return Ok(Self::ZERO);
        }
        if word > 0b11111 {
            return Err(Error::InvalidParameter(format!(
                "HLog word {word:#b} wider than 5 bits"
            )));
        }
        let form = if word & 1 == 1 { Form::Sum } else { Form::Single };
        Self::new(word & 0b10000 != 0, (word >> 1) & 0b111, form)
    }
}

/// Sign and two power-of-two exponents of an APoT level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ApotCode {
    pub negative: bool,
    pub high: u8,
    pub low: Option<u8>,
    pub zero: bool,
}

impl ApotCode {
    pub const ZERO: ApotCode = ApotCode {
        negative: false,
        high: 0,
        low: None,
        zero: true,
    };

    pub fn magnitude(&self) -> u32 {
        if self.zero {
            return 0;
        }
        (1u32 << self.high) + self.low.map_or(0, |l| 1u32 << l)
    }

    pub fn value(&self) -> i32 {
        let m = self.magnitude() as i32;
        if self.negative && !self.zero {
            -m
        } else {
            m
        }
    }
}

#[inline]
fn leading_one(magnitude: u32) -> u32 {
    31 - magnitude.leading_zeros()
}

#[inline]
fn bit(magnitude: u32, pos: i64) -> bool {
    pos >= 0 && (magnitude >> pos) & 1 == 1
}

/// Shift-detector rule on a nonzero magnitude.
fn hlog_bits(magnitude: u32) -> (u8, Form) {
    let p = leading_one(magnitude);
    let b1 = bit(magnitude, i64::from(p) - 1);
    let b2 = bit(magnitude, i64::from(p) - 2);
    match (b1, b2) {
        (false, false) => (p as u8, Form::Single),
        (true, true) => (p as u8 + 1, Form::Single),
        _ => (p as u8, Form::Sum),
    }
}

/// Nearest power of two to a nonzero magnitude, ties upward.
fn pot_exponent(magnitude: u32) -> u8 {
    let p = leading_one(magnitude);
    (p + u32::from(bit(magnitude, i64::from(p) - 1))) as u8
}

#[inline]
fn magnitude_of(x: i8) -> u32 {
    u32::from(x.unsigned_abs())
}

/// HLog quantization of one 8-bit value, on the two's-complement magnitude.
pub fn hlog_quantize(x: i8) -> HLogCode {
    if x == 0 {
        return HLogCode::ZERO;
    }
    let (exponent, form) = hlog_bits(magnitude_of(x));
    HLogCode {
        negative: x < 0,
        exponent,
        form,
        zero: false,
    }
}

/// Raw-bit shift detector: negative inputs scan for the leading zero of the
/// two's-complement pattern instead of negating first.
///
/// Scanning the inverted pattern quantizes `|x| - 1`, which agrees with
/// [`hlog_quantize`] except near level boundaries. Kept for comparison; the
/// magnitude path is the normative quantizer.
pub fn shift_detector_raw(x: i8) -> HLogCode {
    if x >= 0 {
        return hlog_quantize(x);
    }
    let inverted = u32::from(!(x as u8));
    let (exponent, form) = if inverted == 0 {
        (0, Form::Single)
    } else {
        hlog_bits(inverted)
    };
    HLogCode {
        negative: true,
        exponent,
        form,
        zero: false,
    }
}

/// Power-of-two quantization (form is always `Single`).
pub fn pot_quantize(x: i8) -> HLogCode {
    if x == 0 {
        return HLogCode::ZERO;
    }
    HLogCode {
        negative: x < 0,
        exponent: pot_exponent(magnitude_of(x)),
        form: Form::Single,
        zero: false,
    }
}

/// Additive power-of-two quantization with two terms.
pub fn apot_quantize(x: i8) -> ApotCode {
    if x == 0 {
        return ApotCode::ZERO;
    }
    let magnitude = magnitude_of(x);
    let p = leading_one(magnitude) as u8;
    let rest = magnitude - (1 << p);
    let (high, low) = if rest == 0 {
        (p, None)
    } else {
        // Remainder goes to its nearest power; reaching 2^p carries into 2^(p+1).
        let e = pot_exponent(rest);
        if e == p {
            (p + 1, None)
        } else {
            (p, Some(e))
        }
    };
    ApotCode {
        negative: x < 0,
        high,
        low,
        zero: false,
    }
}

/// Decoded value of `x` under the given 8-bit quantizer.
pub fn quantize_value(method: Method, x: i8) -> i32 {
    match method {
        Method::HLog => hlog_quantize(x).value(),
        Method::PoT => pot_quantize(x).value(),
        Method::APoT => apot_quantize(x).value(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_detector_worked_example() {
        let a = hlog_quantize(0b0010_1010);
        assert_eq!((a.exponent(), a.form()), (5, Form::Sum));
        assert_eq!(a.value(), 48);
        assert_eq!(a.pack(), 0b01011);

        let b = hlog_quantize(0b1110_1110u8 as i8);
        assert_eq!(b.value(), -16);
        assert_eq!((b.exponent(), b.form()), (4, Form::Single));
        assert_eq!(b.pack(), 0b11000);
    }

    #[test]
    fn hlog_small_values() {
        assert!(hlog_quantize(0).is_zero());
        assert_eq!(hlog_quantize(5).value(), 6);
        assert_eq!(hlog_quantize(-5).value(), -6);
        assert_eq!(hlog_quantize(7).value(), 8);
        assert_eq!(hlog_quantize(-128).value(), -128);
        assert_eq!(hlog_quantize(127).value(), 128);
        assert_eq!(hlog_quantize(1).value(), 1);
    }

    #[test]
    fn pot_examples() {
        assert_eq!(pot_quantize(42).value(), 32);
        assert_eq!(pot_quantize(96).value(), 128);
        assert_eq!(pot_quantize(1).value(), 1);
        assert_eq!(pot_quantize(-3).value(), -4);
        assert!(pot_quantize(0).is_zero());
    }

    #[test]
    fn apot_examples() {
        let c = apot_quantize(42);
        assert_eq!((c.high, c.low, c.value()), (5, Some(3), 40));
        let c = apot_quantize(3);
        assert_eq!((c.high, c.low), (1, Some(0)));
        let c = apot_quantize(100);
        assert_eq!((c.high, c.low, c.value()), (6, Some(5), 96));
        assert_eq!(apot_quantize(-128).value(), -128);
        assert!(apot_quantize(0).zero);
    }

    #[test]
    fn raw_detector_matches_worked_negative() {
        assert_eq!(shift_detector_raw(-18), hlog_quantize(-18));
        assert_eq!(shift_detector_raw(-18).pack(), 0b11000);
        for x in 0..=127i8 {
            assert_eq!(shift_detector_raw(x), hlog_quantize(x));
        }
    }

    #[test]
    fn pack_round_trips_every_code() {
        for x in i8::MIN..=i8::MAX {
            let code = hlog_quantize(x);
            assert_eq!(HLogCode::unpack(code.pack()).unwrap(), code);
        }
    }

    #[test]
    fn unpack_rejects_invalid_words() {
        assert!(HLogCode::unpack(0b100000).is_err());
        // negative zero slot and (7, Sum) are unused
        assert!(HLogCode::unpack(0b10001).is_err());
        assert!(HLogCode::unpack(0b01111).is_err());
    }

    #[test]
    fn constructor_enforces_sum_exponent() {
        assert!(HLogCode::new(false, 0, Form::Sum).is_err());
        assert!(HLogCode::new(false, 8, Form::Single).is_err());
        assert_eq!(HLogCode::new(true, 1, Form::Sum).unwrap().value(), -3);
    }
}
