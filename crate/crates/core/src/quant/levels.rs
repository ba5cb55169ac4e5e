use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    HLog,
    PoT,
    APoT,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::HLog, Method::PoT, Method::APoT];

    pub fn name(self) -> &'static str {
        match self {
            Method::HLog => "hlog",
            Method::PoT => "pot",
            Method::APoT => "apot",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hlog" => Ok(Method::HLog),
            "pot" => Ok(Method::PoT),
            "apot" => Ok(Method::APoT),
            other => Err(Error::InvalidParameter(format!(
                "unknown quantization method {other:?} (expected hlog, pot or apot)"
            ))),
        }
    }
}

/// Positive quantization levels of one method at one bit-width, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelTable {
    method: Method,
    bits: u32,
    levels: Vec<u32>,
}

impl LevelTable {
    pub const MIN_BITS: u32 = 2;
    pub const MAX_BITS: u32 = 8;

    pub fn new(method: Method, bits: u32) -> Result<Self> {
        if !(Self::MIN_BITS..=Self::MAX_BITS).contains(&bits) {
            return Err(Error::InvalidParameter(format!(
                "bit-width {bits} outside {}..={}",
                Self::MIN_BITS,
                Self::MAX_BITS
            )));
        }
        let mut levels: Vec<u32> = (0..bits).map(|i| 1 << i).collect();
        match method {
            Method::PoT => {}
            // midpoints 2^(i-1) + 2^i for i in 1..=bits-2
            Method::HLog => levels.extend((1..bits.saturating_sub(1)).map(|i| (1 << (i - 1)) + (1 << i))),
            Method::APoT => {
                for i in 1..bits {
                    levels.extend((0..i).map(|j| (1 << i) + (1 << j)));
                }
            }
        }
        levels.sort_unstable();
        levels.dedup();
        Ok(Self {
            method,
            bits,
            levels,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Nearest level by table search, ties to the larger level. Zero stays zero.
    pub fn project(&self, magnitude: u32) -> u32 {
        if magnitude == 0 {
            return 0;
        }
        let idx = self.levels.partition_point(|&l| l < magnitude);
        match (idx.checked_sub(1).map(|i| self.levels[i]), self.levels.get(idx)) {
            (Some(below), Some(&above)) => {
                if magnitude - below < above - magnitude {
                    below
                } else {
                    above
                }
            }
            (None, Some(&above)) => above,
            (Some(below), None) => below,
            (None, None) => unreachable!("level tables are never empty"),
        }
    }

    pub fn project_signed(&self, x: i32) -> i32 {
        let q = self.project(x.unsigned_abs()) as i32;
        if x < 0 {
            -q
        } else {
            q
        }
    }
}

/// HLog level table, `{2^0, 2^1, 2^0+2^1, 2^2, ..., 2^(n-3)+2^(n-2), 2^(n-1)}`.
pub fn hlog_levels(bits: u32) -> Result<LevelTable> {
    LevelTable::new(Method::HLog, bits)
}

/// Projection error over the signed 8-bit domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Relative error over nonzero inputs.
    pub max_rel: f64,
    pub mean_rel: f64,
}

pub fn error_stats(table: &LevelTable) -> ErrorStats {
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0;
    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0;
    let mut nonzero = 0usize;
    for x in i32::from(i8::MIN)..=i32::from(i8::MAX) {
        let err = f64::from((table.project_signed(x) - x).abs());
        max_abs = max_abs.max(err);
        sum_abs += err;
        if x != 0 {
            let rel = err / f64::from(x.abs());
            max_rel = max_rel.max(rel);
            sum_rel += rel;
            nonzero += 1;
        }
    }
    ErrorStats {
        max_abs,
        mean_abs: sum_abs / 256.0,
        max_rel,
        mean_rel: sum_rel / nonzero as f64,
    }
}
