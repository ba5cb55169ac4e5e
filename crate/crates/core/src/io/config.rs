//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [spls]
//! k_ratio = 0.2
//! similarity_threshold = 0.4
//! ffn_threshold = 6
//! window = 8
//! seq_len = 128
//! d_model = 768
//! heads = 12
//! d_ff = 3072
//!
//! [hardware]          # optional; defaults to a 16 x 64 array at 500 MHz
//! pe_rows = 16
//!
//! [weights]           # or: source = "files", input = "x.esat", wq = ..., w2 = ...
//! source = "synthetic"
//! cluster = 8
//! noise = 0.1
//!
//! [profile]           # optional; simulate a plan with these kept fractions
//! q_keep = 0.4
//! kv_keep = 0.4
//! ffn_keep = 0.5
//!
//! [sweep]             # optional axes; a missing axis uses the [spls] value
//! k_ratio = [0.1, 0.2]
//! similarity_threshold = [0.2, 0.4]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perfsim::HardwareConfig;
use crate::sparsity::{SplsConfig, SyntheticProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSource {
    /// Clustered Gaussian tokens and Gaussian weights drawn from the run seed.
    Synthetic {
        #[serde(default = "default_cluster")]
        cluster: usize,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    /// Tensor files; relative paths resolve against the config file's directory.
    Files {
        input: PathBuf,
        wq: PathBuf,
        wk: PathBuf,
        wv: PathBuf,
        wo: PathBuf,
        w1: PathBuf,
        w2: PathBuf,
        ln1_gain: Option<PathBuf>,
        ln1_bias: Option<PathBuf>,
        ln2_gain: Option<PathBuf>,
        ln2_bias: Option<PathBuf>,
    },
}

fn default_cluster() -> usize {
    8
}

fn default_noise() -> f64 {
    0.1
}

impl Default for WeightSource {
    fn default() -> Self {
        WeightSource::Synthetic {
            cluster: default_cluster(),
            noise: default_noise(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub k_ratio: Option<Vec<f64>>,
    pub similarity_threshold: Option<Vec<f64>>,
    pub ffn_threshold: Option<Vec<usize>>,
    pub window: Option<Vec<usize>>,
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k_ratio: f64,
    pub similarity_threshold: f64,
    pub ffn_threshold: usize,
    pub window: usize,
}

impl SweepGrid {
    /// Cartesian product in `k`, `s`, `f`, `w` order, `w` varying fastest.
    pub fn points(&self, base: &SplsConfig) -> Result<Vec<SweepPoint>> {
        fn axis<T: Copy>(name: &str, v: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
            match v {
                None => Ok(vec![base]),
                Some(v) if v.is_empty() => Err(Error::Config(format!("sweep axis {name} is empty"))),
                Some(v) => Ok(v.clone()),
            }
        }
        let ks = axis("k_ratio", &self.k_ratio, base.k_ratio)?;
        let ss = axis("similarity_threshold", &self.similarity_threshold, base.similarity_threshold)?;
        let fs = axis("ffn_threshold", &self.ffn_threshold, base.ffn_threshold)?;
        let ws = axis("window", &self.window, base.window)?;
        let mut out = Vec::with_capacity(ks.len() * ss.len() * fs.len() * ws.len());
        for &k_ratio in &ks {
            for &similarity_threshold in &ss {
                for &ffn_threshold in &fs {
                    for &window in &ws {
                        out.push(SweepPoint {
                            k_ratio,
                            similarity_threshold,
                            ffn_threshold,
                            window,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

impl SweepPoint {
    pub fn apply(&self, base: &SplsConfig) -> SplsConfig {
        SplsConfig {
            k_ratio: self.k_ratio,
            similarity_threshold: self.similarity_threshold,
            ffn_threshold: self.ffn_threshold,
            window: self.window,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub spls: SplsConfig,
    #[serde(default)]
    pub hardware: HardwareConfig,
    #[serde(default)]
    pub weights: WeightSource,
    pub profile: Option<SyntheticProfile>,
    #[serde(default)]
    pub sweep: SweepGrid,
    /// Directory that relative weight paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// 1-based line of `[table]` in `text`, if present.
fn table_line(text: &str, table: &str) -> Option<usize> {
    let header = format!("[{table}]");
    text.lines().position(|l| l.trim_start().starts_with(&header)).map(|i| i + 1)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let at = |table: &str, e: Error| {
            let line = table_line(text, table).map_or(String::new(), |n| format!(" (line {n})"));
            Error::Config(format!("[{table}]{line}: {e}"))
        };
        cfg.spls.validate().map_err(|e| at("spls", e))?;
        cfg.hardware.validate().map_err(|e| at("hardware", e))?;
        if let WeightSource::Synthetic { cluster, noise } = cfg.weights {
            if cluster == 0 || !(noise >= 0.0 && noise.is_finite()) {
                return Err(at(
                    "weights",
                    Error::InvalidParameter("cluster must be >= 1 and noise finite and >= 0".into()),
                ));
            }
        }
        if let Some(p) = &cfg.profile {
            synthetic_check(p).map_err(|e| at("profile", e))?;
        }
        cfg.sweep.points(&cfg.spls).map_err(|e| at("sweep", e))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn synthetic_check(p: &SyntheticProfile) -> Result<()> {
    for v in [p.q_keep, p.kv_keep, p.ffn_keep] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("kept fraction {v} outside [0, 1]")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
seed = 3

[spls]
k_ratio = 0.2
similarity_threshold = 0.4
ffn_threshold = 2
window = 8
seq_len = 16
d_model = 32
heads = 4
d_ff = 64
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.hardware, HardwareConfig::default());
        assert_eq!(c.weights, WeightSource::default());
        assert_eq!(c.sweep.points(&c.spls).unwrap().len(), 1);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = format!("{BASIC}bogus = 1\n");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line"), "{err}");
    }

    #[test]
    fn semantic_error_names_table_line() {
        let text = BASIC.replace("heads = 4", "heads = 5");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("[spls] (line 4)"), "{err}");
    }

    #[test]
    fn grid_points() {
        let text = format!("{BASIC}\n[sweep]\nk_ratio = [0.1, 0.2]\nwindow = [2, 8]\n");
        let c = RunConfig::from_toml(&text).unwrap();
        let pts = c.sweep.points(&c.spls).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].k_ratio, pts[1].window), (0.1, 8));
        let empty = format!("{BASIC}\n[sweep]\nwindow = []\n");
        assert!(RunConfig::from_toml(&empty).is_err());
    }

    #[test]
    fn file_source() {
        let text = format!(
            "{BASIC}\n[weights]\nsource = \"files\"\ninput = \"x.esat\"\nwq = \"q\"\nwk = \"k\"\nwv = \"v\"\nwo = \"o\"\nw1 = \"1\"\nw2 = \"2\"\n"
        );
        let c = RunConfig::from_toml(&text).unwrap();
        assert!(matches!(c.weights, WeightSource::Files { .. }));
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::from_toml(BASIC).unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }
}
