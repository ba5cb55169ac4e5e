use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::BlockWeights;
use crate::sparsity::SplsConfig;
use crate::tensor::{Matrix, QTensor};

fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| std * rng.sample::<f64, _>(StandardNormal))
}

/// Tokens in runs of `cluster` share a Gaussian center; each adds `noise`-scaled jitter.
pub fn synthetic_input(len: usize, d: usize, cluster: usize, noise: f64, rng: &mut impl Rng) -> QTensor {
    let cluster = cluster.max(1);
    let centers = gaussian(rng, len.div_ceil(cluster), d, 1.0);
    let x = Matrix::from_fn(len, d, |i, j| {
        centers.get(i / cluster, j) + noise * rng.sample::<f64, _>(StandardNormal)
    });
    QTensor::quantize(&x)
}

/// Gaussian weights with `1/sqrt(fan_in)` spread, unit gains, zero biases.
pub fn synthetic_weights(d: usize, heads: usize, d_ff: usize, rng: &mut impl Rng) -> BlockWeights {
    let mut q = |rows: usize, cols: usize| QTensor::quantize(&gaussian(rng, rows, cols, 1.0 / (rows as f64).sqrt()));
    BlockWeights {
        wq: q(d, d),
        wk: q(d, d),
        wv: q(d, d),
        wo: q(d, d),
        w1: q(d, d_ff),
        w2: q(d_ff, d),
        ln1_gain: vec![1.0; d],
        ln1_bias: vec![0.0; d],
        ln2_gain: vec![1.0; d],
        ln2_bias: vec![0.0; d],
        heads,
    }
}

/// Input and weights for `cfg`, reproducible from `seed`.
pub fn synthetic_block(cfg: &SplsConfig, cluster: usize, noise: f64, seed: u64) -> (QTensor, BlockWeights) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = synthetic_weights(cfg.d_model, cfg.heads, cfg.d_ff, &mut rng);
    let x = synthetic_input(cfg.seq_len, cfg.d_model, cluster, noise, &mut rng);
    (x, w)
}
