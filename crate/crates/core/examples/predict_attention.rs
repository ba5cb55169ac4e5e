//! Predicted attention of one head on a synthetic block, then row-wise top-k.

use localsparse::prediction::{predict_heads, topk_rows};
use localsparse::refblock::synthetic_block;
use localsparse::sparsity::SplsConfig;

fn main() -> localsparse::Result<()> {
    let cfg = SplsConfig {
        seq_len: 16,
        d_model: 64,
        heads: 4,
        d_ff: 128,
        ffn_threshold: 2,
        k_ratio: 0.25,
        ..SplsConfig::default()
    };
    let (x, w) = synthetic_block(&cfg, 4, 0.05, 1);
    let pams = predict_heads(&x, &w.wq, &w.wk, cfg.heads)?;
    let spa = topk_rows(&pams[0], cfg.k_ratio)?;
    println!("head 0, keep {} of {} per row", spa.kept_in_row(0), spa.len());
    for i in 0..spa.len() {
        let row: String = (0..spa.len()).map(|j| if spa.is_kept(i, j) { '#' } else { '.' }).collect();
        println!("{i:>3} {row}");
    }
    Ok(())
}
