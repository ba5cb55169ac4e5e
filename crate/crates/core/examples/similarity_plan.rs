//! Window similarity across thresholds: critical rows, K/V rows and FFN tokens.

use localsparse::prediction::predict_heads;
use localsparse::refblock::synthetic_block;
use localsparse::sparsity::{plan_from_pams, Role, SplsConfig};

fn main() -> localsparse::Result<()> {
    let base = SplsConfig {
        seq_len: 32,
        d_model: 64,
        heads: 4,
        d_ff: 128,
        ffn_threshold: 3,
        k_ratio: 0.2,
        ..SplsConfig::default()
    };
    // tokens arrive in runs of 8 near-identical rows
    let (x, w) = synthetic_block(&base, 8, 0.05, 3);
    let pams = predict_heads(&x, &w.wq, &w.wk, base.heads)?;
    println!("   s  q_sparsity  kv_sparsity  ffn_sparsity");
    for s in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let cfg = SplsConfig {
            similarity_threshold: s,
            ..base.clone()
        };
        let plan = plan_from_pams(&pams, &cfg)?;
        let sum = plan.summary();
        println!("{s:4.1}  {:10.4}  {:11.4}  {:12.4}", sum.q_sparsity, sum.kv_sparsity, sum.ffn_sparsity);
    }
    let plan = plan_from_pams(&pams, &SplsConfig { similarity_threshold: 0.4, ..base })?;
    let roles: String = plan.head(0).sim_map().roles().iter().map(|r| match r {
        Role::Critical => 'C',
        Role::Similar(_) => 's',
    }).collect();
    println!("head 0 roles at s = 0.4: {roles}");
    println!("ffn representatives: {:?}", plan.ffn_rep());
    Ok(())
}
