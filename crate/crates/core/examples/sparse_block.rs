//! Dense versus plan-driven execution of one block: MACs, reductions, fidelity.

use localsparse::prediction::predict_heads;
use localsparse::refblock::{dense_forward, reduction_report, sparse_forward, synthetic_block, FidelityReport, MacCount};
use localsparse::sparsity::{plan_from_pams, SparsityPlan, SplsConfig};

fn main() -> localsparse::Result<()> {
    let cfg = SplsConfig {
        seq_len: 64,
        d_model: 128,
        heads: 4,
        d_ff: 512,
        ffn_threshold: 3,
        k_ratio: 0.12,
        similarity_threshold: 0.4,
        ..SplsConfig::default()
    };
    let (x, w) = synthetic_block(&cfg, 8, 0.05, 9);
    let dense = dense_forward(&x, &w)?;

    let same = sparse_forward(&x, &w, &SparsityPlan::dense(cfg.seq_len, cfg.heads, cfg.window))?;
    println!("dense plan identical: {}", same == dense);

    let pams = predict_heads(&x, &w.wq, &w.wk, cfg.heads)?;
    let plan = plan_from_pams(&pams, &cfg)?;
    let sparse = sparse_forward(&x, &w, &plan)?;
    assert_eq!(sparse.macs, MacCount::for_plan(&plan, cfg.d_model, cfg.d_ff));
    let r = reduction_report(&dense.macs, &sparse.macs)?;
    println!("dense  {:?}", dense.macs);
    println!("sparse {:?}", sparse.macs);
    println!(
        "reduction: qkv {:.1}%  attention {:.1}%  ffn {:.1}%  total {:.1}%",
        100.0 * r.qkv,
        100.0 * r.attention,
        100.0 * r.ffn,
        100.0 * r.total
    );
    println!("{:?}", FidelityReport::compare(&dense.output, &sparse.output)?);

    let bert = MacCount::dense(512, 1024, 4096).scaled(24);
    println!("BERT-Large shape: {} MACs, attention side {:.2}%", bert.total, 100.0 * bert.mha_share());
    Ok(())
}
