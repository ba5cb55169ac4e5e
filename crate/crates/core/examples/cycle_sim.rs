//! Cycle model on the baseline workload: L=128, D=768, 12 heads, 60% Q/KV
//! sparsity, half the tokens in the FFN, across top-k ratios.

use localsparse::perfsim::{simulate, HardwareConfig};
use localsparse::sparsity::{synthetic_plan, SplsConfig, SyntheticProfile};

fn main() -> localsparse::Result<()> {
    let hw = HardwareConfig::default();
    let profile = SyntheticProfile {
        q_keep: 0.4,
        kv_keep: 0.4,
        ffn_keep: 0.5,
    };
    println!("k     spls   prog   dyn    total  attn-util  overall  peak GB/s");
    for k in [0.1, 0.15, 0.2] {
        let cfg = SplsConfig {
            k_ratio: k,
            ..SplsConfig::default()
        };
        let plan = synthetic_plan(&cfg, profile, 42)?;
        let r = simulate(&plan, &cfg, &hw)?;
        println!(
            "{k:<5} {:.3}  {:.3}  {:.3}  {:.3}  {:.4}     {:.4}   {:.2}",
            r.speedup_spls,
            r.speedup_progressive,
            r.speedup_dynamic,
            r.speedup_total,
            r.utilization.attention,
            r.utilization.overall,
            r.peak_bandwidth_demand / 1e9
        );
    }
    Ok(())
}
