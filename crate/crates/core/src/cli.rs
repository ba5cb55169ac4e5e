//! Subcommands behind the `localsparse` binary.
//!
//! Each command is also a library function returning its report, so callers
//! can skip the argument parsing.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    read_tensor, render_report, to_csv_rows, write_tensor, ReportFormat, RunConfig, SweepPoint,
    TensorFile, WeightSource,
};
use crate::perfsim::{simulate as simulate_plan, CycleReport};
use crate::prediction::{keep_count, predict_heads, Pam};
use crate::quant::{error_stats, LevelTable, Method};
use crate::refblock::{
    dense_forward, reduction_report, sparse_forward, synthetic_block, BlockWeights, FidelityReport,
    MacCount, ReductionReport,
};
use crate::sparsity::{plan_from_pams, synthetic_plan, PlanSummary, SparsityPlan};
use crate::tensor::QTensor;

#[derive(Debug, Parser)]
#[command(name = "localsparse", version, about = "Local-similarity sparsity prediction and cycle simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the quantization levels of one method.
    QuantTable {
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 8)]
        bits: u32,
        /// Also print projection error over [-128, 127].
        #[arg(long)]
        errors: bool,
    },
    /// Projection error of every method side by side.
    CompareQuant {
        #[arg(long, default_value_t = 8)]
        bits: u32,
    },
    /// Predicted attention per head; optionally write each PAM as an int32 tensor.
    Predict {
        #[command(flatten)]
        io: ReportArgs,
        #[arg(long)]
        pam_dir: Option<PathBuf>,
    },
    /// Sparsity plan summary from predicted attention.
    Plan(ReportArgs),
    /// Dense and sparse block execution: MACs, reductions, fidelity.
    Run(ReportArgs),
    /// Cycle report for the configured plan.
    Simulate(ReportArgs),
    /// CSV over the (k, s, f, w) grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    pub format: ReportFormat,
}

/// Input and weights named by the config.
pub fn load_block(cfg: &RunConfig) -> Result<(QTensor, BlockWeights)> {
    let s = &cfg.spls;
    let (x, w) = match &cfg.weights {
        WeightSource::Synthetic { cluster, noise } => synthetic_block(s, *cluster, *noise, cfg.seed),
        WeightSource::Files {
            input,
            wq,
            wk,
            wv,
            wo,
            w1,
            w2,
            ln1_gain,
            ln1_bias,
            ln2_gain,
            ln2_bias,
        } => {
            let q = |p: &PathBuf| read_tensor(cfg.resolve(p))?.to_qtensor();
            let vec_or = |p: &Option<PathBuf>, fill: f64| -> Result<Vec<f64>> {
                match p {
                    Some(p) => Ok(read_tensor(cfg.resolve(p))?.to_real()?.into_vec()),
                    None => Ok(vec![fill; s.d_model]),
                }
            };
            let w = BlockWeights {
                wq: q(wq)?,
                wk: q(wk)?,
                wv: q(wv)?,
                wo: q(wo)?,
                w1: q(w1)?,
                w2: q(w2)?,
                ln1_gain: vec_or(ln1_gain, 1.0)?,
                ln1_bias: vec_or(ln1_bias, 0.0)?,
                ln2_gain: vec_or(ln2_gain, 1.0)?,
                ln2_bias: vec_or(ln2_bias, 0.0)?,
                heads: s.heads,
            };
            (q(input)?, w)
        }
    };
    w.validate()?;
    if x.shape() != (s.seq_len, s.d_model) || w.d_ff() != s.d_ff {
        return Err(Error::DimensionMismatch {
            op: "config vs tensors",
            left: (x.rows(), w.d_ff()),
            right: (s.seq_len, s.d_ff),
        });
    }
    Ok((x, w))
}

pub fn quant_table(method: Method, bits: u32, errors: bool) -> Result<String> {
    let table = LevelTable::new(method, bits)?;
    let mut s = String::new();
    let levels: Vec<String> = table.levels().iter().map(u32::to_string).collect();
    writeln!(s, "{} {}-bit: {} levels", method.name(), bits, levels.len()).unwrap();
    writeln!(s, "{}", levels.join(" ")).unwrap();
    if errors {
        let e = error_stats(&table);
        writeln!(
            s,
            "max_abs {} mean_abs {:.6} max_rel {:.6} mean_rel {:.6}",
            e.max_abs, e.mean_abs, e.max_rel, e.mean_rel
        )
        .unwrap();
    }
    Ok(s)
}

pub fn compare_quant(bits: u32) -> Result<String> {
    let mut s = format!("{:<6} {:>6} {:>8} {:>10} {:>10} {:>10}\n", "method", "levels", "max_abs", "mean_abs", "max_rel", "mean_rel");
    for m in Method::ALL {
        let t = LevelTable::new(m, bits)?;
        let e = error_stats(&t);
        writeln!(
            s,
            "{:<6} {:>6} {:>8} {:>10.4} {:>10.4} {:>10.4}",
            m.name(),
            t.levels().len(),
            e.max_abs,
            e.mean_abs,
            e.max_rel,
            e.mean_rel
        )
        .unwrap();
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamSummary {
    pub head: usize,
    pub min: i32,
    pub max: i32,
    pub kept_per_row: usize,
}

pub fn predict(cfg: &RunConfig) -> Result<(Vec<Pam>, Vec<PamSummary>)> {
    let (x, w) = load_block(cfg)?;
    let pams = predict_heads(&x, &w.wq, &w.wk, cfg.spls.heads)?;
    let summary = pams
        .iter()
        .map(|p| PamSummary {
            head: p.head,
            min: p.scores.as_slice().iter().copied().min().unwrap_or(0),
            max: p.scores.as_slice().iter().copied().max().unwrap_or(0),
            kept_per_row: keep_count(cfg.spls.k_ratio, p.len()),
        })
        .collect();
    Ok((pams, summary))
}

/// Plan predicted from the configured block.
pub fn predicted_plan(cfg: &RunConfig) -> Result<SparsityPlan> {
    let (x, w) = load_block(cfg)?;
    let pams = predict_heads(&x, &w.wq, &w.wk, cfg.spls.heads)?;
    plan_from_pams(&pams, &cfg.spls)
}

pub fn plan(cfg: &RunConfig) -> Result<PlanSummary> {
    Ok(predicted_plan(cfg)?.summary())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dense_macs: MacCount,
    pub sparse_macs: MacCount,
    /// Closed-form count from the plan's set sizes.
    pub analytic_macs: MacCount,
    pub reduction: ReductionReport,
    pub fidelity: FidelityReport,
    pub plan: PlanSummary,
}

fn run_with(x: &QTensor, w: &BlockWeights, plan: &SparsityPlan, dense: &crate::refblock::BlockOutput) -> Result<RunReport> {
    let sparse = sparse_forward(x, w, plan)?;
    let analytic = MacCount::for_plan(plan, w.d_model(), w.d_ff());
    if analytic != sparse.macs {
        return Err(Error::Invariant(format!(
            "counted {:?}, formula gives {:?}",
            sparse.macs, analytic
        )));
    }
    Ok(RunReport {
        dense_macs: dense.macs,
        sparse_macs: sparse.macs,
        analytic_macs: analytic,
        reduction: reduction_report(&dense.macs, &sparse.macs)?,
        fidelity: FidelityReport::compare(&dense.output, &sparse.output)?,
        plan: plan.summary(),
    })
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let (x, w) = load_block(cfg)?;
    let pams = predict_heads(&x, &w.wq, &w.wk, cfg.spls.heads)?;
    let plan = plan_from_pams(&pams, &cfg.spls)?;
    let dense = dense_forward(&x, &w)?;
    run_with(&x, &w, &plan, &dense)
}

/// Synthetic plan when the config has a `[profile]`, otherwise the predicted plan.
pub fn simulate(cfg: &RunConfig) -> Result<CycleReport> {
    let plan = match cfg.profile {
        Some(p) => synthetic_plan(&cfg.spls, p, cfg.seed)?,
        None => predicted_plan(cfg)?,
    };
    simulate_plan(&plan, &cfg.spls, &cfg.hardware)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_ratio: f64,
    pub similarity_threshold: f64,
    pub ffn_threshold: usize,
    pub window: usize,
    pub q_sparsity: f64,
    pub kv_sparsity: f64,
    pub attention_sparsity: f64,
    pub ffn_sparsity: f64,
    pub reduction_qkv: f64,
    pub reduction_attention: f64,
    pub reduction_ffn: f64,
    pub reduction_total: f64,
    pub max_abs_diff: f64,
    pub cosine: f64,
    pub dense_cycles: u64,
    pub sparse_cycles: u64,
    pub speedup_total: f64,
}

pub const SWEEP_HEADER: [&str; 17] = [
    "k_ratio",
    "similarity_threshold",
    "ffn_threshold",
    "window",
    "q_sparsity",
    "kv_sparsity",
    "attention_sparsity",
    "ffn_sparsity",
    "reduction_qkv",
    "reduction_attention",
    "reduction_ffn",
    "reduction_total",
    "max_abs_diff",
    "cosine",
    "dense_cycles",
    "sparse_cycles",
    "speedup_total",
];

/// One row per grid point, in grid order whatever the execution order.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let points = cfg.sweep.points(&cfg.spls)?;
    let (x, w) = load_block(cfg)?;
    let pams = predict_heads(&x, &w.wq, &w.wk, cfg.spls.heads)?;
    let dense = dense_forward(&x, &w)?;
    points
        .par_iter()
        .map(|p| sweep_point(cfg, p, &x, &w, &pams, &dense))
        .collect()
}

fn sweep_point(
    cfg: &RunConfig,
    p: &SweepPoint,
    x: &QTensor,
    w: &BlockWeights,
    pams: &[Pam],
    dense: &crate::refblock::BlockOutput,
) -> Result<SweepRow> {
    let spls = p.apply(&cfg.spls);
    let plan = plan_from_pams(pams, &spls)?;
    let r = run_with(x, w, &plan, dense)?;
    let c = simulate_plan(&plan, &spls, &cfg.hardware)?;
    Ok(SweepRow {
        k_ratio: p.k_ratio,
        similarity_threshold: p.similarity_threshold,
        ffn_threshold: p.ffn_threshold,
        window: p.window,
        q_sparsity: r.plan.q_sparsity,
        kv_sparsity: r.plan.kv_sparsity,
        attention_sparsity: r.plan.attention_sparsity,
        ffn_sparsity: r.plan.ffn_sparsity,
        reduction_qkv: r.reduction.qkv,
        reduction_attention: r.reduction.attention,
        reduction_ffn: r.reduction.ffn,
        reduction_total: r.reduction.total,
        max_abs_diff: r.fidelity.max_abs_diff,
        cosine: r.fidelity.cosine,
        dense_cycles: c.dense.makespan,
        sparse_cycles: c.dynamic.makespan,
        speedup_total: c.speedup_total,
    })
}

fn emit(text: &str, out: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report<T: Serialize>(r: &T, a: &ReportArgs, stdout: &mut dyn Write) -> Result<()> {
    emit(&render_report(r, a.format)?, a.out.as_ref(), stdout)
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::QuantTable { method, bits, errors } => {
            emit(&quant_table(method.parse()?, bits, errors)?, None, stdout)
        }
        Command::CompareQuant { bits } => emit(&compare_quant(bits)?, None, stdout),
        Command::Predict { io, pam_dir } => {
            let cfg = RunConfig::load(&io.config)?;
            let (pams, summary) = predict(&cfg)?;
            if let Some(dir) = pam_dir {
                fs::create_dir_all(&dir)?;
                for p in &pams {
                    write_tensor(dir.join(format!("pam_h{}.esat", p.head)), &TensorFile::from_i32(&p.scores, 1.0))?;
                }
            }
            report(&summary, &io, stdout)
        }
        Command::Plan(a) => report(&plan(&RunConfig::load(&a.config)?)?, &a, stdout),
        Command::Run(a) => report(&run(&RunConfig::load(&a.config)?)?, &a, stdout),
        Command::Simulate(a) => report(&simulate(&RunConfig::load(&a.config)?)?, &a, stdout),
        Command::Sweep { config, out } => {
            let rows = sweep(&RunConfig::load(&config)?)?;
            emit(&to_csv_rows(&SWEEP_HEADER, &rows)?, out.as_ref(), stdout)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return 1;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
