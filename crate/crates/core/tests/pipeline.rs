use std::fs;

use localsparse::cli;
use localsparse::io::{render_report, write_tensor, ReportFormat, RunConfig, TensorFile};
use localsparse::perfsim::simulate;
use localsparse::refblock::{dense_forward, sparse_forward, synthetic_block, FidelityReport, MacCount};
use localsparse::sparsity::{predict_plan, PlanSource, SparsityPlan};

const SMALL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/small.toml");

#[test]
fn predict_plan_forward_simulate() {
    let cfg = RunConfig::load(SMALL).unwrap();
    let (x, w) = cli::load_block(&cfg).unwrap();
    let plan = predict_plan(&x, &w.wq, &w.wk, &cfg.spls).unwrap();
    assert_eq!(plan.source(), PlanSource::Predicted);

    let dense = dense_forward(&x, &w).unwrap();
    let sparse = sparse_forward(&x, &w, &plan).unwrap();
    assert_eq!(sparse.macs, MacCount::for_plan(&plan, cfg.spls.d_model, cfg.spls.d_ff));
    assert!(sparse.macs.total < dense.macs.total);
    let fid = FidelityReport::compare(&dense.output, &sparse.output).unwrap();
    assert!(fid.cosine > 0.5, "{fid:?}");

    let report = simulate(&plan, &cfg.spls, &cfg.hardware).unwrap();
    assert!(report.speedup_total >= 1.0);
    assert!(report.dynamic.makespan <= report.progressive.makespan);

    // a dense plan runs the same arithmetic as the dense traversal
    let all = SparsityPlan::dense(cfg.spls.seq_len, cfg.spls.heads, cfg.spls.window);
    let same = sparse_forward(&x, &w, &all).unwrap();
    assert_eq!(same.output, dense.output);
    assert_eq!(same.macs, dense.macs);
}

#[test]
fn tensor_files_reproduce_synthetic_run() {
    let cfg = RunConfig::load(SMALL).unwrap();
    let (x, w) = synthetic_block(&cfg.spls, 8, 0.05, cfg.seed);
    let dir = tempfile::tempdir().unwrap();
    for (name, t) in [("x", &x), ("wq", &w.wq), ("wk", &w.wk), ("wv", &w.wv), ("wo", &w.wo), ("w1", &w.w1), ("w2", &w.w2)] {
        write_tensor(dir.path().join(format!("{name}.esat")), &TensorFile::from_qtensor(t)).unwrap();
    }
    let text = fs::read_to_string(SMALL).unwrap();
    let files = text.replace(
        "source = \"synthetic\"\ncluster = 8\nnoise = 0.05",
        "source = \"files\"\ninput = \"x.esat\"\nwq = \"wq.esat\"\nwk = \"wk.esat\"\nwv = \"wv.esat\"\n\
         wo = \"wo.esat\"\nw1 = \"w1.esat\"\nw2 = \"w2.esat\"",
    );
    assert_ne!(files, text);
    let path = dir.path().join("files.toml");
    fs::write(&path, files).unwrap();
    let from_files = RunConfig::load(&path).unwrap();

    let a = cli::run(&cfg).unwrap();
    let b = cli::run(&from_files).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rendering_is_byte_stable() {
    let cfg = RunConfig::load(SMALL).unwrap();
    for format in [ReportFormat::Json, ReportFormat::Csv] {
        let one = render_report(&cli::simulate(&cfg).unwrap(), format).unwrap();
        let two = render_report(&cli::simulate(&cfg).unwrap(), format).unwrap();
        assert_eq!(one, two);
    }
    let one = render_report(&cli::run(&cfg).unwrap(), ReportFormat::Json).unwrap();
    let two = render_report(&cli::run(&cfg).unwrap(), ReportFormat::Json).unwrap();
    assert_eq!(one, two);
}
