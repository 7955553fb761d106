#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tagrec_core::config::PipelineConfig;
use tagrec_core::pipeline::write_toy_inputs;

pub fn tagrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tagrec"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> String {
    let out = tagrec(args);
    assert!(
        out.status.success(),
        "tagrec {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Toy inputs plus a config file under `dir`; returns the config path.
pub fn toy_config(dir: &Path, edit: impl FnOnce(&mut PipelineConfig)) -> PathBuf {
    let mut cfg = write_toy_inputs(dir, 7).unwrap();
    edit(&mut cfg);
    let path = dir.join("tagrec.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    path
}

pub struct ToyRun {
    pub config: PathBuf,
    pub artifacts: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub table: String,
}

/// ingest → encoder → embed → five factorization variants → evaluate.
pub fn run_toy_pipeline(dir: &Path) -> ToyRun {
    let config = toy_config(dir, |_| {});
    let c = config.to_str().unwrap();
    ok(&["ingest", "--config", c]);
    ok(&["features", "--config", c, "--kind", "tags"]);
    ok(&["train-encoder", "--config", c]);
    ok(&["embed", "--config", c]);
    let artifacts = dir.join("artifacts");
    let variants: [(&str, &[&str]); 5] = [
        ("bpr", &["--loss", "bpr"]),
        ("warp", &["--loss", "warp"]),
        ("warp-tfidf", &["--loss", "warp", "--item-features", "tfidf"]),
        ("warp-tags", &["--loss", "warp", "--item-features", "tags"]),
        ("warp-han", &["--loss", "warp", "--metadata", "bias+factors"]),
    ];
    let mut checkpoints = Vec::new();
    for (name, flags) in variants {
        let out = artifacts.join(format!("{name}.json"));
        let mut args = vec!["train-mf", "--config", c, "--model-out", out.to_str().unwrap()];
        args.extend_from_slice(flags);
        ok(&args);
        checkpoints.push(out);
    }
    let mut args = vec!["evaluate", "--config", c];
    args.extend(checkpoints.iter().map(|p| p.to_str().unwrap()));
    let table = ok(&args);
    ToyRun {
        config,
        artifacts,
        checkpoints,
        table,
    }
}
