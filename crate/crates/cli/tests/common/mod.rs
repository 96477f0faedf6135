#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lgdlab_cli::config::RunConfig;
use lgdlab_core::search::{Dim, ParamSpace};
use lgdlab_core::MonthIndex;

pub fn run(args: &[&str]) -> i32 {
    lgdlab_cli::dispatch(std::iter::once("lgdlab").chain(args.iter().copied()))
}

pub fn run_ok(args: &[&str]) {
    let code = run(args);
    assert_eq!(code, 0, "command failed with code {code}: {args:?}");
}

pub fn tiny_space() -> ParamSpace {
    ParamSpace {
        learning_rate: Dim::Values(vec![0.3]),
        max_depth: Dim::Values(vec![3.0]),
        n_estimators: Dim::Values(vec![10.0, 15.0]),
        subsample: Dim::Values(vec![1.0]),
        min_child_weight: Dim::Values(vec![1.0]),
        colsample_bytree: Dim::Values(vec![1.0]),
    }
}

/// Small portfolio plus a search space cheap enough for repeated end-to-end
/// runs in tests.
pub fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.gen.seed = 5;
    cfg.gen.n_borrowers = 60;
    cfg.gen.end = MonthIndex::from_ym(2012, 12).unwrap();
    cfg.search.space = tiny_space();
    cfg.search.n_iter = 2;
    cfg.search.k = 2;
    cfg.sensitivity.hyp_space = ParamSpace {
        learning_rate: Dim::Range(0.1, 0.3),
        max_depth: Dim::IntRange(2, 4),
        n_estimators: Dim::IntRange(8, 16),
        subsample: Dim::Range(0.7, 1.0),
        min_child_weight: Dim::IntRange(1, 3),
        colsample_bytree: Dim::Range(0.7, 1.0),
    };
    cfg.sensitivity.hyp_n_iter = 2;
    cfg.sensitivity.n_per_dim = 2;
    cfg.train.params.learning_rate = 0.3;
    cfg.train.params.max_depth = 3;
    cfg.train.params.n_estimators = 10;
    cfg
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

/// Data rows of a provenance-headed CSV: comment and header lines stripped,
/// fields split on commas.
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let _header = lines.next().expect("header row");
    lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

pub fn collect_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}
