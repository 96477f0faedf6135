//! Command-line front end: subcommand parsing, config overrides and the
//! orchestration of generation, LGD engines, feature building, model fitting
//! and the benchmark protocol. All outputs are seeded and bit-reproducible.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use lgdlab_core::cashflow::realized_lgd_portfolio;
use lgdlab_core::delta_os::rlgd_delta_os_portfolio;
use lgdlab_core::eval::{
    correlation_report, duration_histogram, lgd_histogram, run_benchmark, run_sensitivity,
    scatter_sample, BenchReport, SplitUnit,
};
use lgdlab_core::features::{
    build_feature_matrix, design_matrix, spell_keys, targets, FeatureRow, FEATURE_NAMES,
};
use lgdlab_core::gbt::{train, GbtModel};
use lgdlab_core::search::{grid_search, random_search, SearchResult};
use lgdlab_core::synth::{generate_macro, generate_portfolio};
use lgdlab_core::{DefaultSpell, LgdRecord, MacroSeries, MonthIndex};

pub mod config;
pub mod io;

use config::RunConfig;
use io::Provenance;

fn parse_month(s: &str) -> Result<MonthIndex, String> {
    s.parse::<MonthIndex>().map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "lgdlab",
    version,
    about = "Realized-LGD engines, synthetic portfolios and boosted-tree benchmarks"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory output files are written to.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Overrides the generator, training and search seeds together.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Directory holding portfolio.csv, macro_quarterly.csv and rates_monthly.csv.
    #[arg(long, value_name = "DIR", default_value = "out")]
    data: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic portfolio with macro series and base rates.
    Gen {
        /// Number of borrowers.
        #[arg(long)]
        borrowers: Option<usize>,
        /// First month of the observation window (YYYY-MM).
        #[arg(long, value_parser = parse_month)]
        start: Option<MonthIndex>,
        /// Last month of the observation window (YYYY-MM).
        #[arg(long, value_parser = parse_month)]
        end: Option<MonthIndex>,
        /// Book every balance decrease as a same-month cash recovery.
        #[arg(long)]
        cashflow_exact: bool,
    },
    /// Realized LGD under the workout and delta-outstanding engines.
    Lgd {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Build the 19-predictor feature matrix from a stored portfolio.
    Features {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit one boosted model with the configured hyperparameters.
    Train {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Cross-validated hyperparameter search over the configured space.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        /// Number of random-search candidates.
        #[arg(long)]
        n_iter: Option<u32>,
        /// Number of cross-validation folds.
        #[arg(long)]
        k: Option<u32>,
        /// Enumerate the whole grid instead of sampling.
        #[arg(long)]
        grid: bool,
        /// Largest grid size accepted before refusing to run.
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
    /// Temporal-split benchmark of both engines and the boosted models.
    Bench {
        #[command(flatten)]
        data: DataArgs,
        /// Number of random-search candidates per model.
        #[arg(long)]
        n_iter: Option<u32>,
        /// Number of cross-validation folds.
        #[arg(long)]
        k: Option<u32>,
        /// Months in the out-of-date holdout.
        #[arg(long)]
        ood_months: Option<u32>,
    },
    /// Hyperparameter and feature-set sensitivity suite.
    Sensitivity {
        #[command(flatten)]
        data: DataArgs,
        /// Number of random-search candidates for the feature-set legs.
        #[arg(long)]
        n_iter: Option<u32>,
        /// Candidates drawn in the widened hyperparameter sweep.
        #[arg(long)]
        hyp_n_iter: Option<u32>,
        /// Number of cross-validation folds.
        #[arg(long)]
        k: Option<u32>,
        /// Months in the out-of-date holdout.
        #[arg(long)]
        ood_months: Option<u32>,
    },
    /// Re-render the CSV view of a stored JSON artifact.
    Report {
        /// JSON artifact produced by train, tune, bench or sensitivity.
        #[arg(long, value_name = "FILE")]
        artifact: PathBuf,
    },
}

/// Parses `args` and runs the selected subcommand. Returns the process exit
/// code: 0 on success, 2 on usage errors, 1 on runtime failures.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("LGDLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow!("LGDLAB_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        // A second init in the same process keeps the first pool; that is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.gen.seed = seed;
        cfg.search.seed = seed;
        cfg.train.params.seed = seed;
    }
    let out = cli.out;
    match cli.command {
        Command::Gen { borrowers, start, end, cashflow_exact } => {
            if let Some(n) = borrowers {
                cfg.gen.n_borrowers = n;
            }
            if let Some(m) = start {
                cfg.gen.start = m;
            }
            if let Some(m) = end {
                cfg.gen.end = m;
            }
            if cashflow_exact {
                cfg.gen.cashflow_exact = true;
            }
            cfg.validate()?;
            cmd_gen(&cfg, &out)
        }
        Command::Lgd { data } => {
            cfg.validate()?;
            cmd_lgd(&cfg, &data.data, &out)
        }
        Command::Features { data } => {
            cfg.validate()?;
            cmd_features(&cfg, &data.data, &out)
        }
        Command::Train { data } => {
            cfg.validate()?;
            cmd_train(&cfg, &data.data, &out)
        }
        Command::Tune { data, n_iter, k, grid, budget } => {
            if let Some(n) = n_iter {
                cfg.search.n_iter = n;
            }
            if let Some(k) = k {
                cfg.search.k = k;
            }
            cfg.validate()?;
            cmd_tune(&cfg, &data.data, &out, grid, budget)
        }
        Command::Bench { data, n_iter, k, ood_months } => {
            if let Some(n) = n_iter {
                cfg.search.n_iter = n;
            }
            if let Some(k) = k {
                cfg.search.k = k;
            }
            if let Some(m) = ood_months {
                cfg.split.ood_months = m;
            }
            cfg.validate()?;
            cmd_bench(&cfg, &data.data, &out)
        }
        Command::Sensitivity { data, n_iter, hyp_n_iter, k, ood_months } => {
            if let Some(n) = n_iter {
                cfg.search.n_iter = n;
            }
            if let Some(n) = hyp_n_iter {
                cfg.sensitivity.hyp_n_iter = n;
            }
            if let Some(k) = k {
                cfg.search.k = k;
            }
            if let Some(m) = ood_months {
                cfg.split.ood_months = m;
            }
            cfg.validate()?;
            cmd_sensitivity(&cfg, &data.data, &out)
        }
        Command::Report { artifact } => {
            cfg.validate()?;
            cmd_report(&artifact, &out)
        }
    }
}

fn provenance(cfg: &RunConfig, seed: u64) -> Provenance {
    Provenance { seed, config_sha256: cfg.sha256_hex() }
}

struct Engines {
    spells: Vec<DefaultSpell>,
    macro_series: MacroSeries,
    cash: Vec<LgdRecord>,
    os: Vec<LgdRecord>,
}

fn run_engines(cfg: &RunConfig, data: &Path) -> Result<Engines> {
    let (spells, macro_series) = io::load_portfolio(data, cfg.discount_addon)?;
    let cash = realized_lgd_portfolio(&spells, &cfg.discount, &macro_series)?;
    let os = rlgd_delta_os_portfolio(&spells, &cfg.discount, &macro_series)?;
    Ok(Engines { spells, macro_series, cash, os })
}

fn features_of(cfg: &RunConfig, engines: &Engines) -> Result<Vec<FeatureRow>> {
    Ok(build_feature_matrix(
        &engines.spells,
        &engines.cash,
        &engines.os,
        &engines.macro_series,
        &cfg.discount,
    )?)
}

fn train_feature_names(cfg: &RunConfig) -> Vec<&str> {
    match &cfg.train.features {
        Some(list) => list.iter().map(String::as_str).collect(),
        None => FEATURE_NAMES.to_vec(),
    }
}

fn print_report(report: &BenchReport) {
    for cell in &report.cells {
        println!(
            "{} {}: mae={} mse={} sd_error={} n={}",
            cell.model.as_str(),
            cell.sample.as_str(),
            cell.metrics.mae,
            cell.metrics.mse,
            cell.metrics.sd_error,
            cell.metrics.n
        );
    }
}

fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<()> {
    let series = generate_macro(cfg.gen.seed, cfg.gen.start, cfg.gen.end)?;
    let spells = generate_portfolio(&cfg.gen, &series)?;
    let prov = provenance(cfg, cfg.gen.seed);
    let rows = io::write_portfolio_csv(&out.join(io::PORTFOLIO_FILE), &prov, &spells)?;
    let quarters = io::write_macro_csv(&out.join(io::MACRO_FILE), &prov, &series)?;
    let months = io::write_rates_csv(&out.join(io::RATES_FILE), &prov, &series)?;
    println!(
        "wrote {} ({} spells, {rows} ledger rows)",
        out.join(io::PORTFOLIO_FILE).display(),
        spells.len()
    );
    println!("wrote {} ({quarters} quarters)", out.join(io::MACRO_FILE).display());
    println!("wrote {} ({months} months)", out.join(io::RATES_FILE).display());
    Ok(())
}

fn cmd_lgd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let engines = run_engines(cfg, data)?;
    let prov = provenance(cfg, cfg.gen.seed);
    let path = out.join("lgd.csv");
    let rows = io::write_lgd_csv(&path, &prov, &engines.cash, &engines.os)?;
    println!("wrote {} ({rows} records)", path.display());
    let points = scatter_sample(
        &engines.spells,
        &engines.cash,
        &engines.os,
        cfg.plots.scatter_max_points,
        cfg.plots.scatter_seed,
    )?;
    let path = out.join("scatter.csv");
    io::write_scatter_csv(&path, &prov, &points)?;
    println!("wrote {} ({} points)", path.display(), points.len());
    Ok(())
}

fn cmd_features(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let engines = run_engines(cfg, data)?;
    let rows = features_of(cfg, &engines)?;
    let prov = provenance(cfg, cfg.gen.seed);
    let path = out.join("features.csv");
    io::write_features_csv(&path, &prov, &rows)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let engines = run_engines(cfg, data)?;
    let rows = features_of(cfg, &engines)?;
    let names = train_feature_names(cfg);
    let matrix = design_matrix(&rows, &names)?;
    let y = targets(&rows);
    let model = train(&cfg.train.params, &matrix, &y)?;
    let prov = provenance(cfg, cfg.train.params.seed);
    let path = out.join("model.json");
    io::write_artifact(&path, io::KIND_MODEL, &prov, &model)?;
    println!(
        "wrote {} ({} trees on {} rows, base score {})",
        path.display(),
        model.trees.len(),
        rows.len(),
        model.base_score
    );
    Ok(())
}

fn cmd_tune(cfg: &RunConfig, data: &Path, out: &Path, grid: bool, budget: usize) -> Result<()> {
    let engines = run_engines(cfg, data)?;
    let rows = features_of(cfg, &engines)?;
    let matrix = design_matrix(&rows, &FEATURE_NAMES)?;
    let y = targets(&rows);
    let s = &cfg.search;
    let result = match s.cv_unit {
        SplitUnit::BySpell => {
            let groups = spell_keys(&rows);
            if grid {
                grid_search(&s.space, s.k, s.seed, budget, &matrix, &y, &groups)?
            } else {
                random_search(&s.space, s.n_iter, s.k, s.seed, &matrix, &y, &groups)?
            }
        }
        SplitUnit::ByRow => {
            let groups: Vec<usize> = (0..rows.len()).collect();
            if grid {
                grid_search(&s.space, s.k, s.seed, budget, &matrix, &y, &groups)?
            } else {
                random_search(&s.space, s.n_iter, s.k, s.seed, &matrix, &y, &groups)?
            }
        }
    };
    let prov = provenance(cfg, s.seed);
    let path = out.join("search_result.json");
    io::write_artifact(&path, io::KIND_SEARCH, &prov, &result)?;
    println!("wrote {}", path.display());
    let path = out.join("candidates.csv");
    io::write_candidates_csv(&path, &prov, &result)?;
    println!("wrote {} ({} candidates)", path.display(), result.candidates.len());
    let best = result.best();
    println!(
        "best candidate {}: mean_mse={} mean_mae={} ({} fits)",
        result.best_index, best.mean_mse, best.mean_mae, result.fits
    );
    Ok(())
}

fn cmd_bench(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let engines = run_engines(cfg, data)?;
    let rows = features_of(cfg, &engines)?;
    let report = run_benchmark(&rows, &cfg.search, &cfg.split)?;
    let prov = provenance(cfg, cfg.search.seed);

    io::write_artifact(&out.join("report.json"), io::KIND_BENCH, &prov, &report)?;
    io::write_report_csv(&out.join("report.csv"), &prov, &report)?;
    io::write_histogram_csv(
        &out.join("lgd_histogram.csv"),
        &prov,
        &lgd_histogram(&engines.cash, cfg.plots.bins)?,
    )?;
    io::write_histogram_csv(
        &out.join("duration_histogram.csv"),
        &prov,
        &duration_histogram(&engines.spells, cfg.plots.bins)?,
    )?;
    let points = scatter_sample(
        &engines.spells,
        &engines.cash,
        &engines.os,
        cfg.plots.scatter_max_points,
        cfg.plots.scatter_seed,
    )?;
    io::write_scatter_csv(&out.join("scatter.csv"), &prov, &points)?;
    io::write_correlations_csv(&out.join("correlations.csv"), &prov, &correlation_report(&rows))?;

    println!(
        "wrote report.json, report.csv, lgd_histogram.csv, duration_histogram.csv, scatter.csv, correlations.csv under {}",
        out.display()
    );
    print_report(&report);
    Ok(())
}

fn cmd_sensitivity(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let engines = run_engines(cfg, data)?;
    let rows = features_of(cfg, &engines)?;
    let report = run_sensitivity(&rows, &cfg.search, &cfg.split, &cfg.sensitivity)?;
    let prov = provenance(cfg, cfg.search.seed);
    io::write_artifact(&out.join("sensitivity.json"), io::KIND_SENSITIVITY, &prov, &report)?;
    io::write_report_csv(&out.join("sensitivity.csv"), &prov, &report)?;
    println!("wrote sensitivity.json, sensitivity.csv under {}", out.display());
    print_report(&report);
    Ok(())
}

fn cmd_report(artifact_path: &Path, out: &Path) -> Result<()> {
    let artifact = io::read_artifact(artifact_path)?;
    let prov = Provenance {
        seed: artifact.seed,
        config_sha256: artifact.config_sha256.clone(),
    };
    match artifact.kind.as_str() {
        io::KIND_MODEL => {
            let model: GbtModel = io::payload_as(&artifact)?;
            let path = out.join("model_summary.csv");
            io::write_model_summary_csv(&path, &prov, &model)?;
            println!("wrote {} ({} trees)", path.display(), model.trees.len());
        }
        io::KIND_SEARCH => {
            let result: SearchResult = io::payload_as(&artifact)?;
            let path = out.join("candidates.csv");
            io::write_candidates_csv(&path, &prov, &result)?;
            println!("wrote {} ({} candidates)", path.display(), result.candidates.len());
        }
        io::KIND_BENCH => {
            let report: BenchReport = io::payload_as(&artifact)?;
            let path = out.join("report.csv");
            io::write_report_csv(&path, &prov, &report)?;
            println!("wrote {} ({} cells)", path.display(), report.cells.len());
        }
        io::KIND_SENSITIVITY => {
            let report: BenchReport = io::payload_as(&artifact)?;
            let path = out.join("sensitivity.csv");
            io::write_report_csv(&path, &prov, &report)?;
            println!("wrote {} ({} cells)", path.display(), report.cells.len());
        }
        other => bail!("unknown artifact kind {other:?} in {}", artifact_path.display()),
    }
    Ok(())
}
