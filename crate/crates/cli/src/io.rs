//! File formats: provenance-headed CSVs for data and reports, and JSON
//! artifacts wrapping serialized models and results.
//!
//! Every CSV starts with a `# seed=.. config_sha256=..` comment line, then a
//! header row. Floats are written in shortest round-trip form, so writing and
//! re-reading a file reproduces the exact values.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use lgdlab_core::domain::{consolidate_defaults, validate_spell};
use lgdlab_core::eval::{BenchReport, CorrelationRow, HistBin, ScatterPoint};
use lgdlab_core::features::FeatureRow;
use lgdlab_core::gbt::GbtModel;
use lgdlab_core::search::SearchResult;
use lgdlab_core::{
    DefaultReason, DefaultSpell, FinalStatus, LgdRecord, MacroSeries, MonthIndex, Observation,
    QuarterKey,
};

/// Seed and config hash stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_sha256: String,
}

pub const PORTFOLIO_FILE: &str = "portfolio.csv";
pub const MACRO_FILE: &str = "macro_quarterly.csv";
pub const RATES_FILE: &str = "rates_monthly.csv";

const PORTFOLIO_HEADERS: [&str; 15] = [
    "borrower_id",
    "spell_index",
    "reporting_date",
    "outstanding",
    "cash_recovery",
    "collateral_recovery",
    "cost",
    "write_off",
    "default_date",
    "out_date",
    "reason",
    "final_status",
    "cover_value_index",
    "unsecured_rate",
    "secured_rate",
];

const MACRO_HEADERS: [&str; 5] = ["year", "quarter", "gdp", "employment", "hpi"];
const RATES_HEADERS: [&str; 3] = ["year", "month", "base_rate"];

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn csv_writer(path: &Path, prov: &Provenance) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    let mut file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "# seed={} config_sha256={}", prov.seed, prov.config_sha256)?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn require_headers(rdr: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<()> {
    let got: Vec<String> = rdr
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != expected {
        bail!(
            "{}: header mismatch: expected {expected:?}, got {got:?}",
            file_name(path)
        );
    }
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_portfolio_csv(path: &Path, prov: &Provenance, spells: &[DefaultSpell]) -> Result<u64> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(PORTFOLIO_HEADERS)?;
    let mut rows = 0u64;
    for spell in spells {
        let out_date = spell.out_date.map(|d| d.to_string()).unwrap_or_default();
        for obs in &spell.observations {
            w.write_record([
                spell.borrower_id.to_string(),
                spell.spell_index.to_string(),
                obs.reporting_date.to_string(),
                fmt_f64(obs.outstanding),
                fmt_f64(obs.cash_recovery),
                fmt_f64(obs.collateral_recovery),
                fmt_f64(obs.cost),
                fmt_f64(obs.write_off),
                spell.default_date.to_string(),
                out_date.clone(),
                spell.reason.to_string(),
                spell.final_status.to_string(),
                fmt_f64(spell.cover_value_index),
                fmt_f64(spell.unsecured_rate),
                fmt_f64(spell.secured_rate),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn write_macro_csv(path: &Path, prov: &Provenance, series: &MacroSeries) -> Result<u64> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(MACRO_HEADERS)?;
    let mut rows = 0u64;
    for (&q, &gdp) in &series.gdp {
        let employment = series
            .employment
            .get(&q)
            .ok_or_else(|| anyhow!("macro series has no employment value for {q}"))?;
        let hpi = series
            .hpi
            .get(&q)
            .ok_or_else(|| anyhow!("macro series has no hpi value for {q}"))?;
        w.write_record([
            q.year.to_string(),
            q.quarter.to_string(),
            fmt_f64(gdp),
            fmt_f64(*employment),
            fmt_f64(*hpi),
        ])?;
        rows += 1;
    }
    w.flush()?;
    Ok(rows)
}

pub fn write_rates_csv(path: &Path, prov: &Provenance, series: &MacroSeries) -> Result<u64> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(RATES_HEADERS)?;
    let mut rows = 0u64;
    for (&month, &rate) in &series.base_rate {
        w.write_record([
            month.year().to_string(),
            month.month().to_string(),
            fmt_f64(rate),
        ])?;
        rows += 1;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Debug, Deserialize)]
struct PortfolioRow {
    borrower_id: u32,
    spell_index: u32,
    reporting_date: MonthIndex,
    outstanding: f64,
    cash_recovery: f64,
    collateral_recovery: f64,
    cost: f64,
    write_off: f64,
    default_date: MonthIndex,
    out_date: Option<MonthIndex>,
    reason: DefaultReason,
    final_status: FinalStatus,
    cover_value_index: f64,
    unsecured_rate: f64,
    secured_rate: f64,
}

struct RawSpell {
    spell: DefaultSpell,
    lines: Vec<u64>,
}

fn macro_from_csv(dir: &Path) -> Result<(BTreeMap<QuarterKey, f64>, BTreeMap<QuarterKey, f64>, BTreeMap<QuarterKey, f64>)> {
    let path = dir.join(MACRO_FILE);
    let mut rdr = csv_reader(&path)?;
    require_headers(&mut rdr, &path, &MACRO_HEADERS)?;
    let name = file_name(&path);
    let mut gdp = BTreeMap::new();
    let mut employment = BTreeMap::new();
    let mut hpi = BTreeMap::new();

    #[derive(Deserialize)]
    struct MacroRow {
        year: i32,
        quarter: u8,
        gdp: f64,
        employment: f64,
        hpi: f64,
    }

    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: MacroRow = rec
            .deserialize(Some(&headers))
            .with_context(|| format!("{name} line {line}"))?;
        if !(1..=4).contains(&row.quarter) {
            bail!("{name} line {line}: quarter {} out of range 1..=4", row.quarter);
        }
        let q = QuarterKey { year: row.year, quarter: row.quarter };
        if gdp.insert(q, row.gdp).is_some() {
            bail!("{name} line {line}: duplicate quarter {q}");
        }
        employment.insert(q, row.employment);
        hpi.insert(q, row.hpi);
    }
    Ok((gdp, employment, hpi))
}

fn rates_from_csv(dir: &Path) -> Result<BTreeMap<MonthIndex, f64>> {
    let path = dir.join(RATES_FILE);
    let mut rdr = csv_reader(&path)?;
    require_headers(&mut rdr, &path, &RATES_HEADERS)?;
    let name = file_name(&path);
    let mut base_rate = BTreeMap::new();

    #[derive(Deserialize)]
    struct RateRow {
        year: i32,
        month: u32,
        base_rate: f64,
    }

    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: RateRow = rec
            .deserialize(Some(&headers))
            .with_context(|| format!("{name} line {line}"))?;
        let month = MonthIndex::from_ym(row.year, row.month)
            .with_context(|| format!("{name} line {line}"))?;
        if base_rate.insert(month, row.base_rate).is_some() {
            bail!("{name} line {line}: duplicate month {month}");
        }
    }
    Ok(base_rate)
}

fn line_span(lines: &[u64]) -> String {
    let lo = lines.iter().min().copied().unwrap_or(0);
    let hi = lines.iter().max().copied().unwrap_or(0);
    if lo == hi {
        format!("line {lo}")
    } else {
        format!("lines {lo}..{hi}")
    }
}

/// Reads the three portfolio CSVs from `dir`, groups ledger rows into spells,
/// validates them with file/line context, consolidates multiple defaults per
/// borrower and checks macro coverage over the observed date range.
pub fn load_portfolio(dir: &Path, discount_addon: f64) -> Result<(Vec<DefaultSpell>, MacroSeries)> {
    let (gdp, employment, hpi) = macro_from_csv(dir)?;
    let base_rate = rates_from_csv(dir)?;
    let macro_series = MacroSeries { gdp, employment, hpi, base_rate, discount_addon };

    let path = dir.join(PORTFOLIO_FILE);
    let mut rdr = csv_reader(&path)?;
    require_headers(&mut rdr, &path, &PORTFOLIO_HEADERS)?;
    let name = file_name(&path);

    let mut raw: BTreeMap<(u32, u32), RawSpell> = BTreeMap::new();
    let mut obs_lines: BTreeMap<(u32, u32), Vec<(u64, Observation)>> = BTreeMap::new();
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: PortfolioRow = rec
            .deserialize(Some(&headers))
            .with_context(|| format!("{name} line {line}"))?;
        for (field, value) in [
            ("outstanding", row.outstanding),
            ("cash_recovery", row.cash_recovery),
            ("collateral_recovery", row.collateral_recovery),
            ("cost", row.cost),
            ("write_off", row.write_off),
        ] {
            if !value.is_finite() || value < 0.0 {
                bail!("{name} line {line}: {field} must be finite and non-negative, got {value}");
            }
        }
        let key = (row.borrower_id, row.spell_index);
        let obs = Observation {
            reporting_date: row.reporting_date,
            outstanding: row.outstanding,
            cash_recovery: row.cash_recovery,
            collateral_recovery: row.collateral_recovery,
            cost: row.cost,
            write_off: row.write_off,
        };
        match raw.get_mut(&key) {
            None => {
                raw.insert(
                    key,
                    RawSpell {
                        spell: DefaultSpell {
                            borrower_id: row.borrower_id,
                            spell_index: row.spell_index,
                            default_date: row.default_date,
                            out_date: row.out_date,
                            reason: row.reason,
                            final_status: row.final_status,
                            cover_value_index: row.cover_value_index,
                            unsecured_rate: row.unsecured_rate,
                            secured_rate: row.secured_rate,
                            observations: Vec::new(),
                        },
                        lines: vec![line],
                    },
                );
            }
            Some(entry) => {
                let s = &entry.spell;
                let consistent = s.default_date == row.default_date
                    && s.out_date == row.out_date
                    && s.reason == row.reason
                    && s.final_status == row.final_status
                    && s.cover_value_index == row.cover_value_index
                    && s.unsecured_rate == row.unsecured_rate
                    && s.secured_rate == row.secured_rate;
                if !consistent {
                    bail!(
                        "{name} line {line}: spell-level fields differ from line {} for borrower {} spell {}",
                        entry.lines[0],
                        key.0,
                        key.1
                    );
                }
                entry.lines.push(line);
            }
        }
        obs_lines.entry(key).or_default().push((line, obs));
    }
    if raw.is_empty() {
        bail!("{name}: no ledger rows");
    }

    let mut per_borrower: BTreeMap<u32, Vec<DefaultSpell>> = BTreeMap::new();
    for ((borrower, spell_index), mut entry) in raw {
        let mut obs = obs_lines.remove(&(borrower, spell_index)).unwrap();
        obs.sort_by_key(|(line, o)| (o.reporting_date, *line));
        for pair in obs.windows(2) {
            if pair[1].1.reporting_date == pair[0].1.reporting_date {
                bail!(
                    "{name} line {}: duplicate reporting date {} for borrower {borrower} spell {spell_index} (first at line {})",
                    pair[1].0,
                    pair[1].1.reporting_date,
                    pair[0].0
                );
            }
        }
        let first_line = obs[0].0;
        if !(obs[0].1.outstanding > 0.0) {
            bail!(
                "{name} line {first_line}: EAD must be positive, got {} (borrower {borrower} spell {spell_index})",
                obs[0].1.outstanding
            );
        }
        entry.spell.observations = obs.into_iter().map(|(_, o)| o).collect();
        let problems = validate_spell(&entry.spell);
        if !problems.is_empty() {
            bail!(
                "{name} {} (borrower {borrower} spell {spell_index}): {}",
                line_span(&entry.lines),
                problems.join("; ")
            );
        }
        per_borrower.entry(borrower).or_default().push(entry.spell);
    }

    let mut spells = Vec::new();
    for (borrower, mut list) in per_borrower {
        list.sort_by_key(|s| s.default_date);
        let merged = consolidate_defaults(list)
            .with_context(|| format!("{name}: borrower {borrower}"))?;
        spells.extend(merged);
    }

    let start = spells.iter().map(|s| s.default_date).min().unwrap();
    let end = spells.iter().filter_map(|s| s.last_reporting_date()).max().unwrap();
    macro_series.check_coverage(start, end)?;
    Ok((spells, macro_series))
}

pub fn write_lgd_csv(
    path: &Path,
    prov: &Provenance,
    workout: &[LgdRecord],
    delta_os: &[LgdRecord],
) -> Result<u64> {
    let mut w = csv_writer(path, prov)?;
    w.write_record([
        "approach",
        "borrower_id",
        "spell_index",
        "reference_date",
        "el",
        "exposure_at_ref",
        "rlgd_raw",
        "rlgd",
        "resolved",
    ])?;
    let mut rows = 0u64;
    for (approach, records) in [("workout", workout), ("delta_os", delta_os)] {
        for r in records {
            w.write_record([
                approach.to_string(),
                r.borrower_id.to_string(),
                r.spell_index.to_string(),
                r.reference_date.to_string(),
                fmt_f64(r.el),
                fmt_f64(r.exposure_at_ref),
                fmt_f64(r.rlgd_raw),
                fmt_f64(r.rlgd),
                r.resolved.to_string(),
            ])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}

pub fn write_scatter_csv(path: &Path, prov: &Provenance, points: &[ScatterPoint]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record([
        "borrower_id",
        "spell_index",
        "reference_date",
        "rlgd_workout",
        "rlgd_delta_os",
        "final_status",
    ])?;
    for p in points {
        w.write_record([
            p.borrower_id.to_string(),
            p.spell_index.to_string(),
            p.reference_date.to_string(),
            fmt_f64(p.rlgd_workout),
            fmt_f64(p.rlgd_delta_os),
            p.final_status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_features_csv(path: &Path, prov: &Provenance, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record([
        "borrower_id",
        "spell_index",
        "reference_date",
        "unsecured_recovery_interest",
        "secured_recovery_interest",
        "cover_value_index",
        "eao",
        "discount_rate",
        "os_delta",
        "rlgd_os",
        "default_duration",
        "reason",
        "gdp",
        "employment",
        "hpi",
        "repayment",
        "redefault",
        "target_rlgd",
        "final_status",
    ])?;
    for r in rows {
        w.write_record([
            r.borrower_id.to_string(),
            r.spell_index.to_string(),
            r.reference_date.to_string(),
            fmt_f64(r.unsecured_recovery_interest),
            fmt_f64(r.secured_recovery_interest),
            fmt_f64(r.cover_value_index),
            fmt_f64(r.eao),
            fmt_f64(r.discount_rate),
            fmt_f64(r.os_delta),
            fmt_f64(r.rlgd_os),
            r.default_duration.to_string(),
            r.reason.to_string(),
            fmt_f64(r.gdp),
            fmt_f64(r.employment),
            fmt_f64(r.hpi),
            fmt_f64(r.repayment),
            if r.redefault { "1" } else { "0" }.to_string(),
            fmt_f64(r.target_rlgd),
            r.final_status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_csv(path: &Path, prov: &Provenance, report: &BenchReport) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(["model", "sample", "mae", "mse", "sd_error", "n"])?;
    for cell in &report.cells {
        w.write_record([
            cell.model.as_str().to_string(),
            cell.sample.as_str().to_string(),
            fmt_f64(cell.metrics.mae),
            fmt_f64(cell.metrics.mse),
            fmt_f64(cell.metrics.sd_error),
            cell.metrics.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_candidates_csv(path: &Path, prov: &Provenance, result: &SearchResult) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record([
        "index",
        "learning_rate",
        "max_depth",
        "n_estimators",
        "subsample",
        "min_child_weight",
        "colsample_bytree",
        "seed",
        "mean_mse",
        "mean_mae",
        "sd_error",
        "best",
    ])?;
    for (i, c) in result.candidates.iter().enumerate() {
        w.write_record([
            i.to_string(),
            fmt_f64(c.params.learning_rate),
            c.params.max_depth.to_string(),
            c.params.n_estimators.to_string(),
            fmt_f64(c.params.subsample),
            fmt_f64(c.params.min_child_weight),
            fmt_f64(c.params.colsample_bytree),
            c.params.seed.to_string(),
            fmt_f64(c.mean_mse),
            fmt_f64(c.mean_mae),
            fmt_f64(c.sd_error),
            if i == result.best_index { "1" } else { "0" }.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, prov: &Provenance, bins: &[HistBin]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(["lo", "hi", "count"])?;
    for b in bins {
        w.write_record([fmt_f64(b.lo), fmt_f64(b.hi), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_correlations_csv(
    path: &Path,
    prov: &Provenance,
    rows: &[CorrelationRow],
) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(["feature", "total", "noloss", "loss"])?;
    for r in rows {
        w.write_record([
            r.feature.clone(),
            fmt_f64(r.total),
            fmt_f64(r.noloss),
            fmt_f64(r.loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_model_summary_csv(path: &Path, prov: &Provenance, model: &GbtModel) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(["tree", "depth", "n_leaves"])?;
    for (i, tree) in model.trees.iter().enumerate() {
        w.write_record([
            i.to_string(),
            tree.depth().to_string(),
            tree.n_leaves().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON envelope for serialized models and results; `kind` selects the
/// payload type on read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub kind: String,
    pub seed: u64,
    pub config_sha256: String,
    pub payload: T,
}

pub const KIND_MODEL: &str = "model";
pub const KIND_SEARCH: &str = "search_result";
pub const KIND_BENCH: &str = "bench_report";
pub const KIND_SENSITIVITY: &str = "sensitivity_report";

pub fn write_artifact<T: Serialize>(
    path: &Path,
    kind: &str,
    prov: &Provenance,
    payload: &T,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    let artifact = Artifact {
        kind: kind.to_string(),
        seed: prov.seed,
        config_sha256: prov.config_sha256.clone(),
        payload,
    };
    let mut text = serde_json::to_string_pretty(&artifact)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_artifact(path: &Path) -> Result<Artifact<serde_json::Value>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let artifact: Artifact<serde_json::Value> = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(artifact)
}

pub fn payload_as<T: DeserializeOwned>(artifact: &Artifact<serde_json::Value>) -> Result<T> {
    serde_json::from_value(artifact.payload.clone())
        .with_context(|| format!("decoding {} payload", artifact.kind))
}

/// Lists LGD records parsed back from `lgd.csv`, keyed by approach.
pub fn read_lgd_csv(path: &Path) -> Result<BTreeMap<String, Vec<LgdRecord>>> {
    let mut rdr = csv_reader(path)?;
    require_headers(
        &mut rdr,
        path,
        &[
            "approach",
            "borrower_id",
            "spell_index",
            "reference_date",
            "el",
            "exposure_at_ref",
            "rlgd_raw",
            "rlgd",
            "resolved",
        ],
    )?;
    let name = file_name(path);

    #[derive(Deserialize)]
    struct LgdRow {
        approach: String,
        borrower_id: u32,
        spell_index: u32,
        reference_date: MonthIndex,
        el: f64,
        exposure_at_ref: f64,
        rlgd_raw: f64,
        rlgd: f64,
        resolved: bool,
    }

    let mut out: BTreeMap<String, Vec<LgdRecord>> = BTreeMap::new();
    let known: BTreeSet<&str> = ["workout", "delta_os"].into();
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: LgdRow = rec
            .deserialize(Some(&headers))
            .with_context(|| format!("{name} line {line}"))?;
        if !known.contains(row.approach.as_str()) {
            bail!("{name} line {line}: unknown approach {:?}", row.approach);
        }
        out.entry(row.approach).or_default().push(LgdRecord {
            borrower_id: row.borrower_id,
            spell_index: row.spell_index,
            reference_date: row.reference_date,
            el: row.el,
            exposure_at_ref: row.exposure_at_ref,
            rlgd_raw: row.rlgd_raw,
            rlgd: row.rlgd,
            resolved: row.resolved,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lgdlab_core::synth::{generate_macro, generate_portfolio, GenConfig};

    fn prov() -> Provenance {
        Provenance { seed: 7, config_sha256: "ab".repeat(32) }
    }

    fn small_portfolio() -> (Vec<DefaultSpell>, MacroSeries) {
        let cfg = GenConfig {
            seed: 11,
            n_borrowers: 60,
            ..GenConfig::default()
        };
        let series = generate_macro(cfg.seed, cfg.start, cfg.end).unwrap();
        let spells = generate_portfolio(&cfg, &series).unwrap();
        (spells, series)
    }

    #[test]
    fn portfolio_round_trips_exactly() {
        let (spells, series) = small_portfolio();
        let dir = tempfile::tempdir().unwrap();
        write_portfolio_csv(&dir.path().join(PORTFOLIO_FILE), &prov(), &spells).unwrap();
        write_macro_csv(&dir.path().join(MACRO_FILE), &prov(), &series).unwrap();
        write_rates_csv(&dir.path().join(RATES_FILE), &prov(), &series).unwrap();

        let (loaded, loaded_series) = load_portfolio(dir.path(), series.discount_addon).unwrap();
        assert_eq!(loaded, spells);
        assert_eq!(loaded_series, series);
    }

    #[test]
    fn loader_names_the_ead_row() {
        let (spells, series) = small_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PORTFOLIO_FILE);
        write_portfolio_csv(&path, &prov(), &spells).unwrap();
        write_macro_csv(&dir.path().join(MACRO_FILE), &prov(), &series).unwrap();
        write_rates_csv(&dir.path().join(RATES_FILE), &prov(), &series).unwrap();

        // Zero out the EAD of the first spell: its first ledger row is line 3
        // (comment, header, then data).
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let fields: Vec<&str> = lines[2].split(',').collect();
        let mut patched = fields.clone();
        patched[3] = "0";
        lines[2] = patched.join(",");
        fs::write(&path, lines.join("\n") + "\n").unwrap();

        let err = load_portfolio(dir.path(), 0.05).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("EAD must be positive"), "{msg}");
    }

    #[test]
    fn loader_names_the_missing_quarter() {
        let (spells, series) = small_portfolio();
        let dir = tempfile::tempdir().unwrap();
        write_portfolio_csv(&dir.path().join(PORTFOLIO_FILE), &prov(), &spells).unwrap();
        let mut gapped = series.clone();
        let missing = *gapped.gdp.keys().nth(4).unwrap();
        gapped.gdp.remove(&missing);
        gapped.employment.remove(&missing);
        gapped.hpi.remove(&missing);
        write_macro_csv(&dir.path().join(MACRO_FILE), &prov(), &gapped).unwrap();
        write_rates_csv(&dir.path().join(RATES_FILE), &prov(), &gapped).unwrap();

        let err = load_portfolio(dir.path(), 0.05).unwrap_err();
        assert!(format!("{err:#}").contains(&missing.to_string()));
    }

    #[test]
    fn loader_rejects_header_drift() {
        let (spells, series) = small_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PORTFOLIO_FILE);
        write_portfolio_csv(&path, &prov(), &spells).unwrap();
        write_macro_csv(&dir.path().join(MACRO_FILE), &prov(), &series).unwrap();
        write_rates_csv(&dir.path().join(RATES_FILE), &prov(), &series).unwrap();

        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("borrower_id", "borrower", 1)).unwrap();
        let err = load_portfolio(dir.path(), 0.05).unwrap_err();
        assert!(format!("{err:#}").contains("header mismatch"));
    }

    #[test]
    fn artifact_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let payload = vec![1.5f64, 2.25, -0.125];
        write_artifact(&path, KIND_MODEL, &prov(), &payload).unwrap();
        let artifact = read_artifact(&path).unwrap();
        assert_eq!(artifact.kind, KIND_MODEL);
        assert_eq!(artifact.seed, 7);
        let decoded: Vec<f64> = payload_as(&artifact).unwrap();
        assert_eq!(decoded, payload);
    }

    #[test]
    fn provenance_line_leads_every_csv() {
        let (spells, series) = small_portfolio();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(PORTFOLIO_FILE);
        write_portfolio_csv(&path, &prov(), &spells).unwrap();
        write_macro_csv(&dir.path().join(MACRO_FILE), &prov(), &series).unwrap();
        for file in [PORTFOLIO_FILE, MACRO_FILE] {
            let text = fs::read_to_string(dir.path().join(file)).unwrap();
            let first = text.lines().next().unwrap();
            assert!(first.starts_with("# seed=7 config_sha256="), "{file}: {first}");
        }
    }
}
