//! Evaluation protocol: error metrics, temporal train/test splitting,
//! loss/no-loss split modelling and the benchmark report comparing the
//! balance-based LGD approximation against the boosted-tree models.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cashflow::LgdRecord;
use crate::domain::{DefaultSpell, FinalStatus, MonthIndex};
use crate::error::{Error, Result};
use crate::features::{design_matrix, spell_keys, targets, FeatureRow, FEATURE_NAMES};
use crate::gbt::{train, GbtModel};
use crate::search::{random_search, ParamSpace, SearchResult};

/// Prediction-error summary. `sd_error` is the ddof-1 standard deviation of
/// the signed errors, zero for a single observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    pub sd_error: f64,
    pub n: usize,
}

pub fn compute_metrics(predictions: &[f64], targets: &[f64]) -> Result<Metrics> {
    if predictions.len() != targets.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = predictions.len();
    if n == 0 {
        return Err(Error::Input("metrics need at least one observation".into()));
    }
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut err_sum = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        let e = p - t;
        abs_sum += e.abs();
        sq_sum += e * e;
        err_sum += e;
    }
    let mean_err = err_sum / n as f64;
    let sd_error = if n == 1 {
        0.0
    } else {
        let dev_sq: f64 = predictions
            .iter()
            .zip(targets)
            .map(|(p, t)| {
                let d = (p - t) - mean_err;
                d * d
            })
            .sum();
        (dev_sq / (n as f64 - 1.0)).sqrt()
    };
    Ok(Metrics {
        mae: abs_sum / n as f64,
        mse: sq_sum / n as f64,
        sd_error,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitUnit {
    BySpell,
    ByRow,
}

/// Temporal split layout: the trailing `ood_months` months become the
/// out-of-date set, the remainder splits into train and out-of-sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub ood_months: u32,
    pub train_fraction_of_remainder: f64,
    pub unit: SplitUnit,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ood_months: 6,
            train_fraction_of_remainder: 75.0 / 95.0,
            unit: SplitUnit::BySpell,
            seed: 2718,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ood_months == 0 {
            return Err(Error::Config("ood_months must be at least 1".into()));
        }
        let f = self.train_fraction_of_remainder;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction_of_remainder must be in (0, 1), got {f}"
            )));
        }
        Ok(())
    }
}

/// Row indices of the three evaluation partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub out_of_sample: Vec<usize>,
    pub out_of_date: Vec<usize>,
}

/// Splits feature rows into train / out-of-sample / out-of-date partitions.
/// Out-of-date holds every row whose reference date falls in the last
/// `ood_months` months of the observation period; the remainder is split by
/// spell (or row) at the configured fraction.
pub fn temporal_split(rows: &[FeatureRow], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(Error::Input("no rows to split".into()));
    }
    let min_ref = rows.iter().map(|r| r.reference_date).min().unwrap();
    let max_ref = rows.iter().map(|r| r.reference_date).max().unwrap();
    let span = crate::domain::months_between(min_ref, max_ref)? + 1;
    if span <= spec.ood_months {
        return Err(Error::Config(format!(
            "observation span of {span} months cannot hold a {} month out-of-date window",
            spec.ood_months
        )));
    }
    let cutoff = MonthIndex(max_ref.0 - (spec.ood_months as i32 - 1));
    let mut out_of_date = Vec::new();
    let mut remainder = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.reference_date >= cutoff {
            out_of_date.push(i);
        } else {
            remainder.push(i);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let target = spec.train_fraction_of_remainder * remainder.len() as f64;
    let mut train = Vec::new();
    let mut out_of_sample = Vec::new();
    match spec.unit {
        SplitUnit::BySpell => {
            let mut keys: Vec<(u32, u32)> = Vec::new();
            let mut rows_of: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
            for &i in &remainder {
                let key = (rows[i].borrower_id, rows[i].spell_index);
                let entry = rows_of.entry(key).or_default();
                if entry.is_empty() {
                    keys.push(key);
                }
                entry.push(i);
            }
            keys.shuffle(&mut rng);
            for key in keys {
                let bucket = rows_of.get(&key).unwrap();
                if (train.len() as f64) < target {
                    train.extend_from_slice(bucket);
                } else {
                    out_of_sample.extend_from_slice(bucket);
                }
            }
        }
        SplitUnit::ByRow => {
            let mut shuffled = remainder.clone();
            shuffled.shuffle(&mut rng);
            let n_train = (target.round() as usize).min(shuffled.len());
            train.extend_from_slice(&shuffled[..n_train]);
            out_of_sample.extend_from_slice(&shuffled[n_train..]);
        }
    }
    train.sort_unstable();
    out_of_sample.sort_unstable();

    assert_eq!(
        train.len() + out_of_sample.len() + out_of_date.len(),
        rows.len()
    );
    Ok(SplitIndices {
        train,
        out_of_sample,
        out_of_date,
    })
}

/// Partitions row indices by the spell's final status: no-loss covers cures
/// and clean exits, loss covers dragging and loss-making spells.
pub fn split_by_final_status(rows: &[FeatureRow]) -> (Vec<usize>, Vec<usize>) {
    let mut noloss = Vec::new();
    let mut loss = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.final_status.is_loss_group() {
            loss.push(i);
        } else {
            noloss.push(i);
        }
    }
    (noloss, loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelLabel {
    #[serde(rename = "DeltaOutstanding")]
    DeltaOutstanding,
    #[serde(rename = "GBT_total")]
    GbtTotal,
    #[serde(rename = "GBT_loss_plus_noloss")]
    GbtLossPlusNoloss,
    #[serde(rename = "GBT_SA_hyp")]
    GbtSaHyp,
    #[serde(rename = "GBT_SA_var1")]
    GbtSaVar1,
    #[serde(rename = "GBT_SA_var2")]
    GbtSaVar2,
}

impl ModelLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelLabel::DeltaOutstanding => "DeltaOutstanding",
            ModelLabel::GbtTotal => "GBT_total",
            ModelLabel::GbtLossPlusNoloss => "GBT_loss_plus_noloss",
            ModelLabel::GbtSaHyp => "GBT_SA_hyp",
            ModelLabel::GbtSaVar1 => "GBT_SA_var1",
            ModelLabel::GbtSaVar2 => "GBT_SA_var2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLabel {
    Cv,
    OutOfSample,
    OutOfDate,
}

impl SampleLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleLabel::Cv => "cv",
            SampleLabel::OutOfSample => "out_of_sample",
            SampleLabel::OutOfDate => "out_of_date",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub model: ModelLabel,
    pub sample: SampleLabel,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub cells: Vec<ReportCell>,
}

impl BenchReport {
    pub fn get(&self, model: ModelLabel, sample: SampleLabel) -> Option<&Metrics> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.sample == sample)
            .map(|c| &c.metrics)
    }

    pub fn merge(&mut self, other: BenchReport) {
        self.cells.extend(other.cells);
    }
}

/// Model-selection settings shared by the benchmark legs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub space: ParamSpace,
    pub n_iter: u32,
    pub k: u32,
    pub seed: u64,
    pub cv_unit: SplitUnit,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            space: ParamSpace::default(),
            n_iter: 25,
            k: 5,
            seed: 42,
            cv_unit: SplitUnit::BySpell,
        }
    }
}

/// Sensitivity-suite settings: the interval space for the hyperparameter
/// sweep and the restricted-feature reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub hyp_space: ParamSpace,
    pub hyp_n_iter: u32,
    pub n_per_dim: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            hyp_space: ParamSpace::wide_intervals(),
            hyp_n_iter: 60,
            n_per_dim: 15,
        }
    }
}

/// Predictors available to the balance-only restricted model.
pub const VAR1_FEATURES: [&str; 3] = ["rlgd_os", "eao", "discount_rate"];

/// Full predictor list minus the balance-approximation column.
pub fn var2_features() -> Vec<&'static str> {
    FEATURE_NAMES
        .iter()
        .copied()
        .filter(|n| *n != "rlgd_os")
        .collect()
}

fn subset(rows: &[FeatureRow], indices: &[usize]) -> Vec<FeatureRow> {
    indices.iter().map(|&i| rows[i].clone()).collect()
}

struct FittedLeg {
    model: GbtModel,
    search: SearchResult,
    feature_names: Vec<&'static str>,
}

fn fit_leg(
    train_rows: &[FeatureRow],
    feature_names: &[&'static str],
    space: &ParamSpace,
    n_iter: u32,
    k: u32,
    seed: u64,
    cv_unit: SplitUnit,
) -> Result<FittedLeg> {
    let data = design_matrix(train_rows, feature_names)?;
    let y = targets(train_rows);
    let search = match cv_unit {
        SplitUnit::BySpell => {
            let groups = spell_keys(train_rows);
            random_search(space, n_iter, k, seed, &data, &y, &groups)?
        }
        SplitUnit::ByRow => {
            let groups: Vec<usize> = (0..train_rows.len()).collect();
            random_search(space, n_iter, k, seed, &data, &y, &groups)?
        }
    };
    let model = train(&search.best().params, &data, &y)?;
    Ok(FittedLeg {
        model,
        search,
        feature_names: feature_names.to_vec(),
    })
}

fn predict_rows(leg: &FittedLeg, rows: &[FeatureRow]) -> Result<Vec<f64>> {
    let data = design_matrix(rows, &leg.feature_names)?;
    leg.model.predict(&data)
}

fn assert_no_leakage(rows: &[FeatureRow], split: &SplitIndices, unit: SplitUnit) {
    let train_keys: HashSet<(u32, u32, MonthIndex)> =
        split.train.iter().map(|&i| rows[i].key()).collect();
    for idx in split.out_of_sample.iter().chain(&split.out_of_date) {
        assert!(
            !train_keys.contains(&rows[*idx].key()),
            "training rows leak into an evaluation set"
        );
    }
    if unit == SplitUnit::BySpell {
        let train_spells: HashSet<(u32, u32)> = split
            .train
            .iter()
            .map(|&i| (rows[i].borrower_id, rows[i].spell_index))
            .collect();
        for &idx in &split.out_of_sample {
            let key = (rows[idx].borrower_id, rows[idx].spell_index);
            assert!(
                !train_spells.contains(&key),
                "spell {key:?} appears in both train and out-of-sample"
            );
        }
    }
}

fn delta_os_cell(rows: &[FeatureRow], indices: &[usize], sample: SampleLabel) -> Result<ReportCell> {
    let preds: Vec<f64> = indices.iter().map(|&i| rows[i].rlgd_os).collect();
    let truth: Vec<f64> = indices.iter().map(|&i| rows[i].target_rlgd).collect();
    Ok(ReportCell {
        model: ModelLabel::DeltaOutstanding,
        sample,
        metrics: compute_metrics(&preds, &truth)?,
    })
}

fn model_cell(
    leg: &FittedLeg,
    rows: &[FeatureRow],
    indices: &[usize],
    model: ModelLabel,
    sample: SampleLabel,
) -> Result<ReportCell> {
    let eval_rows = subset(rows, indices);
    let preds = predict_rows(leg, &eval_rows)?;
    let truth = targets(&eval_rows);
    Ok(ReportCell {
        model,
        sample,
        metrics: compute_metrics(&preds, &truth)?,
    })
}

/// Pooled predictions of the loss/no-loss split models on the given rows:
/// each row is routed to the model matching its spell's status group.
fn pooled_cell(
    noloss: &FittedLeg,
    loss: &FittedLeg,
    rows: &[FeatureRow],
    indices: &[usize],
    sample: SampleLabel,
) -> Result<ReportCell> {
    let eval_rows = subset(rows, indices);
    let noloss_preds = predict_rows(noloss, &eval_rows)?;
    let loss_preds = predict_rows(loss, &eval_rows)?;
    let preds: Vec<f64> = eval_rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.final_status.is_loss_group() {
                loss_preds[i]
            } else {
                noloss_preds[i]
            }
        })
        .collect();
    let truth = targets(&eval_rows);
    Ok(ReportCell {
        model: ModelLabel::GbtLossPlusNoloss,
        sample,
        metrics: compute_metrics(&preds, &truth)?,
    })
}

/// Base benchmark: the balance approximation plus the total and split
/// boosted models, each scored out-of-sample and out-of-date. All model
/// selection runs on the training partition only.
pub fn run_benchmark(
    rows: &[FeatureRow],
    cfg: &SearchConfig,
    spec: &SplitSpec,
) -> Result<BenchReport> {
    let split = temporal_split(rows, spec)?;
    assert_no_leakage(rows, &split, spec.unit);
    let train_rows = subset(rows, &split.train);

    let total = fit_leg(
        &train_rows,
        &FEATURE_NAMES,
        &cfg.space,
        cfg.n_iter,
        cfg.k,
        cfg.seed,
        cfg.cv_unit,
    )?;

    let (noloss_idx, loss_idx) = split_by_final_status(&train_rows);
    if noloss_idx.is_empty() {
        return Err(Error::Input(
            "no cured or cleanly exited spells in the training partition; cannot fit the split model"
                .into(),
        ));
    }
    if loss_idx.is_empty() {
        return Err(Error::Input(
            "no dragging or loss-making spells in the training partition; cannot fit the split model"
                .into(),
        ));
    }
    let noloss = fit_leg(
        &subset(&train_rows, &noloss_idx),
        &FEATURE_NAMES,
        &cfg.space,
        cfg.n_iter,
        cfg.k,
        cfg.seed.wrapping_add(1),
        cfg.cv_unit,
    )?;
    let loss = fit_leg(
        &subset(&train_rows, &loss_idx),
        &FEATURE_NAMES,
        &cfg.space,
        cfg.n_iter,
        cfg.k,
        cfg.seed.wrapping_add(2),
        cfg.cv_unit,
    )?;

    let mut report = BenchReport::default();
    for (indices, sample) in [
        (&split.out_of_sample, SampleLabel::OutOfSample),
        (&split.out_of_date, SampleLabel::OutOfDate),
    ] {
        report.cells.push(delta_os_cell(rows, indices, sample)?);
        report
            .cells
            .push(model_cell(&total, rows, indices, ModelLabel::GbtTotal, sample)?);
        report
            .cells
            .push(pooled_cell(&noloss, &loss, rows, indices, sample)?);
    }
    Ok(report)
}

/// Sensitivity suite: the widened hyperparameter sweep and the two
/// restricted-feature reruns, each reported on cross-validation,
/// out-of-sample and out-of-date.
pub fn run_sensitivity(
    rows: &[FeatureRow],
    cfg: &SearchConfig,
    spec: &SplitSpec,
    sa: &SensitivityConfig,
) -> Result<BenchReport> {
    let split = temporal_split(rows, spec)?;
    assert_no_leakage(rows, &split, spec.unit);
    let train_rows = subset(rows, &split.train);
    let var2 = var2_features();

    let hyp_space = sa
        .hyp_space
        .materialize(cfg.seed.wrapping_add(3), sa.n_per_dim)?;
    let legs: [(ModelLabel, Vec<&'static str>, &ParamSpace, u32, u64); 3] = [
        (
            ModelLabel::GbtSaHyp,
            FEATURE_NAMES.to_vec(),
            &hyp_space,
            sa.hyp_n_iter,
            cfg.seed.wrapping_add(3),
        ),
        (
            ModelLabel::GbtSaVar1,
            VAR1_FEATURES.to_vec(),
            &cfg.space,
            cfg.n_iter,
            cfg.seed.wrapping_add(4),
        ),
        (
            ModelLabel::GbtSaVar2,
            var2,
            &cfg.space,
            cfg.n_iter,
            cfg.seed.wrapping_add(5),
        ),
    ];

    let mut report = BenchReport::default();
    for (label, names, space, n_iter, seed) in legs {
        let leg = fit_leg(&train_rows, &names, space, n_iter, cfg.k, seed, cfg.cv_unit)?;
        let best = leg.search.best();
        report.cells.push(ReportCell {
            model: label,
            sample: SampleLabel::Cv,
            metrics: Metrics {
                mae: best.mean_mae,
                mse: best.mean_mse,
                sd_error: best.sd_error,
                n: train_rows.len(),
            },
        });
        for (indices, sample) in [
            (&split.out_of_sample, SampleLabel::OutOfSample),
            (&split.out_of_date, SampleLabel::OutOfDate),
        ] {
            report.cells.push(model_cell(&leg, rows, indices, label, sample)?);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Fixed-width histogram over `[lo, hi]`; out-of-range values are counted
/// in the edge bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<Vec<HistBin>> {
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Config(format!("invalid histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<HistBin> = (0..n_bins)
        .map(|i| HistBin {
            lo: lo + i as f64 * width,
            hi: if i == n_bins - 1 {
                hi
            } else {
                lo + (i + 1) as f64 * width
            },
            count: 0,
        })
        .collect();
    for &v in values {
        if !v.is_finite() {
            return Err(Error::Input(format!("histogram input contains {v}")));
        }
        let idx = (((v - lo) / width).floor() as i64).clamp(0, n_bins as i64 - 1) as usize;
        bins[idx].count += 1;
    }
    Ok(bins)
}

/// Distribution of realized LGD values over `[0, 1]`.
pub fn lgd_histogram(records: &[LgdRecord], n_bins: usize) -> Result<Vec<HistBin>> {
    let values: Vec<f64> = records.iter().map(|r| r.rlgd).collect();
    histogram(&values, 0.0, 1.0, n_bins)
}

/// Distribution of spell durations in months.
pub fn duration_histogram(spells: &[DefaultSpell], n_bins: usize) -> Result<Vec<HistBin>> {
    let values: Vec<f64> = spells.iter().map(|s| s.duration_months() as f64).collect();
    let hi = values.iter().copied().fold(1.0f64, f64::max);
    histogram(&values, 0.0, hi, n_bins)
}

/// One point of the workout-vs-approximation scatter, both axes capped to
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub borrower_id: u32,
    pub spell_index: u32,
    pub reference_date: MonthIndex,
    pub rlgd_workout: f64,
    pub rlgd_delta_os: f64,
    pub final_status: FinalStatus,
}

/// Joins the two LGD runs into scatter points and, when there are more than
/// `max_points`, keeps a seeded subsample.
pub fn scatter_sample(
    spells: &[DefaultSpell],
    cash: &[LgdRecord],
    os: &[LgdRecord],
    max_points: usize,
    seed: u64,
) -> Result<Vec<ScatterPoint>> {
    let status_of: BTreeMap<(u32, u32), FinalStatus> = spells
        .iter()
        .map(|s| ((s.borrower_id, s.spell_index), s.final_status))
        .collect();
    let os_by_key: BTreeMap<(u32, u32, MonthIndex), f64> = os
        .iter()
        .map(|r| ((r.borrower_id, r.spell_index, r.reference_date), r.rlgd))
        .collect();
    if os_by_key.len() != cash.len() {
        return Err(Error::Input(format!(
            "{} workout records against {} approximation records",
            cash.len(),
            os_by_key.len()
        )));
    }
    let mut points = Vec::with_capacity(cash.len());
    for rec in cash {
        let key = (rec.borrower_id, rec.spell_index, rec.reference_date);
        let os_rlgd = os_by_key.get(&key).ok_or_else(|| {
            Error::MissingData(format!(
                "no approximation record for borrower {} spell {} at {}",
                rec.borrower_id, rec.spell_index, rec.reference_date
            ))
        })?;
        let status = status_of.get(&(rec.borrower_id, rec.spell_index)).ok_or_else(|| {
            Error::MissingData(format!(
                "no spell for borrower {} spell {}",
                rec.borrower_id, rec.spell_index
            ))
        })?;
        points.push(ScatterPoint {
            borrower_id: rec.borrower_id,
            spell_index: rec.spell_index,
            reference_date: rec.reference_date,
            rlgd_workout: rec.rlgd.clamp(0.0, 1.0),
            rlgd_delta_os: os_rlgd.clamp(0.0, 1.0),
            final_status: *status,
        });
    }
    if points.len() > max_points {
        let mut keep = rand::seq::index::sample(
            &mut ChaCha8Rng::seed_from_u64(seed),
            points.len(),
            max_points,
        )
        .into_vec();
        keep.sort_unstable();
        points = keep.into_iter().map(|i| points[i].clone()).collect();
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub feature: String,
    pub total: f64,
    pub noloss: f64,
    pub loss: f64,
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Pearson correlation of every predictor with the target, on the full
/// sample and the two status groups.
pub fn correlation_report(rows: &[FeatureRow]) -> Vec<CorrelationRow> {
    let (noloss_idx, loss_idx) = split_by_final_status(rows);
    let mut out = Vec::with_capacity(FEATURE_NAMES.len());
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r.predictors()[j]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.target_rlgd).collect();
        let pick = |idx: &[usize]| {
            let xs: Vec<f64> = idx.iter().map(|&i| col[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            pearson(&xs, &ys)
        };
        out.push(CorrelationRow {
            feature: name.to_string(),
            total: pearson(&col, &y),
            noloss: pick(&noloss_idx),
            loss: pick(&loss_idx),
        });
    }
    out
}
