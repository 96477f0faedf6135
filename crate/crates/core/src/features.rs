//! Feature engineering: one row per (spell, reference date) with the 19
//! predictors, the workout-LGD target and the final status as split key.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cashflow::{DiscountPolicy, LgdRecord};
use crate::delta_os::reference_rate;
use crate::domain::{DefaultReason, DefaultSpell, FinalStatus, MacroSeries, MonthIndex};
use crate::error::{Error, Result};

/// Predictor columns in their stable emission order.
pub const FEATURE_NAMES: [&str; 19] = [
    "unsecured_recovery_interest",
    "secured_recovery_interest",
    "cover_value_index",
    "eao",
    "discount_rate",
    "os_delta",
    "rlgd_os",
    "default_duration",
    "reason_90days",
    "reason_bankrupt",
    "reason_forbperiod",
    "reason_fraud",
    "reason_restr",
    "reason_unlikepay",
    "gdp",
    "employment",
    "hpi",
    "repayment",
    "redefault",
];

/// One feature-matrix row. `final_status` is carried as the split key for
/// the loss/no-loss submodels and is never a predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub borrower_id: u32,
    pub spell_index: u32,
    pub reference_date: MonthIndex,
    pub unsecured_recovery_interest: f64,
    pub secured_recovery_interest: f64,
    pub cover_value_index: f64,
    /// Exposure at the observation date: the outstanding balance.
    pub eao: f64,
    pub discount_rate: f64,
    /// Raw month-over-month balance change, current minus previous.
    pub os_delta: f64,
    /// Realized LGD under the delta-outstanding approximation.
    pub rlgd_os: f64,
    /// Total months of the spell; months observed so far for dragging spells.
    pub default_duration: u32,
    pub reason: DefaultReason,
    pub gdp: f64,
    pub employment: f64,
    pub hpi: f64,
    /// Relative balance change, current over previous; 1 at the default date.
    pub repayment: f64,
    /// 1 when this is not the borrower's first default.
    pub redefault: bool,
    pub target_rlgd: f64,
    pub final_status: FinalStatus,
}

impl FeatureRow {
    pub fn key(&self) -> (u32, u32, MonthIndex) {
        (self.borrower_id, self.spell_index, self.reference_date)
    }

    /// Predictor values in `FEATURE_NAMES` order.
    pub fn predictors(&self) -> [f64; 19] {
        let mut reason_flags = [0.0; 6];
        let pos = DefaultReason::ALL
            .iter()
            .position(|r| *r == self.reason)
            .unwrap();
        reason_flags[pos] = 1.0;
        [
            self.unsecured_recovery_interest,
            self.secured_recovery_interest,
            self.cover_value_index,
            self.eao,
            self.discount_rate,
            self.os_delta,
            self.rlgd_os,
            self.default_duration as f64,
            reason_flags[0],
            reason_flags[1],
            reason_flags[2],
            reason_flags[3],
            reason_flags[4],
            reason_flags[5],
            self.gdp,
            self.employment,
            self.hpi,
            self.repayment,
            if self.redefault { 1.0 } else { 0.0 },
        ]
    }
}

/// Quarterly indicators for the month's quarter plus the month's base rate.
pub fn macro_lookup(
    macro_series: &MacroSeries,
    month: MonthIndex,
) -> Result<(f64, f64, f64, f64)> {
    let q = month.quarter();
    let pick = |name: &str, series: &BTreeMap<crate::domain::QuarterKey, f64>| {
        series
            .get(&q)
            .copied()
            .ok_or_else(|| Error::MissingData(format!("no {name} value for {q}")))
    };
    Ok((
        pick("gdp", &macro_series.gdp)?,
        pick("employment", &macro_series.employment)?,
        pick("hpi", &macro_series.hpi)?,
        macro_series.base_rate_at(month)?,
    ))
}

fn index_records(
    records: &[LgdRecord],
    label: &str,
) -> Result<BTreeMap<(u32, u32, MonthIndex), f64>> {
    let mut map = BTreeMap::new();
    for r in records {
        let key = (r.borrower_id, r.spell_index, r.reference_date);
        if map.insert(key, r.rlgd).is_some() {
            return Err(Error::Input(format!(
                "duplicate {label} record for borrower {} spell {} at {}",
                r.borrower_id, r.spell_index, r.reference_date
            )));
        }
    }
    Ok(map)
}

fn missing_keys_error(label: &str, missing: &[(u32, u32, MonthIndex)]) -> Error {
    let shown: Vec<String> = missing
        .iter()
        .take(5)
        .map(|(b, s, m)| format!("{b}/{s}@{m}"))
        .collect();
    let suffix = if missing.len() > 5 {
        format!(" and {} more", missing.len() - 5)
    } else {
        String::new()
    };
    Error::MissingData(format!(
        "{label} records missing for keys [{}]{suffix}",
        shown.join(", ")
    ))
}

/// Joins spells, both LGD runs and the macro series into the feature matrix,
/// one row per (spell, reference date), ordered by key. Every key must be
/// present in both LGD runs and the macro series must cover every month.
pub fn build_feature_matrix(
    spells: &[DefaultSpell],
    cash_lgd: &[LgdRecord],
    os_lgd: &[LgdRecord],
    macro_series: &MacroSeries,
    policy: &DiscountPolicy,
) -> Result<Vec<FeatureRow>> {
    let cash = index_records(cash_lgd, "workout")?;
    let os = index_records(os_lgd, "delta-outstanding")?;

    let mut rows = Vec::new();
    let mut missing_cash = Vec::new();
    let mut missing_os = Vec::new();
    for spell in spells {
        let duration = spell.duration_months();
        let redefault = spell.spell_index > 0;
        for (i, obs) in spell.observations.iter().enumerate() {
            let key = (spell.borrower_id, spell.spell_index, obs.reporting_date);
            let target_rlgd = match cash.get(&key) {
                Some(v) => *v,
                None => {
                    missing_cash.push(key);
                    continue;
                }
            };
            let rlgd_os = match os.get(&key) {
                Some(v) => *v,
                None => {
                    missing_os.push(key);
                    continue;
                }
            };
            let (gdp, employment, hpi, _) = macro_lookup(macro_series, obs.reporting_date)?;
            let prev = if i == 0 {
                None
            } else {
                Some(spell.observations[i - 1].outstanding)
            };
            let os_delta = match prev {
                Some(p) => obs.outstanding - p,
                None => 0.0,
            };
            let repayment = match prev {
                Some(p) if p > 0.0 => obs.outstanding / p,
                _ => 1.0,
            };
            rows.push(FeatureRow {
                borrower_id: spell.borrower_id,
                spell_index: spell.spell_index,
                reference_date: obs.reporting_date,
                unsecured_recovery_interest: spell.unsecured_rate,
                secured_recovery_interest: spell.secured_rate,
                cover_value_index: spell.cover_value_index,
                eao: obs.outstanding,
                discount_rate: reference_rate(spell, obs.reporting_date, policy, macro_series)?,
                os_delta,
                rlgd_os,
                default_duration: duration,
                reason: spell.reason,
                gdp,
                employment,
                hpi,
                repayment,
                redefault,
                target_rlgd,
                final_status: spell.final_status,
            });
        }
    }
    if !missing_cash.is_empty() {
        return Err(missing_keys_error("workout", &missing_cash));
    }
    if !missing_os.is_empty() {
        return Err(missing_keys_error("delta-outstanding", &missing_os));
    }

    let expected: usize = spells.iter().map(|s| s.observations.len()).sum();
    if cash.len() != expected || os.len() != expected {
        return Err(Error::Input(format!(
            "LGD runs carry {} workout and {} delta-outstanding records for {} observations",
            cash.len(),
            os.len(),
            expected
        )));
    }
    rows.sort_by_key(|r| r.key());
    Ok(rows)
}

/// Column-major design matrix for the requested feature subset.
pub fn design_matrix(rows: &[FeatureRow], feature_names: &[&str]) -> Result<crate::gbt::Dataset> {
    let mut indices = Vec::with_capacity(feature_names.len());
    for name in feature_names {
        let idx = FEATURE_NAMES
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("unknown feature {name:?}")))?;
        indices.push(idx);
    }
    let mut columns = vec![Vec::with_capacity(rows.len()); indices.len()];
    for row in rows {
        let values = row.predictors();
        for (slot, &idx) in indices.iter().enumerate() {
            columns[slot].push(values[idx]);
        }
    }
    crate::gbt::Dataset::new(
        feature_names.iter().map(|s| s.to_string()).collect(),
        columns,
        rows.len(),
    )
}

/// Workout-LGD targets, aligned with the row order.
pub fn targets(rows: &[FeatureRow]) -> Vec<f64> {
    rows.iter().map(|r| r.target_rlgd).collect()
}

/// Spell keys per row, the grouping unit for cross-validation folds.
pub fn spell_keys(rows: &[FeatureRow]) -> Vec<(u32, u32)> {
    rows.iter().map(|r| (r.borrower_id, r.spell_index)).collect()
}
