//! Portfolio data model: monthly date grid, default spells, macro series,
//! spell validation and the multiple-default consolidation rule.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Month on a fixed grid, counted from January 2000 (= 0).
///
/// All date arithmetic in the toolkit is whole months; there is no day-level
/// calendar. Displays and parses as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MonthIndex(pub i32);

impl MonthIndex {
    pub fn from_ym(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Input(format!("month {month} out of range 1..=12")));
        }
        Ok(MonthIndex((year - 2000) * 12 + month as i32 - 1))
    }

    pub fn year(self) -> i32 {
        2000 + self.0.div_euclid(12)
    }

    /// Calendar month, 1 through 12.
    pub fn month(self) -> u32 {
        (self.0.rem_euclid(12) + 1) as u32
    }

    pub fn quarter(self) -> QuarterKey {
        QuarterKey {
            year: self.year(),
            quarter: ((self.month() - 1) / 3 + 1) as u8,
        }
    }

    /// Month shifted by `months` (may be negative).
    pub fn plus(self, months: i32) -> Self {
        MonthIndex(self.0 + months)
    }
}

impl fmt::Display for MonthIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl FromStr for MonthIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        MonthIndex::from_ym(year, month)
    }
}

impl TryFrom<String> for MonthIndex {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MonthIndex> for String {
    fn from(m: MonthIndex) -> String {
        m.to_string()
    }
}

/// Number of whole months from `from` to `to`; errors when `to` precedes `from`.
pub fn months_between(from: MonthIndex, to: MonthIndex) -> Result<u32> {
    if to < from {
        return Err(Error::Input(format!(
            "months_between: {to} precedes {from}"
        )));
    }
    Ok((to.0 - from.0) as u32)
}

/// Calendar quarter, the key for quarterly macro series.
///
/// Displays and parses as `YYYY-Qn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct QuarterKey {
    pub year: i32,
    pub quarter: u8,
}

impl fmt::Display for QuarterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-Q{}", self.year, self.quarter)
    }
}

impl FromStr for QuarterKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("expected YYYY-Qn, got {s:?}"));
        let (y, q) = s.split_once("-Q").ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let quarter: u8 = q.parse().map_err(|_| bad())?;
        if !(1..=4).contains(&quarter) {
            return Err(bad());
        }
        Ok(QuarterKey { year, quarter })
    }
}

impl TryFrom<String> for QuarterKey {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QuarterKey> for String {
    fn from(q: QuarterKey) -> String {
        q.to_string()
    }
}

/// Resolution status of a default spell at the end of the observation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Cured,
    ExitNoLoss,
    NotResolved,
    ExitWithLoss,
}

impl FinalStatus {
    pub const ALL: [FinalStatus; 4] = [
        FinalStatus::Cured,
        FinalStatus::ExitNoLoss,
        FinalStatus::NotResolved,
        FinalStatus::ExitWithLoss,
    ];

    /// The loss group pools dragging and written-off spells; cures and
    /// clean exits form the no-loss group.
    pub fn is_loss_group(self) -> bool {
        matches!(self, FinalStatus::NotResolved | FinalStatus::ExitWithLoss)
    }

    pub fn is_resolved(self) -> bool {
        !matches!(self, FinalStatus::NotResolved)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FinalStatus::Cured => "cured",
            FinalStatus::ExitNoLoss => "exit_no_loss",
            FinalStatus::NotResolved => "not_resolved",
            FinalStatus::ExitWithLoss => "exit_with_loss",
        }
    }
}

impl FromStr for FinalStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FinalStatus::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown final_status {s:?}")))
    }
}

impl fmt::Display for FinalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trigger that opened the default spell; one-hot encoded in the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefaultReason {
    #[serde(rename = "90days")]
    Days90,
    #[serde(rename = "bankrupt")]
    Bankrupt,
    #[serde(rename = "forbperiod")]
    ForbPeriod,
    #[serde(rename = "fraud")]
    Fraud,
    #[serde(rename = "restr")]
    Restr,
    #[serde(rename = "unlikepay")]
    UnlikePay,
}

impl DefaultReason {
    pub const ALL: [DefaultReason; 6] = [
        DefaultReason::Days90,
        DefaultReason::Bankrupt,
        DefaultReason::ForbPeriod,
        DefaultReason::Fraud,
        DefaultReason::Restr,
        DefaultReason::UnlikePay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DefaultReason::Days90 => "90days",
            DefaultReason::Bankrupt => "bankrupt",
            DefaultReason::ForbPeriod => "forbperiod",
            DefaultReason::Fraud => "fraud",
            DefaultReason::Restr => "restr",
            DefaultReason::UnlikePay => "unlikepay",
        }
    }
}

impl FromStr for DefaultReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DefaultReason::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown reason {s:?}")))
    }
}

impl fmt::Display for DefaultReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (spell, reporting month) ledger record.
///
/// `outstanding` is the accounting value gross of credit-risk adjustment.
/// Recoveries, costs and write-offs are the flows booked in that month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub reporting_date: MonthIndex,
    pub outstanding: f64,
    pub cash_recovery: f64,
    pub collateral_recovery: f64,
    pub cost: f64,
    pub write_off: f64,
}

/// One contiguous in-default episode of a borrower, observed monthly from the
/// default date until resolution or the end of the observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultSpell {
    pub borrower_id: u32,
    /// Order among this borrower's defaults, 0-based.
    pub spell_index: u32,
    pub default_date: MonthIndex,
    /// Resolution month; absent while the spell is dragging (NotResolved).
    pub out_date: Option<MonthIndex>,
    pub reason: DefaultReason,
    pub final_status: FinalStatus,
    /// Security value behind the exposure, as an index level.
    pub cover_value_index: f64,
    /// Annual discount rate applicable to cash recoveries and costs.
    pub unsecured_rate: f64,
    /// Annual discount rate applicable to collateral recoveries.
    pub secured_rate: f64,
    pub observations: Vec<Observation>,
}

impl DefaultSpell {
    /// Exposure at default: the outstanding balance at the default date.
    pub fn ead(&self) -> f64 {
        self.observations.first().map_or(0.0, |o| o.outstanding)
    }

    pub fn last_reporting_date(&self) -> Option<MonthIndex> {
        self.observations.last().map(|o| o.reporting_date)
    }

    /// Months from default to resolution, or to the last observation for
    /// dragging spells.
    pub fn duration_months(&self) -> u32 {
        match self.last_reporting_date() {
            Some(last) => (last.0 - self.default_date.0).max(0) as u32,
            None => 0,
        }
    }
}

/// Quarterly macro indicators plus the monthly base interest rate, and the
/// add-on applied on top of the base rate when discounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSeries {
    pub gdp: BTreeMap<QuarterKey, f64>,
    pub employment: BTreeMap<QuarterKey, f64>,
    pub hpi: BTreeMap<QuarterKey, f64>,
    pub base_rate: BTreeMap<MonthIndex, f64>,
    pub discount_addon: f64,
}

impl MacroSeries {
    pub fn base_rate_at(&self, month: MonthIndex) -> Result<f64> {
        self.base_rate
            .get(&month)
            .copied()
            .ok_or_else(|| Error::MissingData(format!("no base rate for {month}")))
    }

    /// Annual discount rate used by default: base rate at `month` plus add-on.
    pub fn discount_rate_at(&self, month: MonthIndex) -> Result<f64> {
        Ok(self.base_rate_at(month)? + self.discount_addon)
    }

    /// Errors unless every month in `[start, end]` has a base rate and every
    /// spanned quarter has all three quarterly indicators.
    pub fn check_coverage(&self, start: MonthIndex, end: MonthIndex) -> Result<()> {
        let mut m = start;
        while m <= end {
            self.base_rate_at(m)?;
            let q = m.quarter();
            for (name, series) in [
                ("gdp", &self.gdp),
                ("employment", &self.employment),
                ("hpi", &self.hpi),
            ] {
                if !series.contains_key(&q) {
                    return Err(Error::MissingData(format!("no {name} value for {q}")));
                }
            }
            m = m.plus(1);
        }
        Ok(())
    }
}

/// Checks every structural invariant of a spell and reports each violation
/// as a human-readable description. An empty list means the spell is valid.
pub fn validate_spell(spell: &DefaultSpell) -> Vec<String> {
    let mut v = Vec::new();
    if spell.observations.is_empty() {
        v.push("observations must be non-empty".to_string());
        return v;
    }
    let first = &spell.observations[0];
    if first.reporting_date != spell.default_date {
        v.push(format!(
            "first reporting date {} must equal default date {}",
            first.reporting_date, spell.default_date
        ));
    }
    if !(first.outstanding > 0.0) {
        v.push("EAD must be positive".to_string());
    }
    for w in spell.observations.windows(2) {
        if w[1].reporting_date.0 != w[0].reporting_date.0 + 1 {
            v.push(format!(
                "non-contiguous reporting dates: {} then {}",
                w[0].reporting_date, w[1].reporting_date
            ));
            break;
        }
    }
    for o in &spell.observations {
        for (name, x) in [
            ("outstanding", o.outstanding),
            ("cash_recovery", o.cash_recovery),
            ("collateral_recovery", o.collateral_recovery),
            ("cost", o.cost),
            ("write_off", o.write_off),
        ] {
            if !x.is_finite() || x < 0.0 {
                v.push(format!(
                    "{name} at {} must be finite and non-negative",
                    o.reporting_date
                ));
            }
        }
    }
    for w in spell.observations.windows(2) {
        if w[1].write_off > w[0].outstanding + 1e-9 {
            v.push(format!(
                "write_off at {} exceeds previous outstanding",
                w[1].reporting_date
            ));
            break;
        }
    }
    let last = spell.observations.last().unwrap().reporting_date;
    match (spell.final_status, spell.out_date) {
        (FinalStatus::NotResolved, Some(_)) => {
            v.push("NotResolved spell must not carry an out_date".to_string());
        }
        (FinalStatus::NotResolved, None) => {}
        (_, None) => v.push("resolved spell must carry an out_date".to_string()),
        (_, Some(out)) => {
            if out != last {
                v.push(format!(
                    "out_date {out} must equal the last reporting date {last}"
                ));
            }
        }
    }
    for (name, x) in [
        ("cover_value_index", spell.cover_value_index),
        ("unsecured_rate", spell.unsecured_rate),
        ("secured_rate", spell.secured_rate),
    ] {
        if !x.is_finite() || x < 0.0 {
            v.push(format!("{name} must be finite and non-negative"));
        }
    }
    v
}

/// Months strictly between the end of `prev` and the start of `next`.
fn probation_gap(prev_out: MonthIndex, next_default: MonthIndex) -> Result<u32> {
    let span = months_between(prev_out, next_default)?;
    if span == 0 {
        return Err(Error::Input(
            "spells overlap: next default starts at previous out date".to_string(),
        ));
    }
    Ok(span - 1)
}

const CONSOLIDATION_GAP_MONTHS: u32 = 3;

/// Merges consecutive spells of one borrower whose probation gap is at most
/// 3 months. The merged spell spans both episodes, with the gap months filled
/// by synthetic observations carrying the last known outstanding and zero
/// flows; it keeps the first spell's reason and the last spell's final status.
/// Spell indices are renumbered after merging.
pub fn consolidate_defaults(raw_spells: Vec<DefaultSpell>) -> Result<Vec<DefaultSpell>> {
    let mut out: Vec<DefaultSpell> = Vec::with_capacity(raw_spells.len());
    for next in raw_spells {
        let Some(cur) = out.last_mut() else {
            out.push(next);
            continue;
        };
        if next.borrower_id != cur.borrower_id {
            return Err(Error::Input(format!(
                "consolidate_defaults expects one borrower, got {} and {}",
                cur.borrower_id, next.borrower_id
            )));
        }
        if next.default_date <= cur.default_date {
            return Err(Error::Input(
                "spells must be sorted by default date".to_string(),
            ));
        }
        let cur_out = cur.out_date.ok_or_else(|| {
            Error::Input("an unresolved spell must be the borrower's last".to_string())
        })?;
        let cur_last = cur.last_reporting_date().unwrap_or(cur_out);
        if next.default_date <= cur_last {
            return Err(Error::Input(format!(
                "spells overlap: default at {} inside a spell ending {}",
                next.default_date, cur_last
            )));
        }
        let gap = probation_gap(cur_out, next.default_date)?;
        if gap > CONSOLIDATION_GAP_MONTHS {
            out.push(next);
            continue;
        }
        let carried = cur.observations.last().unwrap().outstanding;
        let mut m = cur_last.plus(1);
        while m < next.default_date {
            cur.observations.push(Observation {
                reporting_date: m,
                outstanding: carried,
                cash_recovery: 0.0,
                collateral_recovery: 0.0,
                cost: 0.0,
                write_off: 0.0,
            });
            m = m.plus(1);
        }
        cur.observations.extend(next.observations);
        cur.out_date = next.out_date;
        cur.final_status = next.final_status;
    }
    for (i, spell) in out.iter_mut().enumerate() {
        spell.spell_index = i as u32;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn month(y: i32, m: u32) -> MonthIndex {
        MonthIndex::from_ym(y, m).unwrap()
    }

    fn flat_spell(
        borrower: u32,
        from: MonthIndex,
        months: u32,
        status: FinalStatus,
    ) -> DefaultSpell {
        let observations = (0..=months as i32)
            .map(|i| Observation {
                reporting_date: from.plus(i),
                outstanding: 100.0,
                cash_recovery: 0.0,
                collateral_recovery: 0.0,
                cost: 0.0,
                write_off: 0.0,
            })
            .collect();
        DefaultSpell {
            borrower_id: borrower,
            spell_index: 0,
            default_date: from,
            out_date: (status != FinalStatus::NotResolved).then(|| from.plus(months as i32)),
            reason: DefaultReason::Days90,
            final_status: status,
            cover_value_index: 1.0,
            unsecured_rate: 0.05,
            secured_rate: 0.03,
            observations,
        }
    }

    #[test]
    fn month_index_arithmetic() {
        assert_eq!(months_between(month(2008, 1), month(2008, 1)).unwrap(), 0);
        assert_eq!(months_between(month(2008, 1), month(2009, 1)).unwrap(), 12);
        assert_eq!(months_between(month(2010, 3), month(2010, 7)).unwrap(), 4);
        assert!(months_between(month(2010, 7), month(2010, 3)).is_err());
    }

    #[test]
    fn month_index_roundtrip_and_quarters() {
        for (y, m) in [(2000, 1), (2008, 12), (2019, 6), (1999, 11)] {
            let idx = month(y, m);
            assert_eq!(idx.year(), y);
            assert_eq!(idx.month(), m);
            assert_eq!(idx.to_string().parse::<MonthIndex>().unwrap(), idx);
        }
        assert_eq!(month(2010, 4).quarter(), QuarterKey { year: 2010, quarter: 2 });
        assert_eq!(month(2010, 6).quarter(), QuarterKey { year: 2010, quarter: 2 });
        assert_eq!("2010-Q2".parse::<QuarterKey>().unwrap().to_string(), "2010-Q2");
        assert!("2010-13".parse::<MonthIndex>().is_err());
        assert!("2010-Q5".parse::<QuarterKey>().is_err());
    }

    #[test]
    fn month_between_is_additive() {
        let a = month(2008, 3);
        let b = month(2011, 7);
        let c = month(2015, 2);
        let ab = months_between(a, b).unwrap();
        let bc = months_between(b, c).unwrap();
        let ac = months_between(a, c).unwrap();
        assert_eq!(ab + bc, ac);
    }

    #[test]
    fn status_and_reason_tokens_roundtrip() {
        for s in FinalStatus::ALL {
            assert_eq!(s.as_str().parse::<FinalStatus>().unwrap(), s);
        }
        for r in DefaultReason::ALL {
            assert_eq!(r.as_str().parse::<DefaultReason>().unwrap(), r);
        }
        assert!(FinalStatus::Cured.is_resolved());
        assert!(!FinalStatus::Cured.is_loss_group());
        assert!(FinalStatus::NotResolved.is_loss_group());
        assert!(FinalStatus::ExitWithLoss.is_loss_group());
        assert!(!FinalStatus::ExitNoLoss.is_loss_group());
    }

    #[test]
    fn validate_flags_each_broken_invariant() {
        let good = flat_spell(1, month(2010, 1), 5, FinalStatus::Cured);
        assert!(validate_spell(&good).is_empty());

        let mut no_ead = good.clone();
        for o in &mut no_ead.observations {
            o.outstanding = 0.0;
        }
        assert!(validate_spell(&no_ead)
            .iter()
            .any(|m| m.contains("EAD must be positive")));

        let mut gap = good.clone();
        gap.observations.remove(2);
        assert!(validate_spell(&gap)
            .iter()
            .any(|m| m.contains("non-contiguous")));

        let mut dangling = good.clone();
        dangling.out_date = None;
        assert!(validate_spell(&dangling)
            .iter()
            .any(|m| m.contains("out_date")));

        let mut dragging = good;
        dragging.final_status = FinalStatus::NotResolved;
        assert!(validate_spell(&dragging)
            .iter()
            .any(|m| m.contains("NotResolved")));
    }

    #[test]
    fn consolidation_merges_short_gaps_only() {
        // Jan..Mar then Jun..Aug leaves April and May in between.
        let a = flat_spell(7, month(2010, 1), 2, FinalStatus::Cured);
        let mut b = flat_spell(7, month(2010, 6), 2, FinalStatus::ExitNoLoss);
        b.spell_index = 1;
        let merged = consolidate_defaults(vec![a.clone(), b]).unwrap();
        assert_eq!(merged.len(), 1);
        let spell = &merged[0];
        assert_eq!(spell.default_date, month(2010, 1));
        assert_eq!(spell.out_date, Some(month(2010, 8)));
        assert_eq!(spell.final_status, FinalStatus::ExitNoLoss);
        assert_eq!(spell.reason, DefaultReason::Days90);
        assert_eq!(spell.observations.len(), 8);
        assert!(validate_spell(spell).is_empty());

        // Jan..Mar then Aug..Dec leaves a four month gap, so two spells remain.
        let mut c = flat_spell(7, month(2010, 8), 4, FinalStatus::ExitNoLoss);
        c.spell_index = 1;
        let kept = consolidate_defaults(vec![a.clone(), c]).unwrap();
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[1].spell_index, 1);

        assert_eq!(consolidate_defaults(vec![a]).unwrap().len(), 1);
    }

    #[test]
    fn consolidation_is_idempotent() {
        let a = flat_spell(7, month(2010, 1), 2, FinalStatus::Cured);
        let mut b = flat_spell(7, month(2010, 7), 3, FinalStatus::Cured);
        b.spell_index = 1;
        let mut c = flat_spell(7, month(2012, 1), 4, FinalStatus::NotResolved);
        c.spell_index = 2;
        let once = consolidate_defaults(vec![a, b, c]).unwrap();
        let twice = consolidate_defaults(once.clone()).unwrap();
        assert_eq!(once, twice);
        for w in once.windows(2) {
            let gap = probation_gap(w[0].out_date.unwrap(), w[1].default_date).unwrap();
            assert!(gap > CONSOLIDATION_GAP_MONTHS);
        }
    }

    #[test]
    fn consolidation_rejects_overlap() {
        let a = flat_spell(7, month(2010, 1), 6, FinalStatus::Cured);
        let mut b = flat_spell(7, month(2010, 4), 2, FinalStatus::Cured);
        b.spell_index = 1;
        assert!(consolidate_defaults(vec![a, b]).is_err());
    }

    #[test]
    fn macro_coverage_reports_gaps() {
        let mut series = MacroSeries {
            gdp: BTreeMap::new(),
            employment: BTreeMap::new(),
            hpi: BTreeMap::new(),
            base_rate: BTreeMap::new(),
            discount_addon: 0.05,
        };
        let start = month(2010, 1);
        let end = month(2010, 6);
        let mut m = start;
        while m <= end {
            series.base_rate.insert(m, 0.01);
            m = m.plus(1);
        }
        for q in [QuarterKey { year: 2010, quarter: 1 }, QuarterKey { year: 2010, quarter: 2 }] {
            series.gdp.insert(q, 1.0);
            series.employment.insert(q, 2.0);
            series.hpi.insert(q, 3.0);
        }
        assert!(series.check_coverage(start, end).is_ok());
        series.hpi.remove(&QuarterKey { year: 2010, quarter: 2 });
        let err = series.check_coverage(start, end).unwrap_err();
        assert!(err.to_string().contains("hpi"));
        assert!(err.to_string().contains("2010-Q2"));
    }
}
