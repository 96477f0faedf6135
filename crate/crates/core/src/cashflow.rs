//! Realized LGD from discounted cash flows: the workout approach.
//!
//! For every reporting date of a spell, taken as the reference date, the
//! economic loss discounts all later recoveries and costs back to that date
//! and the realized LGD is the loss per unit of exposure, floored at zero.

use serde::{Deserialize, Serialize};

use crate::domain::{months_between, DefaultSpell, FinalStatus, MacroSeries, MonthIndex};
use crate::error::{Error, Result};

/// Realized-LGD record for one (spell, reference date).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgdRecord {
    pub borrower_id: u32,
    pub spell_index: u32,
    pub reference_date: MonthIndex,
    /// Economic loss discounted to the reference date.
    pub el: f64,
    /// Outstanding balance at the reference date.
    pub exposure_at_ref: f64,
    /// el / exposure_at_ref; may be negative or exceed 1.
    pub rlgd_raw: f64,
    /// rlgd_raw floored at 0.
    pub rlgd: f64,
    pub resolved: bool,
}

/// Where the annual discount rate comes from.
///
/// `BaseRatePlusAddon` fixes the rate at each reference date as the monthly
/// base rate plus the series add-on. `PerFlowRates` discounts cash recoveries
/// and costs at the spell's unsecured rate and collateral recoveries at its
/// secured rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    BaseRatePlusAddon,
    FixedRate(f64),
    PerFlowRates,
}

/// Discounting convention. Compounding is monthly: a flow `t` months after
/// the reference date is divided by `(1 + rate/12)^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountPolicy {
    pub rate_source: RateSource,
}

impl Default for DiscountPolicy {
    fn default() -> Self {
        DiscountPolicy {
            rate_source: RateSource::BaseRatePlusAddon,
        }
    }
}

impl DiscountPolicy {
    pub fn fixed(rate: f64) -> Self {
        DiscountPolicy {
            rate_source: RateSource::FixedRate(rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let RateSource::FixedRate(r) = self.rate_source {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::Config(format!(
                    "fixed discount rate must be finite and non-negative, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// Monthly-compounded discount factor for an annual rate over `t_months`.
pub fn discount_factor(annual_rate: f64, t_months: i32) -> Result<f64> {
    if t_months < 0 {
        return Err(Error::Input(format!(
            "discount horizon must be non-negative, got {t_months} months"
        )));
    }
    if !annual_rate.is_finite() || annual_rate < 0.0 {
        return Err(Error::Input(format!(
            "annual rate must be finite and non-negative, got {annual_rate}"
        )));
    }
    Ok((1.0 + annual_rate / 12.0).powi(t_months))
}

fn require_valid(spell: &DefaultSpell) -> Result<()> {
    let problems = crate::domain::validate_spell(spell);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpell {
            borrower_id: spell.borrower_id,
            spell_index: spell.spell_index,
            details: problems.join("; "),
        })
    }
}

/// Economic loss at `reference_date`: exposure minus discounted recoveries
/// plus discounted costs, over flows strictly after the reference date.
///
/// Cured spells additionally recover their full remaining balance at the out
/// date, so their loss reflects discounting only.
pub fn economic_loss(
    spell: &DefaultSpell,
    reference_date: MonthIndex,
    policy: &DiscountPolicy,
    macro_series: &MacroSeries,
) -> Result<f64> {
    let ref_pos = spell
        .observations
        .iter()
        .position(|o| o.reporting_date == reference_date)
        .ok_or_else(|| {
            Error::Input(format!(
                "reference date {reference_date} is not a reporting date of spell {}/{}",
                spell.borrower_id, spell.spell_index
            ))
        })?;
    let exposure = spell.observations[ref_pos].outstanding;

    let flat_rate = match policy.rate_source {
        RateSource::BaseRatePlusAddon => Some(macro_series.discount_rate_at(reference_date)?),
        RateSource::FixedRate(r) => Some(r),
        RateSource::PerFlowRates => None,
    };

    let mut recovered = 0.0;
    let mut costs = 0.0;
    for obs in &spell.observations[ref_pos + 1..] {
        let t = months_between(reference_date, obs.reporting_date)? as i32;
        match flat_rate {
            Some(rate) => {
                let df = discount_factor(rate, t)?;
                recovered += (obs.cash_recovery + obs.collateral_recovery) / df;
                costs += obs.cost / df;
            }
            None => {
                let df_cash = discount_factor(spell.unsecured_rate, t)?;
                let df_coll = discount_factor(spell.secured_rate, t)?;
                recovered += obs.cash_recovery / df_cash + obs.collateral_recovery / df_coll;
                costs += obs.cost / df_cash;
            }
        }
    }

    if spell.final_status == FinalStatus::Cured {
        if let (Some(out), Some(last)) = (spell.out_date, spell.observations.last()) {
            let remaining = last.outstanding;
            let t = months_between(reference_date, out)? as i32;
            let rate = match flat_rate {
                Some(rate) => rate,
                None => spell.unsecured_rate,
            };
            recovered += remaining / discount_factor(rate, t)?;
        }
    }

    Ok(exposure - recovered + costs)
}

/// One LgdRecord per reporting date of the spell, in date order.
pub fn realized_lgd_series(
    spell: &DefaultSpell,
    policy: &DiscountPolicy,
    macro_series: &MacroSeries,
) -> Result<Vec<LgdRecord>> {
    require_valid(spell)?;
    policy.validate()?;
    let resolved = spell.final_status.is_resolved();
    let mut records = Vec::with_capacity(spell.observations.len());
    for obs in &spell.observations {
        let el = economic_loss(spell, obs.reporting_date, policy, macro_series)?;
        let exposure = obs.outstanding;
        let rlgd_raw = if exposure > 0.0 { el / exposure } else { 0.0 };
        records.push(LgdRecord {
            borrower_id: spell.borrower_id,
            spell_index: spell.spell_index,
            reference_date: obs.reporting_date,
            el,
            exposure_at_ref: exposure,
            rlgd_raw,
            rlgd: rlgd_raw.max(0.0),
            resolved,
        });
    }
    Ok(records)
}

/// Workout LGD for a whole portfolio, ordered by (borrower, spell, reference date).
pub fn realized_lgd_portfolio(
    spells: &[DefaultSpell],
    policy: &DiscountPolicy,
    macro_series: &MacroSeries,
) -> Result<Vec<LgdRecord>> {
    use rayon::prelude::*;
    let mut per_spell = spells
        .par_iter()
        .map(|s| realized_lgd_series(s, policy, macro_series))
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<LgdRecord> = per_spell.drain(..).flatten().collect();
    records.sort_by_key(|r| (r.borrower_id, r.spell_index, r.reference_date));
    Ok(records)
}
