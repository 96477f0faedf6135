//! Credit-loss analytics: realized LGD engines, synthetic portfolio
//! generation, feature engineering, boosted-tree regression and the
//! evaluation protocol around them.

pub mod cashflow;
pub mod delta_os;
pub mod domain;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbt;
pub mod search;
pub mod synth;

pub use cashflow::{DiscountPolicy, LgdRecord, RateSource};
pub use domain::{
    DefaultReason, DefaultSpell, FinalStatus, MacroSeries, MonthIndex, Observation, QuarterKey,
};
pub use error::{Error, Result};
