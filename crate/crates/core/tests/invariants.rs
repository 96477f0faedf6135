//! Randomized invariant checks across the engines, the calendar arithmetic,
//! the spell consolidation rules and the search plumbing.

use std::collections::{BTreeMap, HashMap};

use proptest::collection::vec;
use proptest::prelude::*;

use lgdlab_core::cashflow::{discount_factor, realized_lgd_series};
use lgdlab_core::delta_os::{delta_os_table, expand_spell, rlgd_delta_os};
use lgdlab_core::domain::{consolidate_defaults, months_between, validate_spell};
use lgdlab_core::eval::{compute_metrics, histogram};
use lgdlab_core::search::kfold_split;
use lgdlab_core::{
    DefaultReason, DefaultSpell, DiscountPolicy, FinalStatus, MacroSeries, MonthIndex,
    Observation, RateSource,
};

fn empty_series() -> MacroSeries {
    MacroSeries {
        gdp: BTreeMap::new(),
        employment: BTreeMap::new(),
        hpi: BTreeMap::new(),
        base_rate: BTreeMap::new(),
        discount_addon: 0.05,
    }
}

fn base_spell(d0: MonthIndex, observations: Vec<Observation>, status: FinalStatus) -> DefaultSpell {
    let out_date = if status == FinalStatus::NotResolved {
        None
    } else {
        Some(observations.last().unwrap().reporting_date)
    };
    DefaultSpell {
        borrower_id: 1,
        spell_index: 0,
        default_date: d0,
        out_date,
        reason: DefaultReason::Days90,
        final_status: status,
        cover_value_index: 1.0,
        unsecured_rate: 0.06,
        secured_rate: 0.04,
        observations,
    }
}

/// Spell whose ledger explains every balance decrease as same-month cash.
fn cash_ledger_spell(os: &[f64]) -> DefaultSpell {
    let d0 = MonthIndex::from_ym(2010, 1).unwrap();
    let observations = os
        .iter()
        .enumerate()
        .map(|(t, &bal)| Observation {
            reporting_date: d0.plus(t as i32),
            outstanding: bal,
            cash_recovery: if t == 0 { 0.0 } else { os[t - 1] - bal },
            collateral_recovery: 0.0,
            cost: 0.0,
            write_off: 0.0,
        })
        .collect();
    base_spell(d0, observations, FinalStatus::NotResolved)
}

fn decaying_path() -> impl Strategy<Value = Vec<f64>> {
    (2usize..50, 1e3f64..1e6).prop_flat_map(|(n, ead)| {
        vec(0.55f64..=1.0, n - 1).prop_map(move |fracs| {
            let mut os = vec![ead];
            for f in fracs {
                let next = os.last().unwrap() * f;
                os.push(next);
            }
            os
        })
    })
}

proptest! {
    #[test]
    fn engines_agree_when_deltas_are_cash(os in decaying_path(), rate in 0.0f64..0.2) {
        let spell = cash_ledger_spell(&os);
        let policy = DiscountPolicy::fixed(rate);
        let series = empty_series();
        let cash = realized_lgd_series(&spell, &policy, &series).unwrap();
        let approx = rlgd_delta_os(&spell, &policy, &series).unwrap();
        prop_assert_eq!(cash.len(), approx.len());
        for (c, o) in cash.iter().zip(&approx) {
            prop_assert!((c.rlgd - o.rlgd).abs() <= 1e-9);
            prop_assert!((c.el - o.el).abs() <= 1e-6 * os[0].max(1.0));
        }
    }

    #[test]
    fn cumulative_discounted_sums_grow_monotonically(os in decaying_path(), rate in 0.0f64..0.2) {
        let spell = cash_ledger_spell(&os);
        let policy = DiscountPolicy::fixed(rate);
        let table = delta_os_table(&spell, &policy, &empty_series()).unwrap();
        prop_assert_eq!(table.len(), os.len() * (os.len() + 1) / 2);
        let mut by_ref: HashMap<MonthIndex, (f64, f64)> = HashMap::new();
        for row in &table {
            prop_assert!(row.reference_date <= row.reporting_date);
            if let Some(&(prev_cum, prev_el)) = by_ref.get(&row.reference_date) {
                prop_assert!(row.cum_disc_delta >= prev_cum - 1e-9);
                prop_assert!(row.el_running <= prev_el + 1e-9);
            }
            by_ref.insert(row.reference_date, (row.cum_disc_delta, row.el_running));
        }
    }

    #[test]
    fn zero_rate_loss_telescopes_to_the_final_balance(
        mut os in vec(0.0f64..1e6, 1..60),
        status_idx in 0usize..4,
    ) {
        os[0] = os[0].max(1.0);
        let d0 = MonthIndex::from_ym(2011, 6).unwrap();
        let observations: Vec<Observation> = os
            .iter()
            .enumerate()
            .map(|(t, &bal)| Observation {
                reporting_date: d0.plus(t as i32),
                outstanding: bal,
                cash_recovery: 0.0,
                collateral_recovery: 0.0,
                cost: 0.0,
                write_off: 0.0,
            })
            .collect();
        let spell = base_spell(d0, observations, FinalStatus::ALL[status_idx]);
        let records = rlgd_delta_os(&spell, &DiscountPolicy::fixed(0.0), &empty_series()).unwrap();
        let final_os = *os.last().unwrap();
        let tol = 1e-9 * os.iter().sum::<f64>().max(1.0);
        for rec in &records {
            prop_assert!((rec.el - final_os).abs() <= tol);
        }
    }

    #[test]
    fn both_engines_floor_rlgd_at_zero(
        ledger in vec((1.0f64..1e6, 0.0f64..3e5, 0.0f64..3e5, 0.0f64..5e4), 1..40),
        status_idx in 0usize..4,
        per_flow in any::<bool>(),
        rate in 0.0f64..0.3,
    ) {
        let d0 = MonthIndex::from_ym(2009, 3).unwrap();
        let observations: Vec<Observation> = ledger
            .iter()
            .enumerate()
            .map(|(t, &(outstanding, cash, coll, cost))| Observation {
                reporting_date: d0.plus(t as i32),
                outstanding,
                cash_recovery: if t == 0 { 0.0 } else { cash },
                collateral_recovery: if t == 0 { 0.0 } else { coll },
                cost: if t == 0 { 0.0 } else { cost },
                write_off: 0.0,
            })
            .collect();
        let spell = base_spell(d0, observations, FinalStatus::ALL[status_idx]);
        let policy = if per_flow {
            DiscountPolicy { rate_source: RateSource::PerFlowRates }
        } else {
            DiscountPolicy::fixed(rate)
        };
        let series = empty_series();
        for records in [
            realized_lgd_series(&spell, &policy, &series).unwrap(),
            rlgd_delta_os(&spell, &policy, &series).unwrap(),
        ] {
            for rec in &records {
                prop_assert!(rec.rlgd >= 0.0);
                prop_assert!(rec.el.is_finite());
                prop_assert_eq!(rec.rlgd, rec.rlgd_raw.max(0.0));
            }
        }
    }

    #[test]
    fn expansion_is_triangular(n in 1u32..120) {
        let spell = cash_ledger_spell(&vec![100.0; n as usize]);
        let pairs = expand_spell(&spell).unwrap();
        prop_assert_eq!(pairs.len(), (n as usize * (n as usize + 1)) / 2);
        for window in pairs.windows(2) {
            prop_assert!(window[0] < window[1]);
        }
        for (r, t) in pairs {
            prop_assert!(r <= t);
        }
    }

    #[test]
    fn month_arithmetic_is_additive(base in -6000i32..6000, k1 in 0i32..400, k2 in 0i32..400) {
        let a = MonthIndex(base);
        prop_assert_eq!(months_between(a, a.plus(k1)).unwrap(), k1 as u32);
        prop_assert_eq!(months_between(a.plus(k1), a.plus(k1 + k2)).unwrap(), k2 as u32);
        prop_assert_eq!(months_between(a, a.plus(k1 + k2)).unwrap(), (k1 + k2) as u32);
    }

    #[test]
    fn month_formatting_round_trips(year in 1990i32..2100, month in 1u32..=12) {
        let m = MonthIndex::from_ym(year, month).unwrap();
        let parsed: MonthIndex = m.to_string().parse().unwrap();
        prop_assert_eq!(parsed, m);
        prop_assert_eq!((m.year(), m.month()), (year, month));
    }

    #[test]
    fn discounting_never_inflates_flows(rate in 0.0f64..0.5, t in 0i32..360) {
        let df = discount_factor(rate, t).unwrap();
        prop_assert!(df >= 1.0);
        prop_assert_eq!(discount_factor(rate, 0).unwrap(), 1.0);
        prop_assert_eq!(discount_factor(0.0, t).unwrap(), 1.0);
        if t > 0 && rate > 0.0 {
            prop_assert!(df > discount_factor(rate, t - 1).unwrap());
        }
    }

    #[test]
    fn consolidation_is_idempotent(segments in vec((1u32..10, 1u32..8), 1..6)) {
        let mut cursor = MonthIndex::from_ym(2008, 1).unwrap();
        let mut chain = Vec::new();
        for (i, &(len, gap)) in segments.iter().enumerate() {
            let observations: Vec<Observation> = (0..len)
                .map(|t| Observation {
                    reporting_date: cursor.plus(t as i32),
                    outstanding: 100.0,
                    cash_recovery: 0.0,
                    collateral_recovery: 0.0,
                    cost: 0.0,
                    write_off: 0.0,
                })
                .collect();
            let mut spell = base_spell(cursor, observations, FinalStatus::Cured);
            spell.spell_index = i as u32;
            let out = spell.out_date.unwrap();
            chain.push(spell);
            cursor = out.plus(gap as i32);
        }

        let once = consolidate_defaults(chain).unwrap();
        let twice = consolidate_defaults(once.clone()).unwrap();
        prop_assert_eq!(&twice, &once);
        for (i, spell) in once.iter().enumerate() {
            prop_assert_eq!(spell.spell_index, i as u32);
            prop_assert!(validate_spell(spell).is_empty(), "{:?}", validate_spell(spell));
        }
        for w in once.windows(2) {
            let gap = months_between(w[0].out_date.unwrap(), w[1].default_date).unwrap() - 1;
            prop_assert!(gap > 3, "unmerged gap of {gap} months");
        }
    }

    #[test]
    fn kfold_partitions_rows_and_confines_groups(
        keys in vec(0u8..20, 10..200),
        k in 2u32..6,
        seed in 0u64..1000,
    ) {
        let distinct = keys.iter().collect::<std::collections::HashSet<_>>().len();
        prop_assume!(distinct >= k as usize);

        let folds = kfold_split(&keys, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k as usize);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..keys.len()).collect::<Vec<_>>());

        let mut fold_of_group: HashMap<u8, usize> = HashMap::new();
        let mut groups_per_fold = vec![std::collections::HashSet::new(); k as usize];
        for (f, rows) in folds.iter().enumerate() {
            for &row in rows {
                let entry = fold_of_group.entry(keys[row]).or_insert(f);
                prop_assert_eq!(*entry, f, "group {} split across folds", keys[row]);
                groups_per_fold[f].insert(keys[row]);
            }
        }
        let sizes: Vec<usize> = groups_per_fold.iter().map(|g| g.len()).collect();
        let min = *sizes.iter().min().unwrap();
        let max = *sizes.iter().max().unwrap();
        prop_assert!(max - min <= 1, "fold group counts {sizes:?}");
    }

    #[test]
    fn metrics_match_their_naive_definitions(
        pairs in vec((-2.0f64..2.0, -2.0f64..2.0), 2..100),
    ) {
        let preds: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let m = compute_metrics(&preds, &truth).unwrap();
        let n = pairs.len() as f64;
        let errors: Vec<f64> = preds.iter().zip(&truth).map(|(p, t)| p - t).collect();
        let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
        let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
        let mean = errors.iter().sum::<f64>() / n;
        let sd = (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!((m.mae - mae).abs() <= 1e-12);
        prop_assert!((m.mse - mse).abs() <= 1e-12);
        prop_assert!((m.sd_error - sd).abs() <= 1e-12);
        prop_assert_eq!(m.n, pairs.len());
    }

    #[test]
    fn histogram_counts_every_value_once(
        values in vec(-0.5f64..1.5, 1..300),
        bins in 1usize..30,
    ) {
        let hist = histogram(&values, 0.0, 1.0, bins).unwrap();
        prop_assert_eq!(hist.len(), bins);
        let total: u64 = hist.iter().map(|b| b.count).sum();
        prop_assert_eq!(total as usize, values.len());
        for w in hist.windows(2) {
            prop_assert_eq!(w[0].hi, w[1].lo);
        }
    }
}
