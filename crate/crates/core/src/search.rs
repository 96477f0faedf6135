//! Hyperparameter search: randomized and exhaustive grid search over the
//! boosting parameters, scored by group-aware k-fold cross-validation MSE.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::compute_metrics;
use crate::gbt::{train_with_presort, Dataset, GbtParams, Presorted};

/// One search dimension: a finite candidate list or a uniform interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    Values(Vec<f64>),
    Range(f64, f64),
    IntRange(i64, i64),
}

impl Dim {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Dim::Values(v) => v[rng.random_range(0..v.len())],
            Dim::Range(lo, hi) => rng.random_range(*lo..*hi),
            Dim::IntRange(lo, hi) => rng.random_range(*lo..=*hi) as f64,
        }
    }

    fn check(&self, name: &str, ok: impl Fn(f64) -> bool) -> Result<()> {
        let bad = |v: f64| {
            Err(Error::Config(format!(
                "search dimension {name}: value {v} is out of bounds"
            )))
        };
        match self {
            Dim::Values(v) => {
                if v.is_empty() {
                    return Err(Error::Config(format!(
                        "search dimension {name}: empty value list"
                    )));
                }
                for &x in v {
                    if !x.is_finite() || !ok(x) {
                        return bad(x);
                    }
                }
            }
            Dim::Range(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Config(format!(
                        "search dimension {name}: invalid interval ({lo}, {hi})"
                    )));
                }
                if !ok(*lo) {
                    return bad(*lo);
                }
                if !ok(*hi) {
                    return bad(*hi);
                }
            }
            Dim::IntRange(lo, hi) => {
                if lo > hi {
                    return Err(Error::Config(format!(
                        "search dimension {name}: invalid interval ({lo}, {hi})"
                    )));
                }
                if !ok(*lo as f64) {
                    return bad(*lo as f64);
                }
                if !ok(*hi as f64) {
                    return bad(*hi as f64);
                }
            }
        }
        Ok(())
    }
}

/// Search space over the six tuned hyperparameters. Candidate draws consume
/// the dimensions in field order. Integer-valued fields round their draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpace {
    pub learning_rate: Dim,
    pub max_depth: Dim,
    pub n_estimators: Dim,
    pub subsample: Dim,
    pub min_child_weight: Dim,
    pub colsample_bytree: Dim,
}

impl Default for ParamSpace {
    /// The wide default grid used for model selection.
    fn default() -> Self {
        ParamSpace {
            learning_rate: Dim::Values(vec![0.01, 0.05, 0.075, 0.1, 0.2]),
            max_depth: Dim::Values((7..=15).map(f64::from).collect()),
            n_estimators: Dim::Values(vec![
                700.0, 800.0, 900.0, 1000.0, 1100.0, 1150.0, 1200.0, 1250.0, 1300.0,
            ]),
            subsample: Dim::Values(vec![0.6, 0.7, 0.75, 0.8, 0.85]),
            min_child_weight: Dim::Values(vec![2.0, 3.0, 4.0, 5.0, 6.0]),
            colsample_bytree: Dim::Values(vec![0.7, 0.8, 0.85, 0.9, 0.91, 0.92, 0.95]),
        }
    }
}

impl ParamSpace {
    /// Interval-based space for the hyperparameter sensitivity sweep.
    pub fn wide_intervals() -> Self {
        ParamSpace {
            learning_rate: Dim::Range(0.01, 0.2),
            max_depth: Dim::IntRange(6, 16),
            n_estimators: Dim::IntRange(900, 1400),
            subsample: Dim::Range(0.6, 0.9),
            min_child_weight: Dim::IntRange(3, 7),
            colsample_bytree: Dim::Range(0.7, 0.95),
        }
    }

    fn dims(&self) -> [(&'static str, &Dim); 6] {
        [
            ("learning_rate", &self.learning_rate),
            ("max_depth", &self.max_depth),
            ("n_estimators", &self.n_estimators),
            ("subsample", &self.subsample),
            ("min_child_weight", &self.min_child_weight),
            ("colsample_bytree", &self.colsample_bytree),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.learning_rate
            .check("learning_rate", |v| v > 0.0 && v <= 1.0)?;
        self.max_depth.check("max_depth", |v| v.round() >= 1.0)?;
        self.n_estimators
            .check("n_estimators", |v| v.round() >= 1.0)?;
        self.subsample.check("subsample", |v| v > 0.0 && v <= 1.0)?;
        self.min_child_weight
            .check("min_child_weight", |v| v >= 0.0)?;
        self.colsample_bytree
            .check("colsample_bytree", |v| v > 0.0 && v <= 1.0)?;
        Ok(())
    }

    /// Replaces every interval dimension with a finite list: integer
    /// intervals no wider than `n_per_dim` are enumerated in full, anything
    /// else becomes `n_per_dim` seeded uniform draws.
    pub fn materialize(&self, seed: u64, n_per_dim: usize) -> Result<ParamSpace> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for (dim, slot) in self.dims().iter().map(|(_, d)| *d).zip([
            &mut out.learning_rate,
            &mut out.max_depth,
            &mut out.n_estimators,
            &mut out.subsample,
            &mut out.min_child_weight,
            &mut out.colsample_bytree,
        ]) {
            *slot = match dim {
                Dim::Values(v) => Dim::Values(v.clone()),
                Dim::IntRange(lo, hi) if (hi - lo) < n_per_dim as i64 => {
                    Dim::Values((*lo..=*hi).map(|v| v as f64).collect())
                }
                d => Dim::Values((0..n_per_dim).map(|_| d.sample(&mut rng)).collect()),
            };
        }
        Ok(out)
    }

    fn grid_lists(&self) -> Result<Vec<&[f64]>> {
        self.dims()
            .iter()
            .map(|(name, dim)| match dim {
                Dim::Values(v) => Ok(v.as_slice()),
                _ => Err(Error::Config(format!(
                    "grid search requires finite value lists, {name} is an interval"
                ))),
            })
            .collect()
    }
}

fn params_from_draws(draws: [f64; 6], model_seed: u64) -> GbtParams {
    GbtParams {
        learning_rate: draws[0],
        max_depth: draws[1].round() as u32,
        n_estimators: draws[2].round() as u32,
        subsample: draws[3],
        min_child_weight: draws[4],
        colsample_bytree: draws[5],
        seed: model_seed,
        ..GbtParams::default()
    }
}

/// Candidate `i` of a randomized search: a pure function of `(seed, i)`, so
/// extending a run only appends candidates and never reshuffles earlier ones.
pub fn candidate_params(space: &ParamSpace, seed: u64, index: u32) -> Result<GbtParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(index));
    let mut draws = [0.0; 6];
    for (slot, (_, dim)) in draws.iter_mut().zip(space.dims()) {
        *slot = dim.sample(&mut rng);
    }
    let params = params_from_draws(draws, rng.random());
    params.validate()?;
    Ok(params)
}

/// One scored parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: GbtParams,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
    pub mean_mae: f64,
    pub sd_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub candidates: Vec<Candidate>,
    pub best_index: usize,
    pub seed: u64,
    pub n_folds: u32,
    pub n_iter: u32,
    pub fits: u64,
}

impl SearchResult {
    pub fn best(&self) -> &Candidate {
        &self.candidates[self.best_index]
    }
}

/// Cross-validation scores for a single parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub mean_mse: f64,
    pub mean_mae: f64,
    pub sd_error: f64,
    pub per_fold: Vec<f64>,
}

/// Splits rows into `k` folds by group key: all rows sharing a key land in
/// one fold, and fold group counts differ by at most one. Returns the row
/// indices of each fold, ascending within a fold.
pub fn kfold_split<K: Clone + Eq + Hash>(
    keys: &[K],
    k: u32,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut group_of: HashMap<&K, usize> = HashMap::new();
    let mut n_groups = 0;
    for key in keys {
        group_of.entry(key).or_insert_with(|| {
            n_groups += 1;
            n_groups - 1
        });
    }
    if (k as usize) > n_groups {
        return Err(Error::Config(format!(
            "{k} folds requested but only {n_groups} groups available"
        )));
    }
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of_group = vec![0usize; n_groups];
    for (pos, &g) in order.iter().enumerate() {
        fold_of_group[g] = pos % k as usize;
    }
    let mut folds = vec![Vec::new(); k as usize];
    for (row, key) in keys.iter().enumerate() {
        folds[fold_of_group[group_of[key]]].push(row);
    }
    Ok(folds)
}

struct FoldSet {
    train_data: Dataset,
    train_y: Vec<f64>,
    presort: Presorted,
    eval_data: Dataset,
    eval_y: Vec<f64>,
}

fn build_folds<K: Clone + Eq + Hash>(
    data: &Dataset,
    y: &[f64],
    groups: &[K],
    k: u32,
    seed: u64,
) -> Result<Vec<FoldSet>> {
    if groups.len() != data.n_rows() || y.len() != data.n_rows() {
        return Err(Error::Input(format!(
            "{} rows, {} targets, {} group keys",
            data.n_rows(),
            y.len(),
            groups.len()
        )));
    }
    let folds = kfold_split(groups, k, seed)?;
    let mut out = Vec::with_capacity(folds.len());
    for eval_rows in &folds {
        let mut held_out = vec![false; data.n_rows()];
        for &r in eval_rows {
            held_out[r] = true;
        }
        let train_rows: Vec<usize> = (0..data.n_rows()).filter(|r| !held_out[*r]).collect();
        let train_data = data.select_rows(&train_rows)?;
        let presort = Presorted::build(&train_data);
        out.push(FoldSet {
            train_y: train_rows.iter().map(|&r| y[r]).collect(),
            train_data,
            presort,
            eval_data: data.select_rows(eval_rows)?,
            eval_y: eval_rows.iter().map(|&r| y[r]).collect(),
        });
    }
    Ok(out)
}

fn score_on_folds(folds: &[FoldSet], params: &GbtParams) -> Result<Candidate> {
    let mut fold_mse = Vec::with_capacity(folds.len());
    let mut mae_sum = 0.0;
    let mut sd_sum = 0.0;
    for fold in folds {
        let model = train_with_presort(params, &fold.train_data, &fold.train_y, &fold.presort)?;
        let preds = model.predict(&fold.eval_data)?;
        let m = compute_metrics(&preds, &fold.eval_y)?;
        fold_mse.push(m.mse);
        mae_sum += m.mae;
        sd_sum += m.sd_error;
    }
    let k = folds.len() as f64;
    Ok(Candidate {
        params: params.clone(),
        mean_mse: fold_mse.iter().sum::<f64>() / k,
        mean_mae: mae_sum / k,
        sd_error: sd_sum / k,
        fold_mse,
    })
}

/// Scores one parameter set with group-aware k-fold cross-validation.
pub fn cv_score<K: Clone + Eq + Hash>(
    data: &Dataset,
    y: &[f64],
    groups: &[K],
    params: &GbtParams,
    k: u32,
    seed: u64,
) -> Result<CvScore> {
    params.validate()?;
    let folds = build_folds(data, y, groups, k, seed)?;
    let c = score_on_folds(&folds, params)?;
    Ok(CvScore {
        mean_mse: c.mean_mse,
        mean_mae: c.mean_mae,
        sd_error: c.sd_error,
        per_fold: c.fold_mse,
    })
}

fn run_candidates(
    folds: &[FoldSet],
    params_list: Vec<GbtParams>,
    seed: u64,
    k: u32,
) -> Result<SearchResult> {
    let candidates: Vec<Candidate> = params_list
        .par_iter()
        .map(|params| score_on_folds(folds, params))
        .collect::<Result<_>>()?;
    let mut best_index = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.mean_mse < candidates[best_index].mean_mse {
            best_index = i;
        }
    }
    Ok(SearchResult {
        n_iter: candidates.len() as u32,
        fits: candidates.len() as u64 * u64::from(k),
        best_index,
        seed,
        n_folds: k,
        candidates,
    })
}

/// Randomized search: `n_iter` seeded candidates, each scored with k-fold
/// cross-validation; `fits` counts exactly `n_iter * k` model fits.
pub fn random_search<K: Clone + Eq + Hash>(
    space: &ParamSpace,
    n_iter: u32,
    k: u32,
    seed: u64,
    data: &Dataset,
    y: &[f64],
    groups: &[K],
) -> Result<SearchResult> {
    if n_iter == 0 {
        return Err(Error::Config("n_iter must be at least 1".into()));
    }
    space.validate()?;
    let params_list: Vec<GbtParams> = (0..n_iter)
        .map(|i| candidate_params(space, seed, i))
        .collect::<Result<_>>()?;
    let folds = build_folds(data, y, groups, k, seed)?;
    run_candidates(&folds, params_list, seed, k)
}

/// Exhaustive search over a finite grid, visited in lexicographic order
/// with the last dimension cycling fastest. Refuses grids larger than
/// `max_candidates`.
pub fn grid_search<K: Clone + Eq + Hash>(
    space: &ParamSpace,
    k: u32,
    seed: u64,
    max_candidates: usize,
    data: &Dataset,
    y: &[f64],
    groups: &[K],
) -> Result<SearchResult> {
    space.validate()?;
    let lists = space.grid_lists()?;
    let mut count: usize = 1;
    for l in &lists {
        count = count.checked_mul(l.len()).ok_or_else(|| {
            Error::Config("grid candidate count overflows".into())
        })?;
    }
    if count > max_candidates {
        return Err(Error::Config(format!(
            "grid has {count} candidates, above the budget of {max_candidates}"
        )));
    }
    let mut params_list = Vec::with_capacity(count);
    for i in 0..count {
        let mut draws = [0.0; 6];
        let mut rem = i;
        for d in (0..6).rev() {
            let list = lists[d];
            draws[d] = list[rem % list.len()];
            rem /= list.len();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let params = params_from_draws(draws, rng.random());
        params.validate()?;
        params_list.push(params);
    }
    let folds = build_folds(data, y, groups, k, seed)?;
    run_candidates(&folds, params_list, seed, k)
}
