//! Gradient-boosted regression trees for squared-error loss.
//!
//! Second-order boosting with unit hessians: for squared error the gradient
//! of half the squared residual is `pred - y` and the hessian is 1, so node
//! hessian sums are row counts. Trees are grown level by level with exact
//! greedy splits over presorted feature columns. Leaf weights are stored
//! unshrunk; the learning rate is applied at prediction time, so a model
//! prediction is exactly `base_score + sum(lr * leaf_k)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gains at or below this threshold never produce a split.
pub const MIN_GAIN: f64 = 1e-12;

const SENTINEL: u32 = u32::MAX;

/// Column-major numeric matrix with named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, n_rows: usize) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Input(format!(
                "{} feature names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Input(format!(
                    "column {name:?} has {} values, expected {n_rows}",
                    col.len()
                )));
            }
            if let Some(v) = col.iter().find(|v| !v.is_finite()) {
                return Err(Error::Input(format!(
                    "column {name:?} contains a non-finite value {v}"
                )));
            }
        }
        Ok(Dataset {
            names,
            columns,
            n_rows,
        })
    }

    /// Builds a dataset from row-major records.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); p];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Input(format!(
                    "row {i} has {} values, expected {p}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                columns[j].push(*v);
            }
        }
        Dataset::new(names, columns, rows.len())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.columns[col]
    }

    /// Copies the given rows into a new dataset, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|r| **r >= self.n_rows) {
            return Err(Error::Input(format!(
                "row index {bad} out of bounds for {} rows",
                self.n_rows
            )));
        }
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        Dataset::new(self.names.clone(), columns, rows.len())
    }
}

/// Boosting hyperparameters. `base_score` of `None` uses the target mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub learning_rate: f64,
    pub max_depth: u32,
    pub n_estimators: u32,
    pub subsample: f64,
    pub min_child_weight: f64,
    pub colsample_bytree: f64,
    pub reg_lambda: f64,
    pub base_score: Option<f64>,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            learning_rate: 0.1,
            max_depth: 6,
            n_estimators: 100,
            subsample: 1.0,
            min_child_weight: 1.0,
            colsample_bytree: 1.0,
            reg_lambda: 1.0,
            base_score: None,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if self.n_estimators == 0 {
            return bad("n_estimators must be at least 1".into());
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample must be in (0, 1], got {}", self.subsample));
        }
        if !(self.min_child_weight.is_finite() && self.min_child_weight >= 0.0) {
            return bad(format!(
                "min_child_weight must be finite and non-negative, got {}",
                self.min_child_weight
            ));
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return bad(format!(
                "colsample_bytree must be in (0, 1], got {}",
                self.colsample_bytree
            ));
        }
        if !(self.reg_lambda.is_finite() && self.reg_lambda >= 0.0) {
            return bad(format!(
                "reg_lambda must be finite and non-negative, got {}",
                self.reg_lambda
            ));
        }
        if let Some(b) = self.base_score {
            if !b.is_finite() {
                return bad(format!("base_score must be finite, got {b}"));
            }
        }
        Ok(())
    }
}

/// Regularized optimal leaf weight for the given gradient statistics.
#[inline]
pub fn leaf_weight(grad_sum: f64, hess_sum: f64, reg_lambda: f64) -> f64 {
    -grad_sum / (hess_sum + reg_lambda)
}

#[inline]
fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, g: f64, h: f64, lambda: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda))
}

/// Midpoint threshold between adjacent sorted values `a < b`, nudged so the
/// `x < threshold` test always routes `a` left and `b` right even when the
/// midpoint rounds onto `a`.
#[inline]
fn split_threshold(a: f64, b: f64) -> f64 {
    let thr = 0.5 * a + 0.5 * b;
    if a < thr {
        thr
    } else {
        b
    }
}

/// A tree node; children are indices into the owning tree's node vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Unshrunk leaf weight for a row-major sample.
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        self.leaf_with(|feature| x[feature])
    }

    fn leaf_value_at(&self, data: &Dataset, row: usize) -> f64 {
        self.leaf_with(|feature| data.value(row, feature))
    }

    #[inline]
    fn leaf_with(&self, value: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if value(*feature) < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { weight, .. } => return *weight,
            }
        }
    }

    /// Number of split levels on the deepest path.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match &self.nodes[i] {
                Node::Split { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                Node::Leaf { .. } => max = max.max(d),
            }
        }
        max
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// A fitted boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub base_score: f64,
    pub feature_schema: Vec<String>,
    pub trees: Vec<Tree>,
}

impl GbtModel {
    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.names() != self.feature_schema.as_slice() {
            return Err(Error::Input(format!(
                "feature schema mismatch: model was fitted on {:?}, got {:?}",
                self.feature_schema,
                data.names()
            )));
        }
        let lr = self.params.learning_rate;
        Ok((0..data.n_rows())
            .map(|row| {
                let mut acc = self.base_score;
                for tree in &self.trees {
                    acc += lr * tree.leaf_value_at(data, row);
                }
                acc
            })
            .collect())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_schema.len() {
            return Err(Error::Input(format!(
                "sample has {} values, model expects {}",
                x.len(),
                self.feature_schema.len()
            )));
        }
        let mut acc = self.base_score;
        for tree in &self.trees {
            acc += self.params.learning_rate * tree.leaf_value(x);
        }
        Ok(acc)
    }
}

/// Row orderings per feature, ascending by value. Building this is the
/// expensive part of setup, so it can be shared across fits on the same data.
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl Presorted {
    pub fn build(data: &Dataset) -> Self {
        assert!((data.n_rows() as u64) < u64::from(SENTINEL));
        let order = (0..data.n_cols())
            .map(|f| {
                let col = data.column(f);
                let mut idx: Vec<u32> = (0..data.n_rows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    col[a as usize].partial_cmp(&col[b as usize]).unwrap()
                });
                idx
            })
            .collect();
        Presorted {
            order,
            n_rows: data.n_rows(),
        }
    }
}

/// Winning split found by an exact greedy scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitInfo {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_grad: f64,
    pub left_hess: f64,
    pub right_grad: f64,
    pub right_hess: f64,
}

/// Reference exact greedy split search over an explicit row subset. Scans
/// features in the given order and thresholds ascending; ties keep the first
/// candidate, so the lowest feature index and lowest threshold win.
pub fn best_split(
    data: &Dataset,
    rows: &[usize],
    features: &[usize],
    grad: &[f64],
    hess: &[f64],
    min_child_weight: f64,
    lambda: f64,
) -> Option<SplitInfo> {
    let total_g: f64 = rows.iter().map(|&r| grad[r]).sum();
    let total_h: f64 = rows.iter().map(|&r| hess[r]).sum();
    let mut best: Option<SplitInfo> = None;
    let mut best_gain = MIN_GAIN;
    let mut sorted = rows.to_vec();
    for &f in features {
        let col = data.column(f);
        sorted.sort_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap());
        let mut gl = 0.0;
        let mut hl = 0.0;
        let mut last = f64::NAN;
        for &r in &sorted {
            let v = col[r];
            if hl > 0.0 && v > last {
                let hr = total_h - hl;
                if hl >= min_child_weight && hr >= min_child_weight {
                    let gr = total_g - gl;
                    let gain = split_gain(gl, hl, gr, hr, total_g, total_h, lambda);
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some(SplitInfo {
                            feature: f,
                            threshold: split_threshold(last, v),
                            gain,
                            left_grad: gl,
                            left_hess: hl,
                            right_grad: gr,
                            right_hess: hr,
                        });
                    }
                }
            }
            gl += grad[r];
            hl += hess[r];
            last = v;
        }
        sorted.clone_from_slice(rows);
    }
    best
}

#[derive(Clone, Copy)]
struct ScanState {
    gsum: f64,
    count: f64,
    last: f64,
}

#[derive(Clone, Copy)]
struct BestCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct LevelNode {
    id: usize,
    g: f64,
    h: f64,
}

fn grow_tree(
    data: &Dataset,
    presort: &Presorted,
    grad: &[f64],
    in_node: &mut [u32],
    features: &[usize],
    params: &GbtParams,
) -> Tree {
    let n = data.n_rows();
    let lambda = params.reg_lambda;
    let mcw = params.min_child_weight;

    let mut root = LevelNode {
        id: 0,
        g: 0.0,
        h: 0.0,
    };
    for row in 0..n {
        if in_node[row] != SENTINEL {
            root.g += grad[row];
            root.h += 1.0;
        }
    }
    let mut nodes = vec![Node::Leaf {
        weight: 0.0,
        cover: 0.0,
    }];
    let mut level = vec![root];
    let mut depth = 0u32;

    while !level.is_empty() {
        let n_slots = level.len();
        let mut decisions: Vec<Option<(usize, f64, u32, u32)>> = vec![None; n_slots];
        let mut next: Vec<LevelNode> = Vec::new();

        if depth < params.max_depth {
            let mut best = vec![
                BestCandidate {
                    gain: MIN_GAIN,
                    feature: usize::MAX,
                    threshold: 0.0,
                };
                n_slots
            ];
            let mut states = vec![
                ScanState {
                    gsum: 0.0,
                    count: 0.0,
                    last: f64::NAN,
                };
                n_slots
            ];
            for &f in features {
                for st in states.iter_mut() {
                    *st = ScanState {
                        gsum: 0.0,
                        count: 0.0,
                        last: f64::NAN,
                    };
                }
                let col = data.column(f);
                for &row in &presort.order[f] {
                    let slot = in_node[row as usize];
                    if slot == SENTINEL {
                        continue;
                    }
                    let slot = slot as usize;
                    let st = &mut states[slot];
                    let v = col[row as usize];
                    if st.count > 0.0 && v > st.last {
                        let hl = st.count;
                        let hr = level[slot].h - hl;
                        if hl >= mcw && hr >= mcw {
                            let gl = st.gsum;
                            let gr = level[slot].g - gl;
                            let gain =
                                split_gain(gl, hl, gr, hr, level[slot].g, level[slot].h, lambda);
                            if gain > best[slot].gain {
                                best[slot] = BestCandidate {
                                    gain,
                                    feature: f,
                                    threshold: split_threshold(st.last, v),
                                };
                            }
                        }
                    }
                    st.gsum += grad[row as usize];
                    st.count += 1.0;
                    st.last = v;
                }
            }
            for (slot, cand) in best.iter().enumerate() {
                if cand.feature != usize::MAX {
                    let left = nodes.len();
                    let right = nodes.len() + 1;
                    nodes.push(Node::Leaf {
                        weight: 0.0,
                        cover: 0.0,
                    });
                    nodes.push(Node::Leaf {
                        weight: 0.0,
                        cover: 0.0,
                    });
                    nodes[level[slot].id] = Node::Split {
                        feature: cand.feature,
                        threshold: cand.threshold,
                        left,
                        right,
                    };
                    let left_slot = next.len() as u32;
                    decisions[slot] = Some((cand.feature, cand.threshold, left_slot, left_slot + 1));
                    next.push(LevelNode {
                        id: left,
                        g: 0.0,
                        h: 0.0,
                    });
                    next.push(LevelNode {
                        id: right,
                        g: 0.0,
                        h: 0.0,
                    });
                }
            }
        }

        for (slot, node) in level.iter().enumerate() {
            if decisions[slot].is_none() {
                nodes[node.id] = Node::Leaf {
                    weight: leaf_weight(node.g, node.h, lambda),
                    cover: node.h,
                };
            }
        }

        for row in 0..n {
            let slot = in_node[row];
            if slot == SENTINEL {
                continue;
            }
            match decisions[slot as usize] {
                Some((feature, threshold, left_slot, right_slot)) => {
                    let goes_left = data.value(row, feature) < threshold;
                    let new_slot = if goes_left { left_slot } else { right_slot };
                    in_node[row] = new_slot;
                    let child = &mut next[new_slot as usize];
                    child.g += grad[row];
                    child.h += 1.0;
                }
                None => in_node[row] = SENTINEL,
            }
        }

        level = next;
        depth += 1;
    }

    Tree { nodes }
}

fn mean(y: &[f64]) -> f64 {
    y.iter().sum::<f64>() / y.len() as f64
}

/// Fits a boosted ensemble, presorting internally.
pub fn train(params: &GbtParams, data: &Dataset, y: &[f64]) -> Result<GbtModel> {
    let presort = Presorted::build(data);
    train_with_presort(params, data, y, &presort)
}

/// Fits a boosted ensemble reusing a prebuilt presort of `data`. The tree
/// grown at index `k` depends only on `(params.seed, k)` and the data, so
/// forests with shared settings agree on their common prefix of trees.
pub fn train_with_presort(
    params: &GbtParams,
    data: &Dataset,
    y: &[f64],
    presort: &Presorted,
) -> Result<GbtModel> {
    params.validate()?;
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Input("training data has no rows".into()));
    }
    if data.n_cols() == 0 {
        return Err(Error::Input("training data has no features".into()));
    }
    if y.len() != n {
        return Err(Error::Input(format!(
            "{} targets for {n} rows",
            y.len()
        )));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("target contains a non-finite value {v}")));
    }
    if presort.n_rows != n || presort.order.len() != data.n_cols() {
        return Err(Error::Input(
            "presort does not match the training data shape".into(),
        ));
    }

    let p = data.n_cols();
    let base = params.base_score.unwrap_or_else(|| mean(y));
    let n_sample = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_feat = ((params.colsample_bytree * p as f64).round() as usize).clamp(1, p);
    let lr = params.learning_rate;

    let mut preds = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut in_node = vec![SENTINEL; n];
    let mut trees = Vec::with_capacity(params.n_estimators as usize);

    for k in 0..params.n_estimators {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(u64::from(k));
        let mut rows = rand::seq::index::sample(&mut rng, n, n_sample).into_vec();
        rows.sort_unstable();
        let mut feats = rand::seq::index::sample(&mut rng, p, n_feat).into_vec();
        feats.sort_unstable();

        in_node.fill(SENTINEL);
        for &row in &rows {
            grad[row] = preds[row] - y[row];
            in_node[row] = 0;
        }

        let tree = grow_tree(data, presort, &grad, &mut in_node, &feats, params);
        for row in 0..n {
            preds[row] += lr * tree.leaf_value_at(data, row);
        }
        trees.push(tree);
    }

    Ok(GbtModel {
        params: params.clone(),
        base_score: base,
        feature_schema: data.names().to_vec(),
        trees,
    })
}
