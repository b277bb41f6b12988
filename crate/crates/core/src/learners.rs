//! Probabilistic binary base classifiers.
//!
//! Every classifier emits a confidence in `[clip_epsilon, 1 - clip_epsilon]`
//! for the positive class, so downstream products of conditionals never hit
//! an exact zero.

use crate::data::Matrix;
use crate::error::{config, contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Logistic,
    DecisionTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularization {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub regularization: Regularization,
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once the objective changes by less than this between iterations.
    pub tolerance: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub clip_epsilon: f64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Logistic,
            regularization: Regularization::L2,
            lambda: 1e-4,
            learning_rate: 0.1,
            max_iterations: 1000,
            tolerance: 1e-8,
            max_depth: 6,
            min_samples_leaf: 1,
            clip_epsilon: 1e-6,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn logistic() -> Self {
        Self::default()
    }

    pub fn tree(max_depth: usize) -> Self {
        Self { kind: LearnerKind::DecisionTree, max_depth, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(config("regularization strength must be >= 0"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(config("learning rate must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(config("max_iterations must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(config("tolerance must be >= 0"));
        }
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(config("tree depth and leaf size must be positive"));
        }
        if !(0.0..0.5).contains(&self.clip_epsilon) {
            return Err(config("clip epsilon must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Model {
    Logistic { weights: Vec<f64>, bias: f64 },
    Tree { nodes: Vec<TreeNode> },
    /// Fitted on a single-class target: the empirical rate.
    Constant { p: f64 },
}

/// A fitted binary classifier (the per-node `h_j` of a chain).
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub(crate) dim: usize,
    pub(crate) clip_epsilon: f64,
    pub(crate) model: Model,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log loss plus penalty and its gradient `(loss, grad_w, grad_b)`.
/// The bias is not penalised. For L1 the subgradient at zero is taken as 0.
pub fn logistic_objective(
    weights: &[f64],
    bias: f64,
    x: &Matrix,
    y: &[u8],
    regularization: Regularization,
    lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.rows() as f64;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    for (row, &t) in x.iter_rows().zip(y) {
        let z = bias + dot(weights, row);
        let t = t as f64;
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        grad_b += r;
        for (g, &v) in grad.iter_mut().zip(row) {
            *g += r * v;
        }
    }
    loss /= n;
    grad_b /= n;
    for g in &mut grad {
        *g /= n;
    }
    match regularization {
        Regularization::L2 => {
            loss += 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>();
            for (g, w) in grad.iter_mut().zip(weights) {
                *g += lambda * w;
            }
        }
        Regularization::L1 => {
            loss += lambda * weights.iter().map(|w| w.abs()).sum::<f64>();
            for (g, w) in grad.iter_mut().zip(weights) {
                if *w != 0.0 {
                    *g += lambda * w.signum();
                }
            }
        }
    }
    (loss, grad, grad_b)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Fits a classifier on `x` against binary target `y`.
pub fn fit(cfg: &LearnerConfig, x: &Matrix, y: &[u8]) -> Result<Classifier> {
    cfg.validate()?;
    if x.rows() == 0 || x.cols() == 0 {
        return Err(contract("training table must have at least one row and one column"));
    }
    if y.len() != x.rows() {
        return Err(contract(format!("target has {} rows, features {}", y.len(), x.rows())));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(contract("target must be binary"));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    let model = if positives == 0 || positives == y.len() {
        Model::Constant { p: positives as f64 / y.len() as f64 }
    } else {
        match cfg.kind {
            LearnerKind::Logistic => fit_logistic(cfg, x, y),
            LearnerKind::DecisionTree => fit_tree(cfg, x, y),
        }
    };
    Ok(Classifier { dim: x.cols(), clip_epsilon: cfg.clip_epsilon, model })
}

fn fit_logistic(cfg: &LearnerConfig, x: &Matrix, y: &[u8]) -> Model {
    let mut w = vec![0.0; x.cols()];
    let mut b = 0.0;
    let mut prev = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let (loss, grad, grad_b) = logistic_objective(&w, b, x, y, cfg.regularization, cfg.lambda);
        if (prev - loss).abs() < cfg.tolerance {
            break;
        }
        prev = loss;
        b -= cfg.learning_rate * grad_b;
        for (wi, g) in w.iter_mut().zip(&grad) {
            let old = *wi;
            *wi -= cfg.learning_rate * g;
            // clamp at zero instead of letting the subgradient oscillate across it
            if cfg.regularization == Regularization::L1 && old != 0.0 && old.signum() != wi.signum() {
                *wi = 0.0;
            }
        }
    }
    Model::Logistic { weights: w, bias: b }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

fn fit_tree(cfg: &LearnerConfig, x: &Matrix, y: &[u8]) -> Model {
    let mut nodes = Vec::new();
    let idx: Vec<usize> = (0..x.rows()).collect();
    grow(cfg, x, y, idx, 0, &mut nodes);
    Model::Tree { nodes }
}

/// Grows the subtree over `idx` and returns its node index. Impure nodes are
/// split on the best Gini gain even when that gain is zero (XOR-like roots).
fn grow(
    cfg: &LearnerConfig,
    x: &Matrix,
    y: &[u8],
    idx: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let n = idx.len();
    let pos = idx.iter().filter(|&&i| y[i] == 1).count();
    let me = nodes.len();
    nodes.push(TreeNode::Leaf { p: pos as f64 / n as f64 });
    if depth >= cfg.max_depth || pos == 0 || pos == n || n < 2 * cfg.min_samples_leaf {
        return me;
    }
    let parent = gini(pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted = idx.clone();
    for f in 0..x.cols() {
        sorted.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let mut left_pos = 0;
        for k in 1..n {
            left_pos += y[sorted[k - 1]] as usize;
            let lo = x.get(sorted[k - 1], f);
            let hi = x.get(sorted[k], f);
            if lo == hi || k < cfg.min_samples_leaf || n - k < cfg.min_samples_leaf {
                continue;
            }
            let child = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(pos - left_pos, n - k))
                / n as f64;
            let gain = parent - child;
            if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some((gain, f, if mid < hi { mid } else { lo }));
            }
        }
    }
    let Some((gain, feature, threshold)) = best else {
        return me;
    };
    if gain < -1e-12 {
        return me;
    }
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x.get(i, feature) <= threshold);
    let left = grow(cfg, x, y, l, depth + 1, nodes);
    let right = grow(cfg, x, y, r, depth + 1, nodes);
    nodes[me] = TreeNode::Split { feature, threshold, left, right };
    me
}

impl Classifier {
    /// Zero weights and bias: emits 0.5 everywhere.
    pub fn zero_logistic(dim: usize, clip_epsilon: f64) -> Self {
        Self { dim, clip_epsilon, model: Model::Logistic { weights: vec![0.0; dim], bias: 0.0 } }
    }

    pub fn logistic_from_parts(weights: Vec<f64>, bias: f64, clip_epsilon: f64) -> Self {
        Self { dim: weights.len(), clip_epsilon, model: Model::Logistic { weights, bias } }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clip_epsilon(&self) -> f64 {
        self.clip_epsilon
    }

    pub fn kind_name(&self) -> &'static str {
        match self.model {
            Model::Logistic { .. } => "logistic",
            Model::Tree { .. } => "tree",
            Model::Constant { .. } => "constant",
        }
    }

    /// Logistic weights and bias, when this is a logistic model.
    pub fn logistic_parts(&self) -> Option<(&[f64], f64)> {
        match &self.model {
            Model::Logistic { weights, bias } => Some((weights, *bias)),
            _ => None,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(contract(format!("input has {} features, classifier expects {}", x.len(), self.dim)));
        }
        Ok(self.proba_parts(x, &[]))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok((self.predict_proba(x)? >= 0.5) as u8)
    }

    /// Probability for the input formed by concatenating `x` and `extra`.
    ///
    /// Panics if the combined width differs from the fitted dimension.
    pub fn proba_parts(&self, x: &[f64], extra: &[f64]) -> f64 {
        assert_eq!(
            x.len() + extra.len(),
            self.dim,
            "input width does not match classifier dimension"
        );
        let raw = match &self.model {
            Model::Constant { p } => *p,
            Model::Logistic { weights, bias } => {
                let (wx, we) = weights.split_at(x.len());
                sigmoid(bias + dot(wx, x) + dot(we, extra))
            }
            Model::Tree { nodes } => {
                let mut at = 0;
                loop {
                    match nodes[at] {
                        TreeNode::Leaf { p } => break p,
                        TreeNode::Split { feature, threshold, left, right } => {
                            let v = if feature < x.len() { x[feature] } else { extra[feature - x.len()] };
                            at = if v <= threshold { left } else { right };
                        }
                    }
                }
            }
        };
        raw.clamp(self.clip_epsilon, 1.0 - self.clip_epsilon)
    }

    /// Number of tree nodes, or zero for non-tree models.
    pub fn tree_size(&self) -> usize {
        match &self.model {
            Model::Tree { nodes } => nodes.len(),
            _ => 0,
        }
    }
}
