//! Classifier chains over arbitrary label DAGs.
//!
//! Node `j` is trained on the instance features followed by the true values
//! of its parent labels, in parent-set order.

use crate::data::{Dataset, Matrix};
use crate::error::{contract, Result};
use crate::inference::{self, ConditionalModel, InferenceConfig, InferenceMethod};
use crate::learners::{self, Classifier, LearnerConfig};
use crate::parallel::map_indexed;
use crate::structure::ChainStructure;
use crate::Predictor;

/// What a node passes down the chain at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Propagation {
    /// The thresholded label, 0 or 1.
    #[default]
    Hard,
    /// The node's probability of the positive label.
    Soft,
}

impl Propagation {
    pub fn as_str(self) -> &'static str {
        match self {
            Propagation::Hard => "hard",
            Propagation::Soft => "soft",
        }
    }
}

/// A label vector with its per-node positive-label probabilities and the
/// joint payoff `prod_j P(y_j = yhat_j | ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    labels: Vec<u8>,
    marginals: Vec<f64>,
    log_payoff: f64,
}

#[inline]
pub(crate) fn ln_outcome(p_one: f64, label: u8) -> f64 {
    if label == 1 {
        p_one.ln()
    } else {
        (1.0 - p_one).ln()
    }
}

impl Prediction {
    pub(crate) fn with_log_payoff(labels: Vec<u8>, marginals: Vec<f64>, log_payoff: f64) -> Self {
        debug_assert_eq!(labels.len(), marginals.len());
        Self { labels, marginals, log_payoff }
    }

    /// Payoff taken as the product of the marginals evaluated at `labels`,
    /// accumulated in label-index order.
    pub fn from_marginals(labels: Vec<u8>, marginals: Vec<f64>) -> Self {
        let log_payoff = labels.iter().zip(&marginals).map(|(&y, &p)| ln_outcome(p, y)).sum();
        Self::with_log_payoff(labels, marginals, log_payoff)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    /// `P(y_j = 1 | x, parent values)` along the chosen assignment.
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn joint_payoff(&self) -> f64 {
        self.log_payoff.exp()
    }

    pub fn log_payoff(&self) -> f64 {
        self.log_payoff
    }

    /// Recomputes the payoff from the stored marginals.
    pub fn payoff_from_marginals(&self) -> f64 {
        self.labels
            .iter()
            .zip(&self.marginals)
            .map(|(&y, &p)| if y == 1 { p } else { 1.0 - p })
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    structure: ChainStructure,
    classifiers: Vec<Classifier>,
    propagation: Propagation,
    n_features: usize,
}

/// The training table for node `j`: features, then the true labels of `j`'s
/// parents in parent-set order; target is label `j`.
pub fn transform(d: &Dataset, s: &ChainStructure, j: usize) -> Result<(Matrix, Vec<u8>)> {
    if j >= s.n_labels() || s.n_labels() != d.n_labels() {
        return Err(contract(format!("node {j} invalid for a {}-label structure", s.n_labels())));
    }
    let parents = s.parents(j);
    let width = d.n_features() + parents.len();
    let mut data = Vec::with_capacity(d.n_rows() * width);
    for i in 0..d.n_rows() {
        data.extend_from_slice(d.x(i));
        data.extend(parents.iter().map(|&p| d.label(i, p) as f64));
    }
    Ok((Matrix::from_vec(d.n_rows(), width, data)?, d.label_column(j)))
}

/// Fits the classifier of node `j` on its transformed table.
pub fn train_node(d: &Dataset, s: &ChainStructure, j: usize, lc: &LearnerConfig) -> Result<Classifier> {
    let (x, y) = transform(d, s, j)?;
    learners::fit(lc, &x, &y)
}

/// Trains one classifier per node on true parent labels.
pub fn train(d: &Dataset, s: &ChainStructure, lc: &LearnerConfig, propagation: Propagation) -> Result<ChainModel> {
    if s.n_labels() != d.n_labels() {
        return Err(contract(format!(
            "structure has {} nodes but the dataset has {} labels",
            s.n_labels(),
            d.n_labels()
        )));
    }
    lc.validate()?;
    let fitted = map_indexed(s.n_labels(), |j| train_node(d, s, j, lc));
    let classifiers = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    ChainModel::from_parts(s.clone(), classifiers, propagation, d.n_features())
}

impl ChainModel {
    /// Assembles a model from already fitted node classifiers (indexed by node).
    pub fn from_parts(
        structure: ChainStructure,
        classifiers: Vec<Classifier>,
        propagation: Propagation,
        n_features: usize,
    ) -> Result<Self> {
        if classifiers.len() != structure.n_labels() {
            return Err(contract("one classifier per node is required"));
        }
        for (j, c) in classifiers.iter().enumerate() {
            let want = n_features + structure.parents(j).len();
            if c.dim() != want {
                return Err(contract(format!("classifier {} has dimension {}, expected {want}", j + 1, c.dim())));
            }
        }
        Ok(Self { structure, classifiers, propagation, n_features })
    }

    pub fn structure(&self) -> &ChainStructure {
        &self.structure
    }

    pub fn classifiers(&self) -> &[Classifier] {
        &self.classifiers
    }

    pub fn into_classifiers(self) -> Vec<Classifier> {
        self.classifiers
    }

    pub fn propagation(&self) -> Propagation {
        self.propagation
    }

    pub fn with_propagation(mut self, propagation: Propagation) -> Self {
        self.propagation = propagation;
        self
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_labels(&self) -> usize {
        self.structure.n_labels()
    }

    /// `P(y_j = 1 | x, parent values)`. Hard propagation requires 0/1 parent values.
    pub fn conditional(&self, j: usize, x: &[f64], parent_values: &[f64]) -> Result<f64> {
        if j >= self.n_labels() {
            return Err(contract(format!("node {j} out of range")));
        }
        if x.len() != self.n_features {
            return Err(contract(format!("instance has {} features, model expects {}", x.len(), self.n_features)));
        }
        let np = self.structure.parents(j).len();
        if parent_values.len() != np {
            return Err(contract(format!("node {} has {np} parents, got {} values", j + 1, parent_values.len())));
        }
        if self.propagation == Propagation::Hard && parent_values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(contract("hard propagation needs binary parent values"));
        }
        Ok(self.classifiers[j].proba_parts(x, parent_values))
    }

    /// Single pass in topological order, thresholding each node at 0.5.
    pub fn predict_greedy(&self, x: &[f64]) -> Prediction {
        let l = self.n_labels();
        let mut labels = vec![0u8; l];
        let mut marginals = vec![0.0; l];
        // value fed to children: the label (hard) or the probability (soft)
        let mut fed = vec![0.0; l];
        let mut parent_buf = Vec::new();
        let mut log_payoff = 0.0;
        for &j in self.structure.order() {
            parent_buf.clear();
            parent_buf.extend(self.structure.parents(j).iter().map(|&p| fed[p]));
            let p = self.classifiers[j].proba_parts(x, &parent_buf);
            let y = (p >= 0.5) as u8;
            labels[j] = y;
            marginals[j] = p;
            fed[j] = match self.propagation {
                Propagation::Hard => y as f64,
                Propagation::Soft => p,
            };
            log_payoff += ln_outcome(p, y);
        }
        Prediction::with_log_payoff(labels, marginals, log_payoff)
    }
}

impl ChainModel {
    /// Prediction under any inference method; greedy honours the model's
    /// propagation mode, the search methods treat parents as hard labels.
    pub fn predict_with(&self, x: &[f64], cfg: &InferenceConfig) -> Result<Prediction> {
        if x.len() != self.n_features {
            return Err(contract(format!("instance has {} features, model expects {}", x.len(), self.n_features)));
        }
        cfg.validate(self.n_labels())?;
        match cfg.method {
            InferenceMethod::Greedy => Ok(self.predict_greedy(x)),
            _ => inference::infer(self, x, cfg),
        }
    }
}

impl ConditionalModel for ChainModel {
    fn structure(&self) -> &ChainStructure {
        &self.structure
    }

    fn prob_one(&self, j: usize, x: &[f64], parent_values: &[f64]) -> f64 {
        self.classifiers[j].proba_parts(x, parent_values)
    }
}

impl Predictor for ChainModel {
    fn n_labels(&self) -> usize {
        self.structure.n_labels()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        self.predict_greedy(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn fig1a() -> Dataset {
        let labels = [[0, 1, 1, 0], [1, 0, 0, 0], [0, 1, 0, 0], [1, 0, 0, 1], [0, 0, 0, 1]];
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<Vec<u8>> = labels.iter().map(|r| r.to_vec()).collect();
        Dataset::from_rows(&x, &y).unwrap()
    }

    #[test]
    fn transform_appends_true_parent_labels() {
        let d = fig1a();
        let s = ChainStructure::full_cascade_identity(4);
        let (t, y) = transform(&d, &s, 1).unwrap();
        assert_eq!(t.cols(), 2);
        let y1: Vec<f64> = (0..5).map(|i| t.get(i, 1)).collect();
        assert_eq!(y1, vec![0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(y, vec![1, 0, 1, 0, 0]);

        let (t, y) = transform(&d, &s, 3).unwrap();
        assert_eq!(t.cols(), 4);
        let expect = [[0, 1, 1], [1, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 0]];
        for (i, row) in expect.iter().enumerate() {
            let got: Vec<f64> = (1..4).map(|c| t.get(i, c)).collect();
            assert_eq!(got, row.iter().map(|&v| v as f64).collect::<Vec<_>>());
        }
        assert_eq!(y, vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn transform_without_parents_is_identity() {
        let d = fig1a();
        let (t, y) = transform(&d, &ChainStructure::empty(4), 2).unwrap();
        assert_eq!(&t, d.features());
        assert_eq!(y, d.label_column(2));
    }

    #[test]
    fn non_parent_labels_do_not_leak() {
        let d = fig1a();
        let s = ChainStructure::markov_chain(&[0, 1, 2, 3]).unwrap();
        let before = transform(&d, &s, 2).unwrap().0;
        // flip label 4 (not a parent of node 3) everywhere
        let mut y: Vec<Vec<u8>> = (0..5).map(|i| d.y(i).to_vec()).collect();
        for r in &mut y {
            r[3] ^= 1;
        }
        let x: Vec<Vec<f64>> = (0..5).map(|i| d.x(i).to_vec()).collect();
        let d2 = Dataset::from_rows(&x, &y).unwrap();
        assert_eq!(transform(&d2, &s, 2).unwrap().0, before);
    }

    #[test]
    fn xor_toy_needs_the_or_parent() {
        let d = synth::or_xor_grid();
        let lc = LearnerConfig::default();
        let chain = train(&d, &ChainStructure::full_cascade(&[0, 1]).unwrap(), &lc, Propagation::Hard).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(chain.predict_greedy(d.x(i)).labels(), d.y(i), "row {i}");
        }
        let p = chain.predict_greedy(&[1.0, 0.0]);
        assert_eq!(p.labels(), &[1, 1]);

        let br = train(&d, &ChainStructure::empty(2), &lc, Propagation::Hard).unwrap();
        let hits = (0..4).filter(|&i| br.predict_greedy(d.x(i)).labels()[1] == d.label(i, 1)).count();
        assert!(hits <= 3);
    }

    #[test]
    fn conditional_checks_inputs() {
        let d = synth::or_xor_grid();
        let m = train(&d, &ChainStructure::full_cascade(&[0, 1]).unwrap(), &LearnerConfig::default(), Propagation::Hard)
            .unwrap();
        assert!(m.conditional(1, &[0.0, 1.0], &[]).is_err());
        assert!(m.conditional(1, &[0.0], &[1.0]).is_err());
        assert!(m.conditional(1, &[0.0, 1.0], &[0.5]).is_err());
        let soft = m.clone().with_propagation(Propagation::Soft);
        assert!(soft.conditional(1, &[0.0, 1.0], &[0.5]).is_ok());
        assert_eq!(m.conditional(1, &[0.0, 1.0], &[1.0]).unwrap(), soft.conditional(1, &[0.0, 1.0], &[1.0]).unwrap());
    }

    #[test]
    fn single_label_conditional_is_the_classifier() {
        let d = synth::or_xor_grid();
        let d1 = d.subset(&[0, 1, 2, 3]);
        let x: Vec<Vec<f64>> = (0..4).map(|i| d1.x(i).to_vec()).collect();
        let y: Vec<Vec<u8>> = (0..4).map(|i| vec![d1.label(i, 0)]).collect();
        let d1 = Dataset::from_rows(&x, &y).unwrap();
        let lc = LearnerConfig::default();
        let m = train(&d1, &ChainStructure::empty(1), &lc, Propagation::Hard).unwrap();
        let (t, target) = transform(&d1, &ChainStructure::empty(1), 0).unwrap();
        let c = learners::fit(&lc, &t, &target).unwrap();
        for r in &x {
            assert_eq!(m.conditional(0, r, &[]).unwrap(), c.predict_proba(r).unwrap());
        }
    }

    #[test]
    fn implied_parent_raises_child_probability() {
        // child = parent AND (x > 0); parent drawn independently of x
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let x = if i % 2 == 0 { 1.0 } else { -1.0 };
            let parent = ((i / 2) % 2) as u8;
            xs.push(vec![x]);
            ys.push(vec![parent, parent & (x > 0.0) as u8]);
        }
        let d = Dataset::from_rows(&xs, &ys).unwrap();
        let m = train(&d, &ChainStructure::full_cascade(&[0, 1]).unwrap(), &LearnerConfig::default(), Propagation::Hard)
            .unwrap();
        for x in [-1.0, 0.0, 1.0] {
            assert!(m.conditional(1, &[x], &[1.0]).unwrap() >= m.conditional(1, &[x], &[0.0]).unwrap());
        }
    }

    #[test]
    fn payoff_matches_marginal_product() {
        let d = synth::xor_toy(10, 0.05, 3);
        let m = train(&d, &ChainStructure::full_cascade(&[2, 0, 1]).unwrap(), &LearnerConfig::default(), Propagation::Soft)
            .unwrap();
        for i in 0..d.n_rows() {
            let p = m.predict_greedy(d.x(i));
            assert!((p.joint_payoff() - p.payoff_from_marginals()).abs() < 1e-12);
        }
    }
}
