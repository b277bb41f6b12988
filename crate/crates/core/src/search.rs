//! Choosing chain orders and structures.
//!
//! Heuristics build a structure in one shot (random orders, dependence
//! trees, accuracy ordering); [`order_search`] hill-climbs over full-cascade
//! orders scored by internal cross-validation, retraining only the nodes at
//! or after the swapped position; [`dynamic_predict`] picks the most
//! confident of several trained chains per instance.

use std::collections::HashSet;
use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{self, ChainModel, Prediction, Propagation};
use crate::data::Dataset;
use crate::error::{config, contract, Result};
use crate::eval::{kfold_splits, predict_all, Metric};
use crate::inference::InferenceConfig;
use crate::learners::LearnerConfig;
use crate::parallel::map_indexed;
use crate::structure::{count_orders, ChainStructure};

/// `m` full cascades over uniformly random orders.
pub fn random_orders(n_labels: usize, m: usize, seed: u64) -> Vec<ChainStructure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let mut order: Vec<usize> = (0..n_labels).collect();
            order.shuffle(&mut rng);
            ChainStructure::full_cascade(&order).expect("shuffled permutation")
        })
        .collect()
}

/// Draws random orders until `m` distinct ones are found or every order has
/// been seen.
pub fn distinct_random_orders(n_labels: usize, m: usize, seed: u64) -> Vec<ChainStructure> {
    let limit = count_orders(n_labels);
    let cap = if limit < num_bigint::BigUint::from(m) { usize::try_from(&limit).unwrap_or(m) } else { m };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(cap);
    while out.len() < cap {
        let mut order: Vec<usize> = (0..n_labels).collect();
        order.shuffle(&mut rng);
        if seen.insert(order.clone()) {
            out.push(ChainStructure::full_cascade(&order).expect("shuffled permutation"));
        }
    }
    out
}

/// The first `count` permutations of `0..n_labels` in lexicographic order.
pub fn lexicographic_orders(n_labels: usize, count: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(count.min(1024));
    let mut cur: Vec<usize> = (0..n_labels).collect();
    while out.len() < count {
        out.push(cur.clone());
        // next permutation
        let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

fn contingency(a: &[u8], b: &[u8]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for (&u, &v) in a.iter().zip(b) {
        c[u as usize][v as usize] += 1.0;
    }
    c
}

/// Mutual information (nats) between two binary columns.
pub fn mutual_information(a: &[u8], b: &[u8]) -> f64 {
    let n = a.len() as f64;
    let c = contingency(a, b);
    let ra = [c[0][0] + c[0][1], c[1][0] + c[1][1]];
    let rb = [c[0][0] + c[1][0], c[0][1] + c[1][1]];
    let mut mi = 0.0;
    for u in 0..2 {
        for v in 0..2 {
            if c[u][v] > 0.0 {
                mi += c[u][v] / n * (c[u][v] * n / (ra[u] * rb[v])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Phi coefficient between two binary columns; 0 when either is constant.
pub fn phi_coefficient(a: &[u8], b: &[u8]) -> f64 {
    let c = contingency(a, b);
    let den = (c[0][0] + c[0][1]) * (c[1][0] + c[1][1]) * (c[0][0] + c[1][0]) * (c[0][1] + c[1][1]);
    if den == 0.0 {
        return 0.0;
    }
    (c[1][1] * c[0][0] - c[1][0] * c[0][1]) / den.sqrt()
}

/// Maximum-weight spanning tree over the complete label graph (Prim's
/// algorithm), with edges directed away from `root`. Ties prefer the lowest
/// new node, then the lowest attaching node.
pub fn maximum_spanning_tree(weights: &[Vec<f64>], root: usize) -> Result<ChainStructure> {
    let l = weights.len();
    if root >= l {
        return Err(contract(format!("root {root} out of range for {l} labels")));
    }
    let mut parents = vec![Vec::new(); l];
    let mut in_tree = vec![false; l];
    in_tree[root] = true;
    let mut order = vec![root];
    while order.len() < l {
        let mut best: Option<(f64, usize, usize)> = None;
        for v in (0..l).filter(|&v| !in_tree[v]) {
            for &u in &order {
                let w = weights[u][v];
                if best.is_none_or(|(bw, bv, bu)| w > bw || (w == bw && (v, u) < (bv, bu))) {
                    best = Some((w, v, u));
                }
            }
        }
        let (_, v, u) = best.expect("non-tree node remains");
        parents[v].push(u);
        in_tree[v] = true;
        order.push(v);
    }
    ChainStructure::from_parent_sets(parents, order)
}

/// A dependence-derived tree with the pairwise weights it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceTree {
    pub structure: ChainStructure,
    pub weights: Vec<Vec<f64>>,
    pub classifiers_fitted: usize,
}

/// Tree over pairwise mutual information of the label columns.
pub fn marginal_dependence_structure(d: &Dataset, root: usize) -> Result<DependenceTree> {
    let l = d.n_labels();
    if l < 2 {
        return Err(config("dependence structures need at least 2 labels"));
    }
    let cols: Vec<Vec<u8>> = (0..l).map(|j| d.label_column(j)).collect();
    let weights = pairwise(&cols, mutual_information);
    Ok(DependenceTree { structure: maximum_spanning_tree(&weights, root)?, weights, classifiers_fitted: 0 })
}

/// Tree over the absolute phi coefficient between in-sample binary
/// relevance error indicators. Fits exactly one classifier per label.
pub fn conditional_dependence_structure(d: &Dataset, lc: &LearnerConfig, root: usize) -> Result<DependenceTree> {
    let l = d.n_labels();
    if l < 2 {
        return Err(config("dependence structures need at least 2 labels"));
    }
    let br = chain::train(d, &ChainStructure::empty(l), lc, Propagation::Hard)?;
    let pred = predict_all(&br, d);
    let errors: Vec<Vec<u8>> = (0..l)
        .map(|j| (0..d.n_rows()).map(|i| (pred[i * l + j] != d.label(i, j)) as u8).collect())
        .collect();
    let weights = pairwise(&errors, |a, b| phi_coefficient(a, b).abs());
    Ok(DependenceTree { structure: maximum_spanning_tree(&weights, root)?, weights, classifiers_fitted: l })
}

fn pairwise(cols: &[Vec<u8>], f: impl Fn(&[u8], &[u8]) -> f64) -> Vec<Vec<f64>> {
    let l = cols.len();
    let mut w = vec![vec![0.0; l]; l];
    for a in 0..l {
        for b in a + 1..l {
            let v = f(&cols[a], &cols[b]);
            w[a][b] = v;
            w[b][a] = v;
        }
    }
    w
}

/// Per-label k-fold accuracy of independent classifiers.
pub fn label_cv_accuracies(d: &Dataset, lc: &LearnerConfig, k: usize, seed: u64) -> Result<Vec<f64>> {
    let l = d.n_labels();
    let splits = kfold_splits(d, k, seed)?;
    let per_fold = map_indexed(splits.len(), |f| -> Result<Vec<f64>> {
        let (train, test) = &splits[f];
        let br = chain::train(train, &ChainStructure::empty(l), lc, Propagation::Hard)?;
        let pred = predict_all(&br, test);
        Ok((0..l)
            .map(|j| {
                let hits = (0..test.n_rows()).filter(|&i| pred[i * l + j] == test.label(i, j)).count();
                hits as f64 / test.n_rows() as f64
            })
            .collect())
    });
    let mut acc = vec![0.0; l];
    for fold in per_fold {
        for (a, v) in acc.iter_mut().zip(fold?) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / k as f64).collect())
}

/// Full cascade ordering labels from most to least predictable, ties by
/// label index. Folds are seeded from `lc.seed`.
pub fn accuracy_ordering(d: &Dataset, lc: &LearnerConfig, k: usize) -> Result<ChainStructure> {
    let acc = label_cv_accuracies(d, lc, k, lc.seed)?;
    let mut order: Vec<usize> = (0..d.n_labels()).collect();
    order.sort_by(|&a, &b| acc[b].total_cmp(&acc[a]).then(a.cmp(&b)));
    ChainStructure::full_cascade(&order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub steps: usize,
    pub folds: usize,
    pub metric: Metric,
    pub seed: u64,
    /// Rate at which proposal mass moves toward the chain tail.
    pub decay: f64,
    /// Starting order; identity when absent.
    pub initial_order: Option<Vec<usize>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { steps: 50, folds: 3, metric: Metric::ExactMatch, seed: 0, decay: 0.05, initial_order: None }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(config("search needs at least one step"));
        }
        if self.folds < 2 {
            return Err(config("search needs at least 2 folds"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(config("decay must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Probability of picking each swap position `j = 1..L-1` (1-based: swap
/// positions j and j+1) at step `t`, proportional to `exp(decay * t * j / L)`.
pub fn pivot_distribution(n_labels: usize, step: usize, decay: f64) -> Vec<f64> {
    if n_labels < 2 {
        return Vec::new();
    }
    let l = n_labels as f64;
    let raw: Vec<f64> = (1..n_labels).map(|j| decay * step as f64 * j as f64 / l).collect();
    // subtract the max before exponentiating
    let top = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = raw.iter().map(|r| (r - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub step: usize,
    pub order: Vec<usize>,
    pub score: f64,
    pub accepted: bool,
}

/// Every order evaluated during a search with its estimated payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub best: usize,
    /// Node classifiers fitted across all folds and steps.
    pub classifiers_trained: usize,
}

impl TrialSet {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn best_structure(&self) -> ChainStructure {
        ChainStructure::full_cascade(&self.best_trial().order).expect("trial orders are permutations")
    }

    /// `step,order,score` rows, orders as space-separated 1-based permutations.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,order,score")?;
        for t in &self.trials {
            let order: Vec<String> = t.order.iter().map(|j| (j + 1).to_string()).collect();
            writeln!(w, "{},{},{:?}", t.step, order.join(" "), t.score)?;
        }
        Ok(())
    }
}

/// What [`order_search_observed`] reports after each evaluation.
pub struct SearchEvent<'a> {
    pub step: usize,
    pub order: &'a [usize],
    pub score: f64,
    pub accepted: bool,
    /// Pivot position (0-based) from which nodes were retrained.
    pub pivot: usize,
    /// The per-fold chains evaluated at this step.
    pub fold_models: &'a [ChainModel],
}

struct Evaluated {
    models: Vec<ChainModel>,
    score: f64,
    retrained: usize,
}

fn evaluate_order(
    splits: &[(Dataset, Dataset)],
    order: &[usize],
    lc: &LearnerConfig,
    metric: Metric,
    reuse: Option<(&[ChainModel], usize)>,
) -> Result<Evaluated> {
    let structure = ChainStructure::full_cascade(order)?;
    let keep = reuse.map_or(0, |(_, pivot)| pivot);
    let results = map_indexed(splits.len(), |f| -> Result<(ChainModel, f64)> {
        let (train, test) = &splits[f];
        let mut classifiers = Vec::with_capacity(order.len());
        let previous = reuse.map(|(models, _)| models[f].classifiers());
        let positions = structure.positions();
        for j in 0..order.len() {
            let c = match previous {
                Some(prev) if positions[j] < keep => prev[j].clone(),
                _ => chain::train_node(train, &structure, j, lc)?,
            };
            classifiers.push(c);
        }
        let model = ChainModel::from_parts(structure.clone(), classifiers, Propagation::Hard, train.n_features())?;
        let score = metric.score(test.labels(), &predict_all(&model, test), test.n_labels())?;
        Ok((model, score))
    });
    let mut models = Vec::with_capacity(splits.len());
    let mut total = 0.0;
    for r in results {
        let (m, s) = r?;
        models.push(m);
        total += s;
    }
    Ok(Evaluated { models, score: total / splits.len() as f64, retrained: (order.len() - keep) * splits.len() })
}

/// Hill-climbing over full-cascade orders by adjacent swaps.
pub fn order_search(d: &Dataset, lc: &LearnerConfig, sc: &SearchConfig) -> Result<TrialSet> {
    order_search_observed(d, lc, sc, |_| {})
}

/// [`order_search`] with a callback after every evaluated order. Proposals
/// reuse the incumbent's per-fold classifiers for positions before the swap.
pub fn order_search_observed(
    d: &Dataset,
    lc: &LearnerConfig,
    sc: &SearchConfig,
    mut observer: impl FnMut(&SearchEvent),
) -> Result<TrialSet> {
    sc.validate()?;
    lc.validate()?;
    let l = d.n_labels();
    let start = sc.initial_order.clone().unwrap_or_else(|| (0..l).collect());
    if start.len() != l {
        return Err(contract("initial order length differs from the label count"));
    }
    let splits = kfold_splits(d, sc.folds, sc.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(1);

    let mut incumbent = evaluate_order(&splits, &start, lc, sc.metric, None)?;
    let mut incumbent_order = start;
    let mut trained = incumbent.retrained;
    observer(&SearchEvent {
        step: 0,
        order: &incumbent_order,
        score: incumbent.score,
        accepted: true,
        pivot: 0,
        fold_models: &incumbent.models,
    });
    let mut trials = vec![Trial { step: 0, order: incumbent_order.clone(), score: incumbent.score, accepted: true }];
    let mut best = 0;

    if l >= 2 {
        for t in 1..=sc.steps {
            let dist = WeightedIndex::new(pivot_distribution(l, t, sc.decay)).expect("positive weights");
            let pivot = dist.sample(&mut rng);
            let mut order = incumbent_order.clone();
            order.swap(pivot, pivot + 1);
            let proposal = evaluate_order(&splits, &order, lc, sc.metric, Some((&incumbent.models, pivot)))?;
            trained += proposal.retrained;
            let accepted = proposal.score >= incumbent.score;
            observer(&SearchEvent {
                step: t,
                order: &order,
                score: proposal.score,
                accepted,
                pivot,
                fold_models: &proposal.models,
            });
            trials.push(Trial { step: t, order: order.clone(), score: proposal.score, accepted });
            if proposal.score > trials[best].score {
                best = trials.len() - 1;
            }
            if accepted {
                incumbent = proposal;
                incumbent_order = order;
            }
        }
    }
    Ok(TrialSet { trials, best, classifiers_trained: trained })
}

/// Runs every model's inference and keeps the prediction with the highest
/// joint payoff; ties go to the earlier model.
pub fn dynamic_predict(models: &[(ChainModel, InferenceConfig)], x: &[f64]) -> Result<Prediction> {
    let mut best: Option<Prediction> = None;
    for (m, cfg) in models {
        let p = m.predict_with(x, cfg)?;
        if best.as_ref().map_or(true, |b| p.log_payoff() > b.log_payoff()) {
            best = Some(p);
        }
    }
    best.ok_or_else(|| config("dynamic prediction needs at least one model"))
}

/// A fixed set of chains queried by [`dynamic_predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicEnsemble {
    pub models: Vec<(ChainModel, InferenceConfig)>,
}

impl crate::Predictor for DynamicEnsemble {
    fn n_labels(&self) -> usize {
        self.models[0].0.n_labels()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        dynamic_predict(&self.models, x).expect("validated inference configs")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn random_orders_are_reproducible() {
        let a = random_orders(5, 3, 42);
        assert_eq!(a, random_orders(5, 3, 42));
        assert_eq!(random_orders(5, 1, 7), random_orders(5, 1, 7));
        assert!(a.iter().all(|s| s.n_edges() == 10));
    }

    #[test]
    fn at_most_720_distinct_orders_for_six_labels() {
        let all = distinct_random_orders(6, 1000, 3);
        assert_eq!(all.len(), 720);
        let uniq: HashSet<Vec<usize>> = all.iter().map(|s| s.order().to_vec()).collect();
        assert_eq!(uniq.len(), 720);
    }

    #[test]
    fn order_frequencies_are_uniform() {
        let draws = random_orders(3, 10_000, 7);
        let mut counts = std::collections::HashMap::new();
        for s in &draws {
            *counts.entry(s.order().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            assert!((*c as f64 / 10_000.0 - 1.0 / 6.0).abs() < 0.02);
        }
    }

    #[test]
    fn lexicographic_prefix() {
        let o = lexicographic_orders(3, 10);
        assert_eq!(o, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]);
        assert_eq!(lexicographic_orders(6, 45).len(), 45);
        assert_eq!(lexicographic_orders(6, 45)[44], vec![0, 2, 5, 3, 1, 4]);
    }

    /// Direct counting of MI in bits-free nats: sum over cells of p log(p / (pa pb)).
    fn mi_by_counting(a: &[u8], b: &[u8]) -> f64 {
        let n = a.len() as f64;
        let mut mi = 0.0;
        for u in 0..2u8 {
            for v in 0..2u8 {
                let pab = a.iter().zip(b).filter(|(&x, &y)| x == u && y == v).count() as f64 / n;
                let pa = a.iter().filter(|&&x| x == u).count() as f64 / n;
                let pb = b.iter().filter(|&&y| y == v).count() as f64 / n;
                if pab > 0.0 {
                    mi += pab * (pab / (pa * pb)).ln();
                }
            }
        }
        mi
    }

    #[test]
    fn copied_label_is_linked() {
        let base = synth::independent_labels(300, 2, 2, 5);
        let x: Vec<Vec<f64>> = (0..300).map(|i| base.x(i).to_vec()).collect();
        let y: Vec<Vec<u8>> = (0..300).map(|i| vec![base.label(i, 0), base.label(i, 0), base.label(i, 1)]).collect();
        let d = Dataset::from_rows(&x, &y).unwrap();
        let tree = marginal_dependence_structure(&d, 0).unwrap();
        assert_eq!(tree.structure.parents(1), &[0]);
        let c0 = d.label_column(0);
        let c2 = d.label_column(2);
        assert!((tree.weights[0][2] - mi_by_counting(&c0, &c2)).abs() < 1e-12);
        assert!((tree.weights[0][1] - mi_by_counting(&c0, &c0)).abs() < 1e-12);
    }

    #[test]
    fn two_labels_make_one_edge() {
        let d = synth::independent_labels(50, 1, 2, 1);
        let t = marginal_dependence_structure(&d, 1).unwrap();
        assert_eq!(t.structure.n_edges(), 1);
        assert_eq!(t.structure.parents(0), &[1]);
        assert_eq!(t.structure.order(), &[1, 0]);
    }

    #[test]
    fn or_and_xor_share_information() {
        let d = synth::or_xor_grid();
        let mi = mutual_information(&d.label_column(0), &d.label_column(1));
        assert!(mi > 0.0);
        let agree = (0..4).filter(|&i| d.label(i, 0) == 1 && d.label(i, 1) == 1).count();
        let or_true = (0..4).filter(|&i| d.label(i, 0) == 1).count();
        assert_eq!((agree, or_true), (2, 3));
    }

    #[test]
    fn constant_label_column_is_harmless() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<Vec<u8>> = (0..10).map(|i| vec![1, (i % 2) as u8, (i % 3 == 0) as u8]).collect();
        let d = Dataset::from_rows(&x, &y).unwrap();
        let t = marginal_dependence_structure(&d, 0).unwrap();
        assert_eq!(t.weights[0][1], 0.0);
        assert_eq!(t.structure.n_edges(), 2);
    }

    #[test]
    fn coinciding_errors_give_phi_one() {
        let a = [1, 0, 0, 1, 0, 1];
        assert!((phi_coefficient(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(phi_coefficient(&a, &[0; 6]), 0.0);
    }

    #[test]
    fn conditional_dependence_on_independent_labels() {
        let d = synth::independent_labels(2000, 3, 4, 17);
        let t = conditional_dependence_structure(&d, &LearnerConfig::default(), 0).unwrap();
        assert_eq!(t.classifiers_fitted, 4);
        let mut sum = 0.0;
        let mut n = 0;
        for a in 0..4 {
            for b in a + 1..4 {
                sum += t.weights[a][b];
                n += 1;
            }
        }
        assert!(sum / (n as f64) < 0.08);
        assert_eq!(t.structure.n_edges(), 3);
    }

    #[test]
    fn conditional_dependence_links_shared_errors() {
        // label 2 copies label 1; both depend on x through XOR, so a linear
        // learner errs on the same rows for both
        let d0 = synth::xor_toy(20, 0.05, 4);
        let x: Vec<Vec<f64>> = (0..d0.n_rows()).map(|i| d0.x(i).to_vec()).collect();
        let y: Vec<Vec<u8>> = (0..d0.n_rows()).map(|i| vec![d0.label(i, 0), d0.label(i, 2), d0.label(i, 2)]).collect();
        let d = Dataset::from_rows(&x, &y).unwrap();
        let t = conditional_dependence_structure(&d, &LearnerConfig::default(), 0).unwrap();
        assert!((t.weights[1][2] - 1.0).abs() < 1e-12);
        let linked = t.structure.parents(2) == [1] || t.structure.parents(1) == [2];
        assert!(linked);
    }

    #[test]
    fn accuracy_ordering_puts_easy_first_and_hard_last() {
        let d = synth::xor_toy(25, 0.05, 6);
        let lc = LearnerConfig::default();
        let s = accuracy_ordering(&d, &lc, 5).unwrap();
        assert_eq!(*s.order().last().unwrap(), 2);
        let chain = chain::train(&d, &s, &lc, Propagation::Hard).unwrap();
        let report = crate::eval::evaluate(&chain, &d).unwrap();
        assert_eq!(report.exact_match, 1.0);
    }

    #[test]
    fn symmetric_labels_keep_index_order() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let y: Vec<Vec<u8>> = (0..12).map(|i| vec![(i >= 6) as u8; 3]).collect();
        let d = Dataset::from_rows(&x, &y).unwrap();
        let s = accuracy_ordering(&d, &LearnerConfig::default(), 3).unwrap();
        assert_eq!(s.order(), &[0, 1, 2]);
    }

    #[test]
    fn pivot_mass_moves_to_the_tail() {
        let early = pivot_distribution(6, 1, 0.05);
        let late = pivot_distribution(6, 200, 0.05);
        assert!((early.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(late[4] > early[4]);
        assert!(late.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn one_step_records_two_trials() {
        let d = synth::xor_toy(10, 0.05, 1);
        let sc = SearchConfig { steps: 1, ..Default::default() };
        let ts = order_search(&d, &LearnerConfig::default(), &sc).unwrap();
        assert_eq!(ts.trials.len(), 2);
        let mut csv = Vec::new();
        ts.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("step,order,score\n0,1 2 3,"));
    }

    #[test]
    fn search_escapes_the_failing_order() {
        let d = synth::xor_toy(15, 0.05, 2);
        let sc = SearchConfig { steps: 20, folds: 3, initial_order: Some(vec![2, 0, 1]), seed: 4, ..Default::default() };
        let ts = order_search(&d, &LearnerConfig::default(), &sc).unwrap();
        assert!(ts.trials[0].score < 1.0);
        assert_eq!(ts.best_trial().score, 1.0);
        // accepted incumbents never get worse
        let mut last = f64::NEG_INFINITY;
        for t in ts.trials.iter().filter(|t| t.accepted) {
            assert!(t.score >= last);
            last = t.score;
        }
    }

    #[test]
    fn reuse_matches_training_from_scratch() {
        let d = synth::random_cascade(80, 3, 4, 9);
        let lc = LearnerConfig::default();
        let sc = SearchConfig { steps: 6, folds: 2, seed: 3, ..Default::default() };
        let splits = kfold_splits(&d, sc.folds, sc.seed).unwrap();
        let mut checked = 0;
        order_search_observed(&d, &lc, &sc, |ev| {
            let s = ChainStructure::full_cascade(ev.order).unwrap();
            for (f, m) in ev.fold_models.iter().enumerate() {
                let fresh = chain::train(&splits[f].0, &s, &lc, Propagation::Hard).unwrap();
                assert_eq!(&fresh, m, "step {} fold {f}", ev.step);
            }
            checked += 1;
        })
        .unwrap();
        assert_eq!(checked, 7);
    }

    #[test]
    fn dynamic_prediction_takes_the_most_confident_model() {
        let d = synth::random_cascade(100, 2, 3, 2);
        let lc = LearnerConfig::default();
        let models: Vec<(ChainModel, InferenceConfig)> = random_orders(3, 3, 1)
            .into_iter()
            .map(|s| (chain::train(&d, &s, &lc, Propagation::Hard).unwrap(), InferenceConfig::greedy()))
            .collect();
        for i in 0..20 {
            let x = d.x(i);
            let p = dynamic_predict(&models, x).unwrap();
            for (m, _) in &models {
                assert!(p.joint_payoff() >= m.predict_greedy(x).joint_payoff());
            }
            assert_eq!(dynamic_predict(&models[..1], x).unwrap(), models[0].0.predict_greedy(x));
        }
        assert!(dynamic_predict(&[], d.x(0)).is_err());
    }
}
