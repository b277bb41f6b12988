//! Methods related to classifier chains: ensembles of random chains,
//! dependency networks decoded by Gibbs sampling, stacked binary relevance,
//! a chain traversed twice, and label powerset restricted to observed
//! labelsets.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{self, ln_outcome, ChainModel, Prediction, Propagation};
use crate::data::{Dataset, Matrix};
use crate::error::{config, contract, Result};
use crate::inference::TabularJoint;
use crate::learners::{self, Classifier, LearnerConfig, LearnerKind};
use crate::parallel::map_indexed;
use crate::structure::ChainStructure;
use crate::Predictor;

/// Clip applied to aggregated scores before they enter a payoff.
const SCORE_CLIP: f64 = 1e-6;

fn clip(p: f64) -> f64 {
    p.clamp(SCORE_CLIP, 1.0 - SCORE_CLIP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean of the members' 0/1 greedy votes.
    #[default]
    VoteMean,
    /// Mean of the members' positive-label probabilities.
    ProbabilityMean,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::VoteMean => "vote_mean",
            Aggregation::ProbabilityMean => "probability_mean",
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vote_mean" | "vote" => Ok(Aggregation::VoteMean),
            "probability_mean" | "probability" => Ok(Aggregation::ProbabilityMean),
            _ => Err(config(format!("unknown aggregation '{s}'"))),
        }
    }
}

/// Chains whose greedy predictions are averaged per label and thresholded
/// at 0.5 (ties go to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub(crate) members: Vec<ChainModel>,
    pub(crate) aggregation: Aggregation,
}

impl EnsembleModel {
    pub fn from_members(members: Vec<ChainModel>) -> Result<Self> {
        Self::with_aggregation(members, Aggregation::VoteMean)
    }

    pub fn with_aggregation(members: Vec<ChainModel>, aggregation: Aggregation) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(config("an ensemble needs at least one member"));
        };
        let (l, d) = (first.n_labels(), first.n_features());
        if members.iter().any(|m| m.n_labels() != l || m.n_features() != d) {
            return Err(contract("ensemble members disagree on label or feature count"));
        }
        Ok(Self { members, aggregation })
    }

    pub fn members(&self) -> &[ChainModel] {
        &self.members
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    /// Per-label mean of the member votes (or probabilities).
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let l = self.members[0].n_labels();
        let preds = map_indexed(self.members.len(), |i| self.members[i].predict_greedy(x));
        let mut s = vec![0.0; l];
        for p in &preds {
            for j in 0..l {
                s[j] += match self.aggregation {
                    Aggregation::VoteMean => p.labels()[j] as f64,
                    Aggregation::ProbabilityMean => p.marginals()[j],
                };
            }
        }
        let m = preds.len() as f64;
        s.iter_mut().for_each(|v| *v /= m);
        s
    }
}

/// Greedy prediction of each member, averaged and thresholded.
pub fn ecc_predict(em: &EnsembleModel, x: &[f64]) -> Prediction {
    let scores = em.scores(x);
    let labels = scores.iter().map(|&s| (s >= 0.5) as u8).collect();
    Prediction::from_marginals(labels, scores.into_iter().map(clip).collect())
}

impl Predictor for EnsembleModel {
    fn n_labels(&self) -> usize {
        self.members[0].n_labels()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        ecc_predict(self, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub size: usize,
    pub seed: u64,
    /// Train each member on a bootstrap resample of size N.
    pub bootstrap: bool,
    /// Keep each full-cascade edge with this probability; `None` keeps all.
    pub edge_keep: Option<f64>,
    /// Flip a coin per member between logistic and tree learners.
    pub mixed_learners: bool,
    pub aggregation: Aggregation,
}

impl EnsembleOptions {
    pub fn new(size: usize, seed: u64) -> Self {
        Self { size, seed, bootstrap: true, edge_keep: None, mixed_learners: false, aggregation: Aggregation::VoteMean }
    }
}

/// Ensemble of `m` full cascades, each over an independent random order and
/// trained on a bootstrap resample.
pub fn ecc_train(d: &Dataset, lc: &LearnerConfig, m: usize, seed: u64) -> Result<EnsembleModel> {
    ecc_train_with(d, lc, &EnsembleOptions::new(m, seed))
}

/// The member recipe used by [`ecc_train_with`]: structure, row indices and
/// learner for member `i`.
pub fn ensemble_member_plan(
    n_rows: usize,
    n_labels: usize,
    lc: &LearnerConfig,
    opts: &EnsembleOptions,
    i: usize,
) -> (ChainStructure, Vec<usize>, LearnerConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(i as u64);
    let mut order: Vec<usize> = (0..n_labels).collect();
    order.shuffle(&mut rng);
    let rows: Vec<usize> =
        if opts.bootstrap { (0..n_rows).map(|_| rng.gen_range(0..n_rows)).collect() } else { (0..n_rows).collect() };
    let structure = match opts.edge_keep {
        None => ChainStructure::full_cascade(&order).expect("shuffled permutation"),
        Some(keep) => {
            let mut parents = vec![Vec::new(); n_labels];
            for (k, &j) in order.iter().enumerate() {
                for &p in &order[..k] {
                    if rng.gen::<f64>() < keep {
                        parents[j].push(p);
                    }
                }
            }
            ChainStructure::from_parent_sets(parents, order).expect("edges follow the order")
        }
    };
    let mut member_lc = lc.clone();
    member_lc.seed = lc.seed.wrapping_add(i as u64);
    if opts.mixed_learners {
        member_lc.kind = if rng.gen::<bool>() { LearnerKind::DecisionTree } else { LearnerKind::Logistic };
    }
    (structure, rows, member_lc)
}

pub fn ecc_train_with(d: &Dataset, lc: &LearnerConfig, opts: &EnsembleOptions) -> Result<EnsembleModel> {
    if opts.size == 0 {
        return Err(config("ensemble size must be at least 1"));
    }
    if let Some(k) = opts.edge_keep {
        if !(0.0..=1.0).contains(&k) {
            return Err(config("edge keep probability must lie in [0, 1]"));
        }
    }
    lc.validate()?;
    let members = map_indexed(opts.size, |i| {
        let (s, rows, member_lc) = ensemble_member_plan(d.n_rows(), d.n_labels(), lc, opts, i);
        chain::train(&d.subset(&rows), &s, &member_lc, Propagation::Hard)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    EnsembleModel::with_aggregation(members, opts.aggregation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decode {
    /// Threshold each label's sample mean at 0.5; targets Hamming loss.
    #[default]
    MarginalMean,
    /// Most frequent sampled vector; targets 0/1 loss.
    JointMode,
}

impl Decode {
    pub fn as_str(self) -> &'static str {
        match self {
            Decode::MarginalMean => "marginal_mean",
            Decode::JointMode => "joint_mode",
        }
    }
}

impl std::str::FromStr for Decode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marginal_mean" | "marginal" => Ok(Decode::MarginalMean),
            "joint_mode" | "joint" => Ok(Decode::JointMode),
            _ => Err(config(format!("unknown decoder '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
    pub decode: Decode,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { burn_in: 100, samples: 1000, seed: 0, decode: Decode::MarginalMean }
    }
}

/// A model exposing `P(y_j = 1 | x, y_{-j})` for every label.
pub trait FullConditionals {
    fn n_labels(&self) -> usize;
    fn full_prob_one(&self, j: usize, x: &[f64], state: &[u8]) -> f64;
    /// Starting state of the sampler.
    fn initial_state(&self, x: &[f64]) -> Vec<u8>;
}

impl FullConditionals for TabularJoint {
    fn n_labels(&self) -> usize {
        TabularJoint::n_labels(self)
    }

    fn full_prob_one(&self, j: usize, _x: &[f64], state: &[u8]) -> f64 {
        self.full_conditional(j, state)
    }

    fn initial_state(&self, _x: &[f64]) -> Vec<u8> {
        self.marginals().iter().map(|&p| (p >= 0.5) as u8).collect()
    }
}

/// Sample statistics of one Gibbs run.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSamples {
    /// Fraction of retained sweeps with each label on.
    pub means: Vec<f64>,
    /// Retained sweep counts per visited vector.
    pub counts: BTreeMap<Vec<u8>, usize>,
}

impl GibbsSamples {
    /// Most frequent vector; ties go to the lexicographically smallest.
    pub fn mode(&self) -> Vec<u8> {
        let mut best: Option<(&Vec<u8>, usize)> = None;
        for (v, &c) in &self.counts {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((v, c));
            }
        }
        best.map(|(v, _)| v.clone()).unwrap_or_default()
    }

    pub fn decode(&self, decode: Decode) -> Prediction {
        let marginals: Vec<f64> = self.means.iter().map(|&m| clip(m)).collect();
        let labels = match decode {
            Decode::MarginalMean => self.means.iter().map(|&m| (m >= 0.5) as u8).collect(),
            Decode::JointMode => self.mode(),
        };
        Prediction::from_marginals(labels, marginals)
    }
}

/// Per-instance seed: FNV-1a over the feature bits, mixed with `seed`.
pub fn instance_seed(seed: u64, x: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for v in x {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Systematic-scan Gibbs sampling in label-index order: `burn_in` sweeps
/// discarded, `samples` sweeps retained.
pub fn gibbs_run<M: FullConditionals + ?Sized>(model: &M, x: &[f64], cfg: &GibbsConfig) -> Result<GibbsSamples> {
    if cfg.samples == 0 {
        return Err(config("Gibbs sampling needs at least one retained sample"));
    }
    let l = model.n_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(cfg.seed, x));
    let mut state = model.initial_state(x);
    let mut sums = vec![0usize; l];
    let mut counts = BTreeMap::new();
    for sweep in 0..cfg.burn_in + cfg.samples {
        for j in 0..l {
            let p = model.full_prob_one(j, x, &state);
            state[j] = (rng.gen::<f64>() < p) as u8;
        }
        if sweep >= cfg.burn_in {
            for (s, &v) in sums.iter_mut().zip(&state) {
                *s += v as usize;
            }
            *counts.entry(state.clone()).or_insert(0) += 1;
        }
    }
    let means = sums.iter().map(|&s| s as f64 / cfg.samples as f64).collect();
    Ok(GibbsSamples { means, counts })
}

/// Undirected dependency network: classifier `j` sees the features and every
/// other label in index order. Independent classifiers seed the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyNetwork {
    pub(crate) classifiers: Vec<Classifier>,
    pub(crate) initial: Vec<Classifier>,
    pub(crate) n_features: usize,
    pub gibbs: GibbsConfig,
}

impl DependencyNetwork {
    pub fn from_parts(
        classifiers: Vec<Classifier>,
        initial: Vec<Classifier>,
        n_features: usize,
        gibbs: GibbsConfig,
    ) -> Result<Self> {
        let l = classifiers.len();
        if l == 0 || initial.len() != l {
            return Err(contract("dependency network needs one full and one initial classifier per label"));
        }
        if classifiers.iter().any(|c| c.dim() != n_features + l - 1) || initial.iter().any(|c| c.dim() != n_features)
        {
            return Err(contract("dependency network classifier dimensions are inconsistent"));
        }
        Ok(Self { classifiers, initial, n_features, gibbs })
    }

    pub fn classifiers(&self) -> &[Classifier] {
        &self.classifiers
    }

    pub fn initial_classifiers(&self) -> &[Classifier] {
        &self.initial
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn with_gibbs(mut self, gibbs: GibbsConfig) -> Self {
        self.gibbs = gibbs;
        self
    }
}

impl FullConditionals for DependencyNetwork {
    fn n_labels(&self) -> usize {
        self.classifiers.len()
    }

    fn full_prob_one(&self, j: usize, x: &[f64], state: &[u8]) -> f64 {
        let others: Vec<f64> =
            state.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, &v)| v as f64).collect();
        self.classifiers[j].proba_parts(x, &others)
    }

    fn initial_state(&self, x: &[f64]) -> Vec<u8> {
        self.initial.iter().map(|c| (c.proba_parts(x, &[]) >= 0.5) as u8).collect()
    }
}

/// Fits the full conditionals on true labels plus independent classifiers
/// for initialisation (2L fits).
pub fn cdn_train(d: &Dataset, lc: &LearnerConfig, gibbs: GibbsConfig) -> Result<DependencyNetwork> {
    lc.validate()?;
    if gibbs.samples == 0 {
        return Err(config("Gibbs sampling needs at least one retained sample"));
    }
    let l = d.n_labels();
    let fitted = map_indexed(2 * l, |k| {
        if k < l {
            let j = k;
            let parents: Vec<usize> = (0..l).filter(|&p| p != j).collect();
            let mut data = Vec::with_capacity(d.n_rows() * (d.n_features() + l - 1));
            for i in 0..d.n_rows() {
                data.extend_from_slice(d.x(i));
                data.extend(parents.iter().map(|&p| d.label(i, p) as f64));
            }
            let x = Matrix::from_vec(d.n_rows(), d.n_features() + l - 1, data)?;
            learners::fit(lc, &x, &d.label_column(j))
        } else {
            learners::fit(lc, d.features(), &d.label_column(k - l))
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut full = fitted;
    let initial = full.split_off(l);
    DependencyNetwork::from_parts(full, initial, d.n_features(), gibbs)
}

pub fn cdn_predict(dn: &DependencyNetwork, x: &[f64], decode: Decode) -> Result<Prediction> {
    if x.len() != dn.n_features {
        return Err(contract(format!("instance has {} features, model expects {}", x.len(), dn.n_features)));
    }
    Ok(gibbs_run(dn, x, &dn.gibbs)?.decode(decode))
}

impl Predictor for DependencyNetwork {
    fn n_labels(&self) -> usize {
        self.classifiers.len()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        cdn_predict(self, x, self.gibbs.decode).expect("validated sampler settings")
    }
}

/// Two layers of independent classifiers; the second sees the first
/// layer's predictions (and optionally the features).
#[derive(Debug, Clone, PartialEq)]
pub struct StackedBr {
    pub(crate) layer1: Vec<Classifier>,
    pub(crate) layer2: Vec<Classifier>,
    pub(crate) include_input: bool,
    pub(crate) n_features: usize,
}

impl StackedBr {
    pub fn from_parts(
        layer1: Vec<Classifier>,
        layer2: Vec<Classifier>,
        include_input: bool,
        n_features: usize,
    ) -> Result<Self> {
        let l = layer1.len();
        let d2 = if include_input { n_features + l } else { l };
        if l == 0 || layer2.len() != l || layer1.iter().any(|c| c.dim() != n_features) || layer2.iter().any(|c| c.dim() != d2)
        {
            return Err(contract("stacked layers have inconsistent shapes"));
        }
        Ok(Self { layer1, layer2, include_input, n_features })
    }

    pub fn layer1(&self) -> &[Classifier] {
        &self.layer1
    }

    pub fn layer2(&self) -> &[Classifier] {
        &self.layer2
    }

    pub fn include_input(&self) -> bool {
        self.include_input
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// First-layer 0/1 predictions.
    pub fn first_layer(&self, x: &[f64]) -> Vec<f64> {
        self.layer1.iter().map(|c| (c.proba_parts(x, &[]) >= 0.5) as u8 as f64).collect()
    }
}

/// Layer 1 is binary relevance; layer 2 is fitted on layer 1's in-sample
/// predictions against the true labels.
pub fn stacked_br_train(d: &Dataset, lc: &LearnerConfig, include_input: bool) -> Result<StackedBr> {
    lc.validate()?;
    let l = d.n_labels();
    let layer1 = map_indexed(l, |j| learners::fit(lc, d.features(), &d.label_column(j)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let width = if include_input { d.n_features() + l } else { l };
    let mut data = Vec::with_capacity(d.n_rows() * width);
    for i in 0..d.n_rows() {
        let x = d.x(i);
        if include_input {
            data.extend_from_slice(x);
        }
        data.extend(layer1.iter().map(|c| (c.proba_parts(x, &[]) >= 0.5) as u8 as f64));
    }
    let z = Matrix::from_vec(d.n_rows(), width, data)?;
    let layer2 = map_indexed(l, |j| learners::fit(lc, &z, &d.label_column(j)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    StackedBr::from_parts(layer1, layer2, include_input, d.n_features())
}

/// Exactly `2L` classifier evaluations.
pub fn stacked_br_predict(m: &StackedBr, x: &[f64]) -> Prediction {
    let first = m.first_layer(x);
    let (head, tail): (&[f64], &[f64]) = if m.include_input { (x, &first) } else { (&first, &[]) };
    let marginals: Vec<f64> = m.layer2.iter().map(|c| c.proba_parts(head, tail)).collect();
    let labels = marginals.iter().map(|&p| (p >= 0.5) as u8).collect();
    Prediction::from_marginals(labels, marginals)
}

impl Predictor for StackedBr {
    fn n_labels(&self) -> usize {
        self.layer1.len()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        stacked_br_predict(self, x)
    }
}

/// What the second pass sees as first-pass labels during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PassOneInputs {
    /// In-sample greedy predictions of the first pass.
    #[default]
    Predicted,
    /// The true labels (teacher forcing).
    TrueLabels,
}

impl PassOneInputs {
    pub fn as_str(self) -> &'static str {
        match self {
            PassOneInputs::Predicted => "predicted",
            PassOneInputs::TrueLabels => "true",
        }
    }
}

/// A chain traversed twice. Second-pass node at position `k` of the order
/// sees the features, all first-pass labels in index order, then the
/// second-pass labels at positions `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPassChain {
    pub(crate) first: ChainModel,
    /// Indexed by label.
    pub(crate) second: Vec<Classifier>,
    pub(crate) pass_one_inputs: PassOneInputs,
}

impl TwoPassChain {
    pub fn from_parts(first: ChainModel, second: Vec<Classifier>, pass_one_inputs: PassOneInputs) -> Result<Self> {
        let l = first.n_labels();
        if second.len() != l {
            return Err(contract("one second-pass classifier per label is required"));
        }
        let pos = first.structure().positions();
        for (j, c) in second.iter().enumerate() {
            if c.dim() != first.n_features() + l + pos[j] {
                return Err(contract(format!("second-pass classifier {} has the wrong dimension", j + 1)));
            }
        }
        Ok(Self { first, second, pass_one_inputs })
    }

    pub fn first_pass(&self) -> &ChainModel {
        &self.first
    }

    pub fn second_pass(&self) -> &[Classifier] {
        &self.second
    }

    pub fn pass_one_inputs(&self) -> PassOneInputs {
        self.pass_one_inputs
    }
}

pub fn two_pass_train(
    d: &Dataset,
    order: &[usize],
    lc: &LearnerConfig,
    pass_one_inputs: PassOneInputs,
) -> Result<TwoPassChain> {
    let s = ChainStructure::full_cascade(order)?;
    if s.n_labels() != d.n_labels() {
        return Err(contract("order length differs from the label count"));
    }
    let first = chain::train(d, &s, lc, Propagation::Hard)?;
    let l = d.n_labels();
    let pass1: Vec<u8> = match pass_one_inputs {
        PassOneInputs::TrueLabels => d.labels().to_vec(),
        PassOneInputs::Predicted => (0..d.n_rows()).flat_map(|i| first.predict_greedy(d.x(i)).into_labels()).collect(),
    };
    let second = map_indexed(l, |k| {
        let j = order[k];
        let width = d.n_features() + l + k;
        let mut data = Vec::with_capacity(d.n_rows() * width);
        for i in 0..d.n_rows() {
            data.extend_from_slice(d.x(i));
            data.extend(pass1[i * l..(i + 1) * l].iter().map(|&v| v as f64));
            data.extend(order[..k].iter().map(|&p| d.label(i, p) as f64));
        }
        learners::fit(lc, &Matrix::from_vec(d.n_rows(), width, data)?, &d.label_column(j))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    // map_indexed ran over positions; store by label
    let mut by_label: Vec<Option<Classifier>> = vec![None; l];
    for (k, c) in second.into_iter().enumerate() {
        by_label[order[k]] = Some(c);
    }
    TwoPassChain::from_parts(first, by_label.into_iter().map(|c| c.expect("every label placed")).collect(), pass_one_inputs)
}

/// Greedy first pass, then greedy second pass; the second pass's labels
/// and conditionals form the prediction.
pub fn two_pass_chain_predict(m: &TwoPassChain, x: &[f64]) -> Prediction {
    let l = m.first.n_labels();
    let pass1: Vec<f64> = m.first.predict_greedy(x).labels().iter().map(|&v| v as f64).collect();
    let mut extra = pass1;
    let mut labels = vec![0u8; l];
    let mut marginals = vec![0.0; l];
    let mut log_payoff = 0.0;
    for &j in m.first.structure().order() {
        let p = m.second[j].proba_parts(x, &extra);
        let y = (p >= 0.5) as u8;
        labels[j] = y;
        marginals[j] = p;
        log_payoff += ln_outcome(p, y);
        extra.push(y as f64);
    }
    Prediction::with_log_payoff(labels, marginals, log_payoff)
}

impl Predictor for TwoPassChain {
    fn n_labels(&self) -> usize {
        self.first.n_labels()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        two_pass_chain_predict(self, x)
    }
}

/// Multi-class reduction over observed labelsets: one scorer per labelset,
/// softmax-normalised over their logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPowerset {
    pub(crate) vocabulary: Vec<Vec<u8>>,
    pub(crate) scorers: Vec<Classifier>,
    pub(crate) n_features: usize,
}

/// Distinct label vectors by descending frequency, ties by first occurrence.
pub fn labelset_vocabulary(d: &Dataset, cap: Option<usize>) -> Vec<Vec<u8>> {
    let mut seen: HashMap<&[u8], (usize, usize)> = HashMap::new();
    for i in 0..d.n_rows() {
        let e = seen.entry(d.y(i)).or_insert((0, i));
        e.0 += 1;
    }
    let mut v: Vec<(&[u8], (usize, usize))> = seen.into_iter().collect();
    v.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    let k = cap.unwrap_or(v.len()).min(v.len());
    v.into_iter().take(k).map(|(y, _)| y.to_vec()).collect()
}

impl LabelPowerset {
    pub fn from_parts(vocabulary: Vec<Vec<u8>>, scorers: Vec<Classifier>, n_features: usize) -> Result<Self> {
        if vocabulary.is_empty() || vocabulary.len() != scorers.len() {
            return Err(contract("label powerset needs one scorer per vocabulary entry"));
        }
        let l = vocabulary[0].len();
        if vocabulary.iter().any(|v| v.len() != l) || scorers.iter().any(|c| c.dim() != n_features) {
            return Err(contract("label powerset shapes are inconsistent"));
        }
        Ok(Self { vocabulary, scorers, n_features })
    }

    pub fn vocabulary(&self) -> &[Vec<u8>] {
        &self.vocabulary
    }

    pub fn scorers(&self) -> &[Classifier] {
        &self.scorers
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Softmax over the scorers' logits.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .scorers
            .iter()
            .map(|c| {
                let p = c.proba_parts(x, &[]);
                (p / (1.0 - p)).ln()
            })
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }
}

/// `cap` keeps only the most frequent labelsets. Rows whose labelset was
/// pruned are negatives for every scorer.
pub fn lp_train(d: &Dataset, lc: &LearnerConfig, cap: Option<usize>) -> Result<LabelPowerset> {
    lc.validate()?;
    if d.n_rows() == 0 {
        return Err(config("label powerset needs at least one training row"));
    }
    if cap == Some(0) {
        return Err(config("vocabulary cap must be at least 1"));
    }
    let vocabulary = labelset_vocabulary(d, cap);
    let scorers = map_indexed(vocabulary.len(), |v| {
        let target: Vec<u8> = (0..d.n_rows()).map(|i| (d.y(i) == vocabulary[v].as_slice()) as u8).collect();
        learners::fit(lc, d.features(), &target)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    LabelPowerset::from_parts(vocabulary, scorers, d.n_features())
}

/// The highest-posterior vocabulary entry (ties to the earlier entry). The
/// reported marginals are posterior-weighted label means; the payoff is the
/// chosen entry's posterior.
pub fn lp_predict(m: &LabelPowerset, x: &[f64]) -> Prediction {
    let post = m.posterior(x);
    let mut best = 0;
    for (v, &p) in post.iter().enumerate() {
        if p > post[best] {
            best = v;
        }
    }
    let l = m.vocabulary[0].len();
    let marginals: Vec<f64> = (0..l)
        .map(|j| post.iter().zip(&m.vocabulary).map(|(p, v)| p * v[j] as f64).sum::<f64>())
        .collect();
    Prediction::with_log_payoff(m.vocabulary[best].clone(), marginals, post[best].ln())
}

impl Predictor for LabelPowerset {
    fn n_labels(&self) -> usize {
        self.vocabulary[0].len()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        lp_predict(self, x)
    }
}

/// A joint with two strong modes, `0011` and `1100`, plus `1111` carrying
/// the remaining mass above a small floor on every other state. Thresholded
/// marginals give `1111`, which is never either mode.
pub fn bimodal_joint() -> TabularJoint {
    let mut w = vec![0.005; 16];
    w[0b0011] = 0.4;
    w[0b1100] = 0.4;
    w[0b1111] = 0.135;
    TabularJoint::from_weights(4, &w).expect("valid weights")
}
