//! MAP inference over the probability tree of a chain.
//!
//! Every root-to-leaf path assigns one label vector; its payoff is the product
//! of the node conditionals along the path. Payoffs are accumulated as sums of
//! logs in chain order. Ties are broken toward the lexicographically smallest
//! label vector (label 1 most significant, 0 before 1).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{ln_outcome, Prediction};
use crate::error::{config, contract, Error, Result};
use crate::structure::ChainStructure;

/// Largest label count exhaustive search will enumerate.
pub const EXHAUSTIVE_MAX_LABELS: usize = 25;

/// A factorised conditional distribution over label vectors.
pub trait ConditionalModel {
    fn structure(&self) -> &ChainStructure;

    /// `P(y_j = 1 | x, parent values)`; the parent values follow the order of
    /// `structure().parents(j)`.
    fn prob_one(&self, j: usize, x: &[f64], parent_values: &[f64]) -> f64;

    fn n_labels(&self) -> usize {
        self.structure().n_labels()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMethod {
    Greedy,
    Exhaustive,
    Beam,
    Epsilon,
}

impl InferenceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            InferenceMethod::Greedy => "greedy",
            InferenceMethod::Exhaustive => "exhaustive",
            InferenceMethod::Beam => "beam",
            InferenceMethod::Epsilon => "epsilon",
        }
    }
}

impl std::str::FromStr for InferenceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "exhaustive" => Ok(Self::Exhaustive),
            "beam" => Ok(Self::Beam),
            "epsilon" => Ok(Self::Epsilon),
            other => Err(config(format!("unknown inference method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceConfig {
    pub method: InferenceMethod,
    pub beam_width: usize,
    pub epsilon: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { method: InferenceMethod::Greedy, beam_width: 5, epsilon: 0.25 }
    }
}

impl InferenceConfig {
    pub fn greedy() -> Self {
        Self::default()
    }

    pub fn exhaustive() -> Self {
        Self { method: InferenceMethod::Exhaustive, ..Self::default() }
    }

    pub fn beam(width: usize) -> Self {
        Self { method: InferenceMethod::Beam, beam_width: width, ..Self::default() }
    }

    pub fn epsilon(epsilon: f64) -> Self {
        Self { method: InferenceMethod::Epsilon, epsilon, ..Self::default() }
    }

    pub fn validate(&self, n_labels: usize) -> Result<()> {
        if self.beam_width == 0 {
            return Err(config("beam width must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(config("epsilon must lie in [0, 1)"));
        }
        if self.method == InferenceMethod::Exhaustive && n_labels > EXHAUSTIVE_MAX_LABELS {
            return Err(Error::Capacity(format!(
                "exhaustive inference over {n_labels} labels exceeds the limit of {EXHAUSTIVE_MAX_LABELS}"
            )));
        }
        Ok(())
    }
}

/// Runs the configured search.
pub fn infer<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64], cfg: &InferenceConfig) -> Result<Prediction> {
    cfg.validate(cm.n_labels())?;
    Ok(match cfg.method {
        InferenceMethod::Greedy => map_greedy(cm, x),
        InferenceMethod::Exhaustive => map_exhaustive(cm, x)?,
        InferenceMethod::Beam => map_beam(cm, x, cfg.beam_width),
        InferenceMethod::Epsilon => map_epsilon(cm, x, cfg.epsilon),
    })
}

fn gather(buf: &mut Vec<f64>, parents: &[usize], labels: &[u8]) {
    buf.clear();
    buf.extend(parents.iter().map(|&p| labels[p] as f64));
}

/// Log of the product of conditionals along `y`, in chain order.
pub fn log_joint_payoff<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64], y: &[u8]) -> f64 {
    let s = cm.structure();
    let mut buf = Vec::new();
    let mut lp = 0.0;
    for &j in s.order() {
        gather(&mut buf, s.parents(j), y);
        lp += ln_outcome(cm.prob_one(j, x, &buf), y[j]);
    }
    lp
}

pub fn joint_payoff<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64], y: &[u8]) -> Result<f64> {
    if y.len() != cm.n_labels() || y.iter().any(|&v| v > 1) {
        return Err(contract("label vector must be binary with one entry per label"));
    }
    Ok(log_joint_payoff(cm, x, y).exp())
}

/// One pass in chain order committing to each node's more likely value
/// (`p >= 0.5` picks 1), feeding hard labels forward.
pub fn map_greedy<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64]) -> Prediction {
    let s = cm.structure();
    let l = s.n_labels();
    let mut labels = vec![0u8; l];
    let mut marginals = vec![0.0; l];
    let mut buf = Vec::new();
    let mut lp = 0.0;
    for &j in s.order() {
        gather(&mut buf, s.parents(j), &labels);
        let p = cm.prob_one(j, x, &buf);
        let y = (p >= 0.5) as u8;
        labels[j] = y;
        marginals[j] = p;
        lp += ln_outcome(p, y);
    }
    Prediction::with_log_payoff(labels, marginals, lp)
}

struct Best {
    lp: f64,
    labels: Vec<u8>,
    marginals: Vec<f64>,
}

impl Best {
    fn offer(slot: &mut Option<Best>, lp: f64, labels: &[u8], marginals: &[f64]) {
        let better = match slot {
            None => true,
            Some(b) => lp > b.lp || (lp == b.lp && labels < b.labels.as_slice()),
        };
        if better {
            *slot = Some(Best { lp, labels: labels.to_vec(), marginals: marginals.to_vec() });
        }
    }
}

/// Depth-first walk of the probability tree, skipping any partial path whose
/// log payoff drops below `floor`.
fn depth_first<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64], floor: f64) -> Option<Best> {
    let s = cm.structure();
    let l = s.n_labels();
    let order = s.order();
    let mut labels = vec![0u8; l];
    let mut marginals = vec![0.0; l];
    let mut best = None;
    let mut buf = Vec::new();
    // frame: (depth, log payoff before this node, next branch to try)
    let mut stack: Vec<(usize, f64, u8)> = vec![(0, 0.0, 0)];
    if l == 0 {
        return None;
    }
    while let Some(frame) = stack.last_mut() {
        let (depth, lp_before, branch) = *frame;
        if branch > 1 {
            stack.pop();
            continue;
        }
        frame.2 += 1;
        let j = order[depth];
        if branch == 0 {
            gather(&mut buf, s.parents(j), &labels);
            marginals[j] = cm.prob_one(j, x, &buf);
        }
        labels[j] = branch;
        let lp = lp_before + ln_outcome(marginals[j], branch);
        if lp < floor {
            continue;
        }
        if depth + 1 == l {
            Best::offer(&mut best, lp, &labels, &marginals);
        } else {
            stack.push((depth + 1, lp, 0));
        }
    }
    best
}

/// Exact MAP by enumerating all `2^L` paths.
pub fn map_exhaustive<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64]) -> Result<Prediction> {
    let l = cm.n_labels();
    if l > EXHAUSTIVE_MAX_LABELS {
        return Err(Error::Capacity(format!(
            "exhaustive inference over {l} labels exceeds the limit of {EXHAUSTIVE_MAX_LABELS}"
        )));
    }
    let best = depth_first(cm, x, f64::NEG_INFINITY).expect("at least one path");
    Ok(Prediction::with_log_payoff(best.labels, best.marginals, best.lp))
}

/// Depth-first search pruning partial paths with payoff below `epsilon`;
/// falls back to greedy if nothing survives.
pub fn map_epsilon<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64], epsilon: f64) -> Prediction {
    let floor = if epsilon > 0.0 { epsilon.ln() } else { f64::NEG_INFINITY };
    match depth_first(cm, x, floor) {
        Some(b) => Prediction::with_log_payoff(b.labels, b.marginals, b.lp),
        None => map_greedy(cm, x),
    }
}

/// Level-synchronous beam search keeping the `width` best partial paths.
pub fn map_beam<M: ConditionalModel + ?Sized>(cm: &M, x: &[f64], width: usize) -> Prediction {
    let width = width.max(1);
    let s = cm.structure();
    let l = s.n_labels();
    struct Partial {
        labels: Vec<u8>,
        marginals: Vec<f64>,
        lp: f64,
    }
    let mut beam = vec![Partial { labels: vec![0; l], marginals: vec![0.0; l], lp: 0.0 }];
    let mut buf = Vec::new();
    for &j in s.order() {
        let mut next = Vec::with_capacity(beam.len() * 2);
        for mut part in beam {
            gather(&mut buf, s.parents(j), &part.labels);
            let p = cm.prob_one(j, x, &buf);
            part.marginals[j] = p;
            let mut one = Partial { labels: part.labels.clone(), marginals: part.marginals.clone(), lp: part.lp + p.ln() };
            one.labels[j] = 1;
            part.lp += (1.0 - p).ln();
            part.labels[j] = 0;
            next.push(part);
            next.push(one);
        }
        next.sort_by(|a, b| b.lp.total_cmp(&a.lp).then_with(|| a.labels.cmp(&b.labels)));
        next.truncate(width);
        beam = next;
    }
    let best = beam.swap_remove(0);
    Prediction::with_log_payoff(best.labels, best.marginals, best.lp)
}

/// Index of a label vector in a table whose first label is the most
/// significant bit.
#[inline]
pub fn labels_to_index(y: &[u8]) -> usize {
    y.iter().fold(0, |acc, &v| (acc << 1) | v as usize)
}

pub fn index_to_labels(idx: usize, n_labels: usize) -> Vec<u8> {
    (0..n_labels).map(|j| ((idx >> (n_labels - 1 - j)) & 1) as u8).collect()
}

/// An explicit joint distribution over `{0,1}^L`, usable as a conditional
/// model under any structure by marginalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularJoint {
    probs: Vec<f64>,
    structure: ChainStructure,
}

pub const TABULAR_MAX_LABELS: usize = 20;

impl TabularJoint {
    /// `probs[i]` is the probability of `index_to_labels(i, L)`. Must sum to
    /// one within 1e-12.
    pub fn new(n_labels: usize, probs: Vec<f64>) -> Result<Self> {
        if n_labels == 0 || n_labels > TABULAR_MAX_LABELS {
            return Err(config(format!("tabular joint needs 1..={TABULAR_MAX_LABELS} labels")));
        }
        if probs.len() != 1 << n_labels {
            return Err(contract(format!("table needs {} entries, got {}", 1usize << n_labels, probs.len())));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(contract("table entries must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(contract(format!("table sums to {total}, not 1")));
        }
        Ok(Self { probs, structure: ChainStructure::full_cascade_identity(n_labels) })
    }

    /// Normalises nonnegative weights into a table.
    pub fn from_weights(n_labels: usize, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(contract("weights must have positive total"));
        }
        Self::new(n_labels, weights.iter().map(|w| w / total).collect())
    }

    /// Entries drawn uniformly from (0, 1] and normalised.
    pub fn random(n_labels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..1usize << n_labels).map(|_| 1.0 - rng.gen::<f64>()).collect();
        Self::from_weights(n_labels, &w).expect("positive weights")
    }

    pub fn uniform(n_labels: usize) -> Self {
        let n = 1usize << n_labels;
        Self::new(n_labels, vec![1.0 / n as f64; n]).expect("uniform table")
    }

    /// The same distribution factorised along another structure.
    pub fn with_structure(mut self, structure: ChainStructure) -> Result<Self> {
        if structure.n_labels() != self.n_labels() {
            return Err(contract("structure label count differs from the table"));
        }
        self.structure = structure;
        Ok(self)
    }

    pub fn n_labels(&self) -> usize {
        self.structure.n_labels()
    }

    pub fn table(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, y: &[u8]) -> f64 {
        self.probs[labels_to_index(y)]
    }

    pub fn marginals(&self) -> Vec<f64> {
        let l = self.n_labels();
        let mut m = vec![0.0; l];
        for (i, &p) in self.probs.iter().enumerate() {
            for (j, mj) in m.iter_mut().enumerate() {
                if (i >> (l - 1 - j)) & 1 == 1 {
                    *mj += p;
                }
            }
        }
        m
    }

    /// Most probable vector, smallest index on ties.
    pub fn mode(&self) -> Vec<u8> {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        index_to_labels(best, self.n_labels())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return index_to_labels(i, self.n_labels());
            }
        }
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        index_to_labels(last, self.n_labels())
    }

    /// `P(y_j = 1 | y_k = v_k for k in given)` by summing table entries.
    pub fn conditional_on(&self, j: usize, given: &[usize], values: &[f64]) -> f64 {
        let l = self.n_labels();
        let (mut num, mut den) = (0.0, 0.0);
        'rows: for (i, &p) in self.probs.iter().enumerate() {
            for (&k, &v) in given.iter().zip(values) {
                if ((i >> (l - 1 - k)) & 1) as f64 != v {
                    continue 'rows;
                }
            }
            den += p;
            if (i >> (l - 1 - j)) & 1 == 1 {
                num += p;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            0.5
        }
    }

    /// `P(y_j = 1 | all other labels as in state)`.
    pub fn full_conditional(&self, j: usize, state: &[u8]) -> f64 {
        let l = self.n_labels();
        let base = labels_to_index(state) & !(1 << (l - 1 - j));
        let p0 = self.probs[base];
        let p1 = self.probs[base | 1 << (l - 1 - j)];
        if p0 + p1 > 0.0 {
            p1 / (p0 + p1)
        } else {
            0.5
        }
    }
}

impl ConditionalModel for TabularJoint {
    fn structure(&self) -> &ChainStructure {
        &self.structure
    }

    fn prob_one(&self, j: usize, _x: &[f64], parent_values: &[f64]) -> f64 {
        self.conditional_on(j, self.structure.parents(j), parent_values)
    }
}
