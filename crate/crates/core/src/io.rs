//! Plain-text model records.
//!
//! A record starts with `chainkit-model 1`, then a method tag line, then
//! nested blocks. Floats are written with 17 significant digits so a
//! save/load round trip is exact.
//!
//! ```text
//! chainkit-model 1
//! chain propagation=hard features=2
//! structure 2
//! 1:
//! 2: 1
//! order: 1,2
//! classifier logistic dim=2 clip=1.0000000000000000e-6
//! bias 0.0000000000000000e0
//! weights 1.5000000000000000e0 -2.0000000000000000e0
//! end
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::chain::{ChainModel, Prediction, Propagation};
use crate::error::{config, Error, Result};
use crate::learners::{Classifier, LearnerConfig, LearnerKind, Model, Regularization, TreeNode};
use crate::relatives::{
    Aggregation, Decode, DependencyNetwork, EnsembleModel, GibbsConfig, LabelPowerset, PassOneInputs, StackedBr,
    TwoPassChain,
};
use crate::inference::{InferenceConfig, InferenceMethod};
use crate::search::DynamicEnsemble;
use crate::structure::ChainStructure;
use crate::Predictor;

const MAGIC: &str = "chainkit-model 1";

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Any trained model the command line can save and reload.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Chain(ChainModel),
    Ensemble(EnsembleModel),
    DependencyNetwork(DependencyNetwork),
    Stacked(StackedBr),
    TwoPass(TwoPassChain),
    LabelPowerset(LabelPowerset),
    Dynamic(DynamicEnsemble),
}

impl AnyModel {
    pub fn method_tag(&self) -> &'static str {
        match self {
            AnyModel::Chain(_) => "chain",
            AnyModel::Ensemble(_) => "ensemble",
            AnyModel::DependencyNetwork(_) => "cdn",
            AnyModel::Stacked(_) => "stacked",
            AnyModel::TwoPass(_) => "two_pass",
            AnyModel::LabelPowerset(_) => "lp",
            AnyModel::Dynamic(_) => "dynamic",
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        match self {
            AnyModel::Chain(m) => write_chain(&mut s, m),
            AnyModel::Ensemble(m) => {
                let _ = writeln!(s, "ensemble members={} aggregation={}", m.members.len(), m.aggregation.as_str());
                m.members.iter().for_each(|c| write_chain(&mut s, c));
            }
            AnyModel::DependencyNetwork(m) => {
                let g = &m.gibbs;
                let _ = writeln!(
                    s,
                    "cdn features={} labels={} burn_in={} samples={} seed={} decode={}",
                    m.n_features,
                    m.classifiers.len(),
                    g.burn_in,
                    g.samples,
                    g.seed,
                    g.decode.as_str()
                );
                m.classifiers.iter().chain(&m.initial).for_each(|c| write_classifier(&mut s, c));
            }
            AnyModel::Stacked(m) => {
                let _ = writeln!(
                    s,
                    "stacked features={} labels={} include_input={}",
                    m.n_features,
                    m.layer1.len(),
                    m.include_input
                );
                m.layer1.iter().chain(&m.layer2).for_each(|c| write_classifier(&mut s, c));
            }
            AnyModel::TwoPass(m) => {
                let _ = writeln!(s, "two_pass inputs={}", m.pass_one_inputs.as_str());
                write_chain(&mut s, &m.first);
                m.second.iter().for_each(|c| write_classifier(&mut s, c));
            }
            AnyModel::LabelPowerset(m) => {
                let _ = writeln!(s, "lp features={} size={}", m.n_features, m.vocabulary.len());
                for v in &m.vocabulary {
                    let bits: String = v.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
                    let _ = writeln!(s, "labelset {bits}");
                }
                m.scorers.iter().for_each(|c| write_classifier(&mut s, c));
            }
            AnyModel::Dynamic(m) => {
                let _ = writeln!(s, "dynamic members={}", m.models.len());
                for (chain, cfg) in &m.models {
                    let _ = writeln!(
                        s,
                        "inference method={} beam_width={} epsilon={}",
                        cfg.method.as_str(),
                        cfg.beam_width,
                        f(cfg.epsilon)
                    );
                    write_chain(&mut s, chain);
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let (ln, magic) = r.next()?;
        if magic != MAGIC {
            return Err(fmt_err(ln, format!("expected {MAGIC:?}")));
        }
        let (ln, head) = r.peek()?;
        let tag = head.split_whitespace().next().unwrap_or("");
        let model = match tag {
            "chain" => AnyModel::Chain(read_chain(&mut r)?),
            "ensemble" => {
                r.next()?;
                let kv = KeyValues::parse(ln, head, "ensemble")?;
                let n: usize = kv.get("members")?;
                let aggregation: Aggregation = kv.get_str("aggregation")?.parse().map_err(|e| wrap(ln, e))?;
                let members = (0..n).map(|_| read_chain(&mut r)).collect::<Result<Vec<_>>>()?;
                AnyModel::Ensemble(EnsembleModel::with_aggregation(members, aggregation).map_err(|e| wrap(ln, e))?)
            }
            "cdn" => {
                r.next()?;
                let kv = KeyValues::parse(ln, head, "cdn")?;
                let l: usize = kv.get("labels")?;
                let gibbs = GibbsConfig {
                    burn_in: kv.get("burn_in")?,
                    samples: kv.get("samples")?,
                    seed: kv.get("seed")?,
                    decode: kv.get_str("decode")?.parse::<Decode>().map_err(|e| wrap(ln, e))?,
                };
                let full = read_classifiers(&mut r, l)?;
                let init = read_classifiers(&mut r, l)?;
                AnyModel::DependencyNetwork(
                    DependencyNetwork::from_parts(full, init, kv.get("features")?, gibbs).map_err(|e| wrap(ln, e))?,
                )
            }
            "stacked" => {
                r.next()?;
                let kv = KeyValues::parse(ln, head, "stacked")?;
                let l: usize = kv.get("labels")?;
                let include = kv.get_bool("include_input")?;
                let l1 = read_classifiers(&mut r, l)?;
                let l2 = read_classifiers(&mut r, l)?;
                AnyModel::Stacked(StackedBr::from_parts(l1, l2, include, kv.get("features")?).map_err(|e| wrap(ln, e))?)
            }
            "two_pass" => {
                r.next()?;
                let kv = KeyValues::parse(ln, head, "two_pass")?;
                let inputs = match kv.get_str("inputs")? {
                    "predicted" => PassOneInputs::Predicted,
                    "true" => PassOneInputs::TrueLabels,
                    other => return Err(fmt_err(ln, format!("unknown pass-one inputs {other:?}"))),
                };
                let first = read_chain(&mut r)?;
                let second = read_classifiers(&mut r, first.n_labels())?;
                AnyModel::TwoPass(TwoPassChain::from_parts(first, second, inputs).map_err(|e| wrap(ln, e))?)
            }
            "lp" => {
                r.next()?;
                let kv = KeyValues::parse(ln, head, "lp")?;
                let n: usize = kv.get("size")?;
                let mut vocab = Vec::with_capacity(n);
                for _ in 0..n {
                    let (ln, line) = r.next()?;
                    let bits = line
                        .strip_prefix("labelset ")
                        .ok_or_else(|| fmt_err(ln, "expected a labelset line"))?;
                    let v = bits
                        .chars()
                        .map(|c| match c {
                            '0' => Ok(0u8),
                            '1' => Ok(1u8),
                            _ => Err(fmt_err(ln, format!("bad labelset bit {c:?}"))),
                        })
                        .collect::<Result<Vec<u8>>>()?;
                    vocab.push(v);
                }
                let scorers = read_classifiers(&mut r, n)?;
                AnyModel::LabelPowerset(LabelPowerset::from_parts(vocab, scorers, kv.get("features")?).map_err(|e| wrap(ln, e))?)
            }
            "dynamic" => {
                r.next()?;
                let kv = KeyValues::parse(ln, head, "dynamic")?;
                let n: usize = kv.get("members")?;
                if n == 0 {
                    return Err(fmt_err(ln, "dynamic ensemble needs at least one member"));
                }
                let mut models = Vec::with_capacity(n);
                for _ in 0..n {
                    let (il, line) = r.next()?;
                    let kv = KeyValues::parse(il, line, "inference")?;
                    let cfg = InferenceConfig {
                        method: kv.get_str("method")?.parse::<InferenceMethod>().map_err(|e| wrap(il, e))?,
                        beam_width: kv.get("beam_width")?,
                        epsilon: parse_f64(il, kv.get_str("epsilon")?)?,
                    };
                    let chain = read_chain(&mut r)?;
                    cfg.validate(chain.n_labels()).map_err(|e| wrap(il, e))?;
                    models.push((chain, cfg));
                }
                AnyModel::Dynamic(DynamicEnsemble { models })
            }
            other => return Err(fmt_err(ln, format!("unknown method tag {other:?}"))),
        };
        if let Some((ln, extra)) = r.peek_opt() {
            return Err(fmt_err(ln, format!("trailing content {extra:?}")));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Node classifiers held by the model.
    pub fn classifier_count(&self) -> usize {
        match self {
            AnyModel::Chain(m) => m.n_labels(),
            AnyModel::Ensemble(m) => m.members.iter().map(|c| c.n_labels()).sum(),
            AnyModel::DependencyNetwork(m) => 2 * m.classifiers.len(),
            AnyModel::Stacked(m) => 2 * m.layer1.len(),
            AnyModel::TwoPass(m) => 2 * m.second.len(),
            AnyModel::LabelPowerset(m) => m.scorers.len(),
            AnyModel::Dynamic(m) => m.models.iter().map(|(c, _)| c.n_labels()).sum(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            AnyModel::Chain(m) => m.n_features(),
            AnyModel::Ensemble(m) => m.members[0].n_features(),
            AnyModel::DependencyNetwork(m) => m.n_features,
            AnyModel::Stacked(m) => m.n_features,
            AnyModel::TwoPass(m) => m.first.n_features(),
            AnyModel::LabelPowerset(m) => m.n_features,
            AnyModel::Dynamic(m) => m.models[0].0.n_features(),
        }
    }
}

impl Predictor for AnyModel {
    fn n_labels(&self) -> usize {
        match self {
            AnyModel::Chain(m) => m.n_labels(),
            AnyModel::Ensemble(m) => m.n_labels(),
            AnyModel::DependencyNetwork(m) => Predictor::n_labels(m),
            AnyModel::Stacked(m) => m.n_labels(),
            AnyModel::TwoPass(m) => m.n_labels(),
            AnyModel::LabelPowerset(m) => m.n_labels(),
            AnyModel::Dynamic(m) => m.n_labels(),
        }
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            AnyModel::Chain(m) => m.predict(x),
            AnyModel::Ensemble(m) => m.predict(x),
            AnyModel::DependencyNetwork(m) => m.predict(x),
            AnyModel::Stacked(m) => m.predict(x),
            AnyModel::TwoPass(m) => m.predict(x),
            AnyModel::LabelPowerset(m) => m.predict(x),
            AnyModel::Dynamic(m) => m.predict(x),
        }
    }
}

fn write_chain(s: &mut String, m: &ChainModel) {
    let _ = writeln!(s, "chain propagation={} features={}", m.propagation().as_str(), m.n_features());
    let _ = writeln!(s, "structure {}", m.n_labels());
    s.push_str(&m.structure().to_text());
    m.classifiers().iter().for_each(|c| write_classifier(s, c));
}

/// Appends one classifier block.
pub fn write_classifier(s: &mut String, c: &Classifier) {
    let _ = writeln!(s, "classifier {} dim={} clip={}", c.kind_name(), c.dim, f(c.clip_epsilon));
    match &c.model {
        Model::Logistic { weights, bias } => {
            let _ = writeln!(s, "bias {}", f(*bias));
            let w: Vec<String> = weights.iter().map(|v| f(*v)).collect();
            let _ = writeln!(s, "weights {}", w.join(" "));
        }
        Model::Constant { p } => {
            let _ = writeln!(s, "p {}", f(*p));
        }
        Model::Tree { nodes } => {
            let _ = writeln!(s, "nodes {}", nodes.len());
            for n in nodes {
                match n {
                    TreeNode::Split { feature, threshold, left, right } => {
                        let _ = writeln!(s, "split {feature} {} {left} {right}", f(*threshold));
                    }
                    TreeNode::Leaf { p } => {
                        let _ = writeln!(s, "leaf {}", f(*p));
                    }
                }
            }
        }
    }
    s.push_str("end\n");
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn peek_opt(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn peek(&self) -> Result<(usize, &'a str)> {
        self.peek_opt().ok_or_else(|| self.eof())
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let item = self.peek()?;
        self.pos += 1;
        Ok(item)
    }

    fn eof(&self) -> Error {
        let line = self.lines.last().map_or(0, |l| l.0);
        fmt_err(line, "unexpected end of model record")
    }
}

fn fmt_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format { line, message: message.into() }
}

fn wrap(line: usize, e: Error) -> Error {
    match e {
        Error::Format { .. } => e,
        other => fmt_err(line, other.to_string()),
    }
}

fn parse_f64(line: usize, t: &str) -> Result<f64> {
    t.parse::<f64>().map_err(|_| fmt_err(line, format!("bad number {t:?}")))
}

struct KeyValues<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> KeyValues<'a> {
    fn parse(line: usize, text: &'a str, tag: &str) -> Result<Self> {
        let mut it = text.split_whitespace();
        if it.next() != Some(tag) {
            return Err(fmt_err(line, format!("expected a {tag:?} line")));
        }
        let pairs = it
            .map(|t| t.split_once('=').ok_or_else(|| fmt_err(line, format!("expected key=value, found {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { line, pairs })
    }

    fn get_str(&self, key: &str) -> Result<&'a str> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| fmt_err(self.line, format!("missing {key}=")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get_str(key)?;
        v.parse().map_err(|_| fmt_err(self.line, format!("bad value for {key}: {v:?}")))
    }

    fn get_bool(&self, key: &str) -> Result<bool> {
        self.get(key)
    }
}

fn read_chain(r: &mut Reader) -> Result<ChainModel> {
    let (ln, head) = r.next()?;
    let kv = KeyValues::parse(ln, head, "chain")?;
    let propagation = match kv.get_str("propagation")? {
        "hard" => Propagation::Hard,
        "soft" => Propagation::Soft,
        other => return Err(fmt_err(ln, format!("unknown propagation {other:?}"))),
    };
    let features: usize = kv.get("features")?;
    let (sln, sline) = r.next()?;
    let l: usize = sline
        .strip_prefix("structure ")
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| fmt_err(sln, "expected 'structure <labels>'"))?;
    let mut text = String::new();
    for _ in 0..=l {
        text.push_str(r.next()?.1);
        text.push('\n');
    }
    let structure = ChainStructure::from_text(&text).map_err(|e| match e {
        Error::Format { line, message } => fmt_err(sln + line, message),
        other => wrap(sln, other),
    })?;
    let classifiers = read_classifiers(r, l)?;
    ChainModel::from_parts(structure, classifiers, propagation, features).map_err(|e| wrap(ln, e))
}

fn read_classifiers(r: &mut Reader, n: usize) -> Result<Vec<Classifier>> {
    (0..n).map(|_| read_classifier(r)).collect()
}

fn read_classifier(r: &mut Reader) -> Result<Classifier> {
    let (ln, head) = r.next()?;
    let mut it = head.split_whitespace();
    if it.next() != Some("classifier") {
        return Err(fmt_err(ln, "expected a classifier block"));
    }
    let kind = it.next().ok_or_else(|| fmt_err(ln, "missing classifier kind"))?;
    let kv = KeyValues::parse(ln, head.strip_prefix("classifier ").unwrap_or(""), kind)?;
    let dim: usize = kv.get("dim")?;
    let clip_epsilon = parse_f64(ln, kv.get_str("clip")?)?;
    let model = match kind {
        "logistic" => {
            let (bl, b) = r.next()?;
            let bias = parse_f64(bl, b.strip_prefix("bias ").ok_or_else(|| fmt_err(bl, "expected 'bias'"))?)?;
            let (wl, w) = r.next()?;
            let w = w.strip_prefix("weights").ok_or_else(|| fmt_err(wl, "expected 'weights'"))?;
            let weights = w.split_whitespace().map(|t| parse_f64(wl, t)).collect::<Result<Vec<_>>>()?;
            if weights.len() != dim {
                return Err(fmt_err(wl, format!("expected {dim} weights, found {}", weights.len())));
            }
            Model::Logistic { weights, bias }
        }
        "constant" => {
            let (pl, p) = r.next()?;
            Model::Constant { p: parse_f64(pl, p.strip_prefix("p ").ok_or_else(|| fmt_err(pl, "expected 'p'"))?)? }
        }
        "tree" => {
            let (nl, n) = r.next()?;
            let count: usize = n
                .strip_prefix("nodes ")
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| fmt_err(nl, "expected 'nodes <count>'"))?;
            let mut nodes = Vec::with_capacity(count);
            for _ in 0..count {
                let (tl, t) = r.next()?;
                let toks: Vec<&str> = t.split_whitespace().collect();
                let node = match toks.as_slice() {
                    ["leaf", p] => TreeNode::Leaf { p: parse_f64(tl, p)? },
                    ["split", feat, thr, left, right] => {
                        let idx = |s: &str| s.parse::<usize>().map_err(|_| fmt_err(tl, format!("bad index {s:?}")));
                        TreeNode::Split { feature: idx(feat)?, threshold: parse_f64(tl, thr)?, left: idx(left)?, right: idx(right)? }
                    }
                    _ => return Err(fmt_err(tl, format!("bad tree node {t:?}"))),
                };
                nodes.push(node);
            }
            for (i, n) in nodes.iter().enumerate() {
                if let TreeNode::Split { feature, left, right, .. } = n {
                    if *feature >= dim || *left >= count || *right >= count || *left <= i || *right <= i {
                        return Err(fmt_err(nl, format!("tree node {i} has out-of-range links")));
                    }
                }
            }
            Model::Tree { nodes }
        }
        other => return Err(fmt_err(ln, format!("unknown classifier kind {other:?}"))),
    };
    let (el, e) = r.next()?;
    if e != "end" {
        return Err(fmt_err(el, "expected 'end'"));
    }
    Ok(Classifier { dim, clip_epsilon, model })
}

/// `key=value` lines describing a learner configuration.
pub fn learner_config_to_text(lc: &LearnerConfig) -> String {
    let kind = match lc.kind {
        LearnerKind::Logistic => "logistic",
        LearnerKind::DecisionTree => "tree",
    };
    let reg = match lc.regularization {
        Regularization::L1 => "l1",
        Regularization::L2 => "l2",
    };
    format!(
        "learner={kind}\nregularization={reg}\nlambda={:?}\nlearning_rate={:?}\nmax_iterations={}\ntolerance={:?}\nmax_depth={}\nmin_samples_leaf={}\nclip_epsilon={:?}\nlearner_seed={}\n",
        lc.lambda, lc.learning_rate, lc.max_iterations, lc.tolerance, lc.max_depth, lc.min_samples_leaf, lc.clip_epsilon, lc.seed
    )
}

/// Applies one learner key. Returns `false` for keys that are not learner
/// settings.
pub fn apply_learner_key(lc: &mut LearnerConfig, key: &str, value: &str) -> Result<bool> {
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| config(format!("bad value for {key}: {v:?}")))
    }
    match key {
        "learner" => {
            lc.kind = match value {
                "logistic" | "linear" => LearnerKind::Logistic,
                "tree" => LearnerKind::DecisionTree,
                _ => return Err(config(format!("unknown learner {value:?}"))),
            }
        }
        "regularization" => {
            lc.regularization = match value {
                "l1" => Regularization::L1,
                "l2" => Regularization::L2,
                _ => return Err(config(format!("unknown regularization {value:?}"))),
            }
        }
        "lambda" => lc.lambda = num(key, value)?,
        "learning_rate" => lc.learning_rate = num(key, value)?,
        "max_iterations" => lc.max_iterations = num(key, value)?,
        "tolerance" => lc.tolerance = num(key, value)?,
        "max_depth" => lc.max_depth = num(key, value)?,
        "min_samples_leaf" => lc.min_samples_leaf = num(key, value)?,
        "clip_epsilon" => lc.clip_epsilon = num(key, value)?,
        "learner_seed" => lc.seed = num(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Parses `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(ln, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| fmt_err(ln, format!("expected key=value, found {l:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain;
    use crate::relatives::{self, GibbsConfig};
    use crate::synth;

    fn round_trip(m: AnyModel) {
        let text = m.to_text();
        let back = AnyModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn chain_round_trip_is_exact() {
        let d = synth::random_cascade(60, 3, 4, 1);
        let s = ChainStructure::markov_chain(&[2, 0, 3, 1]).unwrap();
        let m = chain::train(&d, &s, &LearnerConfig::default(), Propagation::Soft).unwrap();
        round_trip(AnyModel::Chain(m));
    }

    #[test]
    fn tree_and_constant_round_trip() {
        let d = synth::xor_toy(5, 0.05, 2);
        let x: Vec<Vec<f64>> = (0..d.n_rows()).map(|i| d.x(i).to_vec()).collect();
        let y: Vec<Vec<u8>> = (0..d.n_rows()).map(|i| vec![d.label(i, 2), 1]).collect();
        let d2 = crate::Dataset::from_rows(&x, &y).unwrap();
        let m = chain::train(&d2, &ChainStructure::empty(2), &LearnerConfig::tree(3), Propagation::Hard).unwrap();
        assert_eq!(m.classifiers()[1].kind_name(), "constant");
        assert_eq!(m.classifiers()[0].kind_name(), "tree");
        round_trip(AnyModel::Chain(m));
    }

    #[test]
    fn relatives_round_trip() {
        let d = synth::random_cascade(50, 2, 3, 4);
        let lc = LearnerConfig::default();
        round_trip(AnyModel::Ensemble(relatives::ecc_train(&d, &lc, 3, 1).unwrap()));
        let g = GibbsConfig { burn_in: 5, samples: 10, seed: 2, decode: Decode::JointMode };
        round_trip(AnyModel::DependencyNetwork(relatives::cdn_train(&d, &lc, g).unwrap()));
        round_trip(AnyModel::Stacked(relatives::stacked_br_train(&d, &lc, true).unwrap()));
        round_trip(AnyModel::TwoPass(relatives::two_pass_train(&d, &[1, 2, 0], &lc, PassOneInputs::Predicted).unwrap()));
        round_trip(AnyModel::LabelPowerset(relatives::lp_train(&d, &lc, Some(3)).unwrap()));
        let models = crate::search::random_orders(3, 2, 5)
            .into_iter()
            .zip([InferenceConfig::beam(3), InferenceConfig::epsilon(0.125)])
            .map(|(s, cfg)| (chain::train(&d, &s, &lc, Propagation::Hard).unwrap(), cfg))
            .collect();
        round_trip(AnyModel::Dynamic(DynamicEnsemble { models }));
    }

    #[test]
    fn reloaded_model_predicts_identically() {
        let d = synth::random_cascade(40, 2, 3, 9);
        let m = AnyModel::Chain(
            chain::train(&d, &ChainStructure::full_cascade_identity(3), &LearnerConfig::default(), Propagation::Hard)
                .unwrap(),
        );
        let back = AnyModel::from_text(&m.to_text()).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(back.predict(d.x(i)), m.predict(d.x(i)));
        }
    }

    #[test]
    fn malformed_records_report_lines() {
        assert!(matches!(AnyModel::from_text("nope"), Err(Error::Format { line: 1, .. })));
        let d = synth::random_cascade(20, 1, 2, 3);
        let m = AnyModel::Chain(
            chain::train(&d, &ChainStructure::empty(2), &LearnerConfig::default(), Propagation::Hard).unwrap(),
        );
        let text = m.to_text().replace("bias ", "bias x");
        assert!(matches!(AnyModel::from_text(&text), Err(Error::Format { .. })));
        let truncated: String = m.to_text().lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(AnyModel::from_text(&truncated).is_err());
        assert!(AnyModel::from_text(&format!("{}extra\n", m.to_text())).is_err());
    }

    #[test]
    fn learner_keys_round_trip() {
        let mut lc = LearnerConfig::tree(4);
        lc.lambda = 0.25;
        lc.regularization = Regularization::L1;
        let mut back = LearnerConfig::default();
        for (k, v) in parse_key_values(&learner_config_to_text(&lc)).unwrap() {
            assert!(apply_learner_key(&mut back, &k, &v).unwrap());
        }
        assert_eq!(back, lc);
        assert!(!apply_learner_key(&mut back, "steps", "3").unwrap());
        assert!(apply_learner_key(&mut back, "lambda", "abc").is_err());
    }
}
