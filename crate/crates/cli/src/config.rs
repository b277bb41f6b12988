//! Run configuration: defaults, then a preset, then a key=value file, then
//! explicit flags.

use std::fmt;
use std::str::FromStr;

use chainkit::eval::Metric;
use chainkit::io::apply_learner_key;
use chainkit::relatives::Decode;
use chainkit::{InferenceConfig, InferenceMethod, LearnerConfig, LearnerKind, Propagation, Regularization};

/// Bad flag values and unsupported combinations. Exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Br,
    Cc,
    Ecc,
    Cdn,
    Stacked,
    TwoPass,
    Lp,
    Dynamic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Br => "br",
            Method::Cc => "cc",
            Method::Ecc => "ecc",
            Method::Cdn => "cdn",
            Method::Stacked => "stacked",
            Method::TwoPass => "two_pass",
            Method::Lp => "lp",
            Method::Dynamic => "dynamic",
        }
    }
}

impl FromStr for Method {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        Ok(match s {
            "br" => Method::Br,
            "cc" => Method::Cc,
            "ecc" => Method::Ecc,
            "cdn" => Method::Cdn,
            "stacked" => Method::Stacked,
            "two_pass" | "two-pass" => Method::TwoPass,
            "lp" => Method::Lp,
            "dynamic" => Method::Dynamic,
            _ => return Err(usage(format!("unknown method {s:?} (br, cc, ecc, cdn, stacked, two_pass, lp, dynamic)"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureSource {
    Order,
    Random,
    MarginalDep,
    CondDep,
    Accuracy,
    Search,
}

impl StructureSource {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureSource::Order => "order",
            StructureSource::Random => "random",
            StructureSource::MarginalDep => "marginal_dep",
            StructureSource::CondDep => "cond_dep",
            StructureSource::Accuracy => "accuracy",
            StructureSource::Search => "search",
        }
    }
}

impl FromStr for StructureSource {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        Ok(match s {
            "order" => StructureSource::Order,
            "random" => StructureSource::Random,
            "marginal_dep" | "marginal-dep" => StructureSource::MarginalDep,
            "cond_dep" | "cond-dep" => StructureSource::CondDep,
            "accuracy" => StructureSource::Accuracy,
            "search" => StructureSource::Search,
            _ => {
                return Err(usage(format!(
                    "unknown structure source {s:?} (order, random, marginal_dep, cond_dep, accuracy, search)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub method: Method,
    pub structure: StructureSource,
    /// 0-based label order for `StructureSource::Order`; identity when absent.
    pub order: Option<Vec<usize>>,
    pub inference: InferenceConfig,
    pub learner: LearnerConfig,
    pub mixed_learners: bool,
    pub propagation: Propagation,
    pub ensemble_size: usize,
    pub edge_keep: Option<f64>,
    pub folds: usize,
    pub steps: usize,
    pub seed: u64,
    pub vocab_cap: Option<usize>,
    pub decode: Decode,
    pub burn_in: usize,
    pub samples: usize,
    pub include_input: bool,
    pub test_fraction: f64,
    pub sweep_orders: usize,
    pub metric: Metric,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: None,
            method: Method::Cc,
            structure: StructureSource::Order,
            order: None,
            inference: InferenceConfig::greedy(),
            learner: LearnerConfig::default(),
            mixed_learners: false,
            propagation: Propagation::Hard,
            ensemble_size: 10,
            edge_keep: None,
            folds: 3,
            steps: 50,
            seed: 0,
            vocab_cap: None,
            decode: Decode::MarginalMean,
            burn_in: 100,
            samples: 1000,
            include_input: true,
            test_fraction: 0.3,
            sweep_orders: 45,
            metric: Metric::ExactMatch,
        }
    }
}

/// One row of the recipe table: name, inference, chain model(s), base models.
pub struct Preset {
    pub name: &'static str,
    pub inference: &'static str,
    pub chains: &'static str,
    pub base: &'static str,
}

pub const PRESETS: [Preset; 7] = [
    Preset { name: "baseline", inference: "Greedy", chains: "Ensemble of random chains", base: "Linear" },
    Preset {
        name: "kaggler",
        inference: "Greedy",
        chains: "Random subspace ensemble, random sparse chains",
        base: "A mix/random selection, incl. tree-based",
    },
    Preset { name: "good-order", inference: "Beam/ε-approx.", chains: "Single model via search", base: "Linear, probabilistic" },
    Preset { name: "neural-net", inference: "Greedy", chains: "Single, full cascade", base: "L2-reg. logistic regression" },
    Preset {
        name: "neural-net-sparse",
        inference: "Greedy",
        chains: "Single, pruned via base model",
        base: "L1-reg. logistic regression",
    },
    Preset {
        name: "sparse-interpretable",
        inference: "Greedy",
        chains: "Single sparse via cond. dep.",
        base: "Decision trees",
    },
    Preset {
        name: "expensive-effective",
        inference: "Beam/ε-approx.",
        chains: "Dynamic ensemble via multiple-start structure search",
        base: "Linear, or mix",
    },
];

impl RunConfig {
    pub fn apply_preset(&mut self, name: &str) -> Result<(), UsageError> {
        match name {
            "baseline" => {
                self.method = Method::Ecc;
                self.structure = StructureSource::Random;
                self.inference = InferenceConfig::greedy();
                self.learner.kind = LearnerKind::Logistic;
            }
            "kaggler" => {
                self.method = Method::Ecc;
                self.structure = StructureSource::Random;
                self.inference = InferenceConfig::greedy();
                self.edge_keep = Some(0.5);
                self.mixed_learners = true;
            }
            "good-order" => {
                self.method = Method::Cc;
                self.structure = StructureSource::Search;
                self.inference = InferenceConfig::beam(5);
                self.learner.kind = LearnerKind::Logistic;
            }
            "neural-net" => {
                self.method = Method::Cc;
                self.structure = StructureSource::Order;
                self.inference = InferenceConfig::greedy();
                self.learner.kind = LearnerKind::Logistic;
                self.learner.regularization = Regularization::L2;
            }
            "neural-net-sparse" => {
                self.method = Method::Cc;
                self.structure = StructureSource::Order;
                self.inference = InferenceConfig::greedy();
                self.learner.kind = LearnerKind::Logistic;
                self.learner.regularization = Regularization::L1;
                self.learner.lambda = 0.01;
            }
            "sparse-interpretable" => {
                self.method = Method::Cc;
                self.structure = StructureSource::CondDep;
                self.inference = InferenceConfig::greedy();
                self.learner.kind = LearnerKind::DecisionTree;
                self.learner.max_depth = 4;
            }
            "expensive-effective" => {
                self.method = Method::Dynamic;
                self.structure = StructureSource::Search;
                self.inference = InferenceConfig::beam(5);
                self.ensemble_size = 3;
                self.steps = 20;
            }
            _ => {
                let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
                return Err(usage(format!("unknown preset {name:?} ({})", names.join(", "))));
            }
        }
        self.preset = Some(name.to_string());
        Ok(())
    }

    /// Applies one `key=value` setting from a config file or `--config`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, UsageError> {
            v.parse().map_err(|_| usage(format!("bad value for {key}: {v:?}")))
        }
        match key {
            "preset" => self.apply_preset(value)?,
            "method" => self.method = value.parse()?,
            "structure" => self.structure = value.parse()?,
            "order" => self.order = Some(parse_order(value)?),
            "inference" => self.inference.method = parse_inference(value)?,
            "beam" | "beam_width" => self.inference.beam_width = num(key, value)?,
            "epsilon" => self.inference.epsilon = num(key, value)?,
            "learner" if value == "mixed" => {
                self.mixed_learners = true;
                self.learner.kind = LearnerKind::Logistic;
            }
            "propagation" => {
                self.propagation = match value {
                    "hard" => Propagation::Hard,
                    "soft" => Propagation::Soft,
                    _ => return Err(usage(format!("unknown propagation {value:?}"))),
                }
            }
            "ensemble_size" => self.ensemble_size = num(key, value)?,
            "edge_keep" => self.edge_keep = Some(num(key, value)?),
            "folds" => self.folds = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "vocab_cap" => self.vocab_cap = Some(num(key, value)?),
            "decode" => self.decode = value.parse().map_err(|e: chainkit::Error| usage(e.to_string()))?,
            "burn_in" => self.burn_in = num(key, value)?,
            "samples" => self.samples = num(key, value)?,
            "include_input" => self.include_input = num(key, value)?,
            "test_fraction" => self.test_fraction = num(key, value)?,
            "sweep_orders" => self.sweep_orders = num(key, value)?,
            "metric" => self.metric = value.parse().map_err(|e: chainkit::Error| usage(e.to_string()))?,
            _ => {
                if key == "learner" {
                    self.mixed_learners = false;
                }
                let known = apply_learner_key(&mut self.learner, key, value).map_err(|e| usage(e.to_string()))?;
                if !known {
                    return Err(usage(format!("unknown setting {key:?}")));
                }
            }
        }
        Ok(())
    }

    /// The learner with its seed tied to the run seed.
    pub fn learner(&self) -> LearnerConfig {
        let mut lc = self.learner.clone();
        lc.seed = self.seed;
        lc
    }

    /// Rejects combinations the core does not support.
    pub fn check(&self) -> Result<(), UsageError> {
        let m = self.method;
        let s = self.structure;
        let structure_ok = match m {
            Method::Cc => true,
            Method::Br => s == StructureSource::Order && self.order.is_none(),
            Method::Ecc => matches!(s, StructureSource::Order | StructureSource::Random) && self.order.is_none(),
            Method::TwoPass => s == StructureSource::Order,
            Method::Dynamic => s == StructureSource::Search,
            Method::Cdn | Method::Stacked | Method::Lp => s == StructureSource::Order && self.order.is_none(),
        };
        if !structure_ok {
            return Err(usage(format!(
                "method {} does not take structure source {}{}",
                m.as_str(),
                s.as_str(),
                if self.order.is_some() { " with an explicit order" } else { "" }
            )));
        }
        if self.order.is_some() && s != StructureSource::Order {
            return Err(usage("--order only applies to --structure order"));
        }
        if self.inference.method != InferenceMethod::Greedy && !matches!(m, Method::Cc | Method::Dynamic) {
            return Err(usage(format!(
                "inference {} needs a single chain or a dynamic ensemble; method {} predicts greedily",
                self.inference.method.as_str(),
                m.as_str()
            )));
        }
        if self.inference.method != InferenceMethod::Greedy && self.propagation == Propagation::Soft {
            return Err(usage("search-based inference enumerates hard label values; use --propagation hard"));
        }
        if self.mixed_learners && !matches!(m, Method::Ecc | Method::Dynamic) {
            return Err(usage("a learner mix needs an ensemble method (ecc or dynamic)"));
        }
        if self.edge_keep.is_some() && m != Method::Ecc {
            return Err(usage("edge_keep applies to ecc only"));
        }
        if self.ensemble_size == 0 {
            return Err(usage("--ensemble-size must be at least 1"));
        }
        if self.folds < 2 {
            return Err(usage("--folds must be at least 2"));
        }
        if self.samples == 0 {
            return Err(usage("samples must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(usage("test_fraction must lie in (0, 1)"));
        }
        if let Some(k) = self.edge_keep {
            if !(0.0..=1.0).contains(&k) {
                return Err(usage("edge_keep must lie in [0, 1]"));
            }
        }
        self.learner.validate().map_err(|e| usage(e.to_string()))?;
        Ok(())
    }
}

pub fn parse_inference(s: &str) -> Result<InferenceMethod, UsageError> {
    s.parse::<InferenceMethod>().map_err(|_| usage(format!("unknown inference {s:?} (greedy, exhaustive, beam, epsilon)")))
}

/// Parses a 1-based permutation such as `3,1,2` or `3 1 2`.
pub fn parse_order(s: &str) -> Result<Vec<usize>, UsageError> {
    let items: Vec<&str> = s.split(|c| c == ',' || c == ' ').filter(|t| !t.is_empty()).collect();
    let mut order = Vec::with_capacity(items.len());
    for t in items {
        match t.parse::<usize>() {
            Ok(v) if v >= 1 => order.push(v - 1),
            _ => return Err(usage(format!("bad label index {t:?} in order"))),
        }
    }
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted.iter().enumerate().any(|(i, &v)| i != v) {
        return Err(usage(format!("order {s:?} is not a permutation of 1..{}", order.len())));
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_passes_its_own_check() {
        for p in &PRESETS {
            let mut c = RunConfig::default();
            c.apply_preset(p.name).unwrap();
            c.check().unwrap();
        }
    }

    #[test]
    fn unsupported_combinations_are_usage_errors() {
        let mut c = RunConfig { method: Method::Lp, ..Default::default() };
        c.inference = InferenceConfig::beam(3);
        assert!(c.check().is_err());
        let c = RunConfig { method: Method::Br, structure: StructureSource::Search, ..Default::default() };
        assert!(c.check().is_err());
        let c = RunConfig { method: Method::Cdn, order: Some(vec![1, 0]), ..Default::default() };
        assert!(c.check().is_err());
    }

    #[test]
    fn orders_are_one_based_permutations() {
        assert_eq!(parse_order("3,1,2").unwrap(), vec![2, 0, 1]);
        assert_eq!(parse_order("2 1").unwrap(), vec![1, 0]);
        assert!(parse_order("1,1").is_err());
        assert!(parse_order("0,1").is_err());
    }

    #[test]
    fn settings_reach_the_learner() {
        let mut c = RunConfig::default();
        c.set("learner", "tree").unwrap();
        c.set("max_depth", "3").unwrap();
        c.set("steps", "7").unwrap();
        assert_eq!(c.learner.kind, LearnerKind::DecisionTree);
        assert_eq!((c.learner.max_depth, c.steps), (3, 7));
        assert!(c.set("bogus", "1").is_err());
    }
}
