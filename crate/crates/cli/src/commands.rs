use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use chainkit::chain::{self, ChainModel};
use chainkit::eval::{self, MetricReport};
use chainkit::io::AnyModel;
use chainkit::relatives::{self, EnsembleOptions, GibbsConfig};
use chainkit::search::{self, DynamicEnsemble, SearchConfig, TrialSet};
use chainkit::{data, synth, ChainStructure, Dataset, Error, InferenceConfig, InferenceMethod, LearnerKind, Prediction, Predictor};

use crate::config::{usage, Method, RunConfig, StructureSource, UsageError};
use crate::{EvaluateArgs, GenerateArgs, PredictArgs, TrainArgs};

pub enum CliError {
    Usage(UsageError),
    Runtime(String),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Capacity(_) => CliError::Usage(UsageError(e.to_string())),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Writes via a temporary sibling and a rename so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let fail = |e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(fail)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(fail)?;
    std::fs::rename(&tmp, path).map_err(fail)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialise");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn load(args: &crate::DataArgs) -> Result<Dataset> {
    Dataset::load_csv(&args.data, args.labels, args.header)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.data.display())))
}

fn report_json(r: &MetricReport) -> Value {
    json!({
        "hamming_loss": r.hamming_loss,
        "exact_match": r.exact_match,
        "jaccard": r.jaccard,
        "per_label_accuracy": r.per_label_accuracy,
        "n_test": r.n_test,
    })
}

fn inference_json(c: &InferenceConfig) -> Value {
    json!({ "method": c.method.as_str(), "beam_width": c.beam_width, "epsilon": c.epsilon })
}

/// A saved model paired with the inference used for single chains.
pub struct Applied<'a> {
    pub model: &'a AnyModel,
    pub inference: InferenceConfig,
}

impl Applied<'_> {
    fn check(&self) -> std::result::Result<(), UsageError> {
        if self.inference.method != InferenceMethod::Greedy {
            match self.model {
                AnyModel::Chain(m) => self.inference.validate(m.n_labels()).map_err(|e| usage(e.to_string()))?,
                AnyModel::Dynamic(m) => self.inference.validate(m.n_labels()).map_err(|e| usage(e.to_string()))?,
                _ => {
                    return Err(usage(format!(
                        "inference {} applies to single-chain models; this model is {}",
                        self.inference.method.as_str(),
                        self.model.method_tag()
                    )))
                }
            }
        }
        Ok(())
    }
}

impl Predictor for Applied<'_> {
    fn n_labels(&self) -> usize {
        self.model.n_labels()
    }

    fn predict(&self, x: &[f64]) -> Prediction {
        match self.model {
            AnyModel::Chain(m) => m.predict_with(x, &self.inference).expect("checked inference settings"),
            // members keep their own settings unless a search method is requested
            AnyModel::Dynamic(m) if self.inference.method != InferenceMethod::Greedy => {
                let models: Vec<_> = m.models.iter().map(|(c, _)| (c.clone(), self.inference)).collect();
                search::dynamic_predict(&models, x).expect("checked inference settings")
            }
            other => other.predict(x),
        }
    }
}

struct Built {
    model: AnyModel,
    classifiers_trained: usize,
    structure: Option<ChainStructure>,
    trials: Vec<TrialSet>,
}

fn search_config(c: &RunConfig, seed: u64, initial_order: Option<Vec<usize>>) -> SearchConfig {
    SearchConfig { steps: c.steps, folds: c.folds, metric: c.metric, seed, initial_order, ..SearchConfig::default() }
}

fn build(d: &Dataset, c: &RunConfig) -> Result<Built> {
    let lc = c.learner();
    let l = d.n_labels();
    let mut trials = Vec::new();
    let single = |s: ChainStructure, extra: usize, trials: Vec<TrialSet>| -> Result<Built> {
        let m = chain::train(d, &s, &lc, c.propagation)?;
        Ok(Built { model: AnyModel::Chain(m), classifiers_trained: extra + l, structure: Some(s), trials })
    };
    let order = || c.order.clone().unwrap_or_else(|| (0..l).collect());
    if let Some(o) = &c.order {
        if o.len() != l {
            return Err(usage(format!("order has {} labels but the data has {l}", o.len())).into());
        }
    }
    Ok(match c.method {
        Method::Br => single(ChainStructure::empty(l), 0, trials)?,
        Method::Cc => match c.structure {
            StructureSource::Order => single(ChainStructure::full_cascade(&order())?, 0, trials)?,
            StructureSource::Random => single(search::random_orders(l, 1, c.seed).remove(0), 0, trials)?,
            StructureSource::MarginalDep => single(search::marginal_dependence_structure(d, 0)?.structure, 0, trials)?,
            StructureSource::CondDep => {
                let t = search::conditional_dependence_structure(d, &lc, 0)?;
                single(t.structure, t.classifiers_fitted, trials)?
            }
            StructureSource::Accuracy => single(search::accuracy_ordering(d, &lc, c.folds)?, c.folds * l, trials)?,
            StructureSource::Search => {
                let ts = search::order_search(d, &lc, &search_config(c, c.seed, None))?;
                let cost = ts.classifiers_trained;
                let s = ts.best_structure();
                trials.push(ts);
                single(s, cost, trials)?
            }
        },
        Method::Ecc => {
            let opts = EnsembleOptions {
                edge_keep: c.edge_keep,
                mixed_learners: c.mixed_learners,
                ..EnsembleOptions::new(c.ensemble_size, c.seed)
            };
            let em = relatives::ecc_train_with(d, &lc, &opts)?;
            Built { model: AnyModel::Ensemble(em), classifiers_trained: c.ensemble_size * l, structure: None, trials }
        }
        Method::Cdn => {
            let g = GibbsConfig { burn_in: c.burn_in, samples: c.samples, seed: c.seed, decode: c.decode };
            let dn = relatives::cdn_train(d, &lc, g)?;
            Built { model: AnyModel::DependencyNetwork(dn), classifiers_trained: 2 * l, structure: None, trials }
        }
        Method::Stacked => {
            let m = relatives::stacked_br_train(d, &lc, c.include_input)?;
            Built { model: AnyModel::Stacked(m), classifiers_trained: 2 * l, structure: None, trials }
        }
        Method::TwoPass => {
            let m = relatives::two_pass_train(d, &order(), &lc, Default::default())?;
            let s = m.first_pass().structure().clone();
            Built { model: AnyModel::TwoPass(m), classifiers_trained: 2 * l, structure: Some(s), trials }
        }
        Method::Lp => {
            let m = relatives::lp_train(d, &lc, c.vocab_cap)?;
            let n = m.vocabulary().len();
            Built { model: AnyModel::LabelPowerset(m), classifiers_trained: n, structure: None, trials }
        }
        Method::Dynamic => {
            let starts = search::random_orders(l, c.ensemble_size, c.seed);
            let mut models = Vec::with_capacity(starts.len());
            let mut cost = 0;
            for (i, start) in starts.iter().enumerate() {
                let mut member_lc = lc.clone();
                if c.mixed_learners && (c.seed.wrapping_add(i as u64) % 2 == 1) {
                    member_lc.kind = LearnerKind::DecisionTree;
                }
                let sc = search_config(c, c.seed.wrapping_add(i as u64), Some(start.order().to_vec()));
                let ts = search::order_search(d, &member_lc, &sc)?;
                cost += ts.classifiers_trained + l;
                let chain: ChainModel = chain::train(d, &ts.best_structure(), &member_lc, c.propagation)?;
                models.push((chain, c.inference.clone()));
                trials.push(ts);
            }
            Built { model: AnyModel::Dynamic(DynamicEnsemble { models }), classifiers_trained: cost, structure: None, trials }
        }
    })
}

fn trials_csv(ts: &TrialSet) -> Vec<u8> {
    let mut buf = Vec::new();
    ts.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn config_json(c: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("preset".into(), c.preset.clone().map_or(Value::Null, Value::String));
    m.insert("method".into(), json!(c.method.as_str()));
    m.insert("structure".into(), json!(c.structure.as_str()));
    m.insert("inference".into(), inference_json(&c.inference));
    let learner = if c.mixed_learners {
        "mixed"
    } else {
        match c.learner.kind {
            LearnerKind::Logistic => "logistic",
            LearnerKind::DecisionTree => "tree",
        }
    };
    m.insert("learner".into(), json!(learner));
    m.insert("seed".into(), json!(c.seed));
    m
}

fn train_like(args: &TrainArgs, c: RunConfig, command: &str) -> Result<()> {
    c.check()?;
    let d = load(&args.data)?;
    let t0 = Instant::now();
    let built = build(&d, &c)?;
    let train_ms = t0.elapsed().as_secs_f64() * 1e3;
    let applied = Applied { model: &built.model, inference: c.inference.clone() };
    applied.check()?;
    let t1 = Instant::now();
    let report = eval::evaluate(&applied, &d)?;
    let predict_ms = t1.elapsed().as_secs_f64() * 1e3;

    write_atomic(&args.out.join("model.txt"), built.model.to_text().as_bytes())?;
    if let Some(s) = &built.structure {
        write_atomic(&args.out.join("structure.txt"), s.to_text().as_bytes())?;
    }
    match built.trials.len() {
        0 => {}
        1 => write_atomic(&args.out.join("trials.csv"), &trials_csv(&built.trials[0]))?,
        _ => {
            for (i, ts) in built.trials.iter().enumerate() {
                write_atomic(&args.out.join(format!("trials_{}.csv", i + 1)), &trials_csv(ts))?;
            }
        }
    }
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.extend(config_json(&c));
    m.insert("n_rows".into(), json!(d.n_rows()));
    m.insert("n_features".into(), json!(d.n_features()));
    m.insert("n_labels".into(), json!(d.n_labels()));
    m.insert("classifiers_trained".into(), json!(built.classifiers_trained));
    m.insert("train_metrics".into(), report_json(&report));
    if let Some(best) = built.trials.iter().map(|t| t.best_trial()).max_by(|a, b| a.score.total_cmp(&b.score)) {
        m.insert("search_best_score".into(), json!(best.score));
    }
    if args.record_timings {
        m.insert("timings_ms".into(), json!({ "train": train_ms, "predict": predict_ms }));
    }
    write_json(&args.out.join("metrics.json"), &Value::Object(m))
}

pub fn train(args: &TrainArgs, c: RunConfig) -> Result<()> {
    train_like(args, c, "train")
}

pub fn search(args: &TrainArgs, mut c: RunConfig) -> Result<()> {
    if c.method != Method::Dynamic {
        if c.method != Method::Cc {
            return Err(usage(format!("search builds a single chain; method {} is not searchable", c.method.as_str())).into());
        }
        c.structure = StructureSource::Search;
    }
    train_like(args, c, "search")
}

/// Reads feature rows; trailing label columns, if present, are dropped.
fn read_features(path: &Path, header: bool, n_features: usize, n_labels: usize) -> Result<Vec<Vec<f64>>> {
    let fail = |row: usize, m: String| CliError::Runtime(format!("{}: row {row}: {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fail(i + 1, e.to_string()))?;
        if rec.len() != n_features && rec.len() != n_features + n_labels {
            return Err(fail(
                i + 1,
                format!("expected {n_features} feature columns (optionally plus {n_labels} labels), found {}", rec.len()),
            ));
        }
        let row = rec
            .iter()
            .take(n_features)
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| fail(i + 1, format!("{f:?} is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn load_model(path: &Path) -> Result<AnyModel> {
    AnyModel::load(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let applied = Applied { model: &model, inference: args.inference.resolve()? };
    applied.check()?;
    let l = model.n_labels();
    let rows = read_features(&args.data, args.header, model.n_features(), l)?;
    let mut out = String::new();
    let mut head: Vec<String> = (1..=l).map(|j| format!("y{j}")).collect();
    head.push("payoff".into());
    let _ = writeln!(out, "{}", head.join(","));
    for x in &rows {
        let p = applied.predict(x);
        let labels: Vec<String> = p.labels().iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{},{:?}", labels.join(","), p.joint_payoff());
    }
    write_atomic(&args.out.join("predictions.csv"), out.as_bytes())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let d = load(&args.data)?;
    if d.n_labels() != model.n_labels() || d.n_features() != model.n_features() {
        return Err(usage(format!(
            "data has {} features and {} labels; the model expects {} and {}",
            d.n_features(),
            d.n_labels(),
            model.n_features(),
            model.n_labels()
        ))
        .into());
    }
    let applied = Applied { model: &model, inference: args.inference.resolve()? };
    applied.check()?;
    let report = eval::evaluate(&applied, &d)?;
    let mean_log_payoff = (0..d.n_rows()).map(|i| applied.predict(d.x(i)).log_payoff()).sum::<f64>() / d.n_rows() as f64;
    let v = json!({
        "command": "evaluate",
        "model": model.method_tag(),
        "inference": inference_json(&applied.inference),
        "metrics": report_json(&report),
        "mean_log_payoff": mean_log_payoff,
    });
    write_json(&args.out.join("metrics.json"), &v)
}

pub fn sweep(args: &TrainArgs, c: RunConfig) -> Result<()> {
    c.check()?;
    let d = load(&args.data)?;
    let (train, test) = data::split(&d, c.test_fraction, c.seed)?;
    let orders = search::lexicographic_orders(d.n_labels(), c.sweep_orders.max(1));
    let rows = eval::order_sweep(&train, &test, &c.learner(), &orders, true, true, c.metric)?;
    let mut buf = Vec::new();
    eval::write_sweep_csv(&rows, &mut buf)?;
    write_atomic(&args.out.join("sweep.csv"), &buf)
}

pub fn bench(args: &TrainArgs, c: RunConfig) -> Result<()> {
    c.check()?;
    if !matches!(c.method, Method::Cc | Method::Br) {
        return Err(usage("bench compares inference on a single chain; use method cc or br").into());
    }
    let d = load(&args.data)?;
    let (train, test) = data::split(&d, c.test_fraction, c.seed)?;
    let built = build(&train, &c)?;
    let l = d.n_labels();
    let mut methods = vec![InferenceConfig::greedy(), InferenceConfig::beam(2), InferenceConfig::beam(c.inference.beam_width)];
    methods.push(InferenceConfig::epsilon(c.inference.epsilon));
    if l <= 16 {
        methods.push(InferenceConfig::exhaustive());
    }
    methods.dedup();
    let mut out = String::from("inference,exact_match,hamming_loss,jaccard,mean_log_payoff");
    out.push_str(if args.record_timings { ",ms\n" } else { "\n" });
    for cfg in methods {
        let applied = Applied { model: &built.model, inference: cfg.clone() };
        let t = Instant::now();
        let preds: Vec<Prediction> = (0..test.n_rows()).map(|i| applied.predict(test.x(i))).collect();
        let ms = t.elapsed().as_secs_f64() * 1e3;
        let flat: Vec<u8> = preds.iter().flat_map(|p| p.labels().iter().copied()).collect();
        let r = MetricReport::compute(test.labels(), &flat, l)?;
        let mlp = preds.iter().map(|p| p.log_payoff()).sum::<f64>() / preds.len() as f64;
        let name = match cfg.method {
            InferenceMethod::Beam => format!("beam{}", cfg.beam_width),
            InferenceMethod::Epsilon => format!("epsilon{}", cfg.epsilon),
            m => m.as_str().to_string(),
        };
        let _ = write!(out, "{name},{:?},{:?},{:?},{:?}", r.exact_match, r.hamming_loss, r.jaccard, mlp);
        if args.record_timings {
            let _ = write!(out, ",{ms:.3}");
        }
        out.push('\n');
    }
    write_atomic(&args.out.join("bench.csv"), out.as_bytes())
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let d = match args.kind.as_str() {
        "xor" => synth::xor_toy(args.rows, args.sigma, args.seed),
        "planted" => synth::planted_dependence(args.rows, args.sigma, 0.05, args.seed),
        "cascade" => synth::random_cascade(args.rows, args.features, args.labels, args.seed),
        "independent" => synth::independent_labels(args.rows, args.features, args.labels, args.seed),
        other => return Err(usage(format!("unknown dataset kind {other:?} (xor, planted, cascade, independent)")).into()),
    };
    let mut buf = Vec::new();
    d.write_csv(&mut buf, true)?;
    write_atomic(&args.out, &buf)
}
