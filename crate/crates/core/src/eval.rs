//! Multi-label metrics, cross-validated payoff and the order sweep harness.
//!
//! Label matrices are flat row-major `N x L` slices of 0/1 values.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::{self, ChainModel, Propagation};
use crate::data::Dataset;
use crate::error::{config, contract, Error, Result};
use crate::learners::LearnerConfig;
use crate::parallel::map_indexed;
use crate::relatives::EnsembleModel;
use crate::structure::ChainStructure;
use crate::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    ExactMatch,
    /// `1 - hamming_loss`, so that larger is better like the others.
    HammingAccuracy,
    Jaccard,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ExactMatch => "exact_match",
            Metric::HammingAccuracy => "hamming_accuracy",
            Metric::Jaccard => "jaccard",
        }
    }

    pub fn score(self, truth: &[u8], pred: &[u8], n_labels: usize) -> Result<f64> {
        match self {
            Metric::ExactMatch => exact_match(truth, pred, n_labels),
            Metric::HammingAccuracy => hamming_loss(truth, pred, n_labels).map(|h| 1.0 - h),
            Metric::Jaccard => jaccard(truth, pred, n_labels),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_match" | "exact-match" => Ok(Metric::ExactMatch),
            "hamming_accuracy" | "hamming-accuracy" | "hamming" => Ok(Metric::HammingAccuracy),
            "jaccard" => Ok(Metric::Jaccard),
            other => Err(config(format!("unknown metric {other:?}"))),
        }
    }
}

fn check_shapes(truth: &[u8], pred: &[u8], n_labels: usize) -> Result<usize> {
    if n_labels == 0 || truth.len() != pred.len() || truth.len() % n_labels != 0 || truth.is_empty() {
        return Err(contract(format!(
            "label matrices of {} and {} entries do not share an N x {n_labels} shape",
            truth.len(),
            pred.len()
        )));
    }
    Ok(truth.len() / n_labels)
}

/// Fraction of label entries predicted wrongly.
pub fn hamming_loss(truth: &[u8], pred: &[u8], n_labels: usize) -> Result<f64> {
    check_shapes(truth, pred, n_labels)?;
    let wrong = truth.iter().zip(pred).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Fraction of rows predicted entirely correctly.
pub fn exact_match(truth: &[u8], pred: &[u8], n_labels: usize) -> Result<f64> {
    let n = check_shapes(truth, pred, n_labels)?;
    let hits = truth.chunks_exact(n_labels).zip(pred.chunks_exact(n_labels)).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / n as f64)
}

/// Mean per-row intersection over union; a row where both sides are empty
/// scores 1.
pub fn jaccard(truth: &[u8], pred: &[u8], n_labels: usize) -> Result<f64> {
    let n = check_shapes(truth, pred, n_labels)?;
    let total: f64 = truth
        .chunks_exact(n_labels)
        .zip(pred.chunks_exact(n_labels))
        .map(|(a, b)| {
            let inter = a.iter().zip(b).filter(|(&p, &q)| p == 1 && q == 1).count();
            let union = a.iter().zip(b).filter(|(&p, &q)| p == 1 || q == 1).count();
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub hamming_loss: f64,
    pub exact_match: f64,
    pub jaccard: f64,
    pub per_label_accuracy: Vec<f64>,
    pub n_test: usize,
}

impl MetricReport {
    pub fn compute(truth: &[u8], pred: &[u8], n_labels: usize) -> Result<Self> {
        let n = check_shapes(truth, pred, n_labels)?;
        let mut per_label = vec![0.0; n_labels];
        for (a, b) in truth.chunks_exact(n_labels).zip(pred.chunks_exact(n_labels)) {
            for j in 0..n_labels {
                if a[j] == b[j] {
                    per_label[j] += 1.0;
                }
            }
        }
        for v in &mut per_label {
            *v /= n as f64;
        }
        Ok(Self {
            hamming_loss: hamming_loss(truth, pred, n_labels)?,
            exact_match: exact_match(truth, pred, n_labels)?,
            jaccard: jaccard(truth, pred, n_labels)?,
            per_label_accuracy: per_label,
            n_test: n,
        })
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::ExactMatch => self.exact_match,
            Metric::HammingAccuracy => 1.0 - self.hamming_loss,
            Metric::Jaccard => self.jaccard,
        }
    }
}

/// Flat `N x L` predictions of `model` on every row of `d`.
pub fn predict_all<P: Predictor + ?Sized>(model: &P, d: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(d.n_rows() * d.n_labels());
    for i in 0..d.n_rows() {
        out.extend_from_slice(model.predict(d.x(i)).labels());
    }
    out
}

pub fn evaluate<P: Predictor + ?Sized>(model: &P, d: &Dataset) -> Result<MetricReport> {
    if model.n_labels() != d.n_labels() {
        return Err(contract("model and dataset label counts differ"));
    }
    MetricReport::compute(d.labels(), &predict_all(model, d), d.n_labels())
}

/// Test-index sets of a seeded `k`-fold partition of `0..n`. Fold sizes
/// differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(config("cross-validation needs at least 2 folds"));
    }
    if k > n {
        return Err(config(format!("{k} folds requested for {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let (base, extra) = (n / k, n % k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = idx[at..at + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        at += size;
    }
    Ok(folds)
}

/// Train/test row splits for each fold, in fold order.
pub fn kfold_splits(d: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let folds = kfold_indices(d.n_rows(), k, seed)?;
    Ok(folds
        .iter()
        .map(|test| {
            let mut in_test = vec![false; d.n_rows()];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..d.n_rows()).filter(|&i| !in_test[i]).collect();
            (d.subset(&train), d.subset(test))
        })
        .collect())
}

/// Mean held-out score of models built by `builder` on each training part of
/// a seeded `k`-fold partition.
pub fn cv_payoff<P, F>(d: &Dataset, builder: F, k: usize, metric: Metric, seed: u64) -> Result<f64>
where
    P: Predictor,
    F: Fn(&Dataset) -> Result<P> + Sync + Send,
{
    let splits = kfold_splits(d, k, seed)?;
    let scores = map_indexed(splits.len(), |f| {
        let (train, test) = &splits[f];
        let model = builder(train)?;
        metric.score(test.labels(), &predict_all(&model, test), d.n_labels())
    });
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepEntry {
    Order(Vec<usize>),
    BinaryRelevance,
    Ensemble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub entry: SweepEntry,
    pub score: f64,
}

/// Trains one full-cascade chain per order and scores each on `test`.
/// Optional extra rows: binary relevance, and a vote over all the listed
/// chains.
pub fn order_sweep(
    train: &Dataset,
    test: &Dataset,
    lc: &LearnerConfig,
    orders: &[Vec<usize>],
    include_br: bool,
    include_ensemble: bool,
    metric: Metric,
) -> Result<Vec<SweepRow>> {
    if orders.is_empty() {
        return Err(config("order sweep needs at least one order"));
    }
    let models = map_indexed(orders.len(), |i| {
        let s = ChainStructure::full_cascade(&orders[i])?;
        chain::train(train, &s, lc, Propagation::Hard)
    })
    .into_iter()
    .collect::<Result<Vec<ChainModel>>>()?;
    let scores = map_indexed(models.len(), |i| {
        metric.score(test.labels(), &predict_all(&models[i], test), test.n_labels())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let mut rows: Vec<SweepRow> = orders
        .iter()
        .zip(scores)
        .map(|(o, score)| SweepRow { entry: SweepEntry::Order(o.clone()), score })
        .collect();
    if include_br {
        let br = chain::train(train, &ChainStructure::empty(train.n_labels()), lc, Propagation::Hard)?;
        let score = metric.score(test.labels(), &predict_all(&br, test), test.n_labels())?;
        rows.push(SweepRow { entry: SweepEntry::BinaryRelevance, score });
    }
    if include_ensemble {
        let ens = EnsembleModel::from_members(models)?;
        let score = metric.score(test.labels(), &predict_all(&ens, test), test.n_labels())?;
        rows.push(SweepRow { entry: SweepEntry::Ensemble, score });
    }
    Ok(rows)
}

/// Writes `order,score` rows; orders are space-separated 1-based
/// permutations, the extra rows are labelled `br` and `ensemble`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "order,score")?;
    for r in rows {
        let name = match &r.entry {
            SweepEntry::Order(o) => o.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(" "),
            SweepEntry::BinaryRelevance => "br".to_string(),
            SweepEntry::Ensemble => "ensemble".to_string(),
        };
        writeln!(w, "{name},{:?}", r.score)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn perfect_prediction() {
        let y = [0, 1, 1, 0, 1, 0, 0, 0];
        assert_eq!(hamming_loss(&y, &y, 4).unwrap(), 0.0);
        assert_eq!(exact_match(&y, &y, 4).unwrap(), 1.0);
        assert_eq!(jaccard(&y, &y, 4).unwrap(), 1.0);
    }

    #[test]
    fn single_row_arithmetic() {
        let (y, p) = ([0, 1, 1, 0], [0, 1, 0, 0]);
        assert_eq!(hamming_loss(&y, &p, 4).unwrap(), 0.25);
        assert_eq!(exact_match(&y, &p, 4).unwrap(), 0.0);
        assert_eq!(jaccard(&y, &p, 4).unwrap(), 0.5);
    }

    #[test]
    fn empty_rows_score_one() {
        assert_eq!(jaccard(&[0, 0], &[0, 0], 2).unwrap(), 1.0);
        assert_eq!(jaccard(&[0, 0], &[0, 1], 2).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(hamming_loss(&[0, 1], &[0], 1), Err(Error::Contract(_))));
        assert!(matches!(exact_match(&[0, 1, 1], &[0, 1, 1], 2), Err(Error::Contract(_))));
    }

    #[test]
    fn fair_coins_match_one_in_sixteen() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000 * 4;
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let p: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        assert!((exact_match(&y, &p, 4).unwrap() - 1.0 / 16.0).abs() < 0.01);
    }

    #[test]
    fn folds_partition_rows() {
        let folds = kfold_indices(23, 4, 5).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![6, 6, 6, 5]);
        let loo = kfold_indices(5, 5, 0).unwrap();
        assert!(loo.iter().all(|f| f.len() == 1));
        assert!(matches!(kfold_indices(4, 5, 0), Err(Error::Config(_))));
        assert!(matches!(kfold_indices(4, 1, 0), Err(Error::Config(_))));
    }

    struct Constant(Vec<u8>);

    impl Predictor for Constant {
        fn n_labels(&self) -> usize {
            self.0.len()
        }
        fn predict(&self, _: &[f64]) -> crate::Prediction {
            crate::Prediction::from_marginals(self.0.clone(), self.0.iter().map(|&v| v as f64 * 0.5 + 0.25).collect())
        }
    }

    fn modal_labelset(d: &Dataset) -> Vec<u8> {
        let mut counts: std::collections::BTreeMap<Vec<u8>, usize> = Default::default();
        for i in 0..d.n_rows() {
            *counts.entry(d.y(i).to_vec()).or_default() += 1;
        }
        let max = *counts.values().max().unwrap();
        counts.into_iter().find(|(_, c)| *c == max).unwrap().0
    }

    #[test]
    fn cv_payoff_of_majority_labelset_matches_counting() {
        let d = crate::synth::random_cascade(37, 2, 3, 8);
        let k = 4;
        let seed = 21;
        let got = cv_payoff(&d, |train| Ok(Constant(modal_labelset(train))), k, Metric::ExactMatch, seed).unwrap();
        // counting oracle over the same folds
        let folds = kfold_indices(d.n_rows(), k, seed).unwrap();
        let mut total = 0.0;
        for test in &folds {
            let train: Vec<usize> = (0..d.n_rows()).filter(|i| !test.contains(i)).collect();
            let mode = modal_labelset(&d.subset(&train));
            let hits = test.iter().filter(|&&i| d.y(i) == mode.as_slice()).count();
            total += hits as f64 / test.len() as f64;
        }
        assert!((got - total / k as f64).abs() < 1e-15);
        let again = cv_payoff(&d, |train| Ok(Constant(modal_labelset(train))), k, Metric::ExactMatch, seed).unwrap();
        assert_eq!(got, again);
    }

    #[test]
    fn single_order_sweep_is_direct_evaluation() {
        let d = crate::synth::xor_toy(20, 0.05, 2);
        let t = crate::synth::xor_toy(10, 0.05, 3);
        let lc = LearnerConfig::default();
        let rows = order_sweep(&d, &t, &lc, &[vec![1, 0, 2]], false, false, Metric::Jaccard).unwrap();
        assert_eq!(rows.len(), 1);
        let m = chain::train(&d, &ChainStructure::full_cascade(&[1, 0, 2]).unwrap(), &lc, Propagation::Hard).unwrap();
        assert_eq!(rows[0].score, evaluate(&m, &t).unwrap().jaccard);
        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("order,score\n2 1 3,"));
    }

    proptest! {
        #[test]
        fn metrics_bounded_and_permutation_invariant(
            rows in proptest::collection::vec((proptest::collection::vec(0u8..2, 5), proptest::collection::vec(0u8..2, 5)), 1..20),
            perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let y: Vec<u8> = rows.iter().flat_map(|r| r.0.clone()).collect();
            let p: Vec<u8> = rows.iter().flat_map(|r| r.1.clone()).collect();
            let permute = |m: &[u8]| -> Vec<u8> {
                m.chunks_exact(5).flat_map(|r| perm.iter().map(|&j| r[j]).collect::<Vec<_>>()).collect()
            };
            let a = MetricReport::compute(&y, &p, 5).unwrap();
            let b = MetricReport::compute(&permute(&y), &permute(&p), 5).unwrap();
            for v in [a.hamming_loss, a.exact_match, a.jaccard] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(a.hamming_loss, b.hamming_loss);
            prop_assert_eq!(a.exact_match, b.exact_match);
            prop_assert_eq!(a.jaccard, b.jaccard);
            prop_assert_eq!(hamming_loss(&y, &y, 5).unwrap(), 0.0);
            prop_assert_eq!(jaccard(&y, &y, 5).unwrap(), 1.0);
        }
    }
}
