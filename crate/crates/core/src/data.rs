//! Dense multi-label datasets.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config, contract, Error, Result};

/// Row-major dense matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(contract(format!(
                "matrix data has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(contract(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// An N x D feature matrix paired with an N x L binary label matrix.
///
/// Immutable once built; every label entry is 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<u8>,
    n_labels: usize,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<u8>, n_labels: usize) -> Result<Self> {
        let names = (1..=n_labels).map(|j| format!("y{j}")).collect();
        Self::with_names(features, labels, n_labels, names)
    }

    pub fn with_names(
        features: Matrix,
        labels: Vec<u8>,
        n_labels: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(contract("dataset needs at least one row"));
        }
        if features.cols() == 0 {
            return Err(contract("dataset needs at least one feature column"));
        }
        if n_labels == 0 {
            return Err(contract("dataset needs at least one label"));
        }
        if labels.len() != features.rows() * n_labels {
            return Err(contract(format!(
                "label matrix has {} entries, expected {}x{}",
                labels.len(),
                features.rows(),
                n_labels
            )));
        }
        if let Some(pos) = labels.iter().position(|&v| v > 1) {
            return Err(Error::Domain {
                row: pos / n_labels + 1,
                message: format!("label value {} is not binary", labels[pos]),
            });
        }
        if label_names.len() != n_labels {
            return Err(contract("label name count does not match label count"));
        }
        Ok(Self { features, labels, n_labels, label_names })
    }

    /// Builds a dataset from per-row features and per-row label vectors.
    pub fn from_rows(features: &[Vec<f64>], labels: &[Vec<u8>]) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(contract("feature and label row counts differ"));
        }
        let l = labels.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(labels.len() * l);
        for (i, r) in labels.iter().enumerate() {
            if r.len() != l {
                return Err(contract(format!("label row {i} has {} entries, expected {l}", r.len())));
            }
            flat.extend_from_slice(r);
        }
        Self::new(Matrix::from_rows(features)?, flat, l)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    #[inline]
    pub fn y(&self, i: usize) -> &[u8] {
        &self.labels[i * self.n_labels..(i + 1) * self.n_labels]
    }

    #[inline]
    pub fn label(&self, i: usize, j: usize) -> u8 {
        self.labels[i * self.n_labels + j]
    }

    /// Flat row-major N x L label matrix.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_column(&self, j: usize) -> Vec<u8> {
        (0..self.n_rows()).map(|i| self.label(i, j)).collect()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Number of positive entries per label column.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_labels];
        for row in self.labels.chunks_exact(self.n_labels) {
            for (c, &v) in counts.iter_mut().zip(row) {
                *c += v as usize;
            }
        }
        counts
    }

    /// Mean number of positive labels per row.
    pub fn label_cardinality(&self) -> f64 {
        self.labels.iter().map(|&v| v as f64).sum::<f64>() / self.n_rows() as f64
    }

    /// Rows selected by `indices`, in that order. Duplicates are allowed
    /// (bootstrap resampling).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        assert!(!indices.is_empty(), "subset must select at least one row");
        let d = self.n_features();
        let mut feats = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len() * self.n_labels);
        for &i in indices {
            feats.extend_from_slice(self.x(i));
            labels.extend_from_slice(self.y(i));
        }
        Dataset {
            features: Matrix { rows: indices.len(), cols: d, data: feats },
            labels,
            n_labels: self.n_labels,
            label_names: self.label_names.clone(),
        }
    }

    pub fn load_csv(path: impl AsRef<Path>, label_count: usize, has_header: bool) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, label_count, has_header)
    }

    /// Parses comma-separated rows whose trailing `label_count` columns are
    /// the binary labels. Row indices in errors are 1-based data rows.
    pub fn read_csv<R: Read>(reader: R, label_count: usize, has_header: bool) -> Result<Self> {
        if label_count == 0 {
            return Err(config("label count must be positive"));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut names: Option<Vec<String>> = None;
        if has_header {
            let header = rdr.headers().map_err(|e| Error::Parse { row: 0, message: e.to_string() })?;
            names = Some(header.iter().map(str::to_owned).collect());
        }

        let mut width: Option<usize> = names.as_ref().map(Vec::len);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        let mut n = 0usize;
        for (idx, rec) in rdr.records().enumerate() {
            let row = idx + 1;
            let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            let w = *width.get_or_insert(rec.len());
            if rec.len() != w {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {w} columns, found {}", rec.len()),
                });
            }
            if label_count >= w {
                return Err(config(format!(
                    "label count {label_count} leaves no feature columns in a {w}-column file"
                )));
            }
            let d = w - label_count;
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    message: format!("column {} value {field:?} is not a number", c + 1),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        message: format!("column {} value {field:?} is not finite", c + 1),
                    });
                }
                if c < d {
                    feats.push(v);
                } else if v == 0.0 || v == 1.0 {
                    labels.push(v as u8);
                } else {
                    return Err(Error::Domain {
                        row,
                        message: format!("label column {} value {field:?} is not 0 or 1", c - d + 1),
                    });
                }
            }
            n += 1;
        }
        let w = match width {
            Some(w) if n > 0 => w,
            _ => return Err(Error::Parse { row: 1, message: "no data rows".into() }),
        };
        if label_count >= w {
            return Err(config(format!(
                "label count {label_count} leaves no feature columns in a {w}-column file"
            )));
        }
        let d = w - label_count;
        let label_names = match names {
            Some(h) => h[d..].to_vec(),
            None => (1..=label_count).map(|j| format!("y{j}")).collect(),
        };
        Self::with_names(Matrix { rows: n, cols: d, data: feats }, labels, label_count, label_names)
    }

    /// Writes the dataset in the format [`Dataset::read_csv`] accepts.
    /// Reals use the shortest representation that parses back exactly.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> Result<()> {
        if header {
            let mut cols: Vec<String> = (1..=self.n_features()).map(|c| format!("x{c}")).collect();
            cols.extend(self.label_names.iter().cloned());
            writeln!(w, "{}", cols.join(","))?;
        }
        for i in 0..self.n_rows() {
            let mut line = String::new();
            for v in self.x(i) {
                line.push_str(&format!("{v:?},"));
            }
            let ys: Vec<String> = self.y(i).iter().map(u8::to_string).collect();
            line.push_str(&ys.join(","));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, header)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Shuffles row indices under `seed` and cuts off `round(N * test_fraction)`
/// rows as the test part. Returns `(train, test)`.
pub fn split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = split_indices(d.n_rows(), test_fraction, seed)?;
    Ok((d.subset(&train_idx), d.subset(&test_idx)))
}

pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(config(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(config(format!(
            "test fraction {test_fraction} on {n} rows leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}
