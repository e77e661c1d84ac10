//! Labeled datasets in the UCI "sonar.all-data" layout, plus seeded fold
//! and holdout plans.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::rng;
use crate::scalar::Real;

pub const SONAR_FEATURES: usize = 60;

const FOLD_STREAM: u64 = 0x6b66_6f6c_64;
const HOLDOUT_STREAM: u64 = 0x686f_6c64;

/// Rows of `x` are samples; labels are `+1` (mine) or `−1` (rock).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T: Real> {
    pub x: RMatrix<T>,
    pub labels: Vec<i8>,
    pub names: Option<Vec<String>>,
}

impl<T: Real> LabeledDataset<T> {
    pub fn new(x: RMatrix<T>, labels: Vec<i8>) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset labels",
                expected: x.nrows(),
                found: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::invalid("label", format!("{bad} is not ±1")));
        }
        Ok(Self {
            x,
            labels,
            names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.x.ncols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            names: self
                .names
                .as_ref()
                .map(|n| idx.iter().map(|&i| n[i].clone()).collect()),
        }
    }

    /// Same labels, different feature matrix (e.g. after reduction).
    pub fn with_features(&self, x: RMatrix<T>) -> Result<Self> {
        let mut out = Self::new(x, self.labels.clone())?;
        out.names = self.names.clone();
        Ok(out)
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (pos, self.labels.len() - pos)
    }

    /// Serializes in the sonar layout: features, then `M` for +1 or `R` for −1.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (row, &label) in self.x.rows().into_iter().zip(&self.labels) {
            for v in row {
                let _ = write!(out, "{v},");
            }
            out.push(if label == 1 { 'M' } else { 'R' });
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

pub fn load_sonar<T: Real>(path: impl AsRef<Path>) -> Result<LabeledDataset<T>> {
    let text = fs::read_to_string(path)?;
    parse_sonar(&text)
}

/// Parses the comma-separated sonar layout. Any number of feature columns is
/// accepted as long as every row agrees; the UCI file has 60.
pub fn parse_sonar<T: Real>(text: &str) -> Result<LabeledDataset<T>> {
    let mut values: Vec<T> = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected features and a label, found {} field(s)",
                    fields.len()
                ),
            });
        }
        let nfeat = fields.len() - 1;
        match width {
            None => width = Some(nfeat),
            Some(w) if w != nfeat => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", w + 1, fields.len()),
                })
            }
            _ => {}
        }
        for (col, f) in fields[..nfeat].iter().enumerate() {
            let v: T = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("feature {} is not numeric: {f:?}", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("feature {} is not finite", col + 1),
                });
            }
            values.push(v);
        }
        let label = match fields[nfeat] {
            "M" => 1,
            "R" => -1,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown label {other:?} (expected M or R)"),
                })
            }
        };
        labels.push(label);
    }
    let Some(width) = width else {
        return Err(Error::Parse {
            line: 0,
            message: "empty file".into(),
        });
    };
    let x = RMatrix::from_shape_vec((labels.len(), width), values)
        .map_err(|e| Error::invalid("dataset", e.to_string()))?;
    LabeledDataset::new(x, labels)
}

/// Assignment of sample indices to `k` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub assignments: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Unstratified shuffled partition of `0..n` into `k` folds.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::invalid("k", format!("need 2 <= k <= {n}, got {k}")));
    }
    let perm = rng::permutation(n, seed, FOLD_STREAM);
    let mut assignments = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        assignments,
        k,
        seed,
    })
}

pub fn kfold_split<T: Real>(ds: &LabeledDataset<T>, k: usize, seed: u64) -> Result<FoldPlan> {
    kfold_indices(ds.len(), k, seed)
}

/// `(train, test)` index sets, both sorted.
pub fn holdout_indices(n: usize, test_count: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if test_count == 0 || test_count >= n {
        return Err(Error::invalid(
            "test_count",
            format!("need 0 < test_count < {n}, got {test_count}"),
        ));
    }
    let perm = rng::permutation(n, seed, HOLDOUT_STREAM);
    let mut test = perm[..test_count].to_vec();
    let mut train = perm[test_count..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn holdout_split<T: Real>(
    ds: &LabeledDataset<T>,
    test_count: usize,
    seed: u64,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    let (train, test) = holdout_indices(ds.len(), test_count, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}
