//! Least-squares SVM with a linear kernel, solved exactly at the matrix
//! level, plus the cross-validation and reduced-dimension experiments.

use std::fmt::Write as _;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{holdout_indices, kfold_indices, FoldPlan, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::pca::{fit_pca, project};
use crate::qrdr::run_qrdr;
use crate::scalar::Real;

pub const DEFAULT_GAMMA_GRID: [f64; 6] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
pub const INNER_FOLDS: usize = 5;

/// Gram matrix `K_jk = x_j · x_k` of the rows of `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix<T: Real> {
    pub k: RMatrix<T>,
}

impl<T: Real> KernelMatrix<T> {
    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        let h = crate::linalg::HermitianMatrix::from_real_symmetric(&self.k)?;
        let d = h.eig()?;
        Ok(d.eigenvalues[d.eigenvalues.len() - 1])
    }
}

pub fn kernel_matrix<T: Real>(x: ArrayView2<T>) -> KernelMatrix<T> {
    KernelMatrix { k: x.dot(&x.t()) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LssvmModel<T: Real> {
    pub eta0: T,
    pub eta: Array1<T>,
    pub gamma: T,
    pub support_x: RMatrix<T>,
    pub support_y: Vec<i8>,
}

/// In-place Cholesky factor (lower triangle) of a symmetric positive definite matrix.
fn cholesky<T: Real>(a: &RMatrix<T>) -> Result<RMatrix<T>> {
    let n = a.nrows();
    let mut l = RMatrix::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for p in 0..j {
            d -= l[[j, p]] * l[[j, p]];
        }
        if !(d > T::zero()) {
            return Err(Error::Singular(format!("pivot {j} is {d}")));
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve<T: Real>(l: &RMatrix<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut s = y[i];
        for p in 0..i {
            s -= l[[i, p]] * y[p];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for p in i + 1..n {
            s -= l[[p, i]] * y[p];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

fn label_vector<T: Real>(y: &[i8]) -> Array1<T> {
    y.iter().map(|&l| T::from_i8(l).expect("label")).collect()
}

/// Solves `[[0, 1ᵀ], [1, K + I/γ]] (η₀, η) = (0, y)` through the Schur
/// complement of the positive definite block `K + I/γ`.
pub fn train_lssvm<T: Real>(x: ArrayView2<T>, y: &[i8], gamma: T) -> Result<LssvmModel<T>> {
    let m = x.nrows();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "labels",
            expected: m,
            found: y.len(),
        });
    }
    if m < 2 {
        return Err(Error::invalid(
            "samples",
            "need at least two training samples",
        ));
    }
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", "must be positive and finite"));
    }
    if let Some(bad) = y.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::invalid("label", format!("{bad} is not ±1")));
    }
    let mut a = kernel_matrix(x).k;
    let reg = T::one() / gamma;
    for i in 0..m {
        a[[i, i]] += reg;
    }
    let l = cholesky(&a)?;
    let ones = Array1::<T>::from_elem(m, T::one());
    let yv = label_vector::<T>(y);
    let u = cholesky_solve(&l, ones.view());
    let v = cholesky_solve(&l, yv.view());
    let denom = u.sum();
    if !(denom.abs() > T::zero()) {
        return Err(Error::Singular("bias equation is degenerate".into()));
    }
    let eta0 = v.sum() / denom;
    let eta = &v - &u.mapv(|ui| ui * eta0);
    Ok(LssvmModel {
        eta0,
        eta,
        gamma,
        support_x: x.to_owned(),
        support_y: y.to_vec(),
    })
}

impl<T: Real> LssvmModel<T> {
    pub fn features(&self) -> usize {
        self.support_x.ncols()
    }

    /// `‖A·(η₀, η) − (0, y)‖`.
    pub fn residual(&self) -> T {
        let k = kernel_matrix(self.support_x.view()).k;
        let y = label_vector::<T>(&self.support_y);
        let first = self.eta.sum();
        let mut acc = first * first;
        let reg = T::one() / self.gamma;
        let ke = k.dot(&self.eta);
        for i in 0..self.eta.len() {
            let r = self.eta0 + ke[i] + reg * self.eta[i] - y[i];
            acc += r * r;
        }
        acc.sqrt()
    }

    pub fn decision_value(&self, x: ArrayView1<T>) -> Result<T> {
        if x.len() != self.features() {
            return Err(Error::DimensionMismatch {
                context: "query features",
                expected: self.features(),
                found: x.len(),
            });
        }
        Ok(self.support_x.dot(&x).dot(&self.eta) + self.eta0)
    }

    /// `sign(decision value)`, with zero mapped to `+1`.
    pub fn predict(&self, x: ArrayView1<T>) -> Result<i8> {
        Ok(if self.decision_value(x)? >= T::zero() {
            1
        } else {
            -1
        })
    }

    pub fn accuracy(&self, x: ArrayView2<T>, y: &[i8]) -> Result<f64> {
        if x.nrows() != y.len() || y.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "evaluation labels",
                expected: x.nrows(),
                found: y.len(),
            });
        }
        let mut hits = 0usize;
        for (row, &label) in x.rows().into_iter().zip(y) {
            if self.predict(row)? == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / y.len() as f64)
    }
}

/// Picks `γ` by inner k-fold accuracy on the training data; ties go to the
/// earlier grid entry.
pub fn select_gamma<T: Real>(
    ds: &LabeledDataset<T>,
    grid: &[f64],
    inner_folds: usize,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("gamma_grid", "empty"));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let k = inner_folds.min(ds.len());
    let plan = kfold_indices(ds.len(), k, seed)?;
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &g in grid {
        let mut hits = 0.0;
        for f in 0..k {
            let train = ds.subset(&plan.train_indices(f));
            let test = ds.subset(&plan.test_indices(f));
            let model = train_lssvm(train.x.view(), &train.labels, T::lit(g))?;
            hits += model.accuracy(test.x.view(), &test.labels)? * test.len() as f64;
        }
        let acc = hits / ds.len() as f64;
        if acc > best.0 {
            best = (acc, g);
        }
    }
    Ok(best.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub r: Option<usize>,
    pub per_fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub chosen_gammas: Vec<f64>,
    /// Folds whose training split held a single class.
    pub single_class_folds: Vec<usize>,
}

fn summarize(
    r: Option<usize>,
    accs: Vec<f64>,
    gammas: Vec<f64>,
    single: Vec<usize>,
) -> AccuracyReport {
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    AccuracyReport {
        r,
        per_fold_accuracies: accs,
        mean,
        min,
        max,
        chosen_gammas: gammas,
        single_class_folds: single,
    }
}

/// Trains on a split with `γ` chosen by inner CV; returns `(accuracy, γ, single_class)`.
fn evaluate_split<T: Real>(
    ds: &LabeledDataset<T>,
    train_idx: &[usize],
    test_idx: &[usize],
    grid: &[f64],
    seed: u64,
) -> Result<(f64, f64, bool)> {
    let train = ds.subset(train_idx);
    let test = ds.subset(test_idx);
    let (pos, neg) = train.class_counts();
    let single = pos == 0 || neg == 0;
    if single {
        log::warn!("training split holds a single class");
    }
    let gamma = select_gamma(&train, grid, INNER_FOLDS, seed)?;
    let model = train_lssvm(train.x.view(), &train.labels, T::lit(gamma))?;
    Ok((model.accuracy(test.x.view(), &test.labels)?, gamma, single))
}

pub fn cross_validate<T: Real>(
    ds: &LabeledDataset<T>,
    folds: &FoldPlan,
    gamma_grid: &[f64],
) -> Result<AccuracyReport> {
    if folds.assignments.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            context: "fold plan",
            expected: ds.len(),
            found: folds.assignments.len(),
        });
    }
    let results: Vec<Result<(f64, f64, bool)>> = (0..folds.k)
        .into_par_iter()
        .map(|f| {
            evaluate_split(
                ds,
                &folds.train_indices(f),
                &folds.test_indices(f),
                gamma_grid,
                folds.seed.wrapping_add(f as u64 + 1),
            )
        })
        .collect();
    let mut accs = Vec::new();
    let mut gammas = Vec::new();
    let mut single = Vec::new();
    for (f, r) in results.into_iter().enumerate() {
        let (a, g, s) = r?;
        accs.push(a);
        gammas.push(g);
        if s {
            single.push(f);
        }
    }
    for (f, g) in gammas.iter().enumerate() {
        log::info!("fold {f}: gamma = {g}");
    }
    Ok(summarize(None, accs, gammas, single))
}

/// How reduced features are produced from the full data matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FeatureSource {
    Raw,
    /// Classical projection onto the top `R` principal directions.
    Pca {
        r: usize,
    },
    /// Features recovered from the QRDR output state at coupling `c`.
    Qrdr {
        r: usize,
        c: f64,
    },
}

pub fn reduce_features<T: Real>(x: ArrayView2<T>, source: FeatureSource) -> Result<RMatrix<T>> {
    match source {
        FeatureSource::Raw => Ok(x.to_owned()),
        FeatureSource::Pca { r } => {
            let pca = fit_pca(x, r)?;
            Ok(project(x, &pca)?.z)
        }
        FeatureSource::Qrdr { r, c } => {
            let out = run_qrdr(x, r, T::lit(c))?;
            Ok(out.reduced_features(x))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldoutSpec {
    pub test_count: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for HoldoutSpec {
    fn default() -> Self {
        Self {
            test_count: 20,
            repeats: 8,
            seed: 7,
        }
    }
}

/// Repeated holdout accuracy for each `R`. Features are reduced on the full
/// dataset first; every `R` sees the same sequence of splits.
pub fn r_sweep<T: Real>(
    ds: &LabeledDataset<T>,
    r_values: &[usize],
    holdout: HoldoutSpec,
    gamma_grid: &[f64],
) -> Result<Vec<AccuracyReport>> {
    let n = ds.features();
    for &r in r_values {
        if r != n && (r < 2 || !r.is_power_of_two() || r > n) {
            return Err(Error::invalid(
                "R",
                format!("{r} must be a power of two in [2, {n}] or equal {n}"),
            ));
        }
    }
    if holdout.repeats == 0 {
        return Err(Error::invalid("repeats", "must be at least 1"));
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..holdout.repeats)
        .map(|rep| {
            holdout_indices(
                ds.len(),
                holdout.test_count,
                holdout.seed.wrapping_add(rep as u64),
            )
        })
        .collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let feats = if r == n {
            ds.x.clone()
        } else {
            reduce_features(ds.x.view(), FeatureSource::Pca { r })?
        };
        let reduced = ds.with_features(feats)?;
        let results: Vec<Result<(f64, f64, bool)>> = splits
            .par_iter()
            .enumerate()
            .map(|(rep, (train, test))| {
                evaluate_split(
                    &reduced,
                    train,
                    test,
                    gamma_grid,
                    holdout.seed.wrapping_add(rep as u64 + 1),
                )
            })
            .collect();
        let mut accs = Vec::new();
        let mut gammas = Vec::new();
        let mut single = Vec::new();
        for (rep, res) in results.into_iter().enumerate() {
            let (a, g, s) = res?;
            accs.push(a);
            gammas.push(g);
            if s {
                single.push(rep);
            }
        }
        reports.push(summarize(Some(r), accs, gammas, single));
    }
    Ok(reports)
}

pub fn r_sweep_csv(reports: &[AccuracyReport]) -> String {
    let mut out = String::from("R,mean,min,max\n");
    for rep in reports {
        let r = rep.r.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{r},{},{},{}", rep.mean, rep.min, rep.max);
    }
    out
}
