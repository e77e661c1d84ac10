//! Mini-batch Adam training shared by the quantum and classical classifiers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

const SHUFFLE_STREAM: u64 = 0x5348_0000;

/// One training example; `label` is `−1` or `+1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labeled<I> {
    pub id: usize,
    pub input: I,
    pub label: i8,
}

/// A binary classifier producing a real logit, trained on `σ(logit)`.
pub trait Trainable<T: Real>: Clone + Send + Sync {
    type Input: Send + Sync;

    fn parameters(&self) -> Vec<T>;
    fn set_parameters(&mut self, p: &[T]) -> Result<()>;
    fn logits(&self, inputs: &[&Self::Input]) -> Result<Vec<T>>;

    /// Mean loss and its gradient over a batch, when the model has a closed form.
    fn analytic_gradient(&self, _batch: &[&Labeled<Self::Input>]) -> Option<Result<(T, Vec<T>)>> {
        None
    }
}

/// Binary cross-entropy of `σ(e)` against `y ∈ {−1, +1}`, and `∂/∂e`.
pub fn bce_with_grad<T: Real>(e: T, label: i8, sample: usize) -> Result<(T, T)> {
    let y = if label > 0 { T::one() } else { T::zero() };
    let loss = softplus(e) - y * e;
    if !loss.is_finite() {
        return Err(Error::NonFinite { sample });
    }
    let sig = T::one() / (T::one() + (-e).exp());
    Ok((loss, sig - y))
}

fn softplus<T: Real>(e: T) -> T {
    if e > T::zero() {
        e + (-e).exp().ln_1p()
    } else {
        e.exp().ln_1p()
    }
}

pub fn bce<T: Real>(e: T, label: i8, sample: usize) -> Result<T> {
    Ok(bce_with_grad(e, label, sample)?.0)
}

pub fn predict_label<T: Real>(e: T) -> i8 {
    if e >= T::zero() {
        1
    } else {
        -1
    }
}

/// Mean loss and accuracy over a labeled set.
pub fn evaluate<T: Real, M: Trainable<T>>(model: &M, data: &[Labeled<M::Input>]) -> Result<(T, T)> {
    if data.is_empty() {
        return Err(Error::invalid("data", "cannot evaluate on an empty set"));
    }
    let refs: Vec<&M::Input> = data.iter().map(|s| &s.input).collect();
    let logits = model.logits(&refs)?;
    let mut loss = T::zero();
    let mut correct = 0usize;
    for (s, &e) in data.iter().zip(&logits) {
        loss += bce(e, s.label, s.id)?;
        correct += usize::from(predict_label(e) == s.label);
    }
    let n = T::from_usize_lossy(data.len());
    Ok((loss / n, T::from_usize_lossy(correct) / n))
}

fn batch_loss<T: Real, M: Trainable<T>>(model: &M, batch: &[&Labeled<M::Input>]) -> Result<T> {
    let refs: Vec<&M::Input> = batch.iter().map(|s| &s.input).collect();
    let logits = model.logits(&refs)?;
    let mut loss = T::zero();
    for (s, &e) in batch.iter().zip(&logits) {
        loss += bce(e, s.label, s.id)?;
    }
    Ok(loss / T::from_usize_lossy(batch.len()))
}

/// Central finite differences of the mean batch loss, one parameter per task.
pub fn finite_difference_gradient<T: Real, M: Trainable<T>>(
    model: &M,
    batch: &[&Labeled<M::Input>],
    step: T,
) -> Result<(T, Vec<T>)> {
    let base = model.parameters();
    let loss = batch_loss(model, batch)?;
    let grad = (0..base.len())
        .into_par_iter()
        .map(|i| {
            let mut m = model.clone();
            let mut p = base.clone();
            p[i] = base[i] + step;
            m.set_parameters(&p)?;
            let plus = batch_loss(&m, batch)?;
            p[i] = base[i] - step;
            m.set_parameters(&p)?;
            let minus = batch_loss(&m, batch)?;
            Ok((plus - minus) / (step + step))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok((loss, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GradientMethod {
    FiniteDifference {
        step: f64,
    },
    /// Closed-form gradient supplied by the model.
    #[serde(alias = "parameter-shift")]
    Analytic,
}

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::FiniteDifference { step: 1e-5 }
    }
}

pub fn gradient<T: Real, M: Trainable<T>>(
    model: &M,
    batch: &[&Labeled<M::Input>],
    method: GradientMethod,
) -> Result<(T, Vec<T>)> {
    match method {
        GradientMethod::FiniteDifference { step } => {
            finite_difference_gradient(model, batch, T::lit(step))
        }
        GradientMethod::Analytic => model
            .analytic_gradient(batch)
            .unwrap_or_else(|| Err(Error::invalid("gradient", "model has no analytic gradient"))),
    }
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, learning_rate: T) -> Self {
        Self {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let b1t = T::one() - self.beta1.powi(self.t);
        let b2t = T::one() - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub gradient: GradientMethod,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 20,
            learning_rate: 0.01,
            seed: 7,
            gradient: GradientMethod::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "learning_rate",
                "must be a positive finite number",
            ));
        }
        if let GradientMethod::FiniteDifference { step } = self.gradient {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::invalid("step", "must be a positive finite number"));
            }
        }
        Ok(())
    }
}

/// Metrics after `epoch` passes; epoch 0 is the untrained model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_acc,test_loss,test_acc";

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc
            ));
        }
        s
    }
}

fn record<T: Real, M: Trainable<T>>(
    model: &M,
    epoch: usize,
    train: &[Labeled<M::Input>],
    test: &[Labeled<M::Input>],
) -> Result<EpochRecord> {
    let (train_loss, train_acc) = evaluate(model, train)?;
    let (test_loss, test_acc) = if test.is_empty() {
        (T::nan(), T::nan())
    } else {
        evaluate(model, test)?
    };
    Ok(EpochRecord {
        epoch,
        train_loss: train_loss.to_f64_lossy(),
        train_acc: train_acc.to_f64_lossy(),
        test_loss: test_loss.to_f64_lossy(),
        test_acc: test_acc.to_f64_lossy(),
    })
}

/// Adam on shuffled mini-batches; returns one record per epoch plus the initial one.
pub fn fit<T: Real, M: Trainable<T>>(
    model: &mut M,
    train: &[Labeled<M::Input>],
    test: &[Labeled<M::Input>],
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("train", "training set is empty"));
    }
    if cfg.batch_size > train.len() {
        return Err(Error::invalid(
            "batch_size",
            format!(
                "{} exceeds the training-set size {}",
                cfg.batch_size,
                train.len()
            ),
        ));
    }
    let mut params = model.parameters();
    let mut adam = Adam::new(params.len(), T::lit(cfg.learning_rate));
    let mut history = History::default();
    history.records.push(record(model, 0, train, test)?);
    for epoch in 1..=cfg.epochs {
        let order = rng::permutation(train.len(), cfg.seed, SHUFFLE_STREAM + epoch as u64);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Labeled<M::Input>> = chunk.iter().map(|&i| &train[i]).collect();
            let (_, grad) = gradient(model, &batch, cfg.gradient)?;
            adam.step(&mut params, &grad);
            model.set_parameters(&params)?;
        }
        let rec = record(model, epoch, train, test)?;
        log::debug!(
            "epoch {epoch}: train loss {:.4} acc {:.3}, test loss {:.4} acc {:.3}",
            rec.train_loss,
            rec.train_acc,
            rec.test_loss,
            rec.test_acc
        );
        history.records.push(rec);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_zero_is_ln2() {
        for y in [-1, 1] {
            let (l, g) = bce_with_grad(0.0_f64, y, 0).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
            assert!((g.abs() - 0.5).abs() < 1e-15);
        }
        assert!(bce(800.0_f64, -1, 0).unwrap().is_finite());
        assert!(matches!(
            bce(f64::NAN, 1, 3),
            Err(Error::NonFinite { sample: 3 })
        ));
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let mut adam = Adam::new(2, 0.01_f64);
        let mut p = vec![1.0, -1.0];
        adam.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let h = History {
            records: vec![EpochRecord {
                epoch: 0,
                train_loss: 0.5,
                train_acc: 1.0,
                test_loss: 0.25,
                test_acc: 0.75,
            }],
        };
        assert_eq!(
            h.to_csv(),
            "epoch,train_loss,train_acc,test_loss,test_acc\n0,0.5,1,0.25,0.75\n"
        );
    }
}
