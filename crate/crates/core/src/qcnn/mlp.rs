//! Fully connected classical baseline with `tanh` hidden layers.

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{bce_with_grad, Labeled, Trainable};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

pub const HIDDEN_WIDTHS: [usize; 3] = [128, 128, 128];
const INIT_STREAM: u64 = 0x6d6c_70;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel<T> {
    /// `weights[l]` has shape `(out, in)`.
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Real> MlpModel<T> {
    /// Layers `[input, 128, 128, 128, 1]`, Xavier-uniform weights, zero biases.
    pub fn new(input: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend_from_slice(&HIDDEN_WIDTHS);
        widths.push(1);
        Self::with_widths(&widths, seed)
    }

    pub fn with_widths(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid(
                "widths",
                "need at least two positive layer widths",
            ));
        }
        if widths[widths.len() - 1] != 1 {
            return Err(Error::invalid("widths", "output layer must have width 1"));
        }
        let mut r = rng::seeded(seed, INIT_STREAM);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| {
                T::lit(r.random_range(-limit..limit))
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self { weights, biases })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "MLP input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Activations of every layer; the last entry holds the logit.
    fn forward(&self, x: &[T]) -> Result<Vec<Array1<T>>> {
        self.check_input(x)?;
        let last = self.weights.len() - 1;
        let mut acts = vec![Array1::from(x.to_vec())];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w.dot(&acts[l]) + b;
            acts.push(if l == last { z } else { z.mapv(|v| v.tanh()) });
        }
        Ok(acts)
    }

    pub fn logit(&self, x: &[T]) -> Result<T> {
        Ok(self
            .forward(x)?
            .last()
            .map(|a| a[0])
            .unwrap_or_else(T::zero))
    }

    /// Gradient of `scale · logit(x)` in parameter order.
    fn backprop(&self, x: &[T], scale: T) -> Result<(T, Vec<Array2<T>>, Vec<Array1<T>>)> {
        let acts = self.forward(x)?;
        let e = acts[acts.len() - 1][0];
        let layers = self.weights.len();
        let mut dw = vec![Array2::zeros((0, 0)); layers];
        let mut db = vec![Array1::zeros(0); layers];
        let mut delta = Array1::from(vec![scale]);
        for l in (0..layers).rev() {
            let a_in = &acts[l];
            dw[l] = Array2::from_shape_fn(self.weights[l].dim(), |(i, j)| delta[i] * a_in[j]);
            db[l] = delta.clone();
            if l > 0 {
                let back = self.weights[l].t().dot(&delta);
                delta = back * acts[l].mapv(|a| T::one() - a * a);
            }
        }
        Ok((e, dw, db))
    }

    fn flatten(&self, dw: &[Array2<T>], db: &[Array1<T>]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in dw.iter().zip(db) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

impl<T: Real> Trainable<T> for MlpModel<T> {
    type Input = Vec<T>;

    fn parameters(&self) -> Vec<T> {
        self.flatten(&self.weights, &self.biases)
    }

    fn set_parameters(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                context: "MLP parameters",
                expected: self.parameter_count(),
                found: p.len(),
            });
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = p[at];
                at += 1;
            }
            for v in b.iter_mut() {
                *v = p[at];
                at += 1;
            }
        }
        Ok(())
    }

    fn logits(&self, inputs: &[&Vec<T>]) -> Result<Vec<T>> {
        inputs.par_iter().map(|x| self.logit(x)).collect()
    }

    fn analytic_gradient(&self, batch: &[&Labeled<Vec<T>>]) -> Option<Result<(T, Vec<T>)>> {
        let run = || -> Result<(T, Vec<T>)> {
            let per = batch
                .par_iter()
                .map(|s| {
                    let e = self.logit(&s.input)?;
                    let (loss, dl) = bce_with_grad(e, s.label, s.id)?;
                    let (_, dw, db) = self.backprop(&s.input, dl)?;
                    Ok((loss, self.flatten(&dw, &db)))
                })
                .collect::<Result<Vec<_>>>()?;
            let n = T::from_usize_lossy(batch.len());
            let mut loss = T::zero();
            let mut grad = vec![T::zero(); self.parameter_count()];
            for (l, g) in per {
                loss += l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
            grad.iter_mut().for_each(|g| *g /= n);
            Ok((loss / n, grad))
        };
        Some(run())
    }
}

#[cfg(test)]
mod tests {
    use super::super::train::{finite_difference_gradient, fit, GradientMethod, TrainConfig};
    use super::*;

    fn toy(n: usize, seed: u64) -> Vec<Labeled<Vec<f64>>> {
        let mut r = rng::seeded(seed, 0);
        (0..n)
            .map(|id| {
                let label: i8 = if id % 2 == 0 { 1 } else { -1 };
                let centre = f64::from(label) * 0.8;
                let input = vec![
                    centre + r.random_range(-0.3..0.3),
                    r.random_range(-1.0..1.0),
                ];
                Labeled { id, input, label }
            })
            .collect()
    }

    #[test]
    fn shape_and_parameter_count() {
        let m = MlpModel::<f64>::new(16, 1).unwrap();
        assert_eq!(
            m.parameter_count(),
            16 * 128 + 128 + 2 * (128 * 128 + 128) + 129
        );
        assert!(m.logit(&[0.0; 15]).is_err());
        assert!(MlpModel::<f64>::with_widths(&[3, 2], 0).is_err());
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let m = MlpModel::<f64>::with_widths(&[3, 5, 4, 1], 3).unwrap();
        let data = toy(6, 4)
            .into_iter()
            .map(|mut s| {
                s.input.push(0.3);
                s
            })
            .collect::<Vec<_>>();
        let batch: Vec<&Labeled<Vec<f64>>> = data.iter().collect();
        let (la, ga) = m.analytic_gradient(&batch).unwrap().unwrap();
        let (lf, gf) = finite_difference_gradient(&m, &batch, 1e-6).unwrap();
        assert!((la - lf).abs() < 1e-14);
        for (a, b) in ga.iter().zip(&gf) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn toy_set_is_learned_deterministically() {
        let train = toy(40, 5);
        let test = toy(20, 6);
        let cfg = TrainConfig {
            epochs: 5,
            gradient: GradientMethod::Analytic,
            ..TrainConfig::default()
        };
        let mut a = MlpModel::<f64>::new(2, 9).unwrap();
        let ha = fit(&mut a, &train, &test, &cfg).unwrap();
        assert_eq!(ha.records.len(), 6);
        assert_eq!(ha.last().unwrap().train_acc, 1.0);
        assert!(ha.records[1].train_loss < ha.records[0].train_loss);
        let mut b = MlpModel::<f64>::new(2, 9).unwrap();
        assert_eq!(fit(&mut b, &train, &test, &cfg).unwrap(), ha);
        assert_eq!(a, b);
    }
}
