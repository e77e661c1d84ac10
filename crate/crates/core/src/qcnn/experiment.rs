//! Phase classification of transverse-field Ising ground states with four
//! model arms: the quantum classifier and the MLP, each on raw amplitudes and
//! on QRDR-reduced features.

use serde::{Deserialize, Serialize};

use super::mlp::MlpModel;
use super::train::{fit, GradientMethod, History, Labeled, TrainConfig, Trainable};
use super::{encode_real, QcnnModel};
use crate::dataset::holdout_indices;
use crate::error::{Error, Result};
use crate::linalg::{CVector, RMatrix};
use crate::pca::fit_pca;
use crate::qrdr::{delta_min_for, run_with_model, OutcomeRecord, QrdrConfig, RegisterLayout};
use crate::tfim::TfimDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "qcnn+qrdr")]
    QcnnQrdr,
    #[serde(rename = "qcnn")]
    Qcnn,
    #[serde(rename = "mlp+dr")]
    MlpDr,
    #[serde(rename = "mlp")]
    Mlp,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::QcnnQrdr, Arm::Qcnn, Arm::MlpDr, Arm::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Arm::QcnnQrdr => "qcnn+qrdr",
            Arm::Qcnn => "qcnn",
            Arm::MlpDr => "mlp+dr",
            Arm::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "arm",
                    format!("unknown arm {s:?}; expected qcnn+qrdr, qcnn, mlp+dr or mlp"),
                )
            })
    }

    fn reduced(self) -> bool {
        matches!(self, Arm::QcnnQrdr | Arm::MlpDr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseExperimentConfig {
    pub r_target: usize,
    /// Resonant parameter; `None` picks `Δ_min / c_divisor`.
    pub c: Option<f64>,
    pub c_divisor: f64,
    pub test_count: usize,
    pub seeds: Vec<u64>,
    pub arms: Vec<Arm>,
    /// Convolution stages of the quantum classifier.
    pub qcnn_layers: usize,
    pub train: TrainConfig,
    /// Gradient method for the MLP arms.
    pub mlp_gradient: GradientMethod,
}

impl Default for PhaseExperimentConfig {
    fn default() -> Self {
        Self {
            r_target: 16,
            c: None,
            c_divisor: 100.0,
            test_count: 40,
            seeds: (0..5).collect(),
            arms: Arm::ALL.to_vec(),
            qcnn_layers: 1,
            train: TrainConfig::default(),
            mlp_gradient: GradientMethod::Analytic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmRun {
    pub arm: Arm,
    pub seed: u64,
    pub history: History,
    /// Trained parameters in the model's own ordering.
    pub parameters: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub runs: usize,
    pub mean_final_train_acc: f64,
    pub mean_final_test_acc: f64,
    pub mean_final_test_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseExperimentReport {
    pub qrdr: Option<OutcomeRecord>,
    pub summaries: Vec<ArmSummary>,
    pub runs: Vec<ArmRun>,
}

impl PhaseExperimentReport {
    pub fn summary(&self, arm: Arm) -> Option<&ArmSummary> {
        self.summaries.iter().find(|s| s.arm == arm)
    }

    pub fn history_csv(&self) -> String {
        let mut s = String::from("arm,seed,epoch,train_loss,train_acc,test_loss,test_acc\n");
        for run in &self.runs {
            for r in &run.history.records {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    run.arm.name(),
                    run.seed,
                    r.epoch,
                    r.train_loss,
                    r.train_acc,
                    r.test_loss,
                    r.test_acc
                ));
            }
        }
        s
    }
}

/// QRDR-reduced features of every sample (rows) and the run summary.
pub fn reduce_dataset(
    x: &RMatrix<f64>,
    r_target: usize,
    c: Option<f64>,
    c_divisor: f64,
) -> Result<(RMatrix<f64>, OutcomeRecord)> {
    let (m, n) = x.dim();
    let layout = RegisterLayout::for_problem(n, r_target, m)?;
    let pca = fit_pca(x.view(), r_target)?;
    let c = match c {
        Some(c) => c,
        None => {
            if !(c_divisor > 1.0) {
                return Err(Error::invalid("c_divisor", "must exceed 1"));
            }
            delta_min_for(&pca, &layout) / c_divisor
        }
    };
    let out = run_with_model(x.view(), &pca, layout, &QrdrConfig::new(r_target, c), 1.0)?;
    log::info!(
        "QRDR R={r_target}: c = {c:e}, success probability {:.6}, epsilon {:e}",
        out.success_probability,
        out.epsilon
    );
    Ok((out.reduced_features(x.view()), out.record()))
}

fn rows(x: &RMatrix<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn labeled<I: Clone>(inputs: &[I], labels: &[i8], idx: &[usize]) -> Vec<Labeled<I>> {
    idx.iter()
        .map(|&i| Labeled {
            id: i,
            input: inputs[i].clone(),
            label: labels[i],
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Trains every requested arm for every seed. The seed fixes the train/test
/// split, the model initialization and the batch order.
pub fn run_phase_experiment(
    ds: &TfimDataset<f64>,
    cfg: &PhaseExperimentConfig,
) -> Result<PhaseExperimentReport> {
    cfg.train.validate()?;
    if cfg.seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one seed"));
    }
    if cfg.arms.is_empty() {
        return Err(Error::invalid("arms", "need at least one arm"));
    }
    let x = ds.matrix();
    let labels = ds.labels();
    let n = labels.len();

    let needs_reduction = cfg.arms.iter().any(|a| a.reduced());
    let (reduced, qrdr) = if needs_reduction {
        let (z, rec) = reduce_dataset(&x, cfg.r_target, cfg.c, cfg.c_divisor)?;
        (Some(rows(&z)), Some(rec))
    } else {
        (None, None)
    };
    let raw = rows(&x);
    let encode = |feats: &[Vec<f64>]| -> Result<Vec<CVector<f64>>> {
        feats.iter().map(|f| encode_real(f)).collect()
    };
    let raw_states = if cfg.arms.contains(&Arm::Qcnn) {
        Some(encode(&raw)?)
    } else {
        None
    };
    let reduced_states = match (&reduced, cfg.arms.contains(&Arm::QcnnQrdr)) {
        (Some(z), true) => Some(encode(z)?),
        _ => None,
    };

    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let (train_idx, test_idx) = holdout_indices(n, cfg.test_count, seed)?;
        let train_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        for &arm in &cfg.arms {
            let (history, parameters) = match arm {
                Arm::QcnnQrdr | Arm::Qcnn => {
                    let states = if arm == Arm::Qcnn {
                        &raw_states
                    } else {
                        &reduced_states
                    };
                    let states = states.as_ref().expect("encoded above");
                    let qubits = states[0].len().trailing_zeros() as usize;
                    let mut model = QcnnModel::<f64>::new(qubits, cfg.qcnn_layers, seed)?;
                    let train = labeled(states, &labels, &train_idx);
                    let test = labeled(states, &labels, &test_idx);
                    (
                        fit(&mut model, &train, &test, &train_cfg)?,
                        model.parameters(),
                    )
                }
                Arm::MlpDr | Arm::Mlp => {
                    let feats = if arm == Arm::Mlp {
                        &raw
                    } else {
                        reduced.as_ref().expect("reduced above")
                    };
                    let mut model = MlpModel::<f64>::new(feats[0].len(), seed)?;
                    let train = labeled(feats, &labels, &train_idx);
                    let test = labeled(feats, &labels, &test_idx);
                    let mlp_cfg = TrainConfig {
                        gradient: cfg.mlp_gradient,
                        ..train_cfg.clone()
                    };
                    (
                        fit(&mut model, &train, &test, &mlp_cfg)?,
                        model.parameters(),
                    )
                }
            };
            if let Some(last) = history.last() {
                log::info!(
                    "{} seed {seed}: final train acc {:.3}, test acc {:.3}",
                    arm.name(),
                    last.train_acc,
                    last.test_acc
                );
            }
            runs.push(ArmRun {
                arm,
                seed,
                history,
                parameters,
            });
        }
    }

    let summaries = cfg
        .arms
        .iter()
        .map(|&arm| {
            let finals: Vec<_> = runs
                .iter()
                .filter(|r| r.arm == arm)
                .filter_map(|r| r.history.last().copied())
                .collect();
            ArmSummary {
                arm,
                runs: finals.len(),
                mean_final_train_acc: mean(finals.iter().map(|r| r.train_acc)),
                mean_final_test_acc: mean(finals.iter().map(|r| r.test_acc)),
                mean_final_test_loss: mean(finals.iter().map(|r| r.test_loss)),
            }
        })
        .collect();
    Ok(PhaseExperimentReport {
        qrdr,
        summaries,
        runs,
    })
}
