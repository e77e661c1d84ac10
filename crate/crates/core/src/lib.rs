//! Exact state-vector simulation of Quantum Resonant Dimensionality
//! Reduction (QRDR) and the two downstream classifiers used to evaluate it:
//! a least-squares SVM and a small LCU-based quantum convolutional network.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the experiments use.

pub mod dataset;
pub mod error;
pub mod linalg;
pub mod pca;
pub mod qcnn;
pub mod qrdr;
pub mod qsvm;
pub mod resonance;
pub mod rng;
pub mod scalar;
pub mod tfim;

pub use error::{Error, Result};
pub use scalar::Real;

/// Complex amplitude vector in double precision.
pub type ComplexVector = linalg::CVector<f64>;
pub type ComplexMatrix = linalg::CMatrix<f64>;
pub type RealMatrix = linalg::RMatrix<f64>;
pub type HermitianMatrix = linalg::HermitianMatrix<f64>;
pub type SpectralDecomposition = linalg::SpectralDecomposition<f64>;
pub type SvdResult = linalg::SvdResult<f64>;
pub type LabeledDataset = dataset::LabeledDataset<f64>;
pub type PcaModel = pca::PcaModel<f64>;
pub type ReducedData = pca::ReducedData<f64>;
pub type QrdrHamiltonian = qrdr::QrdrHamiltonian<f64>;
pub type QrdrOutcome = qrdr::QrdrOutcome<f64>;
pub type LssvmModel = qsvm::LssvmModel<f64>;
pub type KernelMatrix = qsvm::KernelMatrix<f64>;
pub type TfimSpec = tfim::TfimSpec<f64>;
pub type PhaseSample = tfim::PhaseSample<f64>;
pub type QcnnModel = qcnn::QcnnModel<f64>;
pub type MlpModel = qcnn::mlp::MlpModel<f64>;
