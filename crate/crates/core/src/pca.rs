//! Classical PCA: the oracle every quantum reduction is compared against.
//!
//! No centering is applied; the covariance is the raw Gram matrix of the
//! feature columns, `A = XᵀX`.

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eig, CVector, HermitianMatrix, RMatrix};
use crate::scalar::{creal, Real};

/// Consecutive eigenvalues closer than this are reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Eigenvalues at or below this fraction of the largest are treated as the
/// null space of `XᵀX`: the data carry no weight there.
pub const NULL_SPACE_RTOL: f64 = 1e-10;

/// Threshold below which a covariance eigenvalue counts as null.
pub fn null_floor<T: Real>(eigenvalues: &[T]) -> T {
    eigenvalues.iter().copied().fold(T::zero(), T::max) * T::lit(NULL_SPACE_RTOL)
}

#[derive(Clone, Debug)]
pub struct PcaModel<T: Real> {
    /// All `N` eigenvalues of `XᵀX`, descending.
    pub eigenvalues: Array1<T>,
    /// Row `k` is the unit eigenvector `v_k`.
    pub components: RMatrix<T>,
    pub r: usize,
    pub variance_fraction: T,
    /// Indices `k` with `λ_k ≈ λ_{k+1}`.
    pub degenerate_pairs: Vec<usize>,
}

/// Serializable report view of a [`PcaModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub eigenvalues: Vec<f64>,
    pub variance_fraction: f64,
    #[serde(rename = "R")]
    pub r: usize,
}

#[derive(Clone, Debug)]
pub struct ReducedData<T: Real> {
    /// `M × R`, entry `(i, j)` is `z_i^j = x_i · v_j`.
    pub z: RMatrix<T>,
}

impl<T: Real> PcaModel<T> {
    pub fn features(&self) -> usize {
        self.components.ncols()
    }

    /// Projection matrix `V_R` (R × N).
    pub fn projection(&self) -> ArrayView2<'_, T> {
        self.components.slice(ndarray::s![..self.r, ..])
    }

    pub fn top_eigenvalues(&self) -> &[T] {
        &self.eigenvalues.as_slice().expect("contiguous")[..self.r]
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_pairs.is_empty()
    }

    /// True when a degeneracy touches the retained block or its boundary.
    /// Coincidences inside the null space are ignored: any basis of it
    /// gives the same reduced data.
    pub fn is_degenerate_within(&self, r: usize) -> bool {
        let floor = null_floor(self.eigenvalues.as_slice().expect("contiguous"));
        self.degenerate_pairs
            .iter()
            .any(|&k| k < r && self.eigenvalues[k] > floor)
    }

    /// Number of eigenvalues above the null-space floor.
    pub fn numerical_rank(&self) -> usize {
        let floor = null_floor(self.eigenvalues.as_slice().expect("contiguous"));
        self.eigenvalues.iter().filter(|&&l| l > floor).count()
    }

    pub fn summary(&self) -> PcaSummary {
        PcaSummary {
            eigenvalues: self.eigenvalues.iter().map(|v| v.to_f64_lossy()).collect(),
            variance_fraction: self.variance_fraction.to_f64_lossy(),
            r: self.r,
        }
    }
}

/// `A = XᵀX`
pub fn covariance_real<T: Real>(x: ArrayView2<T>) -> RMatrix<T> {
    let (m, n) = x.dim();
    let mut a = RMatrix::<T>::zeros((n, n));
    for i in 0..m {
        let row = x.row(i);
        for p in 0..n {
            let xp = row[p];
            if xp == T::zero() {
                continue;
            }
            for q in p..n {
                a[[p, q]] += xp * row[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            a[[p, q]] = a[[q, p]];
        }
    }
    a
}

pub fn covariance<T: Real>(x: ArrayView2<T>) -> Result<HermitianMatrix<T>> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::invalid("data matrix", "empty"));
    }
    HermitianMatrix::new(covariance_real(x).mapv(creal))
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is positive.
pub fn fix_sign<T: Real>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&b| b < T::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn fit_pca<T: Real>(x: ArrayView2<T>, r: usize) -> Result<PcaModel<T>> {
    let n = x.ncols();
    if r < 1 || r > n {
        return Err(Error::invalid("r", format!("need 1 <= r <= {n}, got {r}")));
    }
    let (values, vectors) = symmetric_eig(covariance_real(x).view())?;
    let mut components = RMatrix::<T>::zeros((n, n));
    for k in 0..n {
        let mut v: Vec<T> = vectors.column(k).to_vec();
        let nrm = v.iter().map(|&a| a * a).sum::<T>().sqrt();
        v.iter_mut().for_each(|a| *a /= nrm);
        fix_sign(&mut v);
        components.row_mut(k).assign(&Array1::from(v));
    }
    // XᵀX is PSD; clamp rounding noise below zero
    let eigenvalues = values.mapv(|l| l.max(T::zero()));
    let total: T = eigenvalues.iter().copied().sum();
    let kept: T = eigenvalues.iter().take(r).copied().sum();
    let variance_fraction = if total > T::zero() {
        (kept / total).min(T::one())
    } else {
        T::one()
    };
    let tol = T::lit(DEGENERACY_TOL).max(T::epsilon() * T::lit(64.0) * eigenvalues[0]);
    let degenerate_pairs = (0..n.saturating_sub(1))
        .filter(|&k| (eigenvalues[k] - eigenvalues[k + 1]).abs() <= tol)
        .collect();
    Ok(PcaModel {
        eigenvalues,
        components,
        r,
        variance_fraction,
        degenerate_pairs,
    })
}

/// `Z = X V_Rᵀ`
pub fn project<T: Real>(x: ArrayView2<T>, model: &PcaModel<T>) -> Result<ReducedData<T>> {
    if x.ncols() != model.features() {
        return Err(Error::DimensionMismatch {
            context: "pca projection",
            expected: model.features(),
            found: x.ncols(),
        });
    }
    let (m, n) = x.dim();
    let vr = model.projection();
    let mut z = RMatrix::<T>::zeros((m, model.r));
    for i in 0..m {
        for j in 0..model.r {
            let mut acc = T::zero();
            for f in 0..n {
                acc += x[[i, f]] * vr[[j, f]];
            }
            z[[i, j]] = acc;
        }
    }
    Ok(ReducedData { z })
}

/// Amplitude vector of `|Z⟩`: entry `j·M + i` holds `z_i^j / ‖Z‖_F`, with the
/// feature register padded to the next power of two.
pub fn target_state<T: Real>(z: &ReducedData<T>) -> Result<CVector<T>> {
    let (m, r) = z.z.dim();
    let dim = r.next_power_of_two();
    let fro = z.z.iter().map(|&a| a * a).sum::<T>().sqrt();
    if !(fro > T::zero()) {
        return Err(Error::invalid(
            "Z",
            "all-zero reduced data cannot be normalized",
        ));
    }
    let mut out = CVector::<T>::zeros(dim * m);
    for i in 0..m {
        for j in 0..r {
            out[j * m + i] = creal(z.z[[i, j]] / fro);
        }
    }
    Ok(out)
}
