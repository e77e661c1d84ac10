//! Quantum resonant dimensionality reduction, simulated exactly.
//!
//! State layout (most significant register first):
//!
//! ```text
//! |probe⟩ |ancilla j⟩ |data d⟩ |sample i⟩   index = ((p·2^r + j)·2^n + d)·M + i
//! ```
//!
//! The Hamiltonian acts as `𝓗 ⊗ I_M`; the sample register only rides along.
//! `𝓗` is block diagonal in the eigenbasis `{v_k}` of the covariance, so the
//! fast path evolves one `2^{r+1}`-dimensional sector per `v_k`.

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eig, inner, norm, norm_sqr, CMatrix, CVector, HermitianMatrix, RMatrix,
};
use crate::pca::{fit_pca, null_floor, project, target_state, PcaModel};
use crate::scalar::{cplx, creal, Real, C};

/// Below this, post-selection is treated as failed.
pub const POSTSELECT_MIN_PROBABILITY: f64 = 1e-12;
/// `c` above `Δ_min / WARN_RATIO` is accepted with a warning.
pub const ADMISSIBILITY_WARN_RATIO: f64 = 10.0;
/// Accepted deviation from unit norm for inputs that must be normalized.
pub const NORM_TOL: f64 = 1e-8;

/// Qubit counts of the probe / ancilla / data registers plus the number of
/// samples carried by the (logical) sample register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub r: usize,
    pub n: usize,
    pub samples: usize,
}

fn ceil_log2(x: usize) -> usize {
    x.next_power_of_two().trailing_zeros() as usize
}

impl RegisterLayout {
    pub fn for_problem(features: usize, r_target: usize, samples: usize) -> Result<Self> {
        if features == 0 || r_target == 0 || samples == 0 {
            return Err(Error::invalid(
                "layout",
                "features, R and samples must be positive",
            ));
        }
        if r_target > features {
            return Err(Error::invalid(
                "R",
                format!("R = {r_target} exceeds N = {features}"),
            ));
        }
        Ok(Self {
            r: ceil_log2(r_target),
            n: ceil_log2(features),
            samples,
        })
    }

    #[inline]
    pub fn ancilla_dim(&self) -> usize {
        1 << self.r
    }

    #[inline]
    pub fn data_dim(&self) -> usize {
        1 << self.n
    }

    /// Dimension of probe ⊗ ancilla ⊗ data.
    #[inline]
    pub fn block_dim(&self) -> usize {
        2 * self.ancilla_dim() * self.data_dim()
    }

    #[inline]
    pub fn full_dim(&self) -> usize {
        self.block_dim() * self.samples
    }

    #[inline]
    pub fn index(&self, probe: usize, ancilla: usize, data: usize, sample: usize) -> usize {
        ((probe * self.ancilla_dim() + ancilla) * self.data_dim() + data) * self.samples + sample
    }
}

/// Parameters of `𝓗` plus the data eigenbasis needed for blockwise evolution.
#[derive(Clone, Debug)]
pub struct QrdrHamiltonian<T: Real> {
    pub c: T,
    pub layout: RegisterLayout,
    /// Diagonal of `H_λ`: `−λ_k` for `k < R`, `pad_value` above.
    pub h_lambda: Array1<T>,
    pub pad_value: T,
    pub r_target: usize,
    /// Covariance padded to `2^n × 2^n`.
    pub covariance: RMatrix<T>,
    /// Row `k` is the padded eigenvector `v_k` of the covariance.
    pub data_basis: RMatrix<T>,
    /// Covariance eigenvalue of row `k` of `data_basis`.
    pub data_energies: Array1<T>,
    /// Number of genuine (unpadded) data eigenvectors.
    pub features: usize,
    pub delta_min: T,
    pub warnings: Vec<String>,
}

/// Hadamard-type coupling `B = √(2^r) H_d^{⊗r}`, entries `±1`.
#[inline]
pub fn coupling_sign(j: usize, k: usize) -> f64 {
    if (j & k).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl<T: Real> QrdrHamiltonian<T> {
    pub fn t(&self) -> T {
        T::one() / self.c
    }

    fn half_coupling(&self) -> T {
        self.c * T::PI() / T::lit(2.0)
    }

    /// Dense `𝓗` on probe ⊗ ancilla ⊗ data (no sample register).
    pub fn dense_matrix(&self) -> HermitianMatrix<T> {
        let a = self.layout.ancilla_dim();
        let d = self.layout.data_dim();
        let dim = 2 * a * d;
        let idx = |p: usize, j: usize, x: usize| (p * a + j) * d + x;
        let mut m = CMatrix::<T>::zeros((dim, dim));
        for j in 1..a {
            for x in 0..d {
                m[[idx(0, j, x), idx(0, j, x)]] = creal(-T::one());
            }
        }
        for j in 0..a {
            for x in 0..d {
                m[[idx(1, j, x), idx(1, j, x)]] += creal(self.h_lambda[j]);
                for y in 0..d {
                    m[[idx(1, j, x), idx(1, j, y)]] += creal(self.covariance[[x, y]]);
                }
            }
        }
        let g = self.half_coupling();
        for j in 0..a {
            for jp in 0..a {
                let b = g * T::lit(coupling_sign(j, jp));
                for x in 0..d {
                    m[[idx(0, j, x), idx(1, jp, x)]] = cplx(T::zero(), -b);
                    m[[idx(1, jp, x), idx(0, j, x)]] = cplx(T::zero(), b);
                }
            }
        }
        HermitianMatrix::new(m).expect("QRDR Hamiltonian is Hermitian by construction")
    }

    /// `𝓗` restricted to the sector `{|p⟩|j⟩|v_k⟩}`, ordered `p·2^r + j`.
    pub fn sector_matrix(&self, k: usize) -> HermitianMatrix<T> {
        let a = self.layout.ancilla_dim();
        let mut m = CMatrix::<T>::zeros((2 * a, 2 * a));
        for j in 1..a {
            m[[j, j]] = creal(-T::one());
        }
        let mu = self.data_energies[k];
        for j in 0..a {
            m[[a + j, a + j]] = creal(self.h_lambda[j] + mu);
        }
        let g = self.half_coupling();
        for j in 0..a {
            for jp in 0..a {
                let b = g * T::lit(coupling_sign(j, jp));
                m[[j, a + jp]] = cplx(T::zero(), -b);
                m[[a + jp, j]] = cplx(T::zero(), b);
            }
        }
        HermitianMatrix::new(m).expect("sector Hamiltonian is Hermitian by construction")
    }

    /// `e^{−i𝓗_k t}` for sector `k`.
    pub fn sector_propagator(&self, k: usize, t: T) -> Result<CMatrix<T>> {
        Ok(hermitian_eig(&self.sector_matrix(k))?.propagator(t))
    }
}

/// Amplitudes `x_i^j / ‖X‖_F` at index `j·M + i`, data register padded to `2^n`.
pub fn encode_dataset_state<T: Real>(x: ArrayView2<T>) -> Result<CVector<T>> {
    let (m, n) = x.dim();
    if m == 0 || n == 0 {
        return Err(Error::invalid("data matrix", "empty"));
    }
    let fro = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if !(fro > T::zero()) {
        return Err(Error::invalid(
            "data matrix",
            "all-zero data cannot be encoded",
        ));
    }
    let dim = n.next_power_of_two();
    let mut out = CVector::<T>::zeros(dim * m);
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = creal(x[[i, j]] / fro);
        }
    }
    Ok(out)
}

/// `|0⟩|0^r⟩ ⊗ |X⟩` on the full register.
pub fn initial_state<T: Real>(x: ArrayView2<T>, layout: &RegisterLayout) -> Result<CVector<T>> {
    let data = encode_dataset_state(x)?;
    if data.len() != layout.data_dim() * layout.samples {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: layout.data_dim() * layout.samples,
            found: data.len(),
        });
    }
    let mut psi = CVector::<T>::zeros(layout.full_dim());
    psi.slice_mut(ndarray::s![..data.len()]).assign(&data);
    Ok(psi)
}

/// Smallest detuning `|λ_k + h_j|`, `j ≠ k`, over data directions that carry
/// weight; null-space directions of `XᵀX` are never populated.
/// Falls back to every direction when no populated pair exists.
pub fn delta_min<T: Real>(eigenvalues: &[T], h_lambda: &[T]) -> T {
    let supported = detuning_floor(eigenvalues, h_lambda, null_floor(eigenvalues));
    if supported.is_finite() {
        supported
    } else {
        detuning_floor(eigenvalues, h_lambda, T::neg_infinity())
    }
}

fn detuning_floor<T: Real>(eigenvalues: &[T], h_lambda: &[T], floor: T) -> T {
    let mut best = T::infinity();
    for (k, &lam) in eigenvalues.iter().enumerate() {
        if lam <= floor {
            continue;
        }
        for (j, &h) in h_lambda.iter().enumerate() {
            if j != k {
                best = best.min((lam + h).abs());
            }
        }
    }
    best
}

/// `Δ_min` for a fitted model, as used by [`build_hamiltonian`].
pub fn delta_min_for<T: Real>(pca: &PcaModel<T>, layout: &RegisterLayout) -> T {
    let lambdas = pca.eigenvalues.as_slice().expect("contiguous");
    let h: Vec<T> = (0..layout.ancilla_dim())
        .map(|j| if j < pca.r { -lambdas[j] } else { lambdas[0] })
        .collect();
    delta_min(lambdas, &h)
}

pub fn build_hamiltonian<T: Real>(
    pca: &PcaModel<T>,
    layout: RegisterLayout,
    c: T,
) -> Result<QrdrHamiltonian<T>> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(Error::invalid(
            "c",
            "resonant parameter must be positive and finite",
        ));
    }
    let r_target = pca.r;
    let a = layout.ancilla_dim();
    let d = layout.data_dim();
    let n = pca.features();
    if r_target > a {
        return Err(Error::invalid(
            "R",
            format!("R = {r_target} exceeds 2^r = {a}"),
        ));
    }
    if n > d {
        return Err(Error::invalid("N", format!("N = {n} exceeds 2^n = {d}")));
    }
    if pca.is_degenerate_within(r_target) {
        return Err(Error::Degenerate(format!(
            "eigenvalues coincide inside the top {r_target} or at its boundary (pairs {:?})",
            pca.degenerate_pairs
        )));
    }

    let lambdas = pca.eigenvalues.as_slice().expect("contiguous");
    let pad_value = lambdas[0];
    let h_lambda = Array1::from_shape_fn(a, |j| if j < r_target { -lambdas[j] } else { pad_value });
    let dmin = delta_min(lambdas, h_lambda.as_slice().expect("contiguous"));
    if !(dmin > T::zero()) {
        return Err(Error::Degenerate(format!(
            "delta_min = {dmin} is not positive"
        )));
    }
    if c >= dmin {
        return Err(Error::Inadmissible {
            c: c.to_f64_lossy(),
            delta_min: dmin.to_f64_lossy(),
        });
    }
    let mut warnings = Vec::new();
    if c > dmin / T::lit(ADMISSIBILITY_WARN_RATIO) {
        let msg = format!(
            "c = {c:e} exceeds delta_min/{ADMISSIBILITY_WARN_RATIO} = {:e}; off-resonant leakage will be large",
            dmin / T::lit(ADMISSIBILITY_WARN_RATIO)
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut covariance = RMatrix::<T>::zeros((d, d));
    let mut data_basis = RMatrix::<T>::zeros((d, d));
    let mut data_energies = Array1::<T>::zeros(d);
    for k in 0..n {
        for x in 0..n {
            data_basis[[k, x]] = pca.components[[k, x]];
        }
        data_energies[k] = lambdas[k];
    }
    for k in n..d {
        data_basis[[k, k]] = T::one();
    }
    for x in 0..d {
        for y in 0..d {
            let mut acc = T::zero();
            for k in 0..n {
                acc += data_energies[k] * data_basis[[k, x]] * data_basis[[k, y]];
            }
            covariance[[x, y]] = acc;
        }
    }

    Ok(QrdrHamiltonian {
        c,
        layout,
        h_lambda,
        pad_value,
        r_target,
        covariance,
        data_basis,
        data_energies,
        features: n,
        delta_min: dmin,
        warnings,
    })
}

fn columns(h: &QrdrHamiltonian<impl Real>, len: usize) -> Result<usize> {
    let b = h.layout.block_dim();
    if len == 0 || len % b != 0 {
        return Err(Error::DimensionMismatch {
            context: "QRDR state",
            expected: b * h.layout.samples,
            found: len,
        });
    }
    Ok(len / b)
}

/// Reference path: dense `e^{−i𝓗t}` on every sample column.
pub fn evolve_full_at<T: Real>(
    h: &QrdrHamiltonian<T>,
    psi: &CVector<T>,
    t: T,
) -> Result<CVector<T>> {
    let cols = columns(h, psi.len())?;
    let decomp = hermitian_eig(&h.dense_matrix())?;
    let b = h.layout.block_dim();
    let mut out = CVector::<T>::zeros(psi.len());
    for i in 0..cols {
        let col = CVector::from_shape_fn(b, |row| psi[row * cols + i]);
        let evolved = decomp.evolve(t, &col)?;
        for row in 0..b {
            out[row * cols + i] = evolved[row];
        }
    }
    Ok(out)
}

pub fn evolve_full<T: Real>(h: &QrdrHamiltonian<T>, psi: &CVector<T>) -> Result<CVector<T>> {
    evolve_full_at(h, psi, h.t())
}

/// Fast path: rotate the data register into the `v_k` basis, evolve each
/// `2^{r+1}`-dimensional sector on its own and rotate back.
pub fn evolve_blockwise_at<T: Real>(
    h: &QrdrHamiltonian<T>,
    psi: &CVector<T>,
    t: T,
) -> Result<CVector<T>> {
    let cols = columns(h, psi.len())?;
    let a = h.layout.ancilla_dim();
    let d = h.layout.data_dim();
    let pa = 2 * a;
    let block = d * cols;
    let basis = &h.data_basis;

    // coeff[pj] has row k = ⟨v_k| ψ_{pj, ·, i}⟩ over samples i
    let split = |pj: usize| {
        let slice = psi.slice(ndarray::s![pj * block..(pj + 1) * block]);
        let re = RMatrix::from_shape_fn((d, cols), |(x, i)| slice[x * cols + i].re);
        let im = RMatrix::from_shape_fn((d, cols), |(x, i)| slice[x * cols + i].im);
        (basis.dot(&re), basis.dot(&im))
    };
    let coeff: Vec<(RMatrix<T>, RMatrix<T>)> = (0..pa).into_par_iter().map(split).collect();

    let rows: Vec<Result<Vec<C<T>>>> = (0..d)
        .into_par_iter()
        .map(|k| {
            let u = h.sector_propagator(k, t)?;
            let mut row = vec![C::new(T::zero(), T::zero()); pa * cols];
            for i in 0..cols {
                for (p, up) in u.rows().into_iter().enumerate() {
                    let mut acc = C::new(T::zero(), T::zero());
                    for (q, (re, im)) in coeff.iter().enumerate() {
                        acc += up[q] * C::new(re[[k, i]], im[[k, i]]);
                    }
                    row[p * cols + i] = acc;
                }
            }
            Ok(row)
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let vt = basis.t();
    let mut out = CVector::<T>::zeros(psi.len());
    for pj in 0..pa {
        let re = RMatrix::from_shape_fn((d, cols), |(k, i)| rows[k][pj * cols + i].re);
        let im = RMatrix::from_shape_fn((d, cols), |(k, i)| rows[k][pj * cols + i].im);
        let (re, im) = (vt.dot(&re), vt.dot(&im));
        let mut dst = out.slice_mut(ndarray::s![pj * block..(pj + 1) * block]);
        for x in 0..d {
            for i in 0..cols {
                dst[x * cols + i] = C::new(re[[x, i]], im[[x, i]]);
            }
        }
    }
    Ok(out)
}

pub fn evolve_blockwise<T: Real>(h: &QrdrHamiltonian<T>, psi: &CVector<T>) -> Result<CVector<T>> {
    evolve_blockwise_at(h, psi, h.t())
}

fn check_unit(psi: &CVector<impl Real>) -> Result<()> {
    let n = norm(psi.view()).to_f64_lossy();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm: n });
    }
    Ok(())
}

/// Projects the probe (most significant qubit) onto `|1⟩` and renormalizes.
/// The returned state keeps the full dimension with the probe-0 half zeroed.
pub fn postselect_probe<T: Real>(psi: &CVector<T>) -> Result<(T, CVector<T>)> {
    if psi.len() < 2 || psi.len() % 2 != 0 {
        return Err(Error::invalid(
            "state",
            "length must be even (probe qubit first)",
        ));
    }
    check_unit(psi)?;
    let half = psi.len() / 2;
    let prob = norm_sqr(psi.slice(ndarray::s![half..]));
    if !(prob >= T::lit(POSTSELECT_MIN_PROBABILITY)) {
        return Err(Error::PostSelectionFailed {
            probability: prob.to_f64_lossy(),
        });
    }
    let scale = prob.sqrt();
    let mut out = CVector::<T>::zeros(psi.len());
    for idx in half..psi.len() {
        out[idx] = psi[idx] / scale;
    }
    Ok((prob, out))
}

/// Householder vector `u` with `(I − 2uuᵀ) v = e_0`; `None` when `v = e_0`.
fn householder_to_origin<T: Real>(v: ndarray::ArrayView1<T>) -> Option<Array1<T>> {
    let mut u = v.to_owned();
    u[0] -= T::one();
    let nrm = u.iter().map(|&a| a * a).sum::<T>().sqrt();
    if nrm <= T::epsilon() {
        None
    } else {
        Some(u.mapv(|a| a / nrm))
    }
}

/// Applies `D = Σ_{k<R} |k⟩⟨k| ⊗ W_k + Σ_{k≥R} |k⟩⟨k| ⊗ I` to the ancilla and
/// data registers, where `W_k` is a Householder reflection sending
/// `|v_k⟩ → |0^n⟩`.
pub fn disentangle<T: Real>(
    psi: &CVector<T>,
    pca: &PcaModel<T>,
    layout: &RegisterLayout,
) -> Result<CVector<T>> {
    let b = layout.block_dim();
    if psi.len() == 0 || psi.len() % b != 0 {
        return Err(Error::DimensionMismatch {
            context: "disentangle",
            expected: layout.full_dim(),
            found: psi.len(),
        });
    }
    let cols = psi.len() / b;
    let a = layout.ancilla_dim();
    let d = layout.data_dim();
    if pca.features() > d || pca.r > a {
        return Err(Error::invalid(
            "layout",
            "PCA model does not fit the register layout",
        ));
    }
    let mut out = psi.clone();
    for k in 0..pca.r {
        let mut v = Array1::<T>::zeros(d);
        for x in 0..pca.features() {
            v[x] = pca.components[[k, x]];
        }
        let Some(u) = householder_to_origin(v.view()) else {
            continue;
        };
        let two = T::lit(2.0);
        for p in 0..2 {
            let base = (p * a + k) * d;
            for i in 0..cols {
                let mut proj = C::<T>::new(T::zero(), T::zero());
                for x in 0..d {
                    proj += out[(base + x) * cols + i] * u[x];
                }
                let proj = proj * two;
                for x in 0..d {
                    out[(base + x) * cols + i] -= proj * u[x];
                }
            }
        }
    }
    Ok(out)
}

/// `1 − |⟨target|out⟩|²` for unit-norm states.
pub fn fidelity_error<T: Real>(out: &CVector<T>, target: &CVector<T>) -> Result<T> {
    if out.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "fidelity",
            expected: target.len(),
            found: out.len(),
        });
    }
    check_unit(out)?;
    check_unit(target)?;
    let ov = inner(target.view(), out.view()).norm_sqr();
    Ok((T::one() - ov).max(T::zero()).min(T::one()))
}

/// How the data matrix is scaled before the covariance enters `𝓗`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataScaling {
    /// Use `A = XᵀX` as is.
    #[default]
    Raw,
    /// Rescale `X` so the top covariance eigenvalue is 1.
    UnitTopEigenvalue,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolutionPath {
    #[default]
    Blockwise,
    Dense,
}

#[derive(Clone, Debug)]
pub struct QrdrConfig<T: Real> {
    pub r_target: usize,
    pub c: T,
    pub scaling: DataScaling,
    pub path: EvolutionPath,
}

impl<T: Real> QrdrConfig<T> {
    pub fn new(r_target: usize, c: T) -> Self {
        Self {
            r_target,
            c,
            scaling: DataScaling::Raw,
            path: EvolutionPath::Blockwise,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QrdrOutcome<T: Real> {
    pub success_probability: T,
    /// Ancilla ⊗ sample amplitudes at data = `|0^n⟩`, renormalized; index `j·M + i`.
    pub reduced_state: CVector<T>,
    /// Weight of the post-selected state on data = `|0^n⟩` before renormalizing.
    pub data_register_weight: T,
    pub epsilon: T,
    pub c_used: T,
    pub t_used: T,
    pub delta_min: T,
    pub variance_fraction: T,
    pub r_target: usize,
    pub layout: RegisterLayout,
    /// Factor applied to `X` before building `𝓗`.
    pub data_scale: T,
    pub warnings: Vec<String>,
}

/// Serializable summary of one QRDR run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    #[serde(rename = "R")]
    pub r_target: usize,
    pub r: usize,
    pub c: f64,
    pub t: f64,
    pub success_probability: f64,
    pub epsilon: f64,
    pub delta_min: f64,
    pub variance_fraction: f64,
}

impl<T: Real> QrdrOutcome<T> {
    pub fn record(&self) -> OutcomeRecord {
        OutcomeRecord {
            r_target: self.r_target,
            r: self.layout.r,
            c: self.c_used.to_f64_lossy(),
            t: self.t_used.to_f64_lossy(),
            success_probability: self.success_probability.to_f64_lossy(),
            epsilon: self.epsilon.to_f64_lossy(),
            delta_min: self.delta_min.to_f64_lossy(),
            variance_fraction: self.variance_fraction.to_f64_lossy(),
        }
    }

    /// Recovers the `M × R` reduced features from the output state: the global
    /// phase is removed and the norm is restored from the success probability,
    /// `‖Z‖ ≈ √P · ‖X‖_F` (in the original, unscaled data units).
    pub fn reduced_features(&self, x: ArrayView2<T>) -> RMatrix<T> {
        let m = self.layout.samples;
        let r = self.r_target;
        let sum_sq: C<T> = self.reduced_state.iter().map(|z| z * z).sum();
        let half_phase = if sum_sq.norm() > T::zero() {
            sum_sq.arg() / T::lit(2.0)
        } else {
            T::zero()
        };
        let rot = C::new(half_phase.cos(), -half_phase.sin());
        let fro = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        let scale = self.success_probability.sqrt() * fro;
        RMatrix::from_shape_fn((m, r), |(i, j)| {
            (self.reduced_state[j * m + i] * rot).re * scale
        })
    }
}

pub fn run_qrdr<T: Real>(x: ArrayView2<T>, r_target: usize, c: T) -> Result<QrdrOutcome<T>> {
    run_qrdr_with(x, &QrdrConfig::new(r_target, c))
}

pub fn run_qrdr_with<T: Real>(x: ArrayView2<T>, cfg: &QrdrConfig<T>) -> Result<QrdrOutcome<T>> {
    let (m, n) = x.dim();
    let layout = RegisterLayout::for_problem(n, cfg.r_target, m)?;
    let mut pca = fit_pca(x, cfg.r_target)?;
    let mut data_scale = T::one();
    let scaled;
    let xs = match cfg.scaling {
        DataScaling::Raw => x,
        DataScaling::UnitTopEigenvalue => {
            let top = pca.eigenvalues[0];
            if !(top > T::zero()) {
                return Err(Error::invalid("data matrix", "zero covariance"));
            }
            data_scale = T::one() / top.sqrt();
            scaled = x.mapv(|v| v * data_scale);
            pca = fit_pca(scaled.view(), cfg.r_target)?;
            scaled.view()
        }
    };
    run_with_model(xs, &pca, layout, cfg, data_scale)
}

/// Runs the pipeline against an already fitted PCA model of `x`.
pub fn run_with_model<T: Real>(
    x: ArrayView2<T>,
    pca: &PcaModel<T>,
    layout: RegisterLayout,
    cfg: &QrdrConfig<T>,
    data_scale: T,
) -> Result<QrdrOutcome<T>> {
    let ham = build_hamiltonian(pca, layout, cfg.c)?;
    let psi = initial_state(x, &layout)?;
    let evolved = match cfg.path {
        EvolutionPath::Blockwise => evolve_blockwise(&ham, &psi)?,
        EvolutionPath::Dense => evolve_full(&ham, &psi)?,
    };
    let (prob, collapsed) = postselect_probe(&evolved)?;
    let out = disentangle(&collapsed, pca, &layout)?;

    let z = project(x, pca)?;
    let target = target_state(&z)?;
    let m = layout.samples;
    let a = layout.ancilla_dim();
    let mut embedded = CVector::<T>::zeros(out.len());
    let mut slice = CVector::<T>::zeros(a * m);
    for j in 0..a {
        for i in 0..m {
            let idx = layout.index(1, j, 0, i);
            embedded[idx] = target[j * m + i];
            slice[j * m + i] = out[idx];
        }
    }
    let epsilon = fidelity_error(&out, &embedded)?;
    let weight = norm_sqr(slice.view());
    let reduced_state = if weight > T::zero() {
        slice.mapv(|z| z / weight.sqrt())
    } else {
        slice
    };

    Ok(QrdrOutcome {
        success_probability: prob,
        reduced_state,
        data_register_weight: weight,
        epsilon,
        c_used: cfg.c,
        t_used: ham.t(),
        delta_min: ham.delta_min,
        variance_fraction: pca.variance_fraction,
        r_target: pca.r,
        layout,
        data_scale,
        warnings: ham.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> RMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RMatrix::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0))
    }

    fn hamiltonian(x: &RMatrix<f64>, r: usize, frac: f64) -> QrdrHamiltonian<f64> {
        let pca = fit_pca(x.view(), r).unwrap();
        let layout = RegisterLayout::for_problem(x.ncols(), r, x.nrows()).unwrap();
        let probe = build_hamiltonian(&pca, layout, 1e-9).unwrap();
        build_hamiltonian(&pca, layout, probe.delta_min * frac).unwrap()
    }

    #[test]
    fn layout_counts() {
        let l = RegisterLayout::for_problem(60, 16, 208).unwrap();
        assert_eq!((l.r, l.n), (4, 6));
        assert_eq!(l.block_dim(), 2 * 16 * 64);
        let l = RegisterLayout::for_problem(8, 3, 1).unwrap();
        assert_eq!((l.r, l.n), (2, 3));
        assert!(RegisterLayout::for_problem(4, 5, 1).is_err());
    }

    #[test]
    fn encode_examples() {
        let mut x = RMatrix::<f64>::zeros((1, 4));
        x[[0, 2]] = 1.0;
        let s = encode_dataset_state(x.view()).unwrap();
        assert_eq!(s[2], creal(1.0));
        assert!(encode_dataset_state(RMatrix::<f64>::zeros((2, 2)).view()).is_err());

        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let f = 30f64.sqrt();
        let s = encode_dataset_state(x.view()).unwrap();
        let flat: Vec<f64> = x.t().iter().map(|v| v / f).collect();
        for (a, b) in s.iter().zip(flat) {
            assert!((a.re - b).abs() < 1e-15);
        }
    }

    #[test]
    fn vacuum_sector_and_coupling_elements() {
        let x = random(6, 4, 1);
        let h = hamiltonian(&x, 2, 0.01);
        let dense = h.dense_matrix();
        let l = h.layout;
        let dim = l.block_dim();
        let idx = |p, j, d| (p * l.ancilla_dim() + j) * l.data_dim() + d;
        let pca = fit_pca(x.view(), 2).unwrap();
        // the probe-0 vacuum |0,0,v⟩ only couples through σ_y ⊗ B
        let mut state = CVector::<f64>::zeros(dim);
        for d in 0..4 {
            state[idx(0, 0, d)] = creal(pca.components[[0, d]]);
        }
        let hv = dense.apply(&state).unwrap();
        for j in 0..l.ancilla_dim() {
            for d in 0..4 {
                assert!(hv[idx(0, j, d)].norm() < 1e-12);
            }
        }
        // ⟨0^r|B|j⟩ = 1
        for j in 0..l.ancilla_dim() {
            assert_eq!(coupling_sign(0, j), 1.0);
        }
        // ⟨1,j,v_j| 𝓗 |0,0,v_k⟩ = i·cπ/2·δ_jk in the eigenbasis
        let g = h.c * std::f64::consts::PI / 2.0;
        for k in 0..2 {
            let mut src = CVector::<f64>::zeros(dim);
            for d in 0..4 {
                src[idx(0, 0, d)] = creal(pca.components[[k, d]]);
            }
            let hs = dense.apply(&src).unwrap();
            for j in 0..2 {
                let mut dst = CVector::<f64>::zeros(dim);
                for d in 0..4 {
                    dst[idx(1, j, d)] = creal(pca.components[[j, d]]);
                }
                let elem = inner(dst.view(), hs.view());
                let want = if j == k { g } else { 0.0 };
                assert!((elem.norm() - want).abs() < 1e-12, "j={j} k={k}");
                if j == k {
                    assert!((elem - cplx(0.0, g)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_c_and_degenerate_spectra() {
        let x = random(6, 4, 2);
        let pca = fit_pca(x.view(), 2).unwrap();
        let l = RegisterLayout::for_problem(4, 2, 6).unwrap();
        assert!(build_hamiltonian(&pca, l, 0.0).is_err());
        let dmin = build_hamiltonian(&pca, l, 1e-9).unwrap().delta_min;
        assert!(matches!(
            build_hamiltonian(&pca, l, dmin * 1.01),
            Err(Error::Inadmissible { .. })
        ));
        let warned = build_hamiltonian(&pca, l, dmin * 0.5).unwrap();
        assert_eq!(warned.warnings.len(), 1);

        let iso = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        let pca = fit_pca(iso.view(), 2).unwrap();
        let l = RegisterLayout::for_problem(3, 2, 3).unwrap();
        assert!(matches!(
            build_hamiltonian(&pca, l, 1e-3),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn blockwise_matches_dense() {
        for (m, n, r, seed) in [(3, 4, 2, 1), (10, 8, 4, 2), (4, 5, 3, 3), (1, 8, 1, 4)] {
            let x = random(m, n, seed);
            let h = hamiltonian(&x, r, 0.05);
            let psi = initial_state(x.view(), &h.layout).unwrap();
            let a = evolve_full(&h, &psi).unwrap();
            let b = evolve_blockwise(&h, &psi).unwrap();
            assert!(
                max_abs_diff(a.view(), b.view()) <= 1e-10,
                "case {m}x{n} R={r}"
            );
            assert!((norm(b.view()) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sector_confinement() {
        let x = random(5, 4, 7);
        let h = hamiltonian(&x, 2, 0.05);
        let l = h.layout;
        let mut psi = CVector::<f64>::zeros(l.block_dim());
        let k = 2;
        for d in 0..4 {
            psi[(l.ancilla_dim() + 1) * l.data_dim() + d] = creal(h.data_basis[[k, d]]);
        }
        let out = evolve_blockwise(&h, &psi).unwrap();
        // weight outside span{|p,j⟩|v_k⟩} vanishes
        let mut inside = 0.0;
        for pj in 0..2 * l.ancilla_dim() {
            let amp: C<f64> = (0..4)
                .map(|d| out[pj * l.data_dim() + d] * h.data_basis[[k, d]])
                .sum();
            inside += amp.norm_sqr();
        }
        assert!((inside - 1.0).abs() < 1e-12);
    }

    #[test]
    fn postselection_examples() {
        let phi = array![creal(0.6), cplx(0.0, 0.8)];
        let mut psi = CVector::<f64>::zeros(4);
        psi[2] = phi[0];
        psi[3] = phi[1];
        let (p, out) = postselect_probe(&psi).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(max_abs_diff(out.view(), psi.view()) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = array![phi[0] * s, phi[1] * s, phi[0] * s, phi[1] * s];
        let (p, out) = postselect_probe(&psi).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let want = array![creal(0.0), creal(0.0), phi[0], phi[1]];
        assert!(max_abs_diff(out.view(), want.view()) < 1e-15);

        let psi = array![creal(1.0), creal(0.0), creal(0.0), creal(0.0)];
        assert!(matches!(
            postselect_probe(&psi),
            Err(Error::PostSelectionFailed { .. })
        ));
        let psi = array![creal(2.0), creal(0.0), creal(0.0), creal(0.0)];
        assert!(matches!(
            postselect_probe(&psi),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn disentangle_maps_eigenvectors_to_origin() {
        let x = random(5, 4, 9);
        let pca = fit_pca(x.view(), 2).unwrap();
        let l = RegisterLayout::for_problem(4, 2, 1).unwrap();
        for k in 0..2 {
            let mut psi = CVector::<f64>::zeros(l.block_dim());
            for d in 0..4 {
                psi[l.index(1, k, d, 0)] = creal(pca.components[[k, d]]);
            }
            let out = disentangle(&psi, &pca, &l).unwrap();
            let mut want = CVector::<f64>::zeros(l.block_dim());
            want[l.index(1, k, 0, 0)] = creal(1.0);
            assert!(max_abs_diff(out.view(), want.view()) < 1e-12);
        }
        // v_k = e_0 leaves the state alone
        let x = array![[3.0, 0.0], [0.0, 1.0]];
        let pca = fit_pca(x.view(), 1).unwrap();
        let l = RegisterLayout::for_problem(2, 1, 1).unwrap();
        let mut psi = CVector::<f64>::zeros(l.block_dim());
        psi[l.index(1, 0, 0, 0)] = creal(0.6);
        psi[l.index(1, 0, 1, 0)] = creal(0.8);
        let out = disentangle(&psi, &pca, &l).unwrap();
        assert!(max_abs_diff(out.view(), psi.view()) < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let a = array![creal(0.6_f64), cplx(0.0, 0.8)];
        assert!(fidelity_error(&a, &a).unwrap().abs() < 1e-15);
        let orth = array![creal(0.8), cplx(0.0, -0.6)];
        assert!((inner(a.view(), orth.view())).norm() < 1e-15);
        assert!((fidelity_error(&a, &orth).unwrap() - 1.0).abs() < 1e-15);
        let phased = a.mapv(|z| z * crate::scalar::cis(0.7));
        assert!(fidelity_error(&phased, &a).unwrap().abs() < 1e-15);
        assert!(fidelity_error(&a.mapv(|z| z * 2.0), &a).is_err());
    }

    #[test]
    fn exactly_compressible_data() {
        // rank-2 data in 4 features
        let basis = array![[1.0_f64, 2.0, 0.0, -1.0], [0.0, 1.0, 3.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coef = RMatrix::from_shape_fn((8, 2), |_| rng.random_range(-1.0..1.0));
        let x = coef.dot(&basis);
        let pca = fit_pca(x.view(), 2).unwrap();
        let l = RegisterLayout::for_problem(4, 2, 8).unwrap();
        // zero eigenvalues of the discarded block are degenerate but outside R
        let dmin = build_hamiltonian(&pca, l, 1e-9).unwrap().delta_min;
        let out = run_qrdr(x.view(), 2, dmin * 1e-4).unwrap();
        assert!(out.epsilon <= 1e-4, "eps {}", out.epsilon);
        assert!(out.success_probability >= 0.999);
        let z = project(x.view(), &pca).unwrap();
        let feats = out.reduced_features(x.view());
        for (&a, &b) in feats.iter().zip(z.z.iter()) {
            assert!((a.abs() - b.abs()).abs() < 1e-2 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn samples_factor_out() {
        let x = random(4, 4, 13);
        let h = hamiltonian(&x, 2, 0.05);
        let psi = initial_state(x.view(), &h.layout).unwrap();
        let joint = evolve_blockwise(&h, &psi).unwrap();
        let b = h.layout.block_dim();
        for i in 0..4 {
            let col = CVector::from_shape_fn(b, |row| psi[row * 4 + i]);
            let single = evolve_blockwise(&h, &col).unwrap();
            for row in 0..b {
                assert!((single[row] - joint[row * 4 + i]).norm() <= 1e-10);
            }
        }
    }
}
