//! LCU-based quantum convolutional classifier.
//!
//! One stage maps a state over `q` data qubits to a density operator over
//! `q/2` qubits: a 4-qubit ancilla prepared by the ansatz `S(θ)` selects among
//! the nine shift products `Q_k = E_{a+1} ⊗ E_{b+1}` (`k = 3a + b`), the
//! ancilla is post-selected on `|0000⟩`, and the second half of the data
//! qubits is traced out. With `α = S(θ)|0000⟩` the post-selected branch is
//! `Σ_m |α_m|² Q_m |z⟩`, renormalized. The final density operator is read
//! out through `H = h⁰ + Σ hⁱ Zᵢ + Σ hⁱʲ ZᵢZⱼ`.

pub mod experiment;
pub mod mlp;
pub mod train;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, RMatrix};
use crate::rng;
use crate::scalar::{cplx, creal, Real, C};

pub use train::{
    evaluate, fit, Adam, EpochRecord, GradientMethod, History, Labeled, TrainConfig, Trainable,
};

pub const ANSATZ_PARAMS: usize = 28;
pub const ANCILLA_QUBITS: usize = 4;
pub const ANCILLA_DIM: usize = 16;
/// Ancilla indices below this select a shift product; the rest select `I`.
pub const BRANCHES: usize = 9;
pub const POSTSELECT_MIN_PROBABILITY: f64 = 1e-12;
const ANSATZ_LAYERS: usize = 3;
const INIT_STREAM: u64 = 0x7163_6e6e;

/// Cyclic increment `E₁` on `r_half` qubits: `E₁|j⟩ = |j + 1 mod 2^r_half⟩`.
pub fn shift_operator<T: Real>(r_half: usize) -> RMatrix<T> {
    let dim = 1usize << r_half;
    let mut e = RMatrix::<T>::zeros((dim, dim));
    for j in 0..dim {
        e[[(j + 1) % dim, j]] = T::one();
    }
    e
}

/// Offsets applied to the two halves by branch `k`: `E₁ → +1`, `E₂ → 0`, `E₃ → −1`.
fn branch_shifts(k: usize) -> Option<(isize, isize)> {
    if k >= BRANCHES {
        return None;
    }
    let off = |a: usize| 1 - a as isize;
    Some((off(k / 3), off(k % 3)))
}

/// `Q_k |z⟩` for a state over `qubits` data qubits (identity for `k ≥ 9`).
pub fn apply_branch<T: Real>(k: usize, state: &CVector<T>, qubits: usize) -> CVector<T> {
    let Some((sa, sb)) = branch_shifts(k) else {
        return state.clone();
    };
    let half = 1usize << (qubits / 2);
    let wrap = |x: usize, s: isize| ((x as isize + s).rem_euclid(half as isize)) as usize;
    let mut out = CVector::<T>::zeros(state.len());
    for a in 0..half {
        for b in 0..half {
            out[wrap(a, sa) * half + wrap(b, sb)] = state[a * half + b];
        }
    }
    out
}

/// Dense permutation matrix of `Q_k` on `qubits` data qubits.
pub fn branch_matrix<T: Real>(k: usize, qubits: usize) -> RMatrix<T> {
    let dim = 1usize << qubits;
    let mut m = RMatrix::<T>::zeros((dim, dim));
    for col in 0..dim {
        let mut e = CVector::<T>::zeros(dim);
        e[col] = creal(T::one());
        let out = apply_branch(k, &e, qubits);
        for row in 0..dim {
            m[[row, col]] = out[row].re;
        }
    }
    m
}

type Gate<T> = [[C<T>; 2]; 2];

fn ry<T: Real>(theta: T) -> Gate<T> {
    let (s, c) = (theta / T::lit(2.0)).sin_cos();
    [[creal(c), creal(-s)], [creal(s), creal(c)]]
}

fn rz<T: Real>(theta: T) -> Gate<T> {
    let (s, c) = (theta / T::lit(2.0)).sin_cos();
    let zero = creal(T::zero());
    [[cplx(c, -s), zero], [zero, cplx(c, s)]]
}

fn apply_1q<T: Real>(state: &mut CVector<T>, qubit: usize, g: &Gate<T>) {
    let bit = 1usize << (ANCILLA_QUBITS - 1 - qubit);
    for i in 0..state.len() {
        if i & bit == 0 {
            let a = state[i];
            let b = state[i | bit];
            state[i] = g[0][0] * a + g[0][1] * b;
            state[i | bit] = g[1][0] * a + g[1][1] * b;
        }
    }
}

fn apply_cnot<T: Real>(state: &mut CVector<T>, control: usize, target: usize) {
    let cb = 1usize << (ANCILLA_QUBITS - 1 - control);
    let tb = 1usize << (ANCILLA_QUBITS - 1 - target);
    for i in 0..state.len() {
        if i & cb != 0 && i & tb == 0 {
            state.swap(i, i | tb);
        }
    }
}

/// `S(θ)|0000⟩`: three layers of `Ry, Rz` on every qubit followed by a CNOT
/// ring, then a final `Ry` on every qubit.
pub fn prepare_ansatz<T: Real>(theta: &[T]) -> Result<CVector<T>> {
    if theta.len() != ANSATZ_PARAMS {
        return Err(Error::DimensionMismatch {
            context: "ansatz parameters",
            expected: ANSATZ_PARAMS,
            found: theta.len(),
        });
    }
    let mut s = CVector::<T>::zeros(ANCILLA_DIM);
    s[0] = creal(T::one());
    for layer in 0..ANSATZ_LAYERS {
        for q in 0..ANCILLA_QUBITS {
            let base = layer * 2 * ANCILLA_QUBITS + 2 * q;
            apply_1q(&mut s, q, &ry(theta[base]));
            apply_1q(&mut s, q, &rz(theta[base + 1]));
        }
        for q in 0..ANCILLA_QUBITS {
            apply_cnot(&mut s, q, (q + 1) % ANCILLA_QUBITS);
        }
    }
    for q in 0..ANCILLA_QUBITS {
        apply_1q(
            &mut s,
            q,
            &ry(theta[ANSATZ_LAYERS * 2 * ANCILLA_QUBITS + q]),
        );
    }
    Ok(s)
}

/// `∂ S(θ)|0⟩ / ∂θ_i` for every parameter, exact because each gate is
/// `e^{−iθP/2}`: the derivative is `(ψ(θ + π e_i) − ψ(θ − π e_i)) / 4`.
pub fn ansatz_gradient<T: Real>(theta: &[T]) -> Result<Vec<CVector<T>>> {
    let mut out = Vec::with_capacity(theta.len());
    let mut t = theta.to_vec();
    for i in 0..theta.len() {
        t[i] = theta[i] + T::PI();
        let plus = prepare_ansatz(&t)?;
        t[i] = theta[i] - T::PI();
        let minus = prepare_ansatz(&t)?;
        t[i] = theta[i];
        out.push((plus - minus).mapv(|z| z / T::lit(4.0)));
    }
    Ok(out)
}

/// Branch weights `|α_m|²`.
pub fn lcu_weights<T: Real>(ancilla: &CVector<T>) -> Result<[T; ANCILLA_DIM]> {
    if ancilla.len() != ANCILLA_DIM {
        return Err(Error::DimensionMismatch {
            context: "LCU ancilla",
            expected: ANCILLA_DIM,
            found: ancilla.len(),
        });
    }
    let mut w = [T::zero(); ANCILLA_DIM];
    for (m, a) in ancilla.iter().enumerate() {
        w[m] = a.norm_sqr();
    }
    Ok(w)
}

/// Unnormalized post-selected branch `Σ_m w_m Q_m |z⟩`.
fn combine<T: Real>(weights: &[T; ANCILLA_DIM], state: &CVector<T>, qubits: usize) -> CVector<T> {
    let mut out = CVector::<T>::zeros(state.len());
    let mut identity = T::zero();
    for (m, &w) in weights.iter().enumerate() {
        if m >= BRANCHES || m == 4 {
            identity += w;
        } else if w != T::zero() {
            out += &apply_branch(m, state, qubits).mapv(|z| z * w);
        }
    }
    out + state.mapv(|z| z * identity)
}

fn check_qubits(qubits: usize, len: usize) -> Result<()> {
    if qubits == 0 || qubits % 2 != 0 {
        return Err(Error::invalid(
            "qubits",
            format!("{qubits} is not a positive even count"),
        ));
    }
    if len != 1 << qubits {
        return Err(Error::DimensionMismatch {
            context: "data register",
            expected: 1 << qubits,
            found: len,
        });
    }
    Ok(())
}

/// Prepare–select–unprepare with post-selection on ancilla `|0000⟩`.
pub fn conv_lcu<T: Real>(state: &CVector<T>, ancilla: &CVector<T>) -> Result<(T, CVector<T>)> {
    let qubits = state.len().trailing_zeros() as usize;
    check_qubits(qubits, state.len())?;
    let w = lcu_weights(ancilla)?;
    let out = combine(&w, state, qubits);
    let prob = out.iter().map(|z| z.norm_sqr()).sum::<T>();
    if !(prob >= T::lit(POSTSELECT_MIN_PROBABILITY)) {
        return Err(Error::PostSelectionFailed {
            probability: prob.to_f64_lossy(),
        });
    }
    log::trace!("LCU post-selection probability {prob}");
    let s = prob.sqrt();
    Ok((prob, out.mapv(|z| z / s)))
}

/// Partial trace over the second half of the qubits of a pure state.
pub fn pool_discard<T: Real>(state: &CVector<T>) -> Result<CMatrix<T>> {
    let qubits = state.len().trailing_zeros() as usize;
    check_qubits(qubits, state.len())?;
    let keep = 1usize << (qubits / 2);
    let drop = state.len() / keep;
    let mut rho = CMatrix::<T>::zeros((keep, keep));
    for a in 0..keep {
        for ap in 0..keep {
            let mut acc = creal(T::zero());
            for b in 0..drop {
                acc += state[a * drop + b] * state[ap * drop + b].conj();
            }
            rho[[a, ap]] = acc;
        }
    }
    Ok(rho)
}

/// Partial trace over the second half of the qubits of a density operator.
pub fn pool_density<T: Real>(rho: &CMatrix<T>) -> Result<CMatrix<T>> {
    let qubits = rho.nrows().trailing_zeros() as usize;
    check_qubits(qubits, rho.nrows())?;
    let keep = 1usize << (qubits / 2);
    let drop = rho.nrows() / keep;
    let mut out = CMatrix::<T>::zeros((keep, keep));
    for a in 0..keep {
        for ap in 0..keep {
            let mut acc = creal(T::zero());
            for b in 0..drop {
                acc += rho[[a * drop + b, ap * drop + b]];
            }
            out[[a, ap]] = acc;
        }
    }
    Ok(out)
}

/// Coefficients of `H = h⁰ + Σ hⁱ Zᵢ + Σ_{i<j} hⁱʲ ZᵢZⱼ`; pairs in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout<T> {
    pub h0: T,
    pub h1: Vec<T>,
    pub h2: Vec<T>,
}

impl<T: Real> Readout<T> {
    pub fn zeros(qubits: usize) -> Self {
        Self {
            h0: T::zero(),
            h1: vec![T::zero(); qubits],
            h2: vec![T::zero(); qubits * qubits.saturating_sub(1) / 2],
        }
    }

    pub fn qubits(&self) -> usize {
        self.h1.len()
    }

    pub fn len(&self) -> usize {
        1 + self.h1.len() + self.h2.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Values of `(1, Zᵢ, ZᵢZⱼ)` on basis state `x`, in parameter order.
    pub fn features(&self, x: usize) -> Vec<T> {
        let q = self.qubits();
        let z: Vec<T> = (0..q)
            .map(|i| {
                if (x >> (q - 1 - i)) & 1 == 0 {
                    T::one()
                } else {
                    -T::one()
                }
            })
            .collect();
        let mut f = Vec::with_capacity(self.len());
        f.push(T::one());
        f.extend_from_slice(&z);
        for i in 0..q {
            for j in i + 1..q {
                f.push(z[i] * z[j]);
            }
        }
        f
    }

    /// Diagonal of `H` in the computational basis.
    pub fn diagonal(&self) -> Vec<T> {
        let p = self.parameters();
        (0..1usize << self.qubits())
            .map(|x| self.features(x).iter().zip(&p).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn parameters(&self) -> Vec<T> {
        let mut p = vec![self.h0];
        p.extend_from_slice(&self.h1);
        p.extend_from_slice(&self.h2);
        p
    }

    fn set_parameters(&mut self, p: &[T]) {
        let q = self.h1.len();
        self.h0 = p[0];
        self.h1.copy_from_slice(&p[1..1 + q]);
        self.h2.copy_from_slice(&p[1 + q..]);
    }
}

/// `Tr(ρH)`; every term of `H` is diagonal.
pub fn readout_expectation<T: Real>(rho: &CMatrix<T>, readout: &Readout<T>) -> Result<T> {
    let dim = 1usize << readout.qubits();
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "readout density operator",
            expected: dim,
            found: rho.nrows(),
        });
    }
    Ok(readout
        .diagonal()
        .iter()
        .enumerate()
        .map(|(x, &d)| rho[[x, x]].re * d)
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcnnModel<T> {
    pub data_qubits: usize,
    /// One ansatz parameter vector per convolution stage.
    pub thetas: Vec<Vec<T>>,
    pub readout: Readout<T>,
}

/// Intermediate values of one forward pass, kept for the analytic backward pass.
enum StageTrace<T: Real> {
    Pure {
        input: CVector<T>,
        branch: CVector<T>,
        tau: T,
        qubits: usize,
    },
    Mixed {
        input: CMatrix<T>,
        lcu: CMatrix<T>,
        sigma: CMatrix<T>,
        tau: T,
        qubits: usize,
    },
}

fn cmatmul<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    crate::linalg::matmul(a.view(), b.view())
}

fn dagger<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    crate::linalg::adjoint(a.view())
}

fn lcu_matrix<T: Real>(weights: &[T; ANCILLA_DIM], qubits: usize) -> CMatrix<T> {
    let dim = 1usize << qubits;
    let mut l = CMatrix::<T>::zeros((dim, dim));
    for (m, &w) in weights.iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        let q = branch_matrix::<T>(m, qubits);
        for i in 0..dim {
            for j in 0..dim {
                if q[[i, j]] != T::zero() {
                    l[[i, j]] += creal(w);
                }
            }
        }
    }
    l
}

/// `G ⊗ I` applied to a vector whose first-half index is the slow one.
fn lift_apply<T: Real>(g: &CMatrix<T>, v: &CVector<T>) -> CVector<T> {
    let keep = g.nrows();
    let drop = v.len() / keep;
    let mut out = CVector::<T>::zeros(v.len());
    for a in 0..keep {
        for ap in 0..keep {
            let gaa = g[[a, ap]];
            if gaa.re == T::zero() && gaa.im == T::zero() {
                continue;
            }
            for b in 0..drop {
                out[a * drop + b] += gaa * v[ap * drop + b];
            }
        }
    }
    out
}

fn lift<T: Real>(g: &CMatrix<T>, drop: usize) -> CMatrix<T> {
    let keep = g.nrows();
    let dim = keep * drop;
    let mut out = CMatrix::<T>::zeros((dim, dim));
    for a in 0..keep {
        for ap in 0..keep {
            for b in 0..drop {
                out[[a * drop + b, ap * drop + b]] = g[[a, ap]];
            }
        }
    }
    out
}

fn trace_product<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> C<T> {
    let n = a.nrows();
    let mut acc = creal(T::zero());
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

impl<T: Real> QcnnModel<T> {
    /// Random ansatz angles in `[−π, π)` and readout coefficients in `[−1, 1)`.
    pub fn new(data_qubits: usize, stages: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        let readout_qubits = Self::readout_qubits_for(data_qubits, stages)?;
        let mut r = rng::seeded(seed, INIT_STREAM);
        let thetas = (0..stages)
            .map(|_| {
                (0..ANSATZ_PARAMS)
                    .map(|_| T::lit(r.random_range(-std::f64::consts::PI..std::f64::consts::PI)))
                    .collect()
            })
            .collect();
        let mut readout = Readout::zeros(readout_qubits);
        let p: Vec<T> = (0..readout.len())
            .map(|_| T::lit(r.random_range(-1.0..1.0)))
            .collect();
        readout.set_parameters(&p);
        Ok(Self {
            data_qubits,
            thetas,
            readout,
        })
    }

    pub fn readout_qubits_for(data_qubits: usize, stages: usize) -> Result<usize> {
        if stages == 0 {
            return Err(Error::invalid(
                "layers",
                "need at least one convolution stage",
            ));
        }
        let mut q = data_qubits;
        for s in 0..stages {
            if q < 2 || q % 2 != 0 {
                return Err(Error::invalid(
                    "layers",
                    format!(
                        "stage {s} would act on {q} qubits; every stage needs an even count >= 2"
                    ),
                ));
            }
            q /= 2;
        }
        Ok(q)
    }

    pub fn stages(&self) -> usize {
        self.thetas.len()
    }

    pub fn rotation_count(&self) -> usize {
        self.stages() * ANSATZ_PARAMS
    }

    pub fn stage_weights(&self) -> Result<Vec<[T; ANCILLA_DIM]>> {
        self.thetas
            .iter()
            .map(|t| lcu_weights(&prepare_ansatz(t)?))
            .collect()
    }

    fn check_input(&self, state: &CVector<T>) -> Result<()> {
        if state.len() != 1 << self.data_qubits {
            return Err(Error::DimensionMismatch {
                context: "QCNN input state",
                expected: 1 << self.data_qubits,
                found: state.len(),
            });
        }
        Ok(())
    }

    fn forward_traced(
        &self,
        weights: &[[T; ANCILLA_DIM]],
        state: &CVector<T>,
    ) -> Result<(T, CMatrix<T>, Vec<StageTrace<T>>)> {
        self.check_input(state)?;
        let min = T::lit(POSTSELECT_MIN_PROBABILITY);
        let mut traces = Vec::with_capacity(weights.len());
        let q0 = self.data_qubits;
        let branch = combine(&weights[0], state, q0);
        let tau = branch.iter().map(|z| z.norm_sqr()).sum::<T>();
        if !(tau >= min) {
            return Err(Error::PostSelectionFailed {
                probability: tau.to_f64_lossy(),
            });
        }
        let mut rho = pool_discard(&branch.mapv(|z| z / tau.sqrt()))?;
        traces.push(StageTrace::Pure {
            input: state.clone(),
            branch,
            tau,
            qubits: q0,
        });
        let mut q = q0 / 2;
        for w in &weights[1..] {
            let lcu = lcu_matrix(w, q);
            let sigma = cmatmul(&cmatmul(&lcu, &rho), &dagger(&lcu));
            let tau = (0..sigma.nrows()).map(|i| sigma[[i, i]].re).sum::<T>();
            if !(tau >= min) {
                return Err(Error::PostSelectionFailed {
                    probability: tau.to_f64_lossy(),
                });
            }
            let next = pool_density(&sigma.mapv(|z| z / tau))?;
            traces.push(StageTrace::Mixed {
                input: rho,
                lcu,
                sigma,
                tau,
                qubits: q,
            });
            rho = next;
            q /= 2;
        }
        let e = readout_expectation(&rho, &self.readout)?;
        Ok((e, rho, traces))
    }

    /// Readout expectation `e` for one input state.
    pub fn logit_with(&self, weights: &[[T; ANCILLA_DIM]], state: &CVector<T>) -> Result<T> {
        Ok(self.forward_traced(weights, state)?.0)
    }

    pub fn expectation(&self, state: &CVector<T>) -> Result<T> {
        self.logit_with(&self.stage_weights()?, state)
    }

    /// `∂e/∂w` for every stage's branch weights and `∂e/∂h` for the readout.
    fn backward(
        &self,
        weights: &[[T; ANCILLA_DIM]],
        state: &CVector<T>,
    ) -> Result<(T, Vec<[T; ANCILLA_DIM]>, Vec<T>)> {
        let (e, rho, traces) = self.forward_traced(weights, state)?;
        let dim = rho.nrows();
        let mut readout_grad = vec![T::zero(); self.readout.len()];
        for x in 0..dim {
            let px = rho[[x, x]].re;
            for (g, f) in readout_grad.iter_mut().zip(self.readout.features(x)) {
                *g += px * f;
            }
        }
        let diag = self.readout.diagonal();
        let mut g = CMatrix::<T>::zeros((dim, dim));
        for (x, &d) in diag.iter().enumerate() {
            g[[x, x]] = creal(d);
        }
        let mut dweights = vec![[T::zero(); ANCILLA_DIM]; traces.len()];
        let two = T::lit(2.0);
        for (s, tr) in traces.iter().enumerate().rev() {
            match tr {
                StageTrace::Pure {
                    input,
                    branch,
                    tau,
                    qubits,
                } => {
                    let gb = lift_apply(&g, branch);
                    let ep = branch
                        .iter()
                        .zip(gb.iter())
                        .map(|(a, b)| (a.conj() * b).re)
                        .sum::<T>()
                        / *tau;
                    // Gσ w-side vector: (G' − e' I) w / τ, conjugated inner product below
                    let left: CVector<T> = (&gb - &branch.mapv(|z| z * ep)).mapv(|z| z / *tau);
                    let mut identity_grad = T::zero();
                    {
                        let v: C<T> = left
                            .iter()
                            .zip(input.iter())
                            .map(|(l, x)| l.conj() * x)
                            .sum();
                        identity_grad = identity_grad + two * v.re;
                    }
                    for m in 0..ANCILLA_DIM {
                        dweights[s][m] = if m >= BRANCHES || m == 4 {
                            identity_grad
                        } else {
                            let qz = apply_branch(m, input, *qubits);
                            let v: C<T> =
                                left.iter().zip(qz.iter()).map(|(l, x)| l.conj() * x).sum();
                            two * v.re
                        };
                    }
                }
                StageTrace::Mixed {
                    input,
                    lcu,
                    sigma,
                    tau,
                    qubits,
                } => {
                    let drop = (1usize << qubits) / g.nrows();
                    let gl = lift(&g, drop);
                    let rho_p = sigma.mapv(|z| z / *tau);
                    let ep = trace_product(&gl, &rho_p).re;
                    let mut gs = gl;
                    for i in 0..gs.nrows() {
                        gs[[i, i]] -= creal(ep);
                    }
                    let gs = gs.mapv(|z| z / *tau);
                    let rho_ldag = cmatmul(input, &dagger(lcu));
                    for m in 0..ANCILLA_DIM {
                        let q = branch_matrix::<T>(m, *qubits).mapv(creal);
                        let t = trace_product(&cmatmul(&gs, &q), &rho_ldag);
                        dweights[s][m] = two * t.re;
                    }
                    g = cmatmul(&cmatmul(&dagger(lcu), &gs), lcu);
                }
            }
        }
        Ok((e, dweights, readout_grad))
    }

    /// `∂e/∂θ` through branch weights (two-term shift per weight) and the
    /// readout gradient, for one input.
    pub fn shift_gradient(&self, state: &CVector<T>) -> Result<(T, Vec<T>)> {
        let weights = self.stage_weights()?;
        let shifts = self.weight_shift_jacobian()?;
        let (e, dw, dh) = self.backward(&weights, state)?;
        Ok((e, self.assemble(&shifts, &dw, &dh)))
    }

    /// `∂w_m/∂θ_i` per stage, exact from `(w(θ + π/2) − w(θ − π/2)) / 2`.
    pub fn weight_shift_jacobian(&self) -> Result<Vec<Vec<[T; ANCILLA_DIM]>>> {
        let half_pi = T::FRAC_PI_2();
        self.thetas
            .iter()
            .map(|theta| {
                let mut t = theta.clone();
                (0..ANSATZ_PARAMS)
                    .map(|i| {
                        t[i] = theta[i] + half_pi;
                        let plus = lcu_weights(&prepare_ansatz(&t)?)?;
                        t[i] = theta[i] - half_pi;
                        let minus = lcu_weights(&prepare_ansatz(&t)?)?;
                        t[i] = theta[i];
                        let mut d = [T::zero(); ANCILLA_DIM];
                        for m in 0..ANCILLA_DIM {
                            d[m] = (plus[m] - minus[m]) / T::lit(2.0);
                        }
                        Ok(d)
                    })
                    .collect()
            })
            .collect()
    }

    fn assemble(
        &self,
        shifts: &[Vec<[T; ANCILLA_DIM]>],
        dw: &[[T; ANCILLA_DIM]],
        dh: &[T],
    ) -> Vec<T> {
        let mut grad = Vec::with_capacity(self.rotation_count() + dh.len());
        for (s, stage) in shifts.iter().enumerate() {
            for dwi in stage {
                grad.push((0..ANCILLA_DIM).map(|m| dw[s][m] * dwi[m]).sum());
            }
        }
        grad.extend_from_slice(dh);
        grad
    }

    fn batch_shift_gradient(&self, batch: &[&Labeled<CVector<T>>]) -> Result<(T, Vec<T>)> {
        let weights = self.stage_weights()?;
        let shifts = self.weight_shift_jacobian()?;
        let per: Vec<Result<(T, Vec<[T; ANCILLA_DIM]>, Vec<T>)>> = batch
            .par_iter()
            .map(|s| {
                let (e, dw, dh) = self.backward(&weights, &s.input)?;
                let (loss, dl) = train::bce_with_grad(e, s.label, s.id)?;
                let dw = dw
                    .into_iter()
                    .map(|mut w| {
                        w.iter_mut().for_each(|x| *x *= dl);
                        w
                    })
                    .collect();
                Ok((loss, dw, dh.into_iter().map(|x| x * dl).collect()))
            })
            .collect();
        let n = T::from_usize_lossy(batch.len());
        let mut loss = T::zero();
        let mut dw_total = vec![[T::zero(); ANCILLA_DIM]; self.stages()];
        let mut dh_total = vec![T::zero(); self.readout.len()];
        for r in per {
            let (l, dw, dh) = r?;
            loss += l;
            for (acc, w) in dw_total.iter_mut().zip(dw) {
                for m in 0..ANCILLA_DIM {
                    acc[m] += w[m];
                }
            }
            for (a, b) in dh_total.iter_mut().zip(dh) {
                *a += b;
            }
        }
        let mut grad = self.assemble(&shifts, &dw_total, &dh_total);
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }
}

impl<T: Real> Trainable<T> for QcnnModel<T> {
    type Input = CVector<T>;

    fn parameters(&self) -> Vec<T> {
        let mut p: Vec<T> = self.thetas.iter().flatten().copied().collect();
        p.extend(self.readout.parameters());
        p
    }

    fn set_parameters(&mut self, p: &[T]) -> Result<()> {
        let want = self.rotation_count() + self.readout.len();
        if p.len() != want {
            return Err(Error::DimensionMismatch {
                context: "QCNN parameters",
                expected: want,
                found: p.len(),
            });
        }
        for (s, theta) in self.thetas.iter_mut().enumerate() {
            theta.copy_from_slice(&p[s * ANSATZ_PARAMS..(s + 1) * ANSATZ_PARAMS]);
        }
        self.readout.set_parameters(&p[self.rotation_count()..]);
        Ok(())
    }

    fn logits(&self, inputs: &[&CVector<T>]) -> Result<Vec<T>> {
        let weights = self.stage_weights()?;
        inputs
            .par_iter()
            .map(|z| self.logit_with(&weights, z))
            .collect()
    }

    fn analytic_gradient(&self, batch: &[&Labeled<CVector<T>>]) -> Option<Result<(T, Vec<T>)>> {
        Some(self.batch_shift_gradient(batch))
    }
}

/// Normalizes a real feature vector into a data-register state.
pub fn encode_real<T: Real>(features: &[T]) -> Result<CVector<T>> {
    let dim = features.len();
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::invalid(
            "features",
            format!("length {dim} is not a power of two"),
        ));
    }
    let nrm = features.iter().map(|&v| v * v).sum::<T>().sqrt();
    if !(nrm > T::zero()) {
        return Err(Error::invalid("features", "zero vector cannot be encoded"));
    }
    Ok(features
        .iter()
        .map(|&v| creal(v / nrm))
        .collect::<Array1<_>>())
}
