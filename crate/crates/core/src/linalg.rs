//! Dense complex linear algebra: Kronecker products, Hermitian
//! eigendecomposition, spectral time evolution and a Jacobi SVD.
//!
//! Eigenvalues are always reported in descending order. Ties keep the order
//! in which the QL iteration produced them.

use std::ops::{Add, Mul, Sub};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{cis, creal, Real, C};

pub type CVector<T> = Array1<C<T>>;
pub type CMatrix<T> = Array2<C<T>>;
pub type RMatrix<T> = Array2<T>;

const MAX_QL_ITERATIONS: usize = 128;
const MAX_JACOBI_SWEEPS: usize = 128;

/// A square complex matrix that passed the Hermiticity check.
#[derive(Clone, Debug)]
pub struct HermitianMatrix<T: Real> {
    m: CMatrix<T>,
}

impl<T: Real> HermitianMatrix<T> {
    pub fn new(m: CMatrix<T>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::DimensionMismatch {
                context: "hermitian matrix",
                expected: r,
                found: c,
            });
        }
        if r == 0 {
            return Err(Error::invalid("matrix", "empty"));
        }
        let dev = hermitian_deviation(m.view());
        if !(dev <= T::hermitian_tol()) {
            return Err(Error::NotHermitian {
                deviation: dev.to_f64_lossy(),
            });
        }
        Ok(Self { m })
    }

    pub fn from_real_symmetric(m: &RMatrix<T>) -> Result<Self> {
        Self::new(m.mapv(creal))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros((dim, dim)),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.m
    }

    pub fn into_inner(self) -> CMatrix<T> {
        self.m
    }

    pub fn apply(&self, psi: &CVector<T>) -> Result<CVector<T>> {
        check_dim("hermitian apply", self.dim(), psi.len())?;
        Ok(matvec(self.m.view(), psi.view()))
    }

    pub fn eig(&self) -> Result<SpectralDecomposition<T>> {
        hermitian_eig(self)
    }
}

/// max |M_ij − conj(M_ji)|
pub fn hermitian_deviation<T: Real>(m: ArrayView2<C<T>>) -> T {
    let n = m.nrows();
    let mut dev = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = (m[[i, j]] - m[[j, i]].conj()).norm();
            if d > dev || d.is_nan() {
                dev = d;
            }
        }
    }
    dev
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition<T: Real> {
    pub eigenvalues: Array1<T>,
    /// Column `k` is the eigenvector belonging to `eigenvalues[k]`.
    pub eigenvectors: CMatrix<T>,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        let n = self.dim();
        let mut out = CMatrix::zeros((n, n));
        for k in 0..n {
            let lam = self.eigenvalues[k];
            let v = self.eigenvectors.column(k);
            for i in 0..n {
                let vi = v[i] * lam;
                for j in 0..n {
                    out[[i, j]] += vi * v[j].conj();
                }
            }
        }
        out
    }

    /// `Σ_k e^{−iλ_k t} v_k ⟨v_k|ψ⟩`
    pub fn evolve(&self, t: T, psi: &CVector<T>) -> Result<CVector<T>> {
        check_dim("spectral evolution", self.dim(), psi.len())?;
        if !t.is_finite() {
            return Err(Error::invalid("t", "evolution time must be finite"));
        }
        let vecs = self.eigenvectors.view();
        let mut coeffs = adjoint_matvec(vecs, psi.view());
        for (c, &lam) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c = *c * cis(-lam * t);
        }
        Ok(matvec(vecs, coeffs.view()))
    }

    /// Dense unitary `e^{−iHt}`.
    pub fn propagator(&self, t: T) -> CMatrix<T> {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for k in 0..n {
            let ph = cis(-self.eigenvalues[k] * t);
            scaled.column_mut(k).mapv_inplace(|z| z * ph);
        }
        let mut out = CMatrix::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut acc = C::zero();
                for k in 0..n {
                    acc += scaled[[i, k]] * self.eigenvectors[[j, k]].conj();
                }
                out[[i, j]] = acc;
            }
        }
        out
    }
}

/// Thin SVD `X = Σ_k σ_k u_k v_kᵀ` with `k < min(rows, cols)`.
#[derive(Clone, Debug)]
pub struct SvdResult<T: Real> {
    pub singular_values: Array1<T>,
    /// rows × k, orthonormal columns
    pub u: RMatrix<T>,
    /// cols × k, orthonormal columns
    pub v: RMatrix<T>,
}

impl<T: Real> SvdResult<T> {
    pub fn reconstruct(&self) -> RMatrix<T> {
        let (m, k) = self.u.dim();
        let n = self.v.nrows();
        let mut out = RMatrix::zeros((m, n));
        for c in 0..k {
            let s = self.singular_values[c];
            for i in 0..m {
                let ui = self.u[[i, c]] * s;
                for j in 0..n {
                    out[[i, j]] += ui * self.v[[j, c]];
                }
            }
        }
        out
    }
}

pub fn kron<A>(a: ArrayView2<A>, b: ArrayView2<A>) -> Array2<A>
where
    A: Copy + Zero + Mul<Output = A>,
{
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    let mut m = CMatrix::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = C::one();
    }
    m
}

pub fn matvec<T: Real>(m: ArrayView2<C<T>>, v: ArrayView1<C<T>>) -> CVector<T> {
    let (r, c) = m.dim();
    debug_assert_eq!(c, v.len());
    let mut out = CVector::zeros(r);
    for i in 0..r {
        let row = m.row(i);
        let mut acc = C::zero();
        for j in 0..c {
            acc += row[j] * v[j];
        }
        out[i] = acc;
    }
    out
}

/// `M† v`
pub fn adjoint_matvec<T: Real>(m: ArrayView2<C<T>>, v: ArrayView1<C<T>>) -> CVector<T> {
    let (r, c) = m.dim();
    debug_assert_eq!(r, v.len());
    let mut out = CVector::zeros(c);
    for i in 0..r {
        let vi = v[i];
        if vi.is_zero() {
            continue;
        }
        for j in 0..c {
            out[j] += m[[i, j]].conj() * vi;
        }
    }
    out
}

pub fn matmul<T: Real>(a: ArrayView2<C<T>>, b: ArrayView2<C<T>>) -> CMatrix<T> {
    let (m, k) = a.dim();
    let n = b.ncols();
    debug_assert_eq!(k, b.nrows());
    let mut out = CMatrix::zeros((m, n));
    for i in 0..m {
        for p in 0..k {
            let aip = a[[i, p]];
            if aip.is_zero() {
                continue;
            }
            for j in 0..n {
                out[[i, j]] += aip * b[[p, j]];
            }
        }
    }
    out
}

pub fn adjoint<T: Real>(m: ArrayView2<C<T>>) -> CMatrix<T> {
    m.t().mapv(|z| z.conj())
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`
pub fn inner<T: Real>(a: ArrayView1<C<T>>, b: ArrayView1<C<T>>) -> C<T> {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr<T: Real>(v: ArrayView1<C<T>>) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm<T: Real>(v: ArrayView1<C<T>>) -> T {
    norm_sqr(v).sqrt()
}

/// Returns `v / ‖v‖`, or an error for the zero vector.
pub fn normalized<T: Real>(v: &CVector<T>) -> Result<CVector<T>> {
    let n = norm(v.view());
    if !(n > T::zero()) || !n.is_finite() {
        return Err(Error::NotNormalized {
            norm: n.to_f64_lossy(),
        });
    }
    Ok(v.mapv(|z| z / n))
}

pub fn max_abs_diff<T: Real>(a: ArrayView1<C<T>>, b: ArrayView1<C<T>>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).norm())
        .fold(T::zero(), T::max)
}

pub fn max_abs_diff_mat<T: Real>(a: ArrayView2<C<T>>, b: ArrayView2<C<T>>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).norm())
        .fold(T::zero(), T::max)
}

fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    } else {
        Ok(())
    }
}

/// Householder tridiagonalization followed by implicit QL.
pub fn hermitian_eig<T: Real>(h: &HermitianMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let n = h.dim();
    let mut a = h.matrix().clone();
    let mut q = identity::<T>(n);
    let two = T::lit(2.0);

    for k in 0..n.saturating_sub(2) {
        let x = a.slice(s![k + 1.., k]).to_owned();
        let xnorm = norm(x.view());
        if xnorm == T::zero() {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == T::zero() {
            C::one()
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm(v.view());
        if vnorm == T::zero() {
            continue;
        }
        v.mapv_inplace(|z| z / vnorm);

        // H A H on the trailing block via a rank-two update.
        let m = v.len();
        let mut sub = a.slice_mut(s![k + 1.., k + 1..]);
        let p = matvec(sub.view(), v.view());
        let kappa = inner(v.view(), p.view());
        let w: CVector<T> = &p - &v.mapv(|z| z * kappa);
        for i in 0..m {
            let vi = v[i] * two;
            let wi = w[i] * two;
            for j in 0..m {
                sub[[i, j]] -= vi * w[j].conj() + wi * v[j].conj();
            }
        }
        a[[k + 1, k]] = alpha;
        a[[k, k + 1]] = alpha.conj();
        for i in k + 2..n {
            a[[i, k]] = C::zero();
            a[[k, i]] = C::zero();
        }

        // Q <- Q H
        let mut qs = q.slice_mut(s![.., k + 1..]);
        let qv = matvec(qs.view(), v.view());
        for i in 0..n {
            let qvi = qv[i] * two;
            for j in 0..m {
                qs[[i, j]] -= qvi * v[j].conj();
            }
        }
    }

    // Rotate the complex subdiagonal onto the positive reals.
    let mut diag = Array1::<T>::zeros(n);
    let mut off = Array1::<T>::zeros(n);
    let mut phase = C::<T>::one();
    for i in 0..n {
        diag[i] = a[[i, i]].re;
        if i > 0 {
            q.column_mut(i).mapv_inplace(|z| z * phase);
        }
        if i + 1 < n {
            let beta = a[[i + 1, i]];
            let mag = beta.norm();
            off[i] = mag;
            if mag > T::zero() {
                phase = phase * (beta / mag);
            }
        }
    }

    let mut qt = q.t().as_standard_layout().into_owned();
    tql2(&mut diag, &mut off, &mut qt)?;

    let order = descending_order(&diag);
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let eigenvectors = qt
        .select(Axis(0), &order)
        .reversed_axes()
        .as_standard_layout()
        .into_owned();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn descending_order<T: Real>(d: &Array1<T>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Eigenpairs of a real symmetric matrix, eigenvalues descending; column `k`
/// of the returned matrix belongs to eigenvalue `k`. Only the lower triangle is read.
pub fn symmetric_eig<T: Real>(m: ArrayView2<T>) -> Result<(Array1<T>, RMatrix<T>)> {
    let (n, c) = m.dim();
    check_dim("symmetric matrix", n, c)?;
    if n == 0 {
        return Err(Error::invalid("matrix", "empty"));
    }
    let mut a = m.as_standard_layout().into_owned();
    let mut d = Array1::<T>::zeros(n);
    let mut e = Array1::<T>::zeros(n);
    let two = T::lit(2.0);
    // Householder reflections stored in the rows of `a` below the diagonal.
    let mut reflectors: Vec<(usize, Array1<T>)> = Vec::new();
    for k in 0..n.saturating_sub(2) {
        let x = a.slice(s![k + 1.., k]).to_owned();
        let xnorm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        if xnorm == T::zero() {
            continue;
        }
        let alpha = if x[0] > T::zero() { -xnorm } else { xnorm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|&t| t * t).sum::<T>().sqrt();
        if vnorm == T::zero() {
            continue;
        }
        v.mapv_inplace(|t| t / vnorm);
        let mut sub = a.slice_mut(s![k + 1.., k + 1..]);
        let p = sub.dot(&v);
        let kappa = v.dot(&p);
        let w = &p - &v.mapv(|t| t * kappa);
        let len = v.len();
        for i in 0..len {
            let vi = v[i] * two;
            let wi = w[i] * two;
            let mut row = sub.row_mut(i);
            for j in 0..len {
                row[j] -= vi * w[j] + wi * v[j];
            }
        }
        a[[k + 1, k]] = alpha;
        reflectors.push((k + 1, v));
    }
    for i in 0..n {
        d[i] = a[[i, i]];
        if i + 1 < n {
            e[i] = a[[i + 1, i]];
        }
    }
    // Rows of `zt` are the eigenvectors of the tridiagonal form, then back-transformed.
    let mut zt = RMatrix::<T>::eye(n);
    tql2(&mut d, &mut e, &mut zt)?;
    for (start, v) in reflectors.iter().rev() {
        for mut row in zt.rows_mut() {
            let mut tail = row.slice_mut(s![*start..]);
            let dot = tail.dot(v) * two;
            tail.zip_mut_with(v, |x, &vi| *x -= dot * vi);
        }
    }
    let order = descending_order(&d);
    let values = Array1::from_iter(order.iter().map(|&i| d[i]));
    let vectors = zt
        .select(Axis(0), &order)
        .reversed_axes()
        .as_standard_layout()
        .into_owned();
    Ok((values, vectors))
}

/// Symmetric tridiagonal QL with implicit shifts. `e[i]` is the (i+1, i)
/// element; rotations are accumulated into the rows of `zt`.
fn tql2<T, Z>(d: &mut Array1<T>, e: &mut Array1<T>, zt: &mut Array2<Z>) -> Result<()>
where
    T: Real,
    Z: Copy + Mul<T, Output = Z> + Add<Output = Z> + Sub<Output = Z>,
{
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let two = T::lit(2.0);
    let cols = zt.ncols();

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence("tridiagonal QL iteration"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in l + 2..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (mut lo, mut hi) = zt.multi_slice_mut((s![i, ..], s![i + 1, ..]));
                    for k in 0..cols {
                        let zk = lo[k];
                        let zk1 = hi[k];
                        hi[k] = zk * s + zk1 * c;
                        lo[k] = zk * c - zk1 * s;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

/// `e^{−iht}ψ` through the spectral decomposition of `h`.
pub fn evolve_spectral<T: Real>(
    h: &HermitianMatrix<T>,
    t: T,
    psi: &CVector<T>,
) -> Result<CVector<T>> {
    check_dim("evolve_spectral", h.dim(), psi.len())?;
    hermitian_eig(h)?.evolve(t, psi)
}

/// One-sided (Hestenes) Jacobi SVD of a real matrix.
pub fn svd<T: Real>(x: ArrayView2<T>) -> Result<SvdResult<T>> {
    let (rows, cols) = x.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("matrix", "empty"));
    }
    if rows < cols {
        let t = svd(x.t())?;
        return Ok(SvdResult {
            singular_values: t.singular_values,
            u: t.v,
            v: t.u,
        });
    }

    let mut u = x.to_owned();
    let mut v = RMatrix::<T>::zeros((cols, cols));
    for i in 0..cols {
        v[[i, i]] = T::one();
    }
    let eps = T::epsilon();
    let negligible = {
        let fro2 = x.iter().map(|&a| a * a).sum::<T>();
        fro2 * eps * eps
    };
    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..rows {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma == T::zero()
                    || alpha.min(beta) <= negligible
                    || gamma.abs() <= eps * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let up = u[[i, p]];
                    let uq = u[[i, q]];
                    u[[i, p]] = c * up - s * uq;
                    u[[i, q]] = s * up + c * uq;
                }
                for i in 0..cols {
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = c * vp - s * vq;
                    v[[i, q]] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("Jacobi SVD"));
    }

    let sigma: Vec<T> = (0..cols)
        .map(|j| u.column(j).iter().map(|&a| a * a).sum::<T>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| {
        sigma[j]
            .partial_cmp(&sigma[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let smax = sigma[order[0]];
    let cutoff = smax * eps * T::from_usize_lossy(rows.max(cols));
    let mut uu = RMatrix::<T>::zeros((rows, cols));
    let mut vv = RMatrix::<T>::zeros((cols, cols));
    let mut svals = Array1::<T>::zeros(cols);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        svals[k] = sigma[j];
        vv.column_mut(k).assign(&v.column(j));
        if sigma[j] > cutoff {
            let inv = T::one() / sigma[j];
            for i in 0..rows {
                uu[[i, k]] = u[[i, j]] * inv;
            }
        } else {
            missing.push(k);
        }
    }
    // Complete left vectors of (numerically) zero singular values.
    let mut candidate = 0;
    for k in missing {
        loop {
            let mut e = Array1::<T>::zeros(rows);
            e[candidate % rows] = T::one();
            candidate += 1;
            for c in 0..cols {
                if c == k {
                    continue;
                }
                let col = uu.column(c);
                let proj: T = col.iter().zip(e.iter()).map(|(&a, &b)| a * b).sum();
                e.zip_mut_with(&col, |ei, &ci| *ei -= proj * ci);
            }
            let nrm = e.iter().map(|&a| a * a).sum::<T>().sqrt();
            if nrm > T::lit(1e-3) {
                uu.column_mut(k).assign(&e.mapv(|a| a / nrm));
                break;
            }
            if candidate > 4 * rows {
                return Err(Error::NoConvergence("SVD null-space completion"));
            }
        }
    }
    Ok(SvdResult {
        singular_values: svals,
        u: uu,
        v: vv,
    })
}
