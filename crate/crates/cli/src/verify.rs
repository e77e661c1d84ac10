//! Self-checks on small deterministic instances, run by the `verify` command.

use ndarray::Array2;

use qrdr::linalg::{
    hermitian_deviation, max_abs_diff, max_abs_diff_mat, CVector, HermitianMatrix, RMatrix,
};
use qrdr::pca::fit_pca;
use qrdr::qcnn::{
    apply_branch, conv_lcu, pool_discard, QcnnModel, Trainable, ANCILLA_DIM, BRANCHES,
};
use qrdr::qrdr::{
    build_hamiltonian, delta_min_for, evolve_blockwise, evolve_full, initial_state, run_qrdr,
    RegisterLayout,
};
use qrdr::qsvm::{kernel_matrix, train_lssvm};
use qrdr::scalar::{cplx, C};
use qrdr::tfim::{z2_commutator_norm, TfimSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: qrdr::Result<(f64, f64)>) -> Check {
    match outcome {
        Ok((value, tol)) => Check {
            name,
            passed: value <= tol,
            detail: format!("{value:.3e} (tolerance {tol:.0e})"),
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Smooth, non-degenerate test matrix.
fn sample_matrix(m: usize, n: usize, phase: f64) -> RMatrix<f64> {
    Array2::from_shape_fn((m, n), |(i, j)| {
        ((i * n + j) as f64 * 0.731 + phase).sin() + 0.3 * ((i + 2 * j) as f64 * 1.37).cos()
    })
}

fn sample_state(len: usize, phase: f64) -> CVector<f64> {
    let v: CVector<f64> = (0..len)
        .map(|i| {
            cplx(
                (i as f64 * 0.91 + phase).sin(),
                (i as f64 * 0.47 + phase).cos(),
            )
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / norm)
}

fn eig_reconstruction() -> qrdr::Result<(f64, f64)> {
    let n = 12;
    let a = sample_matrix(n, n, 0.2);
    let m = Array2::from_shape_fn((n, n), |(i, j)| {
        cplx(
            a[[i, j]] + a[[j, i]],
            if i == j { 0.0 } else { a[[i, j]] - a[[j, i]] },
        )
    });
    let h = HermitianMatrix::new(m.clone())?;
    Ok((
        max_abs_diff_mat(h.eig()?.reconstruct().view(), m.view()),
        1e-10,
    ))
}

fn hamiltonian_hermitian() -> qrdr::Result<(f64, f64)> {
    let x = sample_matrix(6, 4, 0.5);
    let layout = RegisterLayout::for_problem(4, 2, 6)?;
    let pca = fit_pca(x.view(), 2)?;
    let ham = build_hamiltonian(&pca, layout, 0.01)?;
    Ok((
        hermitian_deviation(ham.dense_matrix().matrix().view()),
        1e-12,
    ))
}

fn block_dense_agreement() -> qrdr::Result<(f64, f64)> {
    let x = sample_matrix(6, 4, 0.9);
    let layout = RegisterLayout::for_problem(4, 2, 6)?;
    let pca = fit_pca(x.view(), 2)?;
    let ham = build_hamiltonian(&pca, layout, delta_min_for(&pca, &layout) / 100.0)?;
    let psi = initial_state(x.view(), &layout)?;
    let a = evolve_full(&ham, &psi)?;
    let b = evolve_blockwise(&ham, &psi)?;
    Ok((max_abs_diff(a.view(), b.view()), 1e-9))
}

fn oracle_fidelity() -> qrdr::Result<(f64, f64)> {
    let x = sample_matrix(8, 4, 1.3);
    let layout = RegisterLayout::for_problem(4, 2, 8)?;
    let pca = fit_pca(x.view(), 2)?;
    let out = run_qrdr(x.view(), 2, delta_min_for(&pca, &layout) / 1000.0)?;
    Ok((out.epsilon, 1e-4))
}

fn kernel_psd() -> qrdr::Result<(f64, f64)> {
    let k = kernel_matrix(sample_matrix(10, 3, 0.1).view());
    let trace: f64 = k.k.diag().sum();
    Ok(((-k.min_eigenvalue()?).max(0.0), 1e-10 * trace))
}

fn lssvm_residual() -> qrdr::Result<(f64, f64)> {
    let x = sample_matrix(12, 5, 0.7);
    let y: Vec<i8> = (0..12)
        .map(|i| if x[[i, 0]] > 0.0 { 1 } else { -1 })
        .collect();
    Ok((train_lssvm(x.view(), &y, 4.0)?.residual(), 1e-8))
}

fn tfim_symmetry() -> qrdr::Result<(f64, f64)> {
    Ok((z2_commutator_norm(&TfimSpec::new(6, 1.0, 0.7)?)?, 1e-12))
}

fn pooled_state() -> qrdr::Result<(f64, f64)> {
    let rho = pool_discard(&sample_state(16, 0.4))?;
    let trace: f64 = rho.diag().iter().map(|z| z.re).sum();
    Ok((
        (trace - 1.0).abs().max(hermitian_deviation(rho.view())),
        1e-12,
    ))
}

fn lcu_one_hot() -> qrdr::Result<(f64, f64)> {
    let state = sample_state(16, 1.1);
    let mut worst = 0.0f64;
    for k in 0..BRANCHES {
        let mut ancilla = CVector::<f64>::zeros(ANCILLA_DIM);
        ancilla[k] = cplx(1.0, 0.0);
        let (_, out) = conv_lcu(&state, &ancilla)?;
        let want = apply_branch(k, &state, 4);
        let overlap: C<f64> = out.iter().zip(want.iter()).map(|(a, b)| a.conj() * b).sum();
        worst = worst.max(1.0 - overlap.norm_sqr());
    }
    Ok((worst, 1e-12))
}

fn gradient_agreement() -> qrdr::Result<(f64, f64)> {
    let model = QcnnModel::<f64>::new(4, 1, 3)?;
    let state = sample_state(16, 0.25);
    let (_, grad) = model.shift_gradient(&state)?;
    let base = model.parameters();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (i, g) in grad.iter().enumerate() {
        let mut plus = model.clone();
        let mut minus = model.clone();
        let mut p = base.clone();
        p[i] += h;
        plus.set_parameters(&p)?;
        p[i] -= 2.0 * h;
        minus.set_parameters(&p)?;
        let fd = (plus.expectation(&state)? - minus.expectation(&state)?) / (2.0 * h);
        worst = worst.max((fd - g).abs());
    }
    Ok((worst, 1e-6))
}

pub fn run_checks() -> Vec<Check> {
    vec![
        check("eigendecomposition-reconstruction", eig_reconstruction()),
        check("hamiltonian-hermitian", hamiltonian_hermitian()),
        check("blockwise-dense-agreement", block_dense_agreement()),
        check("oracle-fidelity", oracle_fidelity()),
        check("kernel-psd", kernel_psd()),
        check("lssvm-residual", lssvm_residual()),
        check("tfim-z2-symmetry", tfim_symmetry()),
        check("pooled-state", pooled_state()),
        check("lcu-one-hot", lcu_one_hot()),
        check("gradient-agreement", gradient_agreement()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
