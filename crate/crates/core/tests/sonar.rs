use std::path::PathBuf;

use ::qrdr::dataset::load_sonar;
use ::qrdr::pca::{fit_pca, project};
use ::qrdr::qrdr::run_qrdr;

fn sonar() -> ::qrdr::LabeledDataset {
    load_sonar(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sonar.all-data")).unwrap()
}

/// Cyclic Jacobi eigenvalues, descending.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..60 {
        let off: f64 = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| a[i][j] * a[i][j])
                    .sum::<f64>()
            })
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    d.sort_by(|a, b| b.total_cmp(a));
    d
}

#[test]
fn loads_all_rows_with_both_classes() {
    let ds = sonar();
    assert_eq!(ds.x.dim(), (208, 60));
    assert_eq!(ds.class_counts(), (111, 97));
    assert!(ds.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn covariance_spectrum_matches_jacobi_oracle() {
    let ds = sonar();
    let (m, n) = ds.x.dim();
    let cov: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| (0..m).map(|i| ds.x[[i, a]] * ds.x[[i, b]]).sum())
                .collect()
        })
        .collect();
    let want = jacobi_eigenvalues(cov);
    let pca = fit_pca(ds.x.view(), 16).unwrap();
    for (k, (a, b)) in want.iter().zip(pca.eigenvalues.iter()).enumerate() {
        assert!(
            (a - b).abs() <= 1e-10 * want[0],
            "eigenvalue {k}: {a} vs {b}"
        );
    }
    let total: f64 = want.iter().sum();
    assert!((pca.variance_fraction - want[..16].iter().sum::<f64>() / total).abs() < 1e-12);
}

#[test]
fn reduced_features_track_the_classical_projection() {
    let ds = sonar();
    for r in [8, 16] {
        let out = run_qrdr(ds.x.view(), r, 0.004).unwrap();
        assert!(out.epsilon < 1e-3, "R={r}: epsilon {}", out.epsilon);
        let z = project(ds.x.view(), &fit_pca(ds.x.view(), r).unwrap())
            .unwrap()
            .z;
        let q = out.reduced_features(ds.x.view());
        let scale = z.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let worst = z
            .iter()
            .zip(q.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(
            worst < 0.05 * scale,
            "R={r}: worst deviation {worst} against scale {scale}"
        );
    }
}
