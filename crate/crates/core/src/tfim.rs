//! Open-chain transverse-field Ising model and its ground-state phase dataset.
//!
//! Site `i` is qubit `i` counted from the most significant bit; `Z|0⟩ = |0⟩`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eig, HermitianMatrix, RMatrix};
use crate::pca::fix_sign;
use crate::rng;
use crate::scalar::{creal, Real};

/// Spectral gaps below this mark a ground state as (near-)degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;
const SAMPLE_STREAM: u64 = 0x7466_696d;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfimSpec<T> {
    pub n_sites: usize,
    #[serde(rename = "J")]
    pub j: T,
    pub h: T,
    pub boundary: Boundary,
}

impl<T: Real> TfimSpec<T> {
    pub fn new(n_sites: usize, j: T, h: T) -> Result<Self> {
        let s = Self {
            n_sites,
            j,
            h,
            boundary: Boundary::Open,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::invalid("n_sites", "need at least 2 sites"));
        }
        if self.n_sites > 16 {
            return Err(Error::invalid(
                "n_sites",
                "dense diagonalization limited to 16 sites",
            ));
        }
        if !(self.j > T::zero()) {
            return Err(Error::invalid("J", "must be positive"));
        }
        if !(self.h >= T::zero()) || !self.h.is_finite() {
            return Err(Error::invalid("h", "must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn ratio(&self) -> T {
        self.h / self.j
    }
}

#[inline]
fn bit(x: usize, site: usize, n: usize) -> usize {
    (x >> (n - 1 - site)) & 1
}

/// `H = −J Σ Z_i Z_{i+1} + h Σ X_i` as a real symmetric matrix.
pub fn tfim_matrix<T: Real>(spec: &TfimSpec<T>) -> Result<RMatrix<T>> {
    spec.validate()?;
    let n = spec.n_sites;
    let dim = spec.dim();
    let mut m = RMatrix::<T>::zeros((dim, dim));
    for x in 0..dim {
        let mut zz = T::zero();
        for i in 0..n - 1 {
            zz += if bit(x, i, n) == bit(x, i + 1, n) {
                T::one()
            } else {
                -T::one()
            };
        }
        m[[x, x]] = -spec.j * zz;
        for i in 0..n {
            let y = x ^ (1 << (n - 1 - i));
            m[[y, x]] += spec.h;
        }
    }
    Ok(m)
}

pub fn build_tfim<T: Real>(spec: &TfimSpec<T>) -> Result<HermitianMatrix<T>> {
    HermitianMatrix::from_real_symmetric(&tfim_matrix(spec)?)
}

/// Max-norm of `[H, Π_i X_i]`.
pub fn z2_commutator_norm<T: Real>(spec: &TfimSpec<T>) -> Result<T> {
    let h = tfim_matrix(spec)?;
    let dim = spec.dim();
    let mask = dim - 1;
    // (H P)[a, b] = H[a, b ^ mask], (P H)[a, b] = H[a ^ mask, b]
    let mut worst = T::zero();
    for a in 0..dim {
        for b in 0..dim {
            worst = worst.max((h[[a, b ^ mask]] - h[[a ^ mask, b]]).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample<T> {
    pub h_over_j: T,
    pub label: i8,
    pub amplitudes: Vec<T>,
    #[serde(skip)]
    pub energy: T,
    #[serde(skip)]
    pub gap: T,
}

impl<T: Real> PhaseSample<T> {
    pub fn is_near_degenerate(&self) -> bool {
        self.gap < T::lit(DEGENERACY_GAP)
    }
}

/// `+1` above the critical ratio (paramagnet), `−1` below (ferromagnet).
pub fn phase_label<T: Real>(ratio: T) -> i8 {
    if ratio > T::one() {
        1
    } else {
        -1
    }
}

pub fn ground_state<T: Real>(spec: &TfimSpec<T>) -> Result<PhaseSample<T>> {
    spec.validate()?;
    if spec.h == T::zero() {
        return Err(Error::Degenerate(
            "h = 0: the two ordered states are exactly degenerate".into(),
        ));
    }
    let (values, vectors) = symmetric_eig(tfim_matrix(spec)?.view())?;
    let dim = spec.dim();
    let e0 = values[dim - 1];
    let e1 = values[dim - 2];
    let mut amps: Vec<T> = vectors.column(dim - 1).to_vec();
    let nrm = amps.iter().map(|&a| a * a).sum::<T>().sqrt();
    for a in amps.iter_mut() {
        *a /= nrm;
    }
    fix_sign(&mut amps);
    let gap = e1 - e0;
    if gap < T::lit(DEGENERACY_GAP) {
        log::warn!(
            "ground state at h/J = {} is near-degenerate (gap {gap:e})",
            spec.ratio()
        );
    }
    Ok(PhaseSample {
        h_over_j: spec.ratio(),
        label: phase_label(spec.ratio()),
        amplitudes: amps,
        energy: e0,
        gap,
    })
}

/// `⟨ψ| (Σ_i Z_i / n)² |ψ⟩` for a real state.
pub fn magnetization_sq<T: Real>(amplitudes: &[T], n_sites: usize) -> T {
    let n = T::from_usize_lossy(n_sites);
    amplitudes
        .iter()
        .enumerate()
        .map(|(x, &a)| {
            let ones = x.count_ones() as usize;
            let m = T::from_usize_lossy(n_sites - ones) - T::from_usize_lossy(ones);
            a * a * (m / n) * (m / n)
        })
        .sum()
}

pub fn overlap_with_plus<T: Real>(amplitudes: &[T]) -> T {
    let s = T::one() / T::from_usize_lossy(amplitudes.len()).sqrt();
    amplitudes.iter().map(|&a| a * s).sum::<T>().abs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub n_sites: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub boundary: Boundary,
    pub seed: u64,
    pub count: usize,
    pub ratio_range: (f64, f64),
    pub exclusion: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TfimDataset<T> {
    pub header: DatasetHeader,
    /// Sorted by `h/J`.
    pub samples: Vec<PhaseSample<T>>,
}

impl<T: Real> TfimDataset<T> {
    /// Rows are ground-state amplitude vectors.
    pub fn matrix(&self) -> RMatrix<T> {
        let dim = self.samples.first().map_or(0, |s| s.amplitudes.len());
        RMatrix::from_shape_fn((self.samples.len(), dim), |(i, j)| {
            self.samples[i].amplitudes[j]
        })
    }

    pub fn labels(&self) -> Vec<i8> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Draws `count/2` ratios uniformly below the excluded window and `count/2`
/// above it, then solves each ground state.
pub fn generate_dataset<T: Real>(
    n_sites: usize,
    count: usize,
    ratio_range: (f64, f64),
    exclusion: (f64, f64),
    seed: u64,
) -> Result<TfimDataset<T>> {
    if count == 0 || count % 2 != 0 {
        return Err(Error::invalid("count", "must be a positive even number"));
    }
    let (lo, hi) = ratio_range;
    let (ex_lo, ex_hi) = exclusion;
    if !(lo >= 0.0 && lo < hi) {
        return Err(Error::invalid("ratio_range", "need 0 <= low < high"));
    }
    if !(ex_lo <= 1.0 && 1.0 <= ex_hi && ex_lo <= ex_hi) {
        return Err(Error::invalid(
            "exclusion",
            "must contain the critical ratio 1",
        ));
    }
    if !(lo < ex_lo && ex_hi < hi) {
        return Err(Error::invalid(
            "ratio_range",
            "no admissible ratios on one side of the exclusion window",
        ));
    }
    let lo = lo.max(f64::MIN_POSITIVE);
    let mut r = rng::seeded(seed, SAMPLE_STREAM);
    let mut ratios: Vec<f64> = (0..count / 2).map(|_| r.random_range(lo..ex_lo)).collect();
    ratios.extend((0..count / 2).map(|_| {
        let v: f64 = r.random_range(ex_hi..hi);
        if v == ex_hi {
            f64::from_bits(ex_hi.to_bits() + 1)
        } else {
            v
        }
    }));
    ratios.sort_by(f64::total_cmp);

    let samples: Vec<Result<PhaseSample<T>>> = ratios
        .par_iter()
        .map(|&ratio| ground_state(&TfimSpec::new(n_sites, T::one(), T::lit(ratio))?))
        .collect();
    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TfimDataset {
        header: DatasetHeader {
            n_sites,
            j: 1.0,
            boundary: Boundary::Open,
            seed,
            count,
            ratio_range,
            exclusion,
        },
        samples,
    })
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    h_over_j: f64,
    label: i8,
    amplitudes: Vec<f64>,
}

pub fn write_jsonl<T: Real>(ds: &TfimDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut f, &ds.header)?;
    f.write_all(b"\n")?;
    for s in &ds.samples {
        let rec = SampleRecord {
            h_over_j: s.h_over_j.to_f64_lossy(),
            label: s.label,
            amplitudes: s.amplitudes.iter().map(|a| a.to_f64_lossy()).collect(),
        };
        serde_json::to_writer(&mut f, &rec)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl<T: Real>(path: impl AsRef<Path>) -> Result<TfimDataset<T>> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut lines = f
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let header: DatasetHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?)?,
        None => {
            return Err(Error::Parse {
                line: 0,
                message: "empty dataset file".into(),
            })
        }
    };
    let dim = 1usize << header.n_sites;
    let mut samples = Vec::new();
    for (i, line) in lines {
        let rec: SampleRecord = serde_json::from_str(&line?).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.amplitudes.len() != dim {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {dim} amplitudes, found {}", rec.amplitudes.len()),
            });
        }
        samples.push(PhaseSample {
            h_over_j: T::lit(rec.h_over_j),
            label: rec.label,
            amplitudes: rec.amplitudes.into_iter().map(T::lit).collect(),
            energy: T::nan(),
            gap: T::nan(),
        });
    }
    Ok(TfimDataset { header, samples })
}

/// Energy expectation `⟨ψ|H|ψ⟩`, for checks against stored amplitudes.
pub fn energy_of<T: Real>(spec: &TfimSpec<T>, amplitudes: &[T]) -> Result<T> {
    let h = build_tfim(spec)?;
    let psi: Array1<_> = amplitudes.iter().map(|&a| creal(a)).collect();
    let hpsi = h.apply(&psi)?;
    Ok(psi
        .iter()
        .zip(hpsi.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain cyclic Jacobi eigenvalues of a real symmetric matrix.
    fn jacobi_eigenvalues(mut a: RMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| a[[i, j]].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[[p, k]];
                        let aqk = a[[q, k]];
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut e: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn two_sites_without_field() {
        let spec = TfimSpec::new(2, 1.5, 0.0).unwrap();
        let e = jacobi_eigenvalues(tfim_matrix(&spec).unwrap());
        let want = [-1.5, -1.5, 1.5, 1.5];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(ground_state(&spec), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ground_energy_matches_jacobi() {
        for (n, h) in [(2, 1.0), (4, 1.0), (3, 0.4)] {
            let spec = TfimSpec::new(n, 1.0, h).unwrap();
            let gs = ground_state(&spec).unwrap();
            let e = jacobi_eigenvalues(tfim_matrix(&spec).unwrap());
            assert!((gs.energy - e[0]).abs() < 1e-10);
            assert!((energy_of(&spec, &gs.amplitudes).unwrap() - e[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn z2_symmetry() {
        for (n, h) in [(2, 0.3), (5, 1.7), (6, 0.0)] {
            let spec = TfimSpec::new(n, 1.0, h).unwrap();
            assert!(z2_commutator_norm(&spec).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn limits() {
        let para = ground_state(&TfimSpec::new(4, 1.0, 50.0).unwrap()).unwrap();
        // +hX favours |−⟩ on every site; |+⟩^{⊗n} is the ground state for −hX
        let minus: Vec<f64> = (0..16)
            .map(|x: usize| if x.count_ones() % 2 == 0 { 0.25 } else { -0.25 })
            .collect();
        let ov: f64 = para.amplitudes.iter().zip(&minus).map(|(a, b)| a * b).sum();
        assert!(ov.abs() >= 0.999, "overlap {ov}");
        let ferro = ground_state(&TfimSpec::new(6, 1.0, 0.05).unwrap()).unwrap();
        assert!(magnetization_sq(&ferro.amplitudes, 6) >= 0.8);
        assert_eq!(ferro.label, -1);
        assert_eq!(para.label, 1);
        let norm: f64 = ferro.amplitudes.iter().map(|a| a * a).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_decreases_with_field() {
        let mut prev = f64::INFINITY;
        for i in 1..10 {
            let e = ground_state(&TfimSpec::new(4, 1.0, 0.25 * i as f64).unwrap())
                .unwrap()
                .energy;
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn dataset_balance_and_determinism() {
        let ds = generate_dataset::<f64>(4, 20, (0.2, 1.8), (0.95, 1.05), 7).unwrap();
        let pos = ds.samples.iter().filter(|s| s.label == 1).count();
        assert_eq!(pos, 10);
        assert!(ds
            .samples
            .iter()
            .all(|s| s.h_over_j < 0.95 || s.h_over_j > 1.05));
        assert!(ds
            .samples
            .windows(2)
            .all(|w| w[0].h_over_j <= w[1].h_over_j));
        let again = generate_dataset::<f64>(4, 20, (0.2, 1.8), (0.95, 1.05), 7).unwrap();
        assert_eq!(ds, again);
        let two = generate_dataset::<f64>(3, 2, (0.2, 1.8), (0.95, 1.05), 1).unwrap();
        assert_eq!(two.labels().iter().filter(|&&l| l == 1).count(), 1);
        assert!(generate_dataset::<f64>(3, 3, (0.2, 1.8), (0.95, 1.05), 1).is_err());
        assert!(generate_dataset::<f64>(3, 2, (0.96, 1.8), (0.95, 1.05), 1).is_err());
        assert!(generate_dataset::<f64>(3, 2, (0.2, 1.8), (1.01, 1.05), 1).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let ds = generate_dataset::<f64>(3, 4, (0.2, 1.8), (0.95, 1.05), 2).unwrap();
        let dir = std::env::temp_dir().join(format!("tfim-rt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ds.jsonl");
        write_jsonl(&ds, &path).unwrap();
        let back: TfimDataset<f64> = read_jsonl(&path).unwrap();
        assert_eq!(back.header, ds.header);
        assert_eq!(back.matrix(), ds.matrix());
        assert_eq!(back.labels(), ds.labels());
        fs::remove_dir_all(&dir).unwrap();
    }
}
