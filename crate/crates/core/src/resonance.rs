//! Two-level resonance model and the `c`-sweep that measures how the
//! fidelity error scales with the coupling strength.

use std::fmt::Write as _;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pca::fit_pca;
use crate::qrdr::{run_with_model, QrdrConfig, RegisterLayout};
use crate::scalar::Real;

/// Errors below this are excluded from the log-log fit.
pub const EPSILON_FLOOR: f64 = 1e-12;

pub const DEFAULT_C_GRID: [f64; 6] = [0.001, 0.002, 0.004, 0.008, 0.016, 0.032];

/// A pair of levels coupled with strength `cπ·coupling/2` and split by `detuning`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelSystem<T> {
    /// Overlap factor multiplying `cπ/2` (1 for the resonant partner, 0 otherwise).
    pub coupling: T,
    pub detuning: T,
}

impl<T: Real> TwoLevelSystem<T> {
    pub fn new(coupling: T, detuning: T) -> Result<Self> {
        if !(coupling >= T::zero()) {
            return Err(Error::invalid("coupling", "must be non-negative"));
        }
        Ok(Self { coupling, detuning })
    }
}

/// Population transferred after time `t` at exact resonance: `sin²(cπt/2)`.
pub fn resonant_transition_probability<T: Real>(c: T, t: T) -> T {
    let s = (c * T::PI() * t / T::lit(2.0)).sin();
    s * s
}

/// Peak amplitude of an off-resonant transition, `cπδ / √((cπδ)² + Δ²)`.
pub fn offresonance_amplitude<T: Real>(sys: &TwoLevelSystem<T>, c: T) -> Result<T> {
    let g = c * T::PI() * sys.coupling;
    if g == T::zero() {
        return Ok(T::zero());
    }
    if sys.detuning == T::zero() {
        return Err(Error::invalid(
            "detuning",
            "levels are resonant; use the resonant transition probability",
        ));
    }
    Ok(g / (g * g + sys.detuning * sys.detuning).sqrt())
}

/// Lower bound on `|α_k|²`, the population reaching the resonant partner of
/// level `k`. Two certificates are formed, one from the actual gaps
/// `|λ_j − λ_k|` and one from index distance times the minimum gap; the
/// weaker (smaller) of the two is returned.
pub fn alpha_lower_bound<T: Real>(spectrum: &[T], k: usize, c: T) -> Result<T> {
    if k >= spectrum.len() {
        return Err(Error::invalid(
            "k",
            format!("{k} out of range for {} levels", spectrum.len()),
        ));
    }
    if !(c > T::zero()) {
        return Err(Error::invalid("c", "must be positive"));
    }
    if spectrum.len() == 1 {
        return Ok(T::one());
    }
    let mut min_gap = T::infinity();
    for i in 0..spectrum.len() {
        for j in i + 1..spectrum.len() {
            min_gap = min_gap.min((spectrum[i] - spectrum[j]).abs());
        }
    }
    if !(min_gap > T::zero()) {
        return Err(Error::Degenerate(
            "spectrum has repeated eigenvalues".into(),
        ));
    }
    let cp = c * T::PI();
    let mut by_gap = T::zero();
    let mut by_index = T::zero();
    for (j, &lj) in spectrum.iter().enumerate() {
        if j == k {
            continue;
        }
        let gap = lj - spectrum[k];
        by_gap += T::one() / (gap * gap);
        let d = T::from_usize_lossy(j.abs_diff(k));
        by_index += T::one() / (d * d);
    }
    let rigorous = T::one() - cp * cp * by_gap;
    let indexed = T::one() - (cp / min_gap) * (cp / min_gap) * by_index;
    Ok(rigorous.min(indexed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub c: f64,
    pub epsilon: f64,
    pub success_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub c: f64,
    pub reason: String,
}

/// Least-squares line `y = slope·x + intercept` with Pearson correlation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let correlation = if syy == 0.0 {
        0.0
    } else {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        correlation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub r_target: usize,
    /// Sorted by `c`.
    pub points: Vec<SweepPoint>,
    pub skipped: Vec<SkippedPoint>,
    /// `log(1/√ε)` against `log(1/c)`.
    pub fit: Option<LinearFit>,
    /// `log ε` against `log c`.
    pub epsilon_slope: Option<f64>,
    /// Set when points fell below [`EPSILON_FLOOR`] or too few remained to fit.
    pub degenerate_fit: bool,
    pub delta_min: f64,
}

impl SweepResult {
    pub fn correlation(&self) -> Option<f64> {
        self.fit.map(|f| f.correlation)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c,epsilon,success_probability\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.c, p.epsilon, p.success_probability);
        }
        out
    }
}

/// Runs QRDR once per `c` against a single PCA fit and fits the error law.
pub fn sweep_c<T: Real>(
    x: ArrayView2<T>,
    r_target: usize,
    c_values: &[f64],
) -> Result<SweepResult> {
    if c_values.is_empty() {
        return Err(Error::invalid("c_values", "empty grid"));
    }
    let (m, n) = x.dim();
    let layout = RegisterLayout::for_problem(n, r_target, m)?;
    let pca = fit_pca(x, r_target)?;

    let runs: Vec<(f64, Result<_>)> = c_values
        .par_iter()
        .map(|&c| {
            let cfg = QrdrConfig::new(r_target, T::lit(c));
            (c, run_with_model(x, &pca, layout, &cfg, T::one()))
        })
        .collect();

    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let mut delta_min = f64::NAN;
    for (c, run) in runs {
        match run {
            Ok(out) => {
                delta_min = out.delta_min.to_f64_lossy();
                points.push(SweepPoint {
                    c,
                    epsilon: out.epsilon.to_f64_lossy(),
                    success_probability: out.success_probability.to_f64_lossy(),
                });
            }
            Err(Error::Inadmissible { c, delta_min: d }) => {
                log::warn!("skipping c = {c}: not below delta_min = {d}");
                delta_min = d;
                skipped.push(SkippedPoint {
                    c,
                    reason: format!("c >= delta_min = {d:e}"),
                });
            }
            Err(e) => return Err(e),
        }
    }
    points.sort_by(|a, b| a.c.total_cmp(&b.c));
    skipped.sort_by(|a, b| a.c.total_cmp(&b.c));

    let usable: Vec<&SweepPoint> = points
        .iter()
        .filter(|p| p.epsilon >= EPSILON_FLOOR)
        .collect();
    let floored = usable.len() < points.len();
    let inv_c: Vec<f64> = usable.iter().map(|p| (1.0 / p.c).ln()).collect();
    let inv_sqrt_eps: Vec<f64> = usable
        .iter()
        .map(|p| (1.0 / p.epsilon.sqrt()).ln())
        .collect();
    let fit = linear_fit(&inv_c, &inv_sqrt_eps);
    let log_c: Vec<f64> = usable.iter().map(|p| p.c.ln()).collect();
    let log_eps: Vec<f64> = usable.iter().map(|p| p.epsilon.ln()).collect();
    let epsilon_slope = linear_fit(&log_c, &log_eps).map(|f| f.slope);

    Ok(SweepResult {
        r_target,
        points,
        skipped,
        degenerate_fit: floored || fit.is_none(),
        fit,
        epsilon_slope,
        delta_min,
    })
}
