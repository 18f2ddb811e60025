//! Sweeps of the quantized spectrum in `μ` and the spectral index `𝒩`.
//!
//! `𝒩` is the signed number of eigenvalues that cross a reference level
//! `ω_ref` upward as `μ` goes from `μ_min` to `μ_max`. It is computed twice:
//!
//! - counting function: genuine eigenvalues below `ω_ref` at `μ_min` minus
//!   those below `ω_ref` at `μ_max` (over the whole truncated spectrum; the
//!   deep bulk cancels in the difference);
//! - tracked crossings: eigenvalues inside the window are matched between
//!   consecutive samples and every passage through `ω_ref` is counted with its
//!   direction.
//!
//! Samples whose spectrum comes within [`REFERENCE_CLEARANCE`] of `ω_ref` are
//! replaced by a pair of clean neighbors, and intervals whose matching is
//! ambiguous are bisected, up to [`MAX_REFINEMENT_ROUNDS`] times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat, LinalgError};
use crate::quantization::{
    quantize, AffineMatrixSymbol, QuantizationError, TruncatedBasis, GAP_CERTIFICATE_RESOLUTION, SPURIOUS_THRESHOLD,
};

pub const REFERENCE_CLEARANCE: f64 = 1e-6;
pub const MAX_REFINEMENT_ROUNDS: usize = 12;
pub const MIN_STEPS: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("invalid spectral window: {0}")]
    InvalidWindow(String),
    #[error("invalid mu range [{mu_min}, {mu_max}]")]
    InvalidRange { mu_min: f64, mu_max: f64 },
    #[error("a sweep needs at least {MIN_STEPS} samples, got {0}")]
    TooFewSteps(usize),
    #[error("eigenvalue {omega} sits on the reference level at the endpoint mu = {mu}; enlarge the mu range")]
    EndpointInSpectrum { mu: f64, omega: f64 },
    #[error("could not move a sample off the reference level near mu = {mu} after {rounds} rounds")]
    NonConvergentRefinement { mu: f64, rounds: usize },
    #[error("eigenvalue matching on [{mu_left}, {mu_right}] is still ambiguous after {rounds} bisection rounds")]
    AmbiguousMatching { mu_left: f64, mu_right: f64, rounds: usize },
    #[error("counting function gives {counting_function} but tracked crossings give {tracked_crossings}")]
    MethodDisagreement { counting_function: i64, tracked_crossings: i64 },
    #[error(transparent)]
    Quantization(#[from] QuantizationError),
}

impl From<LinalgError> for FlowError {
    fn from(e: LinalgError) -> Self {
        Self::Quantization(e.into())
    }
}

/// Open interval `(omega_min, omega_max)` with a reference level inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub omega_min: f64,
    pub omega_max: f64,
    pub reference: f64,
}

impl SpectralWindow {
    pub fn new(omega_min: f64, omega_max: f64, reference: f64) -> Result<Self, FlowError> {
        let w = Self { omega_min, omega_max, reference };
        w.validate()?;
        Ok(w)
    }

    /// Window centered on `reference` at the midpoint.
    pub fn centered(omega_min: f64, omega_max: f64) -> Result<Self, FlowError> {
        Self::new(omega_min, omega_max, 0.5 * (omega_min + omega_max))
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let finite = [self.omega_min, self.omega_max, self.reference].iter().all(|v| v.is_finite());
        if !finite || !(self.omega_min < self.reference && self.reference < self.omega_max) {
            return Err(FlowError::InvalidWindow(format!(
                "need omega_min < reference < omega_max, got ({}, {}, {})",
                self.omega_min, self.omega_max, self.reference
            )));
        }
        Ok(())
    }

    pub fn contains(&self, omega: f64) -> bool {
        self.omega_min < omega && omega < self.omega_max
    }

    /// Largest displacement accepted between consecutive samples.
    pub fn max_jump(&self) -> f64 {
        0.5 * (self.reference - self.omega_min).min(self.omega_max - self.reference)
    }

    /// Whether the window lies inside `(c − C + α, c + C − α)` for the symbol's gap.
    pub fn fits_gap(&self, symbol: &AffineMatrixSymbol, alpha: f64) -> bool {
        let c = symbol.gap_center();
        let g = symbol.gap_constant();
        self.omega_min >= c - g + alpha && self.omega_max <= c + g - alpha
    }
}

/// Where an eigenvector lives: its dominant Hermite level and the weight on
/// each matrix component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub leading_level: usize,
    pub component_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub mu: f64,
    /// Genuine eigenvalues inside the window, ascending.
    pub values: Vec<f64>,
    pub spurious_weights: Vec<f64>,
    pub fingerprints: Vec<Fingerprint>,
    /// Genuine eigenvalues of the whole truncated operator below the reference.
    pub below_reference: usize,
    /// Genuine eigenvalue closest to the reference level, and its distance.
    pub closest_value: f64,
    pub reference_distance: f64,
}

impl SweepSample {
    fn is_clean(&self) -> bool {
        self.reference_distance > REFERENCE_CLEARANCE
    }
}

/// Genuine in-window spectra on an ascending, refined `μ` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSweep {
    pub window: SpectralWindow,
    pub mu_min: f64,
    pub mu_max: f64,
    pub requested_steps: usize,
    pub inserted_samples: usize,
    pub samples: Vec<SweepSample>,
}

/// One row of the tabular sweep export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub mu: f64,
    pub ordinal: usize,
    pub omega: f64,
    pub spurious_weight: f64,
}

impl SpectrumSweep {
    pub fn mu_grid(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mu).collect()
    }

    pub fn records(&self) -> Vec<SweepRecord> {
        self.samples
            .iter()
            .flat_map(|s| {
                s.values.iter().zip(&s.spurious_weights).enumerate().map(|(k, (&omega, &w))| SweepRecord {
                    mu: s.mu,
                    ordinal: k,
                    omega,
                    spurious_weight: w,
                })
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.iter().all(|s| s.values.is_empty())
    }
}

fn fingerprint(basis: &TruncatedBasis, dim: usize, v: &[num_complex::Complex64]) -> Fingerprint {
    let levels = basis.levels();
    let component_weights = (0..dim)
        .map(|c| (0..levels).map(|l| v[basis.index(c, l)].norm_sqr()).sum())
        .collect();
    let leading_level = (0..levels)
        .map(|l| (l, (0..dim).map(|c| v[basis.index(c, l)].norm_sqr()).sum::<f64>()))
        .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0;
    Fingerprint { leading_level, component_weights }
}

/// Eigensolve at one `μ` and keep what the flow needs.
pub fn sample_at(
    symbol: &AffineMatrixSymbol,
    basis: &TruncatedBasis,
    window: &SpectralWindow,
    mu: f64,
) -> Result<SweepSample, FlowError> {
    let op = quantize(symbol, mu, basis)?;
    let spec = op.spectrum()?;
    let mut sample = SweepSample {
        mu,
        values: Vec::new(),
        spurious_weights: Vec::new(),
        fingerprints: Vec::new(),
        below_reference: 0,
        closest_value: f64::NAN,
        reference_distance: f64::INFINITY,
    };
    for k in 0..spec.len() {
        if spec.is_spurious(k) {
            continue;
        }
        let w = spec.values[k];
        if w < window.reference {
            sample.below_reference += 1;
        }
        let dist = w - window.reference;
        if dist.abs() < sample.reference_distance {
            sample.reference_distance = dist.abs();
            sample.closest_value = w;
        }
        if window.contains(w) {
            sample.values.push(w);
            sample.spurious_weights.push(spec.spurious_weights[k]);
            sample.fingerprints.push(fingerprint(basis, symbol.dim(), &spec.vector(k)));
        }
    }
    Ok(sample)
}

fn samples_at(
    symbol: &AffineMatrixSymbol,
    basis: &TruncatedBasis,
    window: &SpectralWindow,
    mus: &[f64],
) -> Result<Vec<SweepSample>, FlowError> {
    mus.par_iter().map(|&mu| sample_at(symbol, basis, window, mu)).collect()
}

/// Result of matching two consecutive samples.
#[derive(Debug, Clone, PartialEq)]
struct Matching {
    pairs: Vec<(usize, usize)>,
}

fn match_samples(a: &SweepSample, b: &SweepSample, window: &SpectralWindow) -> Option<Matching> {
    let max_jump = window.max_jump();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &wa) in a.values.iter().enumerate() {
        for (j, &wb) in b.values.iter().enumerate() {
            let d = (wa - wb).abs();
            if d < max_jump {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.values.len()];
    let mut used_b = vec![false; b.values.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    let spacing = |vals: &[f64], k: usize| {
        let mut s = f64::INFINITY;
        if k > 0 {
            s = s.min(vals[k] - vals[k - 1]);
        }
        if k + 1 < vals.len() {
            s = s.min(vals[k + 1] - vals[k]);
        }
        s
    };
    for &(i, j) in &pairs {
        let d = (a.values[i] - b.values[j]).abs();
        let local = spacing(&a.values, i).min(spacing(&b.values, j));
        if d >= 0.5 * local {
            return None;
        }
    }
    let near_edge = |w: f64| w - window.omega_min < max_jump || window.omega_max - w < max_jump;
    let unmatched_ok = a.values.iter().zip(&used_a).chain(b.values.iter().zip(&used_b)).all(|(&w, &used)| used || near_edge(w));
    if !unmatched_ok {
        return None;
    }
    pairs.sort_unstable();
    Some(Matching { pairs })
}

fn clean_point_between(
    symbol: &AffineMatrixSymbol,
    basis: &TruncatedBasis,
    window: &SpectralWindow,
    lo: f64,
    hi: f64,
) -> Result<SweepSample, FlowError> {
    for t in [0.5, 0.25, 0.75, 0.375, 0.625, 0.125, 0.875] {
        let s = sample_at(symbol, basis, window, lo + t * (hi - lo))?;
        if s.is_clean() {
            return Ok(s);
        }
    }
    Err(FlowError::NonConvergentRefinement { mu: 0.5 * (lo + hi), rounds: 7 })
}

/// Dense eigensolves on `steps` equally spaced samples of `[mu_min, mu_max]`,
/// refined until every sample is clear of the reference level and every
/// consecutive pair of in-window spectra can be matched unambiguously.
pub fn sweep(
    symbol: &AffineMatrixSymbol,
    basis: &TruncatedBasis,
    window: &SpectralWindow,
    mu_min: f64,
    mu_max: f64,
    steps: usize,
) -> Result<SpectrumSweep, FlowError> {
    window.validate()?;
    if !(mu_min.is_finite() && mu_max.is_finite() && mu_min < mu_max) {
        return Err(FlowError::InvalidRange { mu_min, mu_max });
    }
    if steps < MIN_STEPS {
        return Err(FlowError::TooFewSteps(steps));
    }
    let span = mu_max - mu_min;
    let mut grid: Vec<f64> = (0..steps).map(|k| mu_min + span * k as f64 / (steps - 1) as f64).collect();
    grid[steps - 1] = mu_max;
    let initial = samples_at(symbol, basis, window, &grid)?;

    for s in [&initial[0], &initial[steps - 1]] {
        if !s.is_clean() {
            return Err(FlowError::EndpointInSpectrum { mu: s.mu, omega: s.closest_value });
        }
    }

    let mut inserted = 0usize;
    let mut samples = Vec::with_capacity(steps);
    for k in 0..steps {
        let s = &initial[k];
        if s.is_clean() {
            samples.push(s.clone());
            continue;
        }
        // Replace by μ ± h, shrinking h until both sides are clear.
        let mut h = 0.5 * (s.mu - grid[k - 1]).min(grid[k + 1] - s.mu);
        let mut replaced = false;
        for _ in 0..MAX_REFINEMENT_ROUNDS {
            let pair = samples_at(symbol, basis, window, &[s.mu - h, s.mu + h])?;
            if pair.iter().all(SweepSample::is_clean) {
                samples.extend(pair);
                inserted += 2;
                replaced = true;
                break;
            }
            h *= 0.5;
        }
        if !replaced {
            return Err(FlowError::NonConvergentRefinement { mu: s.mu, rounds: MAX_REFINEMENT_ROUNDS });
        }
    }

    for round in 0..=MAX_REFINEMENT_ROUNDS {
        let ambiguous: Vec<usize> = (0..samples.len() - 1)
            .into_par_iter()
            .filter(|&i| match_samples(&samples[i], &samples[i + 1], window).is_none())
            .collect();
        if ambiguous.is_empty() {
            break;
        }
        if round == MAX_REFINEMENT_ROUNDS {
            let i = ambiguous[0];
            return Err(FlowError::AmbiguousMatching {
                mu_left: samples[i].mu,
                mu_right: samples[i + 1].mu,
                rounds: MAX_REFINEMENT_ROUNDS,
            });
        }
        let fresh: Vec<SweepSample> = ambiguous
            .par_iter()
            .map(|&i| clean_point_between(symbol, basis, window, samples[i].mu, samples[i + 1].mu))
            .collect::<Result<_, _>>()?;
        inserted += fresh.len();
        samples.extend(fresh);
        samples.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    }

    Ok(SpectrumSweep { window: *window, mu_min, mu_max, requested_steps: steps, inserted_samples: inserted, samples })
}

/// A passage of a tracked eigenvalue through the reference level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub mu_left: f64,
    pub mu_right: f64,
    /// Linear estimate of the crossing point.
    pub mu_estimate: f64,
    pub omega_left: f64,
    pub omega_right: f64,
    /// `+1` upward, `−1` downward.
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodCounts {
    pub counting_function: i64,
    pub tracked_crossings: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    #[serde(rename = "N")]
    pub n: i64,
    pub method_counts: MethodCounts,
    pub crossings: Vec<CrossingRecord>,
    pub below_at_mu_min: usize,
    pub below_at_mu_max: usize,
    pub mu_min: f64,
    pub mu_max: f64,
    pub samples: usize,
    pub inserted_samples: usize,
}

/// `𝒩` by both methods; disagreement is an error.
pub fn spectral_index(sweep: &SpectrumSweep) -> Result<FlowResult, FlowError> {
    let window = &sweep.window;
    let samples = &sweep.samples;
    let first = samples.first().ok_or(FlowError::TooFewSteps(0))?;
    let last = samples.last().expect("non-empty");
    let counting = first.below_reference as i64 - last.below_reference as i64;

    let mut crossings = Vec::new();
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let m = match_samples(a, b, window).ok_or(FlowError::AmbiguousMatching {
            mu_left: a.mu,
            mu_right: b.mu,
            rounds: 0,
        })?;
        for (i, j) in m.pairs {
            let (wa, wb) = (a.values[i], b.values[j]);
            let direction = match (wa < window.reference, wb < window.reference) {
                (true, false) => 1,
                (false, true) => -1,
                _ => continue,
            };
            let t = (window.reference - wa) / (wb - wa);
            crossings.push(CrossingRecord {
                mu_left: a.mu,
                mu_right: b.mu,
                mu_estimate: a.mu + t * (b.mu - a.mu),
                omega_left: wa,
                omega_right: wb,
                direction,
            });
        }
    }
    let tracked: i64 = crossings.iter().map(|c| c.direction as i64).sum();
    if tracked != counting {
        return Err(FlowError::MethodDisagreement { counting_function: counting, tracked_crossings: tracked });
    }
    Ok(FlowResult {
        n: counting,
        method_counts: MethodCounts { counting_function: counting, tracked_crossings: tracked },
        crossings,
        below_at_mu_min: first.below_reference,
        below_at_mu_max: last.below_reference,
        mu_min: sweep.mu_min,
        mu_max: sweep.mu_max,
        samples: samples.len(),
        inserted_samples: sweep.inserted_samples,
    })
}

/// Window, `μ` range and sample count of a flow computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSetup {
    pub window: SpectralWindow,
    pub mu_min: f64,
    pub mu_max: f64,
    pub steps: usize,
}

impl FlowSetup {
    pub fn sweep(&self, symbol: &AffineMatrixSymbol, basis: &TruncatedBasis) -> Result<SpectrumSweep, FlowError> {
        sweep(symbol, basis, &self.window, self.mu_min, self.mu_max, self.steps)
    }

    pub fn run(&self, symbol: &AffineMatrixSymbol, basis: &TruncatedBasis) -> Result<FlowResult, FlowError> {
        spectral_index(&self.sweep(symbol, basis)?)
    }
}

/// Random Hermitian `dim x dim` matrix with spectral norm 1.
pub fn random_hermitian_unit(dim: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = CMat::from_fn(dim, dim, |_, _| {
        num_complex::Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = CMat::from_fn(dim, dim, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    m = h;
    linalg::enforce_hermitian(&mut m);
    let (values, _) = linalg::hermitian_eigen(&m).expect("small Hermitian eigensolve");
    let norm = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    CMat::from_fn(dim, dim, |i, j| m[(i, j)] / norm)
}

/// Random real diagonal matrix with spectral norm 1.
pub fn random_diagonal_unit(dim: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = diag.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    CMat::from_fn(dim, dim, |i, j| {
        if i == j {
            num_complex::Complex64::new(diag[i] / norm, 0.0)
        } else {
            linalg::ZERO
        }
    })
}

/// Width of the Gaussian envelope carrying invariance perturbations.
pub const PERTURBATION_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceEntry {
    pub delta: f64,
    /// The perturbed symbol still passes the sampled gap certificate.
    pub certified: bool,
    pub n: Option<i64>,
    /// Gap violation or flow error, if any.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub baseline: FlowResult,
    pub entries: Vec<InvarianceEntry>,
    /// Every certified perturbation reproduced the baseline `𝒩`.
    pub invariant: bool,
}

/// Recomputes `𝒩` for `H + δ·P·exp(−(x² + ξ²)/σ²)` at each `δ`. Strengths that
/// break the gap certificate are reported and skipped; they do not fail the
/// check. At `δ = 0` the unperturbed symbol is reused, so the result is the
/// baseline itself.
pub fn flow_invariance_check(
    symbol: &AffineMatrixSymbol,
    strengths: &[f64],
    perturbation: &CMat,
    basis: &TruncatedBasis,
    setup: &FlowSetup,
) -> Result<InvarianceReport, FlowError> {
    let baseline = setup.run(symbol, basis)?;
    let mut entries = Vec::with_capacity(strengths.len());
    for &delta in strengths {
        if delta == 0.0 {
            let again = setup.run(symbol, basis)?;
            entries.push(InvarianceEntry { delta, certified: true, n: Some(again.n), note: None });
            continue;
        }
        let scaled = CMat::from_fn(perturbation.nrows(), perturbation.ncols(), |i, j| perturbation[(i, j)] * delta);
        let perturbed = symbol.clone().with_localized_term(scaled, PERTURBATION_WIDTH)?;
        if let Err(e) = perturbed.certify_gap(GAP_CERTIFICATE_RESOLUTION) {
            entries.push(InvarianceEntry { delta, certified: false, n: None, note: Some(e.to_string()) });
            continue;
        }
        match setup.run(&perturbed, basis) {
            Ok(r) => entries.push(InvarianceEntry { delta, certified: true, n: Some(r.n), note: None }),
            Err(e) => entries.push(InvarianceEntry { delta, certified: true, n: None, note: Some(e.to_string()) }),
        }
    }
    let invariant = entries.iter().filter(|e| e.certified).all(|e| e.n == Some(baseline.n));
    Ok(InvarianceReport { baseline, entries, invariant })
}

/// Every eigenvalue of the truncated operator in `[omega_lo, omega_hi]`,
/// spurious ones included, as `(ω, spurious weight)`.
pub fn spectrum_slice(
    symbol: &AffineMatrixSymbol,
    basis: &TruncatedBasis,
    mu: f64,
    omega_lo: f64,
    omega_hi: f64,
) -> Result<Vec<(f64, f64)>, FlowError> {
    let spec = quantize(symbol, mu, basis)?.spectrum()?;
    Ok(spec
        .values
        .iter()
        .zip(&spec.spurious_weights)
        .filter(|(w, _)| (omega_lo..=omega_hi).contains(*w))
        .map(|(&w, &s)| (w, s))
        .collect())
}

/// Whether a stored weight marks a truncation artifact.
pub fn is_spurious_weight(w: f64) -> bool {
    w > SPURIOUS_THRESHOLD
}
