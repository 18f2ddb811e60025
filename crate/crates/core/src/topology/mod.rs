//! Chern numbers of band bundles of a symbol over the unit sphere in
//! `(μ, x, ξ)`, which is oriented by that coordinate order.
//!
//! Berry phases follow the convention `A = i⟨v|dv⟩`, so a positive Chern
//! number means `(1/2π)∬ i⟨dv|∧|dv⟩ > 0`. Three independent computations:
//!
//! - [`chern_curvature`]: gauge-invariant plaquette phases on a cube-sphere;
//! - [`chern_clutching`]: winding of the transition function between the two
//!   hemisphere trivializations along the equator `μ = 0`;
//! - [`chern_section_zeros`]: sum of local indices of the zeros of a global
//!   section `p ↦ Π(p) u₀`.

use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat, LinalgError};
use crate::quantization::{AffineMatrixSymbol, QuantizationError};

mod clutching;
mod curvature;
mod grid;
mod zeros;

pub use clutching::{chern_clutching, ClutchingDetails, Trivialization};
pub use curvature::{
    cell_phases, chern_curvature, chern_curvature_from_frames, CellPhase, CurvatureDetails, MAX_REFINED_GRID,
};
pub use grid::{SphereGrid, MIN_GRID_SIZE};
pub use zeros::{chern_section_zeros, SectionZero, ZerosDetails, PROBE_RADIUS, PROBE_SAMPLES};

/// Smallest admissible gap between selected and unselected bands.
pub const BAND_GAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("invalid sphere grid: {0}")]
    InvalidGrid(String),
    #[error("invalid band selection: {0}")]
    InvalidBands(String),
    #[error("bands {bands} are not isolated at {point:?} (gap {gap:.3e})")]
    Degenerate { bands: BandSelection, point: [f64; 3], gap: f64 },
    #[error("{method} needs a single band, got {bands}")]
    RankUnsupported { method: ChernMethod, bands: BandSelection },
    #[error("largest cell phase {max_phase:.3} rad still >= pi/2 on a {grid}-grid; the bundle is degenerate near the sphere")]
    RefinementFailed { max_phase: f64, grid: usize },
    #[error("reference section vanishes on the {hemisphere} hemisphere (min |s|^2 = {min_norm_sq:.3e}); supply another reference vector")]
    ReferenceVanishes { hemisphere: &'static str, min_norm_sq: f64 },
    #[error("reference vector has length {got}, expected {expected}")]
    ReferenceLength { expected: usize, got: usize },
    #[error("winding sample {index} is zero")]
    ZeroSample { index: usize },
    #[error("phase step {step:.3} rad at sample {index} is too large to unwrap; increase the sampling")]
    PhaseAliasing { index: usize, step: f64 },
    #[error("section zero at {point:?} has local winding 0; refine the probe radius")]
    DegenerateZero { point: [f64; 3] },
    #[error("section zeros at {a:?} and {b:?} are closer than twice the probe radius")]
    ZerosTooClose { a: [f64; 3], b: [f64; 3] },
    #[error("no reference vector gives a section with isolated nondegenerate zeros: {0}")]
    NoGenericSection(String),
    #[error(transparent)]
    Quantization(#[from] QuantizationError),
}

impl From<LinalgError> for TopologyError {
    fn from(e: LinalgError) -> Self {
        Self::Quantization(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernMethod {
    Curvature,
    Clutching,
    SectionZeros,
}

impl fmt::Display for ChernMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Curvature => "curvature",
            Self::Clutching => "clutching",
            Self::SectionZeros => "section_zeros",
        })
    }
}

/// Contiguous bands `first..=last`, numbered from 1 in ascending eigenvalue order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BandSelection {
    pub first: usize,
    pub last: usize,
}

impl BandSelection {
    pub fn new(first: usize, last: usize) -> Result<Self, TopologyError> {
        if first == 0 || last < first {
            return Err(TopologyError::InvalidBands(format!("need 1 <= first <= last, got {first}..={last}")));
        }
        Ok(Self { first, last })
    }

    pub fn single(band: usize) -> Result<Self, TopologyError> {
        Self::new(band, band)
    }

    pub fn rank(&self) -> usize {
        self.last - self.first + 1
    }

    /// Zero-based column range.
    pub fn columns(&self) -> Range<usize> {
        self.first - 1..self.last
    }
}

impl fmt::Display for BandSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.first == self.last {
            write!(f, "{{{}}}", self.first)
        } else {
            write!(f, "{{{}..{}}}", self.first, self.last)
        }
    }
}

/// Ascending eigenvalues and orthonormal eigenvectors of a point symbol.
#[derive(Debug, Clone)]
pub struct PointEigensystem {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Eigendecomposition of `H(p)`; every eigenvector's largest component is made
/// real positive. Fails if `bands` is not separated from the rest of the
/// spectrum by at least [`BAND_GAP_TOLERANCE`].
pub fn point_eigensystem(
    symbol: &AffineMatrixSymbol,
    point: [f64; 3],
    bands: BandSelection,
) -> Result<PointEigensystem, TopologyError> {
    let d = symbol.dim();
    if bands.last > d {
        return Err(TopologyError::InvalidBands(format!("{bands} exceeds dimension {d}")));
    }
    symbol.checked_const_term(point[0])?;
    let (values, mut vectors) = linalg::hermitian_eigen(&symbol.eval(point[0], point[1], point[2]))?;
    for j in 0..d {
        linalg::fix_column_phase(&mut vectors, j);
    }
    let cols = bands.columns();
    let mut gap = f64::INFINITY;
    if cols.start > 0 {
        gap = gap.min(values[cols.start] - values[cols.start - 1]);
    }
    if cols.end < d {
        gap = gap.min(values[cols.end] - values[cols.end - 1]);
    }
    if gap < BAND_GAP_TOLERANCE {
        return Err(TopologyError::Degenerate { bands, point, gap });
    }
    Ok(PointEigensystem { values, vectors })
}

/// A band bundle of a symbol: the span of the selected eigenvectors at each point.
#[derive(Debug, Clone)]
pub struct BandProjectorField {
    symbol: AffineMatrixSymbol,
    bands: BandSelection,
}

impl BandProjectorField {
    pub fn new(symbol: AffineMatrixSymbol, bands: BandSelection) -> Result<Self, TopologyError> {
        if bands.last > symbol.dim() {
            return Err(TopologyError::InvalidBands(format!("{bands} exceeds dimension {}", symbol.dim())));
        }
        Ok(Self { symbol, bands })
    }

    pub fn symbol(&self) -> &AffineMatrixSymbol {
        &self.symbol
    }

    pub fn bands(&self) -> BandSelection {
        self.bands
    }

    pub fn rank(&self) -> usize {
        self.bands.rank()
    }

    pub fn dim(&self) -> usize {
        self.symbol.dim()
    }

    /// Orthonormal `d × r` frame of the bundle at `point`.
    pub fn frame(&self, point: [f64; 3]) -> Result<CMat, TopologyError> {
        let sys = point_eigensystem(&self.symbol, point, self.bands)?;
        let cols = self.bands.columns();
        Ok(CMat::from_fn(self.dim(), self.rank(), |i, j| sys.vectors[(i, cols.start + j)]))
    }

    /// The single band vector at `point` (rank-1 bundles only).
    pub fn vector(&self, point: [f64; 3]) -> Result<Vec<Complex64>, TopologyError> {
        Ok(linalg::column(&self.frame(point)?, 0))
    }

    pub fn projector(&self, point: [f64; 3]) -> Result<CMat, TopologyError> {
        let v = self.frame(point)?;
        Ok(&v * v.adjoint())
    }

    /// `Π(p) u`.
    pub fn project(&self, point: [f64; 3], u: &[Complex64]) -> Result<Vec<Complex64>, TopologyError> {
        let v = self.frame(point)?;
        let mut out = vec![linalg::ZERO; self.dim()];
        for j in 0..self.rank() {
            let col = linalg::column(&v, j);
            let c = linalg::inner(&col, u);
            for (o, x) in out.iter_mut().zip(&col) {
                *o += x * c;
            }
        }
        Ok(out)
    }

    /// Frames at every vertex of `grid`, in vertex order.
    pub fn frames_on(&self, grid: &SphereGrid) -> Result<Vec<CMat>, TopologyError> {
        grid.vertices().par_iter().map(|&p| self.frame(p)).collect()
    }

    pub(crate) fn require_rank_one(&self, method: ChernMethod) -> Result<(), TopologyError> {
        if self.rank() != 1 {
            return Err(TopologyError::RankUnsupported { method, bands: self.bands });
        }
        Ok(())
    }
}

/// Method-specific diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChernDetails {
    Curvature(CurvatureDetails),
    Clutching(ClutchingDetails),
    SectionZeros(ZerosDetails),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernReport {
    pub method: ChernMethod,
    pub bands: BandSelection,
    #[serde(rename = "C")]
    pub c: i64,
    pub raw_value: f64,
    pub residual: f64,
    pub details: ChernDetails,
}

impl ChernReport {
    pub(crate) fn from_raw(method: ChernMethod, bands: BandSelection, raw_value: f64, details: ChernDetails) -> Self {
        let c = raw_value.round();
        Self { method, bands, c: c as i64, raw_value, residual: (raw_value - c).abs(), details }
    }
}

/// Guard against unwrapping ambiguity: consecutive phase steps must stay
/// below this.
pub const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_2;

/// Total phase advance of a closed loop of nonzero samples, in turns.
pub fn winding_raw(samples: &[Complex64]) -> Result<f64, TopologyError> {
    if let Some(index) = samples.iter().position(|z| *z == linalg::ZERO || !z.is_finite()) {
        return Err(TopologyError::ZeroSample { index });
    }
    let n = samples.len();
    let mut total = 0.0;
    for k in 0..n {
        let step = (samples[(k + 1) % n] / samples[k]).arg();
        if step.abs() >= MAX_PHASE_STEP {
            return Err(TopologyError::PhaseAliasing { index: k, step });
        }
        total += step;
    }
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Degree of the closed curve traced by `samples` around the origin.
pub fn winding_number(samples: &[Complex64]) -> Result<i64, TopologyError> {
    Ok(winding_raw(samples)?.round() as i64)
}
