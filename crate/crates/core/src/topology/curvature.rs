use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BandProjectorField, ChernDetails, ChernMethod, ChernReport, SphereGrid, TopologyError};
use crate::linalg::{self, CMat};

/// Refinement stops once the grid would exceed this size.
pub const MAX_REFINED_GRID: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureDetails {
    /// Grid actually used, after any refinement.
    pub grid_size: usize,
    pub requested_grid_size: usize,
    pub max_cell_phase: f64,
}

/// Berry phase of one cell, for heat maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellPhase {
    pub face: u8,
    pub i: u16,
    pub j: u16,
    pub center: [f64; 3],
    pub phase: f64,
}

/// `det(A^H B)` for two `d × r` frames.
fn link(a: &CMat, b: &CMat) -> Complex64 {
    let r = a.ncols();
    if r == 1 {
        return (0..a.nrows()).map(|k| a[(k, 0)].conj() * b[(k, 0)]).sum();
    }
    let overlap = CMat::from_fn(r, r, |i, j| (0..a.nrows()).map(|k| a[(k, i)].conj() * b[(k, j)]).sum());
    linalg::det_small(&overlap)
}

fn phases(grid: &SphereGrid, frames: &[CMat]) -> Vec<f64> {
    grid.cells()
        .par_iter()
        .map(|cell| {
            let mut prod = Complex64::new(1.0, 0.0);
            for k in 0..4 {
                prod *= link(&frames[cell[k]], &frames[cell[(k + 1) % 4]]);
            }
            -prod.arg()
        })
        .collect()
}

/// Chern number from precomputed vertex frames: `Σ_cells −arg ∏ det⟨V_i|V_{i+1}⟩ / 2π`.
/// Returns the raw value and the largest `|cell phase|`. The sum runs in the
/// fixed cell order, so the result is reproducible bit for bit.
pub fn chern_curvature_from_frames(grid: &SphereGrid, frames: &[CMat]) -> (f64, f64) {
    let phases = phases(grid, frames);
    let max = phases.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let total: f64 = phases.iter().sum();
    (total / (2.0 * PI), max)
}

/// Plaquette Berry curvature. A cell phase of magnitude `≥ π/2` means the
/// grid is too coarse for the bundle there; the grid is doubled until that
/// clears or [`MAX_REFINED_GRID`] is reached.
pub fn chern_curvature(field: &BandProjectorField, grid: &SphereGrid) -> Result<ChernReport, TopologyError> {
    let requested = grid.size();
    let mut owned;
    let mut current = grid;
    loop {
        let frames = field.frames_on(current)?;
        let (raw, max_phase) = chern_curvature_from_frames(current, &frames);
        if max_phase < PI / 2.0 {
            let details = CurvatureDetails { grid_size: current.size(), requested_grid_size: requested, max_cell_phase: max_phase };
            return Ok(ChernReport::from_raw(ChernMethod::Curvature, field.bands(), raw, ChernDetails::Curvature(details)));
        }
        let next = current.size() * 2;
        if next > MAX_REFINED_GRID {
            return Err(TopologyError::RefinementFailed { max_phase, grid: current.size() });
        }
        owned = SphereGrid::build(next);
        current = &owned;
    }
}

/// Per-cell Berry phases on `grid` (no refinement).
pub fn cell_phases(field: &BandProjectorField, grid: &SphereGrid) -> Result<Vec<CellPhase>, TopologyError> {
    let frames = field.frames_on(grid)?;
    let phases = phases(grid, &frames);
    Ok(phases
        .into_iter()
        .enumerate()
        .map(|(c, phase)| {
            let (face, i, j) = grid.cell_position(c);
            CellPhase { face, i, j, center: grid.cell_center(c), phase }
        })
        .collect())
}
