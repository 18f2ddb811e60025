use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::normalize3;
use super::{winding_raw, BandProjectorField, ChernDetails, ChernMethod, ChernReport, SphereGrid, TopologyError};
use crate::linalg;

/// Sections projected from fixed vectors must stay above this squared norm.
pub const MIN_SECTION_NORM_SQ: f64 = 1e-6;
/// Steps per meridian for the parallel-transport trivialization.
const MERIDIAN_STEPS: usize = 96;
const HEMISPHERE_GRID: usize = 24;

/// How the two hemispheres were trivialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trivialization {
    /// `s(p) = Π(p) u` with fixed reference vectors.
    ProjectedReferences,
    /// Pole vectors parallel-transported along meridians.
    ParallelTransport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutchingDetails {
    pub equator_samples: usize,
    pub trivialization: Trivialization,
    /// Smallest `|s|²` seen on each hemisphere (projected references only).
    pub min_section_norm_sq: Option<[f64; 2]>,
    /// Transition phase `arg f₂₁` at `θ = 0`.
    pub f21_phase_at_zero: f64,
}

fn equator(theta: f64) -> [f64; 3] {
    [0.0, theta.cos(), theta.sin()]
}

fn hemisphere_min_norm(field: &BandProjectorField, u: &[Complex64], north: bool) -> Result<f64, TopologyError> {
    let grid = SphereGrid::build(HEMISPHERE_GRID);
    let mut min = f64::INFINITY;
    for &p in grid.vertices() {
        if (north && p[0] < 0.0) || (!north && p[0] > 0.0) {
            continue;
        }
        min = min.min(linalg::norm(&field.project(p, u)?).powi(2));
    }
    Ok(min)
}

/// Rank-1 frame obtained by transporting `v0` from `from` to `to` along the
/// great circle: `v ← Π v / |Π v|` at each step.
fn transport(field: &BandProjectorField, from: [f64; 3], to: [f64; 3], v0: &[Complex64]) -> Result<Vec<Complex64>, TopologyError> {
    let mut v = v0.to_vec();
    for k in 1..=MERIDIAN_STEPS {
        let t = k as f64 / MERIDIAN_STEPS as f64 * PI / 2.0;
        // from ⟂ to, so this is the unit-speed arc.
        let p = normalize3([0, 1, 2].map(|i| from[i] * t.cos() + to[i] * t.sin()));
        v = field.project(p, &v)?;
        linalg::normalize(&mut v);
    }
    Ok(v)
}

/// Winding of the transition function `f₂₁(θ) = ⟨s₁|s₂⟩` on the equator
/// `(0, cos θ, sin θ)`, with `s₁` defined on `μ ≥ 0` and `s₂` on `μ ≤ 0`.
///
/// With explicit `references = (u₁, u₂)` the hemisphere sections are
/// `Π u₁`, `Π u₂` and must stay nonvanishing on their hemispheres. Without
/// them the band vectors at the poles `(±1, 0, 0)` are projected; if either
/// of those sections vanishes, the pole vectors are parallel-transported along
/// meridians instead, which always yields a smooth trivialization.
pub fn chern_clutching(
    field: &BandProjectorField,
    equator_samples: usize,
    references: Option<(&[Complex64], &[Complex64])>,
) -> Result<ChernReport, TopologyError> {
    field.require_rank_one(ChernMethod::Clutching)?;
    let d = field.dim();
    let (u1, u2, explicit) = match references {
        Some((a, b)) => {
            for r in [a, b] {
                if r.len() != d {
                    return Err(TopologyError::ReferenceLength { expected: d, got: r.len() });
                }
            }
            (a.to_vec(), b.to_vec(), true)
        }
        None => (field.vector([1.0, 0.0, 0.0])?, field.vector([-1.0, 0.0, 0.0])?, false),
    };

    let n1 = hemisphere_min_norm(field, &u1, true)?;
    let n2 = hemisphere_min_norm(field, &u2, false)?;
    let projected = n1 > MIN_SECTION_NORM_SQ && n2 > MIN_SECTION_NORM_SQ;
    if explicit && !projected {
        let (hemisphere, min_norm_sq) = if n1 <= MIN_SECTION_NORM_SQ { ("northern", n1) } else { ("southern", n2) };
        return Err(TopologyError::ReferenceVanishes { hemisphere, min_norm_sq });
    }

    let thetas: Vec<f64> = (0..equator_samples).map(|k| 2.0 * PI * k as f64 / equator_samples as f64).collect();
    let f21: Vec<Complex64> = thetas
        .iter()
        .map(|&t| {
            let p = equator(t);
            let (s1, s2) = if projected {
                (field.project(p, &u1)?, field.project(p, &u2)?)
            } else {
                (transport(field, [1.0, 0.0, 0.0], p, &u1)?, transport(field, [-1.0, 0.0, 0.0], p, &u2)?)
            };
            Ok(linalg::inner(&s1, &s2))
        })
        .collect::<Result<_, TopologyError>>()?;
    let raw = winding_raw(&f21)?;
    let details = ClutchingDetails {
        equator_samples,
        trivialization: if projected { Trivialization::ProjectedReferences } else { Trivialization::ParallelTransport },
        min_section_norm_sq: projected.then_some([n1, n2]),
        f21_phase_at_zero: f21[0].arg(),
    };
    Ok(ChernReport::from_raw(ChernMethod::Clutching, field.bands(), raw, ChernDetails::Clutching(details)))
}
