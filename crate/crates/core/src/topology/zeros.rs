use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{cross3, dot3, normalize3};
use super::{winding_raw, BandProjectorField, ChernDetails, ChernMethod, ChernReport, SphereGrid, TopologyError};
use crate::linalg;

pub const PROBE_RADIUS: f64 = 1e-3;
pub const PROBE_SAMPLES: usize = 64;
/// A located zero must satisfy `|Π u₀| <` this.
pub const ZERO_TOLERANCE: f64 = 1e-10;
const SCAN_GRID: usize = 24;
const NEWTON_ITERATIONS: usize = 60;
const FD_STEP: f64 = 1e-6;
const MAX_NEWTON_STEP: f64 = 0.2;
const UNRESOLVED_MINIMUM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionZero {
    pub point: [f64; 3],
    pub local_index: i64,
    /// `|Π(p) u₀|` at the located point.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZerosDetails {
    /// Reference vector as `(re, im)` pairs.
    pub reference: Vec<[f64; 2]>,
    pub zeros: Vec<SectionZero>,
    pub probe_radius: f64,
    pub probe_samples: usize,
}

/// Right-handed tangent frame `(e₁, e₂)` at `p`, i.e. `e₁ × e₂ = p`.
fn tangent_frame(p: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let axis = (0..3).min_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs())).unwrap();
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let d = dot3(a, p);
    let e1 = normalize3([a[0] - d * p[0], a[1] - d * p[1], a[2] - d * p[2]]);
    (e1, cross3(p, e1))
}

fn offset(p: [f64; 3], e1: [f64; 3], e2: [f64; 3], t1: f64, t2: f64) -> [f64; 3] {
    normalize3([0, 1, 2].map(|i| p[i] + t1 * e1[i] + t2 * e2[i]))
}

/// `|⟨v(p)|u⟩|² = |Π(p) u|²` for a rank-1 bundle.
fn section_norm_sq(field: &BandProjectorField, p: [f64; 3], u: &[Complex64]) -> Result<f64, TopologyError> {
    Ok(linalg::inner(&field.vector(p)?, u).norm_sqr())
}

/// Section coefficient in the local trivialization given by `w`:
/// `⟨w|Π(p) u⟩`.
fn local_coefficient(field: &BandProjectorField, p: [f64; 3], u: &[Complex64], w: &[Complex64]) -> Result<Complex64, TopologyError> {
    let v = field.vector(p)?;
    Ok(linalg::inner(w, &v) * linalg::inner(&v, u))
}

/// Newton iteration on `⟨w|Π(p)u⟩ = 0` in tangent-plane coordinates, starting
/// at `p`. Returns `None` if the iteration does not reach [`ZERO_TOLERANCE`].
fn refine_zero(field: &BandProjectorField, start: [f64; 3], u: &[Complex64]) -> Result<Option<[f64; 3]>, TopologyError> {
    let w = field.vector(start)?;
    let mut p = start;
    for _ in 0..NEWTON_ITERATIONS {
        if section_norm_sq(field, p, u)?.sqrt() < ZERO_TOLERANCE {
            return Ok(Some(p));
        }
        let (e1, e2) = tangent_frame(p);
        let g0 = local_coefficient(field, p, u, &w)?;
        let dg = |t1: f64, t2: f64| -> Result<Complex64, TopologyError> {
            let plus = local_coefficient(field, offset(p, e1, e2, t1, t2), u, &w)?;
            let minus = local_coefficient(field, offset(p, e1, e2, -t1, -t2), u, &w)?;
            Ok((plus - minus) / (2.0 * FD_STEP))
        };
        let j1 = dg(FD_STEP, 0.0)?;
        let j2 = dg(0.0, FD_STEP)?;
        // [Re j1 Re j2; Im j1 Im j2] t = −[Re g; Im g]
        let det = j1.re * j2.im - j2.re * j1.im;
        if det.abs() < 1e-14 || !det.is_finite() {
            return Ok(None);
        }
        let mut t1 = -(j2.im * g0.re - j2.re * g0.im) / det;
        let mut t2 = -(-j1.im * g0.re + j1.re * g0.im) / det;
        let len = (t1 * t1 + t2 * t2).sqrt();
        if len > MAX_NEWTON_STEP {
            t1 *= MAX_NEWTON_STEP / len;
            t2 *= MAX_NEWTON_STEP / len;
        }
        p = offset(p, e1, e2, t1, t2);
    }
    Ok((section_norm_sq(field, p, u)?.sqrt() < ZERO_TOLERANCE).then_some(p))
}

/// Winding of the section coefficient around a small circle at `p`,
/// traversed counter-clockwise as seen from outside the sphere.
fn local_index(field: &BandProjectorField, p: [f64; 3], u: &[Complex64]) -> Result<i64, TopologyError> {
    let w = field.vector(p)?;
    let (e1, e2) = tangent_frame(p);
    let samples: Vec<Complex64> = (0..PROBE_SAMPLES)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / PROBE_SAMPLES as f64;
            local_coefficient(field, offset(p, e1, e2, PROBE_RADIUS * t.cos(), PROBE_RADIUS * t.sin()), u, &w)
        })
        .collect::<Result<_, _>>()?;
    Ok(winding_raw(&samples)?.round() as i64)
}

fn zeros_for(field: &BandProjectorField, u: &[Complex64]) -> Result<Vec<SectionZero>, TopologyError> {
    let grid = SphereGrid::build(SCAN_GRID);
    let values: Vec<f64> = grid
        .vertices()
        .par_iter()
        .map(|&p| section_norm_sq(field, p, u))
        .collect::<Result<_, _>>()?;
    let neighbors = grid.neighbors();
    let candidates: Vec<usize> = (0..values.len())
        .filter(|&k| neighbors[k].iter().all(|&m| values[k] <= values[m]))
        .collect();
    let mut located: Vec<[f64; 3]> = Vec::new();
    for k in candidates {
        let Some(p) = refine_zero(field, grid.vertices()[k], u)? else {
            // A near-zero minimum that Newton cannot resolve is a degenerate zero.
            if values[k] < UNRESOLVED_MINIMUM {
                return Err(TopologyError::DegenerateZero { point: grid.vertices()[k] });
            }
            continue;
        };
        let dup = located.iter().any(|q| {
            let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            dot3(d, d).sqrt() < 1e-6
        });
        if !dup {
            located.push(p);
        }
    }
    for (i, a) in located.iter().enumerate() {
        for b in &located[i + 1..] {
            let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            if dot3(d, d).sqrt() < 2.0 * PROBE_RADIUS {
                return Err(TopologyError::ZerosTooClose { a: *a, b: *b });
            }
        }
    }
    located.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    located
        .into_iter()
        .map(|p| {
            let local_index = local_index(field, p, u)?;
            if local_index == 0 {
                return Err(TopologyError::DegenerateZero { point: p });
            }
            Ok(SectionZero { point: p, local_index, residual: section_norm_sq(field, p, u)?.sqrt() })
        })
        .collect()
}

/// Reference vectors tried when none is given: `e_d`, `e_1`, …, `e_{d−1}`,
/// then a vector with generic phases.
pub fn default_references(dim: usize) -> Vec<Vec<Complex64>> {
    let unit = |k: usize| {
        let mut v = vec![linalg::ZERO; dim];
        v[k] = linalg::ONE;
        v
    };
    let mut out = vec![unit(dim - 1)];
    out.extend((0..dim - 1).map(unit));
    if dim > 1 {
        let s = 1.0 / (dim as f64).sqrt();
        out.push((0..dim).map(|k| Complex64::from_polar(s, [0.0, 0.7, 1.9, 2.6][k % 4] + 0.3 * (k / 4) as f64)).collect());
    }
    out
}

/// Sum of local indices of the zeros of `p ↦ Π(p) u₀`. Zeros are seeded from
/// local minima of `|Π u₀|²` on a cube-sphere, polished by Newton's method to
/// `|Π u₀| <` [`ZERO_TOLERANCE`], and their indices read off as windings on a
/// circle of radius [`PROBE_RADIUS`]. Without an explicit `reference`, the
/// candidates of [`default_references`] are tried in turn until one yields
/// isolated nondegenerate zeros.
pub fn chern_section_zeros(field: &BandProjectorField, reference: Option<&[Complex64]>) -> Result<ChernReport, TopologyError> {
    field.require_rank_one(ChernMethod::SectionZeros)?;
    let d = field.dim();
    let candidates = match reference {
        Some(u) if u.len() != d => return Err(TopologyError::ReferenceLength { expected: d, got: u.len() }),
        Some(u) => vec![u.to_vec()],
        None => default_references(d),
    };
    let mut failures = Vec::new();
    for u in &candidates {
        match zeros_for(field, u) {
            Ok(zeros) => {
                let raw: i64 = zeros.iter().map(|z| z.local_index).sum();
                let details = ZerosDetails {
                    reference: u.iter().map(|z| [z.re, z.im]).collect(),
                    zeros,
                    probe_radius: PROBE_RADIUS,
                    probe_samples: PROBE_SAMPLES,
                };
                return Ok(ChernReport::from_raw(
                    ChernMethod::SectionZeros,
                    field.bands(),
                    raw as f64,
                    ChernDetails::SectionZeros(details),
                ));
            }
            Err(e) if reference.is_none() => failures.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    Err(TopologyError::NoGenericSection(failures.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use crate::models::{matsuno_symbol, normal_form_symbol, ts2_symbol};
    use crate::topology::BandSelection;

    fn zeros_of(r: &ChernReport) -> &[SectionZero] {
        let ChernDetails::SectionZeros(d) = &r.details else { panic!() };
        &d.zeros
    }

    fn near(p: [f64; 3], q: [f64; 3]) -> bool {
        (0..3).all(|i| (p[i] - q[i]).abs() < 1e-6)
    }

    #[test]
    fn frame_is_right_handed() {
        for p in [[1.0, 0.0, 0.0], normalize3([0.3, -0.4, 0.8]), [0.0, 0.0, -1.0]] {
            let (e1, e2) = tangent_frame(p);
            let n = cross3(e1, e2);
            assert!((0..3).all(|i| (n[i] - p[i]).abs() < 1e-14));
        }
    }

    #[test]
    fn normal_form_single_zero_at_north_pole() {
        let f = BandProjectorField::new(normal_form_symbol(), BandSelection::single(1).unwrap()).unwrap();
        let r = chern_section_zeros(&f, Some(&[ZERO, ONE])).unwrap();
        let z = zeros_of(&r);
        assert_eq!(z.len(), 1);
        assert!(near(z[0].point, [1.0, 0.0, 0.0]), "{:?}", z[0].point);
        assert_eq!((z[0].local_index, r.c), (1, 1));
    }

    #[test]
    fn matsuno_outer_bands_with_third_axis() {
        let e3 = [ZERO, ZERO, ONE];
        for (band, index) in [(1, 1), (3, -1)] {
            let f = BandProjectorField::new(matsuno_symbol(), BandSelection::single(band).unwrap()).unwrap();
            let r = chern_section_zeros(&f, Some(&e3)).unwrap();
            let z = zeros_of(&r);
            assert_eq!(z.len(), 2, "band {band}: {z:?}");
            assert!(near(z[0].point, [-1.0, 0.0, 0.0]) && near(z[1].point, [1.0, 0.0, 0.0]));
            assert!(z.iter().all(|z| z.local_index == index));
            assert_eq!(r.c, 2 * index);
        }
    }

    #[test]
    fn tangent_bundle_zeros_at_poles() {
        let f = BandProjectorField::new(ts2_symbol(), BandSelection::single(1).unwrap()).unwrap();
        let r = chern_section_zeros(&f, Some(&[ZERO, ZERO, ONE])).unwrap();
        let z = zeros_of(&r);
        assert_eq!(z.len(), 2);
        assert!(near(z[0].point, [0.0, 0.0, -1.0]) && near(z[1].point, [0.0, 0.0, 1.0]));
        assert!(z.iter().all(|z| z.local_index == 1));
    }

    #[test]
    fn matsuno_middle_band_needs_generic_reference() {
        let f = BandProjectorField::new(matsuno_symbol(), BandSelection::single(2).unwrap()).unwrap();
        assert!(chern_section_zeros(&f, Some(&[ZERO, ZERO, ONE])).is_err());
        let r = chern_section_zeros(&f, None).unwrap();
        assert_eq!(r.c, 0);
        assert_eq!(zeros_of(&r).len(), 2);
    }
}
