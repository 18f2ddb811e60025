use std::collections::HashMap;

use super::TopologyError;

pub const MIN_GRID_SIZE: usize = 16;

/// Equiangular cube-sphere: six faces of `n × n` quadrilateral cells, shared
/// vertices merged. Cells are listed counter-clockwise as seen from outside,
/// with `(μ, x, ξ)` taken as a right-handed frame.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    n: usize,
    vertices: Vec<[f64; 3]>,
    cells: Vec<[usize; 4]>,
    cell_faces: Vec<(u8, u16, u16)>,
}

impl SphereGrid {
    pub fn new(n: usize) -> Result<Self, TopologyError> {
        if n < MIN_GRID_SIZE {
            return Err(TopologyError::InvalidGrid(format!("grid size {n} < {MIN_GRID_SIZE}")));
        }
        Ok(Self::build(n))
    }

    pub(crate) fn build(n: usize) -> Self {
        let mut ticks: Vec<f64> = (0..=n)
            .map(|i| (std::f64::consts::FRAC_PI_4 * (-1.0 + 2.0 * i as f64 / n as f64)).tan())
            .collect();
        // Cube edges must coincide exactly between neighboring faces.
        ticks[0] = -1.0;
        ticks[n] = 1.0;
        let mut vertices = Vec::with_capacity(6 * n * n + 2);
        let mut lookup: HashMap<[i64; 3], usize> = HashMap::new();
        let mut cells = Vec::with_capacity(6 * n * n);
        let mut cell_faces = Vec::with_capacity(6 * n * n);
        let mut local = vec![0usize; (n + 1) * (n + 1)];
        for face in 0..6u8 {
            let axis = usize::from(face / 2);
            let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
            let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
            // (u, v) must map to a frame whose cross product is the outward normal.
            let (du, dv) = if sign > 0.0 { (b, c) } else { (c, b) };
            for j in 0..=n {
                for i in 0..=n {
                    let mut p = [0.0; 3];
                    p[axis] = sign;
                    p[du] = ticks[i];
                    p[dv] = ticks[j];
                    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    let p = [p[0] / r, p[1] / r, p[2] / r];
                    let key = p.map(|x| (x * 1e9).round() as i64);
                    let idx = *lookup.entry(key).or_insert_with(|| {
                        vertices.push(p);
                        vertices.len() - 1
                    });
                    local[j * (n + 1) + i] = idx;
                }
            }
            for j in 0..n {
                for i in 0..n {
                    let at = |i: usize, j: usize| local[j * (n + 1) + i];
                    cells.push([at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
                    cell_faces.push((face, i as u16, j as u16));
                }
            }
        }
        Self { n, vertices, cells, cell_faces }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 4]] {
        &self.cells
    }

    /// `(face, i, j)` of each cell; faces are ordered `+μ, −μ, +x, −x, +ξ, −ξ`.
    pub fn cell_position(&self, cell: usize) -> (u8, u16, u16) {
        self.cell_faces[cell]
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 3] {
        let mut c = [0.0; 3];
        for &v in &self.cells[cell] {
            for k in 0..3 {
                c[k] += self.vertices[v][k];
            }
        }
        normalize3(c)
    }

    /// Vertex adjacency through cell edges.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for cell in &self.cells {
            for k in 0..4 {
                let (a, b) = (cell[k], cell[(k + 1) % 4]);
                if !out[a].contains(&b) {
                    out[a].push(b);
                }
                if !out[b].contains(&a) {
                    out[b].push(a);
                }
            }
        }
        out
    }

    /// Solid angle of a cell, split into two spherical triangles.
    pub fn cell_solid_angle(&self, cell: usize) -> f64 {
        let [a, b, c, d] = self.cells[cell].map(|k| self.vertices[k]);
        triangle_solid_angle(a, b, c) + triangle_solid_angle(a, c, d)
    }
}

fn triangle_solid_angle(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let det = dot3(a, cross3(b, c));
    let denom = 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a);
    2.0 * det.atan2(denom)
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn normalize3(p: [f64; 3]) -> [f64; 3] {
    let r = dot3(p, p).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}
