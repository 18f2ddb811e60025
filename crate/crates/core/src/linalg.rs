//! Small dense complex linear-algebra helpers shared by the quantization,
//! flow and topology modules.

use faer::{Mat, Side};
use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMat = Mat<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("Hermitian eigensolver did not converge on a {0}x{0} matrix")]
    NoConvergence(usize),
}

/// Builds a `rows x cols` matrix from row-major entries.
pub fn cmat_from_rows(rows: &[&[Complex64]]) -> CMat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn cmat_zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn cmat_identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max(a[(i, j)].norm());
        }
    }
    worst
}

/// `max |m - m^H|`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Overwrites the strict lower triangle with the conjugate of the upper one and
/// drops imaginary parts on the diagonal, so the result is Hermitian bit for bit.
pub fn enforce_hermitian(m: &mut CMat) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = Complex64::new(m[(j, j)].re, 0.0);
        for i in 0..j {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
}

/// `<a|b>` with the first argument conjugated.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [Complex64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for z in a.iter_mut() {
            *z /= n;
        }
    }
    n
}

pub fn column(m: &CMat, j: usize) -> Vec<Complex64> {
    m.col(j).iter().copied().collect()
}

pub fn mat_vec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(m.ncols(), v.len());
    let mut out = vec![ZERO; m.nrows()];
    for (j, vj) in v.iter().enumerate() {
        if *vj == ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * vj;
        }
    }
    out
}

/// `||m v - lambda v||_2`.
pub fn eigen_residual(m: &CMat, v: &[Complex64], lambda: f64) -> f64 {
    let mv = mat_vec(m, v);
    mv.iter()
        .zip(v)
        .map(|(a, b)| (a - b * lambda).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (as columns).
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat), LinalgError> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let evd = m
        .self_adjoint_eigen(Side::Upper)
        .map_err(|_| LinalgError::NoConvergence(n))?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Determinant of a small square matrix by Gaussian elimination with partial
/// pivoting.
pub fn det_small(m: &CMat) -> Complex64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a: Vec<Vec<Complex64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    let mut det = ONE;
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&p, &q| a[p][k].norm().total_cmp(&a[q][k].norm()))
            .unwrap_or(k);
        if a[pivot][k] == ZERO {
            return ZERO;
        }
        if pivot != k {
            a.swap(pivot, k);
            det = -det;
        }
        let akk = a[k][k];
        det *= akk;
        for i in (k + 1)..n {
            let factor = a[i][k] / akk;
            if factor == ZERO {
                continue;
            }
            for j in k..n {
                let t = a[k][j];
                a[i][j] -= factor * t;
            }
        }
    }
    det
}

/// Multiplies column `j` by the phase that makes its largest-modulus entry real
/// and positive (first index wins ties).
pub fn fix_column_phase(m: &mut CMat, j: usize) {
    let mut best = 0usize;
    let mut best_norm = -1.0f64;
    for i in 0..m.nrows() {
        let v = m[(i, j)].norm();
        if v > best_norm * (1.0 + 1e-12) {
            best = i;
            best_norm = v;
        }
    }
    if best_norm <= 0.0 {
        return;
    }
    let phase = m[(best, j)].conj() / best_norm;
    for i in 0..m.nrows() {
        m[(i, j)] *= phase;
    }
    m[(best, j)] = Complex64::new(m[(best, j)].re, 0.0);
}
