//! Matrix representations of quantized matrix-valued symbols in a truncated
//! Hermite basis.
//!
//! The slow Hilbert space is cut to the Hermite levels `0..=M`; a state of the
//! quantized operator is a vector in `(levels 0..=M) ⊗ C^d`, stored component
//! major: entry `c * (M + 1) + n` is component `c` on level `n`.
//!
//! Affine entries are quantized exactly by substituting the truncated
//! position/momentum matrices built from the ladder operators. Localized
//! Gaussian terms `P exp(-(x² + ξ²)/σ²)` are also supported: their Weyl
//! quantization is the function `(1 + κ)^-1 q^N` of the number operator with
//! `κ = ε/σ²` and `q = (1 - κ)/(1 + κ)`, which is diagonal in this basis.

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;

use crate::linalg::{
    self, cmat_identity, cmat_zeros, enforce_hermitian, hermiticity_defect, CMat, LinalgError, I, ZERO,
};

/// Eigenpairs whose weight on the guard levels exceeds this are truncation artifacts.
pub const SPURIOUS_THRESHOLD: f64 = 1e-8;

/// Guard levels used when a caller does not ask for a specific number.
pub const DEFAULT_GUARD_LEVELS: usize = 5;

const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues closer than this (relative) are treated as one degenerate cluster.
const CLUSTER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantizationError {
    #[error("invalid truncated basis: {0}")]
    InvalidBasis(String),
    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),
    #[error("constant term A(mu) at mu = {mu} is not Hermitian (defect {defect:.3e})")]
    NonHermitian { mu: f64, defect: f64 },
    #[error(
        "gap certificate violated for band {gap_band}: need lower band < {lower_bound:.4}, upper band > {upper_bound:.4}, \
         sampled worst case at {point:?} (lower max {lower_max:?}, upper min {upper_min:?})"
    )]
    GapViolated {
        gap_band: usize,
        lower_bound: f64,
        upper_bound: f64,
        lower_max: Option<f64>,
        upper_min: Option<f64>,
        point: [f64; 3],
    },
    #[error("vector of length {got} does not match operator size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Hermite levels `0..=max_level`, semiclassical parameter ε and the number of
/// top levels watched for truncation artifacts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedBasis {
    max_level: usize,
    epsilon: f64,
    guard_levels: usize,
}

impl TruncatedBasis {
    pub fn new(max_level: usize, epsilon: f64, guard_levels: usize) -> Result<Self, QuantizationError> {
        if max_level < 2 {
            return Err(QuantizationError::InvalidBasis(format!("max_level {max_level} < 2")));
        }
        if guard_levels < 1 {
            return Err(QuantizationError::InvalidBasis("guard_levels must be at least 1".into()));
        }
        if max_level < 2 * guard_levels {
            return Err(QuantizationError::InvalidBasis(format!(
                "max_level {max_level} < 2 * guard_levels ({guard_levels})"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(QuantizationError::InvalidBasis(format!("epsilon {epsilon} must be positive")));
        }
        Ok(Self { max_level, epsilon, guard_levels })
    }

    /// Basis with the default five guard levels.
    pub fn with_default_guard(max_level: usize, epsilon: f64) -> Result<Self, QuantizationError> {
        Self::new(max_level, epsilon, DEFAULT_GUARD_LEVELS)
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn guard_levels(&self) -> usize {
        self.guard_levels
    }

    /// Number of retained levels, `M + 1`.
    pub fn levels(&self) -> usize {
        self.max_level + 1
    }

    /// Position of (component, level) in a state vector.
    pub fn index(&self, component: usize, level: usize) -> usize {
        component * self.levels() + level
    }

    /// First level counted as a guard level.
    pub fn first_guard_level(&self) -> usize {
        self.max_level + 1 - self.guard_levels
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, QuantizationError> {
        Self::new(self.max_level, epsilon, self.guard_levels)
    }

    pub fn with_max_level(&self, max_level: usize) -> Result<Self, QuantizationError> {
        Self::new(max_level, self.epsilon, self.guard_levels)
    }
}

/// Lowering and raising matrices: `a[n-1, n] = √n`, `a† = a^H`.
pub fn ladder_matrices(basis: &TruncatedBasis) -> (CMat, CMat) {
    let levels = basis.levels();
    let mut a = cmat_zeros(levels);
    for n in 1..levels {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let a_dag = linalg::adjoint(&a);
    (a, a_dag)
}

/// `x̂ = √(ε/2)(a + a†)` and `ξ̂ = i√(ε/2)(a† - a)`.
pub fn position_momentum(basis: &TruncatedBasis) -> (CMat, CMat) {
    let (a, a_dag) = ladder_matrices(basis);
    let s = (basis.epsilon() / 2.0).sqrt();
    let levels = basis.levels();
    let x = Mat::from_fn(levels, levels, |i, j| (a[(i, j)] + a_dag[(i, j)]) * s);
    let xi = Mat::from_fn(levels, levels, |i, j| I * s * (a_dag[(i, j)] - a[(i, j)]));
    (x, xi)
}

/// Diagonal of `Op_ε(exp(-(x² + ξ²)/σ²))` on the retained levels.
pub fn gaussian_bump_diagonal(basis: &TruncatedBasis, width: f64) -> Vec<f64> {
    let kappa = basis.epsilon() / (width * width);
    let q = (1.0 - kappa) / (1.0 + kappa);
    (0..basis.levels()).map(|n| q.powi(n as i32) / (1.0 + kappa)).collect()
}

/// The constant part `A(μ)` of a symbol.
pub type ConstTerm = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// A Hermitian term `P exp(-(x² + ξ²)/σ²)` localized near the phase-space origin.
#[derive(Debug, Clone)]
pub struct LocalizedTerm {
    pub matrix: CMat,
    pub width: f64,
}

/// `H(μ, x, ξ) = A(μ) + B x + C ξ` (plus optional localized terms), a family of
/// Hermitian `d x d` symbols with a declared spectral gap after band `gap_band`.
///
/// The gap certificate asks for `ω_r < c - C_gap` and `ω_{r+1} > c + C_gap` on
/// the shell `1 ≤ |(μ, x, ξ)| ≤ 3`, `|μ| ≤ 2`, where `c` is the gap center
/// (zero unless set otherwise).
#[derive(Clone)]
pub struct AffineMatrixSymbol {
    name: String,
    dim: usize,
    const_term: ConstTerm,
    x_coeff: CMat,
    xi_coeff: CMat,
    localized: Vec<LocalizedTerm>,
    gap_band: usize,
    gap_constant: f64,
    gap_center: f64,
}

impl fmt::Debug for AffineMatrixSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AffineMatrixSymbol")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("gap_band", &self.gap_band)
            .field("gap_constant", &self.gap_constant)
            .field("gap_center", &self.gap_center)
            .field("localized_terms", &self.localized.len())
            .finish()
    }
}

impl AffineMatrixSymbol {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        const_term: ConstTerm,
        x_coeff: CMat,
        xi_coeff: CMat,
        gap_band: usize,
        gap_constant: f64,
    ) -> Result<Self, QuantizationError> {
        if dim == 0 {
            return Err(QuantizationError::InvalidSymbol("dimension must be at least 1".into()));
        }
        for (label, m) in [("x", &x_coeff), ("xi", &xi_coeff)] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(QuantizationError::InvalidSymbol(format!(
                    "{label} coefficient is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            // Real x and ξ: the coefficient itself has to be Hermitian.
            let defect = hermiticity_defect(m);
            if defect > HERMITIAN_TOL {
                return Err(QuantizationError::InvalidSymbol(format!(
                    "{label} coefficient is not Hermitian (defect {defect:.3e})"
                )));
            }
        }
        if !(gap_constant > 0.0 && gap_constant.is_finite()) {
            return Err(QuantizationError::InvalidSymbol(format!("gap constant {gap_constant} must be positive")));
        }
        let symbol = Self {
            name: name.into(),
            dim,
            const_term,
            x_coeff,
            xi_coeff,
            localized: Vec::new(),
            gap_band: 0,
            gap_constant,
            gap_center: 0.0,
        };
        symbol.with_gap_band(gap_band)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gap_band(&self) -> usize {
        self.gap_band
    }

    pub fn gap_constant(&self) -> f64 {
        self.gap_constant
    }

    pub fn gap_center(&self) -> f64 {
        self.gap_center
    }

    pub fn x_coeff(&self) -> &CMat {
        &self.x_coeff
    }

    pub fn xi_coeff(&self) -> &CMat {
        &self.xi_coeff
    }

    pub fn localized_terms(&self) -> &[LocalizedTerm] {
        &self.localized
    }

    /// `A(μ)` as supplied, without any Hermiticity repair.
    pub fn const_term(&self, mu: f64) -> CMat {
        (self.const_term)(mu)
    }

    /// Number of bands below the gap: `0..=dim`. Zero means the whole spectrum
    /// sits above the gap, `dim` that it sits below.
    pub fn with_gap_band(mut self, gap_band: usize) -> Result<Self, QuantizationError> {
        if gap_band > self.dim {
            return Err(QuantizationError::InvalidSymbol(format!(
                "gap band {gap_band} exceeds dimension {}",
                self.dim
            )));
        }
        self.gap_band = gap_band;
        Ok(self)
    }

    pub fn with_gap_center(mut self, center: f64) -> Self {
        self.gap_center = center;
        self
    }

    pub fn with_gap_constant(mut self, gap_constant: f64) -> Self {
        self.gap_constant = gap_constant;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Adds `matrix · exp(-(x² + ξ²)/width²)`.
    pub fn with_localized_term(mut self, matrix: CMat, width: f64) -> Result<Self, QuantizationError> {
        if matrix.nrows() != self.dim || matrix.ncols() != self.dim {
            return Err(QuantizationError::InvalidSymbol("localized term has the wrong dimension".into()));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(QuantizationError::InvalidSymbol(format!(
                "localized term is not Hermitian (defect {defect:.3e})"
            )));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(QuantizationError::InvalidSymbol(format!("localized width {width} must be positive")));
        }
        self.localized.push(LocalizedTerm { matrix, width });
        Ok(self)
    }

    /// The family `μ ↦ H(-μ, x, ξ)`.
    pub fn mu_reflected(&self) -> Self {
        let inner = Arc::clone(&self.const_term);
        let mut out = self.clone();
        out.const_term = Arc::new(move |mu| inner(-mu));
        out.name = format!("{}-reflected", self.name);
        out
    }

    /// `(μ, x, ξ) ↦ H(μ, ξ, x)`; reverses the orientation of parameter space.
    pub fn swapped_x_xi(&self) -> Self {
        let mut out = self.clone();
        std::mem::swap(&mut out.x_coeff, &mut out.xi_coeff);
        out.name = format!("{}-swapped", self.name);
        out
    }

    /// The point symbol `H(μ, x, ξ)`.
    pub fn eval(&self, mu: f64, x: f64, xi: f64) -> CMat {
        let a = self.const_term(mu);
        let r2 = x * x + xi * xi;
        let weights: Vec<f64> = self.localized.iter().map(|t| (-r2 / (t.width * t.width)).exp()).collect();
        let mut h = Mat::from_fn(self.dim, self.dim, |i, j| {
            let mut z = a[(i, j)] + self.x_coeff[(i, j)] * x + self.xi_coeff[(i, j)] * xi;
            for (t, w) in self.localized.iter().zip(&weights) {
                z += t.matrix[(i, j)] * *w;
            }
            z
        });
        enforce_hermitian(&mut h);
        h
    }

    /// Rejects `A(μ)` that is malformed or not Hermitian.
    pub fn checked_const_term(&self, mu: f64) -> Result<CMat, QuantizationError> {
        let a = self.const_term(mu);
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(QuantizationError::InvalidSymbol(format!(
                "A(mu) is {}x{}, expected {}x{}",
                a.nrows(),
                a.ncols(),
                self.dim,
                self.dim
            )));
        }
        let defect = hermiticity_defect(&a);
        let scale = 1.0 + linalg::max_abs(&a);
        if !defect.is_finite() || defect > HERMITIAN_TOL * scale {
            return Err(QuantizationError::NonHermitian { mu, defect });
        }
        Ok(a)
    }

    /// Largest `|H - H^H|` over the given sample points.
    pub fn hermiticity_check(&self, samples: &[[f64; 3]]) -> Result<f64, QuantizationError> {
        let mut worst = 0.0f64;
        for &[mu, x, xi] in samples {
            self.checked_const_term(mu)?;
            let a = self.const_term(mu);
            let raw = Mat::from_fn(self.dim, self.dim, |i, j| {
                a[(i, j)] + self.x_coeff[(i, j)] * x + self.xi_coeff[(i, j)] * xi
            });
            worst = worst.max(hermiticity_defect(&raw));
        }
        Ok(worst)
    }

    /// Samples the shell `1 ≤ |(μ, x, ξ)| ≤ 3`, `|μ| ≤ 2` on a
    /// `resolution³` grid (radius × polar × azimuth) and checks the declared gap.
    pub fn certify_gap(&self, resolution: usize) -> Result<GapCertificate, QuantizationError> {
        let resolution = resolution.max(2);
        let r = self.gap_band;
        let lower_bound = self.gap_center - self.gap_constant;
        let upper_bound = self.gap_center + self.gap_constant;
        let mut lower_max: Option<(f64, [f64; 3])> = None;
        let mut upper_min: Option<(f64, [f64; 3])> = None;
        let mut samples = 0usize;
        let step = (resolution - 1) as f64;
        for ir in 0..resolution {
            let radius = 1.0 + 2.0 * ir as f64 / step;
            for it in 0..resolution {
                let theta = std::f64::consts::PI * it as f64 / step;
                for ip in 0..resolution {
                    let phi = 2.0 * std::f64::consts::PI * ip as f64 / resolution as f64;
                    let point = [
                        radius * theta.cos(),
                        radius * theta.sin() * phi.cos(),
                        radius * theta.sin() * phi.sin(),
                    ];
                    if point[0].abs() > 2.0 {
                        continue;
                    }
                    self.checked_const_term(point[0])?;
                    let (values, _) = linalg::hermitian_eigen(&self.eval(point[0], point[1], point[2]))?;
                    samples += 1;
                    if r >= 1 {
                        let v = values[r - 1];
                        if lower_max.is_none_or(|(m, _)| v > m) {
                            lower_max = Some((v, point));
                        }
                    }
                    if r < self.dim {
                        let v = values[r];
                        if upper_min.is_none_or(|(m, _)| v < m) {
                            upper_min = Some((v, point));
                        }
                    }
                }
            }
        }
        let lower_ok = lower_max.is_none_or(|(v, _)| v < lower_bound);
        let upper_ok = upper_min.is_none_or(|(v, _)| v > upper_bound);
        if !(lower_ok && upper_ok) {
            let point = match (lower_ok, lower_max, upper_min) {
                (false, Some((_, p)), _) => p,
                (_, _, Some((_, p))) => p,
                _ => [0.0; 3],
            };
            return Err(QuantizationError::GapViolated {
                gap_band: r,
                lower_bound,
                upper_bound,
                lower_max: lower_max.map(|(v, _)| v),
                upper_min: upper_min.map(|(v, _)| v),
                point,
            });
        }
        Ok(GapCertificate {
            gap_band: r,
            gap_center: self.gap_center,
            gap_constant: self.gap_constant,
            lower_band_max: lower_max.map(|(v, _)| v),
            upper_band_min: upper_min.map(|(v, _)| v),
            samples,
        })
    }
}

/// Sampled evidence that the declared gap holds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GapCertificate {
    pub gap_band: usize,
    pub gap_center: f64,
    pub gap_constant: f64,
    pub lower_band_max: Option<f64>,
    pub upper_band_min: Option<f64>,
    pub samples: usize,
}

/// Resolution of the gap-certificate grid used by default.
pub const GAP_CERTIFICATE_RESOLUTION: usize = 30;

/// `Op_ε(H_μ)` restricted to the truncated basis.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    matrix: CMat,
    basis: TruncatedBasis,
    dim: usize,
}

impl TruncatedOperator {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn basis(&self) -> &TruncatedBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, QuantizationError> {
        self.check_len(v)?;
        Ok(linalg::mat_vec(&self.matrix, v))
    }

    /// `||Ĥ v - ω v||`.
    pub fn residual(&self, v: &[Complex64], omega: f64) -> Result<f64, QuantizationError> {
        self.check_len(v)?;
        Ok(linalg::eigen_residual(&self.matrix, v, omega))
    }

    fn check_len(&self, v: &[Complex64]) -> Result<(), QuantizationError> {
        if v.len() != self.size() {
            return Err(QuantizationError::LengthMismatch { expected: self.size(), got: v.len() });
        }
        Ok(())
    }

    pub fn spurious_weight(&self, eigenvector: &[Complex64]) -> Result<f64, QuantizationError> {
        self.check_len(eigenvector)?;
        Ok(guard_weight(&self.basis, self.dim, eigenvector))
    }

    /// Dense eigendecomposition. Inside each numerically degenerate cluster the
    /// eigenvectors are rotated to diagonalize the guard-level projector, which
    /// separates truncation artifacts from genuine states that happen to share
    /// their eigenvalue.
    pub fn spectrum(&self) -> Result<OperatorSpectrum, QuantizationError> {
        let (values, mut vectors) = linalg::hermitian_eigen(&self.matrix)?;
        let n = values.len();
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let guard_rows: Vec<usize> = (0..self.dim)
            .flat_map(|c| (self.basis.first_guard_level()..self.basis.levels()).map(move |l| (c, l)))
            .map(|(c, l)| self.basis.index(c, l))
            .collect();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && values[end] - values[end - 1] <= CLUSTER_TOL * scale {
                end += 1;
            }
            if end - start > 1 {
                disentangle_cluster(&mut vectors, start, end, &guard_rows)?;
            }
            start = end;
        }
        let spurious_weights = (0..n)
            .map(|k| {
                let col = vectors.col(k);
                guard_rows.iter().map(|&row| col[row].norm_sqr()).sum::<f64>()
            })
            .collect();
        Ok(OperatorSpectrum { values, vectors, spurious_weights })
    }
}

fn disentangle_cluster(
    vectors: &mut CMat,
    start: usize,
    end: usize,
    guard_rows: &[usize],
) -> Result<(), QuantizationError> {
    let k = end - start;
    // Q = V_c^H G V_c with G the guard-level projector.
    let q = Mat::from_fn(k, k, |i, j| {
        guard_rows
            .iter()
            .map(|&row| vectors[(row, start + i)].conj() * vectors[(row, start + j)])
            .sum::<Complex64>()
    });
    let mut q = q;
    enforce_hermitian(&mut q);
    let (_, w) = linalg::hermitian_eigen(&q)?;
    let rows = vectors.nrows();
    let block = Mat::from_fn(rows, k, |r, j| (0..k).map(|i| vectors[(r, start + i)] * w[(i, j)]).sum::<Complex64>());
    for j in 0..k {
        for r in 0..rows {
            vectors[(r, start + j)] = block[(r, j)];
        }
    }
    Ok(())
}

fn guard_weight(basis: &TruncatedBasis, dim: usize, v: &[Complex64]) -> f64 {
    let mut w = 0.0;
    for c in 0..dim {
        for level in basis.first_guard_level()..basis.levels() {
            w += v[basis.index(c, level)].norm_sqr();
        }
    }
    w
}

/// Ascending eigenvalues, eigenvectors (columns) and their guard-level weights.
#[derive(Debug, Clone)]
pub struct OperatorSpectrum {
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub spurious_weights: Vec<f64>,
}

impl OperatorSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_spurious(&self, k: usize) -> bool {
        self.spurious_weights[k] > SPURIOUS_THRESHOLD
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        linalg::column(&self.vectors, k)
    }

    /// Eigenvalues of the genuine (non-spurious) eigenpairs, ascending.
    pub fn genuine_values(&self) -> Vec<f64> {
        (0..self.len()).filter(|&k| !self.is_spurious(k)).map(|k| self.values[k]).collect()
    }
}

/// Total squared amplitude of `eigenvector` on the guard levels of `operator`.
pub fn spurious_weight(operator: &TruncatedOperator, eigenvector: &[Complex64]) -> Result<f64, QuantizationError> {
    operator.spurious_weight(eigenvector)
}

/// `A(μ) ⊗ Id + B ⊗ x̂ + C ⊗ ξ̂` (+ localized terms), Hermitian bit for bit.
pub fn quantize(
    symbol: &AffineMatrixSymbol,
    mu: f64,
    basis: &TruncatedBasis,
) -> Result<TruncatedOperator, QuantizationError> {
    let a = symbol.checked_const_term(mu)?;
    let d = symbol.dim();
    let levels = basis.levels();
    let (x_hat, xi_hat) = position_momentum(basis);
    let id = cmat_identity(levels);
    let bumps: Vec<Vec<f64>> = symbol
        .localized_terms()
        .iter()
        .map(|t| gaussian_bump_diagonal(basis, t.width))
        .collect();
    let size = d * levels;
    let mut m = Mat::<Complex64>::zeros(size, size);
    for p in 0..d {
        for q in p..d {
            let a_pq = a[(p, q)];
            let b_pq = symbol.x_coeff()[(p, q)];
            let c_pq = symbol.xi_coeff()[(p, q)];
            for j in 0..levels {
                for i in 0..levels {
                    let mut z = ZERO;
                    if id[(i, j)] != ZERO {
                        z += a_pq;
                    }
                    let x = x_hat[(i, j)];
                    if x != ZERO {
                        z += b_pq * x;
                    }
                    let xi = xi_hat[(i, j)];
                    if xi != ZERO {
                        z += c_pq * xi;
                    }
                    if i == j {
                        for (t, diag) in symbol.localized_terms().iter().zip(&bumps) {
                            z += t.matrix[(p, q)] * diag[i];
                        }
                    }
                    m[(p * levels + i, q * levels + j)] = z;
                }
            }
        }
    }
    enforce_hermitian(&mut m);
    Ok(TruncatedOperator { matrix: m, basis: *basis, dim: d })
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // frozen decimal oracles
mod tests {
    use super::*;
    use crate::linalg::{cmat_from_rows, max_abs_diff, ONE};

    fn scalar(v: f64) -> CMat {
        cmat_from_rows(&[&[Complex64::new(v, 0.0)]])
    }

    #[test]
    fn basis_rejects_bad_parameters() {
        assert!(TruncatedBasis::new(1, 1.0, 1).is_err());
        assert!(TruncatedBasis::new(8, 1.0, 5).is_err());
        assert!(TruncatedBasis::new(10, 0.0, 5).is_err());
        assert!(TruncatedBasis::new(10, -1.0, 5).is_err());
        assert!(TruncatedBasis::new(10, f64::NAN, 5).is_err());
        assert!(TruncatedBasis::new(10, 0.5, 5).is_ok());
    }

    #[test]
    fn ladder_entries_for_m2() {
        let basis = TruncatedBasis::new(2, 1.0, 1).unwrap();
        let (a, a_dag) = ladder_matrices(&basis);
        assert_eq!(a[(0, 1)].re, 1.0);
        assert!((a[(1, 2)].re - 1.414_213_562_4).abs() < 1e-10);
        let nonzero = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&(i, j)| a[(i, j)] != ZERO).count();
        assert_eq!(nonzero, 2);
        assert_eq!(max_abs_diff(&a_dag, &linalg::adjoint(&a)), 0.0);
    }

    #[test]
    fn lowering_annihilates_ground_level() {
        let basis = TruncatedBasis::new(6, 1.0, 1).unwrap();
        let (a, _) = ladder_matrices(&basis);
        let mut e0 = vec![ZERO; basis.levels()];
        e0[0] = ONE;
        assert!(linalg::mat_vec(&a, &e0).iter().all(|z| *z == ZERO));
    }

    #[test]
    fn number_operator_is_diagonal() {
        let basis = TruncatedBasis::new(3, 1.0, 1).unwrap();
        let (a, a_dag) = ladder_matrices(&basis);
        let n = &a_dag * &a;
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { i as f64 } else { 0.0 };
                assert!((n[(i, j)].re - expected).abs() < 4.0 * f64::EPSILON * 4.0);
                assert_eq!(n[(i, j)].im, 0.0);
                if i != j {
                    assert_eq!(n[(i, j)], ZERO);
                }
            }
        }
    }

    #[test]
    fn position_entry_and_hermiticity() {
        let basis = TruncatedBasis::new(2, 1.0, 1).unwrap();
        let (x, xi) = position_momentum(&basis);
        assert!((x[(0, 1)].re - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        for eps in [0.1, 1.0, 4.0] {
            let (x, xi2) = position_momentum(&basis.with_epsilon(eps).unwrap());
            assert_eq!(hermiticity_defect(&x), 0.0);
            assert_eq!(hermiticity_defect(&xi2), 0.0);
        }
        assert_eq!(hermiticity_defect(&xi), 0.0);
    }

    #[test]
    fn commutator_is_i_epsilon_below_top_level() {
        let basis = TruncatedBasis::new(4, 1.0, 1).unwrap();
        let (x, xi) = position_momentum(&basis);
        let comm = &(&x * &xi) - &(&xi * &x);
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { I } else { ZERO };
                assert!((comm[(i, j)] - expected).norm() < 1e-14, "({i},{j}) = {:?}", comm[(i, j)]);
            }
        }
        // Truncation corrupts the top level only.
        assert!((comm[(4, 4)] - I).norm() > 1.0);
    }

    #[test]
    fn zero_symbol_quantizes_to_zero() {
        let zero: ConstTerm = Arc::new(|_| scalar(0.0));
        let s = AffineMatrixSymbol::new("zero", 1, zero, scalar(0.0), scalar(0.0), 0, 1.0).unwrap();
        let basis = TruncatedBasis::new(6, 1.0, 2).unwrap();
        let op = quantize(&s, 0.3, &basis).unwrap();
        assert_eq!(linalg::max_abs(op.matrix()), 0.0);
    }

    #[test]
    fn non_hermitian_constant_term_is_rejected() {
        let bad: ConstTerm = Arc::new(|mu| cmat_from_rows(&[&[ZERO, Complex64::new(mu, 0.0)], &[ZERO, ZERO]]));
        let b = cmat_zeros(2);
        let s = AffineMatrixSymbol::new("bad", 2, bad, b.clone(), b, 1, 1.0).unwrap();
        let basis = TruncatedBasis::new(6, 1.0, 2).unwrap();
        assert!(matches!(quantize(&s, 0.5, &basis), Err(QuantizationError::NonHermitian { .. })));
        // At μ = 0 the term is Hermitian.
        assert!(quantize(&s, 0.0, &basis).is_ok());
    }

    #[test]
    fn non_hermitian_coefficients_are_rejected() {
        let a: ConstTerm = Arc::new(|_| cmat_zeros(2));
        let b = cmat_from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]);
        assert!(AffineMatrixSymbol::new("bad", 2, a, b, cmat_zeros(2), 1, 1.0).is_err());
    }

    #[test]
    fn spurious_weight_of_top_level_state_is_one() {
        let a: ConstTerm = Arc::new(|_| scalar(0.0));
        let s = AffineMatrixSymbol::new("s", 1, a, scalar(1.0), scalar(0.0), 0, 1.0).unwrap();
        let basis = TruncatedBasis::new(20, 1.0, 5).unwrap();
        let op = quantize(&s, 0.0, &basis).unwrap();
        let mut v = vec![ZERO; op.size()];
        v[20] = ONE;
        assert_eq!(spurious_weight(&op, &v).unwrap(), 1.0);
        let mut v = vec![ZERO; op.size()];
        v[15] = ONE;
        assert_eq!(spurious_weight(&op, &v).unwrap(), 0.0);
        assert!(spurious_weight(&op, &[ONE]).is_err());
    }

    #[test]
    fn gaussian_bump_matches_weyl_trace() {
        // Tr Op_ε(g) = (2πε)^-1 ∫ g = σ²/(2ε) for g = exp(-(x²+ξ²)/σ²).
        for (eps, width) in [(1.0, 1.0), (0.25, 1.0), (1.0, 2.0), (2.0, 1.0)] {
            let basis = TruncatedBasis::new(400, eps, 5).unwrap();
            let trace: f64 = gaussian_bump_diagonal(&basis, width).iter().sum();
            let expected = width * width / (2.0 * eps);
            assert!((trace - expected).abs() < 1e-12, "eps {eps} width {width}: {trace} vs {expected}");
        }
    }

    #[test]
    fn gaussian_bump_at_unit_kappa_is_half_ground_projector() {
        let basis = TruncatedBasis::new(10, 1.0, 2).unwrap();
        let d = gaussian_bump_diagonal(&basis, 1.0);
        assert_eq!(d[0], 0.5);
        assert!(d[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_clusters_are_split_by_guard_weight() {
        // Two exactly degenerate states, one on level 0 and one on the top level
        // of a second component.
        let a: ConstTerm = Arc::new(|_| cmat_zeros(2));
        let s = AffineMatrixSymbol::new("flat", 2, a, cmat_zeros(2), cmat_zeros(2), 1, 1.0).unwrap();
        let basis = TruncatedBasis::new(10, 1.0, 3).unwrap();
        let op = quantize(&s, 0.0, &basis).unwrap();
        let spec = op.spectrum().unwrap();
        let spurious = spec.spurious_weights.iter().filter(|&&w| w > SPURIOUS_THRESHOLD).count();
        assert_eq!(spurious, 6);
        assert!(spec.spurious_weights.iter().all(|&w| w < 1e-12 || (w - 1.0).abs() < 1e-12));
    }
}
