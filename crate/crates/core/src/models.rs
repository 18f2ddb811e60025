//! Built-in symbol families and their closed-form spectra.
//!
//! - The two-band normal form `[[−μ, x + iξ], [x − iξ, μ]]`, whose quantized
//!   spectrum is `ω_0 = μ` and `ω_n^± = ±√(μ² + 2εn)`.
//! - The linearized equatorial shallow-water (Matsuno) operator, with Kelvin
//!   (`ω = μ`), Yanai (`ω² − μω − 1 = 0`) and, for `n ≥ 1`, the three roots
//!   of `ω³ − (μ² + 2n + 1)ω − μ = 0` (gravity−, Rossby, gravity+). The
//!   Matsuno family is used with `ε = 1`.
//! - The complexified tangent bundle of the sphere, `H(p) v = i p × v`.
//! - A constant scalar control.
//!
//! Closed-form eigenvectors are exact in the truncated basis as long as their
//! support stays below the top level, so they double as oracles for the
//! quantization code.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{cmat_from_rows, CMat, I, ONE, ZERO};
use crate::quantization::{AffineMatrixSymbol, QuantizationError, TruncatedBasis};

/// Gap constant for the normal form; its symbol gap on the unit shell is exactly 1.
pub const NORMAL_FORM_GAP_CONSTANT: f64 = 0.9;
/// Gap constant around the Matsuno gap centers `±1/2`.
pub const MATSUNO_GAP_CONSTANT: f64 = 0.45;
/// Gap constant of the tangent-bundle model around its gap center `−1/2`.
pub const TS2_GAP_CONSTANT: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("branch {0} does not exist (gravity and Rossby need n >= 1, normal ± need n >= 1)")]
    InvalidBranch(BranchLabel),
    #[error("branch {label} is not a {model} branch")]
    WrongModel { label: BranchLabel, model: &'static str },
    #[error("branch {label} needs level {needed} but the basis stops at {max_level}")]
    LevelExceedsTruncation { label: BranchLabel, needed: usize, max_level: usize },
    #[error("branch {label} eigenvector is singular at mu = {mu} (resonance omega = -/+ mu)")]
    SingularEigenvector { label: BranchLabel, mu: f64 },
    #[error("epsilon {0} must be positive")]
    InvalidEpsilon(f64),
    #[error("the closed-form Matsuno spectrum is stated for epsilon = 1, got {0}")]
    MatsunoEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchFamily {
    Kelvin,
    YanaiPlus,
    YanaiMinus,
    GravityMinus,
    Rossby,
    GravityPlus,
    NormalZero,
    NormalPlus,
    NormalMinus,
}

impl BranchFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Kelvin => "kelvin",
            Self::YanaiPlus => "yanai_plus",
            Self::YanaiMinus => "yanai_minus",
            Self::GravityMinus => "gravity_minus",
            Self::Rossby => "rossby",
            Self::GravityPlus => "gravity_plus",
            Self::NormalZero => "normal_zero",
            Self::NormalPlus => "normal_plus",
            Self::NormalMinus => "normal_minus",
        }
    }

    fn is_matsuno(self) -> bool {
        !matches!(self, Self::NormalZero | Self::NormalPlus | Self::NormalMinus)
    }
}

/// A labeled closed-form branch. Kelvin, Yanai and `normal_zero` live at level 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchLabel {
    pub family: BranchFamily,
    pub level: usize,
}

impl BranchLabel {
    pub fn new(family: BranchFamily, level: usize) -> Result<Self, ModelError> {
        let label = Self { family, level };
        let ok = match family {
            BranchFamily::Kelvin | BranchFamily::YanaiPlus | BranchFamily::YanaiMinus | BranchFamily::NormalZero => {
                level == 0
            }
            _ => level >= 1,
        };
        if ok {
            Ok(label)
        } else {
            Err(ModelError::InvalidBranch(label))
        }
    }

    pub const fn kelvin() -> Self {
        Self { family: BranchFamily::Kelvin, level: 0 }
    }

    pub const fn yanai_plus() -> Self {
        Self { family: BranchFamily::YanaiPlus, level: 0 }
    }

    pub const fn yanai_minus() -> Self {
        Self { family: BranchFamily::YanaiMinus, level: 0 }
    }

    pub const fn normal_zero() -> Self {
        Self { family: BranchFamily::NormalZero, level: 0 }
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family.as_str(), self.level)
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `[[−μ, x + iξ], [x − iξ, μ]]`, gap after band 1.
pub fn normal_form_symbol() -> AffineMatrixSymbol {
    let a = Arc::new(|mu: f64| cmat_from_rows(&[&[c(-mu), ZERO], &[ZERO, c(mu)]]));
    let b = cmat_from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]);
    let cc = cmat_from_rows(&[&[ZERO, I], &[-I, ZERO]]);
    AffineMatrixSymbol::new("normal-form", 2, a, b, cc, 1, NORMAL_FORM_GAP_CONSTANT)
        .expect("normal form symbol is well formed")
}

/// `[[0, μ, ξ], [μ, 0, ix], [ξ, −ix, 0]]` with the gap between bands 2 and 3
/// (centered at 1/2). Use [`matsuno_lower_gap_symbol`] for the other gap.
pub fn matsuno_symbol() -> AffineMatrixSymbol {
    let a = Arc::new(|mu: f64| cmat_from_rows(&[&[ZERO, c(mu), ZERO], &[c(mu), ZERO, ZERO], &[ZERO, ZERO, ZERO]]));
    let b = cmat_from_rows(&[&[ZERO, ZERO, ZERO], &[ZERO, ZERO, I], &[ZERO, -I, ZERO]]);
    let cc = cmat_from_rows(&[&[ZERO, ZERO, ONE], &[ZERO, ZERO, ZERO], &[ONE, ZERO, ZERO]]);
    AffineMatrixSymbol::new("matsuno", 3, a, b, cc, 2, MATSUNO_GAP_CONSTANT)
        .expect("matsuno symbol is well formed")
        .with_gap_center(0.5)
}

/// The Matsuno symbol with the gap between bands 1 and 2 (centered at −1/2).
pub fn matsuno_lower_gap_symbol() -> AffineMatrixSymbol {
    matsuno_symbol()
        .with_gap_band(1)
        .expect("matsuno has three bands")
        .with_gap_center(-0.5)
        .with_name("matsuno-lower-gap")
}

/// `H(p) v = i p × v` for `p = (μ, x, ξ)`; eigenvalues `−r, 0, r`.
///
/// The `−r` eigenspace is spanned by `(e₁ − i e₂)/√2` for a right-handed
/// tangent frame `(e₁, e₂, p/r)`, i.e. it is the tangent bundle of the sphere
/// with the complex structure given by the 90° rotation `v ↦ p × v`
/// (its `+i` eigenspace).
pub fn ts2_symbol() -> AffineMatrixSymbol {
    let a = Arc::new(|mu: f64| cmat_from_rows(&[&[ZERO, ZERO, ZERO], &[ZERO, ZERO, -I * mu], &[ZERO, I * mu, ZERO]]));
    let b = cmat_from_rows(&[&[ZERO, ZERO, I], &[ZERO, ZERO, ZERO], &[-I, ZERO, ZERO]]);
    let cc = cmat_from_rows(&[&[ZERO, -I, ZERO], &[I, ZERO, ZERO], &[ZERO, ZERO, ZERO]]);
    AffineMatrixSymbol::new("ts2", 3, a, b, cc, 1, TS2_GAP_CONSTANT)
        .expect("ts2 symbol is well formed")
        .with_gap_center(-0.5)
}

/// The scalar symbol `H = value`; its whole spectrum sits on one side of any
/// gap that excludes `value`.
pub fn constant_symbol(value: f64) -> AffineMatrixSymbol {
    let a = Arc::new(move |_mu: f64| cmat_from_rows(&[&[c(value)]]));
    let zero = cmat_from_rows(&[&[ZERO]]);
    let gap_band = usize::from(value < 0.0);
    AffineMatrixSymbol::new("constant", 1, a, zero.clone(), zero, gap_band, 0.9)
        .expect("constant symbol is well formed")
}

/// The quantized normal form at a fixed ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormModel {
    epsilon: f64,
}

impl NormalFormModel {
    pub fn new(epsilon: f64) -> Result<Self, ModelError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ModelError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn symbol(&self) -> AffineMatrixSymbol {
        normal_form_symbol()
    }

    pub fn eigenvalue(&self, label: BranchLabel, mu: f64) -> Result<f64, ModelError> {
        normal_form_eigenvalue(label, mu, self.epsilon)
    }
}

/// `ω_0 = μ`, `ω_n^± = ±√(μ² + 2εn)`.
pub fn normal_form_eigenvalue(label: BranchLabel, mu: f64, epsilon: f64) -> Result<f64, ModelError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ModelError::InvalidEpsilon(epsilon));
    }
    let label = BranchLabel::new(label.family, label.level)?;
    let r = || (mu * mu + 2.0 * epsilon * label.level as f64).sqrt();
    match label.family {
        BranchFamily::NormalZero => Ok(mu),
        BranchFamily::NormalPlus => Ok(r()),
        BranchFamily::NormalMinus => Ok(-r()),
        _ => Err(ModelError::WrongModel { label, model: "normal form" }),
    }
}

/// Normalized `φ_n^± = (√(2nε)/(μ + ω) φ_{n−1}, φ_n)`, or `φ_0 = (0, φ_0)`.
pub fn normal_form_eigenvector(
    label: BranchLabel,
    mu: f64,
    epsilon: f64,
    basis: &TruncatedBasis,
) -> Result<Vec<Complex64>, ModelError> {
    let omega = normal_form_eigenvalue(label, mu, epsilon)?;
    let n = label.level;
    if n > basis.max_level() {
        return Err(ModelError::LevelExceedsTruncation { label, needed: n, max_level: basis.max_level() });
    }
    let mut v = vec![ZERO; 2 * basis.levels()];
    v[basis.index(1, n)] = ONE;
    if n >= 1 {
        let denom = mu + omega;
        if denom == 0.0 {
            return Err(ModelError::SingularEigenvector { label, mu });
        }
        v[basis.index(0, n - 1)] = c((2.0 * n as f64 * epsilon).sqrt() / denom);
    }
    crate::linalg::normalize(&mut v);
    Ok(v)
}

/// All normal-form branches with level `≤ max_level`, ordered as
/// `normal_zero`, then `normal_minus(n)`, `normal_plus(n)` for increasing `n`.
pub fn normal_form_branches(mu: f64, epsilon: f64, max_level: usize) -> Result<Vec<(BranchLabel, f64)>, ModelError> {
    let mut out = vec![(BranchLabel::normal_zero(), normal_form_eigenvalue(BranchLabel::normal_zero(), mu, epsilon)?)];
    for n in 1..=max_level {
        for family in [BranchFamily::NormalMinus, BranchFamily::NormalPlus] {
            let label = BranchLabel { family, level: n };
            out.push((label, normal_form_eigenvalue(label, mu, epsilon)?));
        }
    }
    Ok(out)
}

/// Real roots of `ω³ + pω + q = 0` with `p < 0` and positive discriminant,
/// ascending. Trigonometric formula followed by Newton polishing.
pub fn depressed_cubic_roots(p: f64, q: f64) -> [f64; 3] {
    debug_assert!(p < 0.0);
    if q == 0.0 {
        let r = (-p).sqrt();
        return [-r, 0.0, r];
    }
    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let mut roots = [0, 1, 2].map(|k| m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos());
    for root in &mut roots {
        for _ in 0..3 {
            let f = root.powi(3) + p * *root + q;
            let df = 3.0 * *root * *root + p;
            if df == 0.0 {
                break;
            }
            let next = *root - f / df;
            let f_next = next.powi(3) + p * next + q;
            if f_next.abs() >= f.abs() {
                break;
            }
            *root = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn yanai_pair(mu: f64) -> (f64, f64) {
    // Roots of ω² − μω − 1; the product is exactly −1, so compute the larger
    // magnitude root stably and divide.
    let s = (mu * mu + 4.0).sqrt();
    if mu >= 0.0 {
        let plus = 0.5 * (mu + s);
        (-1.0 / plus, plus)
    } else {
        let minus = 0.5 * (mu - s);
        (minus, -1.0 / minus)
    }
}

/// Closed-form branch values at level `n` (ε = 1): Kelvin and Yanai at
/// `n = 0`, the three cubic roots at `n ≥ 1`, ascending within each level.
pub fn matsuno_eigenvalues(level: usize, mu: f64) -> Vec<(BranchLabel, f64)> {
    if level == 0 {
        let (minus, plus) = yanai_pair(mu);
        let mut out = vec![(BranchLabel::yanai_minus(), minus), (BranchLabel::kelvin(), mu), (BranchLabel::yanai_plus(), plus)];
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        return out;
    }
    let p = -(mu * mu + 2.0 * level as f64 + 1.0);
    let roots = depressed_cubic_roots(p, -mu);
    [BranchFamily::GravityMinus, BranchFamily::Rossby, BranchFamily::GravityPlus]
        .into_iter()
        .zip(roots)
        .map(|(family, w)| (BranchLabel { family, level }, w))
        .collect()
}

/// `ω` for a single Matsuno branch.
pub fn matsuno_eigenvalue(label: BranchLabel, mu: f64) -> Result<f64, ModelError> {
    let label = BranchLabel::new(label.family, label.level)?;
    if !label.family.is_matsuno() {
        return Err(ModelError::WrongModel { label, model: "matsuno" });
    }
    Ok(matsuno_eigenvalues(label.level, mu)
        .into_iter()
        .find(|(l, _)| *l == label)
        .map(|(_, w)| w)
        .expect("every valid matsuno label is produced at its level"))
}

/// All Matsuno branches with level `≤ max_level`.
pub fn matsuno_branches(mu: f64, max_level: usize) -> Vec<(BranchLabel, f64)> {
    (0..=max_level).flat_map(|n| matsuno_eigenvalues(n, mu)).collect()
}

/// Normalized closed-form eigenvector in `(levels 0..=M) ⊗ C³`, components
/// ordered `(a, b, c)`; the recursions are written in `s = a + b`, `d = b − a`.
///
/// A cubic branch at level `n` excites `c_n`, `s_{n+1}` and `d_{n−1}`; it is
/// built in the form scaled by `μ² − ω²`, which stays finite at both
/// resonances. The only point where that form vanishes is the Rossby root
/// `ω = 0` at `μ = 0`, where the limiting vector is used. The phase is fixed
/// so that the largest component is real positive.
pub fn matsuno_eigenvector(label: BranchLabel, mu: f64, basis: &TruncatedBasis) -> Result<Vec<Complex64>, ModelError> {
    if basis.epsilon() != 1.0 {
        return Err(ModelError::MatsunoEpsilon(basis.epsilon()));
    }
    let omega = matsuno_eigenvalue(label, mu)?;
    let n = label.level;
    let needed = match label.family {
        BranchFamily::Kelvin => 0,
        _ => n + 1,
    };
    if needed > basis.max_level() {
        return Err(ModelError::LevelExceedsTruncation { label, needed, max_level: basis.max_level() });
    }
    let mut v = vec![ZERO; 3 * basis.levels()];
    let put_s = |v: &mut [Complex64], level: usize, s: Complex64| {
        v[basis.index(0, level)] += s * 0.5;
        v[basis.index(1, level)] += s * 0.5;
    };
    let put_d = |v: &mut [Complex64], level: usize, d: Complex64| {
        v[basis.index(0, level)] -= d * 0.5;
        v[basis.index(1, level)] += d * 0.5;
    };
    match label.family {
        BranchFamily::Kelvin => put_s(&mut v, 0, ONE),
        BranchFamily::YanaiPlus | BranchFamily::YanaiMinus => {
            // s_1 = −i√2/(μ − ω) = i√2 ω on the Yanai roots.
            v[basis.index(2, 0)] = ONE;
            put_s(&mut v, 1, I * (2f64.sqrt() * omega));
        }
        _ => {
            let nf = n as f64;
            let cn = c(mu * mu - omega * omega);
            let s = -I * ((2.0 * (nf + 1.0)).sqrt() * (mu + omega));
            let d = I * ((2.0 * nf).sqrt() * (mu - omega));
            let scale = cn.norm() + s.norm() + d.norm();
            if scale > 1e-150 {
                v[basis.index(2, n)] = cn;
                put_s(&mut v, n + 1, s);
                put_d(&mut v, n - 1, d);
            } else if label.family == BranchFamily::Rossby {
                put_s(&mut v, n + 1, c(-(nf / (nf + 1.0)).sqrt()));
                put_d(&mut v, n - 1, ONE);
            } else {
                return Err(ModelError::SingularEigenvector { label, mu });
            }
        }
    }
    crate::linalg::normalize(&mut v);
    fix_vector_phase(&mut v);
    Ok(v)
}

fn fix_vector_phase(v: &mut [Complex64]) {
    let mut m = CMat::from_fn(v.len(), 1, |i, _| v[i]);
    crate::linalg::fix_column_phase(&mut m, 0);
    for (i, z) in v.iter_mut().enumerate() {
        *z = m[(i, 0)];
    }
}

/// Truncated basis at `ε = 1` with the default guard levels.
pub fn matsuno_basis(max_level: usize) -> Result<TruncatedBasis, QuantizationError> {
    TruncatedBasis::with_default_guard(max_level, 1.0)
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // frozen decimal oracles
mod tests {
    use super::*;
    use crate::linalg::{self, hermitian_eigen};
    use crate::quantization::quantize;

    fn point_eigenvalues(s: &AffineMatrixSymbol, p: [f64; 3]) -> Vec<f64> {
        hermitian_eigen(&s.eval(p[0], p[1], p[2])).unwrap().0
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normal_form_point_spectra() {
        let s = normal_form_symbol();
        let e = point_eigenvalues(&s, [0.0, 1.0, 0.0]);
        assert!(close(e[0], -1.0, 1e-14) && close(e[1], 1.0, 1e-14));
        let e = point_eigenvalues(&s, [0.0, 0.0, 0.0]);
        assert!(e.iter().all(|v| v.abs() < 1e-15));
        let e = point_eigenvalues(&s, [3.0, 4.0, 0.0]);
        assert!(close(e[0], -5.0, 1e-13) && close(e[1], 5.0, 1e-13));
        assert_eq!(s.gap_band(), 1);
        assert!(s.gap_constant() < 1.0);
    }

    #[test]
    fn matsuno_point_spectra() {
        let s = matsuno_symbol();
        let e = point_eigenvalues(&s, [0.0, 0.0, 1.0]);
        for (got, want) in e.iter().zip([-1.0, 0.0, 1.0]) {
            assert!(close(*got, want, 1e-14));
        }
        assert!(point_eigenvalues(&s, [0.0; 3]).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn matsuno_band_two_vector_at_x_axis() {
        let s = matsuno_symbol();
        let (vals, vecs) = hermitian_eigen(&s.eval(0.0, 1.0, 0.0)).unwrap();
        assert!(vals[1].abs() < 1e-14);
        let v = linalg::column(&vecs, 1);
        assert!(close(v[0].norm(), 1.0, 1e-14));
        assert!(v[1].norm() < 1e-14 && v[2].norm() < 1e-14);
    }

    #[test]
    fn ts2_point_spectrum_and_band() {
        let s = ts2_symbol();
        let e = point_eigenvalues(&s, [0.6, 0.0, 0.8]);
        for (got, want) in e.iter().zip([-1.0, 0.0, 1.0]) {
            assert!(close(*got, want, 1e-14));
        }
        // At the north pole of the ξ axis, band 1 is (e_μ − i e_x)/√2 up to phase.
        let (_, vecs) = hermitian_eigen(&s.eval(0.0, 0.0, 1.0)).unwrap();
        let v = linalg::column(&vecs, 0);
        let target = [c(1.0 / 2f64.sqrt()), -I / 2f64.sqrt(), ZERO];
        assert!(close(linalg::inner(&target, &v).norm(), 1.0, 1e-14));
    }

    #[test]
    fn normal_form_eigenvalue_examples() {
        assert_eq!(normal_form_eigenvalue(BranchLabel::normal_zero(), 0.7, 1.0).unwrap(), 0.7);
        let plus1 = BranchLabel::new(BranchFamily::NormalPlus, 1).unwrap();
        assert!(close(normal_form_eigenvalue(plus1, 0.0, 1.0).unwrap(), 1.414_213_562_4, 1e-10));
        let minus2 = BranchLabel::new(BranchFamily::NormalMinus, 2).unwrap();
        assert!(close(normal_form_eigenvalue(minus2, 1.0, 0.25).unwrap(), -(2f64.sqrt()), 1e-15));
        assert!(BranchLabel::new(BranchFamily::NormalPlus, 0).is_err());
        let bad = BranchLabel { family: BranchFamily::NormalMinus, level: 0 };
        assert!(normal_form_eigenvalue(bad, 0.0, 1.0).is_err());
        assert!(normal_form_eigenvalue(BranchLabel::kelvin(), 0.0, 1.0).is_err());
    }

    #[test]
    fn normal_form_eigenvector_examples() {
        let basis = TruncatedBasis::new(20, 1.0, 5).unwrap();
        let v = normal_form_eigenvector(BranchLabel::normal_zero(), -0.4, 1.0, &basis).unwrap();
        assert_eq!(v[basis.index(1, 0)], ONE);
        assert_eq!(v.iter().filter(|z| **z != ZERO).count(), 1);

        let plus1 = BranchLabel::new(BranchFamily::NormalPlus, 1).unwrap();
        let v = normal_form_eigenvector(plus1, 0.0, 1.0, &basis).unwrap();
        assert!(close(v[basis.index(0, 0)].re, v[basis.index(1, 1)].re, 1e-15));

        let plus3 = BranchLabel::new(BranchFamily::NormalPlus, 3).unwrap();
        let op = quantize(&normal_form_symbol(), 1.5, &basis).unwrap();
        let v = normal_form_eigenvector(plus3, 1.5, 1.0, &basis).unwrap();
        let w = normal_form_eigenvalue(plus3, 1.5, 1.0).unwrap();
        assert!(op.residual(&v, w).unwrap() < 1e-10);
        assert_eq!(op.spurious_weight(&normal_form_eigenvector(plus1, 0.0, 1.0, &basis).unwrap()).unwrap(), 0.0);

        let deep = BranchLabel::new(BranchFamily::NormalMinus, 21).unwrap();
        assert!(matches!(
            normal_form_eigenvector(deep, 0.0, 1.0, &basis),
            Err(ModelError::LevelExceedsTruncation { .. })
        ));
    }

    #[test]
    fn cubic_examples() {
        let roots: Vec<f64> = matsuno_eigenvalues(1, 0.0).into_iter().map(|(_, w)| w).collect();
        assert_eq!(roots, vec![-(3f64.sqrt()), 0.0, 3f64.sqrt()]);
        for (label, w) in matsuno_eigenvalues(2, 1.0) {
            assert!((w.powi(3) - 6.0 * w - 1.0).abs() < 1e-12, "{label}: {w}");
        }
        let labels: Vec<BranchFamily> = matsuno_eigenvalues(3, 0.2).into_iter().map(|(l, _)| l.family).collect();
        assert_eq!(labels, vec![BranchFamily::GravityMinus, BranchFamily::Rossby, BranchFamily::GravityPlus]);
    }

    #[test]
    fn yanai_at_zero_and_product() {
        let (m, p) = yanai_pair(0.0);
        assert_eq!((m, p), (-1.0, 1.0));
        for mu in [-7.0, -1.3, 0.0, 0.4, 5.0] {
            let (m, p) = yanai_pair(mu);
            assert!((m * p + 1.0).abs() < 1e-12);
            assert!((m * m - mu * m - 1.0).abs() < 1e-12 && (p * p - mu * p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kelvin_vector() {
        let basis = matsuno_basis(20).unwrap();
        let v = matsuno_eigenvector(BranchLabel::kelvin(), 0.37, &basis).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!(close(v[basis.index(0, 0)].re, h, 1e-15) && close(v[basis.index(1, 0)].re, h, 1e-15));
        assert_eq!(v.iter().filter(|z| **z != ZERO).count(), 2);
        assert!(v.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn yanai_vector_support() {
        let basis = matsuno_basis(20).unwrap();
        let v = matsuno_eigenvector(BranchLabel::yanai_plus(), 0.0, &basis).unwrap();
        let support: Vec<usize> = (0..v.len()).filter(|&k| v[k] != ZERO).collect();
        // c_0 plus s_1 spread over a_1 and b_1.
        assert_eq!(support, vec![basis.index(0, 1), basis.index(1, 1), basis.index(2, 0)]);
    }

    #[test]
    fn matsuno_vectors_satisfy_operator() {
        let basis = matsuno_basis(30).unwrap();
        let symbol = matsuno_symbol();
        for mu in [-2.0, -0.3, 0.0, 0.5, 1.0, 3.0] {
            let op = quantize(&symbol, mu, &basis).unwrap();
            for (label, w) in matsuno_branches(mu, 8) {
                let v = matsuno_eigenvector(label, mu, &basis).unwrap();
                assert!(close(linalg::norm(&v), 1.0, 1e-14));
                let r = op.residual(&v, w).unwrap();
                assert!(r < 1e-10, "{label} at mu {mu}: residual {r:.3e}");
            }
        }
    }

    #[test]
    fn matsuno_needs_unit_epsilon_and_room() {
        let basis = TruncatedBasis::new(20, 0.5, 5).unwrap();
        assert!(matsuno_eigenvector(BranchLabel::kelvin(), 0.0, &basis).is_err());
        let basis = matsuno_basis(10).unwrap();
        let g = BranchLabel::new(BranchFamily::GravityPlus, 10).unwrap();
        assert!(matches!(
            matsuno_eigenvector(g, 0.0, &basis),
            Err(ModelError::LevelExceedsTruncation { .. })
        ));
        assert!(matsuno_eigenvector(BranchLabel::normal_zero(), 0.0, &basis).is_err());
    }

    #[test]
    fn gap_certificates_of_builtin_symbols() {
        for s in [normal_form_symbol(), matsuno_symbol(), matsuno_lower_gap_symbol(), ts2_symbol(), constant_symbol(5.0)] {
            let cert = s.certify_gap(crate::quantization::GAP_CERTIFICATE_RESOLUTION);
            assert!(cert.is_ok(), "{}: {:?}", s.name(), cert.err());
        }
        let corrupted = normal_form_symbol().with_gap_band(2).unwrap();
        assert!(corrupted.certify_gap(30).is_err());
        let corrupted = matsuno_symbol().with_gap_band(1).unwrap();
        assert!(corrupted.certify_gap(30).is_err());
    }
}
