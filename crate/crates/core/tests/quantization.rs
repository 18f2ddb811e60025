use index_lab::linalg::{adjoint, cmat_identity, hermiticity_defect, max_abs_diff};
use index_lab::models::{matsuno_symbol, normal_form_symbol, ts2_symbol};
use index_lab::quantization::{ladder_matrices, position_momentum};
use index_lab::{quantize, Complex64, TruncatedBasis};
use proptest::prelude::*;

fn interior_commutator_defect(max_level: usize, epsilon: f64) -> f64 {
    let basis = TruncatedBasis::new(max_level, epsilon, 1).unwrap();
    let (x, xi) = position_momentum(&basis);
    let comm = &x * &xi - &xi * &x;
    let mut worst = 0.0f64;
    for i in 0..max_level - 1 {
        for j in 0..max_level - 1 {
            let want = if i == j { Complex64::new(0.0, epsilon) } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((comm[(i, j)] - want).norm());
        }
    }
    worst
}

#[test]
fn commutator_on_interior_levels() {
    for epsilon in [0.1, 1.0, 4.0] {
        for m in [8, 32] {
            let e = interior_commutator_defect(m, epsilon);
            assert!(e < 1e-12, "eps={epsilon} M={m}: {e:e}");
        }
    }
}

#[test]
fn commutator_breaks_only_at_the_top_level() {
    let basis = TruncatedBasis::new(10, 1.0, 1).unwrap();
    let (x, xi) = position_momentum(&basis);
    let comm = &x * &xi - &xi * &x;
    // [a, a†] = 1 − (M+1)|M⟩⟨M| after truncation.
    assert!((comm[(10, 10)] - Complex64::new(0.0, -10.0)).norm() < 1e-12);
}

#[test]
fn ladder_matrix_entries() {
    let basis = TruncatedBasis::new(12, 1.0, 1).unwrap();
    let (a, ad) = ladder_matrices(&basis);
    for n in 1..=12 {
        assert!((a[(n - 1, n)].re - (n as f64).sqrt()).abs() < 1e-15);
        assert_eq!(a[(n - 1, n)], ad[(n, n - 1)].conj());
    }
}

#[test]
fn quantized_operators_are_exactly_hermitian() {
    let basis = TruncatedBasis::with_default_guard(20, 0.7).unwrap();
    for symbol in [normal_form_symbol(), matsuno_symbol(), ts2_symbol()] {
        for mu in [-2.5, 0.0, 0.31, 4.0] {
            let op = quantize(&symbol, mu, &basis).unwrap();
            assert_eq!(hermiticity_defect(op.matrix()), 0.0, "{} at {mu}", symbol.name());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sqrt_epsilon_scaling(mu in -3.0f64..3.0, log_eps in -2.0f64..1.5) {
        let eps = log_eps.exp();
        let symbol = normal_form_symbol();
        let b_eps = TruncatedBasis::with_default_guard(16, eps).unwrap();
        let b_one = b_eps.with_epsilon(1.0).unwrap();
        let lhs = quantize(&symbol, mu, &b_eps).unwrap().spectrum().unwrap().values;
        let rhs = quantize(&symbol, mu / eps.sqrt(), &b_one).unwrap().spectrum().unwrap().values;
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - eps.sqrt() * b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn spectrum_is_orthonormal_and_weights_are_probabilities(mu in -3.0f64..3.0) {
        let basis = TruncatedBasis::with_default_guard(12, 1.0).unwrap();
        let op = quantize(&matsuno_symbol(), mu, &basis).unwrap();
        let spec = op.spectrum().unwrap();
        prop_assert!(spec.values.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..spec.len() {
            let w = spec.spurious_weights[k];
            prop_assert!((0.0..=1.0 + 1e-12).contains(&w));
            prop_assert!(op.residual(&spec.vector(k), spec.values[k]).unwrap() < 1e-10);
        }
        let v = &spec.vectors;
        let gram = adjoint(v) * v;
        prop_assert!(max_abs_diff(&gram, &cmat_identity(gram.nrows())) < 1e-10);
    }

    #[test]
    fn truncation_refines_the_low_spectrum(mu in -1.5f64..1.5) {
        // Genuine eigenvalues near the gap do not move when M grows.
        let symbol = normal_form_symbol();
        let small = TruncatedBasis::with_default_guard(20, 1.0).unwrap();
        let large = small.with_max_level(40).unwrap();
        let a = quantize(&symbol, mu, &small).unwrap().spectrum().unwrap().genuine_values();
        let b = quantize(&symbol, mu, &large).unwrap().spectrum().unwrap().genuine_values();
        for w in a.iter().filter(|w| w.abs() < 3.0) {
            let d = b.iter().map(|v| (v - w).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-10, "{w} not found at M=40 ({d:e})");
        }
    }
}
