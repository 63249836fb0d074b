mod common;

use common::{int_poly, real_poly};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qequip::symbols::PhaseSpaceGrid;
use qequip::weyl::{weyl_quantize, weyl_symbol, wigner_of_operator, MatrixOperator, OscillatorBasis};
use std::f64::consts::PI;

fn basis() -> impl Strategy<Value = OscillatorBasis> {
    (0.5f64..2.0, 0.5f64..2.0, prop_oneof![Just(0.5), Just(1.0), Just(1.7)])
        .prop_map(|(m, w, h)| OscillatorBasis::new(m, w, h).unwrap())
}

/// Random density matrix `Σ w_n |ψ_n⟩⟨ψ_n|` built from a few low-lying vectors.
fn density(dim: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec((prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4), 0.1f64..1.0), 1..4).prop_map(
        move |vectors| {
            let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
            for (amps, weight) in vectors {
                let v = nalgebra::DVector::from_iterator(
                    dim,
                    amps.iter().map(|&(re, im)| Complex64::new(re, im)).chain(std::iter::repeat(Complex64::from(0.0))).take(dim),
                );
                let v = v.normalize();
                rho += v.clone() * v.adjoint() * Complex64::from(weight);
            }
            let tr = rho.trace();
            rho / tr
        },
    )
}

proptest! {
    #![proptest_config(common::config(48))]

    #[test]
    fn quantization_is_linear(a in real_poly(5), b in real_poly(5), k in -3.0f64..3.0, basis in basis()) {
        let dim = 14;
        let lhs = weyl_quantize(&a.add(&b.scale(k)), dim, basis).unwrap();
        let qa = weyl_quantize(&a, dim, basis).unwrap();
        let qb = weyl_quantize(&b, dim, basis).unwrap();
        let rhs = MatrixOperator::new(qa.entries() + qb.entries() * Complex64::from(k), basis).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn real_symbols_quantize_to_hermitian_matrices(a in real_poly(6), basis in basis()) {
        let o = weyl_quantize(&a, 16, basis).unwrap();
        prop_assert!(o.hermiticity_residual() <= 1e-12 * o.max_abs().max(1.0));
    }

    #[test]
    fn symbol_round_trip(a in int_poly(6), basis in basis()) {
        let o = weyl_quantize(&a, 20, basis).unwrap();
        let fit = weyl_symbol(&o, 6).unwrap();
        let d = fit.symbol.max_coeff_diff(&a);
        prop_assert!(d <= 1e-9 * a.max_abs_coeff().max(1.0), "{} vs {}: {:e}", fit.symbol, a, d);
    }

}

proptest! {
    #![proptest_config(common::config(12))]

    #[test]
    fn operator_symbols_are_linear_and_normalized(r1 in density(24), r2 in density(24), k in 0.1f64..2.0) {
        let basis = OscillatorBasis::default();
        let grid = PhaseSpaceGrid::symmetric(3.5, 29, 3.5, 29).unwrap();
        let w = |r: &DMatrix<Complex64>| wigner_of_operator(&MatrixOperator::new(r.clone(), basis).unwrap(), &grid).unwrap();
        let (w1, w2) = (w(&r1), w(&r2));
        let sum = w(&(&r1 + &r2 * Complex64::from(k)));
        let mut err: f64 = 0.0;
        for ((s, a), b) in sum.values().iter().zip(w1.values()).zip(w2.values()) {
            err = err.max((s - a - k * b).abs());
        }
        prop_assert!(err < 1e-10, "{err:e}");
        // A unit-trace operator has ∫∫ W dq dp = 2πħ.
        let fine = PhaseSpaceGrid::symmetric(7.0, 71, 7.0, 71).unwrap();
        let wf = wigner_of_operator(&MatrixOperator::new(r1.clone(), basis).unwrap(), &fine).unwrap();
        prop_assert!((wf.integrate() / (2.0 * PI) - 1.0).abs() < 1e-6, "{}", wf.integrate());
    }
}
