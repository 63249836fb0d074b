#![allow(dead_code)]

use proptest::prelude::*;
use qequip::symbols::PolySymbol;

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

/// Monomials of total degree at most `max_degree`.
fn exponents(max_degree: u32) -> impl Strategy<Value = (u32, u32)> {
    (0..=max_degree).prop_flat_map(move |d| (0..=d).prop_map(move |m| (m, d - m)))
}

/// Polynomials with small integer coefficients, so that every product and
/// sum in a bracket is exact in floating point.
pub fn int_poly(max_degree: u32) -> impl Strategy<Value = PolySymbol> {
    prop::collection::vec((exponents(max_degree), -6i32..=6), 1..6)
        .prop_map(|terms| PolySymbol::from_terms(terms.into_iter().map(|(e, c)| (e, c as f64))).unwrap())
}

/// Polynomials with real coefficients in [-2, 2].
pub fn real_poly(max_degree: u32) -> impl Strategy<Value = PolySymbol> {
    prop::collection::vec((exponents(max_degree), -2.0f64..2.0), 1..6)
        .prop_map(|terms| PolySymbol::from_terms(terms).unwrap())
}

/// Polynomials in one variable (`q` if `in_q`, else `p`) with integer coefficients.
pub fn int_poly_1d(max_degree: u32, in_q: bool) -> impl Strategy<Value = PolySymbol> {
    prop::collection::vec((0..=max_degree, -6i32..=6), 1..5).prop_map(move |terms| {
        PolySymbol::from_terms(
            terms
                .into_iter()
                .map(|(k, c)| (if in_q { (k, 0) } else { (0, k) }, c as f64)),
        )
        .unwrap()
    })
}

pub fn assert_close(a: &PolySymbol, b: &PolySymbol, tol: f64) {
    let d = a.max_coeff_diff(b);
    assert!(d <= tol, "coefficients differ by {d:e}:\n  {a}\n  {b}");
}
