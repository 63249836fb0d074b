//! Moyal star product and Moyal bracket on polynomial symbols.
//!
//! For polynomials the exponential of the bidifferential operator
//! `←∂_q →∂_p − ←∂_p →∂_q` terminates, so both products are finite sums.
//! The bracket is normalized as `{a, b}_M = (a ⋆ b − b ⋆ a) / (iħ)`, which makes
//! its leading term the Poisson bracket.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::symbols::{falling_factorial, Exponents, PolySymbol, PRUNE_TOL};
use crate::{Error, Result};

/// Imaginary parts below this are treated as rounding noise in real results.
pub const IMAG_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HbarContext {
    hbar: f64,
}

impl HbarContext {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { hbar })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
}

impl Default for HbarContext {
    fn default() -> Self {
        Self { hbar: 1.0 }
    }
}

/// Polynomial symbol with complex coefficients, as produced by `⋆`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexSymbol {
    terms: BTreeMap<Exponents, Complex64>,
}

impl ComplexSymbol {
    fn accumulate(&mut self, s: &PolySymbol, factor: Complex64) {
        for (k, c) in s.terms() {
            *self.terms.entry(k).or_insert(Complex64::new(0.0, 0.0)) += factor * c;
        }
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() >= PRUNE_TOL);
        self
    }

    pub fn coeff(&self, m: u32, n: u32) -> Complex64 {
        self.terms.get(&(m, n)).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponents, Complex64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (k, c))
    }

    pub fn re(&self) -> PolySymbol {
        PolySymbol::from_terms_bounded(self.terms().map(|(k, c)| (k, c.re)), u32::MAX)
            .expect("finite coefficients")
    }

    pub fn im(&self) -> PolySymbol {
        PolySymbol::from_terms_bounded(self.terms().map(|(k, c)| (k, c.im)), u32::MAX)
            .expect("finite coefficients")
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.im.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn sub(&self, other: &ComplexSymbol) -> ComplexSymbol {
        let mut out = self.clone();
        for (k, c) in other.terms() {
            *out.terms.entry(k).or_default() -= c;
        }
        out.pruned()
    }

    pub fn scale(&self, k: Complex64) -> ComplexSymbol {
        ComplexSymbol {
            terms: self.terms.iter().map(|(&e, &c)| (e, c * k)).collect(),
        }
        .pruned()
    }

    /// Real part, after checking that the imaginary part is rounding noise
    /// relative to the coefficient scale.
    pub fn into_real(self, bound: u32) -> Result<PolySymbol> {
        let residue = self.max_abs_imag();
        let tol = IMAG_TOL * self.max_abs().max(1.0);
        if residue > tol {
            return Err(Error::ImaginaryResidue { residue, tol });
        }
        self.re().with_max_degree(bound)
    }
}

impl fmt::Display for ComplexSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) + i({})", self.re(), self.im())
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    falling_factorial(n, k) / falling_factorial(k, k)
}

/// `D_k(a, b) = Σ_t C(k,t) (−1)^t (∂_q^{k−t} ∂_p^t a)(∂_p^{k−t} ∂_q^t b)`, the
/// k-th power of `←∂_q →∂_p − ←∂_p →∂_q` applied to `(a, b)`.
pub fn bidifferential(a: &PolySymbol, b: &PolySymbol, k: u32) -> Result<PolySymbol> {
    let mut acc = PolySymbol::zero().with_max_degree(a.max_degree().max(b.max_degree()))?;
    if k > a.degree() || k > b.degree() {
        return Ok(acc);
    }
    for t in 0..=k {
        let left = a.derivative(k - t, t);
        if left.is_zero() {
            continue;
        }
        let right = b.derivative(t, k - t);
        if right.is_zero() {
            continue;
        }
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc.add(&left.mul(&right)?.scale(sign * binomial(k, t)));
    }
    Ok(acc)
}

/// Largest series order that can contribute: `D_k` vanishes for
/// `k > min(deg a, deg b)`.
fn max_order(a: &PolySymbol, b: &PolySymbol) -> u32 {
    if a.is_zero() || b.is_zero() {
        0
    } else {
        a.degree().min(b.degree())
    }
}

/// `a ⋆ b = Σ_k (iħ/2)^k / k! · D_k(a, b)`.
pub fn moyal_product(a: &PolySymbol, b: &PolySymbol, ctx: HbarContext) -> Result<ComplexSymbol> {
    let half = Complex64::new(0.0, 0.5 * ctx.hbar);
    let mut out = ComplexSymbol::default();
    let mut factor = Complex64::new(1.0, 0.0);
    for k in 0..=max_order(a, b) {
        if k > 0 {
            factor *= half / k as f64;
        }
        out.accumulate(&bidifferential(a, b, k)?, factor);
    }
    Ok(out.pruned())
}

/// The `s`-th term of the bracket series,
/// `(−1)^s (ħ/2)^{2s} / (2s+1)! · D_{2s+1}(a, b)`. `s = 0` is the Poisson bracket.
pub fn bracket_order_term(a: &PolySymbol, b: &PolySymbol, s: u32, ctx: HbarContext) -> Result<PolySymbol> {
    let d = bidifferential(a, b, 2 * s + 1)?;
    if s == 0 {
        return Ok(d);
    }
    Ok(d.scale(bracket_weight(s, ctx.hbar)))
}

fn bracket_weight(s: u32, hbar: f64) -> f64 {
    let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
    sign * (0.5 * hbar).powi(2 * s as i32) / falling_factorial(2 * s + 1, 2 * s + 1)
}

/// Index of the last series term that can be nonzero, `None` when every term
/// vanishes because an argument is constant.
pub fn termination_order(a: &PolySymbol, b: &PolySymbol) -> Option<u32> {
    let k = max_order(a, b);
    (k >= 1).then(|| (k - 1) / 2)
}

/// Moyal bracket, summed as the terminating sine series.
pub fn moyal_bracket(a: &PolySymbol, b: &PolySymbol, ctx: HbarContext) -> Result<PolySymbol> {
    let bound = a.max_degree().max(b.max_degree());
    let mut acc = PolySymbol::zero().with_max_degree(bound)?;
    if let Some(last) = termination_order(a, b) {
        for s in 0..=last {
            acc = acc.add(&bracket_order_term(a, b, s, ctx)?);
        }
    }
    Ok(acc)
}

/// Moyal bracket through the star-product commutator `(a⋆b − b⋆a)/(iħ)`; the
/// imaginary residue is checked and dropped.
pub fn moyal_bracket_from_product(a: &PolySymbol, b: &PolySymbol, ctx: HbarContext) -> Result<PolySymbol> {
    let ab = moyal_product(a, b, ctx)?;
    let ba = moyal_product(b, a, ctx)?;
    let comm = ab.sub(&ba).scale(Complex64::new(0.0, -1.0 / ctx.hbar));
    comm.into_real(a.max_degree().max(b.max_degree()))
}

/// Series terms of the bracket with `ħ` kept symbolic: entry `s` is the
/// coefficient of `ħ^{2s}`.
pub fn bracket_hbar_series(a: &PolySymbol, b: &PolySymbol) -> Result<Vec<PolySymbol>> {
    let Some(last) = termination_order(a, b) else {
        return Ok(Vec::new());
    };
    (0..=last)
        .map(|s| Ok(bidifferential(a, b, 2 * s + 1)?.scale(bracket_weight(s, 1.0))))
        .collect()
}

/// Renders an `ħ`-series as `c*q^m*p^n*hbar^k + ...`, lowest `ħ` order first.
pub fn format_hbar_series(series: &[PolySymbol]) -> String {
    let mut out = String::new();
    for (s, poly) in series.iter().enumerate() {
        let mut terms: Vec<_> = poly.terms().collect();
        terms.sort_by(|a, b| (b.0 .0 + b.0 .1, b.0 .0).cmp(&(a.0 .0 + a.0 .1, a.0 .0)));
        for ((m, n), c) in terms {
            if !out.is_empty() {
                out.push_str(" + ");
            }
            crate::symbols::write_term_string(&mut out, c, &[("q", m), ("p", n), ("hbar", 2 * s as u32)]);
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(s: &str) -> PolySymbol {
        s.parse().unwrap()
    }

    fn ctx(h: f64) -> HbarContext {
        HbarContext::new(h).unwrap()
    }

    #[test]
    fn hbar_must_be_positive() {
        assert!(HbarContext::new(0.0).is_err());
        assert!(HbarContext::new(-1.0).is_err());
        assert!(HbarContext::new(f64::NAN).is_err());
    }

    #[test]
    fn star_product_examples() {
        let h = 0.7;
        let qp = moyal_product(&PolySymbol::q(), &PolySymbol::p(), ctx(h)).unwrap();
        assert_eq!(qp.re(), poly("q*p"));
        assert_eq!(qp.im(), PolySymbol::constant(h / 2.0));

        let b = poly("3*q^2*p - p^4 + 0.5");
        let one_b = moyal_product(&PolySymbol::one(), &b, ctx(h)).unwrap();
        assert_eq!(one_b.re(), b);
        assert!(one_b.im().is_zero());

        // q² ⋆ p² = q²p² + 2iħ qp − ħ²/2
        let r = moyal_product(&poly("q^2"), &poly("p^2"), ctx(h)).unwrap();
        assert!(r.re().max_coeff_diff(&poly("q^2*p^2").sub(&PolySymbol::constant(h * h / 2.0))) < 1e-15);
        assert!(r.im().max_coeff_diff(&poly("q*p").scale(2.0 * h)) < 1e-15);
    }

    #[test]
    fn bracket_examples() {
        assert_eq!(moyal_bracket(&PolySymbol::q(), &PolySymbol::p(), ctx(1.0)).unwrap(), PolySymbol::one());

        for h in [0.5, 1.0, 1.3] {
            let r = moyal_bracket(&poly("q^3"), &poly("p^3"), ctx(h)).unwrap();
            let want = poly("9*q^2*p^2").sub(&PolySymbol::constant(1.5 * h * h));
            assert!(r.max_coeff_diff(&want) < 1e-14, "{r}");
        }

        let qp = poly("q*p");
        let f = poly("0.3*q^8 - 2*q^5 + q^4 + 7*q");
        assert_eq!(
            moyal_bracket(&qp, &f, ctx(0.9)).unwrap(),
            crate::symbols::poisson_bracket(&qp, &f).unwrap()
        );
    }

    #[test]
    fn order_term_examples() {
        let c = ctx(1.0);
        assert_eq!(bracket_order_term(&PolySymbol::q(), &PolySymbol::p(), 0, c).unwrap(), PolySymbol::one());
        assert!(bracket_order_term(&poly("q*p"), &poly("q^4"), 1, c).unwrap().is_zero());
        for h in [0.5, 2.0] {
            let t = bracket_order_term(&poly("q^3"), &poly("p^3"), 1, ctx(h)).unwrap();
            assert_eq!(t, PolySymbol::constant(-1.5 * h * h));
        }
    }

    #[test]
    fn termination_bound() {
        assert_eq!(termination_order(&poly("q^3"), &poly("p^3")), Some(1));
        assert_eq!(termination_order(&poly("q*p"), &poly("q^8")), Some(0));
        assert_eq!(termination_order(&poly("q^5*p"), &poly("p^6")), Some(2));
        assert_eq!(termination_order(&PolySymbol::one(), &poly("p^6")), None);
        let (a, b) = (poly("q^5*p + q^2"), poly("p^6*q"));
        let last = termination_order(&a, &b).unwrap();
        assert!(!bracket_order_term(&a, &b, last, ctx(1.0)).unwrap().is_zero());
        for s in last + 1..last + 4 {
            assert!(bracket_order_term(&a, &b, s, ctx(1.0)).unwrap().is_zero());
        }
    }

    #[test]
    fn series_and_product_routes_agree() {
        let a = poly("q^3*p - 2*q*p^2 + 0.5*p^4");
        let b = poly("p^3 + q^2*p^2 - 3*q^4");
        for h in [0.5, 1.0, 0.3] {
            let series = moyal_bracket(&a, &b, ctx(h)).unwrap();
            let product = moyal_bracket_from_product(&a, &b, ctx(h)).unwrap();
            assert!(series.max_coeff_diff(&product) < 1e-12);
        }
    }

    #[test]
    fn hbar_series_formatting() {
        let s = bracket_hbar_series(&poly("q^3"), &poly("p^3")).unwrap();
        assert_eq!(format_hbar_series(&s), "9*q^2*p^2 + -1.5*hbar^2");
        let s = bracket_hbar_series(&PolySymbol::q(), &PolySymbol::p()).unwrap();
        assert_eq!(format_hbar_series(&s), "1");
        assert_eq!(format_hbar_series(&[]), "0");
    }
}
