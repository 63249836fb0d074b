//! Weyl quantization in a truncated oscillator basis, and the reverse map for
//! polynomial operators.
//!
//! Matrix powers are formed in a basis enlarged by the symbol degree and then
//! cut back, so every returned entry equals the matrix element of the
//! untruncated operator.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::operator::{MatrixOperator, OscillatorBasis};
use crate::moyal::HbarContext;
use crate::symbols::{falling_factorial, PolySymbol};
use crate::{Error, Result};

/// Relative residual above which a matrix is not accepted as a polynomial
/// operator of the requested degree.
pub const FIT_RESIDUAL_TOL: f64 = 1e-8;

/// Weyl-ordered operator of `s`: each monomial `q^m p^n` becomes the average
/// over all orderings of `m` position and `n` momentum factors, evaluated as
/// `2^{-m} Σ_k C(m,k) Q^k P^n Q^{m-k}`.
pub fn weyl_quantize(s: &PolySymbol, dim: usize, basis: OscillatorBasis) -> Result<MatrixOperator> {
    let degree = s.degree();
    if dim <= degree as usize + 2 {
        return Err(Error::DimensionTooSmall { dim, degree });
    }
    let ext = dim + degree as usize;
    let q = basis.position(ext);
    let p = basis.momentum(ext);
    let q_pow = powers(&q, s.terms().map(|((m, _), _)| m).max().unwrap_or(0));
    let p_pow = powers(&p, s.terms().map(|((_, n), _)| n).max().unwrap_or(0));

    let mut out = DMatrix::<Complex64>::zeros(ext, ext);
    for ((m, n), c) in s.terms() {
        let mut term = DMatrix::<Complex64>::zeros(ext, ext);
        let mut binom = 1.0;
        for k in 0..=m {
            term += (&q_pow[k as usize] * &p_pow[n as usize] * &q_pow[(m - k) as usize]) * Complex64::from(binom);
            binom = binom * (m - k) as f64 / (k + 1) as f64;
        }
        out += term * Complex64::from(c / 2f64.powi(m as i32));
    }
    MatrixOperator::new(out, basis)?.truncated(dim)
}

fn powers(x: &DMatrix<Complex64>, max: u32) -> Vec<DMatrix<Complex64>> {
    let mut out = vec![DMatrix::identity(x.nrows(), x.ncols())];
    for k in 1..=max as usize {
        out.push(&out[k - 1] * x);
    }
    out
}

/// Result of recovering a polynomial symbol from a matrix.
#[derive(Clone, Debug)]
pub struct SymbolFit {
    pub symbol: PolySymbol,
    /// `max |weyl_quantize(symbol) − o| / max(1, max |o|)` over the full matrix.
    pub residual: f64,
}

/// Recovers the real polynomial Weyl symbol of degree `≤ max_degree` whose
/// quantization reproduces `o`.
///
/// The normal-ordered coefficients `c_jk` of `Σ c_jk a†^j a^k` are read off the
/// diagonals of `o` by forward substitution, then mapped to the Weyl symbol
/// with `W = exp(−½ ∂_α ∂_α*) N` and `α = (q/ℓ + i p ℓ/ħ)/√2`. Fails with
/// [`Error::FitResidual`] if `o` is not such an operator and with
/// [`Error::ImaginaryResidue`] if its symbol is not real.
pub fn weyl_symbol(o: &MatrixOperator, max_degree: u32) -> Result<SymbolFit> {
    let dim = o.dim();
    if dim <= max_degree as usize + 2 {
        return Err(Error::DimensionTooSmall { dim, degree: max_degree });
    }
    let basis = o.basis();
    let normal = normal_ordered_coefficients(o.entries(), max_degree);
    let complex = weyl_from_normal(&normal, basis);

    let scale = complex.values().fold(0.0f64, |m, c| m.max(c.norm())).max(1.0);
    let residue = complex.values().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if residue > IMAG_TOL * scale {
        return Err(Error::ImaginaryResidue { residue, tol: IMAG_TOL * scale });
    }
    let symbol = PolySymbol::from_terms_bounded(
        complex.into_iter().map(|(k, c)| (k, c.re)),
        max_degree.max(crate::symbols::DEFAULT_MAX_DEGREE),
    )?;
    let rebuilt = weyl_quantize(&symbol, dim, basis)?;
    let residual = rebuilt.max_abs_diff(o)? / o.max_abs().max(1.0);
    if residual > FIT_RESIDUAL_TOL {
        return Err(Error::FitResidual(residual));
    }
    Ok(SymbolFit { symbol, residual })
}

/// Imaginary part, relative to the largest coefficient, treated as rounding.
const IMAG_TOL: f64 = 1e-10;

/// `c_jk` with `j + k ≤ max_degree` such that `⟨m|o|n⟩ = Σ c_jk ⟨m|a†^j a^k|n⟩`
/// in the low block, solved diagonal by diagonal.
fn normal_ordered_coefficients(o: &DMatrix<Complex64>, max_degree: u32) -> BTreeMap<(u32, u32), Complex64> {
    let max = max_degree as i64;
    let mut c = BTreeMap::new();
    // ⟨κ+d| a†^j a^k |κ⟩ with j − k = d is sqrt(κ!/(κ−k)! · (κ+d)!/(κ−k)!).
    let element = |kappa: i64, d: i64, k: i64| -> f64 {
        (falling_factorial(kappa as u32, k as u32) * falling_factorial((kappa + d) as u32, (k + d) as u32)).sqrt()
    };
    for d in -max..=max {
        let k_min = (-d).max(0);
        let mut k = k_min;
        while 2 * k + d <= max {
            let mut v = o[((k + d) as usize, k as usize)];
            for kp in k_min..k {
                v -= c[&((kp + d) as u32, kp as u32)] * element(k, d, kp);
            }
            c.insert(((k + d) as u32, k as u32), v / element(k, d, k));
            k += 1;
        }
    }
    c
}

/// Weyl symbol, as complex coefficients of `q^m p^n`, of `Σ c_jk a†^j a^k`.
fn weyl_from_normal(normal: &BTreeMap<(u32, u32), Complex64>, basis: OscillatorBasis) -> BTreeMap<(u32, u32), Complex64> {
    let ell = basis.length();
    let hbar = basis.hbar();
    // α = x q + i y p, α* = x q − i y p.
    let (x, y) = (1.0 / (ell * std::f64::consts::SQRT_2), ell / (hbar * std::f64::consts::SQRT_2));
    let mut out: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
    for (&(j, k), &c) in normal {
        let mut weight = 1.0;
        for r in 0..=j.min(k) {
            if r > 0 {
                weight *= -0.5 / r as f64;
            }
            let w = c * weight * falling_factorial(j, r) * falling_factorial(k, r);
            for ((m, n), z) in conj_alpha_power(j - r, k - r, x, y) {
                *out.entry((m, n)).or_default() += w * z;
            }
        }
    }
    out.retain(|_, z| z.norm() > 0.0);
    out
}

/// Expansion of `α*^a α^b` in monomials `q^m p^n`.
fn conj_alpha_power(a: u32, b: u32, x: f64, y: f64) -> Vec<((u32, u32), Complex64)> {
    let binom = |n: u32, k: u32| falling_factorial(n, k) / falling_factorial(k, k);
    let i = Complex64::new(0.0, 1.0);
    let mut out = Vec::new();
    for s in 0..=a {
        // (x q − i y p)^a term with p^s
        let ca = binom(a, s) * x.powi((a - s) as i32) * y.powi(s as i32) * (-i).powu(s);
        for t in 0..=b {
            let cb = binom(b, t) * x.powi((b - t) as i32) * y.powi(t as i32) * i.powu(t);
            out.push(((a - s + b - t, s + t), ca * cb));
        }
    }
    out
}

/// Fock-basis oracle for the Moyal bracket: the Weyl symbol of
/// `(1/iħ)[Â, B̂]`, with `Â`, `B̂` quantized in a `dim`-level basis.
pub fn fock_bracket_symbol(a: &PolySymbol, b: &PolySymbol, ctx: HbarContext, dim: usize) -> Result<PolySymbol> {
    if a.is_zero() || b.is_zero() || a.degree() == 0 || b.degree() == 0 {
        return Ok(PolySymbol::zero());
    }
    let basis = OscillatorBasis::new(1.0, 1.0, ctx.hbar())?;
    let degree = a.degree() + b.degree() - 2;
    let ext = dim + (a.degree() + b.degree()) as usize;
    let qa = weyl_quantize(a, ext, basis)?;
    let qb = weyl_quantize(b, ext, basis)?;
    let comm = qa.commutator(&qb)?.truncated(dim)?;
    let scaled = MatrixOperator::new(
        comm.into_entries() * Complex64::new(0.0, -1.0 / ctx.hbar()),
        basis,
    )?;
    Ok(weyl_symbol(&scaled, degree)?.symbol)
}
