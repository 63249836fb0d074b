//! Exact polynomial phase-space symbols `Σ c_mn q^m p^n` and their calculus.
//!
//! Symbols are immutable values. Arithmetic prunes coefficients whose magnitude
//! falls below [`PRUNE_TOL`], so equal polynomials have equal term maps.

mod grid;
mod text;

use std::collections::BTreeMap;

use crate::{Error, Result};

pub use grid::{GridSymbol, PhaseSpaceGrid};
pub(crate) use grid::boundary_max_abs;

/// Default bound on the total degree of a symbol.
pub const DEFAULT_MAX_DEGREE: u32 = 16;

/// Coefficients smaller than this (in magnitude) are dropped after arithmetic.
pub const PRUNE_TOL: f64 = 1e-15;

/// Phase-space coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    Q,
    P,
}

/// Exponent pair `(m, n)` of the monomial `q^m p^n`.
pub type Exponents = (u32, u32);

#[derive(Clone, Debug)]
pub struct PolySymbol {
    terms: BTreeMap<Exponents, f64>,
    max_degree: u32,
}

/// Equality of the polynomials; the degree bound is not compared.
impl PartialEq for PolySymbol {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Default for PolySymbol {
    fn default() -> Self {
        Self::zero()
    }
}

impl PolySymbol {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
            max_degree: DEFAULT_MAX_DEGREE,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `c q^m p^n`. Panics if `m + n` exceeds [`DEFAULT_MAX_DEGREE`].
    pub fn monomial(c: f64, m: u32, n: u32) -> Self {
        Self::from_terms([((m, n), c)]).expect("monomial degree within the default bound")
    }

    /// The position symbol `q`.
    pub fn q() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    /// The momentum symbol `p`.
    pub fn p() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    /// Builds a symbol from `(exponents, coefficient)` pairs; repeated exponents add.
    pub fn from_terms<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponents, f64)>,
    {
        Self::from_terms_bounded(terms, DEFAULT_MAX_DEGREE)
    }

    pub fn from_terms_bounded<I>(terms: I, max_degree: u32) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponents, f64)>,
    {
        let mut map = BTreeMap::new();
        for (key, c) in terms {
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("coefficient of q^{}p^{}", key.0, key.1)));
            }
            *map.entry(key).or_insert(0.0) += c;
        }
        Self::from_map(map, max_degree)
    }

    fn from_map(mut terms: BTreeMap<Exponents, f64>, max_degree: u32) -> Result<Self> {
        terms.retain(|_, c| c.abs() >= PRUNE_TOL);
        if let Some(degree) = terms.keys().map(|&(m, n)| m + n).max() {
            if degree > max_degree {
                return Err(Error::DegreeOverflow { degree, max: max_degree });
            }
        }
        Ok(Self { terms, max_degree })
    }

    /// Same polynomial with a different degree bound.
    pub fn with_max_degree(&self, max_degree: u32) -> Result<Self> {
        Self::from_map(self.terms.clone(), max_degree)
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|&(m, n)| m + n).max().unwrap_or(0)
    }

    pub fn degree_in(&self, var: Var) -> u32 {
        self.terms
            .keys()
            .map(|&(m, n)| match var {
                Var::Q => m,
                Var::P => n,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn coeff(&self, m: u32, n: u32) -> f64 {
        self.terms.get(&(m, n)).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Exponents, f64)> + '_ {
        self.terms.iter().map(|(&k, &c)| (k, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    /// Largest coefficient difference against `other`, over the union of terms.
    pub fn max_coeff_diff(&self, other: &PolySymbol) -> f64 {
        let mut diff: f64 = 0.0;
        for (k, c) in &self.terms {
            diff = diff.max((c - other.coeff(k.0, k.1)).abs());
        }
        for (k, c) in &other.terms {
            if !self.terms.contains_key(k) {
                diff = diff.max(c.abs());
            }
        }
        diff
    }

    /// Evaluates the polynomial at `(q, p)`: Horner in `p` for each power of
    /// `q`, then Horner in `q`.
    pub fn eval(&self, q: f64, p: f64) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let mq = self.degree_in(Var::Q) as usize;
        let np = self.degree_in(Var::P) as usize;
        let mut rows = vec![vec![0.0; np + 1]; mq + 1];
        for (&(m, n), &c) in &self.terms {
            rows[m as usize][n as usize] = c;
        }
        rows.iter()
            .rev()
            .map(|row| row.iter().rev().fold(0.0, |acc, &c| acc * p + c))
            .fold(0.0, |acc, v| acc * q + v)
    }

    /// Exact `order`-th partial derivative with respect to `var`.
    pub fn partial_derivative(&self, var: Var, order: u32) -> PolySymbol {
        if order == 0 {
            return self.clone();
        }
        let mut out = BTreeMap::new();
        for (&(m, n), &c) in &self.terms {
            let e = match var {
                Var::Q => m,
                Var::P => n,
            };
            if e < order {
                continue;
            }
            let factor = falling_factorial(e, order);
            let key = match var {
                Var::Q => (m - order, n),
                Var::P => (m, n - order),
            };
            out.insert(key, c * factor);
        }
        Self::from_map(out, self.max_degree).expect("differentiation lowers the degree")
    }

    /// Mixed derivative `∂_q^a ∂_p^b`.
    pub fn derivative(&self, q_order: u32, p_order: u32) -> PolySymbol {
        self.partial_derivative(Var::Q, q_order)
            .partial_derivative(Var::P, p_order)
    }

    pub fn scale(&self, k: f64) -> PolySymbol {
        let terms = self.terms.iter().map(|(&key, &c)| (key, c * k)).collect();
        Self::from_map(terms, self.max_degree).expect("scaling keeps the degree")
    }

    pub fn add(&self, other: &PolySymbol) -> PolySymbol {
        let mut out = self.terms.clone();
        for (&k, &c) in &other.terms {
            *out.entry(k).or_insert(0.0) += c;
        }
        Self::from_map(out, self.max_degree.max(other.max_degree))
            .expect("sum stays within the larger bound")
    }

    pub fn sub(&self, other: &PolySymbol) -> PolySymbol {
        self.add(&other.scale(-1.0))
    }

    /// Pointwise (commutative) product.
    pub fn mul(&self, other: &PolySymbol) -> Result<PolySymbol> {
        let bound = self.max_degree.max(other.max_degree);
        let degree = if self.is_zero() || other.is_zero() {
            0
        } else {
            self.degree() + other.degree()
        };
        if degree > bound {
            return Err(Error::DegreeOverflow { degree, max: bound });
        }
        let mut out = BTreeMap::new();
        for (&(m1, n1), &c1) in &self.terms {
            for (&(m2, n2), &c2) in &other.terms {
                *out.entry((m1 + m2, n1 + n2)).or_insert(0.0) += c1 * c2;
            }
        }
        Self::from_map(out, bound)
    }

    /// Keeps only the terms selected by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(Exponents) -> bool) -> PolySymbol {
        Self {
            terms: self
                .terms
                .iter()
                .filter(|(&k, _)| keep(k))
                .map(|(&k, &c)| (k, c))
                .collect(),
            max_degree: self.max_degree,
        }
    }

    /// Samples the symbol at every node of `grid`.
    pub fn sample_on_grid(&self, grid: &PhaseSpaceGrid) -> GridSymbol {
        sample_on_grid(self, grid)
    }
}

pub(crate) fn write_term_string(out: &mut String, c: f64, powers: &[(&str, u32)]) {
    text::write_term(out, c, powers).expect("writing to a String cannot fail");
}

/// `m (m-1) ... (m-k+1)` as a float.
pub(crate) fn falling_factorial(m: u32, k: u32) -> f64 {
    (0..k).map(|i| (m - i) as f64).product()
}

/// Coefficient-level derivative; `order = 0` is the identity.
pub fn partial_derivative(s: &PolySymbol, var: Var, order: u32) -> PolySymbol {
    s.partial_derivative(var, order)
}

/// `{a, b} = ∂_q a ∂_p b − ∂_p a ∂_q b`.
pub fn poisson_bracket(a: &PolySymbol, b: &PolySymbol) -> Result<PolySymbol> {
    let first = a
        .partial_derivative(Var::Q, 1)
        .mul(&b.partial_derivative(Var::P, 1))?;
    let second = a
        .partial_derivative(Var::P, 1)
        .mul(&b.partial_derivative(Var::Q, 1))?;
    Ok(first.sub(&second))
}

pub fn poly_eval(s: &PolySymbol, q: f64, p: f64) -> f64 {
    s.eval(q, p)
}

pub fn sample_on_grid(s: &PolySymbol, grid: &PhaseSpaceGrid) -> GridSymbol {
    let qs = grid.q_nodes();
    let ps = grid.p_nodes();
    let values = ndarray::Array2::from_shape_fn((grid.n_q(), grid.n_p()), |(i, j)| {
        s.eval(qs[i], ps[j])
    });
    GridSymbol::new(grid.clone(), values).expect("polynomial values are finite on a finite grid")
}
