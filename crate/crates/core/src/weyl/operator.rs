use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Parameters `(m, ω, ħ)` of the harmonic-oscillator eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorBasis {
    mass: f64,
    omega: f64,
    hbar: f64,
}

impl Default for OscillatorBasis {
    fn default() -> Self {
        Self { mass: 1.0, omega: 1.0, hbar: 1.0 }
    }
}

impl OscillatorBasis {
    pub fn new(mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        for (name, v) in [("mass", mass), ("omega", omega), ("hbar", hbar)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { mass, omega, hbar })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Oscillator length `sqrt(ħ / (m ω))`.
    pub fn length(&self) -> f64 {
        (self.hbar / (self.mass * self.omega)).sqrt()
    }

    /// `Q = sqrt(ħ/2mω) (a + a†)` truncated to `dim` levels.
    pub fn position(&self, dim: usize) -> DMatrix<Complex64> {
        let a = annihilation(dim);
        (&a + a.adjoint()) * Complex64::from((self.hbar / (2.0 * self.mass * self.omega)).sqrt())
    }

    /// `P = i sqrt(mωħ/2) (a† − a)` truncated to `dim` levels.
    pub fn momentum(&self, dim: usize) -> DMatrix<Complex64> {
        let a = annihilation(dim);
        (a.adjoint() - &a) * Complex64::new(0.0, (self.mass * self.omega * self.hbar / 2.0).sqrt())
    }

    /// Eigenfunctions `ψ_0(x) .. ψ_{n-1}(x)` by the stable three-term recurrence.
    pub fn eigenfunctions(&self, x: f64, n: usize, out: &mut Vec<f64>) {
        out.clear();
        if n == 0 {
            return;
        }
        let xi = x / self.length();
        let psi0 = (std::f64::consts::PI.sqrt() * self.length()).powf(-0.5) * (-0.5 * xi * xi).exp();
        out.push(psi0);
        if n == 1 {
            return;
        }
        out.push(std::f64::consts::SQRT_2 * xi * psi0);
        for k in 1..n - 1 {
            let next = (2.0 / (k + 1) as f64).sqrt() * xi * out[k] - (k as f64 / (k + 1) as f64).sqrt() * out[k - 1];
            out.push(next);
        }
    }
}

pub(crate) fn annihilation(dim: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::from((n as f64).sqrt());
    }
    a
}

/// Dense operator in a truncated oscillator eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixOperator {
    entries: DMatrix<Complex64>,
    basis: OscillatorBasis,
}

impl MatrixOperator {
    pub fn new(entries: DMatrix<Complex64>, basis: OscillatorBasis) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square and nonempty, got {} x {}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("operator entry".into()));
        }
        Ok(Self { entries, basis })
    }

    pub fn from_real(entries: DMatrix<f64>, basis: OscillatorBasis) -> Result<Self> {
        Self::new(entries.map(Complex64::from), basis)
    }

    pub fn identity(dim: usize, basis: OscillatorBasis) -> Self {
        Self { entries: DMatrix::identity(dim, dim), basis }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn basis(&self) -> OscillatorBasis {
        self.basis
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// `max |A − A†|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = &self.entries - self.entries.adjoint();
        d.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn check_same_shape(&self, other: &MatrixOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.dim(), other.dim())));
        }
        Ok(())
    }

    pub fn commutator(&self, other: &MatrixOperator) -> Result<MatrixOperator> {
        self.check_same_shape(other)?;
        let c = &self.entries * &other.entries - &other.entries * &self.entries;
        Ok(Self { entries: c, basis: self.basis })
    }

    /// Top-left `dim × dim` block.
    pub fn truncated(&self, dim: usize) -> Result<MatrixOperator> {
        if dim == 0 || dim > self.dim() {
            return Err(Error::DimensionMismatch(format!("cannot truncate {} to {dim}", self.dim())));
        }
        Ok(Self {
            entries: self.entries.view((0, 0), (dim, dim)).into_owned(),
            basis: self.basis,
        })
    }

    /// Sum of singular values of `self − other`.
    pub fn trace_norm_diff(&self, other: &MatrixOperator) -> Result<f64> {
        self.check_same_shape(other)?;
        let d = &self.entries - &other.entries;
        Ok(d.singular_values().iter().sum())
    }

    pub fn max_abs_diff(&self, other: &MatrixOperator) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok((&self.entries - &other.entries).iter().fold(0.0, |m, c| m.max(c.norm())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_commutator_in_low_block() {
        let basis = OscillatorBasis::new(1.3, 0.7, 0.9).unwrap();
        let n = 12;
        let q = basis.position(n);
        let p = basis.momentum(n);
        let c = &q * &p - &p * &q;
        // [Q, P] = iħ except in the last level, where truncation bites.
        for i in 0..n - 1 {
            assert!((c[(i, i)] - Complex64::new(0.0, 0.9)).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenfunctions_are_orthonormal() {
        let basis = OscillatorBasis::new(2.0, 0.5, 1.0).unwrap();
        let (n, h) = (10, 0.01);
        let mut gram = vec![0.0; n * n];
        let mut psi = Vec::new();
        let mut x = -15.0;
        while x <= 15.0 {
            basis.eigenfunctions(x, n, &mut psi);
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] += h * psi[i] * psi[j];
                }
            }
            x += h;
        }
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * n + j] - want).abs() < 1e-10, "({i},{j}) {}", gram[i * n + j]);
            }
        }
    }

    #[test]
    fn rejects_bad_operators() {
        let b = OscillatorBasis::default();
        assert!(MatrixOperator::new(DMatrix::zeros(2, 3), b).is_err());
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 1)] = Complex64::new(f64::NAN, 0.0);
        assert!(MatrixOperator::new(m, b).is_err());
        assert!(OscillatorBasis::new(0.0, 1.0, 1.0).is_err());
    }
}
