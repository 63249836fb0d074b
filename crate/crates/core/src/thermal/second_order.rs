use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::weyl::MatrixOperator;
use crate::{Error, Result};

/// Hermiticity tolerance for inputs, relative to `max(1, max |entry|)`.
pub const INPUT_HERMITIAN_TOL: f64 = 1e-10;
/// Largest `β (E_max − E_min)` accepted by the second-order quadrature.
pub const MAX_SPECTRAL_EXPONENT: f64 = 700.0;
/// Trace-norm agreement required between `n_tau` and `2 n_tau` runs.
pub const RICHARDSON_TOL: f64 = 1e-6;

/// Imaginary-time bath correlation `k(τ)` of one coupling channel.
#[derive(Clone, Debug, PartialEq)]
pub enum BathCorrelation {
    Constant(f64),
    /// `amplitude · e^{−rate |τ|}`.
    Exponential { amplitude: f64, rate: f64 },
    /// Samples at increasing `tau`, linearly interpolated.
    Table { tau: Vec<f64>, k: Vec<f64> },
}

#[derive(Deserialize)]
struct TableRow {
    tau: f64,
    k: f64,
}

impl BathCorrelation {
    pub fn table(tau: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        if tau.len() != k.len() || tau.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "bath table needs at least two (tau, k) rows, got {} taus and {} values",
                tau.len(),
                k.len()
            )));
        }
        if tau.iter().chain(&k).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bath table entry".into()));
        }
        if tau.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("bath table tau must be strictly increasing".into()));
        }
        Ok(Self::Table { tau, k })
    }

    /// Reads a `tau,k` CSV with header.
    pub fn from_csv_reader(r: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let (mut tau, mut k) = (Vec::new(), Vec::new());
        for row in rdr.deserialize::<TableRow>() {
            let row = row?;
            tau.push(row.tau);
            k.push(row.k);
        }
        Self::table(tau, k)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant(c) if !c.is_finite() => Err(Error::NonFinite("bath constant".into())),
            Self::Exponential { amplitude, rate } if !(amplitude.is_finite() && rate.is_finite() && rate >= 0.0) => {
                Err(Error::InvalidParameter(format!(
                    "exponential bath needs finite amplitude and rate >= 0, got {amplitude}, {rate}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Errors unless `k` can be evaluated on all of `[0, tau_max]`.
    pub fn check_covers(&self, tau_max: f64) -> Result<()> {
        if let Self::Table { tau, .. } = self {
            let slack = 1e-12 * tau_max.abs().max(1.0);
            if tau[0] > slack || tau[tau.len() - 1] < tau_max - slack {
                return Err(Error::Coverage(format!(
                    "bath table spans [{}, {}] but must cover [0, {tau_max}]",
                    tau[0],
                    tau[tau.len() - 1]
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Exponential { amplitude, rate } => amplitude * (-rate * t.abs()).exp(),
            Self::Table { tau, k } => {
                let t = t.clamp(tau[0], tau[tau.len() - 1]);
                let i = tau.partition_point(|&x| x <= t).clamp(1, tau.len() - 1);
                let w = (t - tau[i - 1]) / (tau[i] - tau[i - 1]);
                k[i - 1] + w * (k[i] - k[i - 1])
            }
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            Self::Constant(c) => *c == 0.0,
            Self::Exponential { amplitude, .. } => *amplitude == 0.0,
            Self::Table { k, .. } => k.iter().all(|&v| v == 0.0),
        }
    }
}

/// One interaction channel: system operator `S_α` and its bath correlation.
#[derive(Clone, Debug)]
pub struct Coupling {
    pub s: MatrixOperator,
    pub k: BathCorrelation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Gibbs,
    SecondOrder,
}

/// Normalized reduced density matrix with measured residuals.
#[derive(Clone, Debug)]
pub struct EquilibriumState {
    pub rho: MatrixOperator,
    pub beta: f64,
    pub provenance: Provenance,
    pub trace: f64,
    /// `max |ρ − ρ†|`.
    pub hermiticity_residual: f64,
    /// `max |[ρ, h]|`.
    pub commutator_residual: f64,
}

struct Spectrum {
    energies: DVector<f64>,
    vectors: DMatrix<Complex64>,
}

fn check_hermitian(o: &MatrixOperator) -> Result<()> {
    let r = o.hermiticity_residual();
    if r > INPUT_HERMITIAN_TOL * o.max_abs().max(1.0) {
        return Err(Error::NonHermitian(r));
    }
    Ok(())
}

/// Eigen-decomposition with energies shifted so the lowest is zero.
fn spectrum(h: &MatrixOperator) -> Spectrum {
    let eig = h.entries().clone().symmetric_eigen();
    let e_min = eig.eigenvalues.min();
    Spectrum { energies: eig.eigenvalues.map(|e| e - e_min), vectors: eig.eigenvectors }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// Rotates an eigenbasis matrix back, normalizes it and measures residuals.
fn finish(
    h: &MatrixOperator,
    spec: &Spectrum,
    rho_eigen: DMatrix<Complex64>,
    beta: f64,
    provenance: Provenance,
) -> Result<EquilibriumState> {
    let v = &spec.vectors;
    let rho = v * rho_eigen * v.adjoint();
    let tr = rho.trace();
    if !(tr.re > 0.0) || !tr.re.is_finite() {
        return Err(Error::ZeroTrace);
    }
    let rho = MatrixOperator::new(rho / Complex64::from(tr.re), h.basis())?;
    Ok(EquilibriumState {
        trace: rho.trace().re,
        hermiticity_residual: rho.hermiticity_residual(),
        commutator_residual: rho.commutator(h)?.max_abs(),
        rho,
        beta,
        provenance,
    })
}

/// `e^{−βh} / Tr e^{−βh}`.
pub fn gibbs_state(h: &MatrixOperator, beta: f64) -> Result<EquilibriumState> {
    check_beta(beta)?;
    check_hermitian(h)?;
    let spec = spectrum(h);
    let d = DMatrix::from_diagonal(&spec.energies.map(|e| Complex64::from((-beta * e).exp())));
    finish(h, &spec, d, beta, Provenance::Gibbs)
}

/// Second-order reduced density
/// `ρ ∝ e^{−βh}[1 + (1/ħ) Σ_α ∫₀^{ħβ}dτ₁ ∫₀^{τ₁}dτ₂ S_α(−iτ₁) S_α(−iτ₂) k_α(τ₁−τ₂)]`
/// with `S(−iτ) = e^{τh/ħ} S e^{−τh/ħ}` and `ħ` taken from the basis of `h`.
///
/// Both integrals use the composite trapezoid rule on `n_tau` equally spaced
/// nodes of `[0, ħβ]`, iterated with `τ₂` inside. That rule is not invariant
/// under the reflection `(τ₁, τ₂) → (ħβ−τ₂, ħβ−τ₁)` of the triangle; the result
/// is averaged with the reflected rule, which makes the density Hermitian.
pub fn second_order_reduced_density(
    h: &MatrixOperator,
    couplings: &[Coupling],
    beta: f64,
    n_tau: usize,
) -> Result<EquilibriumState> {
    check_beta(beta)?;
    if n_tau < 8 {
        return Err(Error::InvalidParameter(format!("n_tau must be at least 8, got {n_tau}")));
    }
    check_hermitian(h)?;
    let hbar = h.basis().hbar();
    let tau_max = hbar * beta;
    for c in couplings {
        h.check_same_shape(&c.s)?;
        check_hermitian(&c.s)?;
        c.k.validate()?;
        c.k.check_covers(tau_max)?;
    }

    let spec = spectrum(h);
    let spread = spec.energies.max();
    if beta * spread > MAX_SPECTRAL_EXPONENT {
        return Err(Error::QuadratureInstability(format!(
            "beta * (E_max - E_min) = {} exceeds {MAX_SPECTRAL_EXPONENT}",
            beta * spread
        )));
    }

    let corrections: Vec<DMatrix<Complex64>> = couplings
        .par_iter()
        .map(|c| channel_correction(&spec, c, beta, hbar, n_tau))
        .collect();
    let mut rho = DMatrix::from_diagonal(&spec.energies.map(|e| Complex64::from((-beta * e).exp())));
    for c in corrections {
        // The τ₂-inner rule and its mirror image (τ₁-inner) give C and C†.
        rho += (&c + c.adjoint()) * Complex64::from(0.5);
    }
    finish(h, &spec, rho, beta, Provenance::SecondOrder)
}

/// `(1/ħ) Σ_k S̃_ik S̃_kj J_ikj` in the eigenbasis, where
/// `J_ikj = ∫∫ exp(−(ħβ−τ₁)E_i/ħ − (τ₁−τ₂)E_k/ħ − τ₂E_j/ħ) k(τ₁−τ₂)`.
fn channel_correction(spec: &Spectrum, c: &Coupling, beta: f64, hbar: f64, n: usize) -> DMatrix<Complex64> {
    let dim = spec.energies.len();
    if c.k.is_identically_zero() {
        return DMatrix::zeros(dim, dim);
    }
    let e = &spec.energies;
    let v = &spec.vectors;
    let s = v.adjoint() * c.s.entries() * v;
    let step = hbar * beta / (n - 1) as f64;
    let kernel: Vec<f64> = (0..n).map(|d| c.k.eval(d as f64 * step)).collect();
    let outer_w = |a: usize| if a == 0 || a == n - 1 { 0.5 * step } else { step };

    // inner[k][j][a] = ∫₀^{τ_a} e^{(τ₂−τ_a)(E_k−E_j)/ħ} k(τ_a−τ₂) dτ₂ after pulling out e^{−τ_a E_j/ħ}.
    let mut inner = vec![0.0; dim * dim * n];
    for k in 0..dim {
        for j in 0..dim {
            let rate = (e[k] - e[j]) / hbar;
            let base = (k * dim + j) * n;
            let f0 = kernel[0];
            let mut prefix = 0.0;
            for a in 0..n {
                let fa = (-(a as f64) * step * rate).exp() * kernel[a];
                prefix += fa;
                inner[base + a] = step * (prefix - 0.5 * (f0 + fa));
            }
        }
    }

    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let outer: Vec<f64> = (0..n)
                .map(|a| {
                    let t = a as f64 * step;
                    outer_w(a) * (-beta * e[i] + t * (e[i] - e[j]) / hbar).exp()
                })
                .collect();
            let mut acc = Complex64::from(0.0);
            for k in 0..dim {
                let base = (k * dim + j) * n;
                let jikj: f64 = (0..n).map(|a| outer[a] * inner[base + a]).sum();
                acc += s[(i, k)] * s[(k, j)] * jikj;
            }
            out[(i, j)] = acc / hbar;
        }
    }
    out
}

/// Comparison of the second-order density at `n_tau` and `2 n_tau` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RichardsonCheck {
    pub n_tau: usize,
    pub trace_norm_diff: f64,
}

impl RichardsonCheck {
    pub fn passed(&self) -> bool {
        self.trace_norm_diff < RICHARDSON_TOL
    }
}

/// Runs [`second_order_reduced_density`] at `n_tau` and `2 n_tau` and returns
/// the coarse state with the trace-norm distance between the two.
pub fn second_order_with_richardson(
    h: &MatrixOperator,
    couplings: &[Coupling],
    beta: f64,
    n_tau: usize,
) -> Result<(EquilibriumState, RichardsonCheck)> {
    let coarse = second_order_reduced_density(h, couplings, beta, n_tau)?;
    let fine = second_order_reduced_density(h, couplings, beta, 2 * n_tau)?;
    let trace_norm_diff = coarse.rho.trace_norm_diff(&fine.rho)?;
    Ok((coarse, RichardsonCheck { n_tau, trace_norm_diff }))
}
