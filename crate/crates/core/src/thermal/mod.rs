//! Thermal objects for the harmonic oscillator and for finite-dimensional
//! systems weakly coupled to a bath.

mod second_order;

use std::f64::consts::{LN_2, PI};

use ndarray::Array2;
use num_complex::Complex64;

use crate::symbols::{boundary_max_abs, GridSymbol, PhaseSpaceGrid, PolySymbol};
use crate::weyl::{wigner_from_kernel, MomentumWindow, OscillatorBasis, PositionKernel, WignerState};
use crate::{Error, Result};

pub use second_order::{
    INPUT_HERMITIAN_TOL, MAX_SPECTRAL_EXPONENT, RICHARDSON_TOL,
    gibbs_state, second_order_reduced_density, second_order_with_richardson, BathCorrelation, Coupling,
    EquilibriumState, Provenance, RichardsonCheck,
};

/// Minimum coverage of the closed-form state, in thermal standard deviations.
pub const MIN_COVERAGE_SIGMAS: f64 = 6.0;
/// Relative magnitude of `e^{-βH}` allowed on the grid boundary.
pub const GIBBS_DECAY_TOL: f64 = 1e-10;

/// Harmonic oscillator `p²/2m + mω²q²/2` at inverse temperature `β`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscillatorSpec {
    pub mass: f64,
    pub omega: f64,
    pub beta: f64,
    pub hbar: f64,
    pub k_b: f64,
}

impl Default for OscillatorSpec {
    fn default() -> Self {
        Self { mass: 1.0, omega: 1.0, beta: 1.0, hbar: 1.0, k_b: 1.0 }
    }
}

impl OscillatorSpec {
    pub fn new(mass: f64, omega: f64, beta: f64, hbar: f64, k_b: f64) -> Result<Self> {
        Self { mass, omega, beta, hbar, k_b }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        for (name, v) in [
            ("mass", self.mass),
            ("omega", self.omega),
            ("beta", self.beta),
            ("hbar", self.hbar),
            ("kB", self.k_b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(self)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self { beta, ..self }.validated()
    }

    /// `ħωβ`.
    pub fn reduced_beta(&self) -> f64 {
        self.hbar * self.omega * self.beta
    }

    pub fn basis(&self) -> OscillatorBasis {
        OscillatorBasis::new(self.mass, self.omega, self.hbar).expect("validated spec")
    }

    /// `ħ coth(ħωβ/2) / (2mω)`.
    pub fn sigma_q(&self) -> f64 {
        (self.hbar * coth(0.5 * self.reduced_beta()) / (2.0 * self.mass * self.omega)).sqrt()
    }

    /// `mωħ coth(ħωβ/2) / 2`.
    pub fn sigma_p(&self) -> f64 {
        (self.mass * self.omega * self.hbar * coth(0.5 * self.reduced_beta()) / 2.0).sqrt()
    }

    /// Symmetric grid spanning `sigmas` thermal standard deviations per axis.
    pub fn thermal_grid(&self, sigmas: f64, n: usize) -> Result<PhaseSpaceGrid> {
        PhaseSpaceGrid::symmetric(sigmas * self.sigma_q(), n, sigmas * self.sigma_p(), n)
    }

    /// Sets the field named by a spec-file key (`m`/`mass`, `omega`, `beta`,
    /// `hbar`, `kB`). Returns `false` for other keys.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<bool> {
        let slot = match key {
            "m" | "mass" => &mut self.mass,
            "omega" => &mut self.omega,
            "beta" => &mut self.beta,
            "hbar" => &mut self.hbar,
            "kB" | "k_B" => &mut self.k_b,
            _ => return Ok(false),
        };
        *slot = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?} as a number")))?;
        Ok(true)
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped and
    /// omitted keys keep their default of 1.
    pub fn from_spec_text(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (key, value) in parse_key_values(text)? {
            if !s.set_key(&key, &value)? {
                return Err(Error::InvalidParameter(format!("unknown spec key {key:?}")));
            }
        }
        s.validated()
    }

    /// The classical Hamiltonian symbol.
    pub fn hamiltonian(&self) -> PolySymbol {
        PolySymbol::from_terms([
            ((0, 2), 0.5 / self.mass),
            ((2, 0), 0.5 * self.mass * self.omega * self.omega),
        ])
        .expect("quadratic symbol")
    }
}

/// Splits `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("line {}: expected key=value, got {line:?}", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// `ln sinh x` for `x > 0`, without overflow.
fn ln_sinh(x: f64) -> f64 {
    if x > 20.0 {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

/// `ln ⟨x_f|e^{-βĤ}|x_i⟩` of the oscillator.
pub fn ln_mehler_kernel(s: &OscillatorSpec, x_f: f64, x_i: f64) -> f64 {
    let x = s.reduced_beta();
    let a = s.mass * s.omega / s.hbar;
    // 1/sinh x = 2e^{-x}/(1 − e^{-2x}) keeps the cross term finite at large x.
    let csch = if x > 20.0 { 2.0 * (-x).exp() / (1.0 - (-2.0 * x).exp()) } else { 1.0 / x.sinh() };
    let exponent = -0.5 * a * ((x_f * x_f + x_i * x_i) * coth(x) - 2.0 * x_f * x_i * csch);
    0.5 * ((a / (2.0 * PI)).ln() - ln_sinh(x)) + exponent
}

/// `⟨x_f|e^{-βĤ}|x_i⟩ = sqrt(mω/(2πħ sinh ħβω)) exp(−(mω/2ħ)[(x_f²+x_i²) coth ħβω − 2x_f x_i / sinh ħβω])`.
pub fn mehler_kernel(s: &OscillatorSpec, x_f: f64, x_i: f64) -> f64 {
    ln_mehler_kernel(s, x_f, x_i).exp()
}

/// The same kernel in midpoint/difference variables `q = (x_f+x_i)/2`, `u = x_f − x_i`:
/// `sqrt(mω/(2πħ sinh ħβω)) exp(−(mω/ħ) q² tanh(ħωβ/2) − (mω/4ħ) u² coth(ħωβ/2))`.
pub fn mehler_kernel_midpoint(s: &OscillatorSpec, q: f64, u: f64) -> f64 {
    let x = s.reduced_beta();
    let a = s.mass * s.omega / s.hbar;
    let ln_pref = 0.5 * ((a / (2.0 * PI)).ln() - ln_sinh(x));
    (ln_pref - a * q * q * (0.5 * x).tanh() - 0.25 * a * u * u * coth(0.5 * x)).exp()
}

/// Samples the Mehler kernel on `n_x` nodes of `[-half_width, half_width]`,
/// divided by `Z_S` when `normalize` is set.
pub fn sample_mehler_kernel(s: &OscillatorSpec, half_width: f64, n_x: usize, normalize: bool) -> Result<PositionKernel> {
    let ln_z = if normalize { ho_ln_partition_function(s) } else { 0.0 };
    PositionKernel::from_fn(-half_width, half_width, n_x, |a, b| {
        Complex64::from((ln_mehler_kernel(s, a, b) - ln_z).exp())
    })
}

/// Wigner state of `e^{−βĤ}/Z_S` computed from the sampled Mehler kernel.
///
/// The kernel spans `√2 · sigmas` thermal deviations in q, where its
/// off-diagonal edge is as small as the diagonal at `sigmas` deviations. It has
/// at least `min_nodes` nodes, more if needed to put the momentum window of
/// `sigmas` deviations inside the Nyquist band. The p-axis has `n_p` points.
pub fn ho_wigner_from_mehler(s: &OscillatorSpec, sigmas: f64, min_nodes: usize, n_p: usize) -> Result<WignerState> {
    if !(sigmas > 0.0 && sigmas.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid half-width must be positive, got {sigmas} sigma")));
    }
    if sigmas < MIN_COVERAGE_SIGMAS {
        return Err(Error::Coverage(format!(
            "window of {sigmas} thermal deviations is below the minimum {MIN_COVERAGE_SIGMAS}"
        )));
    }
    let (q_half, p_half) = (std::f64::consts::SQRT_2 * sigmas * s.sigma_q(), sigmas * s.sigma_p());
    let needed = (4.0 * q_half * p_half / (PI * s.hbar)).ceil() as usize + 1;
    let mut n_x = min_nodes.max(needed).max(16);
    n_x += n_x % 2;
    let kernel = sample_mehler_kernel(s, q_half, n_x, true)?;
    let window = MomentumWindow { p_min: -p_half, p_max: p_half, n_p };
    wigner_from_kernel(&kernel, s.hbar, Some(window))
}

/// `ln Z_S = −ħωβ/2 − ln(1 − e^{−ħωβ})`.
pub fn ho_ln_partition_function(s: &OscillatorSpec) -> f64 {
    let x = s.reduced_beta();
    -0.5 * x - (-(-x).exp()).ln_1p()
}

/// `Z_S = 1 / (2 sinh(ħωβ/2))`.
pub fn ho_partition_function(s: &OscillatorSpec) -> f64 {
    ho_ln_partition_function(s).exp()
}

/// Closed-form thermal Wigner function of the oscillator,
/// `(1/πħ) tanh(ħωβ/2) exp(−tanh(ħωβ/2)/(ωħ) · (p²/m + mω²q²))`.
pub fn ho_wigner_value(s: &OscillatorSpec, q: f64, p: f64) -> f64 {
    let t = (0.5 * s.reduced_beta()).tanh();
    t / (PI * s.hbar) * (-t / (s.omega * s.hbar) * (p * p / s.mass + s.mass * s.omega * s.omega * q * q)).exp()
}

/// Samples [`ho_wigner_value`] on `grid`, which must reach at least
/// [`MIN_COVERAGE_SIGMAS`] thermal deviations on both sides of each axis.
pub fn ho_wigner_closed_form(s: &OscillatorSpec, grid: &PhaseSpaceGrid) -> Result<WignerState> {
    let (sq, sp) = (MIN_COVERAGE_SIGMAS * s.sigma_q(), MIN_COVERAGE_SIGMAS * s.sigma_p());
    if grid.q_min() > -sq || grid.q_max() < sq || grid.p_min() > -sp || grid.p_max() < sp {
        return Err(Error::Coverage(format!(
            "grid q [{}, {}], p [{}, {}] must cover |q| <= {sq}, |p| <= {sp}",
            grid.q_min(),
            grid.q_max(),
            grid.p_min(),
            grid.p_max()
        )));
    }
    let (qs, ps) = (grid.q_nodes(), grid.p_nodes());
    let values = Array2::from_shape_fn((grid.n_q(), grid.n_p()), |(i, j)| ho_wigner_value(s, qs[i], ps[j]));
    WignerState::new(grid.clone(), values, s.hbar)
}

/// Trapezoid value of `∫∫ exp(−tanh(ħωβ/2)/(ωħ) · (p²/m + mω²q²)) dq dp`,
/// which tends to `πħ` at low temperature.
pub fn ho_wigner_normalizer(s: &OscillatorSpec, grid: &PhaseSpaceGrid) -> f64 {
    let (qs, ps) = (grid.q_nodes(), grid.p_nodes());
    let t = (0.5 * s.reduced_beta()).tanh();
    let values = Array2::from_shape_fn((grid.n_q(), grid.n_p()), |(i, j)| {
        (-t / (s.omega * s.hbar) * (ps[j] * ps[j] / s.mass + s.mass * s.omega * s.omega * qs[i] * qs[i])).exp()
    });
    grid.integrate(&values)
}

/// Classical canonical density `e^{−βH}/Z` on a grid, with its normalizer.
#[derive(Clone, Debug)]
pub struct ClassicalGibbs {
    pub density: GridSymbol,
    /// Trapezoid value of `∫∫ e^{−βH} dq dp`.
    pub z: f64,
}

impl ClassicalGibbs {
    /// The density as a phase-space state, for use with averaging routines.
    pub fn into_state(self, hbar: f64) -> Result<WignerState> {
        let grid = self.density.grid().clone();
        WignerState::new(grid, self.density.into_values(), hbar)
    }
}

pub fn classical_gibbs_density(h: &PolySymbol, beta: f64, grid: &PhaseSpaceGrid) -> Result<ClassicalGibbs> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let energies = h.sample_on_grid(grid);
    let e_min = energies.values().iter().fold(f64::INFINITY, |m, &e| m.min(e));
    let weights = energies.values().mapv(|e| (-beta * (e - e_min)).exp());
    let leak = boundary_max_abs(&weights);
    if leak > GIBBS_DECAY_TOL {
        return Err(Error::BoundaryLeak(leak));
    }
    let shifted_z = grid.integrate(&weights);
    let density = GridSymbol::new(grid.clone(), weights / shifted_z)?;
    Ok(ClassicalGibbs { density, z: shifted_z * (-beta * e_min).exp() })
}
