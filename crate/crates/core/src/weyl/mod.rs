//! Wigner distributions from position-space kernels, and the Weyl
//! quantization oracle in a truncated oscillator basis.
//!
//! The transform `(1/2πħ) ∫du e^{-ipu/ħ} K(q+u/2, q−u/2)` is discretized on the
//! lattice of kernel samples: for a kernel sampled at spacing `Δx`, every pair
//! of nodes `(a, b)` contributes at `q = (x_a + x_b)/2`, `u = x_a − x_b`. The
//! resulting q-grid has spacing `Δx/2`, the u-lattice at fixed `q` has spacing
//! `2Δx`, and momenta are resolved up to the Nyquist limit `πħ/(2Δx)`.

mod fock;
mod operator;

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::format::g12;
use crate::symbols::{boundary_max_abs, GridSymbol, PhaseSpaceGrid};
use crate::{Error, Result};

pub use fock::{fock_bracket_symbol, weyl_quantize, weyl_symbol, SymbolFit, FIT_RESIDUAL_TOL};
pub use operator::{MatrixOperator, OscillatorBasis};

/// Normalization tolerance for Wigner states.
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// Relative Hermiticity tolerance for kernels.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative kernel magnitude allowed on the sampling boundary.
pub const KERNEL_DECAY_TOL: f64 = 1e-10;
/// Relative imaginary residue discarded when a transform should be real.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;
/// Highest-mode amplitude that marks the edge of a truncated basis.
pub const TAIL_TOL: f64 = 1e-8;

/// Samples `⟨x_f|Ô|x_i⟩` on a uniform grid; `values[(f, i)]`.
#[derive(Clone, Debug)]
pub struct PositionKernel {
    x_min: f64,
    x_max: f64,
    values: Array2<Complex64>,
}

impl PositionKernel {
    pub fn new(x_min: f64, x_max: f64, values: Array2<Complex64>) -> Result<Self> {
        let (n, m) = values.dim();
        if n != m {
            return Err(Error::DimensionMismatch(format!("kernel must be square, got {n} x {m}")));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("kernel needs an even number (>= 16) of points, got {n}")));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!("bad x range [{x_min}, {x_max}]")));
        }
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("kernel sample".into()));
        }
        Ok(Self { x_min, x_max, values })
    }

    /// Samples `f(x_f, x_i)` on `n_x` nodes of `[x_min, x_max]`.
    pub fn from_fn(x_min: f64, x_max: f64, n_x: usize, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::InvalidGrid(format!("kernel needs at least 16 points, got {n_x}")));
        }
        let dx = (x_max - x_min) / (n_x - 1) as f64;
        let xs: Vec<f64> = (0..n_x).map(|i| x_min + i as f64 * dx).collect();
        let values = Array2::from_shape_fn((n_x, n_x), |(a, b)| f(xs[a], xs[b]));
        Self::new(x_min, x_max, values)
    }

    pub fn n_x(&self) -> usize {
        self.values.nrows()
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x() - 1) as f64
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    /// Largest momentum the u-lattice resolves, `πħ/(2Δx)`.
    pub fn nyquist_momentum(&self, hbar: f64) -> f64 {
        PI * hbar / (2.0 * self.dx())
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// `max |K − K†| / max |K|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.n_x();
        let mut r: f64 = 0.0;
        for a in 0..n {
            for b in a..n {
                r = r.max((self.values[[a, b]] - self.values[[b, a]].conj()).norm());
            }
        }
        r / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `max |K| on the sampling boundary / max |K|`.
    pub fn boundary_decay(&self) -> f64 {
        let mags = self.values.mapv(|c| c.norm());
        boundary_max_abs(&mags) / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `∫ K(x, x) dx` by the trapezoid rule.
    pub fn trace(&self) -> Complex64 {
        let n = self.n_x();
        let inner: Complex64 = (1..n - 1).map(|i| self.values[[i, i]]).sum();
        (inner + 0.5 * (self.values[[0, 0]] + self.values[[n - 1, n - 1]])) * self.dx()
    }
}

/// Momentum axis requested from [`wigner_from_kernel`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumWindow {
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
}

/// Grid-sampled Wigner distribution with unit trapezoid integral.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerState {
    grid: PhaseSpaceGrid,
    values: Array2<f64>,
    hbar: f64,
}

impl WignerState {
    /// Accepts `values` if they integrate to one within [`NORMALIZATION_TOL`].
    pub fn new(grid: PhaseSpaceGrid, values: Array2<f64>, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        let values = GridSymbol::new(grid, values)?;
        let integral = values.integrate();
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization(integral));
        }
        let grid = values.grid().clone();
        Ok(Self { grid, values: values.into_values(), hbar })
    }

    /// Rescales `values` to unit integral.
    pub fn normalized(grid: PhaseSpaceGrid, values: Array2<f64>, hbar: f64) -> Result<Self> {
        let integral = grid.integrate(&values);
        if !(integral.abs() > f64::MIN_POSITIVE) || !integral.is_finite() {
            return Err(Error::Normalization(integral));
        }
        Self::new(grid, values / integral, hbar)
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn to_grid_symbol(&self) -> GridSymbol {
        GridSymbol::new(self.grid.clone(), self.values.clone()).expect("state values are finite")
    }

    /// Sup-norm difference over the central `fraction` of a shared grid.
    pub fn sup_diff(&self, other: &WignerState, fraction: f64) -> Result<f64> {
        self.to_grid_symbol().sup_diff(&other.to_grid_symbol(), fraction)
    }

    /// CSV with header `q,p,w`, q-major.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "q,p,w")?;
        let (qs, ps) = (self.grid.q_nodes(), self.grid.p_nodes());
        for (i, q) in qs.iter().enumerate() {
            for (j, p) in ps.iter().enumerate() {
                writeln!(w, "{},{},{}", g12(*q), g12(*p), g12(self.values[[i, j]]))?;
            }
        }
        Ok(())
    }

    /// JSON object with grid metadata and a q-major nested value array.
    pub fn write_json(&self, w: impl Write) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.values.outer_iter().map(|r| r.to_vec()).collect();
        let doc = serde_json::json!({
            "grid": self.grid,
            "hbar": self.hbar,
            "integral": self.integral(),
            "values": rows,
        });
        serde_json::to_writer_pretty(w, &doc)?;
        Ok(())
    }
}

/// `Σ_u Δu e^{-ipu/ħ} k(u)` for every `p`.
fn fourier_row(samples: &[(f64, Complex64)], du: f64, ps: &[f64], hbar: f64) -> Vec<Complex64> {
    ps.iter()
        .map(|&p| {
            let s: Complex64 = samples
                .iter()
                .map(|&(u, k)| {
                    let (sin, cos) = (-p * u / hbar).sin_cos();
                    k * Complex64::new(cos, sin)
                })
                .sum();
            s * du
        })
        .collect()
}

/// Real part of a complex grid, after checking the imaginary residue.
fn real_part(rows: Vec<Vec<Complex64>>) -> Result<Array2<f64>> {
    let (nq, np) = (rows.len(), rows[0].len());
    let mut re = Array2::zeros((nq, np));
    let (mut max_re, mut max_im): (f64, f64) = (0.0, 0.0);
    for (i, row) in rows.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            re[[i, j]] = c.re;
            max_re = max_re.max(c.re.abs());
            max_im = max_im.max(c.im.abs());
        }
    }
    let tol = IMAG_RESIDUE_TOL * max_re.max(f64::MIN_POSITIVE);
    if max_im > tol {
        return Err(Error::ImaginaryResidue { residue: max_im, tol });
    }
    Ok(re)
}

/// Wigner distribution of the operator whose position kernel is `k`,
/// normalized to unit integral.
///
/// The q-axis is the kernel's x-range at spacing `Δx/2`. The p-axis is `window`
/// if given, else `n_x + 1` points spanning the Nyquist band.
pub fn wigner_from_kernel(k: &PositionKernel, hbar: f64, window: Option<MomentumWindow>) -> Result<WignerState> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
    }
    let herm = k.hermiticity_residual();
    if herm > HERMITIAN_TOL {
        return Err(Error::NonHermitian(herm));
    }
    let decay = k.boundary_decay();
    if decay > KERNEL_DECAY_TOL {
        return Err(Error::BoundaryLeak(decay));
    }
    let trace = k.trace();
    if trace.norm() <= f64::EPSILON * k.max_abs() * (k.x_max - k.x_min) {
        return Err(Error::ZeroTrace);
    }

    let nyquist = k.nyquist_momentum(hbar);
    let window = window.unwrap_or(MomentumWindow { p_min: -nyquist, p_max: nyquist, n_p: k.n_x() + 1 });
    let requested = window.p_min.abs().max(window.p_max.abs());
    if requested > nyquist * (1.0 + 1e-12) {
        return Err(Error::NyquistExceeded { requested, nyquist });
    }

    let n = k.n_x();
    let dx = k.dx();
    let grid = PhaseSpaceGrid::new(k.x_min, k.x_max, 2 * n - 1, window.p_min, window.p_max, window.n_p)?;
    let ps = grid.p_nodes();
    let prefactor = 1.0 / (2.0 * PI * hbar);

    // Row r collects every node pair with a + b = r.
    let rows: Vec<Vec<Complex64>> = (0..2 * n - 1)
        .into_par_iter()
        .map(|r| {
            let lo = r.saturating_sub(n - 1);
            let hi = r.min(n - 1);
            let samples: Vec<(f64, Complex64)> = (lo..=hi)
                .map(|a| {
                    let b = r - a;
                    ((a as f64 - b as f64) * dx, k.values[[a, b]] * prefactor)
                })
                .collect();
            fourier_row(&samples, 2.0 * dx, &ps, hbar)
        })
        .collect();

    WignerState::normalized(grid, real_part(rows)?, hbar)
}

/// Weyl symbol `∫du e^{-ipu/ħ} ⟨q+u/2|Ô|q−u/2⟩` of a trace-class operator given
/// in a truncated oscillator basis, sampled on `grid`.
///
/// The position kernel is assembled from the basis eigenfunctions. This route
/// suits operators whose matrix elements decay within the basis (density
/// matrices); for polynomial operators use [`weyl_symbol`], since their
/// truncated kernels carry O(1) truncation ripples.
///
/// The grid must lie inside the region where the highest basis function still
/// exceeds [`TAIL_TOL`]; beyond it the truncated basis carries no information.
pub fn wigner_of_operator(o: &MatrixOperator, grid: &PhaseSpaceGrid) -> Result<GridSymbol> {
    let basis = o.basis();
    let dim = o.dim();
    let hbar = basis.hbar();
    let tail = tail_extent(&basis, dim);
    let q_extent = grid.q_min().abs().max(grid.q_max().abs());
    if q_extent > tail {
        return Err(Error::Coverage(format!(
            "grid reaches |q| = {q_extent}, beyond the basis tail at {tail} (level {} below {TAIL_TOL:e})",
            dim - 1
        )));
    }
    let p_extent = grid.p_min().abs().max(grid.p_max().abs());
    // Band limit of the integrand in u: two eigenfunctions at half speed plus
    // the momentum phase; sample at twice that.
    let band = (2.0 * dim as f64 + 1.0).sqrt() / basis.length() + p_extent / hbar;
    let du = PI / (2.0 * band);
    let u_max = 2.0 * (tail + q_extent);
    let n_u = (u_max / du).ceil() as i64;

    let entries = o.entries();
    let qs = grid.q_nodes();
    let ps = grid.p_nodes();
    let rows: Vec<Vec<Complex64>> = qs
        .par_iter()
        .map(|&q| {
            let mut left = Vec::with_capacity(dim);
            let mut right = Vec::with_capacity(dim);
            let samples: Vec<(f64, Complex64)> = (-n_u..=n_u)
                .map(|k| {
                    let u = k as f64 * du;
                    basis.eigenfunctions(q + 0.5 * u, dim, &mut left);
                    basis.eigenfunctions(q - 0.5 * u, dim, &mut right);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (m, l) in left.iter().enumerate() {
                        if *l == 0.0 {
                            continue;
                        }
                        let row: Complex64 = right.iter().enumerate().map(|(n, r)| entries[(m, n)] * *r).sum();
                        acc += row * *l;
                    }
                    (u, acc)
                })
                .collect();
            fourier_row(&samples, du, &ps, hbar)
        })
        .collect();
    GridSymbol::new(grid.clone(), real_part(rows)?)
}

/// Smallest `x` beyond the classical turning point of level `dim − 1` where
/// that eigenfunction (in units of `length^{-1/2}`) drops below [`TAIL_TOL`].
fn tail_extent(basis: &OscillatorBasis, dim: usize) -> f64 {
    let length = basis.length();
    let mut x = (2.0 * dim as f64 - 1.0).sqrt() * length;
    let step = 0.01 * length;
    let mut psi = Vec::new();
    loop {
        basis.eigenfunctions(x, dim, &mut psi);
        if psi[dim - 1].abs() * length.sqrt() < TAIL_TOL {
            return x;
        }
        x += step;
    }
}
