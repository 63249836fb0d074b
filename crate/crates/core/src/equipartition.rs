//! Virial averages `⟨q ∂H/∂q⟩` and `⟨p ∂H/∂p⟩` over phase-space states.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::format::g12;
use crate::moyal::{moyal_bracket, HbarContext};
use crate::symbols::{boundary_max_abs, poisson_bracket, PolySymbol, Var};
use crate::thermal::{ho_wigner_closed_form, OscillatorSpec};
use crate::weyl::WignerState;
use crate::{Error, Result};

/// Largest admissible `|w·s|` on the grid boundary, relative to its peak.
pub const AVERAGE_LEAK_TOL: f64 = 1e-10;
/// Largest admissible deviation between the three virial routes.
pub const ROUTE_TOL: f64 = 1e-9;
/// Largest admissible change of a report under grid refinement.
pub const SELF_CHECK_TOL: f64 = 1e-8;

/// `H = F(q) + G(p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparableHamiltonian {
    f: PolySymbol,
    g: PolySymbol,
}

impl SeparableHamiltonian {
    pub fn new(f: PolySymbol, g: PolySymbol) -> Result<Self> {
        if f.degree_in(Var::P) > 0 {
            return Err(Error::InvalidParameter(format!("potential {f} depends on p")));
        }
        if g.degree_in(Var::Q) > 0 {
            return Err(Error::InvalidParameter(format!("kinetic term {g} depends on q")));
        }
        Ok(Self { f, g })
    }

    /// `F = mω²q²/2`, `G = p²/2m`.
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        Self {
            f: PolySymbol::monomial(0.5 * mass * omega * omega, 2, 0),
            g: PolySymbol::monomial(0.5 / mass, 0, 2),
        }
    }

    pub fn potential(&self) -> &PolySymbol {
        &self.f
    }

    pub fn kinetic(&self) -> &PolySymbol {
        &self.g
    }

    pub fn hamiltonian(&self) -> PolySymbol {
        self.f.add(&self.g)
    }
}

/// Trapezoid value of `∫∫ w s dq dp`.
pub fn phase_space_average(w: &WignerState, s: &PolySymbol) -> Result<f64> {
    let product = w.values() * s.sample_on_grid(w.grid()).values();
    let peak = product.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(0.0);
    }
    let leak = boundary_max_abs(&product) / peak;
    if leak > AVERAGE_LEAK_TOL {
        return Err(Error::BoundaryLeak(leak));
    }
    Ok(w.grid().integrate(&product))
}

/// A virial average and the largest disagreement among its three routes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirialEstimate {
    pub value: f64,
    pub spread: f64,
}

fn three_routes(w: &WignerState, direct: PolySymbol, moyal: PolySymbol, poisson: PolySymbol) -> Result<VirialEstimate> {
    let values = [
        phase_space_average(w, &direct)?,
        phase_space_average(w, &moyal)?,
        phase_space_average(w, &poisson)?,
    ];
    let spread = values
        .iter()
        .flat_map(|a| values.iter().map(move |b| (a - b).abs()))
        .fold(0.0, f64::max);
    if !(spread < ROUTE_TOL) {
        return Err(Error::RouteDisagreement(spread));
    }
    Ok(VirialEstimate { value: values[0], spread })
}

/// `⟨q F′(q)⟩`, computed from `q F′`, from `−{qp, F}` with the Moyal bracket
/// and from `−{qp, F}` with the Poisson bracket.
pub fn virial_q(w: &WignerState, h: &SeparableHamiltonian) -> Result<VirialEstimate> {
    let qp = PolySymbol::monomial(1.0, 1, 1);
    let ctx = HbarContext::new(w.hbar())?;
    three_routes(
        w,
        PolySymbol::q().mul(&h.f.partial_derivative(Var::Q, 1))?,
        moyal_bracket(&qp, &h.f, ctx)?.scale(-1.0),
        poisson_bracket(&qp, &h.f)?.scale(-1.0),
    )
}

/// `⟨p G′(p)⟩`, computed from `p G′`, from `{pq, G}` with the Moyal bracket
/// and from `{pq, G}` with the Poisson bracket.
pub fn virial_p(w: &WignerState, h: &SeparableHamiltonian) -> Result<VirialEstimate> {
    let pq = PolySymbol::monomial(1.0, 1, 1);
    let ctx = HbarContext::new(w.hbar())?;
    three_routes(
        w,
        PolySymbol::p().mul(&h.g.partial_derivative(Var::P, 1))?,
        moyal_bracket(&pq, &h.g, ctx)?,
        poisson_bracket(&pq, &h.g)?,
    )
}

/// `β_mod = 1/e`.
pub fn beta_mod_extract(e: f64) -> Result<f64> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::NonPositiveAverage(e));
    }
    Ok(1.0 / e)
}

/// `(ħω/2) coth(ħωβ/2)`.
pub fn exact_ho_virial(s: &OscillatorSpec) -> f64 {
    let x = 0.5 * s.reduced_beta();
    0.5 * s.hbar * s.omega / x.tanh()
}

/// How sweep grids are sized and verified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPolicy {
    /// Half-width of each axis in thermal standard deviations.
    pub sigmas: f64,
    pub n: usize,
    /// Repeat each evaluation on the refined grid and require agreement.
    pub self_check: bool,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { sigmas: 8.0, n: 257, self_check: true }
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquipartitionReport {
    pub beta: f64,
    pub E_q: f64,
    pub E_p: f64,
    pub kT: f64,
    pub beta_mod_q: f64,
    pub beta_mod_p: f64,
    pub route_spread: f64,
    pub exact_reference: Option<f64>,
}

pub const REPORT_CSV_HEADER: &str = "beta,E_q,E_p,kT,beta_mod_q,beta_mod_p,route_spread,exact_reference";

impl EquipartitionReport {
    pub fn csv_row(&self) -> String {
        let mut cells: Vec<String> = [
            self.beta,
            self.E_q,
            self.E_p,
            self.kT,
            self.beta_mod_q,
            self.beta_mod_p,
            self.route_spread,
        ]
        .iter()
        .map(|&v| g12(v))
        .collect();
        cells.push(self.exact_reference.map(g12).unwrap_or_default());
        cells.join(",")
    }
}

pub fn write_reports_csv(reports: &[EquipartitionReport], mut w: impl Write) -> Result<()> {
    writeln!(w, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn write_reports_json(reports: &[EquipartitionReport], mut w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, reports)?;
    writeln!(w)?;
    Ok(())
}

fn evaluate(spec: &OscillatorSpec, h: &SeparableHamiltonian, sigmas: f64, n: usize) -> Result<(VirialEstimate, VirialEstimate)> {
    let grid = spec.thermal_grid(sigmas, n)?;
    let w = ho_wigner_closed_form(spec, &grid)?;
    Ok((virial_q(&w, h)?, virial_p(&w, h)?))
}

/// Equipartition report for one oscillator at `spec.beta`.
pub fn oscillator_report(spec: &OscillatorSpec, policy: GridPolicy) -> Result<EquipartitionReport> {
    let h = SeparableHamiltonian::harmonic(spec.mass, spec.omega);
    let (eq, ep) = evaluate(spec, &h, policy.sigmas, policy.n)?;
    if policy.self_check {
        let (fq, fp) = evaluate(spec, &h, policy.sigmas, 2 * (policy.n - 1) + 1)?;
        let moved = (fq.value - eq.value).abs().max((fp.value - ep.value).abs());
        if !(moved <= SELF_CHECK_TOL) {
            return Err(Error::ResolutionCheck(moved));
        }
    }
    Ok(EquipartitionReport {
        beta: spec.beta,
        E_q: eq.value,
        E_p: ep.value,
        kT: 1.0 / (spec.k_b * spec.beta),
        beta_mod_q: beta_mod_extract(eq.value)?,
        beta_mod_p: beta_mod_extract(ep.value)?,
        route_spread: eq.spread.max(ep.spread),
        exact_reference: Some(exact_ho_virial(spec)),
    })
}

/// One report per entry of `betas`, in input order.
pub fn temperature_sweep(template: &OscillatorSpec, betas: &[f64], policy: GridPolicy) -> Result<Vec<EquipartitionReport>> {
    if betas.is_empty() {
        return Err(Error::InvalidParameter("no temperatures requested".into()));
    }
    if betas.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidParameter("every beta must be positive and finite".into()));
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("betas must be sorted in increasing order".into()));
    }
    betas
        .par_iter()
        .map(|&b| oscillator_report(&template.with_beta(b)?, policy))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::PhaseSpaceGrid;
    use crate::thermal::classical_gibbs_density;

    fn ho_state(beta: f64) -> WignerState {
        let s = OscillatorSpec::new(1.0, 1.0, beta, 1.0, 1.0).unwrap();
        ho_wigner_closed_form(&s, &s.thermal_grid(8.0, 257).unwrap()).unwrap()
    }

    // coth(1)/2, mpmath
    const HALF_COTH_1: f64 = 0.656517642749665880;

    #[test]
    fn separable_validation() {
        assert!(SeparableHamiltonian::new("q*p".parse().unwrap(), PolySymbol::zero()).is_err());
        assert!(SeparableHamiltonian::new(PolySymbol::zero(), "q + p^2".parse().unwrap()).is_err());
        let h = SeparableHamiltonian::harmonic(2.0, 3.0);
        assert_eq!(h.hamiltonian(), "9*q^2 + 0.25*p^2".parse().unwrap());
    }

    #[test]
    fn average_examples() {
        let w = ho_state(2.0);
        assert!((phase_space_average(&w, &PolySymbol::one()).unwrap() - 1.0).abs() < 1e-6);
        let h = SeparableHamiltonian::harmonic(1.0, 1.0).hamiltonian();
        assert!((phase_space_average(&w, &h).unwrap() - HALF_COTH_1).abs() < 1e-9);
        for beta in [0.1, 2.0, 30.0] {
            assert!(phase_space_average(&ho_state(beta), &PolySymbol::q()).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn average_reports_boundary_leak() {
        let s = OscillatorSpec::new(1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let w = ho_wigner_closed_form(&s, &s.thermal_grid(6.0, 129).unwrap()).unwrap();
        let q8 = PolySymbol::monomial(1.0, 8, 0);
        assert!(matches!(phase_space_average(&w, &q8), Err(Error::BoundaryLeak(_))));
    }

    #[test]
    fn virial_examples() {
        let h = SeparableHamiltonian::harmonic(1.0, 1.0);
        let w = ho_state(2.0);
        let (vq, vp) = (virial_q(&w, &h).unwrap(), virial_p(&w, &h).unwrap());
        // m ω² ⟨q²⟩ and ⟨p²⟩/m from the closed-form variances.
        assert!((vq.value - HALF_COTH_1).abs() < 1e-9);
        assert!((vp.value - HALF_COTH_1).abs() < 1e-9);
        assert!(vq.spread < 1e-12 && vp.spread < 1e-12);

        let w = ho_state(100.0);
        assert!((virial_q(&w, &h).unwrap().value - 0.5).abs() < 1e-6);
        assert!((virial_p(&w, &h).unwrap().value - 0.5).abs() < 1e-6);

        let w = ho_state(0.01);
        assert!((virial_q(&w, &h).unwrap().value / 100.0 - 1.0).abs() < 1e-3);
        assert!((virial_p(&w, &h).unwrap().value / 100.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn beta_mod_examples() {
        assert_eq!(beta_mod_extract(0.5).unwrap(), 2.0);
        assert!((beta_mod_extract(1.0 / 3.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((beta_mod_extract(0.656518).unwrap() - 1.523188).abs() < 1e-6);
        assert!(matches!(beta_mod_extract(0.0), Err(Error::NonPositiveAverage(_))));
        assert!(beta_mod_extract(-1.0).is_err());
    }

    #[test]
    fn exact_virial_examples() {
        let s = |beta: f64| OscillatorSpec::new(1.0, 1.0, beta, 1.0, 1.0).unwrap();
        assert!((exact_ho_virial(&s(2.0)) - HALF_COTH_1).abs() < 1e-15);
        assert!((exact_ho_virial(&s(200.0)) / 0.5 - 1.0).abs() < 1e-12);
        for beta in [0.3, 0.1, 0.01] {
            let ratio = exact_ho_virial(&s(beta)) * beta;
            assert!((ratio - 1.0).abs() <= beta * beta / 12.0 + 1e-15);
        }
    }

    #[test]
    fn sweep_examples() {
        let t = OscillatorSpec::default();
        let r = temperature_sweep(&t, &[0.01], GridPolicy::default()).unwrap();
        assert!((r[0].E_p / r[0].kT - 1.0).abs() <= 1e-3);

        let r = temperature_sweep(&t, &[100.0], GridPolicy::default()).unwrap();
        assert!((r[0].E_p - 0.5).abs() <= 1e-6);
        assert!((r[0].beta_mod_p - 2.0).abs() <= 1e-5);

        let betas = [0.5, 1.0, 2.0, 4.0];
        let r = temperature_sweep(&t, &betas, GridPolicy::default()).unwrap();
        for (rep, b) in r.iter().zip(betas) {
            assert_eq!(rep.beta, b);
            let exact = rep.exact_reference.unwrap();
            assert!((rep.E_q - exact).abs() <= 1e-6 && (rep.E_p - exact).abs() <= 1e-6);
            assert!((rep.E_q - rep.E_p).abs() <= 1e-8);
        }
    }

    #[test]
    fn sweep_rejects_bad_betas() {
        let t = OscillatorSpec::default();
        let p = GridPolicy::default();
        assert!(temperature_sweep(&t, &[], p).is_err());
        assert!(temperature_sweep(&t, &[2.0, 1.0], p).is_err());
        assert!(temperature_sweep(&t, &[0.0], p).is_err());
    }

    #[test]
    fn too_narrow_policy_fails_the_leak_check() {
        let p = GridPolicy { sigmas: 6.0, ..GridPolicy::default() };
        assert!(matches!(
            temperature_sweep(&OscillatorSpec::default(), &[1.0], p),
            Err(Error::BoundaryLeak(_))
        ));
    }

    #[test]
    fn classical_quartic_virial() {
        let h = SeparableHamiltonian::new("0.25*q^4".parse().unwrap(), "0.5*p^2".parse().unwrap()).unwrap();
        let g = PhaseSpaceGrid::new(-5.0, 5.0, 401, -8.0, 8.0, 401).unwrap();
        for beta in [1.0, 2.5] {
            let w = classical_gibbs_density(&h.hamiltonian(), beta, &g).unwrap().into_state(1.0).unwrap();
            let v = virial_q(&w, &h).unwrap();
            assert!((v.value * beta - 1.0).abs() < 1e-6, "{}", v.value);
        }
    }

    #[test]
    fn report_csv_layout() {
        let r = EquipartitionReport {
            beta: 2.0,
            E_q: HALF_COTH_1,
            E_p: HALF_COTH_1,
            kT: 0.5,
            beta_mod_q: 1.0 / HALF_COTH_1,
            beta_mod_p: 1.0 / HALF_COTH_1,
            route_spread: 0.0,
            exact_reference: None,
        };
        let mut out = Vec::new();
        write_reports_csv(&[r.clone()], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            format!("{REPORT_CSV_HEADER}\n2,0.65651764275,0.65651764275,0.5,1.52318831191,1.52318831191,0,\n")
        );
        let mut out = Vec::new();
        write_reports_json(&[r], &mut out).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v[0]["E_q"], serde_json::json!(HALF_COTH_1));
        assert!(v[0]["exact_reference"].is_null());
    }
}
