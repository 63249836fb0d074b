//! The `qequip` command line.
//!
//! Every subcommand writes its primary output (CSV or JSON) to `--out` or
//! stdout and its diagnostics as `key=value` lines to stderr. Exit status is
//! 0 on success, 2 for configuration or input errors and 3 when a numerical
//! self-check fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use crate::equipartition::{temperature_sweep, write_reports_csv, write_reports_json, GridPolicy, ROUTE_TOL};
use crate::format::g12;
use crate::moyal::{bracket_hbar_series, format_hbar_series, moyal_bracket, HbarContext};
use crate::symbols::{poisson_bracket, PolySymbol};
use crate::thermal::{
    ho_wigner_closed_form, ho_wigner_from_mehler, parse_key_values, second_order_with_richardson, BathCorrelation,
    Coupling, OscillatorSpec,
};
use crate::weyl::{fock_bracket_symbol, MatrixOperator, OscillatorBasis, NORMALIZATION_TOL};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Largest coefficient deviation tolerated between the Moyal series and the
/// Fock-basis commutator.
pub const MOYAL_ORACLE_TOL: f64 = 1e-8;
/// Largest sup-norm gap tolerated by `wigner-grid --compare`.
pub const COMPARE_TOL: f64 = 1e-6;
/// Fraction of each axis, centred, over which `--compare` measures the gap.
pub const COMPARE_INTERIOR: f64 = 0.6;

const BUNDLED_PAIRS: [(&str, &str); 3] = [("q", "p"), ("q^3", "p^3"), ("q*p", "q^4")];

#[derive(Parser, Debug)]
#[command(name = "qequip", version, about = "Phase-space quantum equipartition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Virial energies of the thermal oscillator over a list of temperatures.
    HoSweep(SweepArgs),
    /// Thermal oscillator Wigner function on a phase-space grid.
    WignerGrid(WignerArgs),
    /// Moyal brackets of polynomial pairs checked against the Fock-basis commutator.
    MoyalCheck(MoyalArgs),
    /// Second-order reduced density matrix of a system coupled to a bath.
    SecondOrder(SecondOrderArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct SpecArgs {
    /// Inverse temperature; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    #[arg(long = "kB")]
    k_b: Option<f64>,
    /// key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Points per phase-space axis.
    #[arg(long)]
    grid_n: Option<usize>,
    /// Half-width of each axis in thermal standard deviations.
    #[arg(long)]
    grid_sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Logarithmic range `lo:hi:n` of inverse temperatures.
    #[arg(long)]
    beta_log: Option<String>,
}

#[derive(Args, Debug)]
struct WignerArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the closed-form state instead of the kernel transform.
    #[arg(long)]
    closed_form: bool,
    /// Also build the other state and report the sup-norm difference.
    #[arg(long)]
    compare: bool,
}

#[derive(Args, Debug)]
struct MoyalArgs {
    /// Extra pair `a;b` of polynomial symbols; repeatable.
    #[arg(long)]
    pair: Vec<String>,
    /// Skip the bundled pairs.
    #[arg(long)]
    no_bundled: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SecondOrderArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Square matrix CSV of the system Hamiltonian.
    #[arg(long)]
    hamiltonian: PathBuf,
    /// Square matrix CSV of a coupling operator; repeatable.
    #[arg(long)]
    coupling: Vec<PathBuf>,
    /// Bath correlation for the coupling in the same position: a `tau,k`
    /// CSV path, `constant:C` or `exponential:A:RATE`.
    #[arg(long)]
    bath: Vec<String>,
    /// Quadrature nodes on [0, hbar*beta].
    #[arg(long)]
    n_tau: Option<usize>,
}

/// Settings after merging defaults, the config file and flags.
#[derive(Clone, Debug)]
struct Settings {
    spec: OscillatorSpec,
    betas: Vec<f64>,
    beta_log: Option<String>,
    grid_n: usize,
    grid_sigma: f64,
    n_tau: usize,
    format: Format,
}

impl Default for Settings {
    fn default() -> Self {
        let policy = GridPolicy::default();
        Self {
            spec: OscillatorSpec::default(),
            betas: Vec::new(),
            beta_log: None,
            grid_n: policy.n,
            grid_sigma: policy.sigmas,
            n_tau: 16,
            format: Format::Csv,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {v:?}")))
}

impl Settings {
    fn load(spec: &SpecArgs, grid: Option<&GridArgs>, beta_log: Option<&str>, n_tau: Option<usize>) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = &spec.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
            for (key, value) in parse_key_values(&text)? {
                if key == "beta" {
                    s.betas = value.split(',').map(|v| parse_num("beta", v.trim())).collect::<Result<_>>()?;
                    continue;
                }
                if s.spec.set_key(&key, &value)? {
                    continue;
                }
                match key.as_str() {
                    "beta-log" | "beta_log" => s.beta_log = Some(value),
                    "grid-n" | "grid_n" => s.grid_n = parse_num(&key, &value)?,
                    "grid-sigma" | "grid_sigma" => s.grid_sigma = parse_num(&key, &value)?,
                    "n-tau" | "n_tau" => s.n_tau = parse_num(&key, &value)?,
                    "format" => {
                        s.format = Format::from_str(&value, true)
                            .map_err(|_| Error::InvalidParameter(format!("format must be csv or json, got {value:?}")))?
                    }
                    _ => return Err(Error::InvalidParameter(format!("unknown config key {key:?}"))),
                }
            }
        }
        if !spec.beta.is_empty() {
            s.betas = spec.beta.clone();
            s.beta_log = None;
        }
        if let Some(r) = beta_log {
            s.beta_log = Some(r.to_string());
            s.betas.clear();
        }
        for (slot, flag) in [
            (&mut s.spec.mass, spec.mass),
            (&mut s.spec.omega, spec.omega),
            (&mut s.spec.hbar, spec.hbar),
            (&mut s.spec.k_b, spec.k_b),
        ] {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        if let Some(g) = grid {
            s.grid_n = g.grid_n.unwrap_or(s.grid_n);
            s.grid_sigma = g.grid_sigma.unwrap_or(s.grid_sigma);
        }
        s.n_tau = n_tau.unwrap_or(s.n_tau);
        s.format = spec.format.unwrap_or(s.format);
        if let Some(b) = s.betas.first() {
            s.spec.beta = *b;
        }
        s.spec = s.spec.validated()?;
        Ok(s)
    }

    fn beta_list(&self) -> Result<Vec<f64>> {
        match &self.beta_log {
            Some(range) => parse_beta_log(range),
            None if self.betas.is_empty() => Ok(vec![self.spec.beta]),
            None => Ok(self.betas.clone()),
        }
    }

    fn single_beta(&self) -> Result<f64> {
        let betas = self.beta_list()?;
        match betas.as_slice() {
            [b] => Ok(*b),
            _ => Err(Error::InvalidParameter(format!("expected one beta, got {}", betas.len()))),
        }
    }
}

/// `lo:hi:n` → `n` log-spaced values from `lo` to `hi` inclusive.
fn parse_beta_log(range: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(Error::InvalidParameter(format!("beta-log must be lo:hi:n, got {range:?}")));
    };
    let (lo, hi, n): (f64, f64, usize) = (parse_num("beta-log", lo)?, parse_num("beta-log", hi)?, parse_num("beta-log", n)?);
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 || (n == 1 && hi != lo) {
        return Err(Error::InvalidParameter(format!("beta-log needs 0 < lo <= hi and n >= 1, got {range:?}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::InvalidGrid(_)
        | Error::Parse(_)
        | Error::DegreeOverflow { .. }
        | Error::DimensionMismatch(_)
        | Error::DimensionTooSmall { .. }
        | Error::NonHermitian(_)
        | Error::Coverage(_)
        | Error::NyquistExceeded { .. }
        | Error::NonFinite(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Where primary output goes.
fn with_output<F>(out: Option<&Path>, stdout: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

/// Runs the command line given by `args` (including the program name) and
/// returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::HoSweep(a) => cmd_ho_sweep(a, stdout, stderr),
        Command::WignerGrid(a) => cmd_wigner_grid(a, stdout, stderr),
        Command::MoyalCheck(a) => cmd_moyal_check(a, stdout, stderr),
        Command::SecondOrder(a) => cmd_second_order(a, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_ho_sweep(a: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let s = Settings::load(&a.spec, Some(&a.grid), a.beta_log.as_deref(), None)?;
    let betas = s.beta_list()?;
    let policy = GridPolicy { sigmas: s.grid_sigma, n: s.grid_n, self_check: true };
    let reports = temperature_sweep(&s.spec, &betas, policy)?;
    with_output(a.spec.out.as_deref(), stdout, |w| match s.format {
        Format::Csv => write_reports_csv(&reports, w),
        Format::Json => write_reports_json(&reports, w),
    })?;
    let spread = reports.iter().map(|r| r.route_spread).fold(0.0, f64::max);
    writeln!(stderr, "rows={}", reports.len())?;
    writeln!(stderr, "route_spread_max={}", g12(spread))?;
    Ok(if spread < ROUTE_TOL { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_wigner_grid(a: &WignerArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let s = Settings::load(&a.spec, Some(&a.grid), None, None)?;
    let spec = s.spec.with_beta(s.single_beta()?)?;
    let kernel_state = ho_wigner_from_mehler(&spec, s.grid_sigma, s.grid_n.div_ceil(2), s.grid_n)?;
    let closed = if a.closed_form || a.compare {
        Some(ho_wigner_closed_form(&spec, kernel_state.grid())?)
    } else {
        None
    };
    let shown = match (&closed, a.closed_form) {
        (Some(c), true) => c,
        _ => &kernel_state,
    };
    with_output(a.spec.out.as_deref(), stdout, |w| match s.format {
        Format::Csv => shown.write_csv(w),
        Format::Json => shown.write_json(w),
    })?;
    let integral = shown.integral();
    writeln!(stderr, "integral={integral:.6}")?;
    if (integral - 1.0).abs() > NORMALIZATION_TOL {
        return Ok(EXIT_NUMERICAL);
    }
    if a.compare {
        let diff = kernel_state.sup_diff(closed.as_ref().expect("built for compare"), COMPARE_INTERIOR)?;
        writeln!(stderr, "sup_norm_diff={}", g12(diff))?;
        if !(diff <= COMPARE_TOL) {
            return Ok(EXIT_NUMERICAL);
        }
    }
    Ok(EXIT_OK)
}

/// Dimension of the Fock basis used for a pair of the given degrees.
fn oracle_dim(a: &PolySymbol, b: &PolySymbol) -> usize {
    2 * (a.degree() + b.degree()) as usize + 16
}

fn parse_pair(text: &str) -> Result<(String, String)> {
    let (a, b) = text
        .split_once(';')
        .ok_or_else(|| Error::Parse(format!("pair must be written a;b, got {text:?}")))?;
    Ok((a.trim().to_string(), b.trim().to_string()))
}

fn cmd_moyal_check(a: &MoyalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let mut texts: Vec<(String, String)> = Vec::new();
    if !a.no_bundled {
        texts.extend(BUNDLED_PAIRS.iter().map(|(x, y)| (x.to_string(), y.to_string())));
    }
    for p in &a.pair {
        texts.push(parse_pair(p)?);
    }
    let mut pairs = Vec::new();
    for (x, y) in texts {
        let parsed: (PolySymbol, PolySymbol) = (x.parse()?, y.parse()?);
        pairs.push((x, y, parsed));
    }
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for (x_text, y_text, (x, y)) in &pairs {
        let series = bracket_hbar_series(x, y)?;
        let (mut fock_dev, mut poisson_dev): (f64, f64) = (0.0, 0.0);
        let classical = poisson_bracket(x, y)?;
        for h in [0.5, 1.0] {
            let ctx = HbarContext::new(h)?;
            let m = moyal_bracket(x, y, ctx)?;
            let oracle = fock_bracket_symbol(x, y, ctx, oracle_dim(x, y))?;
            fock_dev = fock_dev.max(m.max_coeff_diff(&oracle));
            poisson_dev = poisson_dev.max(m.max_coeff_diff(&classical));
        }
        worst = worst.max(fock_dev);
        rows.push(format!("{x_text},{y_text},{},{},{}", format_hbar_series(&series), g12(fock_dev), g12(poisson_dev)));
    }
    with_output(a.out.as_deref(), stdout, |w| {
        writeln!(w, "a,b,bracket,fock_deviation,poisson_deviation")?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    writeln!(stderr, "pairs={}", rows.len())?;
    writeln!(stderr, "max_fock_deviation={}", g12(worst))?;
    Ok(if worst <= MOYAL_ORACLE_TOL { EXIT_OK } else { EXIT_NUMERICAL })
}

/// Reads a square real matrix from a header-less CSV.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: cannot parse {c:?} as a number", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("{}: matrix must be square and nonempty", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn parse_bath(text: &str) -> Result<BathCorrelation> {
    let parts: Vec<&str> = text.split(':').collect();
    let k = match parts.as_slice() {
        ["constant", c] => BathCorrelation::Constant(parse_num("bath", c)?),
        ["exponential", a, r] => BathCorrelation::Exponential { amplitude: parse_num("bath", a)?, rate: parse_num("bath", r)? },
        _ => BathCorrelation::from_csv_path(text)?,
    };
    k.validate()?;
    Ok(k)
}

fn cmd_second_order(a: &SecondOrderArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let s = Settings::load(&a.spec, None, None, a.n_tau)?;
    let beta = s.single_beta()?;
    if a.coupling.len() != a.bath.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coupling matrices but {} bath correlations",
            a.coupling.len(),
            a.bath.len()
        )));
    }
    let basis = OscillatorBasis::new(1.0, 1.0, s.spec.hbar)?;
    let h = MatrixOperator::from_real(read_matrix_csv(&a.hamiltonian)?, basis)?;
    let couplings = a
        .coupling
        .iter()
        .zip(&a.bath)
        .map(|(path, bath)| {
            Ok(Coupling { s: MatrixOperator::from_real(read_matrix_csv(path)?, basis)?, k: parse_bath(bath)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let (state, check) = second_order_with_richardson(&h, &couplings, beta, s.n_tau)?;

    let rho = state.rho.entries();
    let imag = rho.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    with_output(a.spec.out.as_deref(), stdout, |w| match s.format {
        Format::Csv => {
            for i in 0..rho.nrows() {
                let row: Vec<String> = (0..rho.ncols()).map(|j| g12(rho[(i, j)].re)).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        }
        Format::Json => {
            let rows: Vec<Vec<f64>> = (0..rho.nrows()).map(|i| (0..rho.ncols()).map(|j| rho[(i, j)].re).collect()).collect();
            serde_json::to_writer_pretty(&mut *w, &serde_json::json!({
                "beta": beta,
                "provenance": state.provenance,
                "rho": rows,
                "trace": state.trace,
                "hermiticity_residual": state.hermiticity_residual,
                "commutator_residual": state.commutator_residual,
                "richardson_trace_norm_diff": check.trace_norm_diff,
            }))?;
            writeln!(w)?;
            Ok(())
        }
    })?;
    writeln!(stderr, "trace={}", g12(state.trace))?;
    writeln!(stderr, "hermiticity_residual={}", g12(state.hermiticity_residual))?;
    writeln!(stderr, "commutator_residual={}", g12(state.commutator_residual))?;
    writeln!(stderr, "imag_residual={}", g12(imag))?;
    writeln!(stderr, "richardson_n_tau={}:{}", check.n_tau, 2 * check.n_tau)?;
    writeln!(stderr, "richardson_trace_norm_diff={}", g12(check.trace_norm_diff))?;
    Ok(if check.passed() { EXIT_OK } else { EXIT_NUMERICAL })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("qequip").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn beta_log_ranges() {
        let b = parse_beta_log("0.01:100:9").unwrap();
        assert_eq!(b.len(), 9);
        assert_eq!((b[0], b[8]), (0.01, 100.0));
        assert!((b[4] - 1.0).abs() < 1e-12);
        assert_eq!(parse_beta_log("2:2:1").unwrap(), vec![2.0]);
        for bad in ["1:2", "0:1:3", "2:1:3", "1:2:0", "a:b:c"] {
            assert!(parse_beta_log(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sweep_examples() {
        let (code, out, _) = run_str(&["ho-sweep", "--beta", "0.01", "--omega", "1", "--hbar", "1"]);
        assert_eq!(code, 0);
        let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert!((row[2] / 100.0 - 1.0).abs() < 1e-3);

        let (code, out, _) = run_str(&["ho-sweep", "--beta", "100"]);
        assert_eq!(code, 0);
        let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert!((row[2] - 0.5).abs() < 1e-6 && (row[5] - 2.0).abs() < 1e-5);

        let (code, out, err) = run_str(&["ho-sweep", "--beta-log", "0.01:100:9"]);
        assert_eq!(code, 0, "{err}");
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 10);
        assert!(lines[1..].iter().all(|l| !l.ends_with(',')));
    }

    #[test]
    fn sweep_output_is_deterministic_json() {
        let a = run_str(&["ho-sweep", "--beta", "0.5,2", "--format", "json"]);
        let b = run_str(&["ho-sweep", "--beta", "0.5,2", "--format", "json"]);
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a.1).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert!(v[1]["E_p"].as_f64().is_some());
    }

    #[test]
    fn config_errors_exit_two() {
        assert_eq!(run_str(&["ho-sweep", "--beta", "-1"]).0, 2);
        assert_eq!(run_str(&["ho-sweep", "--beta", "2,1"]).0, 2);
        assert_eq!(run_str(&["ho-sweep", "--mass", "0"]).0, 2);
        assert_eq!(run_str(&["ho-sweep", "--format", "xml"]).0, 2);
        assert_eq!(run_str(&["bogus"]).0, 2);
        assert_eq!(run_str(&["ho-sweep", "--config", "/nonexistent/qequip.cfg"]).0, 2);
        assert_eq!(run_str(&["wigner-grid", "--beta", "1,2"]).0, 2);
        assert_eq!(run_str(&["moyal-check", "--pair", "q+"]).0, 2);
        assert_eq!(run_str(&["--help"]).0, 0);
    }

    #[test]
    fn numerical_failure_exits_three() {
        // Six standard deviations leave the integrand visible on the boundary.
        let (code, _, err) = run_str(&["ho-sweep", "--beta", "1", "--grid-sigma", "6"]);
        assert_eq!(code, 3, "{err}");
    }

    #[test]
    fn config_file_and_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "# cold oscillator\nm=1\nomega=2\nbeta=100\nhbar=1\nkB=1\ngrid-n=129\n").unwrap();
        let cfg = cfg.to_str().unwrap();
        let (code, out, _) = run_str(&["ho-sweep", "--config", cfg]);
        assert_eq!(code, 0);
        let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(row[0], 100.0);
        assert!((row[2] - 1.0).abs() < 1e-6);
        let (_, out, _) = run_str(&["ho-sweep", "--config", cfg, "--omega", "1", "--beta", "2"]);
        let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(row[0], 2.0);
        assert!((row[2] - 0.656517642749666).abs() < 1e-9);

        std::fs::write(dir.path().join("bad.cfg"), "colour=blue\n").unwrap();
        let bad = dir.path().join("bad.cfg");
        assert_eq!(run_str(&["ho-sweep", "--config", bad.to_str().unwrap()]).0, 2);
    }

    #[test]
    fn wigner_grid_examples() {
        let (code, _, err) = run_str(&["wigner-grid", "--beta", "2", "--compare", "--grid-n", "129"]);
        assert_eq!(code, 0, "{err}");
        assert!(err.contains("integral=1.000000"));
        let diff: f64 = err.lines().find_map(|l| l.strip_prefix("sup_norm_diff=")).unwrap().parse().unwrap();
        assert!(diff <= 1e-6);

        let (code, out, _) = run_str(&["wigner-grid", "--beta", "2", "--closed-form", "--grid-n", "65"]);
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("q,p,w"));
        let centre = lines
            .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .min_by(|a, b| (a[0].abs() + a[1].abs()).total_cmp(&(b[0].abs() + b[1].abs())))
            .unwrap();
        assert!(centre[0].abs() < 1e-12 && centre[1].abs() < 1e-12);
        assert!((centre[2] - 0.242422949100520).abs() < 1e-11);
    }

    #[test]
    fn moyal_check_examples() {
        let (code, out, err) = run_str(&["moyal-check"]);
        assert_eq!(code, 0, "{err}");
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "a,b,bracket,fock_deviation,poisson_deviation");
        let cols = |i: usize| lines[i].split(',').map(str::to_string).collect::<Vec<_>>();
        assert_eq!(cols(1)[2], "1");
        assert_eq!(cols(2)[2], "9*q^2*p^2 + -1.5*hbar^2");
        assert!(cols(2)[3].parse::<f64>().unwrap() < 1e-8);
        assert_eq!(cols(3)[4], "0");

        let (code, out, _) = run_str(&["moyal-check", "--no-bundled", "--pair", "q^2*p;p^2 + q"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 2);
    }

    #[test]
    fn second_order_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = |name: &str, body: &str| {
            let path = dir.path().join(name);
            std::fs::write(&path, body).unwrap();
            path.to_str().unwrap().to_string()
        };
        let h = p("h.csv", "0,0.3\n0.3,1\n");
        let s = p("s.csv", "0,1\n1,0\n");
        let zero = p("k0.csv", "tau,k\n0,0\n5,0\n");
        let (code, out, err) = run_str(&["second-order", "--hamiltonian", &h, "--coupling", &s, "--bath", &zero, "--beta", "2"]);
        assert_eq!(code, 0, "{err}");
        assert!(err.contains("trace=1\n"));
        assert!(err.contains("richardson_trace_norm_diff="));
        let rows: Vec<Vec<f64>> = out.lines().map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 2);
        let e = nalgebra::Matrix2::new(0.0, 0.3, 0.3, 1.0).symmetric_eigen();
        let w = e.eigenvalues.map(|x: f64| (-2.0 * x).exp());
        let g = e.eigenvectors * nalgebra::Matrix2::from_diagonal(&w) * e.eigenvectors.transpose() / w.sum();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rows[i][j] - g[(i, j)]).abs() < 1e-11);
            }
        }

        let hd = p("hd.csv", "0,0\n0,1\n");
        let sd = p("sd.csv", "1,0\n0,-1\n");
        let (code, _, err) =
            run_str(&["second-order", "--hamiltonian", &hd, "--coupling", &sd, "--bath", "constant:0.4", "--beta", "1"]);
        assert_eq!(code, 0, "{err}");
        let comm: f64 = err.lines().find_map(|l| l.strip_prefix("commutator_residual=")).unwrap().parse().unwrap();
        assert!(comm < 1e-10);

        let bad = p("bad.csv", "1,2,3\n4,5\n");
        assert_eq!(run_str(&["second-order", "--hamiltonian", &bad]).0, 2);
        let rect = p("rect.csv", "1,2\n");
        assert_eq!(run_str(&["second-order", "--hamiltonian", &rect]).0, 2);
        assert_eq!(run_str(&["second-order", "--hamiltonian", &h, "--coupling", &s]).0, 2);
        let short = p("short.csv", "tau,k\n0,1\n1,1\n");
        assert_eq!(run_str(&["second-order", "--hamiltonian", &h, "--coupling", &s, "--bath", &short, "--beta", "2"]).0, 2);
    }

    #[test]
    fn second_order_richardson_failure_exits_three() {
        let dir = tempfile::tempdir().unwrap();
        let h = dir.path().join("h.csv");
        let s = dir.path().join("s.csv");
        std::fs::write(&h, "0,0.5\n0.5,3\n").unwrap();
        std::fs::write(&s, "0,1\n1,0\n").unwrap();
        let args = [
            "second-order",
            "--hamiltonian",
            h.to_str().unwrap(),
            "--coupling",
            s.to_str().unwrap(),
            "--bath",
            "exponential:1:5",
            "--beta",
            "3",
            "--n-tau",
            "8",
        ];
        let (code, _, err) = run_str(&args);
        assert_eq!(code, 3, "{err}");
    }
}
