//! Text form `c*q^m*p^n + ...` used by the CLI and config files.

use std::fmt;
use std::str::FromStr;

use super::PolySymbol;
use crate::format::g12;
use crate::{Error, Result};

impl FromStr for PolySymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty symbol".into()));
        }
        let mut terms = Vec::new();
        for raw in split_terms(&compact) {
            terms.push(parse_term(raw)?);
        }
        PolySymbol::from_terms(terms)
    }
}

/// Splits at `+`/`-` that act as binary operators. A `-` right after `+`,
/// `*` or `^`, or a sign inside a float exponent (`1e-3`), stays in its term.
fn split_terms(s: &str) -> Vec<&str> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..bytes.len() {
        let c = bytes[i];
        if c != b'+' && c != b'-' {
            continue;
        }
        let prev = bytes[i - 1];
        if matches!(prev, b'+' | b'-' | b'*' | b'^') {
            continue;
        }
        if (prev == b'e' || prev == b'E') && i >= 2 && (bytes[i - 2].is_ascii_digit() || bytes[i - 2] == b'.') {
            continue;
        }
        out.push(&s[start..i]);
        start = if c == b'+' { i + 1 } else { i };
    }
    out.push(&s[start..]);
    out
}

fn parse_term(raw: &str) -> Result<((u32, u32), f64)> {
    let mut body = raw;
    let mut sign = 1.0;
    while let Some(c) = body.chars().next() {
        match c {
            '+' => body = &body[1..],
            '-' => {
                sign = -sign;
                body = &body[1..];
            }
            _ => break,
        }
    }
    if body.is_empty() {
        return Err(Error::Parse(format!("empty term in '{raw}'")));
    }
    let (mut coeff, mut m, mut n) = (sign, 0u32, 0u32);
    for factor in body.split('*') {
        if factor.is_empty() {
            return Err(Error::Parse(format!("empty factor in '{raw}'")));
        }
        let (base, exp) = match factor.split_once('^') {
            Some((b, e)) => {
                let e: u32 = e
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad exponent '{e}' in '{raw}'")))?;
                (b, e)
            }
            None => (factor, 1),
        };
        match base {
            "q" => m += exp,
            "p" => n += exp,
            _ => {
                if factor.contains('^') {
                    return Err(Error::Parse(format!("unknown variable '{base}' in '{raw}'")));
                }
                let c: f64 = factor
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad factor '{factor}' in '{raw}'")))?;
                coeff *= c;
            }
        }
    }
    Ok(((m, n), coeff))
}

/// Writes `c*q^m*p^n` factors, omitting zero powers and writing `q` for `q^1`.
pub(crate) fn write_term(
    f: &mut impl fmt::Write,
    c: f64,
    powers: &[(&str, u32)],
) -> fmt::Result {
    write!(f, "{}", g12(c))?;
    for &(name, e) in powers {
        match e {
            0 => {}
            1 => write!(f, "*{name}")?,
            _ => write!(f, "*{name}^{e}")?,
        }
    }
    Ok(())
}

impl fmt::Display for PolySymbol {
    /// Highest total degree first, then highest `q` power.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<_> = self.terms().collect();
        if terms.is_empty() {
            return write!(f, "0");
        }
        terms.sort_by(|a, b| (b.0 .0 + b.0 .1, b.0 .0).cmp(&(a.0 .0 + a.0 .1, a.0 .0)));
        for (k, ((m, n), c)) in terms.into_iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write_term(f, c, &[("q", m), ("p", n)])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_canonical_form() {
        let h: PolySymbol = "0.5*q^0*p^2 + 0.5*q^2*p^0".parse().unwrap();
        assert_eq!(h.coeff(0, 2), 0.5);
        assert_eq!(h.coeff(2, 0), 0.5);
        assert_eq!(h.len(), 2);
        let same: PolySymbol = "0.5 * q ^ 2+0.5*p^2".parse().unwrap();
        assert_eq!(h, same);
    }

    #[test]
    fn parses_signs_and_exponents() {
        let s: PolySymbol = "9*q^2*p^2 + -1.5".parse().unwrap();
        assert_eq!(s.coeff(2, 2), 9.0);
        assert_eq!(s.coeff(0, 0), -1.5);
        let s: PolySymbol = "q^2 - 2.5e-3*p + 1E+2".parse().unwrap();
        assert_eq!(s.coeff(2, 0), 1.0);
        assert_eq!(s.coeff(0, 1), -2.5e-3);
        assert_eq!(s.coeff(0, 0), 100.0);
        let s: PolySymbol = "-q*p*q".parse().unwrap();
        assert_eq!(s.coeff(2, 1), -1.0);
        let s: PolySymbol = "2*3*p".parse().unwrap();
        assert_eq!(s.coeff(0, 1), 6.0);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "q^x", "x^2", "q**p", "2*hbar^2", "q+", "inf*q"] {
            assert!(bad.parse::<PolySymbol>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        let s: PolySymbol = "9*q^2*p^2 + -1.5 + 0.25*q + p^3".parse().unwrap();
        assert_eq!(s.to_string(), "9*q^2*p^2 + 1*p^3 + 0.25*q + -1.5");
        assert_eq!(s.to_string().parse::<PolySymbol>().unwrap(), s);
        assert_eq!(PolySymbol::zero().to_string(), "0");
        assert_eq!(PolySymbol::one().to_string(), "1");
    }
}
