//! Deterministic multi-component sinusoidal signals.
//!
//! Text form, one component per `;`-separated field, terms joined by `|`:
//! `c:OFFSET`, `sin:AMP:OMEGA:PHASE`, `cos:AMP:OMEGA:PHASE`, or `0` for a
//! silent component. Angles accept `pi` multiples such as `pi/6`, `-2pi`,
//! `0.5pi/3`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("bad signal term '{term}': {reason}")]
    BadTerm { term: String, reason: &'static str },
    #[error("bad number '{0}'")]
    BadNumber(String),
    #[error("signal has {got} components, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// `amplitude · sin(omega · t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineTerm {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Component {
    pub offset: f64,
    pub terms: Vec<SineTerm>,
}

impl Component {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|s| s.amplitude * (s.omega * t + s.phase).sin())
                .sum::<f64>()
    }

    pub fn bound(&self) -> f64 {
        self.offset.abs() + self.terms.iter().map(|s| s.amplitude.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalSpec {
    pub components: Vec<Component>,
}

impl SignalSpec {
    pub fn zero(dim: usize) -> Self {
        Self {
            components: vec![Component::default(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.bound() == 0.0)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(t);
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(t)).collect()
    }

    /// Euclidean norm of the per-component bounds; dominates `‖s(t)‖₂` for every `t`.
    pub fn bound(&self) -> f64 {
        self.components.iter().map(|c| c.bound().powi(2)).sum::<f64>().sqrt()
    }

    /// Multiplies every amplitude and offset by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| Component {
                    offset: c.offset * k,
                    terms: c
                        .terms
                        .iter()
                        .map(|s| SineTerm {
                            amplitude: s.amplitude * k,
                            ..*s
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, SignalError> {
        let components = text.split(';').map(parse_component).collect::<Result<_, _>>()?;
        Ok(Self { components })
    }
}

fn parse_component(field: &str) -> Result<Component, SignalError> {
    let field = field.trim();
    let mut comp = Component::default();
    if field.is_empty() || field == "0" {
        return Ok(comp);
    }
    for term in field.split('|') {
        let parts: Vec<&str> = term.trim().split(':').collect();
        let bad = |reason| SignalError::BadTerm {
            term: term.to_string(),
            reason,
        };
        match parts.as_slice() {
            ["c", v] => comp.offset += parse_angle(v)?,
            [kind @ ("sin" | "cos"), a, w, p] => {
                let shift = if *kind == "cos" { FRAC_PI_2 } else { 0.0 };
                comp.terms.push(SineTerm {
                    amplitude: parse_angle(a)?,
                    omega: parse_angle(w)?,
                    phase: parse_angle(p)? + shift,
                });
            }
            ["sin" | "cos", ..] => return Err(bad("expected KIND:AMP:OMEGA:PHASE")),
            _ => return Err(bad("unknown term kind")),
        }
    }
    Ok(comp)
}

/// Parses a real number, optionally written as `[coef]pi[/den]`.
pub fn parse_angle(text: &str) -> Result<f64, SignalError> {
    let s = text.trim();
    let err = || SignalError::BadNumber(s.to_string());
    let Some(pos) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| err());
    };
    let coef = match &s[..pos] {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.trim_end_matches('*').parse::<f64>().map_err(|_| err())?,
    };
    let den = match &s[pos + 2..] {
        "" => 1.0,
        rest => rest
            .strip_prefix('/')
            .ok_or_else(err)?
            .parse::<f64>()
            .map_err(|_| err())?,
    };
    Ok(coef * PI / den)
}

impl fmt::Display for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.components.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            let mut first = true;
            let mut sep = |f: &mut fmt::Formatter<'_>| -> fmt::Result {
                if !std::mem::take(&mut first) {
                    f.write_str("|")?;
                }
                Ok(())
            };
            if c.offset != 0.0 {
                sep(f)?;
                write!(f, "c:{:?}", c.offset)?;
            }
            for s in &c.terms {
                sep(f)?;
                write!(f, "sin:{:?}:{:?}:{:?}", s.amplitude, s.omega, s.phase)?;
            }
            if first {
                f.write_str("0")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_is_shifted_sine() {
        let s = SignalSpec::parse("cos:1.5:1:pi/6").unwrap();
        for t in [0.0, 0.3, 2.0, 17.5] {
            assert!((s.eval(t)[0] - 1.5 * (t + PI / 6.0).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn multi_component_with_offset() {
        let s = SignalSpec::parse("sin:5.5:0.1:0;cos:2.75:0.3:0|c:-1").unwrap();
        assert_eq!(s.dim(), 2);
        let v = s.eval(2.0);
        assert!((v[0] - 5.5 * 0.2f64.sin()).abs() < 1e-14);
        assert!((v[1] - (2.75 * 0.6f64.cos() - 1.0)).abs() < 1e-14);
        assert!((s.bound() - (5.5f64.powi(2) + 3.75f64.powi(2)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn bound_dominates_samples() {
        let s = SignalSpec::parse("sin:0.7:0.5:0|cos:1.5:1:pi/6;c:2|sin:-0.3:7:1").unwrap();
        let b = s.bound();
        for k in 0..5000 {
            let v = s.eval(k as f64 * 0.01);
            assert!(v.iter().map(|x| x * x).sum::<f64>().sqrt() <= b + 1e-12);
        }
    }

    #[test]
    fn zero_and_roundtrip() {
        let s = SignalSpec::parse("0;0").unwrap();
        assert!(s.is_zero());
        assert_eq!(s, SignalSpec::zero(2));
        let t = SignalSpec::parse("sin:0.9:0.05:0|cos:0.6:0.1:pi/5;c:0.25").unwrap();
        assert_eq!(SignalSpec::parse(&t.to_string()).unwrap(), t);
        assert_eq!(SignalSpec::parse(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_angle("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("pix").is_err());
        assert!(SignalSpec::parse("tan:1:1:1").is_err());
        assert!(SignalSpec::parse("sin:1:1").is_err());
    }

    #[test]
    fn scaling() {
        let s = SignalSpec::parse("sin:2:1:0|c:1").unwrap().scaled(0.5);
        assert_eq!(s.components[0].offset, 0.5);
        assert_eq!(s.components[0].terms[0].amplitude, 1.0);
    }
}
