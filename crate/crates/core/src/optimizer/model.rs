//! Line-oriented text format for mixed-integer models.
//!
//! ```text
//! MINLP 1
//! SCENARIOS <S>
//! STEPS <T>
//! ALPHA_BOUNDS <low> <high>
//! BIG_M <m>
//! EPSILON <eps>
//! VAR <name> <lower> <upper>
//! BIN <name>
//! CON <name>: <terms> <= | = | >= <rhs>
//! MAXIMIZE: <terms>
//! END
//! ```
//!
//! A term is `+ <coef> <var>` or `- <coef> <var>*<var>`; coefficients are
//! nonnegative and bounds may be `inf` / `-inf`. Numbers are written in the
//! shortest form that parses back to the same value, so reading a file and
//! writing it again reproduces it byte for byte.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

const MAGIC: &str = "MINLP 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelHeader {
    pub scenarios: usize,
    pub steps: usize,
    pub alpha_bounds: (f64, f64),
    pub big_m: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarKind {
    Continuous { lower: f64, upper: f64 },
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
}

/// `coef · Π factors` with one or two factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub factors: Vec<String>,
}

impl Term {
    pub fn linear(coef: f64, var: impl Into<String>) -> Self {
        Term {
            coef,
            factors: vec![var.into()],
        }
    }

    pub fn product(coef: f64, a: impl Into<String>, b: impl Into<String>) -> Self {
        Term {
            coef,
            factors: vec![a.into(), b.into()],
        }
    }

    pub fn is_bilinear(&self) -> bool {
        self.factors.len() == 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<Term>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub header: ModelHeader,
    pub variables: Vec<VarDecl>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<Term>,
}

/// Largest scaled constraint violation under an assignment, plus the
/// objective value there.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    /// `|violation| / (1 + |rhs| + Σ|term|)`, maximized over constraints and
    /// variable bounds.
    pub max_violation: f64,
    pub worst: Option<String>,
}

impl ModelDocument {
    pub fn binary_count(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn continuous_count(&self) -> usize {
        self.variables.len() - self.binary_count()
    }

    /// Evaluates every constraint and bound at `values`, which must assign
    /// every declared variable.
    pub fn evaluate(&self, values: &HashMap<String, f64>) -> Result<Evaluation> {
        let lookup = |name: &str| {
            values
                .get(name)
                .copied()
                .ok_or_else(|| Error::param(format!("no value for variable `{name}`")))
        };
        let term_value = |t: &Term| -> Result<f64> {
            let mut v = t.coef;
            for f in &t.factors {
                v *= lookup(f)?;
            }
            Ok(v)
        };
        let mut max_violation = 0.0f64;
        let mut worst = None;
        let mut record = |violation: f64, scale: f64, name: &str| {
            let v = violation / scale;
            if v > max_violation || v.is_nan() {
                max_violation = if v.is_nan() { f64::INFINITY } else { v };
                worst = Some(name.to_string());
            }
        };
        for var in &self.variables {
            let x = lookup(&var.name)?;
            let violation = match var.kind {
                VarKind::Continuous { lower, upper } => (lower - x).max(x - upper).max(0.0),
                VarKind::Binary => x.min((1.0 - x).abs()).abs(),
            };
            record(violation, 1.0 + x.abs(), &var.name);
        }
        for con in &self.constraints {
            let mut lhs = 0.0;
            let mut scale = 1.0 + con.rhs.abs();
            for t in &con.terms {
                let v = term_value(t)?;
                lhs += v;
                scale += v.abs();
            }
            let violation = match con.sense {
                Sense::Le => (lhs - con.rhs).max(0.0),
                Sense::Ge => (con.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - con.rhs).abs(),
            };
            record(violation, scale, &con.name);
        }
        let mut objective = 0.0;
        for t in &self.objective {
            objective += term_value(t)?;
        }
        Ok(Evaluation {
            objective,
            max_violation,
            worst,
        })
    }
}

fn write_terms(out: &mut String, terms: &[Term]) {
    for t in terms {
        let sign = if t.coef.is_sign_negative() { '-' } else { '+' };
        write!(out, " {sign} {} {}", t.coef.abs(), t.factors.join("*")).unwrap();
    }
}

impl fmt::Display for ModelDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.header;
        let mut out = String::new();
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "SCENARIOS {}", h.scenarios)?;
        writeln!(out, "STEPS {}", h.steps)?;
        writeln!(out, "ALPHA_BOUNDS {} {}", h.alpha_bounds.0, h.alpha_bounds.1)?;
        writeln!(out, "BIG_M {}", h.big_m)?;
        writeln!(out, "EPSILON {}", h.epsilon)?;
        for v in &self.variables {
            match v.kind {
                VarKind::Continuous { lower, upper } => {
                    writeln!(out, "VAR {} {lower} {upper}", v.name)?
                }
                VarKind::Binary => writeln!(out, "BIN {}", v.name)?,
            }
        }
        for c in &self.constraints {
            write!(out, "CON {}:", c.name)?;
            write_terms(&mut out, &c.terms);
            writeln!(out, " {} {}", c.sense.symbol(), c.rhs)?;
        }
        out.push_str("MAXIMIZE:");
        write_terms(&mut out, &self.objective);
        out.push('\n');
        out.push_str("END\n");
        f.write_str(&out)
    }
}

fn parse_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::data(format!("model line {line}: {msg}"))
}

fn num<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

fn header_value<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>)> {
    let (n, line) = lines
        .next()
        .ok_or_else(|| Error::data(format!("model ends before {key}")))?;
    let mut toks = line.split_whitespace();
    if toks.next() != Some(key) {
        return Err(parse_err(n, format!("expected {key}")));
    }
    Ok((n, toks.collect()))
}

fn parse_terms(toks: &[&str], line: usize) -> Result<Vec<Term>> {
    if !toks.len().is_multiple_of(3) {
        return Err(parse_err(line, "terms must be `sign coef factor` triples"));
    }
    toks.chunks(3)
        .map(|c| {
            let coef: f64 = num(Some(c[1]), line, "coefficient")?;
            let coef = match c[0] {
                "+" => coef,
                "-" => -coef,
                other => return Err(parse_err(line, format!("bad sign `{other}`"))),
            };
            let factors: Vec<String> = c[2].split('*').map(str::to_string).collect();
            if factors.is_empty() || factors.len() > 2 || factors.iter().any(String::is_empty) {
                return Err(parse_err(line, format!("bad factor list `{}`", c[2])));
            }
            Ok(Term { coef, factors })
        })
        .collect()
}

impl FromStr for ModelDocument {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(parse_err(1, format!("expected `{MAGIC}`"))),
        }
        let (n, v) = header_value(&mut lines, "SCENARIOS")?;
        let scenarios = num(v.first().copied(), n, "scenario count")?;
        let (n, v) = header_value(&mut lines, "STEPS")?;
        let steps = num(v.first().copied(), n, "step count")?;
        let (n, v) = header_value(&mut lines, "ALPHA_BOUNDS")?;
        let alpha_bounds = (
            num(v.first().copied(), n, "alpha bound")?,
            num(v.get(1).copied(), n, "alpha bound")?,
        );
        let (n, v) = header_value(&mut lines, "BIG_M")?;
        let big_m = num(v.first().copied(), n, "big M")?;
        let (n, v) = header_value(&mut lines, "EPSILON")?;
        let epsilon = num(v.first().copied(), n, "epsilon")?;

        let mut doc = ModelDocument {
            header: ModelHeader {
                scenarios,
                steps,
                alpha_bounds,
                big_m,
                epsilon,
            },
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
        };
        let mut seen_objective = false;
        for (n, line) in lines.by_ref() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.first().copied() {
                Some("VAR") if toks.len() == 4 => doc.variables.push(VarDecl {
                    name: toks[1].to_string(),
                    kind: VarKind::Continuous {
                        lower: num(Some(toks[2]), n, "lower bound")?,
                        upper: num(Some(toks[3]), n, "upper bound")?,
                    },
                }),
                Some("BIN") if toks.len() == 2 => doc.variables.push(VarDecl {
                    name: toks[1].to_string(),
                    kind: VarKind::Binary,
                }),
                Some("CON") if toks.len() >= 4 => {
                    let name = toks[1]
                        .strip_suffix(':')
                        .ok_or_else(|| parse_err(n, "constraint name must end with `:`"))?;
                    let k = toks.len();
                    let sense = match toks[k - 2] {
                        "<=" => Sense::Le,
                        "=" => Sense::Eq,
                        ">=" => Sense::Ge,
                        other => return Err(parse_err(n, format!("bad sense `{other}`"))),
                    };
                    doc.constraints.push(Constraint {
                        name: name.to_string(),
                        terms: parse_terms(&toks[2..k - 2], n)?,
                        sense,
                        rhs: num(Some(toks[k - 1]), n, "right-hand side")?,
                    });
                }
                Some("MAXIMIZE:") => {
                    doc.objective = parse_terms(&toks[1..], n)?;
                    seen_objective = true;
                }
                Some("END") if toks.len() == 1 => {
                    if !seen_objective {
                        return Err(parse_err(n, "END before MAXIMIZE"));
                    }
                    return Ok(doc);
                }
                _ => return Err(parse_err(n, format!("unrecognized line `{line}`"))),
            }
        }
        Err(Error::data("model is missing END"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelDocument {
        ModelDocument {
            header: ModelHeader {
                scenarios: 1,
                steps: 1,
                alpha_bounds: (1.01, 4.0),
                big_m: 1e7,
                epsilon: 1e-9,
            },
            variables: vec![
                VarDecl {
                    name: "a".into(),
                    kind: VarKind::Continuous {
                        lower: 0.0,
                        upper: f64::INFINITY,
                    },
                },
                VarDecl {
                    name: "z".into(),
                    kind: VarKind::Binary,
                },
            ],
            constraints: vec![Constraint {
                name: "c0".into(),
                terms: vec![Term::linear(1.5, "a"), Term::product(-0.1, "a", "z")],
                sense: Sense::Le,
                rhs: 3.0,
            }],
            objective: vec![Term::linear(1.0, "a")],
        }
    }

    #[test]
    fn writes_expected_text() {
        let text = tiny().to_string();
        assert_eq!(
            text,
            "MINLP 1\nSCENARIOS 1\nSTEPS 1\nALPHA_BOUNDS 1.01 4\nBIG_M 10000000\nEPSILON 0.000000001\n\
             VAR a 0 inf\nBIN z\nCON c0: + 1.5 a - 0.1 a*z <= 3\nMAXIMIZE: + 1 a\nEND\n"
        );
    }

    #[test]
    fn round_trips() {
        let doc = tiny();
        let text = doc.to_string();
        let back: ModelDocument = text.parse().unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_string(), text);
    }

    #[test]
    fn evaluates() {
        let doc = tiny();
        let vals = HashMap::from([("a".to_string(), 2.0), ("z".to_string(), 1.0)]);
        let e = doc.evaluate(&vals).unwrap();
        assert_eq!(e.objective, 2.0);
        assert_eq!(e.max_violation, 0.0);
        let vals = HashMap::from([("a".to_string(), 4.0), ("z".to_string(), 0.0)]);
        let e = doc.evaluate(&vals).unwrap();
        assert!(e.max_violation > 0.0);
        assert_eq!(e.worst.as_deref(), Some("c0"));
    }

    #[test]
    fn rejects_malformed() {
        let text = tiny().to_string();
        assert!(text.replace("MINLP 1", "LP").parse::<ModelDocument>().is_err());
        assert!(text.replace("END\n", "").parse::<ModelDocument>().is_err());
        assert!(text.replace("<=", "<").parse::<ModelDocument>().is_err());
        assert!(text.replace("+ 1.5 a", "+ x a").parse::<ModelDocument>().is_err());
    }
}
