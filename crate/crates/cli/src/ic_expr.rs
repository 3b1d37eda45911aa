//! Closed-form initial conditions from a small expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'pi' | 'x' | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Every expression must reduce to `c + s·x + Σ aₖ·f(ωₖ·x + φₖ)` with
//! `f ∈ {sin, cos}`: products need a constant factor and trigonometric
//! arguments must be affine in `x`.

use std::f64::consts::PI;

use npr_core::problems::{ICSample, TrigFn, TrigTerm};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
struct Lin {
    constant: f64,
    slope: f64,
    terms: Vec<TrigTerm>,
}

impl Lin {
    fn constant(c: f64) -> Self {
        Lin {
            constant: c,
            slope: 0.0,
            terms: Vec::new(),
        }
    }

    fn as_constant(&self) -> Option<f64> {
        (self.slope == 0.0 && self.terms.is_empty()).then_some(self.constant)
    }

    fn scale(mut self, k: f64) -> Self {
        self.constant *= k;
        self.slope *= k;
        for t in &mut self.terms {
            t.amplitude *= k;
        }
        self
    }

    fn add(mut self, other: Lin) -> Self {
        self.constant += other.constant;
        self.slope += other.slope;
        self.terms.extend(other.terms);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| format!("bad number {text:?}"))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect_op(&mut self, c: char) -> Result<(), String> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected {c:?}"))
        }
    }

    fn expr(&mut self) -> Result<Lin, String> {
        let mut acc = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = acc.add(if op == '+' { rhs } else { rhs.scale(-1.0) });
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Lin, String> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == '*' {
                match (acc.as_constant(), rhs.as_constant()) {
                    (Some(k), _) => rhs.scale(k),
                    (_, Some(k)) => acc.scale(k),
                    _ => return Err("product of two non-constant factors".into()),
                }
            } else {
                match rhs.as_constant() {
                    Some(k) if k != 0.0 => acc.scale(1.0 / k),
                    Some(_) => return Err("division by zero".into()),
                    None => return Err("division by a non-constant expression".into()),
                }
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Lin, String> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(self.unary()?.scale(-1.0));
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Lin, String> {
        let tok = self.toks.get(self.pos).cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Lin::constant(v)),
            Tok::Op('(') => {
                let inner = self.expr()?;
                self.expect_op(')')?;
                Ok(inner)
            }
            Tok::Op(c) => Err(format!("unexpected {c:?}")),
            Tok::Ident(name) => match name.as_str() {
                "pi" => Ok(Lin::constant(PI)),
                "x" => Ok(Lin {
                    constant: 0.0,
                    slope: 1.0,
                    terms: Vec::new(),
                }),
                "sin" | "cos" => {
                    self.expect_op('(')?;
                    let arg = self.expr()?;
                    self.expect_op(')')?;
                    if !arg.terms.is_empty() {
                        return Err(format!("argument of {name} must be affine in x"));
                    }
                    let func = if name == "sin" { TrigFn::Sin } else { TrigFn::Cos };
                    Ok(Lin {
                        constant: 0.0,
                        slope: 0.0,
                        terms: vec![TrigTerm {
                            amplitude: 1.0,
                            func,
                            freq: arg.slope,
                            phase: arg.constant,
                        }],
                    })
                }
                other => Err(format!("unknown identifier {other:?}")),
            },
        }
    }
}

/// Parse an initial condition such as `"5*x + 3*sin(4*pi*x)"` or `"1.5"`.
/// Affine expressions become [`ICSample::Affine`], anything with
/// trigonometric terms becomes [`ICSample::Trig`].
pub fn parse_ic(expr: &str) -> Result<ICSample> {
    let fail = |reason: String| CliError::IcExpr {
        expr: expr.to_string(),
        reason,
    };
    let toks = tokenize(expr).map_err(fail)?;
    if toks.is_empty() {
        return Err(fail("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0 };
    let lin = p.expr().map_err(fail)?;
    if p.pos != p.toks.len() {
        return Err(fail(format!("trailing input at token {}", p.pos + 1)));
    }
    if !(lin.constant.is_finite() && lin.slope.is_finite()) {
        return Err(fail("non-finite coefficient".into()));
    }
    Ok(if lin.terms.is_empty() {
        ICSample::Affine {
            slope: lin.slope,
            intercept: lin.constant,
        }
    } else {
        ICSample::Trig {
            constant: lin.constant,
            slope: lin.slope,
            terms: lin.terms,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_distribution_example() {
        let ic = parse_ic("5*x + 3*sin(4*pi*x)").unwrap();
        assert_eq!(
            ic,
            ICSample::Trig {
                constant: 0.0,
                slope: 5.0,
                terms: vec![TrigTerm {
                    amplitude: 3.0,
                    func: TrigFn::Sin,
                    freq: 4.0 * PI,
                    phase: 0.0,
                }],
            }
        );
        for x in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let expect = 5.0 * x + 3.0 * (4.0 * PI * x).sin();
            assert!((ic.eval(x) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn constants_and_affine() {
        assert_eq!(parse_ic("1.5").unwrap(), ICSample::constant(1.5));
        assert_eq!(
            parse_ic("-0.5*x + 1.25").unwrap(),
            ICSample::Affine {
                slope: -0.5,
                intercept: 1.25
            }
        );
        assert_eq!(
            parse_ic("(2 - x)/4").unwrap(),
            ICSample::Affine {
                slope: -0.25,
                intercept: 0.5
            }
        );
        assert_eq!(parse_ic("1e-1").unwrap(), ICSample::constant(0.1));
    }

    #[test]
    fn figure_style_expressions() {
        let ic = parse_ic("0.5*sin(4*pi*x) + cos(2*pi*x) + 0.3*cos(6*pi*x) + 0.8").unwrap();
        for x in [0.0, 0.21, 0.6] {
            let expect = 0.5 * (4.0 * PI * x).sin() + (2.0 * PI * x).cos() + 0.3 * (6.0 * PI * x).cos() + 0.8;
            assert!((ic.eval(x) - expect).abs() < 1e-14);
        }
        let ic = parse_ic("sin(pi*x + pi/2) - x*2").unwrap();
        assert!((ic.eval(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsupported_forms() {
        for bad in ["", "x*x", "sin(sin(x))", "exp(x)", "1/0", "2 +", "(x", "x)", "3 $ 4", "1/x"] {
            assert!(
                matches!(parse_ic(bad), Err(CliError::IcExpr { .. })),
                "{bad:?} should not parse"
            );
        }
    }
}
