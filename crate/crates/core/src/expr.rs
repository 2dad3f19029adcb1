//! A small closed-form expression language over the variables `x`, `y`, `t`.
//!
//! Supports `+ - * /`, integer powers `^`, `sin`, `cos`, `exp`, numeric
//! literals, and the constant `pi`. Expressions evaluate exactly at grid
//! nodes and differentiate symbolically, which is what manufactured-solution
//! workflows need: sources and boundary data sampled from analytic
//! derivatives instead of noisy finite differences.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => write!(f, "x"),
            Var::Y => write!(f, "y"),
            Var::T => write!(f, "t"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
}

impl Expr {
    pub fn parse(input: &str) -> Result<Expr> {
        Parser::new(input).parse()
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::T) => t,
            Expr::Add(a, b) => a.eval(x, y, t) + b.eval(x, y, t),
            Expr::Sub(a, b) => a.eval(x, y, t) - b.eval(x, y, t),
            Expr::Mul(a, b) => a.eval(x, y, t) * b.eval(x, y, t),
            Expr::Div(a, b) => a.eval(x, y, t) / b.eval(x, y, t),
            Expr::Neg(a) => -a.eval(x, y, t),
            Expr::Pow(a, k) => a.eval(x, y, t).powi(*k),
            Expr::Sin(a) => a.eval(x, y, t).sin(),
            Expr::Cos(a) => a.eval(x, y, t).cos(),
            Expr::Exp(a) => a.eval(x, y, t).exp(),
        }
    }

    /// Symbolic partial derivative with light constant folding.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(w) => {
                if *w == v {
                    Expr::Const(1.0)
                } else {
                    Expr::Const(0.0)
                }
            }
            Expr::Add(a, b) => add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => add(
                mul(a.diff(v), (**b).clone()),
                mul((**a).clone(), b.diff(v)),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.diff(v), (**b).clone()),
                    mul((**a).clone(), b.diff(v)),
                );
                div(num, Expr::Pow(b.clone(), 2))
            }
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Pow(a, k) => {
                if *k == 0 {
                    Expr::Const(0.0)
                } else {
                    mul(
                        mul(Expr::Const(f64::from(*k)), Expr::Pow(a.clone(), k - 1)),
                        a.diff(v),
                    )
                }
            }
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.diff(v)),
            Expr::Cos(a) => neg(mul(Expr::Sin(a.clone()), a.diff(v))),
            Expr::Exp(a) => mul(Expr::Exp(a.clone()), a.diff(v)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(c), _) if *c == 0.0 => b,
        (_, Expr::Const(c)) if *c == 0.0 => a,
        _ => Expr::Add(Arc::new(a), Arc::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (_, Expr::Const(c)) if *c == 0.0 => a,
        (Expr::Const(c), _) if *c == 0.0 => Expr::Neg(Arc::new(b)),
        _ => Expr::Sub(Arc::new(a), Arc::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(c), _) if *c == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(c)) if *c == 0.0 => Expr::Const(0.0),
        (Expr::Const(c), _) if *c == 1.0 => b,
        (_, Expr::Const(c)) if *c == 1.0 => a,
        _ => Expr::Mul(Arc::new(a), Arc::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(c), _) if *c == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(c)) if *c == 1.0 => a,
        _ => Expr::Div(Arc::new(a), Arc::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match &a {
        Expr::Const(x) => Expr::Const(-x),
        _ => Expr::Neg(Arc::new(a)),
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn parse(mut self) -> Result<Expr> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input at byte {} in `{}`",
                self.pos, self.src
            )));
        }
        Ok(e)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Arc::new(lhs), Arc::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                let inner = self.factor()?;
                Ok(Expr::Neg(Arc::new(inner)))
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let neg_exp = if self.bytes.get(self.pos) == Some(&b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let start = self.pos;
            while self
                .bytes
                .get(self.pos)
                .map(|b| b.is_ascii_digit())
                .unwrap_or(false)
            {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(Error::Expr(format!(
                    "expected integer exponent after `^` in `{}`",
                    self.src
                )));
            }
            let digits = &self.src[start..self.pos];
            let mut k: i32 = digits
                .parse()
                .map_err(|_| Error::Expr(format!("bad exponent `{digits}`")))?;
            if neg_exp {
                k = -k;
            }
            return Ok(Expr::Pow(Arc::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Expr(format!("missing `)` in `{}`", self.src)));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            other => Err(Error::Expr(format!(
                "unexpected {:?} at byte {} in `{}`",
                other.map(|b| b as char),
                self.pos,
                self.src
            ))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_digit() || b == b'.' {
                self.pos += 1;
            } else if (b == b'e' || b == b'E')
                && self
                    .bytes
                    .get(self.pos + 1)
                    .map(|&n| n.is_ascii_digit() || n == b'+' || n == b'-')
                    .unwrap_or(false)
            {
                self.pos += 2;
                while self
                    .bytes
                    .get(self.pos)
                    .map(|b| b.is_ascii_digit())
                    .unwrap_or(false)
                {
                    self.pos += 1;
                }
                break;
            } else {
                break;
            }
        }
        let text = &self.src[start..self.pos];
        let v: f64 = text
            .parse()
            .map_err(|_| Error::Expr(format!("bad numeric literal `{text}`")))?;
        Ok(Expr::Const(v))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .map(|b| b.is_ascii_alphanumeric() || *b == b'_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match name {
            "x" => Ok(Expr::Var(Var::X)),
            "y" => Ok(Expr::Var(Var::Y)),
            "t" => Ok(Expr::Var(Var::T)),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "sin" | "cos" | "exp" => {
                if self.peek() != Some(b'(') {
                    return Err(Error::Expr(format!("expected `(` after `{name}`")));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Expr(format!("missing `)` after `{name}(`")));
                }
                self.pos += 1;
                let arg = Arc::new(arg);
                Ok(match name {
                    "sin" => Expr::Sin(arg),
                    "cos" => Expr::Cos(arg),
                    _ => Expr::Exp(arg),
                })
            }
            _ => Err(Error::Expr(format!(
                "unknown identifier `{name}` (expected x, y, t, pi, sin, cos, exp)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("2*x + t*sin(pi*x) - 1/2").unwrap();
        let x = 0.25;
        let t = 3.0;
        close(
            e.eval(x, 0.0, t),
            2.0 * x + t * (std::f64::consts::PI * x).sin() - 0.5,
            1e-15,
        );
    }

    #[test]
    fn powers_and_unary_minus() {
        let e = Expr::parse("-x^2*(1-x)^2").unwrap();
        close(e.eval(0.3, 0.0, 0.0), -(0.3f64.powi(2)) * 0.7f64.powi(2), 1e-15);
        let e = Expr::parse("x^-1").unwrap();
        close(e.eval(4.0, 0.0, 0.0), 0.25, 1e-15);
    }

    #[test]
    fn scientific_literals() {
        let e = Expr::parse("1e-2 + 2.5E+1").unwrap();
        close(e.eval(0.0, 0.0, 0.0), 25.01, 1e-12);
    }

    #[test]
    fn rejects_unknown_identifier() {
        assert!(Expr::parse("2*foo").is_err());
        assert!(Expr::parse("sin x").is_err());
        assert!(Expr::parse("(x+1").is_err());
    }

    // Derivative oracle: central finite differences on the evaluated function.
    fn fd(e: &Expr, v: Var, x: f64, y: f64, t: f64) -> f64 {
        let h = 1e-6;
        let (xp, yp, tp) = match v {
            Var::X => (x + h, y, t),
            Var::Y => (x, y + h, t),
            Var::T => (x, y, t + h),
        };
        let (xm, ym, tm) = match v {
            Var::X => (x - h, y, t),
            Var::Y => (x, y - h, t),
            Var::T => (x, y, t - h),
        };
        (e.eval(xp, yp, tp) - e.eval(xm, ym, tm)) / (2.0 * h)
    }

    #[test]
    fn symbolic_derivative_matches_finite_differences() {
        let cases = [
            "x^2*t + sin(pi*x)*cos(t)",
            "exp(-t)*sin(pi*x)",
            "(1+x)/(2+t)",
            "x*y*t - cos(x*y)",
            "-exp(x)^2 + x/(1+y^2)",
        ];
        for src in cases {
            let e = Expr::parse(src).unwrap();
            for v in [Var::X, Var::Y, Var::T] {
                let d = e.diff(v);
                for (x, y, t) in [(0.3, 0.2, 0.7), (0.9, 0.5, 0.1), (0.5, 0.8, 1.3)] {
                    let exact = d.eval(x, y, t);
                    let approx = fd(&e, v, x, y, t);
                    close(exact, approx, 1e-6 * (1.0 + exact.abs()));
                }
            }
        }
    }

    #[test]
    fn second_derivatives_compose() {
        let e = Expr::parse("sin(pi*x)*exp(-t)").unwrap();
        let dxx = e.diff(Var::X).diff(Var::X);
        let pi = std::f64::consts::PI;
        close(
            dxx.eval(0.3, 0.0, 0.5),
            -pi * pi * (pi * 0.3).sin() * (-0.5f64).exp(),
            1e-12,
        );
    }
}
