//! A tiny expression language for growth fields.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | name | func '(' expr ')' | '(' expr ')'
//! name    := R | X1 | X2 | X3 | t | pi
//! func    := exp | ln | log | sin | cos | sqrt
//! ```
//!
//! `R` is the radial coordinate. On a Cartesian chart it is bound to
//! `sqrt(X1^2 + ... + Xn^2)`; on a radial chart the `Xi` names are rejected.
//! Derivatives are taken symbolically.

use std::fmt;
use std::ops;

use crate::error::{GrowthError, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Radial coordinate `R`.
    Radius,
    /// Cartesian coordinate `X{i+1}`.
    Cart(usize),
    /// Chart coordinate after binding.
    Coord(usize),
    Time,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Coordinate chart an expression is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// One coordinate, `R`.
    Radial,
    /// `n` Cartesian coordinates `X1..Xn`.
    Cartesian(usize),
}

impl Chart {
    pub fn dim(self) -> usize {
        match self {
            Chart::Radial => 1,
            Chart::Cartesian(n) => n,
        }
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn radius() -> Expr {
        Expr::Radius
    }

    pub fn cart(i: usize) -> Expr {
        Expr::Cart(i)
    }

    pub fn time() -> Expr {
        Expr::Time
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn ln(self) -> Expr {
        Expr::call(Func::Ln, self)
    }

    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }

    pub fn powf(self, e: f64) -> Expr {
        Expr::Pow(Box::new(self), Box::new(Expr::Num(e)))
    }

    pub fn parse(src: &str) -> Result<Expr> {
        Parser::new(src).parse()
    }

    /// Resolve names against a chart, producing an expression over `Coord(i)`.
    pub fn bind(&self, chart: Chart) -> Result<Expr> {
        Ok(match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Time => Expr::Time,
            Expr::Coord(i) => {
                if *i >= chart.dim() {
                    return Err(GrowthError::Configuration(format!(
                        "coordinate {i} not available on a {}-dimensional chart",
                        chart.dim()
                    )));
                }
                Expr::Coord(*i)
            }
            Expr::Radius => match chart {
                Chart::Radial => Expr::Coord(0),
                Chart::Cartesian(n) => {
                    let mut sum = Expr::Coord(0).powf(2.0);
                    for i in 1..n {
                        sum = sum + Expr::Coord(i).powf(2.0);
                    }
                    Expr::call(Func::Sqrt, sum)
                }
            },
            Expr::Cart(i) => match chart {
                Chart::Radial => {
                    return Err(GrowthError::Configuration(format!(
                        "X{} is not defined on a radial chart (use R)",
                        i + 1
                    )))
                }
                Chart::Cartesian(n) if *i >= n => {
                    return Err(GrowthError::Configuration(format!("X{} is not defined in {n} dimensions", i + 1)))
                }
                Chart::Cartesian(_) => Expr::Coord(*i),
            },
            Expr::Neg(a) => Expr::Neg(Box::new(a.bind(chart)?)),
            Expr::Add(a, b) => Expr::Add(Box::new(a.bind(chart)?), Box::new(b.bind(chart)?)),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.bind(chart)?), Box::new(b.bind(chart)?)),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.bind(chart)?), Box::new(b.bind(chart)?)),
            Expr::Div(a, b) => Expr::Div(Box::new(a.bind(chart)?), Box::new(b.bind(chart)?)),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.bind(chart)?), Box::new(b.bind(chart)?)),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.bind(chart)?)),
        })
    }

    /// Evaluate a bound expression.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Coord(i) => x[*i],
            Expr::Time => t,
            Expr::Radius => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Expr::Cart(i) => x[*i],
            Expr::Neg(a) => -a.eval(x, t),
            Expr::Add(a, b) => a.eval(x, t) + b.eval(x, t),
            Expr::Sub(a, b) => a.eval(x, t) - b.eval(x, t),
            Expr::Mul(a, b) => a.eval(x, t) * b.eval(x, t),
            Expr::Div(a, b) => a.eval(x, t) / b.eval(x, t),
            Expr::Pow(a, b) => match **b {
                Expr::Num(e) if e == e.trunc() && e.abs() <= 16.0 => a.eval(x, t).powi(e as i32),
                _ => a.eval(x, t).powf(b.eval(x, t)),
            },
            Expr::Call(f, a) => f.apply(a.eval(x, t)),
        }
    }

    fn is_num(&self, v: f64) -> bool {
        matches!(self, Expr::Num(n) if *n == v)
    }

    /// Symbolic derivative of a bound expression. `var = None` means time.
    pub fn diff(&self, var: Option<usize>) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Coord(i) | Expr::Cart(i) => Expr::Num(if var == Some(*i) { 1.0 } else { 0.0 }),
            Expr::Time => Expr::Num(if var.is_none() { 1.0 } else { 0.0 }),
            Expr::Radius => panic!("diff called on an unbound expression"),
            Expr::Neg(a) => -a.diff(var),
            Expr::Add(a, b) => a.diff(var) + b.diff(var),
            Expr::Sub(a, b) => a.diff(var) - b.diff(var),
            Expr::Mul(a, b) => a.diff(var) * (**b).clone() + (**a).clone() * b.diff(var),
            Expr::Div(a, b) => (a.diff(var) * (**b).clone() - (**a).clone() * b.diff(var)) / (**b).clone().powf(2.0),
            Expr::Pow(a, b) => {
                if let Expr::Num(e) = **b {
                    Expr::Num(e) * (**a).clone().powf(e - 1.0) * a.diff(var)
                } else {
                    let u = (**a).clone();
                    let v = (**b).clone();
                    self.clone() * (v.diff(var) * u.clone().ln() + v * u.diff(var) / u)
                }
            }
            Expr::Call(f, a) => {
                let u = (**a).clone();
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Ln => Expr::Num(1.0) / u,
                    Func::Sin => Expr::call(Func::Cos, u),
                    Func::Cos => -Expr::call(Func::Sin, u),
                    Func::Sqrt => Expr::Num(0.5) / self.clone(),
                };
                outer * a.diff(var)
            }
        }
    }
}

// Arithmetic with light constant folding so derivative trees stay small.
impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a + b),
            _ if self.is_num(0.0) => rhs,
            _ if rhs.is_num(0.0) => self,
            _ => Expr::Add(Box::new(self), Box::new(rhs)),
        }
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a - b),
            _ if rhs.is_num(0.0) => self,
            _ if self.is_num(0.0) => -rhs,
            _ => Expr::Sub(Box::new(self), Box::new(rhs)),
        }
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Num(a), Expr::Num(b)) => Expr::Num(a * b),
            _ if self.is_num(0.0) || rhs.is_num(0.0) => Expr::Num(0.0),
            _ if self.is_num(1.0) => rhs,
            _ if rhs.is_num(1.0) => self,
            _ => Expr::Mul(Box::new(self), Box::new(rhs)),
        }
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        match (&self, &rhs) {
            (Expr::Num(a), Expr::Num(b)) if *b != 0.0 => Expr::Num(a / b),
            _ if self.is_num(0.0) => Expr::Num(0.0),
            _ if rhs.is_num(1.0) => self,
            _ => Expr::Div(Box::new(self), Box::new(rhs)),
        }
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self {
            Expr::Num(a) => Expr::Num(-a),
            Expr::Neg(a) => *a,
            other => Expr::Neg(Box::new(other)),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Radius => write!(f, "R"),
            Expr::Cart(i) | Expr::Coord(i) => write!(f, "X{}", i + 1),
            Expr::Time => write!(f, "t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/{b}"),
            Expr::Pow(a, b) => write!(f, "{a}^{b}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(Token, usize, usize)>,
    pos: usize,
    lex_error: Option<GrowthError>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        let mut p = Parser { src, tokens: Vec::new(), pos: 0, lex_error: None };
        p.lex();
        p
    }

    fn lex(&mut self) {
        let mut line = 1;
        let mut col = 1;
        let chars: Vec<char> = self.src.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == '\n' {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            if c.is_whitespace() {
                i += 1;
                col += 1;
                continue;
            }
            let start_col = col;
            if c.is_ascii_digit() || c == '.' {
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
                col += i - start;
                match text.parse::<f64>() {
                    Ok(v) => self.tokens.push((Token::Num(v), line, start_col)),
                    Err(_) => {
                        self.lex_error = Some(GrowthError::Parse {
                            line,
                            column: start_col,
                            message: format!("malformed number '{text}'"),
                        });
                        return;
                    }
                }
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                let text: String = chars[start..i].iter().collect();
                self.tokens.push((Token::Ident(text), line, start_col));
            } else if "+-*/^()".contains(c) {
                self.tokens.push((Token::Op(c), line, start_col));
                i += 1;
                col += 1;
            } else {
                self.lex_error = Some(GrowthError::Parse {
                    line,
                    column: start_col,
                    message: format!("unexpected character '{c}'"),
                });
                return;
            }
        }
        self.tokens.push((Token::End, line, col));
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn error_here(&self, message: String) -> GrowthError {
        let (_, line, column) = &self.tokens[self.pos];
        GrowthError::Parse { line: *line, column: *column, message }
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn parse(mut self) -> Result<Expr> {
        if let Some(e) = self.lex_error.take() {
            return Err(e);
        }
        let e = self.expr()?;
        match self.peek() {
            Token::End => Ok(e),
            tok => {
                let msg = format!("unexpected token {tok:?}");
                Err(self.error_here(msg))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Token::Op('+') => {
                    self.advance();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Op('-') => {
                    self.advance();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Token::Op('*') => {
                    self.advance();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Op('/') => {
                    self.advance();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Token::Op('-') = self.peek() {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if let Token::Op('^') = self.peek() {
            self.advance();
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Token::Num(v) => {
                self.advance();
                Ok(Expr::Num(v))
            }
            Token::Op('(') => {
                self.advance();
                let e = self.expr()?;
                self.expect_close()?;
                Ok(e)
            }
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "exp" => Some(Func::Exp),
                    "ln" | "log" => Some(Func::Ln),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(func) = func {
                    self.advance();
                    if self.peek() != &Token::Op('(') {
                        return Err(self.error_here(format!("expected '(' after {name}")));
                    }
                    self.advance();
                    let arg = self.expr()?;
                    self.expect_close()?;
                    return Ok(Expr::call(func, arg));
                }
                let e = match name.as_str() {
                    "R" | "r" => Expr::Radius,
                    "X1" | "x1" | "X" | "x" => Expr::Cart(0),
                    "X2" | "x2" | "Y" | "y" => Expr::Cart(1),
                    "X3" | "x3" | "Z" | "z" => Expr::Cart(2),
                    "t" => Expr::Time,
                    "pi" => Expr::Num(std::f64::consts::PI),
                    _ => return Err(self.error_here(format!("unknown name '{name}'"))),
                };
                self.advance();
                Ok(e)
            }
            Token::End => Err(self.error_here("unexpected end of input".into())),
            tok => Err(self.error_here(format!("unexpected token {tok:?}"))),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        if self.peek() == &Token::Op(')') {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here("expected ')'".into()))
        }
    }
}

/// A scalar field defined by an expression, with symbolic derivatives.
#[derive(Debug, Clone)]
pub struct ExprField {
    source: String,
    chart: Chart,
    value: Expr,
    gradient: Vec<Expr>,
    hessian: Vec<Expr>,
    rate: Expr,
}

impl ExprField {
    pub fn parse(src: &str, chart: Chart) -> Result<Self> {
        let e = Expr::parse(src)?;
        Self::from_expr(src.trim().to_string(), &e, chart)
    }

    pub fn from_expr(source: String, e: &Expr, chart: Chart) -> Result<Self> {
        let value = e.bind(chart)?;
        let n = chart.dim();
        let gradient: Vec<Expr> = (0..n).map(|i| value.diff(Some(i))).collect();
        let mut hessian = Vec::with_capacity(n * n);
        for gi in &gradient {
            for j in 0..n {
                hessian.push(gi.diff(Some(j)));
            }
        }
        let rate = value.diff(None);
        Ok(Self { source, chart, value, gradient, hessian, rate })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.chart.dim()
    }
    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.value.eval(x, t)
    }
    fn gradient(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.gradient.iter().map(|g| g.eval(x, t)).collect()
    }
    fn hessian(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.hessian.iter().map(|g| g.eval(x, t)).collect()
    }
    fn time_derivative(&self, x: &[f64], t: f64) -> f64 {
        self.rate.eval(x, t)
    }
    fn has_analytic_derivatives(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::fd_hessian;

    fn radial(src: &str) -> ExprField {
        ExprField::parse(src, Chart::Radial).unwrap()
    }

    #[test]
    fn parses_growth_profiles() {
        let cases: [(&str, f64, f64); 6] = [
            ("-R", 0.7, -0.7),
            ("-R^2", 0.7, -0.49),
            ("0.1*R", 2.0, 0.2),
            ("cos(R)^2", 0.4, 0.4f64.cos().powi(2)),
            ("-ln(R^2)", 3.0, -(9.0f64).ln()),
            ("2e-1*exp(-R)", 1.0, 0.2 * (-1.0f64).exp()),
        ];
        for (src, r, expect) in cases {
            let f = radial(src);
            assert!((f.value(&[r], 0.0) - expect).abs() < 1e-14, "{src}");
        }
    }

    #[test]
    fn unterminated_call_reports_column_four() {
        match Expr::parse("ln(") {
            Err(GrowthError::Parse { line, column, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(column, 4);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_names_and_trailing_tokens() {
        assert!(matches!(Expr::parse("foo + 1"), Err(GrowthError::Parse { column: 1, .. })));
        assert!(matches!(Expr::parse("R R"), Err(GrowthError::Parse { column: 3, .. })));
        assert!(matches!(Expr::parse("R $ 2"), Err(GrowthError::Parse { column: 3, .. })));
        assert!(ExprField::parse("X1", Chart::Radial).is_err());
        assert!(ExprField::parse("X3", Chart::Cartesian(2)).is_err());
    }

    #[test]
    fn precedence_and_unary_minus() {
        let f = radial("-2^2 + 3*R/2 - (1 - R)");
        // -(2^2) + 3R/2 - 1 + R
        assert!((f.value(&[2.0], 0.0) - (-4.0 + 3.0 - 1.0 + 2.0)).abs() < 1e-15);
        let g = radial("2^3^2");
        assert_eq!(g.value(&[1.0], 0.0), 512.0);
    }

    #[test]
    fn symbolic_derivatives_match_finite_differences() {
        let f =
            ExprField::parse("exp(0.3*X1)*sin(X2) + ln(R) - X1*X3^2/(1 + X2^2) + sqrt(2 + X3)*t", Chart::Cartesian(3))
                .unwrap();
        let x = [0.4, -0.7, 1.1];
        let t = 0.8;
        let g = f.gradient(&x, t);
        let fd = crate::field::fd_gradient(|y| f.value(y, t), &x, 1e-6);
        for i in 0..3 {
            assert!((g[i] - fd[i]).abs() < 1e-8, "grad {i}");
        }
        let h = f.hessian(&x, t);
        let hfd = fd_hessian(|y| f.value(y, t), &x, 1e-4);
        for i in 0..9 {
            assert!((h[i] - hfd[i]).abs() < 1e-5, "hess {i}: {} vs {}", h[i], hfd[i]);
        }
        assert!((f.time_derivative(&x, t) - (2.0f64 + 1.1).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn radius_binds_to_euclidean_norm() {
        let f = ExprField::parse("R^2", Chart::Cartesian(3)).unwrap();
        assert!((f.value(&[1.0, 2.0, 2.0], 0.0) - 9.0).abs() < 1e-12);
        let lap: f64 = (0..3).map(|i| f.hessian(&[1.0, 2.0, 2.0], 0.0)[4 * i]).sum();
        assert!((lap - 6.0).abs() < 1e-12);
    }
}
