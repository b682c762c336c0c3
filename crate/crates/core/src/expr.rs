//! Arithmetic expressions in the variables `t`, `x`, `y`.
//!
//! Every function-valued quantity in a problem file (coefficients, sources,
//! boundary data, measurement weights, measured data) is either one of these
//! expressions or a tabulated one-dimensional field. Evaluation is a pure
//! function of the point, so expressions can be shared freely across threads
//! and re-evaluated bit-identically.
//!
//! Grammar (EBNF, also documented in the README):
//!
//! ```text
//! expr   := term   { ("+" | "-") term }
//! term   := factor { ("*" | "/") factor }
//! factor := "-" factor | power
//! power  := atom [ "^" factor ]
//! atom   := number | "pi" | "t" | "x" | "y"
//!         | func "(" expr ")" | "(" expr ")"
//! func   := "sin" | "cos" | "exp" | "sqrt" | "abs" | "tanh"
//! ```
//!
//! `^` is right-associative (`2^3^2 = 512`) and `-x^2` parses as `-(x^2)`.
//! Division by zero, negative radicands and non-finite intermediates are hard
//! evaluation errors rather than silently propagated NaNs.

use crate::error::Error;

/// A variable an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    Y,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }
}

/// Abstract syntax tree of an arithmetic expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
}

/// Evaluation point. `y` is absent for one-dimensional problems; referencing
/// `y` with `y: None` is an error.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub t: f64,
    pub x: f64,
    pub y: Option<f64>,
}

impl Point {
    pub fn new(t: f64, x: f64, y: Option<f64>) -> Self {
        Point { t, x, y }
    }
}

impl Expr {
    /// Parse `text` into an AST. Syntax errors carry the byte offset of the
    /// failure.
    pub fn parse(text: &str) -> Result<Expr, Error> {
        let mut p = Parser::new(text);
        let e = p.parse_expr()?;
        p.skip_ws();
        if p.pos < p.bytes.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Evaluate at a point. Errors on division by zero, domain violations,
    /// non-finite intermediates, and on `y` when the point has none.
    pub fn eval(&self, pt: Point) -> Result<f64, Error> {
        let v = match self {
            Expr::Num(c) => *c,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(Var::T) => pt.t,
            Expr::Var(Var::X) => pt.x,
            Expr::Var(Var::Y) => pt.y.ok_or_else(|| {
                Error::Eval("variable y referenced in a 1-D problem".into())
            })?,
            Expr::Neg(a) => -a.eval(pt)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(pt)?;
                let b = b.eval(pt)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(Error::Eval("division by zero".into()));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Func(f, a) => {
                let a = a.eval(pt)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(Error::Eval(format!(
                                "sqrt of negative value {a}"
                            )));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Tanh => a.tanh(),
                }
            }
        };
        if !v.is_finite() {
            return Err(Error::Eval(format!("non-finite intermediate value {v}")));
        }
        Ok(v)
    }

    /// Whether the expression references `var` anywhere.
    pub fn uses_var(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Func(_, a) => a.uses_var(var),
            Expr::Bin(_, a, b) => a.uses_var(var) || b.uses_var(var),
        }
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

// Printing preserves grouping exactly (floating point addition and
// multiplication are not associative), so parse(print(e)) evaluates
// bit-identically to e. The parser cannot produce a negative literal
// directly (unary minus parses as Neg), so one is printed as "(-c)" and
// re-enters as a bit-exact sign flip of the positive literal.
impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn child(
            f: &mut std::fmt::Formatter<'_>,
            e: &Expr,
            parens: bool,
        ) -> std::fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(c) if c.is_sign_negative() => write!(f, "({c:?})"),
            Expr::Num(c) => write!(f, "{c:?}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, a.level() < 3)
            }
            Expr::Bin(op, a, b) => {
                let p = self.level();
                let (sym, right_parens) = match op {
                    BinOp::Add => ("+", b.level() <= p),
                    BinOp::Sub => ("-", b.level() <= p),
                    BinOp::Mul => ("*", b.level() <= p),
                    BinOp::Div => ("/", b.level() <= p),
                    // right-associative: only a lower-level right child
                    // needs parentheses
                    BinOp::Pow => ("^", b.level() < p),
                };
                let left_parens = match op {
                    BinOp::Pow => a.level() <= p,
                    _ => a.level() < p,
                };
                child(f, a, left_parens)?;
                write!(f, "{sym}")?;
                child(f, b, right_parens)
            }
            Expr::Func(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: msg.into(),
        }
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

    fn parse_expr(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Expr, Error> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.parse_factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, Error> {
        let base = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.parse_factor()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, Error> {
        match self.peek() {
            None => Err(self.err("empty operand")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("unbalanced parentheses: expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            Some(_) => Err(self.err("empty operand: expected number, variable or '('")),
        }
    }

    fn parse_number(&mut self) -> Result<Expr, Error> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // optional exponent
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let mut probe = self.pos + 1;
            if probe < self.bytes.len() && matches!(self.bytes[probe], b'+' | b'-') {
                probe += 1;
            }
            if probe < self.bytes.len() && self.bytes[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => Err(Error::Parse {
                offset: start,
                message: format!("invalid number literal '{text}'"),
            }),
        }
    }

    fn parse_ident(&mut self) -> Result<Expr, Error> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        match name {
            "t" => Ok(Expr::Var(Var::T)),
            "x" => Ok(Expr::Var(Var::X)),
            "y" => Ok(Expr::Var(Var::Y)),
            "pi" => Ok(Expr::Pi),
            _ => {
                if let Some(func) = Func::from_name(name) {
                    if self.peek() != Some(b'(') {
                        return Err(self.err("expected '(' after function name"));
                    }
                    self.pos += 1;
                    let arg = self.parse_expr()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("unbalanced parentheses: expected ')'"));
                    }
                    self.pos += 1;
                    Ok(Expr::Func(func, Box::new(arg)))
                } else {
                    Err(Error::Parse {
                        offset: start,
                        message: format!("unknown identifier '{name}'"),
                    })
                }
            }
        }
    }
}

/// Tabulated one-dimensional field over a single variable, evaluated by
/// piecewise-linear interpolation. Out-of-range evaluation is an error, not
/// extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    var: Var,
    points: Vec<(f64, f64)>,
}

impl Table {
    pub fn new(var: Var, points: Vec<(f64, f64)>) -> Result<Table, Error> {
        if points.len() < 2 {
            return Err(Error::Field(
                "tabulated field needs at least two points".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Field(
                    "tabulated field abscissae must be strictly increasing".into(),
                ));
            }
        }
        if points.iter().any(|(a, v)| !a.is_finite() || !v.is_finite()) {
            return Err(Error::Field("tabulated field entries must be finite".into()));
        }
        Ok(Table { var, points })
    }

    pub fn var(&self) -> Var {
        self.var
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn eval_at(&self, s: f64) -> Result<f64, Error> {
        let first = self.points[0].0;
        let last = self.points[self.points.len() - 1].0;
        if s < first || s > last {
            return Err(Error::Field(format!(
                "tabulated field evaluated at {}={s} outside its range [{first}, {last}]",
                self.var.name()
            )));
        }
        // rightmost interval whose left end is <= s
        let k = match self
            .points
            .binary_search_by(|(a, _)| a.partial_cmp(&s).expect("finite"))
        {
            Ok(i) => return Ok(self.points[i].1),
            Err(i) => i - 1,
        };
        let (a0, v0) = self.points[k];
        let (a1, v1) = self.points[k + 1];
        let w = (s - a0) / (a1 - a0);
        Ok(v0 + w * (v1 - v0))
    }

    pub fn eval(&self, pt: Point) -> Result<f64, Error> {
        let s = match self.var {
            Var::T => pt.t,
            Var::X => pt.x,
            Var::Y => pt.y.ok_or_else(|| {
                Error::Eval("table over y evaluated in a 1-D problem".into())
            })?,
        };
        self.eval_at(s)
    }
}

/// A function-valued datum: an analytic expression or a tabulated field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Expr(Expr),
    Table(Table),
}

impl FieldSpec {
    /// Parse an expression string into a `FieldSpec`.
    pub fn parse(text: &str) -> Result<FieldSpec, Error> {
        Ok(FieldSpec::Expr(Expr::parse(text)?))
    }

    pub fn constant(c: f64) -> FieldSpec {
        FieldSpec::Expr(Expr::Num(c))
    }

    pub fn eval(&self, pt: Point) -> Result<f64, Error> {
        match self {
            FieldSpec::Expr(e) => e.eval(pt),
            FieldSpec::Table(tb) => tb.eval(pt),
        }
    }

    pub fn uses_var(&self, var: Var) -> bool {
        match self {
            FieldSpec::Expr(e) => e.uses_var(var),
            FieldSpec::Table(tb) => tb.var() == var,
        }
    }
}
