//! A small math DSL for Hamiltonians, generators and map components.
//!
//! Grammar (no implicit multiplication):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' ('-')* power)?        right-associative, binds tighter than unary minus
//! atom  := number | variable | parameter | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Variables are `q1..qn`, `p1..pn`, `t` and `s`. The coordinate symbols can
//! be renamed (e.g. `q`/`P` for a type-2 generating function) through
//! [`Signature`].

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::numdiff::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: expected one of {expected:?}")]
    Syntax {
        position: usize,
        expected: Vec<&'static str>,
    },
    #[error("unknown identifier {name:?} at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("variable {name:?} at position {position} exceeds dimension {n}")]
    IndexOutOfRange {
        name: String,
        position: usize,
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// First coordinate block, 1-indexed.
    Q(usize),
    /// Second coordinate block, 1-indexed.
    P(usize),
    T,
    S,
}

impl Var {
    /// Position in the evaluation slot vector `[q.., p.., t, s]`.
    pub fn slot(self, n: usize) -> usize {
        match self {
            Var::Q(i) => i - 1,
            Var::P(i) => n + i - 1,
            Var::T => 2 * n,
            Var::S => 2 * n + 1,
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
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    /// Slope of `abs`, zero at the kink. Produced by differentiation only;
    /// the parser does not accept it.
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    /// Named parameter; `index` points into the parameter list the
    /// expression was parsed against.
    Param { name: String, index: usize },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// What an expression may refer to: dimension, coordinate symbols and
/// parameter names.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub n: usize,
    pub first: String,
    pub second: String,
    pub params: Vec<String>,
}

impl Signature {
    pub fn new(n: usize, params: &[&str]) -> Self {
        Signature {
            n,
            first: "q".into(),
            second: "p".into(),
            params: params.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_params(n: usize, params: Vec<String>) -> Self {
        Signature {
            n,
            first: "q".into(),
            second: "p".into(),
            params,
        }
    }

    pub fn with_symbols(mut self, first: &str, second: &str) -> Self {
        self.first = first.into();
        self.second = second.into();
        self
    }
}

/// Concrete values for a plain (f64) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    pub n: usize,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
    pub s: Option<f64>,
    pub params: BTreeMap<String, f64>,
}

impl Bindings {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Self {
        Bindings {
            n: q.len(),
            q,
            p,
            t,
            s: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }
}

pub fn parse(source: &str, n: usize, params: &[&str]) -> Result<Expr, ParseError> {
    parse_with(source, &Signature::new(n, params))
}

pub fn parse_with(source: &str, sig: &Signature) -> Result<Expr, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        sig,
        end: source.chars().count(),
    };
    let expr = parser.expr()?;
    match parser.peek() {
        None => Ok(expr),
        Some(tok) => Err(ParseError::Syntax {
            position: tok.pos,
            expected: vec!["operator", "end of input"],
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                position: start,
                expected: vec!["number"],
            })?;
            // A number directly followed by an identifier would be implicit
            // multiplication, which the grammar forbids.
            if i < chars.len() && (chars[i].is_alphabetic() || chars[i] == '_') {
                return Err(ParseError::Syntax {
                    position: i,
                    expected: vec!["operator", ")", "end of input"],
                });
            }
            tokens.push(Token {
                tok: Tok::Num(value),
                pos: start,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos: start,
            });
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                return Err(ParseError::Syntax {
                    position: i,
                    expected: vec!["number", "identifier", "operator", "(", ")"],
                })
            }
        };
        tokens.push(Token { tok, pos: i });
        i += 1;
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    sig: &'a Signature,
    end: usize,
}

const OPERAND: &[&str] = &["number", "identifier", "(", "-"];

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token { tok: Tok::Op(c), .. }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.exponent()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.exponent()?)));
        }
        self.power()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(token) = self.peek().cloned() else {
            return Err(ParseError::Syntax {
                position: self.end,
                expected: OPERAND.to_vec(),
            });
        };
        self.pos += 1;
        match token.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.close_paren()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, token.pos),
            Tok::Op(_) | Tok::RParen => Err(ParseError::Syntax {
                position: token.pos,
                expected: OPERAND.to_vec(),
            }),
        }
    }

    fn close_paren(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::RParen, .. }) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError::Syntax {
                position: self.here(),
                expected: vec![")", "operator"],
            }),
        }
    }

    fn identifier(&mut self, name: String, position: usize) -> Result<Expr, ParseError> {
        if let Some(func) = Func::from_name(&name) {
            match self.peek() {
                Some(Token { tok: Tok::LParen, .. }) => self.pos += 1,
                _ => {
                    return Err(ParseError::Syntax {
                        position: self.here(),
                        expected: vec!["("],
                    })
                }
            }
            let arg = self.expr()?;
            self.close_paren()?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if name == "t" {
            return Ok(Expr::Var(Var::T));
        }
        if name == "s" {
            return Ok(Expr::Var(Var::S));
        }
        for (symbol, make) in [
            (&self.sig.first, Var::Q as fn(usize) -> Var),
            (&self.sig.second, Var::P as fn(usize) -> Var),
        ] {
            if let Some(digits) = name.strip_prefix(symbol.as_str()) {
                if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                    let index: usize = digits.parse().unwrap_or(usize::MAX);
                    if index == 0 || index > self.sig.n {
                        return Err(ParseError::IndexOutOfRange {
                            name,
                            position,
                            n: self.sig.n,
                        });
                    }
                    return Ok(Expr::Var(make(index)));
                }
            }
        }
        if let Some(index) = self.sig.params.iter().position(|p| *p == name) {
            return Ok(Expr::Param { name, index });
        }
        Err(ParseError::UnknownIdentifier { name, position })
    }
}

/// Source of parameter values during evaluation.
trait ParamSource {
    fn get(&self, name: &str, index: usize) -> Result<f64>;
}

impl ParamSource for [f64] {
    fn get(&self, name: &str, index: usize) -> Result<f64> {
        self.get(index)
            .copied()
            .ok_or_else(|| Error::Domain(format!("parameter {name:?} is unbound")))
    }
}

impl ParamSource for BTreeMap<String, f64> {
    fn get(&self, name: &str, _index: usize) -> Result<f64> {
        BTreeMap::get(self, name)
            .copied()
            .ok_or_else(|| Error::Domain(format!("parameter {name:?} is unbound")))
    }
}

impl Expr {
    /// Evaluate with plain reals.
    pub fn eval(&self, b: &Bindings) -> Result<f64> {
        if b.q.len() != b.n || b.p.len() != b.n {
            return Err(Error::Dimension(format!(
                "bindings carry {} q and {} p values for n = {}",
                b.q.len(),
                b.p.len(),
                b.n
            )));
        }
        let mut slots = Vec::with_capacity(2 * b.n + 2);
        slots.extend_from_slice(&b.q);
        slots.extend_from_slice(&b.p);
        slots.push(b.t);
        slots.push(b.s.unwrap_or(0.0));
        if b.s.is_none() && self.mentions(Var::S) {
            return Err(Error::Domain("group parameter s is unbound".into()));
        }
        self.eval_in(b.n, &slots, &b.params)
    }

    /// Evaluate over any [`Scalar`]. `slots` is laid out `[q.., p.., t, s]`
    /// (the trailing `s` may be omitted when unused); `params` is indexed
    /// like the signature the expression was parsed with.
    pub fn eval_slots<T: Scalar>(&self, n: usize, slots: &[T], params: &[f64]) -> Result<T> {
        self.eval_in(n, slots, params)
    }

    fn eval_in<T: Scalar, P: ParamSource + ?Sized>(&self, n: usize, slots: &[T], params: &P) -> Result<T> {
        match self {
            Expr::Num(v) => Ok(T::constant(*v)),
            Expr::Var(v) => slots
                .get(v.slot(n))
                .cloned()
                .ok_or_else(|| Error::Domain(format!("variable {v:?} is unbound"))),
            Expr::Param { name, index } => Ok(T::constant(params.get(name, *index)?)),
            Expr::Neg(e) => Ok(-e.eval_in(n, slots, params)?),
            Expr::Call(f, e) => {
                let x = e.eval_in(n, slots, params)?;
                apply_func(*f, x)
            }
            Expr::Bin(op, l, r) => {
                let a = l.eval_in(n, slots, params)?;
                match op {
                    BinOp::Add => Ok(a + r.eval_in(n, slots, params)?),
                    BinOp::Sub => Ok(a - r.eval_in(n, slots, params)?),
                    BinOp::Mul => Ok(a * r.eval_in(n, slots, params)?),
                    BinOp::Div => {
                        let b = r.eval_in(n, slots, params)?;
                        if b.value() == 0.0 {
                            return Err(Error::Domain(format!("division by zero in {self}")));
                        }
                        Ok(a / b)
                    }
                    BinOp::Pow => {
                        let b = r.eval_in(n, slots, params)?;
                        power(a, b, !r.has_vars(), self)
                    }
                }
            }
        }
    }

    /// True if the expression references `v`.
    pub fn mentions(&self, v: Var) -> bool {
        match self {
            Expr::Var(w) => *w == v,
            Expr::Num(_) | Expr::Param { .. } => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.mentions(v),
            Expr::Bin(_, l, r) => l.mentions(v) || r.mentions(v),
        }
    }

    fn has_vars(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Num(_) | Expr::Param { .. } => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.has_vars(),
            Expr::Bin(_, l, r) => l.has_vars() || r.has_vars(),
        }
    }

    /// False if the expression contains a non-differentiable function.
    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Call(Func::Abs | Func::Sign, _) => false,
            Expr::Num(_) | Expr::Var(_) | Expr::Param { .. } => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_smooth(),
            Expr::Bin(_, l, r) => l.is_smooth() && r.is_smooth(),
        }
    }

    /// Print with custom coordinate symbols.
    pub fn display_with<'a>(&'a self, sig: &'a Signature) -> impl fmt::Display + 'a {
        Printer { expr: self, first: &sig.first, second: &sig.second }
    }

    /// Symbolic partial derivative with respect to `v`, lightly simplified.
    /// Evaluates to the same numbers as forward-mode duals up to rounding,
    /// except that `u^v` with a variable exponent needs `u > 0`.
    pub fn derivative(&self, v: Var) -> Expr {
        use BinOp::*;
        match self {
            Expr::Num(_) | Expr::Param { .. } => Expr::Num(0.0),
            Expr::Var(w) => Expr::Num(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(e) => neg(e.derivative(v)),
            Expr::Bin(op, l, r) => {
                let (dl, dr) = (l.derivative(v), r.derivative(v));
                let (l, r) = (l.as_ref().clone(), r.as_ref().clone());
                match op {
                    Add => add(dl, dr),
                    Sub => sub(dl, dr),
                    Mul => add(mul(dl, r.clone()), mul(l, dr)),
                    Div => sub(div(dl, r.clone()), div(mul(l, dr), mul(r.clone(), r))),
                    Pow if !r.has_vars() => {
                        let lowered = match r {
                            Expr::Num(k) => Expr::Num(k - 1.0),
                            _ => Expr::binary(Sub, r.clone(), Expr::Num(1.0)),
                        };
                        mul(mul(r, Expr::binary(Pow, l, lowered)), dl)
                    }
                    Pow => {
                        let whole = Expr::binary(Pow, l.clone(), r.clone());
                        let log_part = mul(dr, Expr::Call(Func::Ln, Box::new(l.clone())));
                        let base_part = mul(r, div(dl, l));
                        mul(whole, add(log_part, base_part))
                    }
                }
            }
            Expr::Call(f, e) => {
                let de = e.derivative(v);
                if de == Expr::Num(0.0) {
                    return de;
                }
                let u = e.as_ref().clone();
                let call = |g: Func, x: Expr| Expr::Call(g, Box::new(x));
                let slope = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tan => {
                        let t = call(Func::Tan, u);
                        add(Expr::Num(1.0), mul(t.clone(), t))
                    }
                    Func::Exp => call(Func::Exp, u),
                    Func::Ln => return div(de, u),
                    Func::Sqrt => return div(de, mul(Expr::Num(2.0), call(Func::Sqrt, u))),
                    Func::Abs => call(Func::Sign, u),
                    Func::Sign => return Expr::Num(0.0),
                };
                mul(slope, de)
            }
        }
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn neg(e: Expr) -> Expr {
    match e {
        Expr::Num(0.0) => Expr::Num(0.0),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::binary(BinOp::Add, a, b)
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        Expr::binary(BinOp::Sub, a, b)
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        Expr::Num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::binary(BinOp::Mul, a, b)
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        Expr::Num(0.0)
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::binary(BinOp::Div, a, b)
    }
}

fn apply_func<T: Scalar>(f: Func, x: T) -> Result<T> {
    let v = x.value();
    match f {
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Tan => Ok(x.tan()),
        Func::Exp => Ok(x.exp()),
        Func::Ln if v <= 0.0 => Err(Error::Domain(format!("ln of nonpositive value {v}"))),
        Func::Ln => Ok(x.ln()),
        Func::Sqrt if v < 0.0 => Err(Error::Domain(format!("sqrt of negative value {v}"))),
        Func::Sqrt => Ok(x.sqrt()),
        Func::Abs => Ok(x.abs()),
        Func::Sign => Ok(T::constant(if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        })),
    }
}

fn power<T: Scalar>(base: T, exponent: T, constant_exponent: bool, whole: &Expr) -> Result<T> {
    let b = base.value();
    let e = exponent.value();
    if b == 0.0 && e < 0.0 {
        return Err(Error::Domain(format!("0 raised to negative power in {whole}")));
    }
    if constant_exponent && e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
        return Ok(base.powi(e as i32));
    }
    if b < 0.0 {
        return Err(Error::Domain(format!(
            "negative base {b} with non-integer exponent in {whole}"
        )));
    }
    Ok(base.powf(&exponent))
}

struct Printer<'a> {
    expr: &'a Expr,
    first: &'a str,
    second: &'a str,
}

impl Printer<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::Q(i)) => write!(f, "{}{i}", self.first),
            Expr::Var(Var::P(i)) => write!(f, "{}{i}", self.second),
            Expr::Var(Var::T) => write!(f, "t"),
            Expr::Var(Var::S) => write!(f, "s"),
            Expr::Param { name, .. } => write!(f, "{name}"),
            Expr::Neg(inner) => {
                write!(f, "-(")?;
                self.write(inner, f)?;
                write!(f, ")")
            }
            Expr::Call(func, arg) => {
                write!(f, "{}(", func.name())?;
                self.write(arg, f)?;
                write!(f, ")")
            }
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "(")?;
                self.write(l, f)?;
                write!(f, " {sym} ")?;
                self.write(r, f)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer { expr: self, first: "q", second: "p" }.fmt(f)
    }
}
