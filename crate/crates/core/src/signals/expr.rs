//! A deliberately tiny expression language over one real variable `x`.
//!
//! Grammar (precedence climbing, loosest first):
//!
//! ```text
//! expr    := term (('+' | '-') term)*          left-associative
//! term    := unary (('*' | '/') unary)*        left-associative
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?              right-associative
//! primary := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | tanh | cosh | sinh | sin | cos | sqrt
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^4` is `-(x^4)`. The exponent of
//! `^` may itself carry a sign (`x^-2`).
//!
//! `sinh` is included so that the language is closed under differentiation
//! (`d/dx cosh(u) = sinh(u)·u′`).

// Simplification rules compare floats with `==` in guards rather than with
// float literal patterns, which read as structural matches.
#![allow(clippy::redundant_guards)]

use std::fmt;

use crate::error::{Error, Result};

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Tanh,
    Cosh,
    Sinh,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "tanh" => Func::Tanh,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Tanh => "tanh",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionExpr {
    /// Non-negative numeric literal (the parser never produces negative
    /// literals; a leading minus is a `Neg` node).
    Num(f64),
    /// The variable `x`.
    Var,
    /// The constant π.
    Pi,
    Neg(Box<FunctionExpr>),
    Binary(BinOp, Box<FunctionExpr>, Box<FunctionExpr>),
    Call(Func, Box<FunctionExpr>),
}

/// Parse `source` into an expression tree.
pub fn parse_expression(source: &str) -> Result<FunctionExpr> {
    if source.trim().is_empty() {
        return Err(Error::Syntax { offset: 0, message: "empty expression".into() });
    }
    let tokens = lex(source)?;
    let mut parser = Parser { tokens: &tokens, pos: 0, len: source.len() };
    let expr = parser.expr()?;
    if let Some(tok) = parser.peek() {
        return Err(Error::Syntax { offset: tok.offset, message: format!("unexpected {}", tok.kind.describe()) });
    }
    Ok(expr)
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl TokKind {
    fn describe(&self) -> String {
        match self {
            TokKind::Num(v) => format!("number {v}"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Plus => "`+`".into(),
            TokKind::Minus => "`-`".into(),
            TokKind::Star => "`*`".into(),
            TokKind::Slash => "`/`".into(),
            TokKind::Caret => "`^`".into(),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    offset: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => TokKind::Plus,
            b'-' => TokKind::Minus,
            b'*' => TokKind::Star,
            b'/' => TokKind::Slash,
            b'^' => TokKind::Caret,
            b'(' => TokKind::LParen,
            b')' => TokKind::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // Optional exponent, only if digits follow.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| Error::Syntax { offset: start, message: format!("malformed number `{text}`") })?;
                out.push(Token { kind: TokKind::Num(value), offset: start });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token { kind: TokKind::Ident(src[start..i].to_string()), offset: start });
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
            }
        };
        out.push(Token { kind, offset: start });
        i += 1;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, kind: &TokKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end_offset(&self) -> usize {
        self.peek().map(|t| t.offset).unwrap_or(self.len)
    }

    fn expr(&mut self) -> Result<FunctionExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(&TokKind::Plus) {
                BinOp::Add
            } else if self.eat(&TokKind::Minus) {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = FunctionExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<FunctionExpr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(&TokKind::Star) {
                BinOp::Mul
            } else if self.eat(&TokKind::Slash) {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = FunctionExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<FunctionExpr> {
        if self.eat(&TokKind::Minus) {
            Ok(FunctionExpr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<FunctionExpr> {
        let base = self.primary()?;
        if self.eat(&TokKind::Caret) {
            let exponent = self.unary()?;
            Ok(FunctionExpr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<FunctionExpr> {
        let Some(tok) = self.peek() else {
            return Err(Error::Syntax { offset: self.len, message: "unexpected end of input".into() });
        };
        self.pos += 1;
        match &tok.kind {
            TokKind::Num(v) => Ok(FunctionExpr::Num(*v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                if !self.eat(&TokKind::RParen) {
                    return Err(Error::Syntax { offset: self.end_offset(), message: "expected `)`".into() });
                }
                Ok(inner)
            }
            TokKind::Ident(name) => match name.as_str() {
                "x" => Ok(FunctionExpr::Var),
                "pi" => Ok(FunctionExpr::Pi),
                other => {
                    let Some(func) = Func::from_name(other) else {
                        return Err(Error::UnknownIdentifier { name: other.to_string(), offset: tok.offset });
                    };
                    if !self.eat(&TokKind::LParen) {
                        return Err(Error::Syntax {
                            offset: self.end_offset(),
                            message: format!("expected `(` after `{other}`"),
                        });
                    }
                    let arg = self.expr()?;
                    if !self.eat(&TokKind::RParen) {
                        return Err(Error::Syntax { offset: self.end_offset(), message: "expected `)`".into() });
                    }
                    Ok(FunctionExpr::Call(func, Box::new(arg)))
                }
            },
            other => Err(Error::Syntax { offset: tok.offset, message: format!("unexpected {}", other.describe()) }),
        }
    }
}

// ---------------------------------------------------------------------------
// Pretty printing

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

impl FunctionExpr {
    fn precedence(&self) -> u8 {
        match self {
            FunctionExpr::Num(v) if *v < 0.0 || v.is_sign_negative() => PREC_NEG,
            FunctionExpr::Num(_) | FunctionExpr::Var | FunctionExpr::Pi | FunctionExpr::Call(..) => PREC_ATOM,
            FunctionExpr::Neg(_) => PREC_NEG,
            FunctionExpr::Binary(BinOp::Add | BinOp::Sub, ..) => PREC_ADD,
            FunctionExpr::Binary(BinOp::Mul | BinOp::Div, ..) => PREC_MUL,
            FunctionExpr::Binary(BinOp::Pow, ..) => PREC_POW,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &FunctionExpr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for FunctionExpr {
    /// Minimal-parenthesis rendering that re-parses to an equal tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionExpr::Num(v) => write!(f, "{v}"),
            FunctionExpr::Var => write!(f, "x"),
            FunctionExpr::Pi => write!(f, "pi"),
            FunctionExpr::Neg(inner) => {
                write!(f, "-")?;
                write_child(f, inner, inner.precedence() < PREC_NEG)
            }
            FunctionExpr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            FunctionExpr::Binary(op, lhs, rhs) => {
                let (sym, prec) = match op {
                    BinOp::Add => (" + ", PREC_ADD),
                    BinOp::Sub => (" - ", PREC_ADD),
                    BinOp::Mul => ("*", PREC_MUL),
                    BinOp::Div => ("/", PREC_MUL),
                    BinOp::Pow => ("^", PREC_POW),
                };
                if *op == BinOp::Pow {
                    // Base must be an atom; exponent is parsed at unary level.
                    write_child(f, lhs, lhs.precedence() < PREC_ATOM)?;
                    f.write_str(sym)?;
                    write_child(f, rhs, rhs.precedence() < PREC_NEG)
                } else {
                    write_child(f, lhs, lhs.precedence() < prec)?;
                    f.write_str(sym)?;
                    write_child(f, rhs, rhs.precedence() <= prec)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn domain_error(x: f64, message: impl Into<String>) -> Error {
    Error::Eval { x, message: message.into() }
}

impl FunctionExpr {
    /// Evaluate at `x`. Division by zero, logarithms of non-positive values,
    /// square roots of negative values and non-finite intermediates are
    /// errors.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let value = match self {
            FunctionExpr::Num(v) => *v,
            FunctionExpr::Var => x,
            FunctionExpr::Pi => std::f64::consts::PI,
            FunctionExpr::Neg(inner) => -inner.eval(x)?,
            FunctionExpr::Binary(op, lhs, rhs) => {
                let a = lhs.eval(x)?;
                let b = rhs.eval(x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(domain_error(x, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a == 0.0 && b < 0.0 {
                            return Err(domain_error(x, "zero raised to a negative power"));
                        }
                        if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                            a.powi(b as i32)
                        } else {
                            if a < 0.0 {
                                return Err(domain_error(x, "negative base with non-integer exponent"));
                            }
                            a.powf(b)
                        }
                    }
                }
            }
            FunctionExpr::Call(func, arg) => {
                let a = arg.eval(x)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(domain_error(x, format!("log of non-positive value {a}")));
                        }
                        a.ln()
                    }
                    Func::Tanh => a.tanh(),
                    Func::Cosh => a.cosh(),
                    Func::Sinh => a.sinh(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain_error(x, format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(domain_error(x, format!("non-finite result in `{self}`")))
        }
    }

    /// True if the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            FunctionExpr::Num(_) | FunctionExpr::Pi => true,
            FunctionExpr::Var => false,
            FunctionExpr::Neg(inner) | FunctionExpr::Call(_, inner) => inner.is_constant(),
            FunctionExpr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Exactly the literal zero (after constant folding).
    pub fn is_zero(&self) -> bool {
        matches!(self, FunctionExpr::Num(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, FunctionExpr::Num(v) if *v == 1.0)
    }

    /// Symbolic derivative with light algebraic simplification
    /// (identities with 0 and 1, folding of numeric literals).
    pub fn derivative(&self) -> FunctionExpr {
        use FunctionExpr as E;
        match self {
            E::Num(_) | E::Pi => E::Num(0.0),
            E::Var => E::Num(1.0),
            E::Neg(u) => neg(u.derivative()),
            E::Binary(op, u, v) => {
                let (du, dv) = (u.derivative(), v.derivative());
                match op {
                    BinOp::Add => add(du, dv),
                    BinOp::Sub => sub(du, dv),
                    BinOp::Mul => add(mul(du, (**v).clone()), mul((**u).clone(), dv)),
                    BinOp::Div => {
                        div(sub(mul(du, (**v).clone()), mul((**u).clone(), dv)), pow((**v).clone(), E::Num(2.0)))
                    }
                    BinOp::Pow => {
                        if v.is_constant() {
                            // v·u^(v−1)·u′
                            let reduced = match &**v {
                                E::Num(n) => E::Num(n - 1.0),
                                other => sub(other.clone(), E::Num(1.0)),
                            };
                            mul(mul((**v).clone(), pow((**u).clone(), reduced)), du)
                        } else {
                            // u^v·(v′·log u + v·u′/u)
                            let log_u = E::Call(Func::Log, u.clone());
                            let inner = add(mul(dv, log_u), div(mul((**v).clone(), du), (**u).clone()));
                            mul(self.clone(), inner)
                        }
                    }
                }
            }
            E::Call(func, u) => {
                let du = u.derivative();
                let outer = match func {
                    Func::Exp => self.clone(),
                    Func::Log => return div(du, (**u).clone()),
                    Func::Tanh => sub(E::Num(1.0), pow(self.clone(), E::Num(2.0))),
                    Func::Cosh => E::Call(Func::Sinh, u.clone()),
                    Func::Sinh => E::Call(Func::Cosh, u.clone()),
                    Func::Sin => E::Call(Func::Cos, u.clone()),
                    Func::Cos => neg(E::Call(Func::Sin, u.clone())),
                    Func::Sqrt => return div(du, mul(E::Num(2.0), self.clone())),
                };
                mul(outer, du)
            }
        }
    }
}

// Smart constructors used by the differentiator.

fn num_of(e: &FunctionExpr) -> Option<f64> {
    match e {
        FunctionExpr::Num(v) => Some(*v),
        _ => None,
    }
}

fn neg(a: FunctionExpr) -> FunctionExpr {
    match a {
        FunctionExpr::Num(v) if v == 0.0 => FunctionExpr::Num(0.0),
        FunctionExpr::Neg(inner) => *inner,
        other => FunctionExpr::Neg(Box::new(other)),
    }
}

fn add(a: FunctionExpr, b: FunctionExpr) -> FunctionExpr {
    match (num_of(&a), num_of(&b)) {
        (Some(x), Some(y)) if x + y >= 0.0 => FunctionExpr::Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => match b {
            FunctionExpr::Neg(inner) => sub(a, *inner),
            b => FunctionExpr::Binary(BinOp::Add, Box::new(a), Box::new(b)),
        },
    }
}

fn sub(a: FunctionExpr, b: FunctionExpr) -> FunctionExpr {
    match (num_of(&a), num_of(&b)) {
        (Some(x), Some(y)) if x - y >= 0.0 => FunctionExpr::Num(x - y),
        (_, Some(y)) if y == 0.0 => a,
        (Some(x), _) if x == 0.0 => neg(b),
        _ => FunctionExpr::Binary(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

fn mul(a: FunctionExpr, b: FunctionExpr) -> FunctionExpr {
    if a.is_zero() || b.is_zero() {
        return FunctionExpr::Num(0.0);
    }
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    if let (Some(x), Some(y)) = (num_of(&a), num_of(&b)) {
        return FunctionExpr::Num(x * y);
    }
    match (a, b) {
        (FunctionExpr::Neg(a), b) => neg(mul(*a, b)),
        (a, FunctionExpr::Neg(b)) => neg(mul(a, *b)),
        (a, b) => FunctionExpr::Binary(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

fn div(a: FunctionExpr, b: FunctionExpr) -> FunctionExpr {
    if a.is_zero() {
        return FunctionExpr::Num(0.0);
    }
    if b.is_one() {
        return a;
    }
    match a {
        FunctionExpr::Neg(a) => neg(div(*a, b)),
        a => FunctionExpr::Binary(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

fn pow(a: FunctionExpr, b: FunctionExpr) -> FunctionExpr {
    if b.is_one() {
        return a;
    }
    if b.is_zero() {
        return FunctionExpr::Num(1.0);
    }
    // Negative literal exponents are written as Neg(Num) to stay printable.
    let b = match b {
        FunctionExpr::Num(v) if v < 0.0 => FunctionExpr::Neg(Box::new(FunctionExpr::Num(-v))),
        other => other,
    };
    FunctionExpr::Binary(BinOp::Pow, Box::new(a), Box::new(b))
}
