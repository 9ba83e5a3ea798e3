//! Scalar expression language for the premise and membership definitions:
//! numeric literals, the state variables `x1..xn`, the premise value `z`,
//! the operators `+ - * / ^` with unary minus, and the functions
//! `sin cos abs min max`. Angles are radians.
//!
//! Parsing is a small recursive-descent pass over pre-lexed tokens; every
//! error carries the byte offset it was detected at. Precedence, tightest
//! first: `^`, unary `-`, `* /`, `+ -`; `^` is right-associative, the rest
//! associate left.

use std::fmt;

use num_traits::Float;
use thiserror::Error;

use crate::linalg::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// State variable; `Var(0)` is `x1`.
    Var(usize),
    Z,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
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
    Abs,
    Min,
    Max,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Sin | Func::Cos | Func::Abs => 1,
            Func::Min | Func::Max => 2,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { offset: usize, name: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression value is not finite")]
    NonFinite,
    #[error("variable x{index} exceeds state dimension {dim}")]
    VarOutOfRange { index: usize, dim: usize },
}

fn syntax(offset: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(syntax(i, "expected digits after decimal point"));
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("bad number literal `{text}`")))?;
                toks.push((Tok::Num(value), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(syntax(
                    i,
                    format!("unexpected character `{}`", src[i..].chars().next().unwrap()),
                ));
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, o)| o)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.offset(), format!("expected {what}")))
        }
    }

    fn parse_additive(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_multiplicative()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.parse_unary()?;
            Ok(Expr::Neg(Box::new(inner)))
        } else {
            self.parse_power()
        }
    }

    fn parse_power(&mut self) -> Result<Expr, ExprError> {
        let base = self.parse_primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            // Exponent re-enters at unary level: `^` is right-associative
            // and binds tighter than unary minus, so `2^-3` and `2^3^2` both
            // parse the conventional way.
            let exp = self.parse_unary()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn parse_primary(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.bump().cloned() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.parse_additive()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => self.parse_ident(name, offset),
            Some(other) => Err(syntax(offset, format!("unexpected token `{other:?}`"))),
            None => Err(syntax(offset, "unexpected end of input")),
        }
    }

    fn parse_ident(&mut self, name: String, offset: usize) -> Result<Expr, ExprError> {
        if name == "z" {
            return Ok(Expr::Z);
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = rest
                    .parse()
                    .map_err(|_| syntax(offset, format!("variable index too large in `{name}`")))?;
                if index == 0 {
                    return Err(ExprError::UnknownIdent { offset, name });
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        let func = match name.as_str() {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return Err(ExprError::UnknownIdent { offset, name }),
        };
        self.expect(Tok::LParen, &format!("`(` after `{}`", func.name()))?;
        let mut args = vec![self.parse_additive()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.parse_additive()?);
        }
        let close = self.offset();
        self.expect(Tok::RParen, "`)`")?;
        if args.len() != func.arity() {
            return Err(syntax(
                close,
                format!(
                    "`{}` takes {} argument{}, got {}",
                    func.name(),
                    func.arity(),
                    if func.arity() == 1 { "" } else { "s" },
                    args.len()
                ),
            ));
        }
        Ok(Expr::Call(func, args))
    }
}

/// Parses an expression; errors report the byte offset they occur at.
pub fn parse(src: &str) -> Result<Expr, ExprError> {
    if src.trim().is_empty() {
        return Err(syntax(0, "empty expression"));
    }
    let toks = lex(src)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: src.len(),
    };
    let e = p.parse_additive()?;
    if p.pos != toks.len() {
        return Err(syntax(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

/// Evaluates `e` with state values `x1..xn` taken from `state` and the
/// premise value `z`. Every intermediate value is checked finite.
pub fn eval<T: Real>(e: &Expr, state: &[T], z: T) -> Result<T, ExprError> {
    let v = match e {
        Expr::Num(c) => T::from_f64(*c).ok_or(ExprError::NonFinite)?,
        Expr::Var(i) => *state.get(*i).ok_or(ExprError::VarOutOfRange {
            index: *i + 1,
            dim: state.len(),
        })?,
        Expr::Z => z,
        Expr::Neg(inner) => -eval(inner, state, z)?,
        Expr::Bin(op, l, r) => {
            let a = eval(l, state, z)?;
            let b = eval(r, state, z)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == T::zero() {
                        return Err(ExprError::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            }
        }
        Expr::Call(f, args) => {
            let a = eval(&args[0], state, z)?;
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Abs => a.abs(),
                Func::Min => Float::min(a, eval(&args[1], state, z)?),
                Func::Max => Float::max(a, eval(&args[1], state, z)?),
            }
        }
    };
    if !v.is_finite() {
        return Err(ExprError::NonFinite);
    }
    Ok(v)
}

impl Expr {
    /// Largest zero-based state index referenced, if any variable appears.
    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Z => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(inner) => inner.max_var_index(),
            Expr::Bin(_, l, r) => l.max_var_index().max(r.max_var_index()),
            Expr::Call(_, args) => args.iter().filter_map(|a| a.max_var_index()).max(),
        }
    }

    /// True when the premise value `z` appears anywhere in the tree.
    pub fn references_z(&self) -> bool {
        match self {
            Expr::Z => true,
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(inner) => inner.references_z(),
            Expr::Bin(_, l, r) => l.references_z() || r.references_z(),
            Expr::Call(_, args) => args.iter().any(|a| a.references_z()),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Z | Expr::Call(..) => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let needs_parens = self.prec() < min_prec;
        if needs_parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(i) => write!(f, "x{}", i + 1)?,
            Expr::Z => write!(f, "z")?,
            Expr::Neg(inner) => {
                write!(f, "-")?;
                inner.fmt_prec(f, 3)?;
            }
            Expr::Bin(op, l, r) => {
                let (sym, prec) = match op {
                    BinOp::Add => ("+", 1),
                    BinOp::Sub => ("-", 1),
                    BinOp::Mul => ("*", 2),
                    BinOp::Div => ("/", 2),
                    BinOp::Pow => ("^", 4),
                };
                if *op == BinOp::Pow {
                    // Right-associative: parenthesize an exponentiation on
                    // the left, let unary minus and chained powers stand on
                    // the right.
                    l.fmt_prec(f, prec + 1)?;
                    write!(f, "{sym}")?;
                    r.fmt_prec(f, 3)?;
                } else {
                    l.fmt_prec(f, prec)?;
                    write!(f, "{sym}")?;
                    r.fmt_prec(f, prec + 1)?;
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                write!(f, ")")?;
            }
        }
        if needs_parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Prints a form that re-parses to a structurally identical tree (for trees
/// produced by [`parse`]; hand-built negative literals print as their
/// unary-minus spelling).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
