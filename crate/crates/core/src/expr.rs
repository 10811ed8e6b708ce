//! Tokenizer and parser for the shared polynomial text grammar.
//!
//! Terms look like `3/2 * x1^2 * x3`, joined by `+` and `-`. Whitespace is
//! ignored. Parenthesised sub-expressions and integer powers of them are
//! accepted as a convenience; identifiers are resolved by the caller.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::exactpoly::PolyError;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(BigRational),
    Sym { name: String, column: usize },
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn err(column: usize, message: impl Into<String>) -> PolyError {
    PolyError::Parse {
        column,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, PolyError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let n: BigInt = digits.parse().map_err(|_| err(col, "bad integer"))?;
            out.push((Tok::Int(n), col));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
            {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            other => return Err(err(col, format!("unexpected character `{other}`"))),
        };
        out.push((tok, col));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(_, c)| *c)
            .unwrap_or(self.end_col)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, PolyError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, PolyError> {
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            let inner = self.term()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        if let Some(Tok::Plus) = self.peek() {
            self.bump();
            return self.term();
        }
        let mut lhs = self.power()?;
        while let Some(Tok::Star) = self.peek() {
            self.bump();
            let rhs = self.power()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Expr, PolyError> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let col = self.col();
            match self.bump() {
                Some((Tok::Int(n), _)) => {
                    let e: u32 = n.try_into().map_err(|_| err(col, "exponent too large"))?;
                    Ok(Expr::Pow(Box::new(base), e))
                }
                _ => Err(err(col, "expected a non-negative integer exponent")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, PolyError> {
        let col = self.col();
        match self.bump() {
            Some((Tok::Int(n), _)) => {
                if let Some(Tok::Slash) = self.peek() {
                    self.bump();
                    let dcol = self.col();
                    match self.bump() {
                        Some((Tok::Int(d), _)) if !d.is_zero() => {
                            Ok(Expr::Num(BigRational::new(n, d)))
                        }
                        _ => Err(err(dcol, "expected a non-zero integer denominator")),
                    }
                } else {
                    Ok(Expr::Num(BigRational::from_integer(n)))
                }
            }
            Some((Tok::Ident(name), c)) => Ok(Expr::Sym { name, column: c }),
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                let rcol = self.col();
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    _ => Err(err(rcol, "expected `)`")),
                }
            }
            Some((t, c)) => Err(err(c, format!("unexpected token {t:?}"))),
            None => Err(err(col, "unexpected end of input")),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, PolyError> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err(err(1, "empty expression"));
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end_col: src.chars().count() + 1,
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(err(p.col(), "trailing input"));
    }
    Ok(e)
}

/// A commutative-or-graded ring that parsed expressions can be evaluated in.
pub trait Evaluator {
    type Elem: Clone;
    fn constant(&self, c: BigRational) -> Self::Elem;
    fn symbol(&self, name: &str) -> Option<Self::Elem>;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
}

pub fn evaluate<E: Evaluator>(ev: &E, e: &Expr) -> Result<E::Elem, PolyError> {
    Ok(match e {
        Expr::Num(c) => ev.constant(c.clone()),
        Expr::Sym { name, column } => ev
            .symbol(name)
            .ok_or_else(|| err(*column, format!("unknown symbol `{name}`")))?,
        Expr::Add(a, b) => ev.add(&evaluate(ev, a)?, &evaluate(ev, b)?),
        Expr::Sub(a, b) => {
            let nb = ev.neg(&evaluate(ev, b)?);
            ev.add(&evaluate(ev, a)?, &nb)
        }
        Expr::Mul(a, b) => ev.mul(&evaluate(ev, a)?, &evaluate(ev, b)?),
        Expr::Neg(a) => ev.neg(&evaluate(ev, a)?),
        Expr::Pow(a, k) => {
            let base = evaluate(ev, a)?;
            let mut acc = ev.constant(BigRational::one());
            for _ in 0..*k {
                acc = ev.mul(&acc, &base);
            }
            acc
        }
    })
}
