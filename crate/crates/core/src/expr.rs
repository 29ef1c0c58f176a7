//! Small arithmetic expression language for branch definitions.
//!
//! Grammar (usual precedence, left associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | '+' unary | atom
//! atom   := number | 'x' | 'pi' | func '(' expr (',' expr)? ')' | '(' expr ')'
//! func   := sin | cos | exp | pow
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::poly::Polynomial;

#[derive(Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a:?})"),
            Expr::Add(a, b) => write!(f, "({a:?} + {b:?})"),
            Expr::Sub(a, b) => write!(f, "({a:?} - {b:?})"),
            Expr::Mul(a, b) => write!(f, "({a:?} * {b:?})"),
            Expr::Div(a, b) => write!(f, "({a:?} / {b:?})"),
            Expr::Sin(a) => write!(f, "sin({a:?})"),
            Expr::Cos(a) => write!(f, "cos({a:?})"),
            Expr::Exp(a) => write!(f, "exp({a:?})"),
            Expr::Pow(a, b) => write!(f, "pow({a:?}, {b:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
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
                let value = text
                    .parse::<f64>()
                    .map_err(|_| Error::Expression(format!("bad number literal '{text}'")))?;
                out.push(Token::Num(value));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => {
                return Err(Error::Expression(format!(
                    "unexpected character '{other}' at offset {i}"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(Error::Expression(format!("expected {want:?}, found {t:?}"))),
            None => Err(Error::Expression(format!(
                "expected {want:?}, found end of input"
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
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
                Some(Token::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::Var),
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "sin" | "cos" | "exp" => {
                    self.expect(Token::LParen)?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Token::RParen)?;
                    Ok(match name.as_str() {
                        "sin" => Expr::Sin(arg),
                        "cos" => Expr::Cos(arg),
                        _ => Expr::Exp(arg),
                    })
                }
                "pow" => {
                    self.expect(Token::LParen)?;
                    let base = Box::new(self.expr()?);
                    self.expect(Token::Comma)?;
                    let exponent = Box::new(self.expr()?);
                    self.expect(Token::RParen)?;
                    Ok(Expr::Pow(base, exponent))
                }
                other => Err(Error::Expression(format!("unknown identifier '{other}'"))),
            },
            Some(t) => Err(Error::Expression(format!("unexpected token {t:?}"))),
            None => Err(Error::Expression("unexpected end of input".into())),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let mut parser = Parser { tokens, pos: 0 };
        let e = parser.expr()?;
        if let Some(t) = parser.peek() {
            return Err(Error::Expression(format!("trailing token {t:?}")));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                let e = b.eval(x);
                if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
        }
    }

    /// Exact polynomial form, when the expression is built from `x`,
    /// constants, `+ - *`, division by constants and `pow(_, n)` with a
    /// constant non-negative integer exponent.
    pub fn to_polynomial(&self) -> Option<Polynomial> {
        match self {
            Expr::Const(c) => Some(Polynomial::constant(*c)),
            Expr::Var => Some(Polynomial::monomial(1)),
            Expr::Neg(a) => Some(a.to_polynomial()?.scale(-1.0)),
            Expr::Add(a, b) => Some(a.to_polynomial()?.add(&b.to_polynomial()?)),
            Expr::Sub(a, b) => Some(a.to_polynomial()?.add(&b.to_polynomial()?.scale(-1.0))),
            Expr::Mul(a, b) => Some(a.to_polynomial()?.mul(&b.to_polynomial()?)),
            Expr::Div(a, b) => {
                let d = b.to_polynomial()?;
                match d.degree() {
                    Some(0) => Some(a.to_polynomial()?.scale(1.0 / d.coeffs()[0])),
                    _ => None,
                }
            }
            Expr::Pow(a, b) => {
                let e = b.to_polynomial()?;
                let k = match e.degree() {
                    None => 0.0,
                    Some(0) => e.coeffs()[0],
                    _ => return None,
                };
                if k < 0.0 || k.fract() != 0.0 || k > 64.0 {
                    return None;
                }
                let base = a.to_polynomial()?;
                Some((0..k as usize).fold(Polynomial::constant(1.0), |acc, _| acc.mul(&base)))
            }
            Expr::Sin(_) | Expr::Cos(_) | Expr::Exp(_) => {
                // constant-argument transcendental terms still fold
                if self.is_constant() {
                    Some(Polynomial::constant(self.eval(0.0)))
                } else {
                    None
                }
            }
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var => false,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }
}
