//! Tiny arithmetic-expression parser for custom nonlinearities.
//!
//! Grammar (usual precedence, `^` binds tightest and is right-associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | 's' | 'abs' '(' expr ')' | 'sgn' '(' expr ')' | '(' expr ')'
//! ```
//!
//! The single free variable is `s`. `sgn` has sgn(0) = 0.

use crate::error::{GpmeError, Result};
use crate::num::sgn;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Sgn(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var => s,
            Expr::Neg(e) => -e.eval(s),
            Expr::Add(a, b) => a.eval(s) + b.eval(s),
            Expr::Sub(a, b) => a.eval(s) - b.eval(s),
            Expr::Mul(a, b) => a.eval(s) * b.eval(s),
            Expr::Div(a, b) => a.eval(s) / b.eval(s),
            Expr::Pow(a, b) => a.eval(s).powf(b.eval(s)),
            Expr::Abs(e) => e.eval(s).abs(),
            Expr::Sgn(e) => sgn(e.eval(s)),
        }
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            src,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("trailing input"));
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Var,
    Abs,
    Sgn,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
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
            '^' => {
                out.push(Token::Caret);
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
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent suffix like 1e-3.
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let n: f64 = text
                    .parse()
                    .map_err(|_| GpmeError::Parse(format!("bad number `{text}` in `{src}`")))?;
                out.push(Token::Num(n));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                match &src[start..i] {
                    "s" => out.push(Token::Var),
                    "abs" => out.push(Token::Abs),
                    "sgn" => out.push(Token::Sgn),
                    other => {
                        return Err(GpmeError::Parse(format!(
                            "unknown identifier `{other}` in `{src}` (allowed: s, abs, sgn)"
                        )))
                    }
                }
            }
            other => {
                return Err(GpmeError::Parse(format!(
                    "unexpected character `{other}` in `{src}`"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn error(&self, what: &str) -> GpmeError {
        GpmeError::Parse(format!("{what} at token {} in `{}`", self.pos, self.src))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token, what: &str) -> Result<()> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(what))
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
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.pos += 1;
            return Ok(Expr::Pow(Box::new(base), Box::new(self.factor()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(n)) => Ok(Expr::Num(n)),
            Some(Token::Var) => Ok(Expr::Var),
            Some(Token::Abs) => {
                self.expect(Token::LParen, "expected `(` after abs")?;
                let e = self.expr()?;
                self.expect(Token::RParen, "expected `)`")?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Some(Token::Sgn) => {
                self.expect(Token::LParen, "expected `(` after sgn")?;
                let e = self.expr()?;
                self.expect(Token::RParen, "expected `)`")?;
                Ok(Expr::Sgn(Box::new(e)))
            }
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen, "expected `)`")?;
                Ok(e)
            }
            _ => Err(self.error("expected number, `s`, function or `(`")),
        }
    }
}
