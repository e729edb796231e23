//! Expression grammar for closed-form symbols.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | '+' unary | power
//! power  := atom ('^' unary)?            right associative
//! atom   := number | ident | ident '(' args ')' | '(' expr ')'
//! ```
//!
//! Identifiers are `x1..xn`, `xi1..xin`, `pi` and `i`. Functions are
//! `angle`, `exp`, `sin`, `cos` and `abs`; `angle(xi)` is `⟨ξ⟩` and
//! `angle(u, v, ...)` is `(1 + |u|² + |v|² + ...)^{1/2}`. A `#` starts a
//! comment running to the end of the line.

use std::sync::Arc;

use num_complex::Complex64;

use super::Symbol;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    X(usize),
    Xi(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// `⟨ξ⟩` over the whole frequency vector.
    AngleXi,
    Angle(Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X(d) => Complex64::new(x[*d], 0.0),
            Expr::Xi(d) => Complex64::new(xi[*d], 0.0),
            Expr::Neg(e) => -e.eval(x, xi),
            Expr::Bin(op, a, b) => {
                let (u, v) = (a.eval(x, xi), b.eval(x, xi));
                match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                    BinOp::Div => u / v,
                    BinOp::Pow => power(u, v),
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(x, xi);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Abs => Complex64::new(v.norm(), 0.0),
                }
            }
            Expr::AngleXi => {
                Complex64::new((1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt(), 0.0)
            }
            Expr::Angle(args) => {
                let s: f64 = args.iter().map(|a| a.eval(x, xi).norm_sqr()).sum();
                Complex64::new((1.0 + s).sqrt(), 0.0)
            }
        }
    }

    pub fn uses_x(&self) -> bool {
        match self {
            Expr::X(_) => true,
            Expr::Const(_) | Expr::Xi(_) | Expr::AngleXi => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_x(),
            Expr::Bin(_, a, b) => a.uses_x() || b.uses_x(),
            Expr::Angle(args) => args.iter().any(Expr::uses_x),
        }
    }
}

fn power(u: Complex64, v: Complex64) -> Complex64 {
    if v.im == 0.0 {
        if u.im == 0.0 && u.re >= 0.0 {
            return Complex64::new(u.re.powf(v.re), 0.0);
        }
        if v.re.fract() == 0.0 && v.re.abs() <= i32::MAX as f64 {
            return u.powi(v.re as i32);
        }
    }
    u.powc(v)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
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
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || c == '.' {
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
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                line: tl,
                column: tc,
                message: format!("malformed number '{text}'"),
            })?;
            Tok::Num(v)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(Error::Parse {
                        line: tl,
                        column: tc,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            }
        };
        col += i - start;
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, t: &Token, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            self.fail(&t, format!("expected {what}, found {}", describe(&t.tok)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.next();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn variable(&self, t: &Token, name: &str) -> Result<Option<Expr>> {
        let (prefix, ctor): (&str, fn(usize) -> Expr) = if let Some(rest) = name.strip_prefix("xi") {
            (rest, Expr::Xi)
        } else if let Some(rest) = name.strip_prefix('x') {
            (rest, Expr::X)
        } else {
            return Ok(None);
        };
        if prefix.is_empty() || !prefix.chars().all(|c| c.is_ascii_digit()) {
            return Ok(None);
        }
        let d: usize = prefix.parse().unwrap_or(0);
        if d == 0 || d > self.dim {
            return self.fail(
                t,
                format!("variable '{name}' outside dimension {}", self.dim),
            );
        }
        Ok(Some(ctor(d - 1)))
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Const(Complex64::new(*v, 0.0))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    return self.call(&t, name);
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(Complex64::new(std::f64::consts::PI, 0.0))),
                    "i" => return Ok(Expr::Const(Complex64::new(0.0, 1.0))),
                    _ => {}
                }
                match self.variable(&t, name)? {
                    Some(e) => Ok(e),
                    None => self.fail(&t, format!("unknown identifier '{name}'")),
                }
            }
            other => self.fail(&t, format!("expected a value, found {}", describe(other))),
        }
    }

    fn call(&mut self, t: &Token, name: &str) -> Result<Expr> {
        self.next();
        if name == "angle" {
            if let Tok::Ident(id) = &self.peek().tok {
                if id == "xi" && self.toks[self.pos + 1].tok == Tok::RParen {
                    self.next();
                    self.next();
                    return Ok(Expr::AngleXi);
                }
            }
            let mut args = vec![self.expr()?];
            while self.peek().tok == Tok::Comma {
                self.next();
                args.push(self.expr()?);
            }
            self.expect(Tok::RParen, "')'")?;
            return Ok(Expr::Angle(args));
        }
        let f = match name {
            "exp" => Func::Exp,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "abs" => Func::Abs,
            _ => return self.fail(t, format!("unknown function '{name}'")),
        };
        let arg = self.expr()?;
        self.expect(Tok::RParen, "')'")?;
        Ok(Expr::Call(f, Box::new(arg)))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Op(c) => format!("'{c}'"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::End => "end of input".into(),
    }
}

pub fn parse_expression(src: &str, dim: usize) -> Result<Expr> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidArgument(format!("dimension {dim} outside 1..=3")));
    }
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        dim,
    };
    if p.peek().tok == Tok::End {
        let t = p.peek().clone();
        return p.fail(&t, "empty expression");
    }
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.fail(&t, format!("unexpected {}", describe(&t.tok)));
    }
    Ok(e)
}

/// Parses `src` into a closed-form symbol. Expressions without `x` variables
/// are marked `x`-independent.
pub fn symbol_from_expression(src: &str, dim: usize, name: impl Into<String>) -> Result<Symbol> {
    let e = Arc::new(parse_expression(src, dim)?);
    if e.uses_x() {
        Ok(Symbol::closed(dim, name, move |x, xi| e.eval(x, xi)))
    } else {
        Ok(Symbol::multiplier(dim, name, move |xi| e.eval(&[0.0; 3][..xi.len()], xi)))
    }
}
