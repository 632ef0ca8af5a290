//! A small closed-form expression grammar for inline problem definitions:
//! sums, products, powers, `exp`/`sin`/`cos`, the constants `pi` and `e`,
//! and the variables `t`, `s` and `x1..x9` (`x` aliases `x1`). No general
//! code loading keeps configs reproducible data.
//!
//! Grammar (usual precedence, `^` binds tightest and associates right):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | name | name '(' expr ')' | '(' expr ')'
//! ```

use std::fmt;

#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Time,
    SecondTime,
    State(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

#[derive(Debug, Clone)]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.position)
    }
}

impl std::error::Error for ParseError {}

impl Expr {
    /// Evaluates with `t` (and optionally the inner integration time `s`)
    /// plus the state vector.
    pub fn eval(&self, t: f64, s: f64, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Time => t,
            Expr::SecondTime => s,
            Expr::State(i) => x.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Neg(e) => -e.eval(t, s, x),
            Expr::Add(a, b) => a.eval(t, s, x) + b.eval(t, s, x),
            Expr::Sub(a, b) => a.eval(t, s, x) - b.eval(t, s, x),
            Expr::Mul(a, b) => a.eval(t, s, x) * b.eval(t, s, x),
            Expr::Div(a, b) => a.eval(t, s, x) / b.eval(t, s, x),
            Expr::Pow(a, b) => a.eval(t, s, x).powf(b.eval(t, s, x)),
            Expr::Exp(e) => e.eval(t, s, x).exp(),
            Expr::Sin(e) => e.eval(t, s, x).sin(),
            Expr::Cos(e) => e.eval(t, s, x).cos(),
        }
    }

    /// Highest state index referenced, if any.
    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::State(i) => Some(*i),
            Expr::Const(_) | Expr::Time | Expr::SecondTime => None,
            Expr::Neg(e) | Expr::Exp(e) | Expr::Sin(e) | Expr::Cos(e) => e.max_state_index(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => match (a.max_state_index(), b.max_state_index()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn uses_second_time(&self) -> bool {
        match self {
            Expr::SecondTime => true,
            Expr::Const(_) | Expr::Time | Expr::State(_) => false,
            Expr::Neg(e) | Expr::Exp(e) | Expr::Sin(e) | Expr::Cos(e) => e.uses_second_time(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses_second_time() || b.uses_second_time(),
        }
    }
}

pub fn parse(input: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser { bytes: input.as_bytes(), pos: 0 };
    parser.skip_ws();
    let expr = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(parser.error("trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ParseError {
        ParseError { message: message.into(), position: self.pos }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'(') {
            let inner = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(inner);
        }
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.name(),
            _ => Err(self.error("expected a number, name or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self
                    .bytes
                    .get(self.pos + 1)
                    .is_some_and(|&n| n.is_ascii_digit() || n == b'+' || n == b'-')
            {
                self.pos += 2;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                break;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| ParseError {
            message: format!("bad number literal '{text}'"),
            position: start,
        })?;
        self.skip_ws();
        Ok(Expr::Const(value))
    }

    fn name(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        match name.as_str() {
            "t" => return Ok(Expr::Time),
            "s" => return Ok(Expr::SecondTime),
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "e" => return Ok(Expr::Const(std::f64::consts::E)),
            "x" => return Ok(Expr::State(0)),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(idx) = rest.parse::<usize>() {
                if (1..=9).contains(&idx) {
                    return Ok(Expr::State(idx - 1));
                }
            }
        }
        // function call
        if !self.eat(b'(') {
            return Err(ParseError {
                message: format!("unknown name '{name}'"),
                position: start,
            });
        }
        let arg = Box::new(self.expr()?);
        if !self.eat(b')') {
            return Err(self.error("expected ')' after function argument"));
        }
        match name.as_str() {
            "exp" => Ok(Expr::Exp(arg)),
            "sin" => Ok(Expr::Sin(arg)),
            "cos" => Ok(Expr::Cos(arg)),
            _ => Err(ParseError {
                message: format!("unknown function '{name}' (have exp, sin, cos)"),
                position: start,
            }),
        }
    }
}
