use std::f64::consts::PI;

use super::{Expr, Func};
use crate::error::ParseError;

pub(super) fn parse_list(text: &str, variables: &[String]) -> Result<Vec<Expr>, ParseError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        variables,
    };
    let mut outputs = Vec::new();
    loop {
        parser.skip_ws();
        if parser.at_end() {
            break;
        }
        outputs.push(parser.expr()?);
        parser.skip_ws();
        match parser.peek() {
            None => break,
            Some(b';') => parser.pos += 1,
            Some(_) => return Err(parser.syntax("expected `;` or end of input")),
        }
    }
    if outputs.is_empty() {
        return Err(ParseError::NoOutputs);
    }
    Ok(outputs)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    variables: &'a [String],
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn eat(&mut self, byte: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(byte) {
            self.pos += 1;
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
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(match self.unary()? {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let exponent = self.integer_exponent()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            return Err(self.syntax("chained exponents need parentheses"));
        }
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let parenthesised = self.eat(b'(');
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("exponent must be an integer literal"));
        }
        if matches!(self.peek(), Some(b'.' | b'e' | b'E')) {
            return Err(self.syntax("exponent must be an integer literal"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let magnitude: i32 = digits.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "exponent out of range".into(),
        })?;
        if parenthesised && !self.eat(b')') {
            return Err(self.syntax("expected `)`"));
        }
        Ok(if negative { -magnitude } else { magnitude })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name =
                    std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
                self.skip_ws();
                if self.peek() == Some(b'(') {
                    let func =
                        Func::from_name(name).ok_or_else(|| ParseError::UnsupportedFunction {
                            name: name.to_string(),
                            offset: start,
                        })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.syntax("expected `)`"));
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                if let Some(i) = self.variables.iter().position(|v| v == name) {
                    Ok(Expr::Var(i))
                } else if name == "pi" {
                    Ok(Expr::Const(PI))
                } else {
                    Err(ParseError::UnknownVariable {
                        name: name.to_string(),
                        offset: start,
                    })
                }
            }
            Some(_) => Err(self.syntax("expected a number, variable, function or `(`")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Expr::Const)
            .ok_or(ParseError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            })
    }
}
