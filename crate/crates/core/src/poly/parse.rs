//! Text syntax for polynomials: `3*x1^2*x2 - x3 + 1`, `(x1 + x2)^2`.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := ('-' factor) | atom ('^' integer)?
//! atom   := number | 'x' integer | '(' expr ')'
//! ```

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::scalar::Scalar;

/// Parse `text` as a polynomial in `num_vars` variables named
/// `x{first_index}` .. `x{first_index + num_vars - 1}`.
pub fn parse_polynomial<T: Scalar>(text: &str, num_vars: usize, first_index: usize) -> Result<Polynomial<T>> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        num_vars,
        first_index,
    };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.err(format!("unexpected '{}'", p.chars[p.pos])));
    }
    Ok(out)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    num_vars: usize,
    first_index: usize,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expr<T: Scalar>(&mut self) -> Result<Polynomial<T>> {
        let mut acc = match self.peek() {
            Some('+') => {
                self.pos += 1;
                self.term()?
            }
            Some('-') => {
                self.pos += 1;
                self.term()?.scale(&-T::one())
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some('-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term<T: Scalar>(&mut self) -> Result<Polynomial<T>> {
        let mut acc = self.factor()?;
        while self.peek() == Some('*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn factor<T: Scalar>(&mut self) -> Result<Polynomial<T>> {
        if self.peek() == Some('-') {
            self.pos += 1;
            return Ok(self.factor()?.scale(&-T::one()));
        }
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            self.skip_ws();
            let e = self.integer().ok_or_else(|| self.err("expected an integer exponent"))?;
            let e = u32::try_from(e).map_err(|_| self.err("exponent too large"))?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom<T: Scalar>(&mut self) -> Result<Polynomial<T>> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some('x') => {
                let start = self.pos;
                self.pos += 1;
                let idx = self
                    .integer()
                    .ok_or_else(|| self.err("expected a variable index after 'x'"))?;
                let idx = idx as usize;
                if idx < self.first_index || idx >= self.first_index + self.num_vars {
                    self.pos = start;
                    return Err(self.err(format!(
                        "variable x{} out of range x{}..x{}",
                        idx,
                        self.first_index,
                        self.first_index + self.num_vars.max(1) - 1
                    )));
                }
                Ok(Polynomial::var(self.num_vars, idx - self.first_index))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let v: T = self.number()?;
                Ok(Polynomial::constant(self.num_vars, v))
            }
            Some(c) => Err(self.err(format!("unexpected '{c}'"))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn integer(&mut self) -> Option<u64> {
        let start = self.pos;
        let mut v: u64 = 0;
        while let Some(c) = self.chars.get(self.pos).and_then(|c| c.to_digit(10)) {
            v = v.checked_mul(10)?.checked_add(c as u64)?;
            self.pos += 1;
        }
        (self.pos > start).then_some(v)
    }

    /// Decimal literal, converted exactly as `mantissa * 10^exp`.
    fn number<T: Scalar>(&mut self) -> Result<T> {
        let start = self.pos;
        let ten = T::from_u32(10).expect("10");
        let mut mant = T::zero();
        let mut scale: i64 = 0;
        let mut digits = 0;
        let mut seen_dot = false;
        while let Some(&c) = self.chars.get(self.pos) {
            if let Some(d) = c.to_digit(10) {
                mant = mant * ten.clone() + T::from_u32(d).expect("digit");
                if seen_dot {
                    scale -= 1;
                }
                digits += 1;
            } else if c == '.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits == 0 {
            self.pos = start;
            return Err(self.err("malformed number"));
        }
        if matches!(self.chars.get(self.pos), Some('e') | Some('E')) {
            self.pos += 1;
            let sign = match self.chars.get(self.pos) {
                Some('-') => {
                    self.pos += 1;
                    -1
                }
                Some('+') => {
                    self.pos += 1;
                    1
                }
                _ => 1,
            };
            let e = self.integer().ok_or_else(|| self.err("malformed exponent"))?;
            if e > 400 {
                return Err(self.err("exponent too large"));
            }
            scale += sign * e as i64;
        }
        let mut pow = T::one();
        for _ in 0..scale.unsigned_abs() {
            pow = pow * ten.clone();
        }
        Ok(if scale >= 0 { mant * pow } else { mant / pow })
    }
}
