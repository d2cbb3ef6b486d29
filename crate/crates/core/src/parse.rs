//! Text syntax for coefficients, points and polynomials.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary (("*" | "/") unary)*
//! unary  := ("-" | "+") unary | power
//! power  := atom ("^" integer)?
//! atom   := integer | decimal | "X" index | "x" index | "z" order | "(" expr ")"
//! ```
//!
//! `Xi` is the i-th variable (1-based) and `zn` is the primitive root of unity
//! exp(2πi/n). Division is allowed only by nonzero constants. Whitespace is
//! ignored. A point is a comma-separated list of constant expressions,
//! optionally wrapped in parentheses.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};
use crate::poly::MultiPoly;

/// Parsing context: variable count and the cyclotomic order symbols must divide.
#[derive(Clone, Copy, Debug)]
pub struct Context {
    pub nvars: usize,
    pub order: u64,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    ctx: Context,
}

type Poly = MultiPoly<Cyclotomic>;

const MAX_EXPONENT: u32 = 4096;

impl<'a> Parser<'a> {
    fn new(src: &'a str, ctx: Context) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            ctx,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::parse(self.pos + 1, msg))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn digits(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.src[start..self.pos]).ok()
        }
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let d = self.unary()?;
                    let c = match d.total_degree() {
                        Some(0) => d.constant_term(),
                        None => {
                            self.pos = at;
                            return self.err("division by zero");
                        }
                        Some(_) => {
                            self.pos = at;
                            return self.err("division by a non-constant polynomial");
                        }
                    };
                    let inv = c.inv()?;
                    acc = acc.scale(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Poly> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let Some(d) = self.digits() else {
                return self.err("expected a non-negative integer exponent");
            };
            let e: u32 = match d.parse() {
                Ok(e) if e <= MAX_EXPONENT => e,
                _ => return self.err(format!("exponent exceeds {MAX_EXPONENT}")),
            };
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly> {
        let n = self.ctx.nvars;
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let q = self.number()?;
                Ok(Poly::constant(n, Cyclotomic::from_rational(q)))
            }
            Some(b'X') | Some(b'x') => {
                let start = self.pos;
                self.pos += 1;
                let Some(d) = self.digits() else {
                    self.pos = start;
                    return self.err("expected a variable index after 'X'");
                };
                let i: usize = d.parse().unwrap_or(0);
                if i == 0 || i > n {
                    self.pos = start;
                    return self.err(format!("variable X{d} out of range (N = {n})"));
                }
                Ok(Poly::var(n, i - 1))
            }
            Some(b'z') => {
                let start = self.pos;
                self.pos += 1;
                let Some(d) = self.digits() else {
                    self.pos = start;
                    return self.err("expected a root-of-unity order after 'z'");
                };
                let m: u64 = d.parse().unwrap_or(0);
                if m == 0 || self.ctx.order % m != 0 {
                    self.pos = start;
                    return self.err(format!(
                        "symbol z{d} does not lie in the cyclotomic field of order {}",
                        self.ctx.order
                    ));
                }
                Ok(Poly::constant(n, Cyclotomic::zeta(m).promote(self.ctx.order)))
            }
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn number(&mut self) -> Result<BigRational> {
        let int = self.digits().unwrap_or("");
        let mut num: BigInt = if int.is_empty() {
            BigInt::zero()
        } else {
            int.parse().unwrap()
        };
        let mut den = BigInt::one();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let frac = self.digits().unwrap_or("");
            if int.is_empty() && frac.is_empty() {
                return self.err("malformed number");
            }
            for ch in frac.bytes() {
                num = num * 10 + (ch - b'0') as i64;
                den *= 10;
            }
        }
        Ok(BigRational::new(num, den))
    }

    fn finish(&mut self) -> Result<()> {
        if self.peek().is_some() {
            return self.err("unexpected trailing input");
        }
        Ok(())
    }
}

/// Parse a polynomial in `ctx.nvars` variables.
pub fn parse_poly(src: &str, ctx: Context) -> Result<MultiPoly<Cyclotomic>> {
    let mut p = Parser::new(src, ctx);
    if p.peek().is_none() {
        return p.err("empty expression");
    }
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parse a constant expression, returned as an element of order `order`
/// when it is not rational.
pub fn parse_scalar(src: &str, order: u64) -> Result<Cyclotomic> {
    let ctx = Context { nvars: 0, order };
    let p = parse_poly(src, ctx)?;
    Ok(p.constant_term())
}

/// Parse a comma-separated point.
pub fn parse_point(src: &str, order: u64) -> Result<Vec<Cyclotomic>> {
    let trimmed = src.trim();
    let (body, offset) = match trimmed.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        Some(inner) => (inner, src.find('(').unwrap() + 1),
        None => (src, 0),
    };
    let mut out = Vec::new();
    let mut start = 0usize;
    let bytes = body.as_bytes();
    let mut depth = 0i32;
    for i in 0..=bytes.len() {
        let at_end = i == bytes.len();
        if !at_end {
            match bytes[i] {
                b'(' => depth += 1,
                b')' => depth -= 1,
                _ => {}
            }
        }
        if at_end || (bytes[i] == b',' && depth == 0) {
            let piece = &body[start..i];
            let v = parse_scalar(piece, order).map_err(|e| match e {
                Error::Parse { line, column, message } => Error::Parse {
                    line,
                    column: column + offset + start,
                    message,
                },
                other => other,
            })?;
            out.push(v);
            start = i + 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(nvars: usize, order: u64) -> Context {
        Context { nvars, order }
    }

    #[test]
    fn round_trip_display() {
        let src = "X1^2 - X2^2 + (1/2)*z12^3*X1";
        let p = parse_poly(src, ctx(2, 12)).unwrap();
        let again = parse_poly(&p.to_string(), ctx(2, 12)).unwrap();
        assert_eq!(p, again);
        assert_eq!(p.num_terms(), 3);
    }

    #[test]
    fn arithmetic_in_coefficients() {
        let p = parse_poly("(z3 + z3^2) * X1", ctx(1, 3)).unwrap();
        assert_eq!(p, parse_poly("-X1", ctx(1, 3)).unwrap());
        let p = parse_poly("X1^2/2 + 0.25", ctx(1, 1)).unwrap();
        assert_eq!(p.to_string(), "(1/2)*X1^2 + (1/4)");
    }

    #[test]
    fn errors_carry_columns() {
        match parse_poly("X1 + z7", ctx(1, 4)) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_poly("X3", ctx(2, 1)).is_err());
        assert!(parse_poly("X1/X1", ctx(1, 1)).is_err());
        assert!(parse_poly("X1 +", ctx(1, 1)).is_err());
        assert!(parse_poly("1/0", ctx(1, 1)).is_err());
    }

    #[test]
    fn points() {
        let p = parse_point("3/2, 5", 1).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0], Cyclotomic::from_rational(BigRational::new(3.into(), 2.into())));
        let p = parse_point("(z3, 2)", 3).unwrap();
        assert_eq!(p[0], Cyclotomic::zeta(3));
        match parse_point("1, 2x", 1) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("unexpected {other:?}"),
        }
    }
}
