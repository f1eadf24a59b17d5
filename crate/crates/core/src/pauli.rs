//! Parser for two-qubit Pauli sums such as `"-1.0*XI - 1.0*IX"` or `"(0.5+0.5i)*XY + ZZ"`.
//!
//! The first letter of each pair acts on the edge's first vertex (the high bit of the
//! local basis index), the second letter on the second vertex.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::TwoQubitOperator;

fn pauli(c: char) -> Option<[[Complex64; 2]; 2]> {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match c {
        'I' => Some([[o, z], [z, o]]),
        'X' => Some([[z, o], [o, z]]),
        'Y' => Some([[z, -i], [i, z]]),
        'Z' => Some([[o, z], [z, -o]]),
        _ => None,
    }
}

/// Kronecker product `P ⊗ Q` in the `2·b_u + b_v` basis.
pub fn pauli_pair(p: char, q: char) -> Option<TwoQubitOperator> {
    let a = pauli(p)?;
    let b = pauli(q)?;
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = a[r >> 1][c >> 1] * b[r & 1][c & 1];
        }
    }
    Some(TwoQubitOperator::new(m))
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            chars: src.char_indices().collect(),
            pos: 0,
            src,
        }
    }

    fn offset(&self) -> usize {
        self.chars
            .get(self.pos)
            .map(|&(o, _)| o)
            .unwrap_or(self.src.len())
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Unsigned decimal literal, returned as text span.
    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.eat('.') {
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if self.pos == start {
            return None;
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if !self.eat('+') {
                self.eat('-');
            }
            let digits = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        text.parse().ok()
    }

    fn imag_unit(&mut self) -> bool {
        self.eat('i') || self.eat('j')
    }

    /// Real or imaginary literal without sign: `2.5`, `2.5i`, `i`.
    fn literal(&mut self) -> Result<Complex64> {
        let value = self.number();
        let imag = self.imag_unit();
        match (value, imag) {
            (Some(v), false) => Ok(Complex64::new(v, 0.0)),
            (Some(v), true) => Ok(Complex64::new(0.0, v)),
            (None, true) => Ok(Complex64::new(0.0, 1.0)),
            (None, false) => self.err("expected a number"),
        }
    }

    fn signed_literal(&mut self) -> Result<Complex64> {
        self.skip_ws();
        let neg = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        self.skip_ws();
        let v = self.literal()?;
        Ok(if neg { -v } else { v })
    }

    /// `( re [±] im i )` or any sum of literals in parentheses.
    fn paren_complex(&mut self) -> Result<Complex64> {
        let mut total = self.signed_literal()?;
        loop {
            self.skip_ws();
            if self.eat(')') {
                return Ok(total);
            }
            match self.peek() {
                Some('+') | Some('-') => total += self.signed_literal()?,
                _ => return self.err("expected '+', '-' or ')' in complex literal"),
            }
        }
    }

    fn coefficient(&mut self) -> Result<Complex64> {
        if self.eat('(') {
            self.paren_complex()
        } else {
            self.literal()
        }
    }

    fn pair(&mut self) -> Result<TwoQubitOperator> {
        let start = self.pos;
        let (Some(p), Some(q)) = (self.bump(), self.bump()) else {
            self.pos = start;
            return self.err("expected a Pauli pair such as XX");
        };
        match pauli_pair(p, q) {
            Some(op) => Ok(op),
            None => {
                self.pos = start;
                self.err(format!("invalid Pauli pair \"{p}{q}\" (letters must be I, X, Y or Z)"))
            }
        }
    }

    fn term(&mut self) -> Result<TwoQubitOperator> {
        self.skip_ws();
        let sign = if self.eat('-') {
            -1.0
        } else {
            self.eat('+');
            1.0
        };
        self.skip_ws();
        let starts_pauli = matches!(self.peek(), Some('I' | 'X' | 'Y' | 'Z'));
        let coeff = if starts_pauli {
            Complex64::new(1.0, 0.0)
        } else {
            let c = self.coefficient()?;
            self.skip_ws();
            if !self.eat('*') {
                return self.err("expected '*' between coefficient and Pauli pair");
            }
            self.skip_ws();
            c
        };
        Ok(self.pair()?.scale(coeff * sign))
    }

    fn expression(&mut self) -> Result<TwoQubitOperator> {
        let mut total = TwoQubitOperator::zero();
        self.skip_ws();
        if self.peek().is_none() {
            return self.err("empty expression");
        }
        let mut sign = 1.0;
        loop {
            let t = self.term()?;
            total = total.add(&t.scale(Complex64::new(sign, 0.0)));
            self.skip_ws();
            match self.bump() {
                None => return Ok(total),
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(_) => {
                    self.pos -= 1;
                    return self.err("expected '+' or '-' between terms");
                }
            }
        }
    }
}

/// Parses a sum of `coeff * PQ` terms into its 4×4 matrix.
pub fn parse_pauli_expression(expr: &str) -> Result<TwoQubitOperator> {
    Parser::new(expr).expression()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn xx_is_antidiagonal() {
        let op = parse_pauli_expression("1.0*XX").unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if r + col == 3 { c(1.0) } else { c(0.0) };
                assert_eq!(op.get(r, col), want);
            }
        }
    }

    #[test]
    fn transverse_field_edge() {
        let op = parse_pauli_expression("-1.0*XI - 1.0*IX").unwrap();
        let want = pauli_pair('X', 'I')
            .unwrap()
            .add(&pauli_pair('I', 'X').unwrap())
            .scale(c(-1.0));
        assert_eq!(op, want);
        // ⟨10|V|00⟩: flipping the first vertex.
        assert_eq!(op.get(2, 0), c(-1.0));
        assert_eq!(op.get(1, 0), c(-1.0));
        assert_eq!(op.get(3, 0), c(0.0));
    }

    #[test]
    fn rejects_unknown_letters_with_position() {
        match parse_pauli_expression("1.0*QQ") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn complex_coefficients() {
        let op = parse_pauli_expression("(0.5+0.25i)*ZZ + 2i*II").unwrap();
        assert_eq!(op.get(0, 0), Complex64::new(0.5, 2.25));
        assert_eq!(op.get(1, 1), Complex64::new(-0.5, 1.75));
        let op = parse_pauli_expression("XY").unwrap();
        // X on the high bit, Y on the low bit: ⟨00|X⊗Y|11⟩ = 1·(-i)
        assert_eq!(op.get(0, 3), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn malformed_inputs() {
        for bad in ["", "1.0*", "1.0 XX", "XX +", "(1+2i*XX", "XX YY", "1e*XX"] {
            assert!(parse_pauli_expression(bad).is_err(), "{bad:?} should fail");
        }
        assert!(parse_pauli_expression("1e-3*XX").is_ok());
    }
}
