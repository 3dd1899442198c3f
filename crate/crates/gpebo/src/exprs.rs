//! Parser and evaluator for scalar expressions of time.
//!
//! The grammar is deliberately tiny — it spans exactly what scenario files
//! need for time-varying matrix entries and input signals:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 't' | 'sin' '(' expr ')' | 'cos' '(' expr ')' | '(' expr ')'
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! Binary operators associate left; unary minus binds tighter than `*`/`/`.
//! Whitespace is insignificant. Parsing never panics on malformed input; it
//! reports the byte offset and what was expected.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use core::fmt;

use crate::math;

/// Expression tree over `{constant, t, +, -, *, /, negate, sin, cos}`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeExpr {
    Const(f64),
    Time,
    Neg(Box<TimeExpr>),
    Add(Box<TimeExpr>, Box<TimeExpr>),
    Sub(Box<TimeExpr>, Box<TimeExpr>),
    Mul(Box<TimeExpr>, Box<TimeExpr>),
    Div(Box<TimeExpr>, Box<TimeExpr>),
    Sin(Box<TimeExpr>),
    Cos(Box<TimeExpr>),
}

/// Parse failure with the byte offset it occurred at.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    /// Input was empty or all whitespace.
    Empty,
    /// An unexpected byte; `expected` lists what would have been accepted.
    Unexpected {
        offset: usize,
        found: String,
        expected: &'static str,
    },
    /// Input ended where more tokens were required.
    UnexpectedEnd {
        offset: usize,
        expected: &'static str,
    },
    /// An identifier other than `t`, `sin`, `cos`.
    UnknownIdentifier { offset: usize, name: String },
    /// A numeric literal that does not scan as a float.
    BadNumber { offset: usize, text: String },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Empty => write!(f, "empty expression"),
            ParseError::Unexpected {
                offset,
                found,
                expected,
            } => {
                write!(
                    f,
                    "unexpected {found:?} at byte {offset}; expected {expected}"
                )
            }
            ParseError::UnexpectedEnd { offset, expected } => {
                write!(
                    f,
                    "unexpected end of input at byte {offset}; expected {expected}"
                )
            }
            ParseError::UnknownIdentifier { offset, name } => {
                write!(
                    f,
                    "unknown identifier {name:?} at byte {offset} (only t, sin, cos)"
                )
            }
            ParseError::BadNumber { offset, text } => {
                write!(f, "malformed number {text:?} at byte {offset}")
            }
        }
    }
}

impl core::error::Error for ParseError {}

/// Evaluation failure; the offending subexpression is carried along.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    DivisionByZero { expr: String },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DivisionByZero { expr } => write!(f, "division by zero in `{expr}`"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Parses an expression of `t`.
pub fn parse_expr(source: &str) -> Result<TimeExpr, ParseError> {
    let mut p = Parser {
        bytes: source.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(ParseError::Empty);
    }
    let expr = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(ParseError::Unexpected {
            offset: p.pos,
            found: p.current_fragment(),
            expected: "end of input, operator",
        });
    }
    Ok(expr)
}

impl TimeExpr {
    /// Evaluates at time `t`. Deterministic; fails only on division by an
    /// exactly zero denominator.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        Ok(match self {
            TimeExpr::Const(c) => *c,
            TimeExpr::Time => t,
            TimeExpr::Neg(e) => -e.eval(t)?,
            TimeExpr::Add(a, b) => a.eval(t)? + b.eval(t)?,
            TimeExpr::Sub(a, b) => a.eval(t)? - b.eval(t)?,
            TimeExpr::Mul(a, b) => a.eval(t)? * b.eval(t)?,
            TimeExpr::Div(a, b) => {
                let den = b.eval(t)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero {
                        expr: self.to_string(),
                    });
                }
                a.eval(t)? / den
            }
            TimeExpr::Sin(e) => math::sin(e.eval(t)?),
            TimeExpr::Cos(e) => math::cos(e.eval(t)?),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            TimeExpr::Add(..) | TimeExpr::Sub(..) => 1,
            TimeExpr::Mul(..) | TimeExpr::Div(..) => 2,
            TimeExpr::Neg(..) => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for TimeExpr {
    /// Prints a form that reparses to the same tree; literals use Rust's
    /// shortest round-tripping decimal rendering.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &TimeExpr, min_prec: u8) -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            TimeExpr::Const(c) => {
                if *c < 0.0 || c.is_sign_negative() {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            TimeExpr::Time => write!(f, "t"),
            TimeExpr::Neg(e) => {
                write!(f, "-")?;
                child(f, e, 3)
            }
            TimeExpr::Add(a, b) => {
                child(f, a, 1)?;
                write!(f, " + ")?;
                child(f, b, 2)
            }
            TimeExpr::Sub(a, b) => {
                child(f, a, 1)?;
                write!(f, " - ")?;
                child(f, b, 2)
            }
            TimeExpr::Mul(a, b) => {
                child(f, a, 2)?;
                write!(f, " * ")?;
                child(f, b, 3)
            }
            TimeExpr::Div(a, b) => {
                child(f, a, 2)?;
                write!(f, " / ")?;
                child(f, b, 3)
            }
            TimeExpr::Sin(e) => write!(f, "sin({e})"),
            TimeExpr::Cos(e) => write!(f, "cos({e})"),
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn current_fragment(&self) -> String {
        let rest = &self.bytes[self.pos..];
        let take = rest.len().min(8);
        String::from_utf8_lossy(&rest[..take]).into_owned()
    }

    fn expr(&mut self) -> Result<TimeExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = TimeExpr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = TimeExpr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<TimeExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = TimeExpr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = TimeExpr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<TimeExpr, ParseError> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(TimeExpr::Neg(Box::new(inner)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<TimeExpr, ParseError> {
        self.skip_ws();
        let Some(c) = self.peek() else {
            return Err(ParseError::UnexpectedEnd {
                offset: self.pos,
                expected: "number, t, sin, cos, '(' or '-'",
            });
        };
        match c {
            b'(' => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_close_paren()?;
                Ok(inner)
            }
            b'0'..=b'9' => self.number(),
            c if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            _ => Err(ParseError::Unexpected {
                offset: self.pos,
                found: self.current_fragment(),
                expected: "number, t, sin, cos, '(' or '-'",
            }),
        }
    }

    fn expect_close_paren(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b')') => {
                self.pos += 1;
                Ok(())
            }
            Some(_) => Err(ParseError::Unexpected {
                offset: self.pos,
                found: self.current_fragment(),
                expected: "')'",
            }),
            None => Err(ParseError::UnexpectedEnd {
                offset: self.pos,
                expected: "')'",
            }),
        }
    }

    fn number(&mut self) -> Result<TimeExpr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if !matches!(self.peek(), Some(b'0'..=b'9')) {
                return Err(ParseError::BadNumber {
                    offset: start,
                    text: String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned(),
                });
            }
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if !matches!(self.peek(), Some(b'0'..=b'9')) {
                // not an exponent after all (e.g. "2e" would be malformed,
                // but "2" followed by identifier is a trailing-input error)
                self.pos = mark;
            } else {
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
            }
        }
        let text = core::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| {
            ParseError::BadNumber {
                offset: start,
                text: self.current_fragment(),
            }
        })?;
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(TimeExpr::Const(v)),
            _ => Err(ParseError::BadNumber {
                offset: start,
                text: text.into(),
            }),
        }
    }

    fn identifier(&mut self) -> Result<TimeExpr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        match name {
            "t" => Ok(TimeExpr::Time),
            "sin" | "cos" => {
                self.skip_ws();
                if self.peek() != Some(b'(') {
                    return Err(ParseError::Unexpected {
                        offset: self.pos,
                        found: self.current_fragment(),
                        expected: "'(' after function name",
                    });
                }
                self.pos += 1;
                let arg = self.expr()?;
                self.expect_close_paren()?;
                Ok(if name == "sin" {
                    TimeExpr::Sin(Box::new(arg))
                } else {
                    TimeExpr::Cos(Box::new(arg))
                })
            }
            _ => Err(ParseError::UnknownIdentifier {
                offset: start,
                name: name.into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn eval(src: &str, t: f64) -> f64 {
        parse_expr(src).unwrap().eval(t).unwrap()
    }

    #[test]
    fn paper_entries_evaluate() {
        assert!((eval("2 - sin(t)", core::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        assert_eq!(eval("0", 123.0), 0.0);
        assert!((eval("-8 + cos(t)", 0.0) + 7.0).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_parens() {
        assert_eq!(eval("1+2*3", 0.0), 7.0);
        assert_eq!(eval("(2-sin(t))", 0.0), 2.0);
        let p = eval("sin(t)*sin(t)+cos(t)*cos(t)", 0.7);
        assert!((p - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn left_associativity() {
        assert_eq!(eval("8-4-2", 0.0), 2.0);
        assert_eq!(eval("8/4/2", 0.0), 1.0);
    }

    #[test]
    fn unary_minus_binds_tighter_than_mul() {
        assert_eq!(eval("-2*3", 0.0), -6.0);
        assert_eq!(eval("2*-3", 0.0), -6.0);
        assert_eq!(eval("--2", 0.0), 2.0);
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(eval("1e3", 0.0), 1000.0);
        assert_eq!(eval("2.5e-2", 0.0), 0.025);
        assert_eq!(eval("1E2", 0.0), 100.0);
    }

    #[test]
    fn unknown_identifier_is_named() {
        match parse_expr("tanh(t)") {
            Err(ParseError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "tanh");
                assert_eq!(offset, 0);
            }
            other => panic!("expected UnknownIdentifier, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_offset() {
        match parse_expr("1 + * 2") {
            Err(ParseError::Unexpected { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected Unexpected, got {other:?}"),
        }
        assert!(matches!(parse_expr(""), Err(ParseError::Empty)));
        assert!(matches!(
            parse_expr("(1"),
            Err(ParseError::UnexpectedEnd { .. })
        ));
    }

    #[test]
    fn division_by_zero_names_subexpression() {
        let e = parse_expr("1/(t-t)").unwrap();
        match e.eval(2.0) {
            Err(EvalError::DivisionByZero { expr }) => assert!(expr.contains("t - t")),
            other => panic!("expected DivisionByZero, got {other:?}"),
        }
    }

    fn arb_expr() -> impl Strategy<Value = TimeExpr> {
        let leaf = prop_oneof![
            (-1000.0..1000.0_f64).prop_map(TimeExpr::Const),
            Just(TimeExpr::Time),
        ];
        leaf.prop_recursive(6, 64, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| TimeExpr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| TimeExpr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| TimeExpr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| TimeExpr::Div(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|e| TimeExpr::Neg(Box::new(e))),
                inner.clone().prop_map(|e| TimeExpr::Sin(Box::new(e))),
                inner.prop_map(|e| TimeExpr::Cos(Box::new(e))),
            ]
        })
    }

    proptest! {
        /// Pretty-print then reparse: the round trip preserves the tree, so
        /// evaluation agrees exactly at any time.
        #[test]
        fn print_parse_round_trip(e in arb_expr(), ts in proptest::collection::vec(-50.0..50.0_f64, 1..8)) {
            let printed = e.to_string();
            let reparsed = parse_expr(&printed).unwrap();
            for t in ts {
                match (e.eval(t), reparsed.eval(t)) {
                    (Ok(a), Ok(b)) => {
                        let tol = 1e-15 * (1.0 + a.abs());
                        prop_assert!((a - b).abs() <= tol || (a.is_nan() && b.is_nan()));
                    }
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "eval mismatch: {a:?} vs {b:?}"),
                }
            }
        }

        /// The parser returns a value or an error on arbitrary input; it
        /// never panics or aborts.
        #[test]
        fn parser_total_on_arbitrary_bytes(s in "\\PC*") {
            let _ = parse_expr(&s);
        }

        #[test]
        fn parser_total_on_expression_like_soup(s in "[0-9a-z+*/().eE ta-]{0,40}") {
            let _ = parse_expr(&s);
        }
    }
}
