//! Scalar expressions in one variable `x`.
//!
//! Drift and diffusion coefficients can be supplied as text, e.g.
//! `cos(x)*exp(sin(x))`. The grammar is small enough that a hand-written
//! recursive-descent parser gives precise byte offsets in error messages:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          // right-associative
//! primary := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | abs | sqrt | tanh
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest exponent magnitude evaluated by repeated multiplication.
const MAX_INTEGER_POWER: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    pub const ALL: [Func; 6] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Abs,
        Func::Sqrt,
        Func::Tanh,
    ];
}

/// Abstract syntax tree. Immutable once parsed.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Pi,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("invalid number literal `{0}`")]
    InvalidNumber(String),
    #[error("function `{0}` must be followed by `(`")]
    MissingCallParen(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("power {base}^{exponent} is undefined over the reals")]
    InvalidPower { base: f64, exponent: f64 },
    #[error("result is not finite")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Plus => f.write_str("+"),
            Tok::Minus => f.write_str("-"),
            Tok::Star => f.write_str("*"),
            Tok::Slash => f.write_str("/"),
            Tok::Caret => f.write_str("^"),
            Tok::LParen => f.write_str("("),
            Tok::RParen => f.write_str(")"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset: start,
                    kind: ParseErrorKind::InvalidNumber(text.to_string()),
                })?;
                if !value.is_finite() {
                    return Err(ParseError {
                        offset: start,
                        kind: ParseErrorKind::InvalidNumber(text.to_string()),
                    });
                }
                out.push((start, Tok::Num(value)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedChar(ch),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.offset(),
            kind,
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => self.error(ParseErrorKind::UnexpectedToken(t.to_string())),
            None => self.error(ParseErrorKind::UnexpectedEnd),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::X),
                "pi" => Ok(Expr::Pi),
                _ => {
                    let func = Func::from_name(&name).ok_or(ParseError {
                        offset: at,
                        kind: ParseErrorKind::UnknownIdentifier(name.clone()),
                    })?;
                    if self.peek() != Some(&Tok::LParen) {
                        return Err(self.error(ParseErrorKind::MissingCallParen(name)));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Call(func, Box::new(arg)))
                }
            },
            Some(t) => Err(ParseError {
                offset: at,
                kind: ParseErrorKind::UnexpectedToken(t.to_string()),
            }),
            None => Err(ParseError {
                offset: at,
                kind: ParseErrorKind::UnexpectedEnd,
            }),
        }
    }
}

/// Parses `source` into an expression tree.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: source.len(),
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(e)
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn int_power(base: f64, n: i64) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n.unsigned_abs() {
        acc *= base;
    }
    if n < 0 {
        1.0 / acc
    } else {
        acc
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent.fract() == 0.0 && exponent.abs() <= MAX_INTEGER_POWER {
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        return finite(int_power(base, exponent as i64));
    }
    if base > 0.0 {
        finite((exponent * base.ln()).exp())
    } else if base == 0.0 {
        if exponent > 0.0 {
            Ok(0.0)
        } else {
            Err(EvalError::DivisionByZero)
        }
    } else {
        Err(EvalError::InvalidPower { base, exponent })
    }
}

impl Expr {
    /// Evaluates the expression at `x`. Any non-finite intermediate is an error.
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::X => finite(x),
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Neg(e) => Ok(-e.eval(x)?),
            Expr::Bin(op, l, r) => {
                let a = l.eval(x)?;
                let b = r.eval(x)?;
                match op {
                    BinOp::Add => finite(a + b),
                    BinOp::Sub => finite(a - b),
                    BinOp::Mul => finite(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::DivisionByZero)
                        } else {
                            finite(a / b)
                        }
                    }
                    BinOp::Pow => power(a, b),
                }
            }
            Expr::Call(func, arg) => {
                let v = arg.eval(x)?;
                match func {
                    Func::Sin => Ok(v.sin()),
                    Func::Cos => Ok(v.cos()),
                    Func::Exp => finite(v.exp()),
                    Func::Abs => Ok(v.abs()),
                    Func::Sqrt => {
                        if v < 0.0 {
                            Err(EvalError::SqrtOfNegative(v))
                        } else {
                            Ok(v.sqrt())
                        }
                    }
                    Func::Tanh => Ok(v.tanh()),
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            Expr::Num(_) | Expr::X | Expr::Pi | Expr::Call(..) => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Prints with the minimum parentheses needed to re-parse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => f.write_str("x"),
            Expr::Pi => f.write_str("pi"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_child(f, 3)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Bin(op, l, r) => {
                let (sym, left_min, right_min) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => (" * ", 2, 3),
                    BinOp::Div => (" / ", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                l.fmt_child(f, left_min)?;
                f.write_str(sym)?;
                r.fmt_child(f, right_min)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> f64 {
        parse(s).unwrap().eval(x).unwrap()
    }

    #[test]
    fn basic_values() {
        assert_eq!(ev("x", 3.5), 3.5);
        assert_eq!(ev("cos(x)*exp(sin(x))", 0.0), 1.0);
        assert_eq!(ev("-x^2", 2.0), -4.0);
        assert_eq!(ev("x + 2*3", 1.0), 7.0);
        let v = ev("exp(0.5*sin(x))", std::f64::consts::FRAC_PI_2);
        assert!((v - 1.6487212707).abs() < 1e-10);
    }

    // Hand-evaluated table (values checked with an independent calculator).
    #[test]
    fn precedence_table() {
        let table: &[(&str, f64, f64)] = &[
            ("-x^2", 2.0, -4.0),
            ("(-x)^2", 2.0, 4.0),
            ("2^3^2", 0.0, 512.0),
            ("(2^3)^2", 0.0, 64.0),
            ("2^-1", 0.0, 0.5),
            ("-2^-2", 0.0, -0.25),
            ("1 - 2 - 3", 0.0, -4.0),
            ("1 - (2 - 3)", 0.0, 2.0),
            ("8 / 4 / 2", 0.0, 1.0),
            ("8 / (4 / 2)", 0.0, 4.0),
            ("2 * 3 + 4", 0.0, 10.0),
            ("2 * (3 + 4)", 0.0, 14.0),
            ("--x", 3.0, 3.0),
            ("x - -x", 3.0, 6.0),
            ("-x * 3", 2.0, -6.0),
            ("abs(-x) + sqrt(x^2)", 3.0, 6.0),
            ("x^0.5", 4.0, 2.0),
            ("1.5e1 + .5", 0.0, 15.5),
            ("tanh(0) + cos(pi)", 0.0, -1.0),
            ("3*x^2 - 2*x + 1", 2.0, 9.0),
        ];
        for &(src, x, want) in table {
            let got = ev(src, x);
            assert!((got - want).abs() < 1e-12, "{src}: got {got}, want {want}");
        }
    }

    #[test]
    fn domain_errors() {
        let e = parse("1/(x-1)").unwrap();
        assert_eq!(e.eval(1.0), Err(EvalError::DivisionByZero));
        assert!(matches!(
            parse("sqrt(x)").unwrap().eval(-1.0),
            Err(EvalError::SqrtOfNegative(_))
        ));
        assert!(matches!(
            parse("x^0.5").unwrap().eval(-4.0),
            Err(EvalError::InvalidPower { .. })
        ));
        assert_eq!(parse("0^-1").unwrap().eval(0.0), Err(EvalError::DivisionByZero));
        assert_eq!(parse("exp(x)").unwrap().eval(1000.0), Err(EvalError::NonFinite));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let err = parse("1 + foo(x)").unwrap_err();
        assert_eq!(err.offset, 4);
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("foo".into()));

        let err = parse("2 * (x + 1").unwrap_err();
        assert_eq!(err.offset, 10);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);

        let err = parse("x $ 2").unwrap_err();
        assert_eq!(err.offset, 2);
        assert_eq!(err.kind, ParseErrorKind::UnexpectedChar('$'));

        let err = parse("sin x").unwrap_err();
        assert_eq!(err.offset, 4);

        assert!(parse("").is_err());
        assert!(parse("x x").is_err());
        assert!(parse("1e999").is_err());
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse(" x+ 2 *\t3 ").unwrap(), parse("x+2*3").unwrap());
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "-x^2",
            "(-x)^2",
            "2^3^2",
            "(2^3)^2",
            "1 - (2 - 3)",
            "a",
            "x - -x",
            "8 / (4 / 2)",
            "-(x + 1)",
            "exp(-x^2 / 2) * 0.1",
            "2^-x",
        ] {
            let Ok(tree) = parse(src) else { continue };
            let printed = tree.to_string();
            assert_eq!(parse(&printed).unwrap(), tree, "{src} -> {printed}");
        }
    }

    #[test]
    fn integer_powers_use_multiplication() {
        let e = parse("x^3").unwrap();
        assert_eq!(e.eval(1.1).unwrap(), 1.1 * 1.1 * 1.1);
        let e = parse("x^-2").unwrap();
        assert_eq!(e.eval(3.0).unwrap(), 1.0 / 9.0);
    }
}
