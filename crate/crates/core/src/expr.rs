//! Parser and evaluator for the coefficient expressions used in config
//! files (c₊, c₋, h as functions of x and, in 2D, y).
//!
//! Grammar (EBNF, whitespace-insensitive):
//!
//! ```text
//! expr       = ifexpr | sum ;
//! ifexpr     = "if" comparison "then" expr "else" expr ;
//! comparison = sum ( "<" | "<=" | ">" | ">=" ) sum ;
//! sum        = product { ("+" | "-") product } ;
//! product    = unary { ("*" | "/") unary } ;
//! unary      = "-" unary | power ;
//! power      = atom [ "^" unary ] ;            (* right-associative *)
//! atom       = number | "pi" | "x" | "y"
//!            | function "(" expr { "," expr } ")"
//!            | "(" expr ")" ;
//! function   = "sin" | "cos" | "exp" | "ln" | "abs" | "min" | "max" ;
//! ```
//!
//! Unary minus binds looser than `^`, so `-2^2 = -4`.  Guard comparisons
//! are strict or non-strict; `if x < 0 … else …` takes the else branch at
//! x = 0 exactly (half-open pieces).  `pi` is folded to a literal at parse
//! time.  Conjunction of guards is expressed by nesting if-expressions.

use crate::mesh::{Field, Mesh};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("`{name}` expects {expected} argument(s), got {got} (offset {offset})")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("variable `y` used on a 1-dimensional mesh")]
    DimensionMismatch,
    #[error("domain error at {coordinate}: {message}")]
    Domain { coordinate: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

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
    Ln,
    Abs,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }
}

/// Abstract syntax tree of a coefficient expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    If {
        lhs: Box<Expr>,
        cmp: Cmp,
        rhs: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
}

impl Expr {
    /// True if the expression reads the variable `y`.
    pub fn uses_y(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == Var::Y,
            Expr::Neg(e) => e.uses_y(),
            Expr::Bin(_, a, b) => a.uses_y() || b.uses_y(),
            Expr::Call(_, args) => args.iter().any(Expr::uses_y),
            Expr::If {
                lhs,
                rhs,
                then,
                els,
                ..
            } => lhs.uses_y() || rhs.uses_y() || then.uses_y() || els.uses_y(),
        }
    }

    /// Evaluates at a point.  Returns a domain error for ln of a
    /// nonpositive argument or a non-finite result.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, String> {
        let v = self.eval_inner(x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite result {v}"))
        }
    }

    fn eval_inner(&self, x: f64, y: f64) -> Result<f64, String> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Neg(e) => -e.eval_inner(x, y)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval_inner(x, y)?, b.eval_inner(x, y)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, args) => {
                let a0 = args[0].eval_inner(x, y)?;
                match f {
                    Func::Sin => a0.sin(),
                    Func::Cos => a0.cos(),
                    Func::Exp => a0.exp(),
                    Func::Abs => a0.abs(),
                    Func::Ln => {
                        if a0 <= 0.0 {
                            return Err(format!("ln of nonpositive value {a0}"));
                        }
                        a0.ln()
                    }
                    Func::Min => a0.min(args[1].eval_inner(x, y)?),
                    Func::Max => a0.max(args[1].eval_inner(x, y)?),
                }
            }
            Expr::If {
                lhs,
                cmp,
                rhs,
                then,
                els,
            } => {
                if cmp.holds(lhs.eval_inner(x, y)?, rhs.eval_inner(x, y)?) {
                    then.eval_inner(x, y)?
                } else {
                    els.eval_inner(x, y)?
                }
            }
        })
    }
}

/// Canonical fully parenthesized printer; `parse(print(e))` evaluates
/// identically to `e`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::If {
                lhs,
                cmp,
                rhs,
                then,
                els,
            } => write!(
                f,
                "(if {lhs} {} {rhs} then {then} else {els})",
                cmp.symbol()
            ),
        }
    }
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
    Comma,
    Lt,
    Le,
    Gt,
    Ge,
}

struct Lexer<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            b'<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    toks.push((Tok::Le, i));
                    i += 2;
                } else {
                    toks.push((Tok::Lt, i));
                    i += 1;
                }
            }
            b'>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    toks.push((Tok::Ge, i));
                    i += 2;
                } else {
                    toks.push((Tok::Gt, i));
                    i += 1;
                }
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{s}`"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", &text[i..].chars().next().unwrap()),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.lexer.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.lexer
            .toks
            .get(self.pos)
            .map_or(self.lexer.text.len(), |(_, o)| *o)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.lexer.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn err(&self, message: String) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ExprError> {
        if self.at_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        if self.at_keyword("if") {
            self.pos += 1;
            let lhs = self.sum()?;
            let cmp = match self.bump() {
                Some(Tok::Lt) => Cmp::Lt,
                Some(Tok::Le) => Cmp::Le,
                Some(Tok::Gt) => Cmp::Gt,
                Some(Tok::Ge) => Cmp::Ge,
                _ => {
                    self.pos = self.pos.saturating_sub(1);
                    return Err(self.err("expected comparison operator in guard".into()));
                }
            };
            let rhs = self.sum()?;
            self.expect_keyword("then")?;
            let then = self.expr()?;
            self.expect_keyword("else")?;
            let els = self.expr()?;
            Ok(Expr::If {
                lhs: Box::new(lhs),
                cmp,
                rhs: Box::new(rhs),
                then: Box::new(then),
                els: Box::new(els),
            })
        } else {
            self.sum()
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let r = self.product()?;
                    acc = Expr::Bin(BinOp::Add, Box::new(acc), Box::new(r));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let r = self.product()?;
                    acc = Expr::Bin(BinOp::Sub, Box::new(acc), Box::new(r));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let r = self.unary()?;
                    acc = Expr::Bin(BinOp::Mul, Box::new(acc), Box::new(r));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let r = self.unary()?;
                    acc = Expr::Bin(BinOp::Div, Box::new(acc), Box::new(r));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.unary()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "sin" | "cos" | "exp" | "ln" | "abs" | "min" | "max" => {
                    let func = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "ln" => Func::Ln,
                        "abs" => Func::Abs,
                        "min" => Func::Min,
                        _ => Func::Max,
                    };
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    if args.len() != func.arity() {
                        return Err(ExprError::Arity {
                            offset,
                            name,
                            expected: func.arity(),
                            got: args.len(),
                        });
                    }
                    Ok(Expr::Call(func, args))
                }
                "if" | "then" | "else" => Err(ExprError::Syntax {
                    offset,
                    message: format!("`{name}` keyword not valid here"),
                }),
                _ => Err(ExprError::UnknownIdentifier { offset, name }),
            },
            Some(other) => Err(ExprError::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
            None => Err(ExprError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parses an expression; errors carry byte offsets into `text`.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser {
        lexer: Lexer { text, toks },
        pos: 0,
    };
    let e = p.expr()?;
    if p.pos != p.lexer.toks.len() {
        return Err(p.err("trailing input".into()));
    }
    Ok(e)
}

/// Evaluates the expression at every interior node of the mesh.
pub fn sample(expr: &Expr, mesh: &Arc<Mesh>) -> Result<Field, ExprError> {
    if mesh.dim() == 1 && expr.uses_y() {
        return Err(ExprError::DimensionMismatch);
    }
    let mut values = Vec::with_capacity(mesh.interior_count());
    for i in 0..mesh.interior_count() {
        let [x, y] = mesh.coord(i);
        match expr.eval(x, y) {
            Ok(v) => values.push(v),
            Err(message) => {
                let coordinate = if mesh.dim() == 1 {
                    format!("x = {x}")
                } else {
                    format!("(x, y) = ({x}, {y})")
                };
                return Err(ExprError::Domain {
                    coordinate,
                    message,
                });
            }
        }
    }
    Ok(Field::from_values(mesh, values).expect("finite values checked during evaluation"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(text: &str, x: f64) -> f64 {
        parse(text).unwrap().eval(x, 0.0).unwrap()
    }

    #[test]
    fn precedence_is_conventional() {
        assert_eq!(ev("2+3*4", 0.0), 14.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("2^3^2", 0.0), 512.0); // right-associative
        assert_eq!(ev("6/3/2", 0.0), 1.0); // left-associative
        assert_eq!(ev("1-2-3", 0.0), -4.0);
        assert_eq!(ev("(1-2)-3", 0.0), -4.0);
        assert_eq!(ev("2*x^2", 3.0), 18.0);
    }

    #[test]
    fn trigonometric_identity_at_zero() {
        assert_eq!(ev("cos(x) - sin(x)^2", 0.0), 1.0);
    }

    #[test]
    fn guard_takes_else_branch_at_the_boundary() {
        let e = parse("if x < 0 then cos(x) - sin(x)^2 else 0").unwrap();
        assert_eq!(e.eval(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(e.eval(0.0, 0.0).unwrap(), 0.0); // x < 0 is false at 0
        assert!((e.eval(-1.0, 0.0).unwrap() - ((-1.0f64).cos() - (-1.0f64).sin().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn named_constant_and_functions() {
        assert!((ev("sin(pi)", 0.0)).abs() < 1e-15);
        assert_eq!(ev("min(2, x)", 5.0), 2.0);
        assert_eq!(ev("max(2, x)", 5.0), 5.0);
        assert_eq!(ev("abs(-3)", 0.0), 3.0);
        assert!((ev("ln(exp(2))", 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_byte_offsets() {
        match parse("1 +") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse("2 * (x") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse("sin(x") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
        match parse("foo(x)") {
            Err(ExprError::UnknownIdentifier { offset, name }) => {
                assert_eq!(offset, 0);
                assert_eq!(name, "foo");
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
        match parse("min(1)") {
            Err(ExprError::Arity {
                expected: 2,
                got: 1,
                ..
            }) => {}
            other => panic!("expected arity error, got {other:?}"),
        }
        match parse("sin(1, 2)") {
            Err(ExprError::Arity {
                expected: 1,
                got: 2,
                ..
            }) => {}
            other => panic!("expected arity error, got {other:?}"),
        }
        match parse("1 @ 2") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn sampling_matches_pointwise_evaluation() {
        use crate::mesh::Mesh;
        use std::f64::consts::PI;
        let m = Mesh::line(-2.0 * PI, 2.0 * PI, 99).unwrap();

        let zero = sample(&parse("0").unwrap(), &m).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));

        // Piecewise weight that is cos(x)+1 on [0, 2π) and 0 below 0.
        let cp = sample(&parse("if x < 0 then 0 else cos(x) + 1").unwrap(), &m).unwrap();
        for i in 0..m.interior_count() {
            let x = m.coord(i)[0];
            let want = if x < 0.0 { 0.0 } else { x.cos() + 1.0 };
            assert_eq!(cp[i], want, "node {i} at x = {x}");
        }
    }

    #[test]
    fn domain_errors_name_the_node_coordinate() {
        use crate::mesh::Mesh;
        let m = Mesh::line(-1.0, 1.0, 9).unwrap();
        match sample(&parse("ln(x)").unwrap(), &m) {
            Err(ExprError::Domain {
                coordinate,
                message,
            }) => {
                assert!(coordinate.starts_with("x = -0.8"), "{coordinate}");
                assert!(message.contains("nonpositive"), "{message}");
            }
            other => panic!("expected domain error, got {other:?}"),
        }
        // y is not available on an interval
        assert!(matches!(
            sample(&parse("y").unwrap(), &m),
            Err(ExprError::DimensionMismatch)
        ));
    }

    #[test]
    fn division_by_zero_is_reported_not_propagated() {
        let e = parse("1 / x").unwrap();
        assert!(e.eval(0.0, 0.0).is_err());
        assert_eq!(e.eval(2.0, 0.0).unwrap(), 0.5);
    }

    // Strategy for random small ASTs used by the printer round-trip check.
    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-1000.0f64..1000.0).prop_map(Expr::Num),
            Just(Expr::Var(Var::X)),
            Just(Expr::Var(Var::Y)),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
                (
                    prop_oneof![
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Exp),
                        Just(Func::Abs)
                    ],
                    inner.clone()
                )
                    .prop_map(|(f, a)| Expr::Call(f, vec![a])),
                (
                    prop_oneof![Just(Func::Min), Just(Func::Max)],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(f, a, b)| Expr::Call(f, vec![a, b])),
                (
                    inner.clone(),
                    prop_oneof![Just(Cmp::Lt), Just(Cmp::Le), Just(Cmp::Gt), Just(Cmp::Ge)],
                    inner.clone(),
                    inner.clone(),
                    inner
                )
                    .prop_map(|(l, c, r, t, e)| Expr::If {
                        lhs: Box::new(l),
                        cmp: c,
                        rhs: Box::new(r),
                        then: Box::new(t),
                        els: Box::new(e),
                    }),
            ]
        })
    }

    proptest! {
        /// Printing and re-parsing preserves evaluation exactly (same tree,
        /// same floating-point operations) at random points.
        #[test]
        fn printer_round_trip(e in arb_expr(), pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 100)) {
            let printed = e.to_string();
            let back = parse(&printed)
                .unwrap_or_else(|err| panic!("reparse of `{printed}` failed: {err}"));
            for (x, y) in pts {
                let a = e.eval(x, y);
                let b = back.eval(x, y);
                match (a, b) {
                    (Ok(u), Ok(v)) => prop_assert!(
                        u == v || (u.is_nan() && v.is_nan()),
                        "`{printed}` at ({x}, {y}): {u} vs {v}"
                    ),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "mismatch at ({x}, {y}): {a:?} vs {b:?}"),
                }
            }
        }
    }
}
