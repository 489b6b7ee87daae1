//! The coordinate-expression language for metric components and test
//! functions.
//!
//! Grammar (standard precedence, left-associative sums and products):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' '-'? integer)?
//! atom   := number | symbol | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt
//! ```
//!
//! Symbols must be declared up front as coordinates or parameters; anything
//! else is a parse-time error. Exponents are integer literals with |k| <= 16.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::jet::{Jet, JetError, JetSpace};
use crate::scalar::Real;

pub const MAX_EXPONENT: i32 = 16;
const FUNCTIONS: [&str; 4] = ["sin", "cos", "exp", "sqrt"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("exponent {value} out of range (|k| <= {MAX_EXPONENT}) at byte {offset}")]
    ExponentRange { value: i64, offset: usize },
    #[error("declared names must be distinct and must not shadow function names: `{name}`")]
    BadDeclaration { name: String },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("division by zero in `{snippet}`")]
    DivisionByZero { snippet: String },
    #[error("sqrt of a nonpositive value in `{snippet}`")]
    SqrtDomain { snippet: String },
    #[error("point has {got} coordinates, expression declares {want}")]
    PointDimension { got: usize, want: usize },
    #[error("parameter `{name}` is not bound")]
    UnboundParameter { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// One AST node; spans index into the original source text and are ignored
/// by equality so that pretty-printed round trips compare structurally.
#[derive(Debug, Clone)]
pub enum Node {
    Number(f64, Span),
    Coord(usize, Span),
    Param(usize, Span),
    Neg(Box<Node>, Span),
    Binary(BinOp, Box<Node>, Box<Node>, Span),
    Pow(Box<Node>, i32, Span),
    Call(Func, Box<Node>, Span),
}

pub type Span = (u32, u32);

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        use Node::*;
        match (self, other) {
            (Number(a, _), Number(b, _)) => a == b,
            (Coord(a, _), Coord(b, _)) => a == b,
            (Param(a, _), Param(b, _)) => a == b,
            (Neg(a, _), Neg(b, _)) => a == b,
            (Binary(op, a, b, _), Binary(op2, a2, b2, _)) => op == op2 && a == a2 && b == b2,
            (Pow(a, k, _), Pow(b, k2, _)) => k == k2 && a == b,
            (Call(f, a, _), Call(f2, b, _)) => f == f2 && a == b,
            _ => false,
        }
    }
}

impl Node {
    fn span(&self) -> Span {
        match self {
            Node::Number(_, s)
            | Node::Coord(_, s)
            | Node::Param(_, s)
            | Node::Neg(_, s)
            | Node::Binary(_, _, _, s)
            | Node::Pow(_, _, s)
            | Node::Call(_, _, s) => *s,
        }
    }

    fn with_span(mut self, span: Span) -> Node {
        match &mut self {
            Node::Number(_, s)
            | Node::Coord(_, s)
            | Node::Param(_, s)
            | Node::Neg(_, s)
            | Node::Binary(_, _, _, s)
            | Node::Pow(_, _, s)
            | Node::Call(_, _, s) => *s = span,
        }
        self
    }

    /// Depth with leaves at 0.
    pub fn depth(&self) -> usize {
        match self {
            Node::Number(..) | Node::Coord(..) | Node::Param(..) => 0,
            Node::Neg(a, _) | Node::Pow(a, _, _) | Node::Call(_, a, _) => 1 + a.depth(),
            Node::Binary(_, a, b, _) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// A parsed expression together with its symbol declarations and source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    coords: Vec<String>,
    params: Vec<String>,
    source: Arc<str>,
    root: Node,
}

impl Expr {
    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    fn snippet(&self, span: Span) -> String {
        self.source[span.0 as usize..span.1 as usize].to_string()
    }

    /// Evaluate as a jet of the requested order at `point`, with parameters
    /// bound by name. Every coefficient of the result is the exact Taylor
    /// coefficient of the expression at the point.
    pub fn eval_jet<T: Real>(
        &self,
        point: &[T],
        param_values: &BTreeMap<String, T>,
        order: usize,
    ) -> Result<Jet<T>, EvalError> {
        if point.len() != self.coords.len() {
            return Err(EvalError::PointDimension { got: point.len(), want: self.coords.len() });
        }
        let mut bound = Vec::with_capacity(self.params.len());
        for name in &self.params {
            match param_values.get(name) {
                Some(&v) => bound.push(v),
                None => return Err(EvalError::UnboundParameter { name: name.clone() }),
            }
        }
        let space = JetSpace::get(self.coords.len().max(1), order);
        self.eval_node(&self.root, &space, point, &bound)
    }

    fn eval_node<T: Real>(
        &self,
        node: &Node,
        space: &Arc<JetSpace>,
        point: &[T],
        params: &[T],
    ) -> Result<Jet<T>, EvalError> {
        match node {
            Node::Number(v, _) => Ok(Jet::constant(space.clone(), T::from_f64_lossy(*v))),
            Node::Coord(i, _) => Ok(Jet::variable(space.clone(), *i, point[*i])),
            Node::Param(i, _) => Ok(Jet::constant(space.clone(), params[*i])),
            Node::Neg(a, _) => Ok(self.eval_node(a, space, point, params)?.neg()),
            Node::Binary(op, a, b, span) => {
                let ja = self.eval_node(a, space, point, params)?;
                let jb = self.eval_node(b, space, point, params)?;
                match op {
                    BinOp::Add => Ok(ja.add(&jb)),
                    BinOp::Sub => Ok(ja.sub(&jb)),
                    BinOp::Mul => Ok(ja.mul(&jb)),
                    BinOp::Div => ja.div(&jb).map_err(|e| self.domain_error(e, *span)),
                }
            }
            Node::Pow(a, k, span) => {
                let ja = self.eval_node(a, space, point, params)?;
                ja.powi(*k).map_err(|e| self.domain_error(e, *span))
            }
            Node::Call(f, a, span) => {
                let ja = self.eval_node(a, space, point, params)?;
                match f {
                    Func::Sin => Ok(ja.sin_jet()),
                    Func::Cos => Ok(ja.cos_jet()),
                    Func::Exp => Ok(ja.exp_jet()),
                    Func::Sqrt => ja.sqrt_jet().map_err(|e| self.domain_error(e, *span)),
                }
            }
        }
    }

    fn domain_error(&self, e: JetError, span: Span) -> EvalError {
        let snippet = self.snippet(span);
        match e {
            JetError::SqrtNonpositive => EvalError::SqrtDomain { snippet },
            _ => EvalError::DivisionByZero { snippet },
        }
    }

    /// Plain value evaluation (order-0 jet).
    pub fn eval_value<T: Real>(
        &self,
        point: &[T],
        param_values: &BTreeMap<String, T>,
    ) -> Result<T, EvalError> {
        Ok(self.eval_jet(point, param_values, 0)?.value())
    }

    /// Minimal-parenthesis rendering that re-parses to an identical AST.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        print_node(&self.root, &self.coords, &self.params, 0, &mut out);
        out
    }
}

// Precedence levels used by both the parser and the printer:
// 1 add/sub, 2 mul/div, 3 unary minus, 4 power, 5 atoms.
fn print_node(node: &Node, coords: &[String], params: &[String], min_level: u8, out: &mut String) {
    let level = match node {
        Node::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Node::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        _ => 5,
    };
    let parens = level < min_level;
    if parens {
        out.push('(');
    }
    match node {
        Node::Number(v, _) => out.push_str(&format!("{v:?}")),
        Node::Coord(i, _) => out.push_str(&coords[*i]),
        Node::Param(i, _) => out.push_str(&params[*i]),
        Node::Neg(a, _) => {
            out.push('-');
            print_node(a, coords, params, 3, out);
        }
        Node::Binary(op, a, b, _) => {
            print_node(a, coords, params, level, out);
            out.push_str(match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => " * ",
                BinOp::Div => " / ",
            });
            print_node(b, coords, params, level + 1, out);
        }
        Node::Pow(a, k, _) => {
            print_node(a, coords, params, 5, out);
            out.push('^');
            out.push_str(&k.to_string());
        }
        Node::Call(f, a, _) => {
            out.push_str(match f {
                Func::Sin => "sin",
                Func::Cos => "cos",
                Func::Exp => "exp",
                Func::Sqrt => "sqrt",
            });
            out.push('(');
            print_node(a, coords, params, 0, out);
            out.push(')');
        }
    }
    if parens {
        out.push(')');
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
}

struct Lexer {
    toks: Vec<(Tok, Span)>,
}

fn lex(text: &str) -> Result<Lexer, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'+' => {
                toks.push((Tok::Plus, (start as u32, i as u32 + 1)));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, (start as u32, i as u32 + 1)));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, (start as u32, i as u32 + 1)));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, (start as u32, i as u32 + 1)));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, (start as u32, i as u32 + 1)));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::LParen, (start as u32, i as u32 + 1)));
                i += 1;
            }
            b')' => {
                toks.push((Tok::RParen, (start as u32, i as u32 + 1)));
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(ParseError::Syntax {
                            offset: i,
                            message: "expected digits after decimal point".into(),
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
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
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("invalid number literal `{lit}`"),
                })?;
                toks.push((Tok::Num(v), (start as u32, i as u32)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), (start as u32, i as u32)));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", text[i..].chars().next().unwrap()),
                });
            }
        }
    }
    Ok(Lexer { toks })
}

struct Parser<'a> {
    toks: &'a [(Tok, Span)],
    pos: usize,
    end: usize,
    coords: &'a [String],
    params: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn span(&self) -> Span {
        self.toks
            .get(self.pos)
            .map(|&(_, s)| s)
            .unwrap_or((self.end as u32, self.end as u32))
    }

    fn bump(&mut self) -> Option<(Tok, Span)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { offset: self.span().0 as usize, message: message.into() }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            let span = (lhs.span().0, rhs.span().1);
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            let span = (lhs.span().0, rhs.span().1);
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            let (_, s) = self.bump().unwrap();
            let inner = self.unary()?;
            let span = (s.0, inner.span().1);
            return Ok(Node::Neg(Box::new(inner), span));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                self.bump();
                true
            } else {
                false
            };
            let (tok, span) = self.bump().ok_or_else(|| ParseError::Syntax {
                offset: self.end,
                message: "expected integer exponent after `^`".into(),
            })?;
            let Tok::Num(v) = tok else {
                return Err(ParseError::Syntax {
                    offset: span.0 as usize,
                    message: "expected integer exponent after `^`".into(),
                });
            };
            if v.fract() != 0.0 {
                return Err(ParseError::Syntax {
                    offset: span.0 as usize,
                    message: format!("exponent must be an integer, got `{v}`"),
                });
            }
            let mut k = v as i64;
            if neg {
                k = -k;
            }
            if k.abs() > MAX_EXPONENT as i64 {
                return Err(ParseError::ExponentRange { value: k, offset: span.0 as usize });
            }
            let full = (base.span().0, span.1);
            return Ok(Node::Pow(Box::new(base), k as i32, full));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.bump() {
            Some((Tok::Num(v), span)) => Ok(Node::Number(v, span)),
            Some((Tok::Ident(name), span)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let func = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        "sqrt" => Func::Sqrt,
                        _ => {
                            return Err(ParseError::Syntax {
                                offset: span.0 as usize,
                                message: format!("unknown function `{name}`"),
                            })
                        }
                    };
                    self.bump(); // (
                    let arg = self.expr()?;
                    let close = self.span();
                    match self.bump() {
                        Some((Tok::RParen, _)) => {}
                        _ => {
                            return Err(ParseError::Syntax {
                                offset: close.0 as usize,
                                message: "expected `)` to close function call".into(),
                            })
                        }
                    }
                    let full = (span.0, close.1);
                    return Ok(Node::Call(func, Box::new(arg), full));
                }
                if let Some(i) = self.coords.iter().position(|c| c == &name) {
                    Ok(Node::Coord(i, span))
                } else if let Some(i) = self.params.iter().position(|p| p == &name) {
                    Ok(Node::Param(i, span))
                } else {
                    Err(ParseError::UnknownSymbol { name, offset: span.0 as usize })
                }
            }
            Some((Tok::LParen, open)) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some((Tok::RParen, close)) => Ok(inner.with_span((open.0, close.1))),
                    other => Err(ParseError::Syntax {
                        offset: other.map(|(_, s)| s.0 as usize).unwrap_or(self.end),
                        message: "expected `)`".into(),
                    }),
                }
            }
            Some((tok, span)) => Err(ParseError::Syntax {
                offset: span.0 as usize,
                message: format!("unexpected token {tok:?}"),
            }),
            None => Err(ParseError::Syntax {
                offset: self.end,
                message: "unexpected end of expression".into(),
            }),
        }
    }
}

/// Parse `text` against declared coordinate and parameter names.
pub fn parse_expr(text: &str, coords: &[String], params: &[String]) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut seen = std::collections::BTreeSet::new();
    for name in coords.iter().chain(params) {
        if FUNCTIONS.contains(&name.as_str()) || !seen.insert(name.clone()) {
            return Err(ParseError::BadDeclaration { name: name.clone() });
        }
    }
    let lexer = lex(text)?;
    let mut parser =
        Parser { toks: &lexer.toks, pos: 0, end: text.len(), coords, params };
    let root = parser.expr()?;
    if parser.pos != lexer.toks.len() {
        return Err(parser.err_here("trailing tokens after expression"));
    }
    Ok(Expr {
        coords: coords.to_vec(),
        params: params.to_vec(),
        source: Arc::from(text),
        root,
    })
}

/// Convenience for string-literal declarations.
pub fn parse(text: &str, coords: &[&str], params: &[&str]) -> Result<Expr, ParseError> {
    let c: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
    let p: Vec<String> = params.iter().map(|s| s.to_string()).collect();
    parse_expr(text, &c, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn no_params() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn conformal_factor_parses_with_depth_5() {
        let e = parse("4/(1 - (x1^2 + x2^2))^2", &["x1", "x2"], &[]).unwrap();
        assert_eq!(e.depth(), 5);
    }

    #[test]
    fn parameterized_expression_parses() {
        let e = parse("r^2 * sin(x1)^2", &["x1"], &["r"]).unwrap();
        let mut params = BTreeMap::new();
        params.insert("r".to_string(), 2.0);
        let v = e.eval_value(&[std::f64::consts::FRAC_PI_2], &params).unwrap();
        assert!((v - 4.0).abs() < 1e-14);
    }

    #[test]
    fn undeclared_symbol_is_named_in_the_error() {
        let err = parse("x3 + 1", &["x1", "x2"], &[]).unwrap_err();
        assert_eq!(err, ParseError::UnknownSymbol { name: "x3".into(), offset: 0 });
    }

    #[test]
    fn syntax_error_carries_byte_offset() {
        let err = parse("x1 + ", &["x1"], &[]).unwrap_err();
        match err {
            ParseError::Syntax { offset, .. } => assert_eq!(offset, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn exponent_range_is_enforced() {
        let err = parse("x1^17", &["x1"], &[]).unwrap_err();
        assert!(matches!(err, ParseError::ExponentRange { value: 17, .. }));
        assert!(parse("x1^-16", &["x1"], &[]).is_ok());
    }

    #[test]
    fn square_jet_at_three() {
        let e = parse("x1^2", &["x1"], &[]).unwrap();
        let j = e.eval_jet(&[3.0], &no_params(), 2).unwrap();
        assert_eq!(j.value(), 9.0);
        assert_eq!(j.partial(&[1]).unwrap(), 6.0);
        assert_eq!(j.partial(&[2]).unwrap(), 2.0);
        assert_eq!(j.coeffs()[2], 1.0);
    }

    #[test]
    fn sine_jet_at_zero() {
        let e = parse("sin(x1)", &["x1"], &[]).unwrap();
        let j = e.eval_jet(&[0.0], &no_params(), 3).unwrap();
        let derivs: Vec<f64> = (0..=3).map(|k| j.partial(&[k]).unwrap()).collect();
        let expect = [0.0, 1.0, 0.0, -1.0];
        for (d, e) in derivs.iter().zip(expect) {
            assert!((d - e).abs() < 1e-15);
        }
    }

    /// Iterated central finite differences for d^alpha f with finest step h.
    ///
    /// Each level Richardson-combines the steps h and 2h, which cancels the
    /// O(h^2) truncation term without shrinking the step (shrinking would
    /// amplify roundoff past the comparison tolerance at order 4).
    fn finite_difference(
        f: &dyn Fn(&[f64]) -> f64,
        point: &[f64],
        alpha: &[u8],
        h: f64,
    ) -> f64 {
        fn central(
            f: &dyn Fn(&[f64]) -> f64,
            point: &mut Vec<f64>,
            alpha: &mut Vec<u8>,
            v: usize,
            h: f64,
        ) -> f64 {
            point[v] += h;
            let plus = rec(f, point, alpha, h);
            point[v] -= 2.0 * h;
            let minus = rec(f, point, alpha, h);
            point[v] += h;
            (plus - minus) / (2.0 * h)
        }
        fn rec(f: &dyn Fn(&[f64]) -> f64, point: &mut Vec<f64>, alpha: &mut Vec<u8>, h: f64) -> f64 {
            match alpha.iter().position(|&a| a > 0) {
                None => f(point),
                Some(v) => {
                    alpha[v] -= 1;
                    let fine = central(f, point, alpha, v, h);
                    let coarse = central(f, point, alpha, v, 2.0 * h);
                    alpha[v] += 1;
                    (4.0 * fine - coarse) / 3.0
                }
            }
        }
        rec(f, &mut point.to_vec(), &mut alpha.to_vec(), h)
    }

    #[test]
    fn conformal_factor_jet_matches_finite_differences() {
        let src = "4/(1-(x1^2+x2^2))^2";
        let e = parse(src, &["x1", "x2"], &[]).unwrap();
        let point = [0.1, 0.2];
        let j = e.eval_jet(&point, &no_params(), 4).unwrap();
        let f = |x: &[f64]| 4.0 / (1.0 - (x[0] * x[0] + x[1] * x[1])).powi(2);
        let space = j.space().clone();
        assert_eq!(space.len(), 15);

        // Frozen 30-digit-arithmetic partials of 4/(1-(x1^2+x2^2))^2 at
        // (0.1, 0.2); jets must reproduce them essentially exactly.
        let frozen: [(&[u8], f64); 15] = [
            (&[0, 0], 4.4321329639889197),
            (&[0, 1], 3.7323224959906692),
            (&[0, 2], 23.376125106467875),
            (&[0, 3], 78.657921189742413),
            (&[0, 4], 608.51167820621746),
            (&[1, 0], 1.8661612479953346),
            (&[1, 1], 2.3572563132572648),
            (&[1, 2], 15.756397462298559),
            (&[1, 3], 67.909877168630342),
            (&[2, 0], 19.840240636581978),
            (&[2, 1], 25.557621080578765),
            (&[2, 2], 171.66833372723959),
            (&[3, 0], 36.35137367286203),
            (&[3, 1], 61.641273122295233),
            (&[4, 0], 414.1849527698291),
        ];
        for (alpha, expect) in frozen {
            let got = j.partial(alpha).unwrap();
            assert!(
                ((got - expect) / expect).abs() <= 1e-12,
                "alpha {alpha:?}: jet {got} vs frozen {expect}"
            );
        }

        // Cross-check against the difference quotients themselves. The
        // quotient, not the jet, limits the comparison: a step-1e-3 stencil
        // in f64 carries ~1e-3 absolute roundoff at order 4
        // (eps * |f| / (2h)^4), so grade 4 gets a roundoff-floored bound.
        for pos in 0..space.len() {
            let alpha = space.index_at(pos).to_vec();
            let exact = j.partial(&alpha).unwrap();
            let approx = finite_difference(&f, &point, &alpha, 1e-3);
            let denom = exact.abs().max(1.0);
            let total: u8 = alpha.iter().sum();
            let tol = if total == 4 { 2e-5 } else { 1e-6 };
            assert!(
                ((exact - approx) / denom).abs() <= tol,
                "alpha {alpha:?}: jet {exact} vs fd {approx}, rel {}",
                ((exact - approx) / denom).abs()
            );
        }
    }

    #[test]
    fn division_by_zero_reports_subexpression() {
        let e = parse("1/(x1 - 1)", &["x1"], &[]).unwrap();
        let err = e.eval_jet(&[1.0], &no_params(), 2).unwrap_err();
        match err {
            EvalError::DivisionByZero { snippet } => assert_eq!(snippet, "1/(x1 - 1)"),
            other => panic!("expected division error, got {other:?}"),
        }
    }

    #[test]
    fn sqrt_domain_reports_subexpression() {
        let e = parse("sqrt(x1 - 2)", &["x1"], &[]).unwrap();
        let err = e.eval_jet(&[1.0], &no_params(), 2).unwrap_err();
        match err {
            EvalError::SqrtDomain { snippet } => assert_eq!(snippet, "sqrt(x1 - 2)"),
            other => panic!("expected sqrt domain error, got {other:?}"),
        }
    }

    #[test]
    fn jet_evaluation_is_a_ring_homomorphism() {
        let coords = ["x1", "x2"];
        let e1 = parse("sin(x1) * x2 + 1", &coords, &[]).unwrap();
        let e2 = parse("exp(x2 - x1^2)", &coords, &[]).unwrap();
        let sum = parse("(sin(x1) * x2 + 1) + (exp(x2 - x1^2))", &coords, &[]).unwrap();
        let prod = parse("(sin(x1) * x2 + 1) * (exp(x2 - x1^2))", &coords, &[]).unwrap();
        let p = [0.4, -0.3];
        let j1 = e1.eval_jet(&p, &no_params(), 4).unwrap();
        let j2 = e2.eval_jet(&p, &no_params(), 4).unwrap();
        let js = sum.eval_jet(&p, &no_params(), 4).unwrap();
        let jp = prod.eval_jet(&p, &no_params(), 4).unwrap();
        for (a, b) in js.coeffs().iter().zip(j1.add(&j2).coeffs()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
        for (a, b) in jp.coeffs().iter().zip(j1.mul(&j2).coeffs()) {
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn degree_four_polynomial_jets_are_exact() {
        // p = (x1 + 2 x2)^2 * (x1 - x2)^2 expanded has total degree 4; the
        // order-4 jet at any point recovers all coefficients exactly.
        let e = parse("(x1 + 2*x2)^2 * (x1 - x2)^2", &["x1", "x2"], &[]).unwrap();
        let p = [0.7, -1.3];
        let j = e.eval_jet(&p, &no_params(), 4).unwrap();
        let f = |x: &[f64]| {
            let a = x[0] + 2.0 * x[1];
            let b = x[0] - x[1];
            a * a * b * b
        };
        // Exact polynomial identity: sum of jet coefficients times shifted
        // monomials reproduces the polynomial at a second point.
        let q = [0.9, -1.1];
        let mut total = 0.0;
        let space = j.space().clone();
        for pos in 0..space.len() {
            let alpha = space.index_at(pos);
            let mut mono = 1.0;
            for (v, &a) in alpha.iter().enumerate() {
                mono *= (q[v] - p[v]).powi(a as i32);
            }
            total += j.coeffs()[pos] * mono;
        }
        assert!((total - f(&q)).abs() <= 1e-12 * f(&q).abs().max(1.0));
    }

    fn arb_node(coords: usize, params: usize) -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(|v| Node::Number((v * 64.0).round() / 64.0, (0, 0))),
            (0..coords).prop_map(|i| Node::Coord(i, (0, 0))),
            (0..params).prop_map(|i| Node::Param(i, (0, 0))),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop_oneof![
                    Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)
                ])
                    .prop_map(|(a, b, op)| Node::Binary(op, Box::new(a), Box::new(b), (0, 0))),
                inner.clone().prop_map(|a| Node::Neg(Box::new(a), (0, 0))),
                (inner.clone(), -16i32..=16).prop_map(|(a, k)| Node::Pow(Box::new(a), k, (0, 0))),
                (inner, prop_oneof![
                    Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Sqrt)
                ])
                    .prop_map(|(a, f)| Node::Call(f, Box::new(a), (0, 0))),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(root in arb_node(3, 2)) {
            let coords = vec!["x1".to_string(), "x2".to_string(), "x3".to_string()];
            let params = vec!["r".to_string(), "b".to_string()];
            let e = Expr {
                coords: coords.clone(),
                params: params.clone(),
                source: Arc::from(""),
                root,
            };
            let text = e.pretty();
            let reparsed = parse_expr(&text, &coords, &params).unwrap();
            prop_assert_eq!(reparsed.root(), e.root(), "text: {}", text);
        }
    }
}
