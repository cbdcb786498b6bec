//! Scalar expression language for user-supplied right-hand sides, impulse
//! maps, Lyapunov candidates and comparison functions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          // right-associative
//! primary := number | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! var     := 't' | 'x' | 'y'
//! func    := pow | abs | exp | ln | sin | cos | sqrt | min | max
//! ```
//!
//! `-2^2` parses as `-(2^2)` and `2^-1` is accepted.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" | "))]
    Syntax { offset: usize, expected: Vec<&'static str> },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` takes {expected} argument(s), got {found} (byte {offset})")]
    Arity {
        name: &'static str,
        expected: usize,
        found: usize,
        offset: usize,
    },
    #[error("variable `{0}` is not bound")]
    MissingBinding(Var),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Free variables of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    X,
    Y,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::X => "x",
            Var::Y => "y",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Pow,
    Abs,
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Min,
    Max,
}

impl Func {
    const ALL: [Func; 9] = [
        Func::Pow,
        Func::Abs,
        Func::Exp,
        Func::Ln,
        Func::Sin,
        Func::Cos,
        Func::Sqrt,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Pow => "pow",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

/// Values for the free variables `t`, `x`, `y`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn t(mut self, v: f64) -> Self {
        self.t = Some(v);
        self
    }

    pub fn x(mut self, v: f64) -> Self {
        self.x = Some(v);
        self
    }

    pub fn y(mut self, v: f64) -> Self {
        self.y = Some(v);
        self
    }

    fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::T => self.t,
            Var::X => self.x,
            Var::Y => self.y,
        }
    }
}

pub fn parse(source: &str) -> Result<Expr, ExprError> {
    source.parse()
}

impl FromStr for Expr {
    type Err = ExprError;

    fn from_str(source: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: source, pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(ExprError::Syntax {
                offset: p.pos,
                expected: vec!["operator", "end of input"],
            });
        }
        Ok(Expr {
            root,
            source: source.to_string(),
        })
    }
}

impl Expr {
    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Sorted, deduplicated free variables.
    pub fn free_vars(&self) -> Vec<Var> {
        fn walk(n: &Node, out: &mut Vec<Var>) {
            match n {
                Node::Num(_) => {}
                Node::Var(v) => out.push(*v),
                Node::Neg(a) => walk(a, out),
                Node::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Node::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Evaluates in IEEE double precision. Any non-finite intermediate is a
    /// domain error.
    pub fn eval(&self, b: &Bindings) -> Result<f64, ExprError> {
        eval_node(&self.root, b)
    }
}

pub fn eval(e: &Expr, b: &Bindings) -> Result<f64, ExprError> {
    e.eval(b)
}

fn domain(msg: impl Into<String>) -> ExprError {
    ExprError::Domain(msg.into())
}

fn finite(v: f64, what: &str) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(format!("{what} produced a non-finite value")))
    }
}

fn eval_node(n: &Node, b: &Bindings) -> Result<f64, ExprError> {
    match n {
        Node::Num(v) => Ok(*v),
        Node::Var(v) => b.get(*v).ok_or(ExprError::MissingBinding(*v)),
        Node::Neg(a) => Ok(-eval_node(a, b)?),
        Node::Binary(op, l, r) => {
            let l = eval_node(l, b)?;
            let r = eval_node(r, b)?;
            match op {
                BinOp::Add => finite(l + r, "addition"),
                BinOp::Sub => finite(l - r, "subtraction"),
                BinOp::Mul => finite(l * r, "multiplication"),
                BinOp::Div => {
                    if r == 0.0 {
                        Err(domain("division by zero"))
                    } else {
                        finite(l / r, "division")
                    }
                }
                BinOp::Pow => power(l, r),
            }
        }
        Node::Call(f, args) => {
            let a = eval_node(&args[0], b)?;
            match f {
                Func::Pow => power(a, eval_node(&args[1], b)?),
                Func::Abs => Ok(a.abs()),
                Func::Exp => finite(a.exp(), "exp"),
                Func::Ln => {
                    if a <= 0.0 {
                        Err(domain(format!("ln of non-positive value {a}")))
                    } else {
                        Ok(a.ln())
                    }
                }
                Func::Sin => Ok(a.sin()),
                Func::Cos => Ok(a.cos()),
                Func::Sqrt => {
                    if a < 0.0 {
                        Err(domain(format!("sqrt of negative value {a}")))
                    } else {
                        Ok(a.sqrt())
                    }
                }
                Func::Min => Ok(a.min(eval_node(&args[1], b)?)),
                Func::Max => Ok(a.max(eval_node(&args[1], b)?)),
            }
        }
    }
}

fn power(base: f64, exp: f64) -> Result<f64, ExprError> {
    if base == 0.0 && exp < 0.0 {
        return Err(domain("0 raised to a negative power"));
    }
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(domain(format!(
            "negative base {base} raised to non-integer power {exp}"
        )));
    }
    finite(base.powf(exp), "power")
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.rest().chars().next() {
            self.pos += c.len_utf8();
        }
    }

    fn err(&self, expected: &[&'static str]) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            expected: expected.to_vec(),
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') | Some('\u{2212}') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some('-') | Some('\u{2212}') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.peek() == Some('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        const EXPECTED: &[&str] = &["number", "variable", "function", "'('"];
        match self.peek() {
            Some('(') => {
                self.bump();
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err(&["')'", "operator"]));
                }
                self.bump();
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.ident(),
            _ => Err(self.err(EXPECTED)),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = start;
        let digits = |i: &mut usize| {
            let s = *i;
            while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                *i += 1;
            }
            *i - s
        };
        let mut n = digits(&mut i);
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            n += digits(&mut i);
        }
        if n == 0 {
            return Err(self.err(&["digit"]));
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) == 0 {
                self.pos = j;
                return Err(self.err(&["exponent digits"]));
            }
            i = j;
        }
        let value: f64 = self.src[start..i].parse().map_err(|_| ExprError::Syntax {
            offset: start,
            expected: vec!["number"],
        })?;
        self.pos = i;
        Ok(Node::Num(value))
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        let name = &self.src[start..start + len];
        self.pos += len;
        match name {
            "t" => return Ok(Node::Var(Var::T)),
            "x" => return Ok(Node::Var(Var::X)),
            "y" => return Ok(Node::Var(Var::Y)),
            _ => {}
        }
        let func = Func::lookup(name).ok_or_else(|| ExprError::UnknownIdentifier {
            name: name.to_string(),
            offset: start,
        })?;
        if self.peek() != Some('(') {
            return Err(self.err(&["'('"]));
        }
        self.bump();
        let mut args = vec![self.expr()?];
        while self.peek() == Some(',') {
            self.bump();
            args.push(self.expr()?);
        }
        if self.peek() != Some(')') {
            return Err(self.err(&["','", "')'"]));
        }
        self.bump();
        if args.len() != func.arity() {
            return Err(ExprError::Arity {
                name: func.name(),
                expected: func.arity(),
                found: args.len(),
                offset: start,
            });
        }
        Ok(Node::Call(func, args))
    }
}

impl fmt::Display for Node {
    /// Fully parenthesized form; re-parses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, b: Bindings) -> Result<f64, ExprError> {
        parse(src)?.eval(&b)
    }

    #[test]
    fn impulse_map_of_worked_example() {
        let e = parse("t - 0*x + y").unwrap();
        assert_eq!(e.free_vars(), vec![Var::T, Var::X, Var::Y]);
        let v = e.eval(&Bindings::new().t(1.0).x(5.0).y(0.25)).unwrap();
        assert_eq!(v, 1.25);
        let v = ev("t - 1*x + y", Bindings::new().t(1.5).x(2.0).y(0.3)).unwrap();
        assert!((v - (-0.2)).abs() < 1e-15);
    }

    #[test]
    fn identity_and_abs() {
        assert_eq!(ev("x", Bindings::new().x(3.5)).unwrap(), 3.5);
        assert_eq!(ev("abs(x)", Bindings::new().x(-4.0)).unwrap(), 4.0);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(ev("2^3^2", Bindings::new()).unwrap(), 512.0);
        assert_eq!(ev("-2^2", Bindings::new()).unwrap(), -4.0);
        assert_eq!(ev("2^-1", Bindings::new()).unwrap(), 0.5);
        assert_eq!(ev("1 - 2 - 3", Bindings::new()).unwrap(), -4.0);
        assert_eq!(ev("8 / 4 / 2", Bindings::new()).unwrap(), 1.0);
    }

    #[test]
    fn literals_and_functions() {
        assert_eq!(ev("1.5e2 + .5", Bindings::new()).unwrap(), 150.5);
        assert_eq!(ev("2E-1", Bindings::new()).unwrap(), 0.2);
        assert_eq!(ev("max(1, min(4, 3))", Bindings::new()).unwrap(), 3.0);
        assert_eq!(ev("pow(2, 10)", Bindings::new()).unwrap(), 1024.0);
        assert!((ev("ln(exp(1.25))", Bindings::new()).unwrap() - 1.25).abs() < 1e-15);
        assert_eq!(ev("sqrt(16) * cos(0) + sin(0)", Bindings::new()).unwrap(), 4.0);
        assert_eq!(ev("0 \u{2212} x", Bindings::new().x(2.0)).unwrap(), -2.0);
    }

    #[test]
    fn domain_errors() {
        let err = ev("1/x", Bindings::new().x(0.0)).unwrap_err();
        assert!(matches!(err, ExprError::Domain(_)));
        assert!(matches!(ev("ln(0)", Bindings::new()), Err(ExprError::Domain(_))));
        assert!(matches!(ev("0^-1", Bindings::new()), Err(ExprError::Domain(_))));
        assert!(matches!(ev("(-8)^0.5", Bindings::new()), Err(ExprError::Domain(_))));
        assert!(matches!(ev("exp(1000)", Bindings::new()), Err(ExprError::Domain(_))));
        assert_eq!(ev("(-2)^3", Bindings::new()).unwrap(), -8.0);
    }

    #[test]
    fn missing_binding() {
        assert_eq!(
            ev("t + x", Bindings::new().t(1.0)),
            Err(ExprError::MissingBinding(Var::X))
        );
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("1 + * 2") {
            Err(ExprError::Syntax { offset, expected }) => {
                assert_eq!(offset, 4);
                assert!(expected.contains(&"number"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("(1 + 2") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("1 2"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("1e+"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse(""), Err(ExprError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert_eq!(
            parse("z + 1"),
            Err(ExprError::UnknownIdentifier {
                name: "z".into(),
                offset: 0
            })
        );
        assert!(matches!(parse("tan(x)"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse("pow(x)"), Err(ExprError::Arity { .. })));
    }

    #[test]
    fn display_round_trips() {
        for src in ["t - 0*x + y", "-x^2^-1", "max(abs(x), 1e-3) / (2 - y)", "--x"] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e.root(), again.root(), "{src}");
        }
    }
}
