//! One-variable real expressions: parsing, evaluation, symbolic
//! differentiation and simplification.
//!
//! Generators are entered as text such as `t^3/(t+1)` or `exp(t)-1`. The
//! grammar is deliberately small:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          (right associative)
//! primary := number | 't' | 'exp' '(' expr ')' | 'log' '(' expr ')' | '(' expr ')'
//! ```
//!
//! Exponents must be constant, which keeps differentiation closed-form;
//! write `exp(g*log(f))` for a general power.
//!
//! Constants are stored as non-negative magnitudes in canonical form: a
//! negative constant is `Neg(Const(c))`. [`Expr::num`] builds that form and
//! [`simplify`] produces it, so `parse(print(e)) == e` holds for every
//! canonical AST.

use std::fmt;
use std::ops;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("exponent at byte {offset} is not a constant: {reason}")]
    NonConstantExponent { offset: usize, reason: String },
    #[error("domain error in `{expr}` at t = {t}: {reason}")]
    Domain { expr: String, t: f64, reason: &'static str },
}

/// Parsed expression tree in the single variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base raised to a constant exponent.
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn var() -> Self {
        Expr::Var
    }

    /// Canonical constant: negative values become `Neg(Const(|c|))`.
    pub fn num(c: f64) -> Self {
        if c < 0.0 {
            Expr::Neg(Box::new(Expr::Const(-c)))
        } else if c == 0.0 {
            Expr::Const(0.0)
        } else {
            Expr::Const(c)
        }
    }

    pub fn powf(self, p: f64) -> Self {
        Expr::Pow(Box::new(self), p)
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn ln(self) -> Self {
        Expr::Log(Box::new(self))
    }

    /// Value of the node if it is a (possibly negated) constant.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Neg(inner) => match **inner {
                Expr::Const(c) => Some(-c),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn contains_var(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Var))
    }

    pub fn contains_exp(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Exp(_)))
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Const(_) | Expr::Var => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.any(pred) || b.any(pred),
            Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Neg(a) => a.any(pred),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + a.size() + b.size(),
            Expr::Pow(a, _) | Expr::Exp(a) | Expr::Log(a) | Expr::Neg(a) => 1 + a.size(),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64, ExprError> {
        eval(self, t)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

// ---------------------------------------------------------------------------
// Printing

fn fmt_magnitude(c: f64) -> String {
    if c != 0.0 && !(1e-6..1e16).contains(&c) {
        format!("{c:e}")
    } else {
        format!("{c}")
    }
}

fn fmt_number(c: f64) -> String {
    if c < 0.0 {
        format!("(-{})", fmt_magnitude(-c))
    } else {
        fmt_magnitude(c)
    }
}

/// Fully parenthesized infix form, accepted back by [`parse`].
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => f.write_str(&fmt_number(*c)),
            Expr::Var => f.write_str("t"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, p) => write!(f, "({a} ^ {})", fmt_number(*p)),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

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
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
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
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    expected: "a numeric literal".into(),
                    found: format!("`{text}`"),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Syntax {
                        offset: start,
                        expected: "a finite numeric literal".into(),
                        found: format!("`{text}`"),
                    });
                }
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    expected: "an operator, number, `t`, `exp` or `log`".into(),
                    found: format!("`{ch}`"),
                });
            }
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            expected: expected.to_string(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = lhs + self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = lhs * self.unary()?;
                }
                Tok::Slash => {
                    self.bump();
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let offset = self.offset();
        let exponent = self.unary()?;
        if exponent.contains_var() {
            return Err(ExprError::NonConstantExponent {
                offset,
                reason: format!("`{exponent}` depends on t"),
            });
        }
        let p = exponent.eval(0.0).map_err(|e| ExprError::NonConstantExponent {
            offset,
            reason: e.to_string(),
        })?;
        Ok(base.powf(p))
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => {
                    self.bump();
                    Ok(Expr::Var)
                }
                "exp" | "log" => {
                    self.bump();
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(if name == "exp" { arg.exp() } else { arg.ln() })
                }
                _ => Err(self.error("`t`, `exp` or `log`")),
            },
            _ => Err(self.error("a number, `t`, a function or `(`")),
        }
    }
}

pub fn parse(source: &str) -> Result<Expr, ExprError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0 };
    if *parser.peek() == Tok::End {
        return Err(parser.error("an expression"));
    }
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.error("an operator or end of input"));
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------------------
// Evaluation

fn domain(e: &Expr, t: f64, reason: &'static str) -> ExprError {
    ExprError::Domain {
        expr: e.to_string(),
        t,
        reason,
    }
}

pub fn eval(e: &Expr, t: f64) -> Result<f64, ExprError> {
    let v = match e {
        Expr::Const(c) => *c,
        Expr::Var => t,
        Expr::Add(a, b) => eval(a, t)? + eval(b, t)?,
        Expr::Sub(a, b) => eval(a, t)? - eval(b, t)?,
        Expr::Mul(a, b) => eval(a, t)? * eval(b, t)?,
        Expr::Div(a, b) => {
            let num = eval(a, t)?;
            let den = eval(b, t)?;
            if den == 0.0 {
                return Err(domain(e, t, "division by zero"));
            }
            num / den
        }
        Expr::Pow(a, p) => {
            let base = eval(a, t)?;
            if base < 0.0 && p.fract() != 0.0 {
                return Err(domain(e, t, "negative base with non-integer exponent"));
            }
            if base == 0.0 && *p < 0.0 {
                return Err(domain(e, t, "zero base with negative exponent"));
            }
            base.powf(*p)
        }
        Expr::Exp(a) => eval(a, t)?.exp(),
        Expr::Log(a) => {
            let x = eval(a, t)?;
            if x <= 0.0 {
                return Err(domain(e, t, "logarithm of a non-positive number"));
            }
            x.ln()
        }
        Expr::Neg(a) => -eval(a, t)?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(e, t, "non-finite result"))
    }
}

// ---------------------------------------------------------------------------
// Differentiation and simplification

/// Symbolic derivative with respect to `t`, simplified.
pub fn differentiate(e: &Expr) -> Expr {
    simplify(&derive(e))
}

fn derive(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var => Expr::Const(1.0),
        Expr::Add(a, b) => derive(a) + derive(b),
        Expr::Sub(a, b) => derive(a) - derive(b),
        Expr::Mul(a, b) => derive(a) * (**b).clone() + (**a).clone() * derive(b),
        Expr::Div(a, b) => {
            let num = derive(a) * (**b).clone() - (**a).clone() * derive(b);
            num / (**b).clone().powf(2.0)
        }
        Expr::Pow(a, p) => Expr::num(*p) * (**a).clone().powf(p - 1.0) * derive(a),
        Expr::Exp(a) => e.clone() * derive(a),
        Expr::Log(a) => derive(a) / (**a).clone(),
        Expr::Neg(a) => -derive(a),
    }
}

fn fold(e: Expr) -> Expr {
    // Only all-constant subtrees reach here; keep them symbolic when the
    // folded value would not be finite.
    match e.eval(0.0) {
        Ok(v) => Expr::num(v),
        Err(_) => e,
    }
}

/// Constant folding plus `x*0`, `x*1`, `x+0`, `x-0`, `x/1`, `x^1`, `x^0`
/// and double-negation elimination.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::num(*c),
        Expr::Var => Expr::Var,
        Expr::Add(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (a.as_const(), b.as_const()) {
                (Some(_), Some(_)) => fold(a + b),
                (_, Some(0.0)) => a,
                (Some(0.0), _) => b,
                _ => a + b,
            }
        }
        Expr::Sub(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (a.as_const(), b.as_const()) {
                (Some(_), Some(_)) => fold(a - b),
                (_, Some(0.0)) => a,
                (Some(0.0), _) => simplify(&-b),
                _ => a - b,
            }
        }
        Expr::Mul(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (a.as_const(), b.as_const()) {
                (Some(_), Some(_)) => fold(a * b),
                (Some(0.0), _) | (_, Some(0.0)) => Expr::Const(0.0),
                (_, Some(1.0)) => a,
                (Some(1.0), _) => b,
                _ => a * b,
            }
        }
        Expr::Div(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (a.as_const(), b.as_const()) {
                (Some(_), Some(d)) if d != 0.0 => fold(a / b),
                (_, Some(1.0)) => a,
                (Some(0.0), _) => Expr::Const(0.0),
                _ => a / b,
            }
        }
        Expr::Pow(a, p) => {
            let a = simplify(a);
            if *p == 0.0 {
                Expr::Const(1.0)
            } else if *p == 1.0 {
                a
            } else if a.as_const().is_some() {
                fold(a.powf(*p))
            } else {
                a.powf(*p)
            }
        }
        Expr::Exp(a) => {
            let a = simplify(a);
            if a.as_const().is_some() {
                fold(a.exp())
            } else {
                a.exp()
            }
        }
        Expr::Log(a) => {
            let a = simplify(a);
            if a.as_const().is_some() {
                fold(a.ln())
            } else {
                a.ln()
            }
        }
        Expr::Neg(a) => {
            let a = simplify(a);
            match a {
                Expr::Neg(inner) => *inner,
                Expr::Const(c) => Expr::num(-c),
                other => -other,
            }
        }
    }
}
