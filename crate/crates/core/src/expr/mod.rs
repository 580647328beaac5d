//! Closed-form scalar expressions over chart coordinates.
//!
//! Every metric component and every derived quantity (Christoffel symbols,
//! curvature components, Killing residuals) is a [`ScalarExpr`]. Trees are
//! immutable and reference counted, so identical subtrees can be shared
//! freely between components and across threads.
//!
//! The function set is closed under differentiation, which is what lets the
//! curvature machinery take as many symbolic derivatives of the metric as it
//! needs.

mod diff;
mod eval;
mod parse;
mod tape;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

pub use eval::{Bindings, EvalError, Point};
pub use parse::{parse_expression, ParseError};
pub use tape::CompiledExprs;

/// Numeric literal: exact rational when possible, otherwise a double.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Number {
    /// Normalized `num / den` with `den > 0` and `gcd(num, den) == 1`.
    Rational(i64, i64),
    Float(f64),
}

impl Number {
    pub fn int(v: i64) -> Self {
        Number::Rational(v, 1)
    }

    /// Builds a normalized rational, `None` on zero denominator or overflow.
    pub fn rational(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()).max(1);
        let g = i64::try_from(g).ok()?;
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = n.checked_neg()?;
            d = d.checked_neg()?;
        }
        Some(Number::Rational(n, d))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Rational(n, d) => n as f64 / d as f64,
            Number::Float(v) => v,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Number::Rational(n, _) => n == 0,
            Number::Float(v) => v == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Number::Rational(n, d) => n == 1 && d == 1,
            Number::Float(v) => v == 1.0,
        }
    }

    pub fn as_integer(self) -> Option<i64> {
        match self {
            Number::Rational(n, 1) => Some(n),
            _ => None,
        }
    }

    fn is_negative(self) -> bool {
        self.to_f64() < 0.0
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// The closed function set. `abs` is deliberately absent: it is not
/// differentiable everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Applies the function, `None` outside its real domain.
    pub fn apply(self, x: f64) -> Option<f64> {
        let v = match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => {
                if x <= 0.0 {
                    return None;
                }
                x.ln()
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return None;
                }
                x.sqrt()
            }
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(Number),
    Var(Arc<str>),
    Unary(UnaryOp, ScalarExpr),
    Binary(BinaryOp, ScalarExpr, ScalarExpr),
    Call(Func, ScalarExpr),
}

/// Immutable, structurally shared expression tree.
#[derive(Clone, PartialEq)]
pub struct ScalarExpr(Arc<Node>);

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl ScalarExpr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    fn raw(node: Node) -> Self {
        ScalarExpr(Arc::new(node))
    }

    // Raw constructors build exactly the requested node. The parser uses
    // them so that the derived tree is the grammar's tree.

    pub fn raw_unary(op: UnaryOp, a: ScalarExpr) -> Self {
        Self::raw(Node::Unary(op, a))
    }

    pub fn raw_binary(op: BinaryOp, a: ScalarExpr, b: ScalarExpr) -> Self {
        Self::raw(Node::Binary(op, a, b))
    }

    pub fn raw_call(f: Func, a: ScalarExpr) -> Self {
        Self::raw(Node::Call(f, a))
    }

    pub fn number(n: Number) -> Self {
        Self::raw(Node::Const(n))
    }

    pub fn int(v: i64) -> Self {
        Self::number(Number::int(v))
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn one() -> Self {
        Self::int(1)
    }

    /// Float literal; integral values are stored as exact integers.
    pub fn constant(v: f64) -> Self {
        if v.fract() == 0.0 && v.abs() < 9.0e15 {
            Self::int(v as i64)
        } else {
            Self::number(Number::Float(v))
        }
    }

    pub fn var(name: &str) -> Self {
        Self::raw(Node::Var(Arc::from(name)))
    }

    pub fn as_number(&self) -> Option<Number> {
        match self.node() {
            Node::Const(n) => Some(*n),
            _ => None,
        }
    }

    /// Structurally the constant zero (no symbolic zero test is attempted).
    pub fn is_zero(&self) -> bool {
        self.as_number().is_some_and(Number::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_number().is_some_and(Number::is_one)
    }

    // Smart constructors apply the local rewrite set on the spot.

    pub fn neg(&self) -> Self {
        match self.node() {
            Node::Const(n) => {
                if let Some(v) = fold_neg(*n) {
                    return Self::number(v);
                }
            }
            Node::Unary(UnaryOp::Neg, inner) => return inner.clone(),
            _ => {}
        }
        Self::raw_unary(UnaryOp::Neg, self.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_number(), other.as_number()) {
            if let Some(v) = fold_binary(BinaryOp::Add, a, b) {
                return Self::number(v);
            }
        }
        Self::raw_binary(BinaryOp::Add, self.clone(), other.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.neg();
        }
        if let (Some(a), Some(b)) = (self.as_number(), other.as_number()) {
            if let Some(v) = fold_binary(BinaryOp::Sub, a, b) {
                return Self::number(v);
            }
        }
        Self::raw_binary(BinaryOp::Sub, self.clone(), other.clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_number(), other.as_number()) {
            if let Some(v) = fold_binary(BinaryOp::Mul, a, b) {
                return Self::number(v);
            }
        }
        Self::raw_binary(BinaryOp::Mul, self.clone(), other.clone())
    }

    pub fn div(&self, other: &Self) -> Self {
        if other.is_one() {
            return self.clone();
        }
        if self.is_zero() && !other.is_zero() {
            return Self::zero();
        }
        if let (Some(a), Some(b)) = (self.as_number(), other.as_number()) {
            if let Some(v) = fold_binary(BinaryOp::Div, a, b) {
                return Self::number(v);
            }
        }
        Self::raw_binary(BinaryOp::Div, self.clone(), other.clone())
    }

    pub fn pow(&self, other: &Self) -> Self {
        if other.is_one() {
            return self.clone();
        }
        if other.is_zero() {
            return Self::one();
        }
        if let (Some(a), Some(b)) = (self.as_number(), other.as_number()) {
            if let Some(v) = fold_binary(BinaryOp::Pow, a, b) {
                return Self::number(v);
            }
        }
        Self::raw_binary(BinaryOp::Pow, self.clone(), other.clone())
    }

    pub fn powi(&self, k: i64) -> Self {
        self.pow(&Self::int(k))
    }

    pub fn call(f: Func, arg: &Self) -> Self {
        if let Some(n) = arg.as_number() {
            if let Some(v) = f.apply(n.to_f64()) {
                return Self::constant(v);
            }
        }
        Self::raw_call(f, arg.clone())
    }

    pub fn binary(op: BinaryOp, a: &Self, b: &Self) -> Self {
        match op {
            BinaryOp::Add => a.add(b),
            BinaryOp::Sub => a.sub(b),
            BinaryOp::Mul => a.mul(b),
            BinaryOp::Div => a.div(b),
            BinaryOp::Pow => a.pow(b),
        }
    }

    /// Applies the local rewrite set bottom-up: constant folding, additive
    /// and multiplicative identities, annihilation by zero, unit exponents
    /// and double negation. Idempotent.
    pub fn simplify(&self) -> Self {
        let mut memo = HashMap::new();
        self.simplify_memo(&mut memo)
    }

    fn simplify_memo(&self, memo: &mut HashMap<*const Node, ScalarExpr>) -> Self {
        if let Some(done) = memo.get(&self.ptr()) {
            return done.clone();
        }
        let out = match self.node() {
            Node::Const(_) | Node::Var(_) => self.clone(),
            Node::Unary(UnaryOp::Neg, a) => a.simplify_memo(memo).neg(),
            Node::Binary(op, a, b) => {
                let a = a.simplify_memo(memo);
                let b = b.simplify_memo(memo);
                Self::binary(*op, &a, &b)
            }
            Node::Call(f, a) => Self::call(*f, &a.simplify_memo(memo)),
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// Names of all variables occurring in the tree.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Var(name) => {
                    out.insert(name.to_string());
                }
                Node::Unary(_, a) | Node::Call(_, a) => stack.push(a),
                Node::Binary(_, a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.variables().contains(name)
    }

    /// Replaces variables by expressions. Unmapped variables are kept.
    pub fn substitute(&self, map: &HashMap<String, ScalarExpr>) -> Self {
        let mut memo = HashMap::new();
        self.substitute_memo(map, &mut memo)
    }

    fn substitute_memo(
        &self,
        map: &HashMap<String, ScalarExpr>,
        memo: &mut HashMap<*const Node, ScalarExpr>,
    ) -> Self {
        if let Some(done) = memo.get(&self.ptr()) {
            return done.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(name) => map.get(&**name).cloned().unwrap_or_else(|| self.clone()),
            Node::Unary(UnaryOp::Neg, a) => a.substitute_memo(map, memo).neg(),
            Node::Binary(op, a, b) => {
                let a = a.substitute_memo(map, memo);
                let b = b.substitute_memo(map, memo);
                Self::binary(*op, &a, &b)
            }
            Node::Call(f, a) => Self::call(*f, &a.substitute_memo(map, memo)),
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// Renames variables.
    pub fn rename(&self, renames: &HashMap<String, String>) -> Self {
        let map = renames
            .iter()
            .map(|(from, to)| (from.clone(), ScalarExpr::var(to)))
            .collect();
        self.substitute(&map)
    }

    /// Number of distinct nodes (shared subtrees counted once).
    pub fn node_count(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Unary(_, a) | Node::Call(_, a) => stack.push(a),
                Node::Binary(_, a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        seen.len()
    }
}

fn fold_neg(n: Number) -> Option<Number> {
    match n {
        Number::Rational(p, q) => Some(Number::Rational(p.checked_neg()?, q)),
        Number::Float(v) => Some(Number::Float(-v)),
    }
}

fn finite(v: f64) -> Option<Number> {
    v.is_finite().then_some(Number::Float(v))
}

/// Folds a binary operation on literals. Returns `None` when the result is
/// undefined (division by zero, complex powers) or not finite.
fn fold_binary(op: BinaryOp, a: Number, b: Number) -> Option<Number> {
    if let (Number::Rational(an, ad), Number::Rational(bn, bd)) = (a, b) {
        let exact = match op {
            BinaryOp::Add => an
                .checked_mul(bd)
                .zip(bn.checked_mul(ad))
                .and_then(|(x, y)| x.checked_add(y))
                .zip(ad.checked_mul(bd))
                .and_then(|(n, d)| Number::rational(n, d)),
            BinaryOp::Sub => an
                .checked_mul(bd)
                .zip(bn.checked_mul(ad))
                .and_then(|(x, y)| x.checked_sub(y))
                .zip(ad.checked_mul(bd))
                .and_then(|(n, d)| Number::rational(n, d)),
            BinaryOp::Mul => an
                .checked_mul(bn)
                .zip(ad.checked_mul(bd))
                .and_then(|(n, d)| Number::rational(n, d)),
            BinaryOp::Div => {
                if bn == 0 {
                    return None;
                }
                an.checked_mul(bd)
                    .zip(ad.checked_mul(bn))
                    .and_then(|(n, d)| Number::rational(n, d))
            }
            BinaryOp::Pow => match b.as_integer() {
                Some(k) if k.unsigned_abs() <= 64 => rational_pow(an, ad, k),
                _ => None,
            },
        };
        if exact.is_some() {
            return exact;
        }
    }
    let (x, y) = (a.to_f64(), b.to_f64());
    match op {
        BinaryOp::Add => finite(x + y),
        BinaryOp::Sub => finite(x - y),
        BinaryOp::Mul => finite(x * y),
        BinaryOp::Div => {
            if y == 0.0 {
                None
            } else {
                finite(x / y)
            }
        }
        BinaryOp::Pow => eval::checked_pow(x, b).and_then(finite),
    }
}

fn rational_pow(n: i64, d: i64, k: i64) -> Option<Number> {
    let e = u32::try_from(k.unsigned_abs()).ok()?;
    let pn = n.checked_pow(e)?;
    let pd = d.checked_pow(e)?;
    if k >= 0 {
        Number::rational(pn, pd)
    } else {
        Number::rational(pd, pn)
    }
}

// Printing. Levels follow the grammar: sums 1, products 2, negation 3,
// powers 4, atoms 5.

fn level(e: &ScalarExpr) -> u8 {
    match e.node() {
        Node::Const(Number::Rational(_, d)) if *d != 1 => 5,
        Node::Const(n) if n.is_negative() => 5,
        Node::Const(_) | Node::Var(_) | Node::Call(..) => 5,
        Node::Unary(..) => 3,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
        Node::Binary(BinaryOp::Pow, ..) => 4,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &ScalarExpr, min_level: u8) -> fmt::Result {
    if level(e) < min_level {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Number::Rational(n, 1) if n < 0 => write!(f, "({n})"),
            Number::Rational(n, 1) => write!(f, "{n}"),
            Number::Rational(n, d) => write!(f, "({n}/{d})"),
            // Scientific notation keeps float literals distinct from integer
            // literals and is the shortest round-trip form.
            Number::Float(v) if v < 0.0 => write!(f, "({v:e})"),
            Number::Float(v) => write!(f, "{v:e}"),
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(n) => write!(f, "{n}"),
            Node::Var(name) => write!(f, "{name}"),
            Node::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                write_at(f, a, 3)
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Binary(op, a, b) => {
                let (sym, left, right) = match op {
                    BinaryOp::Add => ("+", 1, 2),
                    BinaryOp::Sub => ("-", 1, 2),
                    BinaryOp::Mul => ("*", 2, 3),
                    BinaryOp::Div => ("/", 2, 3),
                    BinaryOp::Pow => ("^", 5, 3),
                };
                write_at(f, a, left)?;
                write!(f, "{sym}")?;
                write_at(f, b, right)
            }
        }
    }
}

macro_rules! impl_op {
    ($trait:ident, $method:ident, $smart:ident) => {
        impl std::ops::$trait<ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                ScalarExpr::$smart(&self, &rhs)
            }
        }
        impl std::ops::$trait<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                ScalarExpr::$smart(self, rhs)
            }
        }
    };
}

impl_op!(Add, add, add);
impl_op!(Sub, sub, sub);
impl_op!(Mul, mul, mul);
impl_op!(Div, div, div);

impl std::ops::Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::neg(&self)
    }
}

impl std::ops::Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        ScalarExpr::neg(self)
    }
}

/// Sums a sequence with the smart constructors (empty sum is zero).
pub fn sum<I: IntoIterator<Item = ScalarExpr>>(terms: I) -> ScalarExpr {
    terms
        .into_iter()
        .fold(ScalarExpr::zero(), |acc, t| acc.add(&t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> ScalarExpr {
        parse_expression(text, &["x", "y"]).unwrap()
    }

    #[test]
    fn simplify_examples() {
        assert_eq!(p("0*sin(x)+y").simplify(), ScalarExpr::var("y"));
        assert_eq!(p("2+3").simplify(), ScalarExpr::int(5));
        assert_eq!(p("x^1").simplify(), ScalarExpr::var("x"));
        assert_eq!(p("x/1").simplify(), ScalarExpr::var("x"));
        assert_eq!(p("--x").simplify(), ScalarExpr::var("x"));
        assert_eq!(p("1*x+0").simplify(), ScalarExpr::var("x"));
    }

    #[test]
    fn rational_folding_is_exact() {
        assert_eq!(
            p("1/3+1/3").simplify().as_number(),
            Some(Number::Rational(2, 3))
        );
        assert_eq!(p("(2/3)^-2").simplify().as_number(), Some(Number::Rational(9, 4)));
        // division by a literal zero is left alone
        assert_eq!(p("1/0").simplify(), p("1/0"));
    }

    #[test]
    fn folding_never_produces_non_finite() {
        let e = p("log(0)+sqrt(-1)").simplify();
        assert!(e.as_number().is_none());
        assert_eq!(e, p("log(0)+sqrt(-1)").simplify().simplify());
    }

    #[test]
    fn printing_respects_structure() {
        for text in [
            "x-(y-x)",
            "x/(y*x)",
            "-(x+y)",
            "(-x)^2",
            "x^y^2",
            "(x^y)^2",
            "-x^2",
            "x^-y",
            "sin(x)*cos(y)/(x+1)",
        ] {
            let e = p(text);
            assert_eq!(p(&e.to_string()), e, "{text} printed as {e}");
        }
    }

    #[test]
    fn float_literals_round_trip() {
        let e = ScalarExpr::constant(-2.5e-7).mul(&ScalarExpr::var("x"));
        assert_eq!(p(&e.to_string()).simplify(), e);
        let big = ScalarExpr::constant(1.0e300);
        assert_eq!(p(&big.to_string()).simplify(), big);
    }

    #[test]
    fn substitution_and_variables() {
        let e = p("x*y+sin(x)");
        let mut map = HashMap::new();
        map.insert("x".to_string(), ScalarExpr::int(0));
        assert_eq!(e.substitute(&map), ScalarExpr::zero());
        assert_eq!(
            e.variables().into_iter().collect::<Vec<_>>(),
            vec!["x".to_string(), "y".to_string()]
        );
    }
}
