use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{BinaryOp, Node, Number, ScalarExpr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: ScalarExpr, reason: &'static str },
    #[error("no value bound for variable `{0}`")]
    Unbound(String),
}

/// Variable assignment used by [`ScalarExpr::evaluate`].
pub trait Bindings {
    fn value(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for HashMap<&str, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn value(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn value(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn value(&self, name: &str) -> Option<f64> {
        self.as_slice().value(name)
    }
}

/// Coordinate values paired positionally with coordinate names.
#[derive(Clone, Copy, Debug)]
pub struct Point<'a> {
    pub names: &'a [String],
    pub values: &'a [f64],
}

impl Bindings for Point<'_> {
    fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.values.get(i).copied())
    }
}

/// `x^e` in doubles. Integer exponents use repeated multiplication so that
/// negative bases are allowed; other exponents need a nonnegative base.
pub(crate) fn checked_pow(x: f64, exponent: Number) -> Option<f64> {
    let v = match exponent.as_integer() {
        Some(k) if i32::try_from(k).is_ok() => {
            if x == 0.0 && k < 0 {
                return None;
            }
            x.powi(k as i32)
        }
        _ => real_pow(x, exponent.to_f64())?,
    };
    v.is_finite().then_some(v)
}

pub(crate) fn real_pow(x: f64, y: f64) -> Option<f64> {
    if y.fract() == 0.0 && y.abs() < 2.0e9 {
        if x == 0.0 && y < 0.0 {
            return None;
        }
        return Some(x.powi(y as i32));
    }
    if x < 0.0 || (x == 0.0 && y < 0.0) {
        return None;
    }
    Some(x.powf(y))
}

impl ScalarExpr {
    /// Recursive evaluation in doubles.
    pub fn evaluate<B: Bindings + ?Sized>(&self, point: &B) -> Result<f64, EvalError> {
        let domain = |reason| EvalError::Domain { expr: self.clone(), reason };
        let v = match self.node() {
            Node::Const(n) => n.to_f64(),
            Node::Var(name) => point
                .value(name)
                .ok_or_else(|| EvalError::Unbound(name.to_string()))?,
            Node::Unary(UnaryOp::Neg, a) => -a.evaluate(point)?,
            Node::Binary(op, a, b) => {
                let x = a.evaluate(point)?;
                match op {
                    BinaryOp::Add => x + b.evaluate(point)?,
                    BinaryOp::Sub => x - b.evaluate(point)?,
                    BinaryOp::Mul => x * b.evaluate(point)?,
                    BinaryOp::Div => {
                        let y = b.evaluate(point)?;
                        if y == 0.0 {
                            return Err(domain("division by zero"));
                        }
                        x / y
                    }
                    BinaryOp::Pow => {
                        let y = match b.as_number() {
                            Some(n) => return checked_pow(x, n).ok_or_else(|| domain("invalid power")),
                            None => b.evaluate(point)?,
                        };
                        real_pow(x, y).ok_or_else(|| domain("invalid power"))?
                    }
                }
            }
            Node::Call(f, a) => {
                let x = a.evaluate(point)?;
                f.apply(x).ok_or_else(|| domain(f.domain_reason()))?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(domain("non-finite value"))
        }
    }
}

impl super::Func {
    pub(crate) fn domain_reason(self) -> &'static str {
        match self {
            super::Func::Log => "logarithm of a non-positive value",
            super::Func::Sqrt => "square root of a negative value",
            _ => "non-finite value",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    fn p(s: &str) -> ScalarExpr {
        parse_expression(s, &["x", "y"]).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(p("x^2+1").evaluate(&[("x", 3.0)]).unwrap(), 10.0);
        assert_eq!(p("exp(0)*cos(0)").evaluate(&[("x", 0.0)]).unwrap(), 1.0);
        let err = p("1/y").evaluate(&[("y", 0.0)]).unwrap_err();
        assert!(matches!(err, EvalError::Domain { ref expr, .. } if *expr == p("1/y")));
    }

    #[test]
    fn domain_errors_carry_the_offending_subexpression() {
        let err = p("x + log(y)").evaluate(&[("x", 1.0), ("y", -1.0)]).unwrap_err();
        assert!(matches!(err, EvalError::Domain { ref expr, .. } if *expr == p("log(y)")));
        let err = p("sqrt(x - 2)").evaluate(&[("x", 1.0)]).unwrap_err();
        assert!(matches!(err, EvalError::Domain { .. }));
        let err = p("(x - 2)^0.5").evaluate(&[("x", 1.0)]).unwrap_err();
        assert!(matches!(err, EvalError::Domain { .. }));
        assert_eq!(p("(x-2)^3").evaluate(&[("x", 1.0)]).unwrap(), -1.0);
        assert_eq!(
            p("x").evaluate(&[("y", 1.0)]).unwrap_err(),
            EvalError::Unbound("x".into())
        );
    }

    #[test]
    fn positional_points() {
        let names = vec!["x".to_string(), "y".to_string()];
        let pt = Point { names: &names, values: &[2.0, 5.0] };
        assert_eq!(p("x*y").evaluate(&pt).unwrap(), 10.0);
    }
}
