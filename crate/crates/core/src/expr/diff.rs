use std::collections::HashMap;

use super::{BinaryOp, Func, Node, ScalarExpr, UnaryOp};

impl ScalarExpr {
    /// Exact symbolic partial derivative with respect to `var`.
    ///
    /// The result is built with the smart constructors, so trivially zero
    /// branches disappear as they are produced.
    pub fn differentiate(&self, var: &str) -> ScalarExpr {
        let mut memo = HashMap::new();
        self.diff_memo(var, &mut memo)
    }

    fn diff_memo(&self, var: &str, memo: &mut HashMap<*const Node, ScalarExpr>) -> ScalarExpr {
        if let Some(d) = memo.get(&self.ptr()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => ScalarExpr::zero(),
            Node::Var(name) => {
                if &**name == var {
                    ScalarExpr::one()
                } else {
                    ScalarExpr::zero()
                }
            }
            Node::Unary(UnaryOp::Neg, a) => a.diff_memo(var, memo).neg(),
            Node::Binary(op, a, b) => {
                let da = a.diff_memo(var, memo);
                let db = b.diff_memo(var, memo);
                match op {
                    BinaryOp::Add => da.add(&db),
                    BinaryOp::Sub => da.sub(&db),
                    BinaryOp::Mul => da.mul(b).add(&a.mul(&db)),
                    BinaryOp::Div => {
                        // (a'b - ab') / b^2
                        if db.is_zero() {
                            da.div(b)
                        } else {
                            da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                        }
                    }
                    BinaryOp::Pow => {
                        if db.is_zero() {
                            // c * a^(c-1) * a'
                            b.mul(&a.pow(&b.sub(&ScalarExpr::one()))).mul(&da)
                        } else {
                            // a^b * (b' log a + b a'/a)
                            let log_a = ScalarExpr::call(Func::Log, a);
                            self.mul(&db.mul(&log_a).add(&b.mul(&da).div(a)))
                        }
                    }
                }
            }
            Node::Call(f, a) => {
                let da = a.diff_memo(var, memo);
                if da.is_zero() {
                    ScalarExpr::zero()
                } else {
                    let outer = match f {
                        Func::Sin => ScalarExpr::call(Func::Cos, a),
                        Func::Cos => ScalarExpr::call(Func::Sin, a).neg(),
                        Func::Tan => ScalarExpr::one().add(&self.powi(2)),
                        Func::Sinh => ScalarExpr::call(Func::Cosh, a),
                        Func::Cosh => ScalarExpr::call(Func::Sinh, a),
                        Func::Tanh => ScalarExpr::one().sub(&self.powi(2)),
                        Func::Exp => self.clone(),
                        Func::Log => ScalarExpr::one().div(a),
                        Func::Sqrt => ScalarExpr::one().div(&ScalarExpr::int(2).mul(self)),
                    };
                    outer.mul(&da)
                }
            }
        };
        memo.insert(self.ptr(), d.clone());
        d
    }

    /// Mixed partial derivative: differentiates once per entry of `vars`.
    pub fn differentiate_many(&self, vars: &[&str]) -> ScalarExpr {
        vars.iter().fold(self.clone(), |e, v| e.differentiate(v))
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse_expression, ScalarExpr};

    fn p(s: &str) -> ScalarExpr {
        parse_expression(s, &["x", "y"]).unwrap().simplify()
    }

    #[test]
    fn table_examples() {
        assert_eq!(p("x^2").differentiate("x"), p("2*x"));
        assert_eq!(p("sin(y)").differentiate("y"), p("cos(y)"));
        assert_eq!(p("x*exp(x)").differentiate("x"), p("exp(x)+x*exp(x)"));
        assert_eq!(p("sin(y)").differentiate("x"), ScalarExpr::zero());
    }

    #[test]
    fn result_stays_in_language() {
        let e = p("tan(x)*tanh(y)+sqrt(x^2+1)+log(y)+x^y+cosh(x)/sinh(y)");
        for var in ["x", "y"] {
            let d = e.differentiate(var);
            let reparsed = parse_expression(&d.to_string(), &["x", "y"]).unwrap().simplify();
            assert_eq!(reparsed, d);
        }
    }
}
