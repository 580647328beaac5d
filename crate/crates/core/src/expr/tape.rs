//! Batch evaluation of many expressions that share subtrees.
//!
//! Compilation hash-conses the trees into one straight-line program, so a
//! subexpression that occurs in a hundred curvature components is computed
//! once per point.

use std::collections::HashMap;

use super::eval::{checked_pow, real_pow, EvalError};
use super::{BinaryOp, Func, Node, Number, ScalarExpr, UnaryOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(usize),
    Neg(usize),
    Bin(BinaryOp, usize, usize),
    PowConst(usize, usize),
    Call(Func, usize),
}

#[derive(Clone, Copy, Debug)]
enum Instr {
    Const(f64),
    Var(usize),
    Neg(usize),
    Bin(BinaryOp, usize, usize),
    /// Power with a literal exponent, kept as `Number` for exact integer powers.
    PowConst(usize, Number),
    Call(Func, usize),
}

/// A set of expressions compiled for repeated evaluation at points given
/// positionally in `coords` order.
#[derive(Clone, Debug)]
pub struct CompiledExprs {
    instrs: Vec<Instr>,
    sources: Vec<ScalarExpr>,
    roots: Vec<usize>,
    n_vars: usize,
}

struct Builder<'a> {
    coords: &'a [String],
    keys: HashMap<Key, usize>,
    by_ptr: HashMap<*const Node, usize>,
    instrs: Vec<Instr>,
    sources: Vec<ScalarExpr>,
}

impl Builder<'_> {
    fn push(&mut self, key: Key, instr: Instr, source: &ScalarExpr) -> usize {
        if let Some(&id) = self.keys.get(&key) {
            return id;
        }
        let id = self.instrs.len();
        self.instrs.push(instr);
        self.sources.push(source.clone());
        self.keys.insert(key, id);
        id
    }

    fn lower(&mut self, e: &ScalarExpr) -> Result<usize, EvalError> {
        if let Some(&id) = self.by_ptr.get(&e.ptr()) {
            return Ok(id);
        }
        let id = match e.node() {
            Node::Const(n) => {
                let bits = n.to_f64().to_bits();
                self.push(Key::Const(bits), Instr::Const(n.to_f64()), e)
            }
            Node::Var(name) => {
                let idx = self
                    .coords
                    .iter()
                    .position(|c| **c == **name)
                    .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
                self.push(Key::Var(idx), Instr::Var(idx), e)
            }
            Node::Unary(UnaryOp::Neg, a) => {
                let a = self.lower(a)?;
                self.push(Key::Neg(a), Instr::Neg(a), e)
            }
            Node::Binary(BinaryOp::Pow, a, b) if b.as_number().is_some() => {
                let n = b.as_number().unwrap_or(Number::int(1));
                let a = self.lower(a)?;
                let bid = self.lower(b)?;
                self.push(Key::PowConst(a, bid), Instr::PowConst(a, n), e)
            }
            Node::Binary(op, a, b) => {
                let a = self.lower(a)?;
                let b = self.lower(b)?;
                self.push(Key::Bin(*op, a, b), Instr::Bin(*op, a, b), e)
            }
            Node::Call(f, a) => {
                let a = self.lower(a)?;
                self.push(Key::Call(*f, a), Instr::Call(*f, a), e)
            }
        };
        self.by_ptr.insert(e.ptr(), id);
        Ok(id)
    }
}

impl CompiledExprs {
    /// Compiles `exprs`; every variable must be one of `coords`.
    pub fn compile(exprs: &[ScalarExpr], coords: &[String]) -> Result<Self, EvalError> {
        let mut b = Builder {
            coords,
            keys: HashMap::new(),
            by_ptr: HashMap::new(),
            instrs: Vec::new(),
            sources: Vec::new(),
        };
        let roots = exprs.iter().map(|e| b.lower(e)).collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledExprs {
            instrs: b.instrs,
            sources: b.sources,
            roots,
            n_vars: coords.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Number of distinct operations after hash-consing.
    pub fn op_count(&self) -> usize {
        self.instrs.len()
    }

    /// Evaluates every compiled expression at `point`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = vec![0.0; self.instrs.len()];
        self.eval_into(point, &mut scratch)?;
        Ok(self.roots.iter().map(|&r| scratch[r]).collect())
    }

    fn eval_into(&self, point: &[f64], values: &mut [f64]) -> Result<(), EvalError> {
        debug_assert_eq!(point.len(), self.n_vars);
        for (i, instr) in self.instrs.iter().enumerate() {
            let domain = |reason| EvalError::Domain { expr: self.sources[i].clone(), reason };
            let v = match *instr {
                Instr::Const(c) => c,
                Instr::Var(k) => point[k],
                Instr::Neg(a) => -values[a],
                Instr::PowConst(a, n) => {
                    checked_pow(values[a], n).ok_or_else(|| domain("invalid power"))?
                }
                Instr::Bin(op, a, b) => {
                    let (x, y) = (values[a], values[b]);
                    match op {
                        BinaryOp::Add => x + y,
                        BinaryOp::Sub => x - y,
                        BinaryOp::Mul => x * y,
                        BinaryOp::Div => {
                            if y == 0.0 {
                                return Err(domain("division by zero"));
                            }
                            x / y
                        }
                        BinaryOp::Pow => real_pow(x, y).ok_or_else(|| domain("invalid power"))?,
                    }
                }
                Instr::Call(f, a) => f.apply(values[a]).ok_or_else(|| domain(f.domain_reason()))?,
            };
            if !v.is_finite() {
                return Err(domain("non-finite value"));
            }
            values[i] = v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    #[test]
    fn matches_tree_evaluation_and_shares_work() {
        let coords = vec!["x".to_string(), "y".to_string()];
        let exprs: Vec<ScalarExpr> = ["sin(x)*y + sin(x)", "sin(x)^2 - y/x", "(x-3)^3"]
            .iter()
            .map(|s| parse_expression(s, &coords).unwrap())
            .collect();
        let tape = CompiledExprs::compile(&exprs, &coords).unwrap();
        let pt = [0.7, -1.3];
        let vals = tape.eval(&pt).unwrap();
        for (e, v) in exprs.iter().zip(&vals) {
            let direct = e.evaluate(&[("x", pt[0]), ("y", pt[1])]).unwrap();
            assert_eq!(direct, *v);
        }
        // sin(x) lowered once
        let sins = tape.instrs.iter().filter(|i| matches!(i, Instr::Call(Func::Sin, _))).count();
        assert_eq!(sins, 1);
    }

    #[test]
    fn reports_domain_errors() {
        let coords = vec!["y".to_string()];
        let e = parse_expression("1 + 1/y", &coords).unwrap();
        let tape = CompiledExprs::compile(&[e], &coords).unwrap();
        assert!(matches!(tape.eval(&[0.0]), Err(EvalError::Domain { .. })));
        let bad = parse_expression("y", &coords).unwrap();
        assert!(CompiledExprs::compile(&[bad], &["x".to_string()]).is_err());
    }
}
