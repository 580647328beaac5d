//! Recursive-descent parser for the metric-entry syntax.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | coordinate | function '(' expr ')' | '(' expr ')'
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! Integer literals become exact rationals, literals with a fraction or an
//! exponent become doubles. Whitespace is ignored.

use std::collections::HashSet;

use thiserror::Error;

use super::{BinaryOp, Func, Number, ScalarExpr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    EmptyInput,
    #[error("syntax error at position {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("coordinate list must be nonempty and pairwise distinct: {0:?}")]
    InvalidCoordinates(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Number),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(n) => format!("number {n}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|x| x.1.is_ascii_digit())) {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i].1 == '.' {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].1.is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = chars.get(i).map_or(text.len(), |x| x.0);
            let literal = &text[pos..end];
            let number = if is_float {
                literal.parse::<f64>().ok().map(Number::Float)
            } else {
                literal.parse::<i64>().ok().map(Number::int)
            }
            .or_else(|| literal.parse::<f64>().ok().map(Number::Float))
            .filter(|n| n.to_f64().is_finite())
            .ok_or_else(|| ParseError::Syntax {
                position: chars[start].0,
                expected: vec!["finite number".into()],
                found: literal.to_string(),
            })?;
            out.push((pos, Tok::Num(number)));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = pos;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = chars.get(i).map_or(text.len(), |x| x.0);
            out.push((start, Tok::Ident(text[start..end].to_string())));
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push((pos, Tok::Sym(c)));
            i += 1;
            continue;
        }
        return Err(ParseError::Syntax {
            position: pos,
            expected: vec!["operator, number, identifier or parenthesis".into()],
            found: format!("`{c}`"),
        });
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    coords: HashSet<&'a str>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            position: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&format!("`{c}`")]))
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinaryOp::Add,
                Tok::Sym('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = ScalarExpr::raw_binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<ScalarExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinaryOp::Mul,
                Tok::Sym('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = ScalarExpr::raw_binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<ScalarExpr, ParseError> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            let inner = self.unary()?;
            return Ok(ScalarExpr::raw_unary(UnaryOp::Neg, inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(ScalarExpr::raw_binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ScalarExpr, ParseError> {
        let position = self.pos();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(ScalarExpr::number(n))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Sym('(') {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ParseError::UnknownIdentifier { name, position });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(ScalarExpr::raw_call(func, arg));
                }
                if self.coords.contains(name.as_str()) {
                    return Ok(ScalarExpr::var(&name));
                }
                if Func::from_name(&name).is_some() {
                    return Err(self.error(&["`(`"]));
                }
                Err(ParseError::UnknownIdentifier { name, position })
            }
            _ => Err(self.error(&["number", "coordinate", "function call", "`(`"])),
        }
    }
}

/// Parses `text` into the tree derived by the grammar. Every identifier must
/// be one of `coords` or a known function applied with parentheses.
pub fn parse_expression<S: AsRef<str>>(text: &str, coords: &[S]) -> Result<ScalarExpr, ParseError> {
    let names: Vec<&str> = coords.iter().map(AsRef::as_ref).collect();
    let set: HashSet<&str> = names.iter().copied().collect();
    if names.is_empty() || set.len() != names.len() {
        return Err(ParseError::InvalidCoordinates(
            names.iter().map(|s| s.to_string()).collect(),
        ));
    }
    let toks = lex(text)?;
    if toks.len() == 1 {
        return Err(ParseError::EmptyInput);
    }
    let mut parser = Parser { toks, at: 0, coords: set };
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.error(&["operator", "end of input"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> ScalarExpr {
        ScalarExpr::var(name)
    }

    fn c(k: i64) -> ScalarExpr {
        ScalarExpr::int(k)
    }

    #[test]
    fn grammar_examples() {
        let e = parse_expression("x^2 + sin(y)", &["x", "y"]).unwrap();
        let expected = ScalarExpr::raw_binary(
            BinaryOp::Add,
            ScalarExpr::raw_binary(BinaryOp::Pow, v("x"), c(2)),
            ScalarExpr::raw_call(Func::Sin, v("y")),
        );
        assert_eq!(e, expected);

        let e = parse_expression("1/(y*y)", &["x", "y"]).unwrap();
        let expected = ScalarExpr::raw_binary(
            BinaryOp::Div,
            c(1),
            ScalarExpr::raw_binary(BinaryOp::Mul, v("y"), v("y")),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn unknown_function() {
        assert_eq!(
            parse_expression("foo(x)", &["x"]),
            Err(ParseError::UnknownIdentifier { name: "foo".into(), position: 0 })
        );
        assert!(matches!(
            parse_expression("abs(x)", &["x"]),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_expression("x + z", &["x"]),
            Err(ParseError::UnknownIdentifier { name, position: 4 }) if name == "z"
        ));
    }

    #[test]
    fn empty_and_malformed() {
        assert_eq!(parse_expression("   ", &["x"]), Err(ParseError::EmptyInput));
        assert!(matches!(parse_expression("x +", &["x"]), Err(ParseError::Syntax { position: 3, .. })));
        assert!(matches!(parse_expression("(x", &["x"]), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("x y", &["x", "y"]), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("sin x", &["x"]), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("x # 2", &["x"]), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expression("x", &["x", "x"]), Err(ParseError::InvalidCoordinates(_))));
        let empty: [&str; 0] = [];
        assert!(matches!(parse_expression("1", &empty), Err(ParseError::InvalidCoordinates(_))));
    }

    #[test]
    fn precedence_and_associativity() {
        let coords = ["x", "y"];
        let p = |s: &str| parse_expression(s, &coords).unwrap();
        // unary minus binds looser than ^
        assert_eq!(p("-x^2"), ScalarExpr::raw_unary(UnaryOp::Neg, p("x^2")));
        // ^ is right associative
        assert_eq!(
            p("x^y^2"),
            ScalarExpr::raw_binary(BinaryOp::Pow, v("x"), p("y^2"))
        );
        // - and / are left associative
        assert_eq!(p("x-y-x"), ScalarExpr::raw_binary(BinaryOp::Sub, p("x-y"), v("x")));
        assert_eq!(p("x/y/x"), ScalarExpr::raw_binary(BinaryOp::Div, p("x/y"), v("x")));
        assert_eq!(p("2*x+y"), ScalarExpr::raw_binary(BinaryOp::Add, p("2*x"), v("y")));
        assert_eq!(p(" x*( y +2) "), p("x*(y+2)"));
    }

    #[test]
    fn numeric_literals() {
        let p = |s: &str| parse_expression(s, &["x"]).unwrap().as_number().unwrap();
        assert_eq!(p("42"), Number::int(42));
        assert_eq!(p("2.5"), Number::Float(2.5));
        assert_eq!(p("1e-3"), Number::Float(1e-3));
        assert_eq!(p("3E+2"), Number::Float(300.0));
        assert_eq!(p(".5"), Number::Float(0.5));
    }
}
