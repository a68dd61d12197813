//! Recursive-descent parser:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := number | var | func '(' expr ')' | '(' expr ')'
//! ```

use super::expr::{Func, Op, Var, WeightExpr};
use crate::error::{BilliardError, Result};

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
            Tok::Num(n) => format!("number {n}"),
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

fn err(offset: usize, message: impl Into<String>) -> BilliardError {
    BilliardError::Parse {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            out.push((start, t));
            i += 1;
            continue;
        }
        if text[i..].starts_with('\u{2212}') {
            out.push((start, Tok::Minus));
            i += '\u{2212}'.len_utf8();
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
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
            let lit = &text[start..i];
            let v: f64 = lit
                .parse()
                .map_err(|_| err(start, format!("malformed number `{lit}`")))?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        }
        let ch = text[i..].chars().next().unwrap_or('?');
        return Err(err(start, format!("unexpected character `{ch}`")));
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(err(
                self.offset(),
                format!("expected {}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn expr(&mut self) -> Result<WeightExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => Op::Add,
                Tok::Minus => Op::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = WeightExpr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<WeightExpr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => Op::Mul,
                Tok::Slash => Op::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = WeightExpr::bin(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<WeightExpr> {
        let base = self.unary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.factor()?;
            return Ok(WeightExpr::bin(Op::Pow, base, exp));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<WeightExpr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(WeightExpr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<WeightExpr> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(n) => Ok(WeightExpr::Num(n)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(v) = Var::from_name(&name) {
                    return Ok(WeightExpr::Var(v));
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(WeightExpr::Call(f, Box::new(arg)));
                }
                Err(err(
                    at,
                    format!("unknown identifier `{name}`; expected one of x, y, vx, vy, sin, cos, exp, sqrt, abs"),
                ))
            }
            other => Err(err(
                at,
                format!("expected number, variable, function or `(`, found {}", other.describe()),
            )),
        }
    }
}

/// Parses a weight expression; errors carry the byte offset of the offending token.
pub fn parse_weight(text: &str) -> Result<WeightExpr> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(err(
            p.offset(),
            format!("expected operator or end of input, found {}", p.peek().describe()),
        ));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::PhaseState;
    use crate::vec2::Vec2;
    use crate::weights::eval;
    use proptest::prelude::*;

    fn at(x: f64, y: f64, angle: f64) -> PhaseState {
        PhaseState::from_angle(Vec2::new(x, y), angle)
    }

    fn ev(text: &str, s: &PhaseState) -> f64 {
        eval(&parse_weight(text).unwrap(), s).unwrap()
    }

    #[test]
    fn literals_and_precedence() {
        let s = at(3.0, 0.0, 0.0);
        assert_eq!(parse_weight("1").unwrap(), WeightExpr::Num(1.0));
        assert_eq!(ev("2^3^2", &s), 512.0);
        assert_eq!(ev("1 + 2 * 3", &s), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &s), 9.0);
        assert_eq!(ev("8 / 4 / 2", &s), 1.0);
        assert_eq!(ev("7 - 2 - 1", &s), 4.0);
        assert_eq!(ev("-2^2", &s), 4.0);
        assert_eq!(ev("-(2^2)", &s), -4.0);
        assert_eq!(ev("2^-1", &s), 0.5);
        assert_eq!(ev("1.5e1 + .5", &s), 15.5);
        assert_eq!(ev("x", &s), 3.0);
        assert_eq!(ev("\u{2212}x", &s), -3.0);
    }

    #[test]
    fn radial_momentum_and_unit_speed() {
        let s = at(2.0, -1.0, 0.7);
        let expected = 2.0 * 0.7f64.cos() - 0.7f64.sin();
        assert!((ev("x*vx + y*vy", &s) - expected).abs() < 1e-15);
        assert!((ev("vx^2+vy^2", &s) - 1.0).abs() < 1e-15);
        assert!((ev("sqrt(abs(-4)) + exp(0) + cos(0) + sin(0)", &s) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let s = at(3.0, 0.0, 0.0);
        let e = eval(&parse_weight("1/(x-3)").unwrap(), &s).unwrap_err();
        assert!(matches!(e, BilliardError::EvalDomain { ref expr, .. } if expr == "1 / (x - 3)"));
        assert!(eval(&parse_weight("sqrt(-1)").unwrap(), &s).is_err());
        assert!(eval(&parse_weight("exp(1000)").unwrap(), &s).is_err());
    }

    #[test]
    fn error_offsets() {
        let cases = [
            ("1 +", 3),
            ("(x", 2),
            ("x y", 2),
            ("foo(1)", 0),
            ("sin x", 4),
            ("2 # 3", 2),
            ("", 0),
            ("1 + * 2", 4),
        ];
        for (text, off) in cases {
            match parse_weight(text) {
                Err(BilliardError::Parse { offset, .. }) => assert_eq!(offset, off, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    fn arb_expr() -> impl Strategy<Value = WeightExpr> {
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| WeightExpr::Num(n as f64 / 8.0)),
            prop_oneof![Just(Var::X), Just(Var::Y), Just(Var::Vx), Just(Var::Vy)].prop_map(WeightExpr::Var),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| WeightExpr::Neg(Box::new(e))),
                (
                    prop_oneof![Just(Op::Add), Just(Op::Sub), Just(Op::Mul), Just(Op::Div), Just(Op::Pow)],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| WeightExpr::bin(op, l, r)),
                (
                    prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Sqrt), Just(Func::Abs)],
                    inner
                )
                    .prop_map(|(f, e)| WeightExpr::Call(f, Box::new(e))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_roundtrip(e in arb_expr()) {
            let text = e.to_string();
            let back = parse_weight(&text).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(back.to_string(), text);
        }

        #[test]
        fn mutated_inputs_report_in_range_offsets(e in arb_expr(), pos in 0usize..200, junk in prop_oneof![Just('#'), Just(')'), Just('('), Just('*'), Just('@')]) {
            let mut text = e.to_string();
            let mut p = pos.min(text.len());
            while !text.is_char_boundary(p) { p -= 1; }
            text.insert(p, junk);
            if let Err(err) = parse_weight(&text) {
                match err {
                    BilliardError::Parse { offset, .. } => prop_assert!(offset <= text.len()),
                    other => prop_assert!(false, "unexpected error {:?}", other),
                }
                if junk == '#' || junk == '@' {
                    let hit = matches!(parse_weight(&text), Err(BilliardError::Parse { offset, .. }) if offset == p);
                    prop_assert!(hit, "offset mismatch for {}", text);
                }
            }
        }
    }
}
