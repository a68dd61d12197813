use std::fmt;

use crate::error::{BilliardError, Result};
use crate::flow::PhaseState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Vx,
    Vy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
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
    Sqrt,
    Abs,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::Vx => "vx",
            Var::Vy => "vy",
        }
    }

    pub fn from_name(s: &str) -> Option<Var> {
        Some(match s {
            "x" => Var::X,
            "y" => Var::Y,
            "vx" => Var::Vx,
            "vy" => Var::Vy,
            _ => return None,
        })
    }
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Expression tree of a real weight `f(x, y, vx, vy)`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightExpr {
    Num(f64),
    Var(Var),
    Neg(Box<WeightExpr>),
    Bin(Op, Box<WeightExpr>, Box<WeightExpr>),
    Call(Func, Box<WeightExpr>),
}

impl WeightExpr {
    pub fn bin(op: Op, l: WeightExpr, r: WeightExpr) -> Self {
        WeightExpr::Bin(op, Box::new(l), Box::new(r))
    }

    fn precedence(&self) -> u8 {
        match self {
            WeightExpr::Bin(Op::Add | Op::Sub, ..) => 1,
            WeightExpr::Bin(Op::Mul | Op::Div, ..) => 2,
            WeightExpr::Bin(Op::Pow, ..) => 3,
            WeightExpr::Neg(_) => 4,
            _ => 5,
        }
    }
}

fn domain(expr: &WeightExpr, message: &str) -> BilliardError {
    BilliardError::EvalDomain {
        expr: expr.to_string(),
        message: message.into(),
    }
}

/// Evaluates `expr` at `state`. Division by zero, roots of negatives and
/// non-finite results are errors rather than NaN.
pub fn eval(expr: &WeightExpr, state: &PhaseState) -> Result<f64> {
    let v = match expr {
        WeightExpr::Num(n) => *n,
        WeightExpr::Var(var) => match var {
            Var::X => state.x.x,
            Var::Y => state.x.y,
            Var::Vx => state.v.x,
            Var::Vy => state.v.y,
        },
        WeightExpr::Neg(e) => -eval(e, state)?,
        WeightExpr::Bin(op, l, r) => {
            let a = eval(l, state)?;
            let b = eval(r, state)?;
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => {
                    if b == 0.0 {
                        return Err(domain(expr, "division by zero"));
                    }
                    a / b
                }
                Op::Pow => a.powf(b),
            }
        }
        WeightExpr::Call(f, e) => {
            let a = eval(e, state)?;
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(domain(expr, "square root of a negative number"));
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
            }
        }
    };
    if !v.is_finite() {
        return Err(domain(expr, "non-finite result"));
    }
    Ok(v)
}

struct Paren<'a>(&'a WeightExpr, bool);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Canonical text: minimal parentheses, spaces around `+ - * /`.
impl fmt::Display for WeightExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightExpr::Num(n) => write!(f, "{n}"),
            WeightExpr::Var(v) => f.write_str(v.name()),
            WeightExpr::Neg(e) => write!(f, "-{}", Paren(e, e.precedence() <= 3)),
            WeightExpr::Call(func, e) => write!(f, "{}({e})", func.name()),
            WeightExpr::Bin(op, l, r) => match op {
                Op::Add | Op::Sub => {
                    let sym = if *op == Op::Add { "+" } else { "-" };
                    write!(f, "{} {sym} {}", Paren(l, l.precedence() < 1), Paren(r, r.precedence() <= 1))
                }
                Op::Mul | Op::Div => {
                    let sym = if *op == Op::Mul { "*" } else { "/" };
                    write!(f, "{} {sym} {}", Paren(l, l.precedence() < 2), Paren(r, r.precedence() <= 2))
                }
                Op::Pow => write!(f, "{}^{}", Paren(l, l.precedence() <= 3), Paren(r, r.precedence() < 3)),
            },
        }
    }
}
