//! Symbolic differentiation with light algebraic simplification.

use super::{Expr, Func};

pub(super) fn derivative(expr: &Expr, var: usize) -> Expr {
    match expr {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(derivative(a, var)),
        Expr::Add(a, b) => add(derivative(a, var), derivative(b, var)),
        Expr::Sub(a, b) => sub(derivative(a, var), derivative(b, var)),
        Expr::Mul(a, b) => add(
            mul(derivative(a, var), (**b).clone()),
            mul((**a).clone(), derivative(b, var)),
        ),
        Expr::Div(a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            if db.is_zero() {
                div(da, (**b).clone())
            } else {
                div(
                    sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    pow((**b).clone(), 2),
                )
            }
        }
        Expr::Pow(a, k) => mul(
            mul(Expr::Const(f64::from(*k)), pow((**a).clone(), k - 1)),
            derivative(a, var),
        ),
        Expr::Call(f, a) => {
            let inner = derivative(a, var);
            if inner.is_zero() {
                return Expr::Const(0.0);
            }
            let a = (**a).clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, a),
                Func::Cos => neg(call(Func::Sin, a)),
                Func::Tan => add(Expr::Const(1.0), pow(call(Func::Tan, a), 2)),
                Func::Exp => call(Func::Exp, a),
                Func::Log => return div(inner, a),
                Func::Sqrt => {
                    return div(inner, mul(Expr::Const(2.0), call(Func::Sqrt, a)));
                }
                Func::Abs => call(Func::Sign, a),
                Func::Sign => return Expr::Const(0.0),
            };
            mul(outer, inner)
        }
    }
}

fn constant(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => match b {
            Expr::Neg(inner) => Expr::Sub(Box::new(a), inner),
            b => Expr::Add(Box::new(a), Box::new(b)),
        },
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => match (a, b) {
            (Expr::Neg(a), b) => neg(mul(*a, b)),
            (a, Expr::Neg(b)) => neg(mul(a, *b)),
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        },
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => Expr::Const(1.0),
        1 => a,
        _ => match constant(&a) {
            Some(c) if k > 0 => Expr::Const(c.powi(k)),
            _ => Expr::Pow(Box::new(a), k),
        },
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}
