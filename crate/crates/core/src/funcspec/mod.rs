//! Nonlinear functions `f: R^d -> R^k` given as expression trees.
//!
//! Grammar (one expression per output, separated by `;`):
//!
//! ```text
//! list    := expr (';' expr)* ';'?
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' int)?          int := '-'? digits | '(' '-'? digits ')'
//! primary := number | 'pi' | name | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | log | sqrt | abs | sign
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. Angles are in
//! radians.

mod diff;
mod parser;

use std::fmt;

use crate::error::{EvalError, ParseError};
use crate::geometry::HyperBox;

/// Elementary functions supported by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    /// Derivative of `abs`; evaluation fails at exactly zero.
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

/// Expression tree. Variables are indices into the owning spec's variable list.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, point: &[f64], names: &[String]) -> Result<f64, EvalError> {
        let node = || self.display(names).to_string();
        let value = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => point[*i],
            Expr::Neg(a) => -a.eval(point, names)?,
            Expr::Add(a, b) => a.eval(point, names)? + b.eval(point, names)?,
            Expr::Sub(a, b) => a.eval(point, names)? - b.eval(point, names)?,
            Expr::Mul(a, b) => a.eval(point, names)? * b.eval(point, names)?,
            Expr::Div(a, b) => {
                let num = a.eval(point, names)?;
                let den = b.eval(point, names)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero { node: node() });
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(point, names)?;
                if base == 0.0 && *k < 0 {
                    return Err(EvalError::DivisionByZero { node: node() });
                }
                base.powi(*k)
            }
            Expr::Call(f, a) => {
                let x = a.eval(point, names)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(EvalError::LogDomain {
                                node: node(),
                                value: x,
                            });
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(EvalError::SqrtDomain {
                                node: node(),
                                value: x,
                            });
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                    Func::Sign => {
                        if x == 0.0 {
                            return Err(EvalError::SignAtZero { node: node() });
                        }
                        x.signum()
                    }
                }
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(EvalError::NonFinite { node: node() })
        }
    }

    /// Fully parenthesised rendering that parses back to the same tree.
    pub fn display<'a>(&'a self, names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, names }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl<'a> ExprDisplay<'a> {
    fn sub(&self, expr: &'a Expr) -> ExprDisplay<'a> {
        ExprDisplay {
            expr,
            names: self.names,
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| self.sub(e);
        match self.expr {
            Expr::Const(c) if c.is_sign_negative() => write!(f, "(-{})", -c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "{}", self.names[*i]),
            Expr::Neg(a) => write!(f, "(-{})", sub(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", sub(a), sub(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", sub(a), sub(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", sub(a), sub(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", sub(a), sub(b)),
            Expr::Pow(a, k) => {
                // The grammar rejects `a^2^3`, so a power base is wrapped.
                match a.as_ref() {
                    Expr::Pow(..) => write!(f, "({})", sub(a))?,
                    _ => write!(f, "{}", sub(a))?,
                }
                if *k < 0 {
                    write!(f, "^(-{})", -(*k as i64))
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}

/// A vector-valued function over `d` named variables.
///
/// The first `n_state` variables are states, the rest are inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSpec {
    variables: Vec<String>,
    n_state: usize,
    outputs: Vec<Expr>,
}

impl FunctionSpec {
    pub fn new(
        variables: Vec<String>,
        n_state: usize,
        outputs: Vec<Expr>,
    ) -> Result<Self, ParseError> {
        if outputs.is_empty() {
            return Err(ParseError::NoOutputs);
        }
        if n_state > variables.len() {
            return Err(ParseError::StateCount {
                n_state,
                vars: variables.len(),
            });
        }
        for (i, name) in variables.iter().enumerate() {
            if variables[..i].contains(name) {
                return Err(ParseError::DuplicateVariable(name.clone()));
            }
        }
        if let Some(i) = outputs.iter().filter_map(Expr::max_var).max() {
            if i >= variables.len() {
                return Err(ParseError::UnknownVariable {
                    name: format!("#{i}"),
                    offset: 0,
                });
            }
        }
        Ok(Self {
            variables,
            n_state,
            outputs,
        })
    }

    /// Parses a `;`-separated expression list over `variables`.
    pub fn parse<S: AsRef<str>>(
        text: &str,
        variables: &[S],
        n_state: usize,
    ) -> Result<Self, ParseError> {
        let variables: Vec<String> = variables.iter().map(|v| v.as_ref().to_string()).collect();
        let outputs = parser::parse_list(text, &variables)?;
        Self::new(variables, n_state, outputs)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn n_state(&self) -> usize {
        self.n_state
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn outputs(&self) -> &[Expr] {
        &self.outputs
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.check_dim(point)?;
        self.outputs
            .iter()
            .map(|e| e.eval(point, &self.variables))
            .collect()
    }

    pub fn evaluate_output(&self, k: usize, point: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(point)?;
        self.outputs[k].eval(point, &self.variables)
    }

    fn check_dim(&self, point: &[f64]) -> Result<(), EvalError> {
        if point.len() == self.dim() {
            Ok(())
        } else {
            Err(EvalError::Dimension {
                expected: self.dim(),
                found: point.len(),
            })
        }
    }

    /// Symbolic partial derivative of every output with respect to variable
    /// `var` (by index).
    pub fn differentiate(&self, var: usize) -> FunctionSpec {
        FunctionSpec {
            variables: self.variables.clone(),
            n_state: self.n_state,
            outputs: self
                .outputs
                .iter()
                .map(|e| diff::derivative(e, var))
                .collect(),
        }
    }

    /// Same as [`FunctionSpec::differentiate`] but by variable name.
    pub fn differentiate_by(&self, name: &str) -> Option<FunctionSpec> {
        self.variable_index(name).map(|i| self.differentiate(i))
    }

    /// One spec per variable holding the partial derivatives of all outputs.
    pub fn jacobian(&self) -> Vec<FunctionSpec> {
        (0..self.dim()).map(|j| self.differentiate(j)).collect()
    }

    /// Single-output spec for output `k`.
    pub fn component(&self, k: usize) -> FunctionSpec {
        FunctionSpec {
            variables: self.variables.clone(),
            n_state: self.n_state,
            outputs: vec![self.outputs[k].clone()],
        }
    }

    /// Each output rendered in the parseable grammar.
    pub fn expression_strings(&self) -> Vec<String> {
        self.outputs
            .iter()
            .map(|e| e.display(&self.variables).to_string())
            .collect()
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expression_strings().join("; "))
    }
}

/// A named function shipped with the crate together with its canonical domain.
#[derive(Clone, Debug)]
pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: FunctionSpec,
    pub domain: HyperBox,
}

pub const BUILTIN_NAMES: [&str; 2] = ["xcosy", "dubins"];

pub fn builtin(name: &str) -> Result<Builtin, ParseError> {
    use std::f64::consts::PI;
    let (description, text, vars, n_state, lower, upper): (_, _, &[&str], _, _, _) = match name {
        "xcosy" => (
            "x*cos(y) on [-2,2] x [0,2pi]",
            "x*cos(y)",
            &["x", "y"],
            1,
            vec![-2.0, 0.0],
            vec![2.0, 2.0 * PI],
        ),
        "dubins" => (
            "Dubins vehicle velocity field (v*cos(phi), v*sin(phi)), v in [20,30], phi in [-0.44,0.44]",
            "v*cos(phi); v*sin(phi)",
            &["v", "phi"],
            2,
            vec![20.0, -0.44],
            vec![30.0, 0.44],
        ),
        other => return Err(ParseError::UnknownBuiltin(other.to_string())),
    };
    let spec = FunctionSpec::parse(text, vars, n_state)?;
    let domain = HyperBox::new(lower, upper).expect("builtin domains are valid");
    let name = BUILTIN_NAMES
        .iter()
        .find(|n| **n == name)
        .copied()
        .unwrap_or("");
    Ok(Builtin {
        name,
        description,
        spec,
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn xcosy() -> FunctionSpec {
        FunctionSpec::parse("x*cos(y)", &["x", "y"], 1).unwrap()
    }

    #[test]
    fn parses_builtin_functions() {
        assert_eq!(xcosy().output_count(), 1);
        let dubins = FunctionSpec::parse("v*cos(phi); v*sin(phi)", &["v", "phi"], 2).unwrap();
        assert_eq!(dubins.output_count(), 2);
    }

    #[test]
    fn syntax_error_carries_offset() {
        let err = FunctionSpec::parse("x*+2", &["x"], 1).unwrap_err();
        assert!(
            matches!(err, ParseError::Syntax { offset: 2, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn unknown_names_are_rejected() {
        let err = FunctionSpec::parse("x + z", &["x"], 1).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownVariable {
                name: "z".into(),
                offset: 4
            }
        );
        let err = FunctionSpec::parse("cosh(x)", &["x"], 1).unwrap_err();
        assert!(matches!(
            err,
            ParseError::UnsupportedFunction { offset: 0, .. }
        ));
        assert!(FunctionSpec::parse("x", &["x", "x"], 1).is_err());
        assert!(FunctionSpec::parse("", &["x"], 1).is_err());
    }

    #[test]
    fn evaluates_examples() {
        assert_eq!(xcosy().evaluate(&[2.0, 0.0]).unwrap(), vec![2.0]);
        assert_eq!(xcosy().evaluate(&[2.0, PI]).unwrap(), vec![-2.0]);
        let dubins = builtin("dubins").unwrap().spec;
        assert_eq!(dubins.evaluate(&[25.0, 0.0]).unwrap(), vec![25.0, 0.0]);
        assert!(xcosy().evaluate(&[1.0]).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let s = |t: &str| {
            FunctionSpec::parse(t, &["x"], 1)
                .unwrap()
                .evaluate(&[3.0])
                .unwrap()[0]
        };
        assert_eq!(s("-x^2"), -9.0);
        assert_eq!(s("(-x)^2"), 9.0);
        assert_eq!(s("1 - 2 - 3"), -4.0);
        assert_eq!(s("8 / 4 / 2"), 1.0);
        assert_eq!(s("2 + 3 * x"), 11.0);
        assert_eq!(s("x^-1"), 1.0 / 3.0);
        assert_eq!(s("x^(-2)"), 1.0 / 9.0);
        assert_eq!(s("2*pi"), 2.0 * PI);
        assert_eq!(s("1.5e1 + 2*-x"), 9.0);
        assert!(FunctionSpec::parse("x^2.5", &["x"], 1).is_err());
        assert!(FunctionSpec::parse("x^2^3", &["x"], 1).is_err());
    }

    #[test]
    fn domain_violations_name_the_node() {
        let spec = FunctionSpec::parse("log(x) + 1/(x - 1)", &["x"], 1).unwrap();
        match spec.evaluate(&[0.0]).unwrap_err() {
            EvalError::LogDomain { node, .. } => assert_eq!(node, "log(x)"),
            other => panic!("{other:?}"),
        }
        match spec.evaluate(&[1.0]).unwrap_err() {
            EvalError::DivisionByZero { node } => assert_eq!(node, "(1 / (x - 1))"),
            other => panic!("{other:?}"),
        }
        let sq = FunctionSpec::parse("sqrt(x)", &["x"], 1).unwrap();
        assert!(matches!(
            sq.evaluate(&[-1.0]),
            Err(EvalError::SqrtDomain { .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        let f = xcosy();
        let dy = f.differentiate_by("y").unwrap();
        let dx = f.differentiate_by("x").unwrap();
        let dyy = dy.differentiate_by("y").unwrap();
        for &(x, y) in &[(1.3, 0.4), (-2.0, 5.0), (0.7, -1.1)] {
            let p = [x, y];
            assert!((dy.evaluate(&p).unwrap()[0] + x * y.sin()).abs() < 1e-14);
            assert!((dx.evaluate(&p).unwrap()[0] - y.cos()).abs() < 1e-14);
            assert!((dyy.evaluate(&p).unwrap()[0] + x * y.cos()).abs() < 1e-14);
        }
        assert_eq!(dx.to_string(), "cos(y)");
    }

    #[test]
    fn abs_derivative_fails_at_zero() {
        let f = FunctionSpec::parse("abs(x)", &["x"], 1).unwrap();
        let d = f.differentiate(0);
        assert_eq!(d.evaluate(&[-2.0]).unwrap(), vec![-1.0]);
        assert_eq!(d.evaluate(&[0.5]).unwrap(), vec![1.0]);
        assert!(matches!(
            d.evaluate(&[0.0]),
            Err(EvalError::SignAtZero { .. })
        ));
    }

    #[test]
    fn builtins() {
        let b = builtin("xcosy").unwrap();
        assert_eq!(b.spec.output_count(), 1);
        assert_eq!(b.domain.lower(), &[-2.0, 0.0]);
        assert_eq!(b.domain.upper(), &[2.0, 2.0 * PI]);
        let b = builtin("dubins").unwrap();
        assert_eq!(b.spec.output_count(), 2);
        assert_eq!(b.domain.lower(), &[20.0, -0.44]);
        assert_eq!(b.domain.upper(), &[30.0, 0.44]);
        assert_eq!(
            builtin("foo").unwrap_err(),
            ParseError::UnknownBuiltin("foo".into())
        );
    }

    #[test]
    fn printed_form_round_trips() {
        let text =
            "-x^2 + 3.25*sin(y)/(1 + y^2) - exp(-x) * abs(y - 0.1); tan(x)^(-1) - sqrt(2)*log(3)";
        let spec = FunctionSpec::parse(text, &["x", "y"], 1).unwrap();
        let printed = spec.to_string();
        let again = FunctionSpec::parse(&printed, &["x", "y"], 1).unwrap();
        assert_eq!(spec, again);
    }
}
