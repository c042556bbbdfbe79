use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GeometryError {
    #[error("box must have at least one dimension")]
    EmptyBox,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("axis {axis} is degenerate: [{lower}, {upper}]")]
    DegenerateAxis { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis} has resolution {resolution}; at least 2 grid points are required")]
    ResolutionTooSmall { axis: usize, resolution: usize },
    #[error("simplex vertices are not affinely independent")]
    DegenerateSimplex,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable `{name}` at byte {offset}")]
    UnknownVariable { name: String, offset: usize },
    #[error("unsupported function `{name}` at byte {offset}")]
    UnsupportedFunction { name: String, offset: usize },
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("state count {n_state} exceeds variable count {vars}")]
    StateCount { n_state: usize, vars: usize },
    #[error("expression list is empty")]
    NoOutputs,
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{node}`")]
    DivisionByZero { node: String },
    #[error("logarithm of non-positive value {value} in `{node}`")]
    LogDomain { node: String, value: f64 },
    #[error("square root of negative value {value} in `{node}`")]
    SqrtDomain { node: String, value: f64 },
    #[error("derivative of abs is undefined at 0 in `{node}`")]
    SignAtZero { node: String },
    #[error("non-finite result in `{node}`")]
    NonFinite { node: String },
    #[error("point has {found} coordinates, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("{source} at point {point:?}")]
    AtPoint {
        point: Vec<f64>,
        #[source]
        source: Box<EvalError>,
    },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LpError {
    #[error("constraint row {row} has {found} coefficients, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("linear program is infeasible (certificate rows {certificate:?})")]
    Infeasible { certificate: Vec<usize> },
    #[error("linear program is unbounded or infeasible")]
    Unbounded,
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

/// Crate-level error for operations spanning several modules.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed cover document: {0}")]
    Document(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
