//! Flag definitions and the small value grammars they use.

use std::path::PathBuf;

use affine_abstraction::funcspec::FunctionSpec;
use affine_abstraction::geometry::HyperBox;
use affine_abstraction::smoothness::{
    SmoothnessClass, DEFAULT_INFLATION, DEFAULT_SAMPLES_PER_AXIS,
};
use affine_abstraction::verify::DEFAULT_TOLERANCE;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::CliError;

const GRAMMAR_HELP: &str = "\
Expressions (one per output, separated by ';'):
  expr    := term (('+' | '-') term)*
  term    := unary (('*' | '/') unary)*
  unary   := '-' unary | power
  power   := primary ('^' int)?        integer exponents only, e.g. x^2, x^(-1)
  primary := number | pi | name | func '(' expr ')' | '(' expr ')'
  func    := sin cos tan exp log sqrt abs sign
Angles are in radians. '^' binds tighter than unary minus.

Exit codes: 0 success, 1 usage/config/parse error, 2 partial cover (max depth hit),
3 constraint infeasible at max depth, 4 verification violations.";

#[derive(Debug, Parser)]
#[command(name = "affabs", version, about = "Piecewise-affine abstraction of nonlinear functions over boxes", after_long_help = GRAMMAR_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an epsilon-accurate cover and write it as JSON.
    Abstract(AbstractArgs),
    /// Check a cover by sampling and print a JSON report.
    Verify(VerifyArgs),
    /// Evaluate f and the cover bounds on a grid and write CSV.
    PlotData(PlotArgs),
    /// List builtin functions with domains and suggested constants.
    Builtins,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    C0,
    Lipschitz,
    C1,
    C2,
}

impl From<ClassArg> for SmoothnessClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::C0 => SmoothnessClass::C0,
            ClassArg::Lipschitz => SmoothnessClass::Lipschitz,
            ClassArg::C1 => SmoothnessClass::C1,
            ClassArg::C2 => SmoothnessClass::C2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Theta,
    Weighted,
}

#[derive(Debug, Args)]
#[command(after_long_help = GRAMMAR_HELP)]
#[command(group(ArgGroup::new("source").required(true).args(["builtin", "expr"])))]
#[command(group(ArgGroup::new("kappa").required(true).args(["constant", "estimate"])))]
pub struct AbstractArgs {
    /// Builtin function name (see `affabs builtins`).
    #[arg(long)]
    pub builtin: Option<String>,
    /// Expression list, outputs separated by ';'.
    #[arg(long, requires_all = ["vars", "nstate", "domain"])]
    pub expr: Option<String>,
    /// Comma-separated variable names, states first.
    #[arg(long)]
    pub vars: Option<String>,
    /// Number of leading variables that are states.
    #[arg(long)]
    pub nstate: Option<usize>,
    /// Domain as `a:[lo,hi];b:[lo,hi]`. Bounds may be constant expressions such as `2*pi`.
    #[arg(long)]
    pub domain: Option<String>,
    /// Smoothness class of every output.
    #[arg(long, value_enum)]
    pub class: ClassArg,
    /// Class constant, once per output or once for all outputs.
    #[arg(long, num_args = 1)]
    pub constant: Vec<f64>,
    /// Estimate constants by sampling on the domain.
    #[arg(long)]
    pub estimate: bool,
    /// Safety factor applied to estimated constants.
    #[arg(long, default_value_t = DEFAULT_INFLATION)]
    pub inflation: f64,
    /// Estimation samples per axis.
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_AXIS)]
    pub est_samples: usize,
    /// Grid points per axis: a scalar or a comma list.
    #[arg(long)]
    pub resolution: String,
    /// Target accuracy: every leaf must have error at most this.
    #[arg(long)]
    pub epsilon: f64,
    /// `theta` minimises the corner gap; `weighted` minimises
    /// gamma_a |A_u - A_l|_inf + gamma_h |h_u - h_l|_inf.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Theta)]
    pub objective: ObjectiveArg,
    /// Weight on the coefficient gap (weighted objective).
    #[arg(long, default_value_t = 0.5)]
    pub gamma_a: f64,
    /// Weight on the offset gap (weighted objective).
    #[arg(long, default_value_t = 5.0)]
    pub gamma_h: f64,
    /// Maximum number of bisection levels.
    #[arg(long, default_value_t = affine_abstraction::cover::DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    /// Abstract `g <= 0` constraints: require a nonpositive upper plane.
    #[arg(long)]
    pub constraint: bool,
    /// Accepted for interface symmetry. Construction uses no randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the recursion. Output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Output file. Standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Cover document written by `abstract`.
    #[arg(long)]
    pub cover: PathBuf,
    /// Samples per leaf.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Seed for the random part of the sample set.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Slack allowed before a sample counts as a violation.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    /// Worker threads. The report does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Cover document written by `abstract`.
    #[arg(long)]
    pub cover: PathBuf,
    /// Points per axis over the root box. 1 gives the lower corner only.
    #[arg(long)]
    pub grid: usize,
    /// Output CSV file. Standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Evaluates a constant expression such as `-pi/2`.
pub fn constant_expr(text: &str) -> Result<f64, CliError> {
    let spec = FunctionSpec::parse(text, &[] as &[&str], 0)
        .map_err(|e| CliError::Config(format!("bad constant `{text}`: {e}")))?;
    let v = spec
        .evaluate(&[])
        .map_err(|e| CliError::Config(format!("bad constant `{text}`: {e}")))?[0];
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("constant `{text}` is not finite")))
    }
}

/// Parses `a:[lo,hi];b:[lo,hi]` into a box ordered like `variables`.
pub fn parse_domain(text: &str, variables: &[String]) -> Result<HyperBox, CliError> {
    let mut lower = vec![f64::NAN; variables.len()];
    let mut upper = vec![f64::NAN; variables.len()];
    let mut seen = vec![false; variables.len()];
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::Config(format!("bad domain entry `{part}`, expected name:[lo,hi]"));
        let (name, range) = part.split_once(':').ok_or_else(bad)?;
        let name = name.trim();
        let inner = range
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
        let i = variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| CliError::Config(format!("domain names unknown variable `{name}`")))?;
        if seen[i] {
            return Err(CliError::Config(format!(
                "variable `{name}` appears twice in the domain"
            )));
        }
        seen[i] = true;
        lower[i] = constant_expr(lo.trim())?;
        upper[i] = constant_expr(hi.trim())?;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CliError::Config(format!(
            "domain is missing variable `{}`",
            variables[i]
        )));
    }
    HyperBox::new(lower, upper).map_err(|e| CliError::Config(e.to_string()))
}

/// `"10"` broadcasts to every axis, `"10,20"` gives one value per axis.
pub fn parse_resolution(text: &str, dim: usize) -> Result<Vec<usize>, CliError> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad resolution `{text}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    match values.len() {
        1 => Ok(vec![values[0]; dim]),
        n if n == dim => Ok(values),
        n => Err(CliError::Config(format!(
            "resolution has {n} entries for {dim} dimensions"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn domain_accepts_pi_and_any_order() {
        let b = parse_domain("y:[0, 2*pi]; x:[-2,2]", &names(&["x", "y"])).unwrap();
        assert_eq!(b.lower(), &[-2.0, 0.0]);
        assert_eq!(b.upper(), &[2.0, 2.0 * PI]);
    }

    #[test]
    fn domain_errors() {
        let v = names(&["x", "y"]);
        assert!(parse_domain("x:[0,1]", &v).is_err());
        assert!(parse_domain("x:[0,1];x:[0,1];y:[0,1]", &v).is_err());
        assert!(parse_domain("x:[0,1];z:[0,1]", &v).is_err());
        assert!(parse_domain("x:0,1;y:[0,1]", &v).is_err());
        assert!(parse_domain("x:[1,0];y:[0,1]", &v).is_err());
        assert!(parse_domain("x:[0,q];y:[0,1]", &v).is_err());
    }

    #[test]
    fn resolution_forms() {
        assert_eq!(parse_resolution("10", 2).unwrap(), vec![10, 10]);
        assert_eq!(parse_resolution("3, 4", 2).unwrap(), vec![3, 4]);
        assert!(parse_resolution("3,4,5", 2).is_err());
        assert!(parse_resolution("x", 1).is_err());
    }

    #[test]
    fn constants() {
        assert_eq!(constant_expr("-pi/2").unwrap(), -PI / 2.0);
        assert!(constant_expr("1/0").is_err());
    }
}
