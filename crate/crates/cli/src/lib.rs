//! The `affabs` command-line front-end.
//!
//! [`run`] parses arguments, dispatches to a subcommand and returns the
//! process exit code. Every subcommand is deterministic for a fixed flag set.

pub mod args;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use affine_abstraction::abstraction::ObjectiveMode;
use affine_abstraction::cover::{eps_cover, lookup, Cover, CoverRequest};
use affine_abstraction::document::CoverDocument;
use affine_abstraction::funcspec::{builtin, FunctionSpec, BUILTIN_NAMES};
use affine_abstraction::geometry::{HyperBox, UniformMesh};
use affine_abstraction::smoothness::{
    audit_constants, estimate_constants, SmoothnessClass, SmoothnessSpec, DEFAULT_INFLATION,
    DEFAULT_SAMPLES_PER_AXIS,
};
use affine_abstraction::verify::{check_constraint_cover, check_cover};
use clap::error::ErrorKind;
use clap::Parser;

use args::{AbstractArgs, Cli, Command, ObjectiveArg, PlotArgs, VerifyArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_VIOLATIONS: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] affine_abstraction::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let outcome = match cli.command {
        Command::Abstract(a) => with_threads(a.threads, || cmd_abstract(&a)),
        Command::Verify(v) => with_threads(v.threads, || cmd_verify(&v)),
        Command::PlotData(p) => cmd_plot_data(&p),
        Command::Builtins => cmd_builtins(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<R, CliError> + Send,
) -> Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R>(
    _threads: usize,
    f: impl FnOnce() -> Result<R, CliError>,
) -> Result<R, CliError> {
    f()
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

fn read_cover(path: &Path) -> Result<(CoverDocument, Cover), CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let doc = CoverDocument::from_json(&text)?;
    let cover = doc.to_cover()?;
    Ok((doc, cover))
}

fn request_from_args(a: &AbstractArgs) -> Result<CoverRequest, CliError> {
    let (spec, root) = match (&a.builtin, &a.expr) {
        (Some(name), _) => {
            let b = builtin(name).map_err(affine_abstraction::Error::from)?;
            let root = match &a.domain {
                Some(text) => args::parse_domain(text, b.spec.variables())?,
                None => b.domain,
            };
            (b.spec, root)
        }
        (None, Some(expr)) => {
            let vars: Vec<&str> = a
                .vars
                .as_deref()
                .unwrap_or("")
                .split(',')
                .map(str::trim)
                .collect();
            let spec = FunctionSpec::parse(expr, &vars, a.nstate.unwrap_or(0))
                .map_err(affine_abstraction::Error::from)?;
            let root = args::parse_domain(a.domain.as_deref().unwrap_or(""), spec.variables())?;
            (spec, root)
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of --builtin or --expr is required".into(),
            ))
        }
    };
    let class: SmoothnessClass = a.class.into();
    let n = spec.output_count();
    let smoothness = if a.estimate {
        estimate_constants(&spec, &root, class, a.est_samples, a.inflation)?
    } else {
        let constants = match a.constant.len() {
            1 => vec![a.constant[0]; n],
            k if k == n => a.constant.clone(),
            k => {
                return Err(CliError::Config(format!(
                    "{k} constants given for {n} outputs"
                )))
            }
        };
        SmoothnessSpec::supplied(class, &constants)?
    };
    let resolution = args::parse_resolution(&a.resolution, spec.dim())?;
    let mut request = CoverRequest::new(spec, root, resolution, a.epsilon, smoothness);
    request.mode = match a.objective {
        ObjectiveArg::Theta => ObjectiveMode::Theta,
        ObjectiveArg::Weighted => ObjectiveMode::weighted(a.gamma_a, a.gamma_h)?,
    };
    request.max_depth = a.max_depth;
    request.constraint = a.constraint;
    request.validate()?;
    Ok(request)
}

fn cmd_abstract(a: &AbstractArgs) -> Result<i32, CliError> {
    if a.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let request = request_from_args(a)?;
    let cover = eps_cover(&request)?;
    let doc = CoverDocument::from_cover(&cover, a.builtin.as_deref());
    write_output(a.out.as_deref(), &doc.to_json())?;
    let code = if cover.has_infeasible_leaf() {
        EXIT_INFEASIBLE
    } else if !cover.is_complete() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    };
    eprintln!(
        "{} leaves, max depth {}, {} LP solves, {:.3}s{}",
        cover.stats.leaf_count,
        cover.stats.max_depth,
        cover.stats.lp_solves,
        cover.stats.wall_time.as_secs_f64(),
        match code {
            EXIT_INFEASIBLE => ", constraint infeasible at max depth",
            EXIT_PARTIAL => ", partial (max depth reached)",
            _ => "",
        }
    );
    Ok(code)
}

fn cmd_verify(v: &VerifyArgs) -> Result<i32, CliError> {
    if v.samples == 0 {
        return Err(CliError::Config("--samples must be positive".into()));
    }
    let (_, cover) = read_cover(&v.cover)?;
    let spec = &cover.request.spec;
    let report = if cover.request.constraint {
        check_constraint_cover(&cover, spec, v.samples, v.seed, v.tolerance)?
    } else {
        check_cover(&cover, spec, v.samples, v.seed, v.tolerance)?
    };
    let audit = audit_constants(
        spec,
        &cover.request.root,
        &cover.request.smoothness,
        DEFAULT_SAMPLES_PER_AXIS,
    )?;
    let mut json = serde_json::to_value(&report).expect("report serialises");
    json["constant_audit"] = serde_json::to_value(&audit).expect("audit serialises");
    let mut text = serde_json::to_string_pretty(&json).expect("report serialises");
    text.push('\n');
    write_output(None, &text)?;
    for a in audit.iter().filter(|a| a.contradicted) {
        eprintln!(
            "warning: output {} {} constant {} is below the sampled value {}",
            a.output,
            a.class.as_str(),
            a.supplied,
            a.sampled
        );
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_VIOLATIONS
    })
}

/// Lexicographic grid with the first axis slowest. `g = 1` is the lower corner.
fn plot_points(root: &HyperBox, g: usize) -> Result<Vec<Vec<f64>>, CliError> {
    match g {
        0 => Err(CliError::Config("--grid must be positive".into())),
        1 => Ok(vec![root.lower().to_vec()]),
        _ => Ok(UniformMesh::uniform(root.clone(), g)
            .map_err(|e| CliError::Config(e.to_string()))?
            .grid_points()),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_plot_data(p: &PlotArgs) -> Result<i32, CliError> {
    let (_, cover) = read_cover(&p.cover)?;
    let spec = &cover.request.spec;
    let (d, n) = (spec.dim(), spec.output_count());
    let points = plot_points(&cover.request.root, p.grid)?;

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    for prefix in ["f", "upper", "lower"] {
        header.extend((1..=n).map(|k| format!("{prefix}_{k}")));
    }
    header.push("leaf_index".into());
    w.write_record(&header).map_err(csv_err)?;
    for z in &points {
        let f = spec
            .evaluate(z)
            .map_err(|e| CliError::Config(format!("cannot evaluate f at {z:?}: {e}")))?;
        let (index, leaf) = lookup(&cover, z)?;
        let mut row: Vec<String> = z.iter().copied().map(num).collect();
        row.extend(f.into_iter().map(num));
        row.extend(leaf.pair.upper.eval(z).into_iter().map(num));
        row.extend(leaf.pair.lower.eval(z).into_iter().map(num));
        row.push(index.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    let text = String::from_utf8(bytes).expect("csv output is ascii");
    write_output(p.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

/// Text listing used by `affabs builtins`.
pub fn builtins_listing() -> Result<String, CliError> {
    let mut out = String::new();
    for name in BUILTIN_NAMES {
        let b = builtin(name).map_err(affine_abstraction::Error::from)?;
        let domain: Vec<String> = b
            .spec
            .variables()
            .iter()
            .zip(b.domain.lower().iter().zip(b.domain.upper()))
            .map(|(v, (lo, hi))| format!("{v}:[{lo},{hi}]"))
            .collect();
        out.push_str(&format!("{name}\n"));
        out.push_str(&format!("  description: {}\n", b.description));
        out.push_str(&format!("  f: {}\n", b.spec));
        out.push_str(&format!("  n_state: {}\n", b.spec.n_state()));
        out.push_str(&format!("  domain: {}\n", domain.join(";")));
        out.push_str(&format!(
            "  suggested constants (sampled, {DEFAULT_SAMPLES_PER_AXIS} per axis, x{DEFAULT_INFLATION}):\n"
        ));
        for class in SmoothnessClass::ALL {
            let k = estimate_constants(
                &b.spec,
                &b.domain,
                class,
                DEFAULT_SAMPLES_PER_AXIS,
                DEFAULT_INFLATION,
            )?;
            let values: Vec<String> = k
                .entries()
                .iter()
                .map(|e| format!("{:.6}", e.constant))
                .collect();
            out.push_str(&format!(
                "    {:<9} {}\n",
                class.as_str(),
                values.join(", ")
            ));
        }
    }
    Ok(out)
}

fn cmd_builtins() -> Result<i32, CliError> {
    write_output(None, &builtins_listing()?)?;
    Ok(EXIT_OK)
}
