//! Smoothness classes, interpolation error bounds and constant estimation.
//!
//! For a function sampled at the vertices of a simplex with ball radius
//! `delta_s`, the linear interpolant deviates from the function by at most
//!
//! | class     | bound                     |
//! |-----------|---------------------------|
//! | C0        | `2 * lambda * delta_s`    |
//! | Lipschitz | `lambda * delta_s`        |
//! | C1        | `max ||f'|| * delta_s`    |
//! | C2        | `max ||f''|| * delta_s^2 / 2` |
//!
//! and `delta_s <= sqrt(d / (2 (d + 1))) * delta` for a simplex of diameter
//! `delta`. Norms are Euclidean on inputs and per output component.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError};
use crate::funcspec::FunctionSpec;
use crate::geometry::{HyperBox, UniformMesh};
use crate::par;

pub const DEFAULT_INFLATION: f64 = 1.1;
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessClass {
    C0,
    Lipschitz,
    C1,
    C2,
}

impl SmoothnessClass {
    pub const ALL: [SmoothnessClass; 4] = [Self::C0, Self::Lipschitz, Self::C1, Self::C2];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::C0 => "c0",
            Self::Lipschitz => "lipschitz",
            Self::C1 => "c1",
            Self::C2 => "c2",
        }
    }
}

impl fmt::Display for SmoothnessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SmoothnessClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "c0" => Ok(Self::C0),
            "lipschitz" => Ok(Self::Lipschitz),
            "c1" => Ok(Self::C1),
            "c2" => Ok(Self::C2),
            other => Err(Error::Config(format!("unknown smoothness class `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    UserSupplied,
    Estimated,
}

/// Class and constant for one output component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassConstant {
    pub class: SmoothnessClass,
    pub constant: f64,
    pub provenance: Provenance,
}

/// One [`ClassConstant`] per output component.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessSpec {
    entries: Vec<ClassConstant>,
}

impl SmoothnessSpec {
    pub fn new(entries: Vec<ClassConstant>) -> Result<Self, Error> {
        if entries.is_empty() {
            return Err(Error::Config("smoothness needs at least one entry".into()));
        }
        if let Some(e) = entries
            .iter()
            .find(|e| !(e.constant >= 0.0 && e.constant.is_finite()))
        {
            return Err(Error::Config(format!(
                "smoothness constant must be finite and nonnegative, got {}",
                e.constant
            )));
        }
        Ok(Self { entries })
    }

    /// User-supplied constants, all with the same class.
    pub fn supplied(class: SmoothnessClass, constants: &[f64]) -> Result<Self, Error> {
        Self::new(
            constants
                .iter()
                .map(|&constant| ClassConstant {
                    class,
                    constant,
                    provenance: Provenance::UserSupplied,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ClassConstant] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-output interpolation error bounds for one mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaVector {
    pub sigma: Vec<f64>,
    pub delta: f64,
    pub delta_s: f64,
}

impl SigmaVector {
    pub fn max(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }
}

/// Upper bound on the simplex ball radius for a simplex of diameter `delta`
/// in `d` dimensions.
pub fn simplex_radius_bound(delta: f64, d: usize) -> f64 {
    let d = d as f64;
    (d / (2.0 * (d + 1.0))).sqrt() * delta
}

pub fn sigma_bound(class: SmoothnessClass, kappa: f64, delta_s: f64) -> f64 {
    match class {
        SmoothnessClass::C0 => 2.0 * kappa * delta_s,
        SmoothnessClass::Lipschitz | SmoothnessClass::C1 => kappa * delta_s,
        SmoothnessClass::C2 => 0.5 * kappa * delta_s * delta_s,
    }
}

pub fn sigma_for_mesh(mesh: &UniformMesh, smoothness: &SmoothnessSpec) -> SigmaVector {
    let delta = mesh.element_diameter();
    let delta_s = simplex_radius_bound(delta, mesh.bounds().dim());
    let sigma = smoothness
        .entries()
        .iter()
        .map(|e| sigma_bound(e.class, e.constant, delta_s))
        .collect();
    SigmaVector {
        sigma,
        delta,
        delta_s,
    }
}

/// Symbolic first and second derivatives of a spec.
struct Derivatives {
    gradient: Vec<FunctionSpec>,
    /// Upper triangle `(j, l, d^2 f / dx_j dx_l)` with `j <= l`.
    hessian: Vec<(usize, usize, FunctionSpec)>,
}

impl Derivatives {
    fn new(spec: &FunctionSpec, second_order: bool) -> Self {
        let gradient = spec.jacobian();
        let hessian = if second_order {
            gradient
                .iter()
                .enumerate()
                .flat_map(|(j, g)| (j..spec.dim()).map(move |l| (j, l, g.differentiate(l))))
                .collect()
        } else {
            Vec::new()
        };
        Self { gradient, hessian }
    }

    fn gradient_norms(&self, point: &[f64], outputs: usize) -> Result<Vec<f64>, EvalError> {
        let mut sq = vec![0.0; outputs];
        for g in &self.gradient {
            for (s, v) in sq.iter_mut().zip(g.evaluate(point)?) {
                *s += v * v;
            }
        }
        Ok(sq.into_iter().map(f64::sqrt).collect())
    }

    fn hessian_norms(
        &self,
        point: &[f64],
        outputs: usize,
        d: usize,
    ) -> Result<Vec<f64>, EvalError> {
        let mut mats = vec![DMatrix::<f64>::zeros(d, d); outputs];
        for (j, l, h) in &self.hessian {
            for (m, v) in mats.iter_mut().zip(h.evaluate(point)?) {
                m[(*j, *l)] = v;
                m[(*l, *j)] = v;
            }
        }
        Ok(mats.into_iter().map(spectral_norm_symmetric).collect())
    }
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_symmetric(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.symmetric_eigenvalues()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

/// Raw per-output maxima of the class quantity (gradient norm, or Hessian
/// spectral norm for C2) over a `samples_per_axis^d` grid.
pub fn sampled_maxima(
    spec: &FunctionSpec,
    bounds: &HyperBox,
    class: SmoothnessClass,
    samples_per_axis: usize,
) -> Result<Vec<f64>, Error> {
    if samples_per_axis < 2 {
        return Err(Error::Config(
            "estimation needs at least 2 samples per axis".into(),
        ));
    }
    let mesh = UniformMesh::uniform(bounds.clone(), samples_per_axis)?;
    let points = mesh.grid_points();
    let second_order = class == SmoothnessClass::C2;
    let derivs = Derivatives::new(spec, second_order);
    let outputs = spec.output_count();
    let d = spec.dim();
    let per_point = par::try_map(&points, |p| {
        let norms = if second_order {
            derivs.hessian_norms(p, outputs, d)
        } else {
            derivs.gradient_norms(p, outputs)
        };
        norms.map_err(|e| EvalError::AtPoint {
            point: p.clone(),
            source: Box::new(e),
        })
    })?;
    Ok(per_point.into_iter().fold(vec![0.0; outputs], |acc, row| {
        acc.into_iter().zip(row).map(|(a, b)| a.max(b)).collect()
    }))
}

/// Sampling estimate of the class constant for each output, multiplied by
/// `inflation`.
///
/// C0 and Lipschitz use the gradient-norm maximum, C1 likewise, C2 the
/// maximum spectral norm of the Hessian.
pub fn estimate_constants(
    spec: &FunctionSpec,
    bounds: &HyperBox,
    class: SmoothnessClass,
    samples_per_axis: usize,
    inflation: f64,
) -> Result<SmoothnessSpec, Error> {
    if !(inflation >= 1.0 && inflation.is_finite()) {
        return Err(Error::Config(format!(
            "inflation must be >= 1, got {inflation}"
        )));
    }
    let maxima = sampled_maxima(spec, bounds, class, samples_per_axis)?;
    SmoothnessSpec::new(
        maxima
            .into_iter()
            .map(|m| ClassConstant {
                class,
                constant: inflation * m,
                provenance: Provenance::Estimated,
            })
            .collect(),
    )
}

/// Comparison of a user-supplied constant with a sampled lower bound on the
/// true constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantAudit {
    pub output: usize,
    pub class: SmoothnessClass,
    pub supplied: f64,
    pub sampled: f64,
    /// The sampled maximum already exceeds the supplied constant.
    pub contradicted: bool,
}

/// Checks user-supplied constants against sampled maxima. Estimated entries
/// are skipped.
pub fn audit_constants(
    spec: &FunctionSpec,
    bounds: &HyperBox,
    smoothness: &SmoothnessSpec,
    samples_per_axis: usize,
) -> Result<Vec<ConstantAudit>, Error> {
    let mut audits = Vec::new();
    for class in SmoothnessClass::ALL {
        let wanted: Vec<usize> = smoothness
            .entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class == class && e.provenance == Provenance::UserSupplied)
            .map(|(k, _)| k)
            .collect();
        if wanted.is_empty() {
            continue;
        }
        let maxima = sampled_maxima(spec, bounds, class, samples_per_axis)?;
        for k in wanted {
            let supplied = smoothness.entries()[k].constant;
            audits.push(ConstantAudit {
                output: k,
                class,
                supplied,
                sampled: maxima[k],
                contradicted: maxima[k] > supplied,
            });
        }
    }
    audits.sort_by_key(|a| a.output);
    Ok(audits)
}
