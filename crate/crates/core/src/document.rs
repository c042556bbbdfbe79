//! JSON cover documents.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same double, so `parse(serialize(cover))` is bitwise exact. Wall-clock
//! time is not stored, which keeps documents byte-identical across runs.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::abstraction::{AbstractionPair, AffineMap, ObjectiveMode};
use crate::cover::{Cover, CoverRequest, CoverStats, Leaf, LeafStatus};
use crate::error::Error;
use crate::funcspec::FunctionSpec;
use crate::geometry::HyperBox;
use crate::smoothness::{ClassConstant, SigmaVector, SmoothnessSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionDoc {
    /// Builtin name when the function came from the catalog.
    pub builtin: Option<String>,
    pub expressions: Vec<String>,
    pub variables: Vec<String>,
    pub n_state: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDoc {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveDoc {
    pub variant: String,
    pub gamma_a: Option<f64>,
    pub gamma_h: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineDoc {
    /// Row-major `outputs x variables`.
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafDoc {
    #[serde(rename = "box")]
    pub bounds: BoxDoc,
    pub upper: AffineDoc,
    pub lower: AffineDoc,
    pub theta: f64,
    pub sigma: Vec<f64>,
    pub delta: f64,
    pub delta_s: f64,
    pub error: f64,
    pub objective_value: f64,
    pub constraint_margin: Option<f64>,
    pub depth: usize,
    pub status: String,
    pub diagnosis: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub leaf_count: usize,
    pub max_depth: usize,
    pub lp_solves: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverDocument {
    pub format_version: u32,
    pub function: FunctionDoc,
    pub domain: BoxDoc,
    pub epsilon: f64,
    pub resolution: Vec<usize>,
    pub smoothness: Vec<ClassConstant>,
    pub objective: ObjectiveDoc,
    pub constraint: bool,
    pub max_depth: usize,
    pub leaves: Vec<LeafDoc>,
    pub statistics: StatsDoc,
    pub complete: bool,
}

fn box_doc(b: &HyperBox) -> BoxDoc {
    BoxDoc {
        lower: b.lower().to_vec(),
        upper: b.upper().to_vec(),
    }
}

fn affine_doc(a: &AffineMap) -> AffineDoc {
    AffineDoc {
        c: a.coefficients().to_vec(),
        h: a.offset().to_vec(),
    }
}

fn objective_doc(mode: ObjectiveMode) -> ObjectiveDoc {
    match mode {
        ObjectiveMode::Theta => ObjectiveDoc {
            variant: "theta".into(),
            gamma_a: None,
            gamma_h: None,
        },
        ObjectiveMode::Weighted { gamma_a, gamma_h } => ObjectiveDoc {
            variant: "weighted".into(),
            gamma_a: Some(gamma_a),
            gamma_h: Some(gamma_h),
        },
    }
}

fn status_fields(status: &LeafStatus) -> (String, Option<String>) {
    match status {
        LeafStatus::Certified => ("certified".into(), None),
        LeafStatus::ErrorAboveEpsilon => ("error-above-epsilon".into(), None),
        LeafStatus::ConstraintInfeasible { diagnosis } => {
            ("constraint-infeasible".into(), Some(diagnosis.clone()))
        }
    }
}

impl CoverDocument {
    pub fn from_cover(cover: &Cover, builtin: Option<&str>) -> Self {
        let req = &cover.request;
        let leaves = cover
            .leaves
            .iter()
            .map(|l| {
                let (status, diagnosis) = status_fields(&l.status);
                LeafDoc {
                    bounds: box_doc(&l.bounds),
                    upper: affine_doc(&l.pair.upper),
                    lower: affine_doc(&l.pair.lower),
                    theta: l.pair.theta,
                    sigma: l.pair.sigma.sigma.clone(),
                    delta: l.pair.sigma.delta,
                    delta_s: l.pair.sigma.delta_s,
                    error: l.pair.error,
                    objective_value: l.pair.objective_value,
                    constraint_margin: l.pair.constraint_margin,
                    depth: l.depth,
                    status,
                    diagnosis,
                }
            })
            .collect();
        CoverDocument {
            format_version: FORMAT_VERSION,
            function: FunctionDoc {
                builtin: builtin.map(str::to_string),
                expressions: req.spec.expression_strings(),
                variables: req.spec.variables().to_vec(),
                n_state: req.spec.n_state(),
            },
            domain: box_doc(&req.root),
            epsilon: req.epsilon,
            resolution: req.resolution.clone(),
            smoothness: req.smoothness.entries().to_vec(),
            objective: objective_doc(req.mode),
            constraint: req.constraint,
            max_depth: req.max_depth,
            leaves,
            statistics: StatsDoc {
                leaf_count: cover.stats.leaf_count,
                max_depth: cover.stats.max_depth,
                lp_solves: cover.stats.lp_solves,
            },
            complete: cover.is_complete(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: CoverDocument =
            serde_json::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Document(format!(
                "unsupported format version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }

    pub fn function_spec(&self) -> Result<FunctionSpec, Error> {
        let text = self.function.expressions.join("; ");
        Ok(FunctionSpec::parse(
            &text,
            &self.function.variables,
            self.function.n_state,
        )?)
    }

    fn objective_mode(&self) -> Result<ObjectiveMode, Error> {
        match (
            self.objective.variant.as_str(),
            self.objective.gamma_a,
            self.objective.gamma_h,
        ) {
            ("theta", _, _) => Ok(ObjectiveMode::Theta),
            ("weighted", Some(a), Some(h)) => ObjectiveMode::weighted(a, h),
            (other, _, _) => Err(Error::Document(format!("bad objective `{other}`"))),
        }
    }

    /// Rebuilds the in-memory cover. Wall time is reported as zero.
    pub fn to_cover(&self) -> Result<Cover, Error> {
        let doc_err = |e: Error| Error::Document(e.to_string());
        let spec = self.function_spec().map_err(doc_err)?;
        let root = HyperBox::new(self.domain.lower.clone(), self.domain.upper.clone())
            .map_err(|e| doc_err(e.into()))?;
        let smoothness = SmoothnessSpec::new(self.smoothness.clone()).map_err(doc_err)?;
        let mode = self.objective_mode()?;
        let request = CoverRequest {
            spec,
            root,
            resolution: self.resolution.clone(),
            epsilon: self.epsilon,
            smoothness,
            mode,
            max_depth: self.max_depth,
            constraint: self.constraint,
        };
        request.validate().map_err(doc_err)?;
        let n = request.spec.output_count();
        let d = request.spec.dim();
        let mut leaves = Vec::with_capacity(self.leaves.len());
        for (i, l) in self.leaves.iter().enumerate() {
            let ctx = |e: Error| Error::Document(format!("leaf {i}: {e}"));
            let bounds = HyperBox::new(l.bounds.lower.clone(), l.bounds.upper.clone())
                .map_err(|e| ctx(e.into()))?;
            if bounds.dim() != d || l.sigma.len() != n {
                return Err(ctx(Error::Config("dimension mismatch".into())));
            }
            let upper = AffineMap::new(n, d, l.upper.c.clone(), l.upper.h.clone()).map_err(ctx)?;
            let lower = AffineMap::new(n, d, l.lower.c.clone(), l.lower.h.clone()).map_err(ctx)?;
            let status = match (l.status.as_str(), &l.diagnosis) {
                ("certified", _) => LeafStatus::Certified,
                ("error-above-epsilon", _) => LeafStatus::ErrorAboveEpsilon,
                ("constraint-infeasible", diag) => LeafStatus::ConstraintInfeasible {
                    diagnosis: diag.clone().unwrap_or_default(),
                },
                (other, _) => return Err(ctx(Error::Config(format!("unknown status `{other}`")))),
            };
            leaves.push(Leaf {
                bounds,
                pair: AbstractionPair {
                    upper,
                    lower,
                    theta: l.theta,
                    sigma: SigmaVector {
                        sigma: l.sigma.clone(),
                        delta: l.delta,
                        delta_s: l.delta_s,
                    },
                    error: l.error,
                    objective: mode,
                    objective_value: l.objective_value,
                    constraint_margin: l.constraint_margin,
                },
                depth: l.depth,
                status,
            });
        }
        if leaves.is_empty() {
            return Err(Error::Document("cover has no leaves".into()));
        }
        Ok(Cover {
            leaves,
            request,
            stats: CoverStats {
                leaf_count: self.statistics.leaf_count,
                max_depth: self.statistics.max_depth,
                lp_solves: self.statistics.lp_solves,
                wall_time: Duration::ZERO,
            },
        })
    }
}
