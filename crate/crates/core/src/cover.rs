//! Recursive construction of an epsilon-accurate cover.
//!
//! A region is abstracted; if its error exceeds epsilon it is bisected along
//! every axis and each child is handled the same way. Leaves are emitted in
//! depth-first order with children in [`HyperBox::subdivide`] order, which
//! makes the leaf list independent of how children are scheduled.

use std::time::{Duration, Instant};

use crate::abstraction::{
    abstract_constraint_region, abstract_region, is_infeasible, sample_grid, AbstractionPair,
    ObjectiveMode,
};
use crate::error::Error;
use crate::funcspec::FunctionSpec;
use crate::geometry::{HyperBox, UniformMesh};
use crate::par;
use crate::smoothness::SmoothnessSpec;

pub const DEFAULT_MAX_DEPTH: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct CoverRequest {
    pub spec: FunctionSpec,
    pub root: HyperBox,
    /// Grid points per axis, reused unchanged at every depth.
    pub resolution: Vec<usize>,
    pub epsilon: f64,
    pub smoothness: SmoothnessSpec,
    pub mode: ObjectiveMode,
    pub max_depth: usize,
    /// Abstract `g <= 0` constraints instead of dynamics.
    pub constraint: bool,
}

impl CoverRequest {
    pub fn new(
        spec: FunctionSpec,
        root: HyperBox,
        resolution: Vec<usize>,
        epsilon: f64,
        smoothness: SmoothnessSpec,
    ) -> Self {
        Self {
            spec,
            root,
            resolution,
            epsilon,
            smoothness,
            mode: ObjectiveMode::Theta,
            max_depth: DEFAULT_MAX_DEPTH,
            constraint: false,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.spec.dim() != self.root.dim() {
            return Err(Error::Config(format!(
                "function has {} variables but the domain has {} dimensions",
                self.spec.dim(),
                self.root.dim()
            )));
        }
        if self.smoothness.len() != self.spec.output_count() {
            return Err(Error::Config(format!(
                "{} smoothness entries for {} outputs",
                self.smoothness.len(),
                self.spec.output_count()
            )));
        }
        UniformMesh::new(self.root.clone(), self.resolution.clone())?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LeafStatus {
    /// `error <= epsilon` (and, for constraints, the upper plane is
    /// nonpositive on the leaf).
    Certified,
    /// Maximum depth reached with `error > epsilon`. The pair is still a
    /// sound bracket.
    ErrorAboveEpsilon,
    /// Maximum depth reached without a nonpositive upper plane. The pair is
    /// the plain bracket of `g`.
    ConstraintInfeasible { diagnosis: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub bounds: HyperBox,
    pub pair: AbstractionPair,
    pub depth: usize,
    pub status: LeafStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverStats {
    pub leaf_count: usize,
    pub max_depth: usize,
    pub lp_solves: usize,
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub leaves: Vec<Leaf>,
    pub request: CoverRequest,
    pub stats: CoverStats,
}

impl Cover {
    pub fn is_complete(&self) -> bool {
        self.leaves
            .iter()
            .all(|l| l.status == LeafStatus::Certified)
    }

    pub fn has_infeasible_leaf(&self) -> bool {
        self.leaves
            .iter()
            .any(|l| matches!(l.status, LeafStatus::ConstraintInfeasible { .. }))
    }
}

/// Cover error and whether every leaf is certified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverError {
    pub value: f64,
    pub certified: bool,
}

/// Largest leaf error, flagged leaves included.
pub fn cover_error(cover: &Cover) -> CoverError {
    CoverError {
        value: cover
            .leaves
            .iter()
            .map(|l| l.pair.error)
            .fold(0.0, f64::max),
        certified: cover.is_complete(),
    }
}

/// First leaf (in stored order) whose closed box contains `point`.
pub fn lookup<'a>(cover: &'a Cover, point: &[f64]) -> Result<(usize, &'a Leaf), Error> {
    if !cover.request.root.contains(point) {
        return Err(Error::Config(format!(
            "point {point:?} is outside the cover domain"
        )));
    }
    cover
        .leaves
        .iter()
        .enumerate()
        .find(|(_, l)| l.bounds.contains(point))
        .ok_or_else(|| Error::Config(format!("no leaf contains {point:?}")))
}

struct Subtree {
    leaves: Vec<Leaf>,
    lp_solves: usize,
}

pub fn eps_cover(request: &CoverRequest) -> Result<Cover, Error> {
    request.validate()?;
    let start = Instant::now();
    let tree = build(request, &request.root, 0)?;
    let stats = CoverStats {
        leaf_count: tree.leaves.len(),
        max_depth: tree.leaves.iter().map(|l| l.depth).max().unwrap_or(0),
        lp_solves: tree.lp_solves,
        wall_time: start.elapsed(),
    };
    Ok(Cover {
        leaves: tree.leaves,
        request: request.clone(),
        stats,
    })
}

fn build(req: &CoverRequest, bounds: &HyperBox, depth: usize) -> Result<Subtree, Error> {
    let can_split = depth < req.max_depth;
    let leaf = |pair, status, lp_solves| {
        Ok(Subtree {
            leaves: vec![Leaf {
                bounds: bounds.clone(),
                pair,
                depth,
                status,
            }],
            lp_solves,
        })
    };
    let attempt = if req.constraint {
        abstract_constraint_region(
            &req.spec,
            bounds,
            &req.resolution,
            &req.smoothness,
            req.mode,
        )
    } else {
        abstract_region(
            &req.spec,
            bounds,
            &req.resolution,
            &req.smoothness,
            req.mode,
        )
    };
    let mut lp_solves = 1;
    match attempt {
        Ok(pair) if pair.error <= req.epsilon => {
            return leaf(pair, LeafStatus::Certified, lp_solves)
        }
        Ok(pair) if !can_split => return leaf(pair, LeafStatus::ErrorAboveEpsilon, lp_solves),
        Ok(_) => {}
        Err(e) if req.constraint && is_infeasible(&e) => {
            if !can_split {
                let pair = abstract_region(
                    &req.spec,
                    bounds,
                    &req.resolution,
                    &req.smoothness,
                    req.mode,
                )?;
                let diagnosis = diagnose_infeasible(req, bounds)?;
                return leaf(
                    pair,
                    LeafStatus::ConstraintInfeasible { diagnosis },
                    lp_solves + 1,
                );
            }
        }
        Err(e) => return Err(e),
    }
    let children = bounds.subdivide();
    let subtrees = par::try_map(&children, |child| build(req, child, depth + 1))?;
    let mut leaves = Vec::new();
    for sub in subtrees {
        lp_solves += sub.lp_solves;
        leaves.extend(sub.leaves);
    }
    Ok(Subtree { leaves, lp_solves })
}

fn diagnose_infeasible(req: &CoverRequest, bounds: &HyperBox) -> Result<String, Error> {
    let mesh = UniformMesh::new(bounds.clone(), req.resolution.clone())?;
    let samples = sample_grid(&req.spec, &mesh)?;
    let worst = samples
        .iter()
        .flat_map(|(p, v)| v.iter().enumerate().map(move |(k, &g)| (p, k, g)))
        .fold(None::<(&Vec<f64>, usize, f64)>, |best, cur| match best {
            Some(b) if b.2 >= cur.2 => Some(b),
            _ => Some(cur),
        });
    Ok(match worst {
        Some((p, k, g)) if g > 0.0 => {
            format!("constraint violated at sample {p:?}: output {k} = {g}")
        }
        _ => "no nonpositive affine upper bound at this resolution and sigma".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothness::SmoothnessClass;

    fn square_request(epsilon: f64) -> CoverRequest {
        CoverRequest::new(
            FunctionSpec::parse("x^2", &["x"], 1).unwrap(),
            HyperBox::unit(1).unwrap(),
            vec![2],
            epsilon,
            SmoothnessSpec::supplied(SmoothnessClass::C2, &[2.0]).unwrap(),
        )
    }

    #[test]
    fn square_splits_once() {
        let cover = eps_cover(&square_request(0.2)).unwrap();
        assert_eq!(cover.leaves.len(), 2);
        assert_eq!(
            cover.leaves[0].bounds,
            HyperBox::new(vec![0.0], vec![0.5]).unwrap()
        );
        assert_eq!(
            cover.leaves[1].bounds,
            HyperBox::new(vec![0.5], vec![1.0]).unwrap()
        );
        for l in &cover.leaves {
            assert!(l.pair.theta.abs() < 1e-9);
            assert_eq!(l.pair.sigma.sigma, vec![0.0625]);
            assert!((l.pair.error - 0.125).abs() < 1e-9);
            assert_eq!(l.depth, 1);
        }
        assert_eq!(cover.stats.lp_solves, 3);
        let e = cover_error(&cover);
        assert!((e.value - 0.125).abs() < 1e-9 && e.certified);
    }

    #[test]
    fn tie_is_accepted() {
        let cover = eps_cover(&square_request(0.5)).unwrap();
        assert_eq!(cover.leaves.len(), 1);
        assert_eq!(cover.leaves[0].depth, 0);
    }

    #[test]
    fn affine_needs_one_leaf() {
        let req = CoverRequest::new(
            FunctionSpec::parse("3*x - 2*y + 1", &["x", "y"], 1).unwrap(),
            HyperBox::new(vec![-1.0, -1.0], vec![2.0, 3.0]).unwrap(),
            vec![4, 4],
            1e-6,
            SmoothnessSpec::supplied(SmoothnessClass::C2, &[0.0]).unwrap(),
        );
        let cover = eps_cover(&req).unwrap();
        assert_eq!(cover.leaves.len(), 1);
        assert!(cover_error(&cover).value < 1e-8);
    }

    #[test]
    fn depth_limit_flags_leaves() {
        let mut req = square_request(0.01);
        req.max_depth = 1;
        let cover = eps_cover(&req).unwrap();
        assert_eq!(cover.leaves.len(), 2);
        assert!(cover
            .leaves
            .iter()
            .all(|l| l.status == LeafStatus::ErrorAboveEpsilon));
        assert!(!cover.is_complete());
        let e = cover_error(&cover);
        assert!(!e.certified && (e.value - 0.125).abs() < 1e-9);
    }

    #[test]
    fn lookup_tie_break() {
        let cover = eps_cover(&square_request(0.2)).unwrap();
        assert_eq!(lookup(&cover, &[0.25]).unwrap().0, 0);
        assert_eq!(lookup(&cover, &[0.5]).unwrap().0, 0);
        assert_eq!(lookup(&cover, &[0.75]).unwrap().0, 1);
        assert!(lookup(&cover, &[1.5]).is_err());
    }

    #[test]
    fn invalid_requests() {
        assert!(eps_cover(&square_request(0.0)).is_err());
        let mut req = square_request(0.1);
        req.resolution = vec![1];
        assert!(eps_cover(&req).is_err());
        req.resolution = vec![2, 2];
        assert!(eps_cover(&req).is_err());
    }

    #[test]
    fn infeasible_constraint_at_depth_zero() {
        let mut req = CoverRequest::new(
            FunctionSpec::parse("x^2 + u^2 - 1", &["x", "u"], 1).unwrap(),
            HyperBox::unit(2).unwrap(),
            vec![5, 5],
            10.0,
            SmoothnessSpec::supplied(SmoothnessClass::C2, &[2.0]).unwrap(),
        );
        req.constraint = true;
        req.max_depth = 0;
        let cover = eps_cover(&req).unwrap();
        assert_eq!(cover.leaves.len(), 1);
        match &cover.leaves[0].status {
            LeafStatus::ConstraintInfeasible { diagnosis } => {
                assert!(
                    diagnosis.starts_with("constraint violated at sample"),
                    "{diagnosis}"
                )
            }
            other => panic!("{other:?}"),
        }
        assert!(cover.has_infeasible_leaf());
    }
}
