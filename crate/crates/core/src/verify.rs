//! Sampling-based checks of `lower <= f <= upper`.
//!
//! Samples are a regular lattice with `floor(N^(1/d))` points per axis plus
//! uniform random points from a seeded ChaCha8 stream, `N` in total. A pass
//! here is evidence, not proof: the formal guarantee rests on the smoothness
//! constants being valid, which sampling cannot establish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::abstraction::AbstractionPair;
use crate::cover::{cover_error, Cover};
use crate::error::Error;
use crate::funcspec::FunctionSpec;
use crate::geometry::{HyperBox, UniformMesh};
use crate::par;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

pub const CAVEAT: &str = "sampling-based verification: zero violations is evidence, not proof; \
soundness of the abstraction rests on the validity of the smoothness constants";

/// Per-box sampling outcome.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafReport {
    pub leaf: usize,
    pub samples: usize,
    pub violations: usize,
    pub evaluation_errors: usize,
    /// `min (upper - f)` over samples and outputs.
    pub worst_upper_margin: f64,
    /// `min (f - lower)` over samples and outputs.
    pub worst_lower_margin: f64,
    /// `max (upper - lower)` over samples and outputs.
    pub max_gap: f64,
    /// Constraint mode: `max upper` over samples and leaf corners.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_upper_value: Option<f64>,
    /// Constraint mode: samples or corners where `upper > tolerance`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonpositivity_violations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub caveat: String,
    pub seed: u64,
    pub tolerance: f64,
    pub samples: usize,
    pub violations: usize,
    pub evaluation_errors: usize,
    pub worst_upper_margin: f64,
    pub worst_lower_margin: f64,
    pub max_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover_error: Option<f64>,
    /// Observed gap stays within the cover error (plus tolerance).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_within_error: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_upper_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonpositivity_violations: Option<usize>,
    pub leaves: Vec<LeafReport>,
}

impl VerificationReport {
    /// No sandwich violations, no gap excess, no positive constraint bound.
    pub fn passed(&self) -> bool {
        self.violations == 0
            && self.gap_within_error != Some(false)
            && self.nonpositivity_violations.unwrap_or(0) == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Lattice plus seeded random points, `count` in total.
pub fn sample_points(bounds: &HyperBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = bounds.dim();
    let mut per_axis = (count as f64).powf(1.0 / d as f64).floor() as usize;
    while per_axis > 1 && per_axis.checked_pow(d as u32).is_none_or(|p| p > count) {
        per_axis -= 1;
    }
    while (per_axis + 1)
        .checked_pow(d as u32)
        .is_some_and(|p| p <= count)
    {
        per_axis += 1;
    }
    let mut points = if per_axis >= 2 {
        UniformMesh::uniform(bounds.clone(), per_axis)
            .expect("valid lattice")
            .grid_points()
    } else {
        Vec::new()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while points.len() < count {
        points.push(
            bounds
                .lower()
                .iter()
                .zip(bounds.upper())
                .map(|(&lo, &hi)| rng.gen_range(lo..=hi))
                .collect(),
        );
    }
    points
}

fn leaf_seed(seed: u64, leaf: usize) -> u64 {
    seed ^ (leaf as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Clone, Copy)]
struct PointOutcome {
    ok: bool,
    violated: bool,
    upper_margin: f64,
    lower_margin: f64,
    gap: f64,
    max_upper: f64,
}

fn check_point(
    pair: &AbstractionPair,
    spec: &FunctionSpec,
    p: &[f64],
    tolerance: f64,
) -> PointOutcome {
    let Ok(values) = spec.evaluate(p) else {
        return PointOutcome {
            ok: false,
            violated: false,
            upper_margin: f64::INFINITY,
            lower_margin: f64::INFINITY,
            gap: f64::NEG_INFINITY,
            max_upper: f64::NEG_INFINITY,
        };
    };
    let up = pair.upper.eval(p);
    let lo = pair.lower.eval(p);
    let mut out = PointOutcome {
        ok: true,
        violated: false,
        upper_margin: f64::INFINITY,
        lower_margin: f64::INFINITY,
        gap: f64::NEG_INFINITY,
        max_upper: f64::NEG_INFINITY,
    };
    for k in 0..values.len() {
        out.upper_margin = out.upper_margin.min(up[k] - values[k]);
        out.lower_margin = out.lower_margin.min(values[k] - lo[k]);
        out.gap = out.gap.max(up[k] - lo[k]);
        out.max_upper = out.max_upper.max(up[k]);
    }
    out.violated = out.upper_margin < -tolerance || out.lower_margin < -tolerance;
    out
}

#[allow(clippy::too_many_arguments)]
fn check_leaf(
    leaf: usize,
    pair: &AbstractionPair,
    spec: &FunctionSpec,
    bounds: &HyperBox,
    samples: usize,
    seed: u64,
    tolerance: f64,
    constraint: bool,
) -> LeafReport {
    let points = sample_points(bounds, samples, seed);
    let outcomes = par::map(&points, |p| check_point(pair, spec, p, tolerance));
    let mut report = LeafReport {
        leaf,
        samples: points.len(),
        violations: 0,
        evaluation_errors: 0,
        worst_upper_margin: f64::INFINITY,
        worst_lower_margin: f64::INFINITY,
        max_gap: f64::NEG_INFINITY,
        max_upper_value: None,
        nonpositivity_violations: None,
    };
    let mut max_upper = f64::NEG_INFINITY;
    let mut positive = 0;
    for o in &outcomes {
        if !o.ok {
            report.evaluation_errors += 1;
            continue;
        }
        report.violations += usize::from(o.violated);
        report.worst_upper_margin = report.worst_upper_margin.min(o.upper_margin);
        report.worst_lower_margin = report.worst_lower_margin.min(o.lower_margin);
        report.max_gap = report.max_gap.max(o.gap);
        max_upper = max_upper.max(o.max_upper);
        positive += usize::from(o.max_upper > tolerance);
    }
    if constraint {
        for c in bounds.corners() {
            let top = pair
                .upper
                .eval(&c)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            max_upper = max_upper.max(top);
            positive += usize::from(top > tolerance);
        }
        report.max_upper_value = Some(max_upper);
        report.nonpositivity_violations = Some(positive);
    }
    report
}

fn aggregate(leaves: Vec<LeafReport>, seed: u64, tolerance: f64) -> VerificationReport {
    let constraint = leaves.iter().any(|l| l.max_upper_value.is_some());
    VerificationReport {
        caveat: CAVEAT.to_string(),
        seed,
        tolerance,
        samples: leaves.iter().map(|l| l.samples).sum(),
        violations: leaves.iter().map(|l| l.violations).sum(),
        evaluation_errors: leaves.iter().map(|l| l.evaluation_errors).sum(),
        worst_upper_margin: leaves
            .iter()
            .map(|l| l.worst_upper_margin)
            .fold(f64::INFINITY, f64::min),
        worst_lower_margin: leaves
            .iter()
            .map(|l| l.worst_lower_margin)
            .fold(f64::INFINITY, f64::min),
        max_gap: leaves
            .iter()
            .map(|l| l.max_gap)
            .fold(f64::NEG_INFINITY, f64::max),
        cover_error: None,
        gap_within_error: None,
        max_upper_value: constraint.then(|| {
            leaves
                .iter()
                .filter_map(|l| l.max_upper_value)
                .fold(f64::NEG_INFINITY, f64::max)
        }),
        nonpositivity_violations: constraint.then(|| {
            leaves
                .iter()
                .filter_map(|l| l.nonpositivity_violations)
                .sum()
        }),
        leaves,
    }
}

fn check_tolerance(tolerance: f64) -> Result<(), Error> {
    if tolerance >= 0.0 && tolerance.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "tolerance must be nonnegative, got {tolerance}"
        )))
    }
}

/// Samples one pair on one box.
pub fn check_sandwich(
    pair: &AbstractionPair,
    spec: &FunctionSpec,
    bounds: &HyperBox,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<VerificationReport, Error> {
    check_tolerance(tolerance)?;
    if spec.dim() != bounds.dim()
        || pair.upper.rows() != spec.output_count()
        || pair.upper.cols() != spec.dim()
    {
        return Err(Error::Config(
            "pair, function and box dimensions disagree".into(),
        ));
    }
    let leaf = check_leaf(0, pair, spec, bounds, samples, seed, tolerance, false);
    Ok(aggregate(vec![leaf], seed, tolerance))
}

fn check_cover_impl(
    cover: &Cover,
    spec: &FunctionSpec,
    samples_per_leaf: usize,
    seed: u64,
    tolerance: f64,
    constraint: bool,
) -> Result<VerificationReport, Error> {
    check_tolerance(tolerance)?;
    if spec.dim() != cover.request.root.dim() {
        return Err(Error::Config(
            "function and cover dimensions disagree".into(),
        ));
    }
    if let Some(l) = cover
        .leaves
        .iter()
        .find(|l| l.pair.upper.rows() != spec.output_count())
    {
        return Err(Error::Config(format!(
            "leaf has {} outputs, function has {}",
            l.pair.upper.rows(),
            spec.output_count()
        )));
    }
    let indexed: Vec<usize> = (0..cover.leaves.len()).collect();
    let leaves = par::map(&indexed, |&i| {
        let leaf = &cover.leaves[i];
        check_leaf(
            i,
            &leaf.pair,
            spec,
            &leaf.bounds,
            samples_per_leaf,
            leaf_seed(seed, i),
            tolerance,
            constraint,
        )
    });
    let mut report = aggregate(leaves, seed, tolerance);
    let error = cover_error(cover).value;
    report.cover_error = Some(error);
    report.gap_within_error = Some(report.max_gap <= error + tolerance);
    Ok(report)
}

/// Per-leaf [`check_sandwich`], aggregated, plus the check that the observed
/// gap never exceeds the cover error.
pub fn check_cover(
    cover: &Cover,
    spec: &FunctionSpec,
    samples_per_leaf: usize,
    seed: u64,
    tolerance: f64,
) -> Result<VerificationReport, Error> {
    check_cover_impl(cover, spec, samples_per_leaf, seed, tolerance, false)
}

/// [`check_cover`] plus `upper <= tolerance` at every sample and every leaf
/// corner.
pub fn check_constraint_cover(
    cover: &Cover,
    spec: &FunctionSpec,
    samples_per_leaf: usize,
    seed: u64,
    tolerance: f64,
) -> Result<VerificationReport, Error> {
    check_cover_impl(cover, spec, samples_per_leaf, seed, tolerance, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{abstract_region, ObjectiveMode};
    use crate::cover::{eps_cover, CoverRequest};
    use crate::smoothness::{SmoothnessClass, SmoothnessSpec};

    fn square() -> (FunctionSpec, HyperBox, SmoothnessSpec) {
        (
            FunctionSpec::parse("x^2", &["x"], 1).unwrap(),
            HyperBox::unit(1).unwrap(),
            SmoothnessSpec::supplied(SmoothnessClass::C2, &[2.0]).unwrap(),
        )
    }

    #[test]
    fn lattice_then_random() {
        let b = HyperBox::unit(2).unwrap();
        let pts = sample_points(&b, 10, 3);
        assert_eq!(pts.len(), 10);
        assert_eq!(
            &pts[..9],
            &UniformMesh::uniform(b.clone(), 3).unwrap().grid_points()[..]
        );
        assert!(b.contains(&pts[9]));
        assert_eq!(pts, sample_points(&b, 10, 3));
        assert_ne!(pts[9], sample_points(&b, 10, 4)[9]);
        assert_eq!(sample_points(&b, 1000, 0).len(), 1000);
    }

    #[test]
    fn square_pair_is_sound() {
        let (spec, b, k) = square();
        let pair = abstract_region(&spec, &b, &[2], &k, ObjectiveMode::Theta).unwrap();
        let report = check_sandwich(&pair, &spec, &b, 10_000, 0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.samples, 10_000);
        assert!((report.max_gap - 0.5).abs() < 1e-9);
        assert!(report.passed());
    }

    #[test]
    fn zero_sigma_is_caught() {
        let (spec, b, k) = square();
        let mut pair = abstract_region(&spec, &b, &[2], &k, ObjectiveMode::Theta).unwrap();
        pair.upper = pair.raw_upper();
        pair.lower = pair.raw_lower();
        let report = check_sandwich(&pair, &spec, &b, 1001, 0, DEFAULT_TOLERANCE).unwrap();
        assert!(report.violations > 0);
        // x - x^2 peaks at x = 0.5 with value 0.25.
        assert!((report.worst_lower_margin + 0.25).abs() < 1e-9);
    }

    #[test]
    fn cover_checks() {
        let (spec, b, k) = square();
        let cover = eps_cover(&CoverRequest::new(spec.clone(), b, vec![2], 0.2, k)).unwrap();
        let report = check_cover(&cover, &spec, 5000, 7, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.max_gap <= 0.125 + 1e-9);
        assert_eq!(report.gap_within_error, Some(true));
        assert_eq!(report.leaves.len(), 2);

        let wrong = FunctionSpec::parse("x^2 + 0.5*sin(20*x)", &["x"], 1).unwrap();
        assert!(
            check_cover(&cover, &wrong, 5000, 7, DEFAULT_TOLERANCE)
                .unwrap()
                .violations
                > 0
        );
    }

    #[test]
    fn reports_are_deterministic() {
        let (spec, b, k) = square();
        let cover = eps_cover(&CoverRequest::new(spec.clone(), b, vec![2], 0.2, k)).unwrap();
        let a = check_cover(&cover, &spec, 300, 11, DEFAULT_TOLERANCE)
            .unwrap()
            .to_json();
        let b = check_cover(&cover, &spec, 300, 11, DEFAULT_TOLERANCE)
            .unwrap()
            .to_json();
        assert_eq!(a, b);
        assert!(a.contains("evidence, not proof"));
    }

    #[test]
    fn constraint_cover_checks() {
        let g = FunctionSpec::parse("x^2 + u^2 - 1", &["x", "u"], 1).unwrap();
        let mut req = CoverRequest::new(
            g.clone(),
            HyperBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap(),
            vec![5, 5],
            10.0,
            SmoothnessSpec::supplied(SmoothnessClass::C2, &[2.0]).unwrap(),
        );
        req.constraint = true;
        let cover = eps_cover(&req).unwrap();
        let report = check_constraint_cover(&cover, &g, 2000, 0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(report.violations, 0);
        assert_eq!(report.nonpositivity_violations, Some(0));
        assert!(report.max_upper_value.unwrap() < 0.0);
        assert!(report.passed());
    }

    #[test]
    fn negative_tolerance_is_rejected() {
        let (spec, b, k) = square();
        let pair = abstract_region(&spec, &b, &[2], &k, ObjectiveMode::Theta).unwrap();
        assert!(check_sandwich(&pair, &spec, &b, 10, 0, -1.0).is_err());
    }
}
