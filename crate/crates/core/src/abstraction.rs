//! Affine over-approximation of a function on a single box.
//!
//! Grid samples pin two affine planes `f_u >= f` and `f_b <= f` at every mesh
//! point; shifting them by the interpolation bound `sigma` makes them valid
//! on the whole box. The planes come from one LP whose objective is either
//! the largest corner gap `theta` or a weighted sum of infinity norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, EvalError, LpError};
use crate::funcspec::FunctionSpec;
use crate::geometry::{HyperBox, UniformMesh};
use crate::lp::LinearProgram;
use crate::par;
use crate::smoothness::{sigma_for_mesh, SigmaVector, SmoothnessSpec};

/// `z -> C z + h` with `C` stored row-major as `rows x cols`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    rows: usize,
    cols: usize,
    c: Vec<f64>,
    h: Vec<f64>,
}

impl AffineMap {
    pub fn new(rows: usize, cols: usize, c: Vec<f64>, h: Vec<f64>) -> Result<Self, Error> {
        if c.len() != rows * cols || h.len() != rows {
            return Err(Error::Config(format!(
                "affine map of shape {rows}x{cols} needs {} coefficients and {rows} offsets",
                rows * cols
            )));
        }
        if c.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::Config("affine map entries must be finite".into()));
        }
        Ok(Self { rows, cols, c, h })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major coefficient matrix `[A B]`.
    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.c[k * self.cols..(k + 1) * self.cols]
    }

    pub fn offset(&self) -> &[f64] {
        &self.h
    }

    pub fn eval_row(&self, k: usize, z: &[f64]) -> f64 {
        self.row(k).iter().zip(z).map(|(a, x)| a * x).sum::<f64>() + self.h[k]
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|k| self.eval_row(k, z)).collect()
    }

    /// Same linear part, offsets shifted by `delta[k]`.
    pub fn shifted(&self, delta: &[f64]) -> AffineMap {
        AffineMap {
            h: self.h.iter().zip(delta).map(|(h, d)| h + d).collect(),
            ..self.clone()
        }
    }
}

/// LP objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// Minimise the largest corner gap between the raw planes.
    Theta,
    /// Minimise `gamma_a ||C_up - C_lo||_inf + gamma_h ||h_up - h_lo||_inf`
    /// of the final (sigma-shifted) pair.
    Weighted { gamma_a: f64, gamma_h: f64 },
}

impl ObjectiveMode {
    pub fn weighted(gamma_a: f64, gamma_h: f64) -> Result<Self, Error> {
        let ok = |g: f64| g >= 0.0 && g.is_finite();
        if !(ok(gamma_a) && ok(gamma_h)) || (gamma_a == 0.0 && gamma_h == 0.0) {
            return Err(Error::Config(format!(
                "weights must be nonnegative and not both zero, got gamma_a={gamma_a} gamma_h={gamma_h}"
            )));
        }
        Ok(Self::Weighted { gamma_a, gamma_h })
    }
}

/// Variable positions inside the region LP.
///
/// Order: `theta` (corner-gap mode only), upper state block, lower state
/// block, upper input block, lower input block (each `n x n_state` or
/// `n x m`, row-major), `h_u`, `h_b`; weighted mode then appends the
/// entry bounds `s` (`n x d`), `t_a` and `t_h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LpLayout {
    pub outputs: usize,
    pub n_state: usize,
    pub dim: usize,
    pub weighted: bool,
}

impl LpLayout {
    fn base(&self) -> usize {
        usize::from(!self.weighted)
    }

    fn inputs(&self) -> usize {
        self.dim - self.n_state
    }

    pub fn theta(&self) -> Option<usize> {
        (!self.weighted).then_some(0)
    }

    /// Coefficient of variable `j` in upper row `k`.
    pub fn upper(&self, k: usize, j: usize) -> usize {
        let (n, ns, m) = (self.outputs, self.n_state, self.inputs());
        if j < ns {
            self.base() + k * ns + j
        } else {
            self.base() + 2 * n * ns + k * m + (j - ns)
        }
    }

    pub fn lower(&self, k: usize, j: usize) -> usize {
        let (n, ns, m) = (self.outputs, self.n_state, self.inputs());
        if j < ns {
            self.base() + n * ns + k * ns + j
        } else {
            self.base() + 2 * n * ns + n * m + k * m + (j - ns)
        }
    }

    pub fn h_upper(&self, k: usize) -> usize {
        self.base() + 2 * self.outputs * self.dim + k
    }

    pub fn h_lower(&self, k: usize) -> usize {
        self.base() + 2 * self.outputs * self.dim + self.outputs + k
    }

    fn plane_vars(&self) -> usize {
        2 * self.outputs * self.dim + 2 * self.outputs
    }

    pub fn entry_bound(&self, k: usize, j: usize) -> Option<usize> {
        self.weighted.then(|| self.plane_vars() + k * self.dim + j)
    }

    pub fn t_a(&self) -> Option<usize> {
        self.weighted
            .then(|| self.plane_vars() + self.outputs * self.dim)
    }

    pub fn t_h(&self) -> Option<usize> {
        self.weighted
            .then(|| self.plane_vars() + self.outputs * self.dim + 1)
    }

    pub fn num_vars(&self) -> usize {
        if self.weighted {
            self.plane_vars() + self.outputs * self.dim + 2
        } else {
            1 + self.plane_vars()
        }
    }
}

/// Everything the region LP is built from.
#[derive(Clone, Debug)]
pub struct LpInput<'a> {
    /// Grid points with the function value at each.
    pub samples: &'a [(Vec<f64>, Vec<f64>)],
    pub corners: &'a [Vec<f64>],
    pub mode: ObjectiveMode,
    pub outputs: usize,
    pub n_state: usize,
    pub dim: usize,
    /// Per-output interpolation bound; used by the weighted objective and
    /// by the nonpositivity rows.
    pub sigma: &'a [f64],
    /// Require the shifted upper plane to be `<= 0` at every corner.
    pub nonpositive: bool,
}

/// Builds the region LP. Rows are emitted in blocks: upper dominance at
/// every sample, lower dominance at every sample, corner gaps (corner-gap
/// mode), nonpositivity at corners (constraint mode), then the norm
/// linearisation rows (weighted mode).
pub fn build_lp(input: &LpInput<'_>) -> Result<(LinearProgram, LpLayout), Error> {
    let LpInput {
        samples,
        corners,
        mode,
        outputs: n,
        n_state,
        dim: d,
        sigma,
        nonpositive,
    } = *input;
    let mismatch = |what: &str| Error::Config(format!("dimension mismatch in {what}"));
    if n == 0 || d == 0 || n_state > d || sigma.len() != n {
        return Err(mismatch("LP dimensions"));
    }
    if samples.iter().any(|(p, v)| p.len() != d || v.len() != n) {
        return Err(mismatch("samples"));
    }
    if corners.iter().any(|c| c.len() != d) {
        return Err(mismatch("corners"));
    }
    let weighted = matches!(mode, ObjectiveMode::Weighted { .. });
    let layout = LpLayout {
        outputs: n,
        n_state,
        dim: d,
        weighted,
    };
    let mut objective = vec![0.0; layout.num_vars()];
    match mode {
        ObjectiveMode::Theta => objective[0] = 1.0,
        ObjectiveMode::Weighted { gamma_a, gamma_h } => {
            objective[layout.t_a().expect("weighted")] = gamma_a;
            objective[layout.t_h().expect("weighted")] = gamma_h;
        }
    }
    let mut lp = LinearProgram::new(objective);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * d + 3);

    // Upper plane above every sample: -(C_u p + h_u) <= -f(p).
    for (p, values) in samples {
        for k in 0..n {
            row.clear();
            row.extend(p.iter().enumerate().map(|(j, &x)| (layout.upper(k, j), -x)));
            row.push((layout.h_upper(k), -1.0));
            lp.add_sparse_row(&row, -values[k])?;
        }
    }
    // Lower plane below every sample: C_b p + h_b <= f(p).
    for (p, values) in samples {
        for k in 0..n {
            row.clear();
            row.extend(p.iter().enumerate().map(|(j, &x)| (layout.lower(k, j), x)));
            row.push((layout.h_lower(k), 1.0));
            lp.add_sparse_row(&row, values[k])?;
        }
    }
    if let Some(theta) = layout.theta() {
        for c in corners {
            for k in 0..n {
                row.clear();
                for (j, &x) in c.iter().enumerate() {
                    row.push((layout.upper(k, j), x));
                    row.push((layout.lower(k, j), -x));
                }
                row.push((layout.h_upper(k), 1.0));
                row.push((layout.h_lower(k), -1.0));
                row.push((theta, -1.0));
                lp.add_sparse_row(&row, 0.0)?;
            }
        }
    }
    if nonpositive {
        for c in corners {
            for k in 0..n {
                row.clear();
                row.extend(c.iter().enumerate().map(|(j, &x)| (layout.upper(k, j), x)));
                row.push((layout.h_upper(k), 1.0));
                lp.add_sparse_row(&row, -sigma[k])?;
            }
        }
    }
    if weighted {
        let t_a = layout.t_a().expect("weighted");
        let t_h = layout.t_h().expect("weighted");
        for k in 0..n {
            for j in 0..d {
                let s = layout.entry_bound(k, j).expect("weighted");
                for sign in [1.0, -1.0] {
                    lp.add_sparse_row(
                        &[
                            (layout.upper(k, j), sign),
                            (layout.lower(k, j), -sign),
                            (s, -1.0),
                        ],
                        0.0,
                    )?;
                }
            }
            let mut sum: Vec<(usize, f64)> = (0..d)
                .map(|j| (layout.entry_bound(k, j).expect("weighted"), 1.0))
                .collect();
            sum.push((t_a, -1.0));
            lp.add_sparse_row(&sum, 0.0)?;
        }
        // |(h_u - h_b)_k + 2 sigma_k| <= t_h
        for k in 0..n {
            let two_sigma = 2.0 * sigma[k];
            lp.add_sparse_row(
                &[
                    (layout.h_upper(k), 1.0),
                    (layout.h_lower(k), -1.0),
                    (t_h, -1.0),
                ],
                -two_sigma,
            )?;
            lp.add_sparse_row(
                &[
                    (layout.h_upper(k), -1.0),
                    (layout.h_lower(k), 1.0),
                    (t_h, -1.0),
                ],
                two_sigma,
            )?;
        }
    }
    Ok((lp, layout))
}

/// Certified pair `lower <= f <= upper` on one box.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractionPair {
    /// Upper plane, offset already includes `+sigma`.
    pub upper: AffineMap,
    /// Lower plane, offset already includes `-sigma`.
    pub lower: AffineMap,
    /// Largest corner gap of the raw (unshifted) planes; the LP optimum in
    /// corner-gap mode.
    pub theta: f64,
    pub sigma: SigmaVector,
    /// Largest gap `upper - lower` over the box and all outputs.
    pub error: f64,
    pub objective: ObjectiveMode,
    pub objective_value: f64,
    /// `min_corners min_k -upper_k` for constraint abstractions.
    pub constraint_margin: Option<f64>,
}

impl AbstractionPair {
    /// Upper plane before the `+sigma` shift.
    pub fn raw_upper(&self) -> AffineMap {
        let neg: Vec<f64> = self.sigma.sigma.iter().map(|s| -s).collect();
        self.upper.shifted(&neg)
    }

    /// Lower plane before the `-sigma` shift.
    pub fn raw_lower(&self) -> AffineMap {
        self.lower.shifted(&self.sigma.sigma)
    }

    /// Largest `upper - lower` over the corners of `bounds`. The gap is
    /// affine, so this is its maximum over the whole box.
    pub fn corner_gap(upper: &AffineMap, lower: &AffineMap, bounds: &HyperBox) -> f64 {
        bounds
            .corners()
            .iter()
            .flat_map(|c| {
                (0..upper.rows()).map(move |k| upper.eval_row(k, c) - lower.eval_row(k, c))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A grid point and the function values there.
pub type Sample = (Vec<f64>, Vec<f64>);

/// Samples `spec` on the mesh grid, in grid order.
pub fn sample_grid(spec: &FunctionSpec, mesh: &UniformMesh) -> Result<Vec<Sample>, Error> {
    let points = mesh.grid_points();
    let samples = par::try_map(&points, |p| {
        spec.evaluate(p)
            .map(|v| (p.clone(), v))
            .map_err(|e| EvalError::AtPoint {
                point: p.clone(),
                source: Box::new(e),
            })
    })?;
    Ok(samples)
}

fn check_dims(
    spec: &FunctionSpec,
    bounds: &HyperBox,
    smoothness: &SmoothnessSpec,
) -> Result<(), Error> {
    if spec.dim() != bounds.dim() {
        return Err(Error::Config(format!(
            "function has {} variables but the box has {} dimensions",
            spec.dim(),
            bounds.dim()
        )));
    }
    if smoothness.len() != spec.output_count() {
        return Err(Error::Config(format!(
            "{} smoothness entries for {} outputs",
            smoothness.len(),
            spec.output_count()
        )));
    }
    Ok(())
}

fn solve_region(
    spec: &FunctionSpec,
    bounds: &HyperBox,
    resolution: &[usize],
    smoothness: &SmoothnessSpec,
    mode: ObjectiveMode,
    nonpositive: bool,
) -> Result<AbstractionPair, Error> {
    check_dims(spec, bounds, smoothness)?;
    let mesh = UniformMesh::new(bounds.clone(), resolution.to_vec())?;
    let samples = sample_grid(spec, &mesh)?;
    let sigma = sigma_for_mesh(&mesh, smoothness);
    let corners = bounds.corners();
    let n = spec.output_count();
    let d = spec.dim();
    let (lp, layout) = build_lp(&LpInput {
        samples: &samples,
        corners: &corners,
        mode,
        outputs: n,
        n_state: spec.n_state(),
        dim: d,
        sigma: &sigma.sigma,
        nonpositive,
    })?;
    let solution = lp.solve()?;
    let z = &solution.point;
    let gather = |idx: &dyn Fn(usize, usize) -> usize| -> Vec<f64> {
        (0..n)
            .flat_map(|k| (0..d).map(move |j| (k, j)))
            .map(|(k, j)| z[idx(k, j)])
            .collect()
    };
    let c_up = gather(&|k, j| layout.upper(k, j));
    let c_lo = gather(&|k, j| layout.lower(k, j));
    let h_up: Vec<f64> = (0..n).map(|k| z[layout.h_upper(k)]).collect();
    let h_lo: Vec<f64> = (0..n).map(|k| z[layout.h_lower(k)]).collect();
    let raw_upper = AffineMap::new(n, d, c_up, h_up)?;
    let raw_lower = AffineMap::new(n, d, c_lo, h_lo)?;
    let neg_sigma: Vec<f64> = sigma.sigma.iter().map(|s| -s).collect();
    let upper = raw_upper.shifted(&sigma.sigma);
    let lower = raw_lower.shifted(&neg_sigma);
    let theta = match layout.theta() {
        Some(t) => z[t],
        None => AbstractionPair::corner_gap(&raw_upper, &raw_lower, bounds),
    };
    let error = AbstractionPair::corner_gap(&upper, &lower, bounds);
    let constraint_margin = nonpositive.then(|| {
        corners
            .iter()
            .flat_map(|c| (0..n).map(|k| -upper.eval_row(k, c)).collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min)
    });
    Ok(AbstractionPair {
        upper,
        lower,
        theta,
        sigma,
        error,
        objective: mode,
        objective_value: solution.value,
        constraint_margin,
    })
}

/// Sound affine bracket of `spec` on `bounds` from a uniform grid.
pub fn abstract_region(
    spec: &FunctionSpec,
    bounds: &HyperBox,
    resolution: &[usize],
    smoothness: &SmoothnessSpec,
    mode: ObjectiveMode,
) -> Result<AbstractionPair, Error> {
    solve_region(spec, bounds, resolution, smoothness, mode, false)
}

/// Like [`abstract_region`], with the upper plane additionally certified
/// nonpositive on the whole box. Returns `Error::Lp(LpError::Infeasible)`
/// when no such plane exists at this resolution.
pub fn abstract_constraint_region(
    spec: &FunctionSpec,
    bounds: &HyperBox,
    resolution: &[usize],
    smoothness: &SmoothnessSpec,
    mode: ObjectiveMode,
) -> Result<AbstractionPair, Error> {
    solve_region(spec, bounds, resolution, smoothness, mode, true)
}

pub fn is_infeasible(err: &Error) -> bool {
    matches!(err, Error::Lp(LpError::Infeasible { .. }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothness::SmoothnessClass;

    fn square() -> (FunctionSpec, HyperBox, SmoothnessSpec) {
        (
            FunctionSpec::parse("x^2", &["x"], 1).unwrap(),
            HyperBox::unit(1).unwrap(),
            SmoothnessSpec::supplied(SmoothnessClass::C2, &[2.0]).unwrap(),
        )
    }

    #[test]
    fn lp_shape_for_square() {
        let (spec, b, _) = square();
        let mesh = UniformMesh::uniform(b.clone(), 2).unwrap();
        let samples = sample_grid(&spec, &mesh).unwrap();
        let corners = b.corners();
        let input = LpInput {
            samples: &samples,
            corners: &corners,
            mode: ObjectiveMode::Theta,
            outputs: 1,
            n_state: 1,
            dim: 1,
            sigma: &[0.25],
            nonpositive: false,
        };
        let (lp, layout) = build_lp(&input).unwrap();
        assert_eq!((lp.num_vars(), lp.num_rows()), (5, 6));
        assert_eq!(layout.theta(), Some(0));

        let weighted = LpInput {
            mode: ObjectiveMode::weighted(0.5, 5.0).unwrap(),
            ..input
        };
        let (wlp, wl) = build_lp(&weighted).unwrap();
        // theta dropped, s/t_a/t_h added; corner rows replaced by 2 + 1 + 2 norm rows.
        assert_eq!(wlp.num_vars(), 5 - 1 + 1 + 2);
        assert_eq!(wlp.num_rows(), 4 + 2 + 1 + 2);
        assert_eq!((wl.t_a(), wl.t_h()), (Some(5), Some(6)));
    }

    #[test]
    fn lp_shape_for_two_outputs() {
        let spec = FunctionSpec::parse("v*cos(phi); v*sin(phi)", &["v", "phi"], 2).unwrap();
        let b = HyperBox::new(vec![20.0, -0.44], vec![30.0, 0.44]).unwrap();
        let mesh = UniformMesh::uniform(b.clone(), 3).unwrap();
        let samples = sample_grid(&spec, &mesh).unwrap();
        let corners = b.corners();
        let (lp, _) = build_lp(&LpInput {
            samples: &samples,
            corners: &corners,
            mode: ObjectiveMode::Theta,
            outputs: 2,
            n_state: 2,
            dim: 2,
            sigma: &[0.0, 0.0],
            nonpositive: false,
        })
        .unwrap();
        assert_eq!(lp.num_rows(), 44);
        assert_eq!(lp.num_vars(), 13);
    }

    #[test]
    fn layout_indices_are_a_bijection() {
        for weighted in [false, true] {
            let l = LpLayout {
                outputs: 2,
                n_state: 2,
                dim: 3,
                weighted,
            };
            let mut idx: Vec<usize> = Vec::new();
            idx.extend(l.theta());
            for k in 0..2 {
                for j in 0..3 {
                    idx.push(l.upper(k, j));
                    idx.push(l.lower(k, j));
                    idx.extend(l.entry_bound(k, j));
                }
                idx.push(l.h_upper(k));
                idx.push(l.h_lower(k));
            }
            idx.extend(l.t_a());
            idx.extend(l.t_h());
            idx.sort_unstable();
            assert_eq!(idx, (0..l.num_vars()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn build_rejects_mismatched_samples() {
        let samples = vec![(vec![0.0, 1.0], vec![1.0])];
        let err = build_lp(&LpInput {
            samples: &samples,
            corners: &[],
            mode: ObjectiveMode::Theta,
            outputs: 1,
            n_state: 1,
            dim: 1,
            sigma: &[0.0],
            nonpositive: false,
        });
        assert!(err.is_err());
    }

    #[test]
    fn square_on_two_points() {
        let (spec, b, k) = square();
        let pair = abstract_region(&spec, &b, &[2], &k, ObjectiveMode::Theta).unwrap();
        assert!(pair.theta.abs() < 1e-9);
        assert_eq!(pair.sigma.sigma, vec![0.25]);
        assert!((pair.error - 0.5).abs() < 1e-9);
        assert!((pair.upper.row(0)[0] - 1.0).abs() < 1e-9);
        assert!((pair.upper.offset()[0] - 0.25).abs() < 1e-9);
        assert!((pair.lower.row(0)[0] - 1.0).abs() < 1e-9);
        assert!((pair.lower.offset()[0] + 0.25).abs() < 1e-9);
    }

    #[test]
    fn square_on_three_points() {
        let (spec, b, k) = square();
        let pair = abstract_region(&spec, &b, &[3], &k, ObjectiveMode::Theta).unwrap();
        assert!((pair.theta - 0.25).abs() < 1e-9);
        assert_eq!(pair.sigma.sigma, vec![0.0625]);
        assert!((pair.error - 0.375).abs() < 1e-9);
    }

    #[test]
    fn weights_are_validated() {
        assert!(ObjectiveMode::weighted(0.0, 0.0).is_err());
        assert!(ObjectiveMode::weighted(-1.0, 1.0).is_err());
        assert!(ObjectiveMode::weighted(0.0, 1.0).is_ok());
    }

    #[test]
    fn constraint_examples() {
        let g = FunctionSpec::parse("x^2 + u^2 - 1", &["x", "u"], 1).unwrap();
        let k = SmoothnessSpec::supplied(SmoothnessClass::C2, &[2.0]).unwrap();
        let inner = HyperBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
        let pair =
            abstract_constraint_region(&g, &inner, &[5, 5], &k, ObjectiveMode::Theta).unwrap();
        let margin = pair.constraint_margin.unwrap();
        assert!(margin > 0.0);
        for c in inner.corners() {
            assert!(pair.upper.eval(&c)[0] < 0.0);
        }
        let outer = HyperBox::unit(2).unwrap();
        let err =
            abstract_constraint_region(&g, &outer, &[5, 5], &k, ObjectiveMode::Theta).unwrap_err();
        assert!(is_infeasible(&err), "{err:?}");
    }

    #[test]
    fn mismatched_smoothness_is_rejected() {
        let (spec, b, _) = square();
        let two = SmoothnessSpec::supplied(SmoothnessClass::C2, &[2.0, 2.0]).unwrap();
        assert!(abstract_region(&spec, &b, &[2], &two, ObjectiveMode::Theta).is_err());
    }
}
