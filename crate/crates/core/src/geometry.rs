//! Boxes, uniform meshes and the simplices that triangulate them.
//!
//! Every enumeration is lexicographic over index tuples with the first axis
//! varying slowest, which keeps output order identical from run to run.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Tolerance used by [`Simplex::contains`] on barycentric coordinates.
pub const BARYCENTRIC_TOL: f64 = 1e-9;

/// Axis-aligned closed box `[lower, upper]` in `d` dimensions.
///
/// Coordinates are ordered state dimensions first, then input dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl HyperBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() {
            return Err(GeometryError::EmptyBox);
        }
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GeometryError::DegenerateAxis {
                    axis,
                    lower: *lo,
                    upper: *hi,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Unit cube `[0, 1]^d`.
    pub fn unit(dim: usize) -> Result<Self, GeometryError> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Closed containment test, exact comparison.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(p, (lo, hi))| *lo <= *p && *p <= *hi)
    }

    /// All `2^d` corners in lexicographic order (lower before upper, first
    /// axis slowest).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|j| {
                        if mask >> (d - 1 - j) & 1 == 1 {
                            self.upper[j]
                        } else {
                            self.lower[j]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Bisects every axis at its midpoint, returning the `2^d` children in
    /// the same lexicographic order as [`HyperBox::corners`].
    pub fn subdivide(&self) -> Vec<HyperBox> {
        let d = self.dim();
        let mid = self.center();
        (0..1usize << d)
            .map(|mask| {
                let mut lower = Vec::with_capacity(d);
                let mut upper = Vec::with_capacity(d);
                for j in 0..d {
                    if mask >> (d - 1 - j) & 1 == 1 {
                        lower.push(mid[j]);
                        upper.push(self.upper[j]);
                    } else {
                        lower.push(self.lower[j]);
                        upper.push(mid[j]);
                    }
                }
                HyperBox { lower, upper }
            })
            .collect()
    }
}

/// A box together with a per-axis grid-point count `r_j >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformMesh {
    bounds: HyperBox,
    resolution: Vec<usize>,
}

impl UniformMesh {
    pub fn new(bounds: HyperBox, resolution: Vec<usize>) -> Result<Self, GeometryError> {
        if resolution.len() != bounds.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: bounds.dim(),
                found: resolution.len(),
            });
        }
        if let Some((axis, &r)) = resolution.iter().enumerate().find(|(_, &r)| r < 2) {
            return Err(GeometryError::ResolutionTooSmall {
                axis,
                resolution: r,
            });
        }
        Ok(Self { bounds, resolution })
    }

    /// Same resolution along every axis.
    pub fn uniform(bounds: HyperBox, resolution: usize) -> Result<Self, GeometryError> {
        let d = bounds.dim();
        Self::new(bounds, vec![resolution; d])
    }

    pub fn bounds(&self) -> &HyperBox {
        &self.bounds
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn point_count(&self) -> usize {
        self.resolution.iter().product()
    }

    /// Grid spacing along each axis.
    pub fn spacing(&self) -> Vec<f64> {
        self.bounds
            .widths()
            .iter()
            .zip(&self.resolution)
            .map(|(w, &r)| w / (r - 1) as f64)
            .collect()
    }

    /// Coordinate `k` along `axis`. The last index maps exactly onto the
    /// upper bound.
    fn coordinate(&self, axis: usize, k: usize) -> f64 {
        let r = self.resolution[axis];
        let lo = self.bounds.lower[axis];
        let hi = self.bounds.upper[axis];
        if k + 1 == r {
            hi
        } else {
            lo + k as f64 * (hi - lo) / (r - 1) as f64
        }
    }

    /// Grid points in lexicographic index order.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        self.resolution
            .iter()
            .enumerate()
            .map(|(axis, &r)| (0..r).map(move |k| (axis, k)))
            .multi_cartesian_product()
            .map(|idx| {
                idx.into_iter()
                    .map(|(axis, k)| self.coordinate(axis, k))
                    .collect()
            })
            .collect()
    }

    /// Diagonal length of one mesh element.
    pub fn element_diameter(&self) -> f64 {
        self.spacing().iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Every mesh element as a box, in lexicographic order of the element's
    /// lower-corner index.
    pub fn elements(&self) -> Vec<HyperBox> {
        self.resolution
            .iter()
            .map(|&r| 0..r - 1)
            .multi_cartesian_product()
            .map(|idx| {
                let lower = idx
                    .iter()
                    .enumerate()
                    .map(|(a, &k)| self.coordinate(a, k))
                    .collect();
                let upper = idx
                    .iter()
                    .enumerate()
                    .map(|(a, &k)| self.coordinate(a, k + 1))
                    .collect();
                HyperBox { lower, upper }
            })
            .collect()
    }
}

/// `d + 1` affinely independent points in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    vertices: Vec<Vec<f64>>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let d = vertices.first().map_or(0, Vec::len);
        if d == 0 || vertices.len() != d + 1 {
            return Err(GeometryError::DegenerateSimplex);
        }
        if vertices.iter().any(|v| v.len() != d) {
            return Err(GeometryError::DegenerateSimplex);
        }
        let simplex = Self { vertices };
        if simplex.volume() <= f64::EPSILON * simplex.scale().powi(d as i32) {
            return Err(GeometryError::DegenerateSimplex);
        }
        Ok(simplex)
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    fn scale(&self) -> f64 {
        let v0 = &self.vertices[0];
        self.vertices[1..]
            .iter()
            .map(|v| distance(v, v0))
            .fold(0.0, f64::max)
    }

    fn edge_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let v0 = &self.vertices[0];
        DMatrix::from_fn(d, d, |i, j| self.vertices[j + 1][i] - v0[i])
    }

    /// Unsigned d-volume, `|det(edges)| / d!`.
    pub fn volume(&self) -> f64 {
        let d = self.dim();
        let factorial: f64 = (1..=d).map(|k| k as f64).product();
        self.edge_matrix().determinant().abs() / factorial
    }

    /// Greatest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        self.vertices
            .iter()
            .tuple_combinations()
            .map(|(a, b)| distance(a, b))
            .fold(0.0, f64::max)
    }

    /// Barycentric coordinates `alpha` with `sum(alpha) = 1` and
    /// `sum(alpha_i v_i) = point`.
    pub fn barycentric(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let d = self.dim();
        if point.len() != d {
            return Err(GeometryError::DimensionMismatch {
                expected: d,
                found: point.len(),
            });
        }
        let lu = self.edge_matrix().lu();
        let v0 = &self.vertices[0];
        let rhs = DVector::from_iterator(d, point.iter().zip(v0).map(|(p, o)| p - o));
        let tail = lu.solve(&rhs).ok_or(GeometryError::DegenerateSimplex)?;
        let mut alpha = Vec::with_capacity(d + 1);
        alpha.push(1.0 - tail.iter().sum::<f64>());
        alpha.extend(tail.iter().copied());
        Ok(alpha)
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.barycentric(point)
            .map(|alpha| alpha.iter().all(|&a| a >= -BARYCENTRIC_TOL))
            .unwrap_or(false)
    }

    /// Point with the given barycentric weights.
    pub fn combine(&self, alpha: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (a, v) in alpha.iter().zip(&self.vertices) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += a * x;
            }
        }
        out
    }
}

/// Kuhn triangulation of a box into `d!` simplices.
///
/// Each simplex walks from the lower corner to the upper corner, raising one
/// axis at a time; the order in which axes are raised ranges over all
/// permutations in lexicographic order.
pub fn kuhn_simplices(element: &HyperBox) -> Vec<Simplex> {
    let d = element.dim();
    (0..d)
        .permutations(d)
        .map(|order| {
            let mut vertex = element.lower.clone();
            let mut vertices = Vec::with_capacity(d + 1);
            vertices.push(vertex.clone());
            for axis in order {
                vertex[axis] = element.upper[axis];
                vertices.push(vertex.clone());
            }
            Simplex { vertices }
        })
        .collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
