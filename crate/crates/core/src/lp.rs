//! Dense linear programs `min c.z  s.t.  A z <= b` with free variables.
//!
//! The abstraction programs have a handful of variables and up to a few
//! hundred thousand rows, so the solver works on the dual standard form
//!
//! ```text
//! min b.y   s.t.  A^T y = -c,  y >= 0
//! ```
//!
//! whose basis is only `num_vars x num_vars`. A two-phase revised simplex
//! runs on the dual; at optimality the simplex multipliers are an optimal
//! primal point. Pivoting is sequential with index tie-breaks, so a solve is
//! bitwise deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::LpError;

/// Reduced-cost tolerance for optimality.
const OPT_TOL: f64 = 1e-10;
/// Smallest admissible pivot element.
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

/// `min objective.z` subject to `row_i . z <= rhs_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    coeffs: Vec<f64>,
    rhs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            coeffs: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.num_vars..(i + 1) * self.num_vars]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn add_row(&mut self, row: &[f64], rhs: f64) -> Result<(), LpError> {
        if row.len() != self.num_vars {
            return Err(LpError::RowLength {
                row: self.num_rows(),
                expected: self.num_vars,
                found: row.len(),
            });
        }
        self.coeffs.extend_from_slice(row);
        self.rhs.push(rhs);
        Ok(())
    }

    /// Adds a row given as `(variable, coefficient)` pairs; repeated
    /// variables accumulate.
    pub fn add_sparse_row(&mut self, entries: &[(usize, f64)], rhs: f64) -> Result<(), LpError> {
        let start = self.coeffs.len();
        self.coeffs.resize(start + self.num_vars, 0.0);
        for &(j, v) in entries {
            if j >= self.num_vars {
                self.coeffs.truncate(start);
                return Err(LpError::RowLength {
                    row: self.num_rows(),
                    expected: self.num_vars,
                    found: j + 1,
                });
            }
            self.coeffs[start + j] += v;
        }
        self.rhs.push(rhs);
        Ok(())
    }

    /// Largest scaled violation `max_i (row_i.z - rhs_i) / (1 + |rhs_i|)`,
    /// clamped below at zero.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        (0..self.num_rows())
            .map(|i| (dot(self.row(i), z) - self.rhs[i]) / (1.0 + self.rhs[i].abs()))
            .fold(0.0, f64::max)
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_with_limit(self.default_iteration_limit())
    }

    pub fn default_iteration_limit(&self) -> usize {
        50 * (self.num_rows() + self.num_vars) + 1000
    }

    pub fn solve_with_limit(&self, max_iterations: usize) -> Result<LpSolution, LpError> {
        let mut dual = DualSimplex::new(self, max_iterations);
        dual.run_phase(Phase::One)?;
        let infeasibility: f64 = dual
            .basic_values()?
            .iter()
            .zip(&dual.basis)
            .filter(|(_, &j)| j >= dual.m)
            .map(|(x, _)| x.max(0.0))
            .sum();
        let scale = 1.0 + dual.g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Err(LpError::Unbounded);
        }
        dual.drive_out_artificials()?;
        dual.run_phase(Phase::Two)?;
        let point = dual.primal_point()?;
        let value = dot(&self.objective, &point);
        Ok(LpSolution {
            value,
            point,
            iterations: dual.iterations,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

/// Revised simplex state on the dual. Columns `0..m` are the primal rows,
/// columns `m..m+v` are artificials.
struct DualSimplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    v: usize,
    /// Row signs making the dual right-hand side nonnegative.
    sign: Vec<f64>,
    g: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    max_iterations: usize,
}

enum Step {
    Optimal,
    Pivoted { degenerate: bool },
}

impl<'a> DualSimplex<'a> {
    fn new(lp: &'a LinearProgram, max_iterations: usize) -> Self {
        let v = lp.num_vars;
        let sign: Vec<f64> = lp
            .objective
            .iter()
            .map(|c| if -c < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let g = lp
            .objective
            .iter()
            .zip(&sign)
            .map(|(c, s)| -c * s)
            .collect();
        Self {
            lp,
            m: lp.num_rows(),
            v,
            sign,
            g,
            basis: (0..v).map(|i| lp.num_rows() + i).collect(),
            iterations: 0,
            max_iterations,
        }
    }

    /// Column `j` of the sign-adjusted constraint matrix.
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.m {
            DVector::from_iterator(
                self.v,
                self.lp.row(j).iter().zip(&self.sign).map(|(a, s)| a * s),
            )
        } else {
            let mut e = DVector::zeros(self.v);
            e[j - self.m] = 1.0;
            e
        }
    }

    fn cost(&self, phase: Phase, j: usize) -> f64 {
        match (phase, j < self.m) {
            (Phase::One, true) => 0.0,
            (Phase::One, false) => 1.0,
            (Phase::Two, true) => self.lp.rhs[j],
            (Phase::Two, false) => 0.0,
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.v, self.v);
        for (c, &j) in self.basis.iter().enumerate() {
            b.set_column(c, &self.column(j));
        }
        b
    }

    fn factor(&self) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, LpError> {
        let lu = self.basis_matrix().lu();
        if lu.is_invertible() {
            Ok(lu)
        } else {
            Err(LpError::Numerical("singular basis".into()))
        }
    }

    fn basic_values(&self) -> Result<DVector<f64>, LpError> {
        let lu = self.factor()?;
        lu.solve(&DVector::from_column_slice(&self.g))
            .ok_or_else(|| LpError::Numerical("basis solve failed".into()))
    }

    /// Simplex multipliers `pi` with `B^T pi = c_B`.
    fn multipliers(&self, phase: Phase) -> Result<DVector<f64>, LpError> {
        let cb = DVector::from_iterator(self.v, self.basis.iter().map(|&j| self.cost(phase, j)));
        let bt = self.basis_matrix().transpose();
        bt.lu()
            .solve(&cb)
            .ok_or_else(|| LpError::Numerical("multiplier solve failed".into()))
    }

    fn run_phase(&mut self, phase: Phase) -> Result<(), LpError> {
        let mut degenerate_run = 0;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            match self.step(phase, bland)? {
                Step::Optimal => return Ok(()),
                Step::Pivoted { degenerate } => {
                    self.iterations += 1;
                    degenerate_run = if degenerate { degenerate_run + 1 } else { 0 };
                }
            }
        }
    }

    fn step(&mut self, phase: Phase, bland: bool) -> Result<Step, LpError> {
        let pi = self.multipliers(phase)?;
        // Reduced cost of real column j is cost_j - w.A_j with w = pi * sign.
        let w: Vec<f64> = pi.iter().zip(&self.sign).map(|(p, s)| p * s).collect();
        let mut in_basis = vec![false; self.m];
        for &j in &self.basis {
            if j < self.m {
                in_basis[j] = true;
            }
        }
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..self.m {
            if in_basis[j] {
                continue;
            }
            let row = self.lp.row(j);
            let scale = 1.0 + row.iter().map(|a| a.abs()).fold(0.0, f64::max);
            let reduced = (self.cost(phase, j) - dot(&w, row)) / scale;
            if reduced < -OPT_TOL {
                match entering {
                    None => entering = Some((j, reduced)),
                    Some((_, best)) if !bland && reduced < best => entering = Some((j, reduced)),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
        }
        let Some((enter, _)) = entering else {
            return Ok(Step::Optimal);
        };

        let lu = self.factor()?;
        let x = lu
            .solve(&DVector::from_column_slice(&self.g))
            .ok_or_else(|| LpError::Numerical("basis solve failed".into()))?;
        let u = lu
            .solve(&self.column(enter))
            .ok_or_else(|| LpError::Numerical("direction solve failed".into()))?;

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.v {
            if u[i] > PIVOT_TOL {
                let ratio = x[i].max(0.0) / u[i];
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        ratio < best || (ratio == best && self.basis[i] < self.basis[r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, ratio)) = leave else {
            // Unbounded dual ray: y_enter = 1, y_B = -u. Its support is a
            // Farkas certificate of primal infeasibility.
            let mut certificate: Vec<usize> = std::iter::once(enter)
                .chain(
                    self.basis
                        .iter()
                        .zip(u.iter())
                        .filter(|(&j, &ui)| j < self.m && ui < -PIVOT_TOL)
                        .map(|(&j, _)| j),
                )
                .collect();
            certificate.sort_unstable();
            return Err(match phase {
                Phase::Two => LpError::Infeasible { certificate },
                Phase::One => LpError::Numerical("phase one is unbounded".into()),
            });
        };
        self.basis[row] = enter;
        Ok(Step::Pivoted {
            degenerate: ratio == 0.0,
        })
    }

    /// Replaces zero-level artificials in the basis by real columns where
    /// possible. Artificials that cannot leave sit on redundant rows and stay
    /// at zero for the rest of the solve.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        for pos in 0..self.v {
            if self.basis[pos] < self.m {
                continue;
            }
            let mut e = DVector::zeros(self.v);
            e[pos] = 1.0;
            // Row `pos` of B^{-1}, i.e. solve B^T r = e_pos.
            let r = self
                .basis_matrix()
                .transpose()
                .lu()
                .solve(&e)
                .ok_or_else(|| LpError::Numerical("basis solve failed".into()))?;
            let w: Vec<f64> = r.iter().zip(&self.sign).map(|(p, s)| p * s).collect();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.basis.contains(&j) {
                    continue;
                }
                let a = dot(&w, self.lp.row(j)).abs();
                if a > PIVOT_TOL && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                self.basis[pos] = j;
            }
        }
        Ok(())
    }

    fn primal_point(&self) -> Result<Vec<f64>, LpError> {
        let pi = self.multipliers(Phase::Two)?;
        Ok(pi.iter().zip(&self.sign).map(|(p, s)| p * s).collect())
    }
}
