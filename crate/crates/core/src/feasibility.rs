//! Dense two-phase simplex over small linear systems.
//!
//! Every membership, emptiness and composition query in the crate bottoms out
//! here. Variables are free (unbounded in sign); each one is split into a
//! nonnegative pair internally. Pivoting follows Bland's rule, so the solver
//! never cycles, and a hard pivot cap turns pathological inputs into an error
//! instead of an answer.

use serde::Serialize;
use thiserror::Error;

/// Absolute tolerance on (row-normalised) constraint residuals for
/// feasibility decisions.
pub const FEAS_TOL: f64 = 1e-9;
/// Residual tolerance every returned witness is re-checked against.
pub const WITNESS_TOL: f64 = 1e-7;
/// Pivot budget shared by both phases.
pub const MAX_PIVOTS: usize = 10_000;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const ZERO_SNAP: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Cmp {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Row {
    fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Signed amount by which `x` violates the row, normalised by the largest
    /// coefficient. Nonpositive means satisfied (for `Le`).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        let s = self.scale().max(1.0);
        match self.cmp {
            Cmp::Le => (lhs - self.rhs) / s,
            Cmp::Eq => (lhs - self.rhs).abs() / s,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearSystem {
    pub n_vars: usize,
    pub rows: Vec<Row>,
}

impl LinearSystem {
    pub fn new(n_vars: usize) -> Self {
        Self { n_vars, rows: Vec::new() }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push(Row { coeffs, cmp, rhs });
    }

    pub fn push_le(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.push(coeffs, Cmp::Le, rhs);
    }

    pub fn push_ge(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.push(coeffs.into_iter().map(|c| -c).collect(), Cmp::Le, -rhs);
    }

    pub fn push_eq(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.push(coeffs, Cmp::Eq, rhs);
    }

    /// Largest normalised violation over all rows (0 when every row holds).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.violation(x))
            .fold(0.0_f64, f64::max)
    }

    pub fn is_satisfied_by(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.n_vars && self.max_violation(x) <= tol
    }

    fn validate(&self) -> Result<(), LpError> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.coeffs.len() != self.n_vars {
                return Err(LpError::DimensionMismatch {
                    row: i,
                    expected: self.n_vars,
                    found: r.coeffs.len(),
                });
            }
            if !r.rhs.is_finite() || r.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(LpError::NonFinite { row: i });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} has {found} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row} contains a non-finite entry")]
    NonFinite { row: usize },
    #[error("objective has {found} coefficients, expected {expected}")]
    ObjectiveMismatch { expected: usize, found: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn witness(&self) -> Option<&[f64]> {
        match self {
            Feasibility::Feasible(w) => Some(w),
            Feasibility::Infeasible => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Optimum {
    Optimal { value: f64, argmax: Vec<f64> },
    Unbounded,
    Infeasible,
}

/// Decide whether `sys` has a solution; on success the witness has been
/// re-checked against every row.
pub fn feasible(sys: &LinearSystem) -> Result<Feasibility, LpError> {
    sys.validate()?;
    let mut tab = match Tableau::build(sys) {
        Some(t) => t,
        None => return Ok(Feasibility::Infeasible),
    };
    if !tab.phase_one()? {
        return Ok(Feasibility::Infeasible);
    }
    let x = tab.solution();
    check_witness(sys, &x)?;
    Ok(Feasibility::Feasible(x))
}

/// Maximise `objective · x` over `sys`.
pub fn maximize(objective: &[f64], sys: &LinearSystem) -> Result<Optimum, LpError> {
    sys.validate()?;
    if objective.len() != sys.n_vars {
        return Err(LpError::ObjectiveMismatch {
            expected: sys.n_vars,
            found: objective.len(),
        });
    }
    let mut tab = match Tableau::build(sys) {
        Some(t) => t,
        None => return Ok(Optimum::Infeasible),
    };
    if !tab.phase_one()? {
        return Ok(Optimum::Infeasible);
    }
    if !tab.phase_two(objective)? {
        return Ok(Optimum::Unbounded);
    }
    let x = tab.solution();
    check_witness(sys, &x)?;
    let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(Optimum::Optimal { value, argmax: x })
}

/// Convenience: minimum of `objective · x`.
pub fn minimize(objective: &[f64], sys: &LinearSystem) -> Result<Optimum, LpError> {
    let neg: Vec<f64> = objective.iter().map(|c| -c).collect();
    Ok(match maximize(&neg, sys)? {
        Optimum::Optimal { value, argmax } => Optimum::Optimal { value: -value, argmax },
        other => other,
    })
}

fn check_witness(sys: &LinearSystem, x: &[f64]) -> Result<(), LpError> {
    let v = sys.max_violation(x);
    if v > WITNESS_TOL {
        return Err(LpError::NumericalFailure(format!(
            "witness violates a row by {v:e}"
        )));
    }
    Ok(())
}

struct Tableau {
    /// m rows of `ncols + 1` entries, rhs last.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_vars: usize,
    /// First artificial column; artificials occupy `art_start..ncols`.
    art_start: usize,
    ncols: usize,
    pivots: usize,
}

impl Tableau {
    /// Returns `None` when a coefficient-free row is already contradictory.
    fn build(sys: &LinearSystem) -> Option<Self> {
        let n = sys.n_vars;
        let mut rows = Vec::new();
        for r in &sys.rows {
            let s = r.scale();
            if s == 0.0 {
                let ok = match r.cmp {
                    Cmp::Le => r.rhs >= -FEAS_TOL,
                    Cmp::Eq => r.rhs.abs() <= FEAS_TOL,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            let coeffs: Vec<f64> = r.coeffs.iter().map(|c| c / s).collect();
            rows.push((coeffs, r.cmp, r.rhs / s));
        }
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.1 == Cmp::Le).count();
        let n_art = rows
            .iter()
            .filter(|(_, cmp, rhs)| *cmp == Cmp::Eq || *rhs < 0.0)
            .count();
        let art_start = 2 * n + n_slack;
        let ncols = art_start + n_art;
        let mut t = vec![vec![0.0; ncols + 1]; m];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (2 * n, art_start);
        for (i, (coeffs, cmp, rhs)) in rows.into_iter().enumerate() {
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, c) in coeffs.iter().enumerate() {
                t[i][2 * j] = sign * c;
                t[i][2 * j + 1] = -sign * c;
            }
            t[i][ncols] = sign * rhs;
            let mut basic = None;
            if cmp == Cmp::Le {
                t[i][slack] = sign;
                if sign > 0.0 {
                    basic = Some(slack);
                }
                slack += 1;
            }
            basis[i] = match basic {
                Some(b) => b,
                None => {
                    t[i][art] = 1.0;
                    art += 1;
                    art - 1
                }
            };
        }
        Some(Self { t, basis, n_vars: n, art_start, ncols, pivots: 0 })
    }

    fn phase_one(&mut self) -> Result<bool, LpError> {
        if self.art_start == self.ncols {
            return Ok(true);
        }
        let mut cost = vec![0.0; self.ncols];
        for c in cost.iter_mut().skip(self.art_start) {
            *c = -1.0;
        }
        let bounded = self.optimise(&cost, true)?;
        debug_assert!(bounded, "phase one objective is bounded by zero");
        let infeas: f64 = self
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= self.art_start)
            .map(|(i, _)| self.t[i][self.ncols])
            .sum();
        if infeas > FEAS_TOL {
            return Ok(false);
        }
        self.drive_out_artificials();
        Ok(true)
    }

    fn phase_two(&mut self, objective: &[f64]) -> Result<bool, LpError> {
        let mut cost = vec![0.0; self.ncols];
        for (j, c) in objective.iter().enumerate() {
            cost[2 * j] = *c;
            cost[2 * j + 1] = -*c;
        }
        self.optimise(&cost, false)
    }

    fn drive_out_artificials(&mut self) {
        for i in 0..self.t.len() {
            if self.basis[i] < self.art_start {
                continue;
            }
            let col = (0..self.art_start).find(|&j| self.t[i][j].abs() > 1e-9);
            if let Some(j) = col {
                self.pivot(i, j);
            }
            // Otherwise the row is redundant; its artificial stays basic at 0
            // and never re-enters because artificial columns are barred.
        }
    }

    /// Maximise `cost · cols`. Returns false on unboundedness.
    fn optimise(&mut self, cost: &[f64], allow_art: bool) -> Result<bool, LpError> {
        let m = self.t.len();
        let limit = if allow_art { self.ncols } else { self.art_start };
        let mut is_basic = vec![false; self.ncols];
        loop {
            is_basic.iter_mut().for_each(|b| *b = false);
            for &b in &self.basis {
                is_basic[b] = true;
            }
            let entering = (0..limit).find(|&j| {
                if is_basic[j] {
                    return false;
                }
                let zj: f64 = (0..m).map(|i| cost[self.basis[i]] * self.t[i][j]).sum();
                cost[j] - zj > COST_TOL
            });
            let Some(j) = entering else { return Ok(true) };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][j];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.t[i][self.ncols] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12
                            || ((ratio - br).abs() <= 1e-12 && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((i, _)) = leave else { return Ok(false) };
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::NumericalFailure(format!(
                    "pivot cap of {MAX_PIVOTS} exceeded"
                )));
            }
            self.pivot(i, j);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&prow) {
                *v -= f * pv;
                if v.abs() < ZERO_SNAP {
                    *v = 0.0;
                }
            }
        }
        self.basis[r] = c;
    }

    fn solution(&self) -> Vec<f64> {
        let mut cols = vec![0.0; self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            cols[b] = self.t[i][self.ncols];
        }
        (0..self.n_vars).map(|j| cols[2 * j] - cols[2 * j + 1]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys1(rows: &[(f64, Cmp, f64)]) -> LinearSystem {
        let mut s = LinearSystem::new(1);
        for &(a, cmp, b) in rows {
            s.push(vec![a], cmp, b);
        }
        s
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        // x >= 0.7, x <= 0.3
        let s = sys1(&[(-1.0, Cmp::Le, -0.7), (1.0, Cmp::Le, 0.3)]);
        assert_eq!(feasible(&s).unwrap(), Feasibility::Infeasible);
    }

    #[test]
    fn empty_system_is_feasible() {
        let s = LinearSystem::new(3);
        let w = feasible(&s).unwrap();
        assert_eq!(w.witness().unwrap().len(), 3);
    }

    #[test]
    fn maximize_fixed_variable() {
        let s = sys1(&[(1.0, Cmp::Eq, 0.5)]);
        match maximize(&[1.0], &s).unwrap() {
            Optimum::Optimal { value, .. } => assert!((value - 0.5).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_and_negative_region() {
        // x <= -2 : max x = -2, min x unbounded.
        let s = sys1(&[(1.0, Cmp::Le, -2.0)]);
        match maximize(&[1.0], &s).unwrap() {
            Optimum::Optimal { value, .. } => assert!((value + 2.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert_eq!(minimize(&[1.0], &s).unwrap(), Optimum::Unbounded);
    }

    #[test]
    fn zero_rows_are_checked_directly() {
        let mut s = LinearSystem::new(2);
        s.push_le(vec![0.0, 0.0], -1.0);
        assert_eq!(feasible(&s).unwrap(), Feasibility::Infeasible);
        let mut s = LinearSystem::new(2);
        s.push_eq(vec![0.0, 0.0], 0.0);
        assert!(feasible(&s).unwrap().is_feasible());
    }

    #[test]
    fn dimension_errors_are_reported() {
        let mut s = LinearSystem::new(2);
        s.rows.push(Row { coeffs: vec![1.0], cmp: Cmp::Le, rhs: 0.0 });
        assert!(matches!(feasible(&s), Err(LpError::DimensionMismatch { .. })));
        let s = LinearSystem::new(2);
        assert!(matches!(
            maximize(&[1.0], &s),
            Err(LpError::ObjectiveMismatch { .. })
        ));
    }

    #[test]
    fn redundant_equalities_do_not_confuse_phase_two() {
        // x + y = 1 twice, x - y = 0 : unique point (0.5, 0.5).
        let mut s = LinearSystem::new(2);
        s.push_eq(vec![1.0, 1.0], 1.0);
        s.push_eq(vec![2.0, 2.0], 2.0);
        s.push_eq(vec![1.0, -1.0], 0.0);
        match maximize(&[1.0, 0.0], &s).unwrap() {
            Optimum::Optimal { value, argmax } => {
                assert!((value - 0.5).abs() < 1e-9);
                assert!((argmax[1] - 0.5).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // A classic degenerate corner: many constraints through the origin.
        let mut s = LinearSystem::new(3);
        s.push_le(vec![1.0, 1.0, 1.0], 0.0);
        s.push_le(vec![1.0, -1.0, 0.0], 0.0);
        s.push_le(vec![-1.0, 1.0, 0.0], 0.0);
        s.push_le(vec![0.0, 1.0, -1.0], 0.0);
        s.push_ge(vec![1.0, 0.0, 0.0], -1.0);
        s.push_ge(vec![0.0, 0.0, 1.0], -1.0);
        match maximize(&[1.0, 1.0, 0.0], &s).unwrap() {
            Optimum::Optimal { value, .. } => assert!(value.abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
