//! Convex algebras (the factors of a conceptual space) and the convex
//! regions built over products of them.
//!
//! Every continuous region is a polyhedron over the factor coordinates plus
//! auxiliary variables; the region itself is the projection onto the factor
//! coordinates. Intersections, products, hulls of unions and existential
//! projection are all closed under that representation, so no conversion
//! between vertex and halfspace descriptions is ever needed.

mod cell;
mod domain;
mod trajectory;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::feasibility::LpError;

pub use cell::{Cell, LinRow, PathPart};
pub use domain::{Domain, DomainKind, DomainSummary, Semilattice, Tree, WEIGHT_TOL};
pub use trajectory::{mix_trajectories, Trajectory};

/// Residual tolerance for membership and feasibility.
pub const TOL: f64 = 1e-9;
/// Margin used to realise strict inequalities `a·x < b` as `a·x <= b - margin`.
pub const STRICT_MARGIN: f64 = 1e-6;
/// Default number of waypoints of a discretised path.
pub const DEFAULT_WAYPOINTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("mixing weights: {0}")]
    WeightSum(String),
    #[error("not in carrier: {0}")]
    Carrier(String),
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid semilattice: {0}")]
    Lattice(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A single coordinate block of a point: one value per domain factor.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Real(Vec<f64>),
    /// Index into the factor's semilattice elements.
    Element(usize),
    Path(Trajectory),
}

impl Value {
    pub(crate) fn vars(&self) -> Vec<f64> {
        match self {
            Value::Real(x) => x.clone(),
            Value::Element(_) => Vec::new(),
            Value::Path(t) => t.to_vars(),
        }
    }
}

/// A point of a product of domains.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point(pub Vec<Value>);

impl Point {
    /// Factorwise mixture over the given domains.
    pub fn mix(domains: &[impl AsRef<Domain>], weights: &[f64], points: &[Point]) -> Result<Point, ConvexError> {
        if points.iter().any(|p| p.0.len() != domains.len()) {
            return Err(ConvexError::ShapeMismatch("point arity differs from domain count".into()));
        }
        let mut out = Vec::with_capacity(domains.len());
        for (f, d) in domains.iter().enumerate() {
            let column: Vec<Value> = points.iter().map(|p| p.0[f].clone()).collect();
            out.push(d.as_ref().mix(weights, &column)?);
        }
        Ok(Point(out))
    }

    /// Concatenate factor blocks.
    pub fn concat(&self, other: &Point) -> Point {
        Point(self.0.iter().chain(&other.0).cloned().collect())
    }

    /// Render with the factor separator used by the text format.
    pub fn display<'a>(&'a self, domains: &'a [impl AsRef<Domain>]) -> impl fmt::Display + 'a {
        PointDisplay { point: self, domains: domains.iter().map(AsRef::as_ref).collect() }
    }
}

struct PointDisplay<'a> {
    point: &'a Point,
    domains: Vec<&'a Domain>,
}

impl fmt::Display for PointDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (v, d)) in self.point.0.iter().zip(&self.domains).enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            match v {
                Value::Real(x) => {
                    let s: Vec<String> = x.iter().map(|c| fmt_num(*c)).collect();
                    f.write_str(&s.join(", "))?;
                }
                Value::Element(e) => match d.as_lattice() {
                    Some(l) if *e < l.len() => f.write_str(l.name(*e))?,
                    _ => write!(f, "#{e}")?,
                },
                Value::Path(t) => {
                    write!(f, "t={}", fmt_num(t.t_start))?;
                    for w in &t.waypoints {
                        let s: Vec<String> = w.iter().map(|c| fmt_num(*c)).collect();
                        write!(f, " ({})", s.join(", "))?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Shortest round-tripping decimal, with `-0` normalised.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x}")
}
