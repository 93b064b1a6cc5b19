use rand::Rng;
use serde::Serialize;

use super::{RelError, Relation};
use crate::convexalg::{Domain, DomainKind, Point, Trajectory, Value};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum ProbeVerdict {
    Agrees { probes: usize },
    Counterexample { point: Point, in_first: bool, in_second: bool },
}

impl ProbeVerdict {
    pub fn agrees(&self) -> bool {
        matches!(self, ProbeVerdict::Agrees { .. })
    }
}

/// Compare two relations of the same shape on the given points. A point
/// counts against equality only if it lies in one relation and outside the
/// other even after relaxing the other by `tol`. Relations over finite
/// factors only are compared exactly by enumeration instead.
pub fn probe_equal(a: &Relation, b: &Relation, probes: &[Point], tol: f64) -> Result<ProbeVerdict, RelError> {
    if a.wires() != b.wires() {
        return Err(RelError::ShapeMismatch("probing relations of different shapes".into()));
    }
    if let (Some(ea), Some(eb)) = (a.enumerate()?, b.enumerate()?) {
        let n = ea.len().max(eb.len());
        return Ok(match ea.symmetric_difference(&eb).next() {
            None => ProbeVerdict::Agrees { probes: n },
            Some(t) => ProbeVerdict::Counterexample {
                point: Point(t.iter().map(|&e| Value::Element(e)).collect()),
                in_first: ea.contains(t),
                in_second: eb.contains(t),
            },
        });
    }
    for p in probes {
        let (ia, ib) = (a.contains(p)?, b.contains(p)?);
        if ia == ib {
            continue;
        }
        let rescued = if ia { b.contains_within(p, tol)? } else { a.contains_within(p, tol)? };
        if !rescued {
            return Ok(ProbeVerdict::Counterexample { point: p.clone(), in_first: ia, in_second: ib });
        }
    }
    Ok(ProbeVerdict::Agrees { probes: probes.len() })
}

/// A point drawn from the carriers: uniform on boxes, Dirichlet-uniform on
/// simplices, random vertex mixtures on other hulls, uniform elements of
/// lattices. Unbounded coordinates and path waypoints are drawn from
/// `[-span, span]`.
pub fn random_point<R: Rng + ?Sized>(domains: &[impl AsRef<Domain>], span: f64, rng: &mut R) -> Point {
    Point(domains.iter().map(|d| random_value(d.as_ref(), span, rng)).collect())
}

fn random_value<R: Rng + ?Sized>(d: &Domain, span: f64, rng: &mut R) -> Value {
    let mut uniform = |lo: f64, hi: f64| {
        let (lo, hi) = (lo.max(-span), hi.min(span));
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    };
    match &d.kind {
        DomainKind::Box { intervals, .. } => Value::Real(intervals.iter().map(|&(lo, hi)| uniform(lo, hi)).collect()),
        DomainKind::Halfspace { coords, .. } => Value::Real(coords.iter().map(|_| uniform(-span, span)).collect()),
        DomainKind::VertexHull { vertices, .. } => {
            let w: Vec<f64> = (0..vertices.len()).map(|_| -rng.gen_range(f64::EPSILON..1.0).ln()).collect();
            let s: f64 = w.iter().sum();
            let mut x = vec![0.0; vertices[0].len()];
            for (wi, v) in w.iter().zip(vertices) {
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += wi / s * vi;
                }
            }
            Value::Real(x)
        }
        DomainKind::Lattice(l) => Value::Element(rng.gen_range(0..l.len())),
        DomainKind::Path { loc_coords, waypoints } => {
            let t = -rng.gen_range(0.0..span.max(f64::MIN_POSITIVE));
            let wp = (0..*waypoints).map(|_| loc_coords.iter().map(|_| rng.gen_range(-span..=span)).collect()).collect();
            Value::Path(Trajectory { t_start: t, waypoints: wp })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum ConvexityVerdict {
    Verified,
    Counterexample { a: Point, b: Point, midpoint: Point },
    Inconclusive { pairs: usize },
}

/// Midpoint test on random member pairs. Single-cell relations are convex by
/// construction and are not sampled.
pub fn check_convexity<R: Rng + ?Sized>(r: &Relation, samples: usize, rng: &mut R) -> Result<ConvexityVerdict, RelError> {
    let live = r.pruned()?;
    if live.cells().len() <= 1 {
        return Ok(ConvexityVerdict::Verified);
    }
    let domains = r.domains();
    for _ in 0..samples.max(1) {
        let (Some(a), Some(b)) = (live.sample(rng)?, live.sample(rng)?) else {
            continue;
        };
        let mid = Point::mix(&domains, &[0.5, 0.5], &[a.clone(), b.clone()])?;
        if !live.contains_within(&mid, 1e-7)? {
            return Ok(ConvexityVerdict::Counterexample { a, b, midpoint: mid });
        }
    }
    Ok(ConvexityVerdict::Inconclusive { pairs: samples.max(1) })
}
