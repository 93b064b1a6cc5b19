//! Convex relations: finite unions of cells typed by a list of wires, the
//! structural relations (cups, caps, spiders), and evaluation of reduction
//! diagrams over word meanings.

mod evaluate;
mod probe;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::convexalg::{Cell, ConvexError, Domain, Point, Value};
use crate::pregroup::WiringError;

pub use evaluate::{apply, cap, compose, cup, evaluate, identity, spider, which_wiring};
pub use probe::{check_convexity, probe_equal, random_point, ConvexityVerdict, ProbeVerdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("a spider needs at least one leg")]
    DegenerateSpider,
    #[error(transparent)]
    Wiring(#[from] WiringError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// A product of domains, e.g. the noun space or the sentence space.
#[derive(Clone, Debug)]
pub struct SemanticObject {
    pub name: String,
    pub factors: Vec<Arc<Domain>>,
}

impl SemanticObject {
    pub fn new(name: &str, factors: Vec<Arc<Domain>>) -> Self {
        Self { name: name.to_string(), factors }
    }

    /// The monoidal unit.
    pub fn unit() -> Self {
        Self::new("I", Vec::new())
    }
}

impl PartialEq for SemanticObject {
    fn eq(&self, other: &Self) -> bool {
        self.factors.len() == other.factors.len()
            && self.factors.iter().zip(&other.factors).all(|(a, b)| Arc::ptr_eq(a, b) || a == b)
    }
}

impl fmt::Display for SemanticObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityStatus {
    Verified,
    Assumed,
    Unknown,
}

impl fmt::Display for ConvexityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvexityStatus::Verified => "verified",
            ConvexityStatus::Assumed => "assumed",
            ConvexityStatus::Unknown => "unknown",
        })
    }
}

/// A subset of the tensor product of its wires, given as a union of cells.
#[derive(Clone, Debug)]
pub struct Relation {
    wires: Vec<SemanticObject>,
    cells: Vec<Cell>,
    pub convexity: ConvexityStatus,
}

impl Relation {
    pub fn new(wires: Vec<SemanticObject>, cells: Vec<Cell>, convexity: ConvexityStatus) -> Result<Self, RelError> {
        let flat: Vec<Arc<Domain>> = wires.iter().flat_map(|w| w.factors.iter().cloned()).collect();
        let want = SemanticObject::new("", flat);
        for c in &cells {
            if SemanticObject::new("", c.domains().to_vec()) != want {
                return Err(RelError::ShapeMismatch(format!(
                    "cell over [{}] in a relation over [{}]",
                    c.domain_names(),
                    wires.iter().map(|w| w.name.as_str()).collect::<Vec<_>>().join(", ")
                )));
            }
        }
        Ok(Self { wires, cells, convexity })
    }

    /// One cell; convex by construction.
    pub fn from_cell(wires: Vec<SemanticObject>, cell: Cell) -> Result<Self, RelError> {
        Self::new(wires, vec![cell], ConvexityStatus::Verified)
    }

    pub fn empty(wires: Vec<SemanticObject>) -> Self {
        Self { wires, cells: Vec::new(), convexity: ConvexityStatus::Verified }
    }

    /// The whole product of the wires' carriers.
    pub fn full(wires: Vec<SemanticObject>) -> Self {
        let flat = wires.iter().flat_map(|w| w.factors.iter().cloned()).collect();
        Self { wires, cells: vec![Cell::full(flat)], convexity: ConvexityStatus::Verified }
    }

    pub fn wires(&self) -> &[SemanticObject] {
        &self.wires
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<Cell> {
        self.cells
    }

    pub fn domains(&self) -> Vec<Arc<Domain>> {
        self.wires.iter().flat_map(|w| w.factors.iter().cloned()).collect()
    }

    /// Index of the first factor of each wire.
    pub fn wire_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.wires
            .iter()
            .map(|w| {
                let o = acc;
                acc += w.factors.len();
                o
            })
            .collect()
    }

    pub fn is_empty(&self) -> Result<bool, RelError> {
        for c in &self.cells {
            if !c.is_empty()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn contains(&self, p: &Point) -> Result<bool, RelError> {
        self.contains_within(p, 0.0)
    }

    pub fn contains_within(&self, p: &Point, slack: f64) -> Result<bool, RelError> {
        if p.0.len() != self.wires.iter().map(|w| w.factors.len()).sum::<usize>() {
            return Err(RelError::ShapeMismatch(format!("point has {} factors", p.0.len())));
        }
        for c in &self.cells {
            if c.contains_within(p, slack)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Union of two relations of the same shape.
    pub fn union(&self, other: &Relation) -> Result<Relation, RelError> {
        if self.wires != other.wires {
            return Err(RelError::ShapeMismatch("union of relations of different shapes".into()));
        }
        let mut cells = self.cells.clone();
        cells.extend(other.cells.iter().cloned());
        let convexity = if cells.len() <= 1 { ConvexityStatus::Verified } else { ConvexityStatus::Unknown };
        Ok(Relation { wires: self.wires.clone(), cells, convexity })
    }

    /// Tensor product: wires concatenate, cells pair up.
    pub fn tensor(&self, other: &Relation) -> Relation {
        let cells = self.cells.iter().flat_map(|a| other.cells.iter().map(move |b| a.product(b))).collect::<Vec<_>>();
        let convexity = match (self.convexity, other.convexity) {
            _ if cells.len() <= 1 => ConvexityStatus::Verified,
            (ConvexityStatus::Unknown, _) | (_, ConvexityStatus::Unknown) => ConvexityStatus::Unknown,
            (ConvexityStatus::Assumed, _) | (_, ConvexityStatus::Assumed) => ConvexityStatus::Assumed,
            _ => ConvexityStatus::Verified,
        };
        Relation { wires: self.wires.iter().chain(&other.wires).cloned().collect(), cells, convexity }
    }

    /// Reorder the wires: wire `i` of the result is wire `order[i]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<Relation, RelError> {
        let n = self.wires.len();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
            return Err(RelError::ShapeMismatch(format!("{order:?} is not a permutation of {n} wires")));
        }
        let offs = self.wire_offsets();
        let keep: Vec<usize> = order
            .iter()
            .flat_map(|&i| offs[i]..offs[i] + self.wires[i].factors.len())
            .collect();
        let cells = self.cells.iter().map(|c| c.project(&keep)).collect::<Result<Vec<_>, _>>()?;
        Ok(Relation {
            wires: order.iter().map(|&i| self.wires[i].clone()).collect(),
            cells,
            convexity: self.convexity,
        })
    }

    /// Whether every factor is a finite semilattice.
    pub fn is_finite(&self) -> bool {
        self.wires.iter().all(|w| w.factors.iter().all(|d| d.is_lattice()))
    }

    /// All member tuples (element indices) of a relation whose factors are
    /// all finite; `None` otherwise.
    pub fn enumerate(&self) -> Result<Option<BTreeSet<Vec<usize>>>, RelError> {
        if !self.is_finite() {
            return Ok(None);
        }
        let mut out = BTreeSet::new();
        for c in &self.cells {
            if c.is_empty()? {
                continue;
            }
            let mut tuples: Vec<Vec<usize>> = vec![Vec::new()];
            for part in c.finite_parts() {
                tuples = tuples
                    .iter()
                    .flat_map(|t| {
                        part.iter().map(move |&e| {
                            let mut t = t.clone();
                            t.push(e);
                            t
                        })
                    })
                    .collect();
            }
            out.extend(tuples);
        }
        Ok(Some(out))
    }

    /// Element names for an enumerated tuple.
    pub fn tuple_names(&self, t: &[usize]) -> Vec<String> {
        self.domains()
            .iter()
            .zip(t)
            .map(|(d, &e)| d.as_lattice().map_or_else(|| format!("#{e}"), |l| l.name(e).to_string()))
            .collect()
    }

    /// A random member, drawn from a uniformly chosen nonempty cell.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<Point>, RelError> {
        let mut order: Vec<usize> = (0..self.cells.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for i in order {
            if let Some(p) = self.cells[i].sample(rng, 100.0)? {
                return Ok(Some(p));
            }
        }
        Ok(None)
    }

    /// Drop cells that are empty.
    pub fn pruned(&self) -> Result<Relation, RelError> {
        let mut cells = Vec::new();
        for c in &self.cells {
            if !c.is_empty()? {
                cells.push(c.clone());
            }
        }
        Ok(Relation { wires: self.wires.clone(), cells, convexity: self.convexity })
    }

    /// The point built from per-wire blocks.
    pub fn point_from_wires(&self, blocks: &[Vec<Value>]) -> Result<Point, RelError> {
        if blocks.len() != self.wires.len() {
            return Err(RelError::ShapeMismatch(format!(
                "expected {} wire blocks, found {}",
                self.wires.len(),
                blocks.len()
            )));
        }
        Ok(Point(blocks.iter().flatten().cloned().collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexalg::{LinRow, Semilattice};

    fn unit_interval() -> SemanticObject {
        SemanticObject::new("X", vec![Arc::new(Domain::boxed("x", &["x"], &[(0.0, 1.0)]).unwrap())])
    }

    #[test]
    fn cells_must_match_wires() {
        let x = unit_interval();
        let other = Arc::new(Domain::boxed("y", &["y"], &[(0.0, 1.0)]).unwrap());
        assert!(matches!(
            Relation::from_cell(vec![x], Cell::full(vec![other])),
            Err(RelError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn enumerate_finite_relation() {
        let g = SemanticObject::new("S", vec![Arc::new(Domain::lattice("s", Semilattice::boolean_grid(2)))]);
        let d = g.factors[0].clone();
        let l = d.as_lattice().unwrap().clone();
        let pos = [l.index_of("(1,1)").unwrap(), l.index_of("(1,0)").unwrap()].into();
        let r = Relation::from_cell(vec![g], Cell::finite_subset(d, &pos).unwrap()).unwrap();
        let e = r.enumerate().unwrap().unwrap();
        assert_eq!(e.len(), 2);
        let names: BTreeSet<String> = e.iter().map(|t| r.tuple_names(t).join(",")).collect();
        assert_eq!(names, ["(1,0)".to_string(), "(1,1)".to_string()].into());
    }

    #[test]
    fn union_drops_verified_status() {
        let x = unit_interval();
        let d = x.factors.clone();
        let lo = Relation::from_cell(vec![x.clone()], Cell::from_rows(d.clone(), vec![LinRow::le(vec![(0, 1.0)], 0.2)]).unwrap()).unwrap();
        let hi = Relation::from_cell(vec![x], Cell::from_rows(d, vec![LinRow::le(vec![(0, -1.0)], -0.8)]).unwrap()).unwrap();
        let u = lo.union(&hi).unwrap();
        assert_eq!(u.convexity, ConvexityStatus::Unknown);
        assert!(u.contains(&Point(vec![Value::Real(vec![0.9])])).unwrap());
        assert!(!u.contains(&Point(vec![Value::Real(vec![0.5])])).unwrap());
    }
}
