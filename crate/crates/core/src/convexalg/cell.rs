use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::{ConvexError, Domain, DomainKind, Point, Trajectory, Value, STRICT_MARGIN, TOL};
use crate::feasibility::{self, Cmp, Feasibility, LinearSystem, Optimum};

/// A sparse linear constraint over a cell's variables (base coordinates
/// first, then auxiliaries).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinRow {
    pub terms: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl LinRow {
    pub fn le(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, cmp: Cmp::Le, rhs }
    }

    pub fn eq(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { terms, cmp: Cmp::Eq, rhs }
    }

    fn remap(&self, f: impl Fn(usize) -> usize) -> Self {
        Self { terms: self.terms.iter().map(|&(i, c)| (f(i), c)).collect(), cmp: self.cmp, rhs: self.rhs }
    }

    fn contradiction() -> Self {
        Self::le(Vec::new(), -1.0)
    }

    pub fn render(&self, names: &[String]) -> String {
        let mut s = String::new();
        for (k, &(i, c)) in self.terms.iter().enumerate() {
            let name = names.get(i).map_or_else(|| format!("v{i}"), Clone::clone);
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if k == 0 {
                if sign == "-" {
                    s.push('-');
                }
            } else {
                s.push_str(&format!(" {sign} "));
            }
            if mag == 1.0 {
                s.push_str(&name);
            } else {
                s.push_str(&format!("{}*{name}", super::fmt_num(mag)));
            }
        }
        if s.is_empty() {
            s.push('0');
        }
        let op = match self.cmp {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
        };
        format!("{s} {op} {}", super::fmt_num(self.rhs))
    }
}

/// Start-time bound and degeneracy flag of one path factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathPart {
    /// Paths start no later than this (a strict `t < 0` becomes `-margin`).
    pub t_max: f64,
    /// A single timepoint: start time 0 and every waypoint equal.
    pub point_path: bool,
}

impl Default for PathPart {
    fn default() -> Self {
        Self { t_max: -STRICT_MARGIN, point_path: false }
    }
}

impl PathPart {
    pub fn point() -> Self {
        Self { t_max: 0.0, point_path: true }
    }

    fn meet(&self, other: &Self) -> Self {
        Self { t_max: self.t_max.min(other.t_max), point_path: self.point_path || other.point_path }
    }
}

/// One convex region over a product of domains.
///
/// Continuous factors contribute their coordinates as base variables;
/// `rows` constrain base and auxiliary variables together, and the region is
/// the projection onto the base. Domain carriers are implicit. Lattice
/// factors carry an explicit join-closed subset, path factors a [`PathPart`].
#[derive(Clone, Debug)]
pub struct Cell {
    domains: Vec<Arc<Domain>>,
    n_aux: usize,
    rows: Vec<LinRow>,
    finite: Vec<BTreeSet<usize>>,
    paths: Vec<PathPart>,
}

impl Cell {
    /// The whole product of the carriers.
    pub fn full(domains: Vec<Arc<Domain>>) -> Self {
        let finite = domains
            .iter()
            .filter_map(|d| d.as_lattice().map(|l| (0..l.len()).collect()))
            .collect();
        let paths = domains.iter().filter(|d| d.is_path()).map(|_| PathPart::default()).collect();
        Self { domains, n_aux: 0, rows: Vec::new(), finite, paths }
    }

    /// The cell over zero domains: the single point of the monoidal unit.
    pub fn unit() -> Self {
        Self::full(Vec::new())
    }

    pub fn empty(domains: Vec<Arc<Domain>>) -> Self {
        let mut c = Self::full(domains);
        c.rows.push(LinRow::contradiction());
        c
    }

    /// Linear constraints over the base coordinates of `domains`.
    pub fn from_rows(domains: Vec<Arc<Domain>>, rows: Vec<LinRow>) -> Result<Self, ConvexError> {
        let mut c = Self::full(domains);
        let n = c.n_base();
        if let Some(r) = rows.iter().find(|r| r.terms.iter().any(|&(i, _)| i >= n)) {
            return Err(ConvexError::ShapeMismatch(format!("row references a variable beyond {n}: {r:?}")));
        }
        c.rows = rows;
        Ok(c)
    }

    /// Convex hull of `points` inside a single continuous domain, encoded
    /// with one auxiliary weight per point.
    pub fn hull(domain: Arc<Domain>, points: &[Vec<f64>]) -> Result<Self, ConvexError> {
        let d = domain.n_vars();
        if domain.is_lattice() || domain.is_path() {
            return Err(ConvexError::ShapeMismatch(format!("`{}` is not a coordinate domain", domain.name)));
        }
        if points.is_empty() {
            return Err(ConvexError::DimensionMismatch { expected: 1, found: 0 });
        }
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(ConvexError::DimensionMismatch { expected: d, found: p.len() });
        }
        let k = points.len();
        let mut c = Self::full(vec![domain]);
        c.n_aux = k;
        for i in 0..d {
            let mut terms = vec![(i, 1.0)];
            terms.extend(points.iter().enumerate().map(|(j, p)| (d + j, -p[i])));
            c.rows.push(LinRow::eq(terms, 0.0));
        }
        for j in 0..k {
            c.rows.push(LinRow::le(vec![(d + j, -1.0)], 0.0));
        }
        c.rows.push(LinRow::eq((d..d + k).map(|j| (j, 1.0)).collect(), 1.0));
        Ok(c)
    }

    /// An explicit subset of a lattice factor, closed under joins.
    pub fn finite_subset(domain: Arc<Domain>, elements: &BTreeSet<usize>) -> Result<Self, ConvexError> {
        let l = domain
            .as_lattice()
            .ok_or_else(|| ConvexError::ShapeMismatch(format!("`{}` is not a lattice", domain.name)))?;
        if let Some(e) = elements.iter().find(|&&e| e >= l.len()) {
            return Err(ConvexError::Carrier(format!("element #{e} not in `{}`", domain.name)));
        }
        let closed = l.join_closure(elements);
        let mut c = Self::full(vec![domain]);
        c.finite[0] = closed;
        Ok(c)
    }

    /// The singleton `{p}`.
    pub fn point(domains: Vec<Arc<Domain>>, p: &Point) -> Result<Self, ConvexError> {
        let mut c = Self::full(domains);
        c.check_point_shape(p)?;
        let offs = c.offsets();
        let mut slot_l = 0;
        let mut slot_p = 0;
        for (f, v) in p.0.iter().enumerate() {
            match v {
                Value::Element(e) => {
                    c.finite[slot_l] = [*e].into();
                    slot_l += 1;
                }
                Value::Path(t) => {
                    c.paths[slot_p] = if t.t_start == 0.0 { PathPart::point() } else { PathPart { t_max: 0.0, point_path: false } };
                    slot_p += 1;
                    for (i, x) in t.to_vars().into_iter().enumerate() {
                        c.rows.push(LinRow::eq(vec![(offs[f] + i, 1.0)], x));
                    }
                }
                Value::Real(x) => {
                    for (i, xi) in x.iter().enumerate() {
                        c.rows.push(LinRow::eq(vec![(offs[f] + i, 1.0)], *xi));
                    }
                }
            }
        }
        Ok(c)
    }

    pub fn domains(&self) -> &[Arc<Domain>] {
        &self.domains
    }

    pub fn rows(&self) -> &[LinRow] {
        &self.rows
    }

    pub fn n_aux(&self) -> usize {
        self.n_aux
    }

    pub fn finite_parts(&self) -> &[BTreeSet<usize>] {
        &self.finite
    }

    pub fn path_parts(&self) -> &[PathPart] {
        &self.paths
    }

    pub fn n_base(&self) -> usize {
        self.domains.iter().map(|d| d.n_vars()).sum()
    }

    /// Offset of each factor's first base variable.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.domains
            .iter()
            .map(|d| {
                let o = acc;
                acc += d.n_vars();
                o
            })
            .collect()
    }

    fn lattice_slot(&self, factor: usize) -> usize {
        self.domains[..factor].iter().filter(|d| d.is_lattice()).count()
    }

    fn path_slot(&self, factor: usize) -> usize {
        self.domains[..factor].iter().filter(|d| d.is_path()).count()
    }

    /// Names for every variable, base first (`colour.R`), then `aux<k>`.
    pub fn var_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .domains
            .iter()
            .flat_map(|d| d.var_names().into_iter().map(move |n| format!("{}.{n}", d.name)))
            .collect();
        v.extend((0..self.n_aux).map(|k| format!("aux{k}")));
        v
    }

    /// Add a constraint over base and auxiliary variables.
    pub fn push_row(&mut self, row: LinRow) -> Result<(), ConvexError> {
        let n = self.n_base() + self.n_aux;
        if row.terms.iter().any(|&(i, _)| i >= n) {
            return Err(ConvexError::ShapeMismatch(format!("row references a variable beyond {n}")));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Turn a path factor into the single-timepoint variant.
    pub fn make_point_path(&mut self, factor: usize) -> Result<(), ConvexError> {
        if !self.domains.get(factor).is_some_and(|d| d.is_path()) {
            return Err(ConvexError::ShapeMismatch(format!("factor {factor} is not a path")));
        }
        let s = self.path_slot(factor);
        self.paths[s] = PathPart::point();
        Ok(())
    }

    pub fn set_path_part(&mut self, factor: usize, part: PathPart) -> Result<(), ConvexError> {
        if !self.domains.get(factor).is_some_and(|d| d.is_path()) {
            return Err(ConvexError::ShapeMismatch(format!("factor {factor} is not a path")));
        }
        let s = self.path_slot(factor);
        self.paths[s] = part;
        Ok(())
    }

    fn same_shape(&self, other: &Cell) -> bool {
        self.domains.len() == other.domains.len()
            && self.domains.iter().zip(&other.domains).all(|(a, b)| Arc::ptr_eq(a, b) || a == b)
    }

    /// Constraint systems concatenated with fresh auxiliaries for `b`.
    pub fn intersect(&self, b: &Cell) -> Result<Cell, ConvexError> {
        if !self.same_shape(b) {
            return Err(ConvexError::ShapeMismatch(format!(
                "cannot intersect cells over [{}] and [{}]",
                self.domain_names(),
                b.domain_names()
            )));
        }
        let n_base = self.n_base();
        let shift = self.n_aux;
        let mut rows = self.rows.clone();
        rows.extend(b.rows.iter().map(|r| r.remap(|i| if i < n_base { i } else { i + shift })));
        Ok(Cell {
            domains: self.domains.clone(),
            n_aux: self.n_aux + b.n_aux,
            rows,
            finite: self.finite.iter().zip(&b.finite).map(|(x, y)| x & y).collect(),
            paths: self.paths.iter().zip(&b.paths).map(|(x, y)| x.meet(y)).collect(),
        })
    }

    /// Cartesian product; domains concatenate.
    pub fn product(&self, b: &Cell) -> Cell {
        let (na, nb) = (self.n_base(), b.n_base());
        let total = na + nb;
        let mut rows: Vec<LinRow> =
            self.rows.iter().map(|r| r.remap(|i| if i < na { i } else { i - na + total })).collect();
        let a_aux = self.n_aux;
        rows.extend(
            b.rows
                .iter()
                .map(|r| r.remap(|i| if i < nb { na + i } else { i - nb + total + a_aux })),
        );
        Cell {
            domains: self.domains.iter().chain(&b.domains).cloned().collect(),
            n_aux: self.n_aux + b.n_aux,
            rows,
            finite: self.finite.iter().chain(&b.finite).cloned().collect(),
            paths: self.paths.iter().chain(&b.paths).copied().collect(),
        }
    }

    /// Force factors `f1` and `f2` (same domain) to carry equal values.
    ///
    /// Equality between two lattice factors is not a product of subsets, so
    /// the cell splits into one cell per shared element; the result is a
    /// union (possibly empty) of cells.
    pub fn link(&self, f1: usize, f2: usize) -> Result<Vec<Cell>, ConvexError> {
        let (d1, d2) = match (self.domains.get(f1), self.domains.get(f2)) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => return Err(ConvexError::ShapeMismatch(format!("no factors {f1}, {f2}"))),
        };
        if !(Arc::ptr_eq(&d1, &d2) || d1 == d2) {
            return Err(ConvexError::ShapeMismatch(format!(
                "cannot link `{}` with `{}`",
                d1.name, d2.name
            )));
        }
        if f1 == f2 {
            return Ok(vec![self.clone()]);
        }
        if d1.is_lattice() {
            let (s1, s2) = (self.lattice_slot(f1), self.lattice_slot(f2));
            let meet: BTreeSet<usize> = &self.finite[s1] & &self.finite[s2];
            return Ok(meet
                .into_iter()
                .map(|e| {
                    let mut c = self.clone();
                    c.finite[s1] = [e].into();
                    c.finite[s2] = [e].into();
                    c
                })
                .collect());
        }
        let mut c = self.clone();
        if d1.is_path() {
            let (s1, s2) = (c.path_slot(f1), c.path_slot(f2));
            let m = c.paths[s1].meet(&c.paths[s2]);
            c.paths[s1] = m;
            c.paths[s2] = m;
        }
        let offs = c.offsets();
        for i in 0..d1.n_vars() {
            c.rows.push(LinRow::eq(vec![(offs[f1] + i, 1.0), (offs[f2] + i, -1.0)], 0.0));
        }
        Ok(vec![c])
    }

    /// Link every factor of `a` with the matching factor of `b`, where `a`
    /// and `b` are equally long runs of factors.
    pub fn link_blocks(&self, a: &[usize], b: &[usize]) -> Result<Vec<Cell>, ConvexError> {
        if a.len() != b.len() {
            return Err(ConvexError::ShapeMismatch("linked blocks differ in length".into()));
        }
        let mut cells = vec![self.clone()];
        for (&x, &y) in a.iter().zip(b) {
            let mut next = Vec::new();
            for c in &cells {
                next.extend(c.link(x, y)?);
            }
            cells = next;
        }
        Ok(cells)
    }

    /// `{(x, x) | x in self}` over the domains listed twice.
    pub fn diagonal(&self) -> Vec<Cell> {
        let k = self.domains.len();
        let c = self.product(&Cell::full(self.domains.clone()));
        let a: Vec<usize> = (0..k).collect();
        let b: Vec<usize> = (k..2 * k).collect();
        c.link_blocks(&a, &b).expect("same domains")
    }

    /// Explicit rows for the implicit constraints (carrier and path parts)
    /// of the listed factors, in this cell's variable numbering, with any
    /// fresh auxiliaries numbered from `next_aux`. Returns the rows and the
    /// new auxiliary count.
    fn implicit_rows(&self, factors: &[usize], mut next_aux: usize) -> (Vec<LinRow>, usize) {
        let offs = self.offsets();
        let mut rows = Vec::new();
        for &f in factors {
            let d = &self.domains[f];
            let o = offs[f];
            match &d.kind {
                DomainKind::Lattice(_) => {
                    if self.finite[self.lattice_slot(f)].is_empty() {
                        rows.push(LinRow::contradiction());
                    }
                }
                DomainKind::Path { loc_coords, waypoints } => {
                    let part = self.paths[self.path_slot(f)];
                    rows.push(LinRow::le(vec![(o, 1.0)], part.t_max));
                    if part.point_path {
                        rows.push(LinRow::eq(vec![(o, 1.0)], 0.0));
                        let ld = loc_coords.len();
                        for k in 1..*waypoints {
                            for j in 0..ld {
                                rows.push(LinRow::eq(vec![(o + 1 + k * ld + j, 1.0), (o + 1 + j, -1.0)], 0.0));
                            }
                        }
                    }
                }
                _ => {
                    let nv = d.n_vars();
                    let (crows, caux) = d.carrier_rows();
                    for (terms, is_eq, rhs) in crows {
                        let terms = terms
                            .into_iter()
                            .map(|(i, c)| if i < nv { (o + i, c) } else { (next_aux + i - nv, c) })
                            .collect();
                        rows.push(LinRow { terms, cmp: if is_eq { Cmp::Eq } else { Cmp::Le }, rhs });
                    }
                    next_aux += caux;
                }
            }
        }
        (rows, next_aux)
    }

    /// Every constraint of the cell as one dense system over
    /// `[base | aux | carrier aux]`. Inequalities are relaxed by `slack`
    /// (scaled per row) and equalities become two-sided bands of that width.
    fn system(&self, slack: f64) -> LinearSystem {
        let all: Vec<usize> = (0..self.domains.len()).collect();
        let first = self.n_base() + self.n_aux;
        let (implicit, n) = self.implicit_rows(&all, first);
        let mut sys = LinearSystem::new(n);
        for r in self.rows.iter().chain(&implicit) {
            let mut coeffs = vec![0.0; n];
            for &(i, c) in &r.terms {
                coeffs[i] += c;
            }
            let scale = coeffs.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
            match (r.cmp, slack > 0.0) {
                (Cmp::Le, _) => sys.push_le(coeffs, r.rhs + slack * scale),
                (Cmp::Eq, false) => sys.push_eq(coeffs, r.rhs),
                (Cmp::Eq, true) => {
                    sys.push_le(coeffs.clone(), r.rhs + slack * scale);
                    sys.push_ge(coeffs, r.rhs - slack * scale);
                }
            }
        }
        sys
    }

    fn finite_empty(&self) -> bool {
        self.finite.iter().any(BTreeSet::is_empty)
    }

    pub fn is_empty(&self) -> Result<bool, ConvexError> {
        Ok(self.witness()?.is_none())
    }

    /// Some member of the cell, if any.
    pub fn witness(&self) -> Result<Option<Point>, ConvexError> {
        if self.finite_empty() {
            return Ok(None);
        }
        match feasibility::feasible(&self.system(0.0))? {
            Feasibility::Infeasible => Ok(None),
            Feasibility::Feasible(x) => {
                let mut first = self.finite.iter().map(|s| *s.iter().next().expect("nonempty"));
                Ok(Some(self.point_from_vars(&x, |_| first.next().expect("one per lattice factor"))))
            }
        }
    }

    fn point_from_vars(&self, x: &[f64], mut element: impl FnMut(usize) -> usize) -> Point {
        let offs = self.offsets();
        Point(
            self.domains
                .iter()
                .enumerate()
                .map(|(f, d)| {
                    let v = &x[offs[f]..offs[f] + d.n_vars()];
                    match &d.kind {
                        DomainKind::Lattice(_) => Value::Element(element(f)),
                        DomainKind::Path { loc_coords, .. } => Value::Path(Trajectory::from_vars(v, loc_coords.len())),
                        _ => Value::Real(v.to_vec()),
                    }
                })
                .collect(),
        )
    }

    pub fn check_point_shape(&self, p: &Point) -> Result<(), ConvexError> {
        if p.0.len() != self.domains.len() {
            return Err(ConvexError::ShapeMismatch(format!(
                "point has {} factors, cell has {}",
                p.0.len(),
                self.domains.len()
            )));
        }
        for (v, d) in p.0.iter().zip(&self.domains) {
            let ok = match (&d.kind, v) {
                (DomainKind::Lattice(l), Value::Element(e)) => *e < l.len(),
                (DomainKind::Path { loc_coords, waypoints }, Value::Path(t)) => {
                    t.waypoints.len() == *waypoints && t.waypoints.iter().all(|w| w.len() == loc_coords.len())
                }
                (DomainKind::Lattice(_) | DomainKind::Path { .. }, _) => false,
                (_, Value::Real(x)) => x.len() == d.n_vars(),
                _ => false,
            };
            if !ok {
                return Err(ConvexError::ShapeMismatch(format!("value does not fit factor `{}`", d.name)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> Result<bool, ConvexError> {
        self.contains_within(p, 0.0)
    }

    /// Membership with every constraint relaxed by `slack` (on top of the
    /// solver tolerance).
    pub fn contains_within(&self, p: &Point, slack: f64) -> Result<bool, ConvexError> {
        self.check_point_shape(p)?;
        for (f, v) in p.0.iter().enumerate() {
            if let Value::Element(e) = v {
                if !self.finite[self.lattice_slot(f)].contains(e) {
                    return Ok(false);
                }
            }
        }
        let fixed: Vec<f64> = p.0.iter().flat_map(Value::vars).collect();
        let sys = self.system(slack);
        let nb = fixed.len();
        let mut reduced = LinearSystem::new(sys.n_vars - nb);
        for r in &sys.rows {
            let shift: f64 = r.coeffs[..nb].iter().zip(&fixed).map(|(a, x)| a * x).sum();
            reduced.push(r.coeffs[nb..].to_vec(), r.cmp, r.rhs - shift);
        }
        if reduced.n_vars == 0 {
            return Ok(reduced.rows.iter().all(|r| match r.cmp {
                Cmp::Le => r.rhs >= -TOL,
                Cmp::Eq => r.rhs.abs() <= TOL,
            }));
        }
        Ok(feasibility::feasible(&reduced)?.is_feasible())
    }

    /// First explicit or implicit row violated by `p` when all auxiliaries
    /// are ignored; `None` if every row that touches only base variables
    /// holds (the point may still fail through auxiliaries).
    pub fn violated_row(&self, p: &Point) -> Result<Option<String>, ConvexError> {
        self.check_point_shape(p)?;
        let nb = self.n_base();
        let x: Vec<f64> = p.0.iter().flat_map(Value::vars).collect();
        let all: Vec<usize> = (0..self.domains.len()).collect();
        let (implicit, _) = self.implicit_rows(&all, nb + self.n_aux);
        let names = self.var_names();
        for r in self.rows.iter().chain(&implicit) {
            if r.terms.iter().any(|&(i, _)| i >= nb) {
                continue;
            }
            let lhs: f64 = r.terms.iter().map(|&(i, c)| c * x[i]).sum();
            let scale = r.terms.iter().fold(1.0_f64, |m, (_, c)| m.max(c.abs()));
            let bad = match r.cmp {
                Cmp::Le => lhs - r.rhs > TOL * scale,
                Cmp::Eq => (lhs - r.rhs).abs() > TOL * scale,
            };
            if bad {
                return Ok(Some(r.render(&names)));
            }
        }
        for (f, v) in p.0.iter().enumerate() {
            if let (Value::Element(e), Some(l)) = (v, self.domains[f].as_lattice()) {
                if !self.finite[self.lattice_slot(f)].contains(e) {
                    return Ok(Some(format!("{} not in the allowed elements of `{}`", l.name(*e), self.domains[f].name)));
                }
            }
        }
        Ok(None)
    }

    /// Maximise a linear function of the base variables.
    pub fn maximize(&self, objective: &[(usize, f64)]) -> Result<Optimum, ConvexError> {
        if self.finite_empty() {
            return Ok(Optimum::Infeasible);
        }
        let sys = self.system(0.0);
        let mut c = vec![0.0; sys.n_vars];
        for &(i, w) in objective {
            if i >= self.n_base() {
                return Err(ConvexError::ShapeMismatch(format!("objective variable {i} is not a base variable")));
            }
            c[i] += w;
        }
        Ok(feasibility::maximize(&c, &sys)?)
    }

    /// Keep the listed factors (in that order) as the new base and turn
    /// everything else into auxiliaries, carrying over the implicit
    /// constraints of the dropped factors as explicit rows.
    pub fn project(&self, keep: &[usize]) -> Result<Cell, ConvexError> {
        let nf = self.domains.len();
        let mut seen = BTreeSet::new();
        if keep.iter().any(|&f| f >= nf || !seen.insert(f)) {
            return Err(ConvexError::ShapeMismatch(format!("bad projection {keep:?} of {nf} factors")));
        }
        let offs = self.offsets();
        let nb = self.n_base();
        let mut map = vec![usize::MAX; nb + self.n_aux];
        let mut next = 0;
        for &f in keep {
            for i in 0..self.domains[f].n_vars() {
                map[offs[f] + i] = next;
                next += 1;
            }
        }
        let new_base = next;
        for m in map.iter_mut() {
            if *m == usize::MAX {
                *m = next;
                next += 1;
            }
        }
        let dropped: Vec<usize> = (0..nf).filter(|f| !keep.contains(f)).collect();
        let (implicit, total) = self.implicit_rows(&dropped, nb + self.n_aux);
        let old_total = nb + self.n_aux;
        let mut rows: Vec<LinRow> = self.rows.iter().map(|r| r.remap(|i| map[i])).collect();
        rows.extend(implicit.iter().map(|r| r.remap(|i| if i < old_total { map[i] } else { i - old_total + next })));
        let n_aux = total - old_total + next - new_base;
        let mut cell = Cell {
            domains: keep.iter().map(|&f| self.domains[f].clone()).collect(),
            n_aux,
            rows,
            finite: keep
                .iter()
                .filter(|&&f| self.domains[f].is_lattice())
                .map(|&f| self.finite[self.lattice_slot(f)].clone())
                .collect(),
            paths: keep
                .iter()
                .filter(|&&f| self.domains[f].is_path())
                .map(|&f| self.paths[self.path_slot(f)])
                .collect(),
        };
        cell.simplify();
        Ok(cell)
    }

    /// Eliminate auxiliaries that are pinned to another variable or to a
    /// constant, drop unused auxiliaries and duplicate rows. The denoted set
    /// is unchanged.
    pub fn simplify(&mut self) {
        let nb = self.n_base();
        let total = nb + self.n_aux;
        // Each variable maps to (root variable or none, scale, offset):
        // x = scale * x_root + offset.
        let mut subst: Vec<(Option<usize>, f64)> = (0..total).map(|i| (Some(i), 0.0)).collect();
        fn resolve(subst: &[(Option<usize>, f64)], mut i: usize) -> (Option<usize>, f64) {
            let mut off = 0.0;
            loop {
                match subst[i] {
                    (Some(j), o) if j == i => return (Some(i), off + o),
                    (Some(j), o) => {
                        off += o;
                        i = j;
                    }
                    (None, o) => return (None, off + o),
                }
            }
        }
        let mut changed = true;
        while changed {
            changed = false;
            for r in &self.rows {
                if r.cmp != Cmp::Eq {
                    continue;
                }
                // Rewrite the row through the current substitution.
                let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                let mut rhs = r.rhs;
                for &(i, c) in &r.terms {
                    match resolve(&subst, i) {
                        (Some(j), o) => {
                            *acc.entry(j).or_insert(0.0) += c;
                            rhs -= c * o;
                        }
                        (None, o) => rhs -= c * o,
                    }
                }
                acc.retain(|_, c| *c != 0.0);
                let terms: Vec<(usize, f64)> = acc.into_iter().collect();
                match terms.as_slice() {
                    [(i, c)] if *i >= nb => {
                        subst[*i] = (None, rhs / c);
                        changed = true;
                    }
                    [(i, a), (j, b)] if *a == -*b && rhs == 0.0 && (*i >= nb || *j >= nb) => {
                        // x_i = x_j; fold the larger index (an auxiliary) into the smaller.
                        subst[*j] = (Some(*i), 0.0);
                        changed = true;
                    }
                    _ => {}
                }
            }
        }
        let mut rows = Vec::new();
        let mut seen: Vec<LinRow> = Vec::new();
        for r in &self.rows {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let mut rhs = r.rhs;
            for &(i, c) in &r.terms {
                match resolve(&subst, i) {
                    (Some(j), o) => {
                        *acc.entry(j).or_insert(0.0) += c;
                        rhs -= c * o;
                    }
                    (None, o) => rhs -= c * o,
                }
            }
            acc.retain(|_, c| c.abs() > 1e-15);
            let row = LinRow { terms: acc.into_iter().collect(), cmp: r.cmp, rhs };
            if row.terms.is_empty() {
                let holds = match row.cmp {
                    Cmp::Le => row.rhs >= -TOL,
                    Cmp::Eq => row.rhs.abs() <= TOL,
                };
                if holds {
                    continue;
                }
                rows = vec![LinRow::contradiction()];
                seen.clear();
                break;
            }
            if !seen.contains(&row) {
                seen.push(row.clone());
                rows.push(row);
            }
        }
        // Compact the auxiliaries still in use.
        let used: BTreeSet<usize> = rows.iter().flat_map(|r| r.terms.iter().map(|t| t.0)).filter(|&i| i >= nb).collect();
        let renumber: BTreeMap<usize, usize> = used.iter().enumerate().map(|(k, &i)| (i, nb + k)).collect();
        self.rows = rows.iter().map(|r| r.remap(|i| if i < nb { i } else { renumber[&i] })).collect();
        self.n_aux = used.len();
    }

    /// Convex hull of the union of several cells over the same domains.
    ///
    /// Each cell gets a private copy of its variables scaled by a weight
    /// `theta_i >= 0` (`sum theta = 1`); the result's coordinates are the sum of
    /// the copies. Lattice parts must agree across cells.
    pub fn hull_of_union(cells: &[Cell]) -> Result<Cell, ConvexError> {
        let first = cells.first().ok_or_else(|| ConvexError::ShapeMismatch("hull of no cells".into()))?;
        if cells.len() == 1 {
            return Ok(first.clone());
        }
        if cells.iter().any(|c| !c.same_shape(first)) {
            return Err(ConvexError::ShapeMismatch("hull over cells of different shapes".into()));
        }
        if cells.iter().any(|c| c.finite != first.finite) {
            return Err(ConvexError::ShapeMismatch(
                "hull over cells with different lattice parts is not a product region".into(),
            ));
        }
        let nb = first.n_base();
        let all: Vec<usize> = (0..first.domains.len()).collect();
        let mut rows = Vec::new();
        let mut next = nb;
        let mut thetas = Vec::new();
        let mut copies = Vec::new();
        for c in cells {
            let own = nb + c.n_aux;
            let (implicit, total) = c.implicit_rows(&all, own);
            // variables of this copy: [copy of base | aux | carrier aux], then theta
            let base_at = next;
            let theta = next + total;
            next = theta + 1;
            thetas.push(theta);
            copies.push(base_at);
            for r in c.rows.iter().chain(&implicit) {
                let mut terms: Vec<(usize, f64)> = r.terms.iter().map(|&(i, k)| (base_at + i, k)).collect();
                if r.rhs != 0.0 {
                    terms.push((theta, -r.rhs));
                }
                rows.push(LinRow { terms, cmp: r.cmp, rhs: 0.0 });
            }
            rows.push(LinRow::le(vec![(theta, -1.0)], 0.0));
        }
        rows.push(LinRow::eq(thetas.iter().map(|&t| (t, 1.0)).collect(), 1.0));
        for i in 0..nb {
            let mut terms = vec![(i, 1.0)];
            terms.extend(copies.iter().map(|&b| (b + i, -1.0)));
            rows.push(LinRow::eq(terms, 0.0));
        }
        let paths = (0..first.paths.len())
            .map(|s| PathPart {
                t_max: cells.iter().map(|c| c.paths[s].t_max).fold(f64::NEG_INFINITY, f64::max),
                point_path: cells.iter().all(|c| c.paths[s].point_path),
            })
            .collect();
        let mut cell = Cell { domains: first.domains.clone(), n_aux: next - nb, rows, finite: first.finite.clone(), paths };
        cell.simplify();
        Ok(cell)
    }

    /// Draw a member: lattice factors uniformly from their parts, real
    /// coordinates as a random mixture of LP vertices (inside a bounding box
    /// of half-width `bound`), interior path waypoints uniformly in the box
    /// spanned by the endpoints. Returns `None` for empty cells.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, bound: f64) -> Result<Option<Point>, ConvexError> {
        if self.finite_empty() {
            return Ok(None);
        }
        let mut sys = self.system(0.0);
        let nb = self.n_base();
        for i in 0..nb {
            let mut c = vec![0.0; sys.n_vars];
            c[i] = 1.0;
            sys.push_le(c.clone(), bound);
            sys.push_ge(c, -bound);
        }
        let interior = self.interior_waypoint_vars();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for _ in 0..4 {
            let mut obj = vec![0.0; sys.n_vars];
            for (i, o) in obj.iter_mut().enumerate().take(nb) {
                if !interior.contains(&i) {
                    *o = rng.gen_range(-1.0..1.0);
                }
            }
            match feasibility::maximize(&obj, &sys)? {
                Optimum::Optimal { argmax, .. } => vertices.push(argmax),
                Optimum::Infeasible => return Ok(None),
                Optimum::Unbounded => unreachable!("bounded by construction"),
            }
        }
        let mut w: Vec<f64> = (0..vertices.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let mut x = vec![0.0; sys.n_vars];
        for (wi, v) in w.iter().zip(&vertices) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += wi * vi;
            }
        }
        let mut elements = self
            .finite
            .iter()
            .map(|s| {
                let v: Vec<usize> = s.iter().copied().collect();
                v[rng.gen_range(0..v.len())]
            })
            .collect::<Vec<_>>()
            .into_iter();
        let mut p = self.point_from_vars(&x, |_| elements.next().expect("one per lattice factor"));
        let straight = p.clone();
        let mut jittered = false;
        for v in p.0.iter_mut() {
            if let Value::Path(t) = v {
                let (a, b) = (t.start().to_vec(), t.end().to_vec());
                let k = t.waypoints.len();
                for w in t.waypoints.iter_mut().take(k - 1).skip(1) {
                    for (j, c) in w.iter_mut().enumerate() {
                        let (lo, hi) = (a[j].min(b[j]), a[j].max(b[j]));
                        *c = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                    }
                }
                jittered = true;
            }
        }
        if jittered && !self.contains(&p)? {
            p = straight;
        }
        Ok(Some(p))
    }

    fn interior_waypoint_vars(&self) -> BTreeSet<usize> {
        let offs = self.offsets();
        let mut out = BTreeSet::new();
        for (f, d) in self.domains.iter().enumerate() {
            if let DomainKind::Path { loc_coords, waypoints } = &d.kind {
                let ld = loc_coords.len();
                for k in 1..waypoints - 1 {
                    for j in 0..ld {
                        out.insert(offs[f] + 1 + k * ld + j);
                    }
                }
            }
        }
        out
    }

    pub fn domain_names(&self) -> String {
        self.domains.iter().map(|d| d.name.as_str()).collect::<Vec<_>>().join(", ")
    }

    /// The same set with a shorter description, for display: auxiliary
    /// blocks not connected to any base variable are dropped (they only
    /// restate that the cell is nonempty) and inequalities implied by the
    /// remaining constraints are removed. An empty cell is returned as is.
    pub fn condensed(&self) -> Result<Cell, ConvexError> {
        let mut c = self.clone();
        c.simplify();
        if c.is_empty()? {
            return Ok(c);
        }
        let nb = c.n_base();
        let total = nb + c.n_aux;
        let mut parent: Vec<usize> = (0..total).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for r in &c.rows {
            if let Some(&(first, _)) = r.terms.first() {
                for &(i, _) in &r.terms[1..] {
                    let (a, b) = (root(&mut parent, first), root(&mut parent, i));
                    parent[a] = b;
                }
            }
        }
        let anchored: BTreeSet<usize> = (0..nb).map(|i| root(&mut parent, i)).collect();
        c.rows.retain(|r| r.terms.first().is_none_or(|&(i, _)| anchored.contains(&root(&mut parent, i))));
        let mut k = 0;
        while k < c.rows.len() {
            if c.rows[k].cmp != Cmp::Le {
                k += 1;
                continue;
            }
            let row = c.rows.remove(k);
            let sys = c.system(0.0);
            let mut obj = vec![0.0; sys.n_vars];
            for &(i, w) in &row.terms {
                obj[i] += w;
            }
            let implied = matches!(feasibility::maximize(&obj, &sys)?,
                Optimum::Optimal { value, .. } if value <= row.rhs + 1e-9);
            if !implied {
                c.rows.insert(k, row);
                k += 1;
            }
        }
        c.simplify();
        Ok(c)
    }

    /// Human-readable constraint rows (explicit rows only).
    pub fn rendered_rows(&self) -> Vec<String> {
        let names = self.var_names();
        self.rows.iter().map(|r| r.render(&names)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convexalg::Semilattice;

    fn colour() -> Arc<Domain> {
        Arc::new(Domain::boxed("colour", &["R", "G", "B"], &[(0.0, 1.0); 3]).unwrap())
    }

    fn taste() -> Arc<Domain> {
        Arc::new(Domain::simplex("taste", &["sweet", "sour", "bitter", "salt"]))
    }

    fn texture() -> Arc<Domain> {
        Arc::new(Domain::boxed("texture", &["texture"], &[(0.0, 1.0)]).unwrap())
    }

    fn real(x: &[f64]) -> Point {
        Point(vec![Value::Real(x.to_vec())])
    }

    fn yellow() -> Cell {
        // R >= 0.7, G >= 0.7, B <= 0.5
        Cell::from_rows(
            vec![colour()],
            vec![
                LinRow::le(vec![(0, -1.0)], -0.7),
                LinRow::le(vec![(1, -1.0)], -0.7),
                LinRow::le(vec![(2, 1.0)], 0.5),
            ],
        )
        .unwrap()
    }

    fn banana_colour() -> Cell {
        // 0.9R <= G <= 1.5R, R >= 0.3, B <= 0.1
        Cell::from_rows(
            vec![colour()],
            vec![
                LinRow::le(vec![(0, 0.9), (1, -1.0)], 0.0),
                LinRow::le(vec![(1, 1.0), (0, -1.5)], 0.0),
                LinRow::le(vec![(0, -1.0)], -0.3),
                LinRow::le(vec![(2, 1.0)], 0.1),
            ],
        )
        .unwrap()
    }

    fn dominance(top: usize) -> Cell {
        let rows = (0..4)
            .filter(|&l| l != top)
            .map(|l| LinRow::le(vec![(l, 1.0), (top, -1.0)], 0.0))
            .collect();
        Cell::from_rows(vec![taste()], rows).unwrap()
    }

    #[test]
    fn yellow_membership() {
        assert!(yellow().contains(&real(&[0.8, 0.9, 0.2])).unwrap());
        assert!(!yellow().contains(&real(&[0.6, 0.9, 0.2])).unwrap());
    }

    #[test]
    fn unconstrained_cell_is_full_box_and_contradiction_is_empty() {
        let full = Cell::from_rows(vec![colour()], vec![]).unwrap();
        assert!(full.contains(&real(&[0.0, 1.0, 0.5])).unwrap());
        assert!(!full.contains(&real(&[0.0, 1.1, 0.5])).unwrap());
        let bad = Cell::from_rows(
            vec![colour()],
            vec![LinRow::le(vec![(0, -1.0)], -0.7), LinRow::le(vec![(0, 1.0)], 0.3)],
        )
        .unwrap();
        assert!(bad.is_empty().unwrap());
        assert!(!bad.contains(&real(&[0.5, 0.5, 0.5])).unwrap());
    }

    #[test]
    fn banana_taste_hull_membership() {
        let h = Cell::hull(
            taste(),
            &[vec![1.0, 0.0, 0.0, 0.0], vec![0.25, 0.0, 0.75, 0.0], vec![0.7, 0.3, 0.0, 0.0]],
        )
        .unwrap();
        assert!(h.contains(&real(&[0.65, 0.0, 0.35, 0.0])).unwrap());
        assert!(!h.contains(&real(&[0.0, 0.0, 0.0, 1.0])).unwrap());
        // singleton hull
        let p = Cell::hull(taste(), &[vec![0.5, 0.5, 0.0, 0.0]]).unwrap();
        assert!(p.contains(&real(&[0.5, 0.5, 0.0, 0.0])).unwrap());
        assert!(!p.contains(&real(&[0.4, 0.6, 0.0, 0.0])).unwrap());
        assert!(matches!(Cell::hull(taste(), &[vec![1.0]]), Err(ConvexError::DimensionMismatch { .. })));
    }

    #[test]
    fn sweet_and_bitter_share_a_face() {
        let both = dominance(0).intersect(&dominance(2)).unwrap();
        let w = both.witness().unwrap().expect("nonempty");
        let Value::Real(t) = &w.0[0] else { panic!() };
        assert!((t[0] - t[2]).abs() < 1e-7);
        assert!(t[0] + 1e-7 >= t[1] && t[0] + 1e-7 >= t[3]);
    }

    #[test]
    fn intersection_with_full_space_is_identity_on_probes() {
        let full = Cell::full(vec![colour()]);
        let y = yellow();
        let yi = y.intersect(&full).unwrap();
        for p in [[0.8, 0.9, 0.2], [0.69, 0.9, 0.2], [1.0, 0.7, 0.5], [0.7, 0.7, 0.51]] {
            assert_eq!(yi.contains(&real(&p)).unwrap(), y.contains(&real(&p)).unwrap());
        }
    }

    #[test]
    fn product_layout_and_unit() {
        let b = banana_colour().product(&Cell::from_rows(vec![texture()], vec![
            LinRow::le(vec![(0, -1.0)], -0.2),
            LinRow::le(vec![(0, 1.0)], 0.5),
        ]).unwrap());
        let p = Point(vec![Value::Real(vec![0.6, 0.7, 0.05]), Value::Real(vec![0.3])]);
        assert!(b.contains(&p).unwrap());
        let q = Point(vec![Value::Real(vec![0.6, 0.7, 0.05]), Value::Real(vec![0.6])]);
        assert!(!b.contains(&q).unwrap());
        let same = b.product(&Cell::unit());
        assert!(same.contains(&p).unwrap() && !same.contains(&q).unwrap());
        assert_eq!(same.domains().len(), 2);
    }

    #[test]
    fn point_product_is_pair_point() {
        let a = Cell::point(vec![texture()], &real(&[0.25])).unwrap();
        let b = Cell::point(vec![texture()], &real(&[0.75])).unwrap();
        let ab = a.product(&b);
        let pair = Point(vec![Value::Real(vec![0.25]), Value::Real(vec![0.75])]);
        assert!(ab.contains(&pair).unwrap());
        let swapped = Point(vec![Value::Real(vec![0.75]), Value::Real(vec![0.25])]);
        assert!(!ab.contains(&swapped).unwrap());
    }

    #[test]
    fn intersect_requires_same_shape() {
        assert!(matches!(
            yellow().intersect(&Cell::full(vec![texture()])),
            Err(ConvexError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn projection_keeps_correlations_via_auxiliaries() {
        // {(x, y) | y = 1 - x} on [0,1]^2 projected to x is the full interval,
        // and the diagonal restricted to yellow stays yellow.
        let d = yellow().diagonal().pop().unwrap();
        let first = d.project(&[0]).unwrap();
        assert!(first.contains(&real(&[0.8, 0.9, 0.2])).unwrap());
        assert!(!first.contains(&real(&[0.5, 0.9, 0.2])).unwrap());
        let second = d.project(&[1]).unwrap();
        assert!(!second.contains(&real(&[0.5, 0.9, 0.2])).unwrap());
        assert_eq!(second.n_aux(), 0, "equalities fold into the kept variables");
    }

    #[test]
    fn hull_of_union_fills_the_gap() {
        let lo = Cell::from_rows(vec![texture()], vec![LinRow::le(vec![(0, 1.0)], 0.2)]).unwrap();
        let hi = Cell::from_rows(vec![texture()], vec![LinRow::le(vec![(0, -1.0)], -0.8)]).unwrap();
        let h = Cell::hull_of_union(&[lo.clone(), hi.clone()]).unwrap();
        assert!(h.contains(&real(&[0.5])).unwrap());
        assert!(h.contains(&real(&[0.0])).unwrap());
        assert!(h.contains(&real(&[1.0])).unwrap());
        let mid = Cell::from_rows(vec![texture()], vec![
            LinRow::le(vec![(0, -1.0)], -0.3),
            LinRow::le(vec![(0, 1.0)], 0.4),
        ]).unwrap();
        let h = Cell::hull_of_union(&[mid, hi]).unwrap();
        assert!(!h.contains(&real(&[0.25])).unwrap());
        assert!(h.contains(&real(&[0.55])).unwrap());
    }

    #[test]
    fn finite_parts_are_join_closed_and_intersect() {
        let g = Arc::new(Domain::lattice("s", Semilattice::boolean_grid(2)));
        let l = g.as_lattice().unwrap().clone();
        let c = Cell::finite_subset(g.clone(), &[l.index_of("(1,0)").unwrap(), l.index_of("(0,1)").unwrap()].into()).unwrap();
        assert_eq!(c.finite_parts()[0].len(), 3);
        assert!(c.contains(&Point(vec![Value::Element(l.index_of("(1,1)").unwrap())])).unwrap());
        assert!(!c.contains(&Point(vec![Value::Element(l.index_of("(0,0)").unwrap())])).unwrap());
        let d = Cell::finite_subset(g, &[l.index_of("(0,0)").unwrap()].into()).unwrap();
        assert!(c.intersect(&d).unwrap().is_empty().unwrap());
    }

    #[test]
    fn simplify_preserves_membership() {
        // x0 = a0, a0 = a1, a1 <= 0.4 over a texture factor
        let mut c = Cell::full(vec![texture()]);
        c.n_aux = 2;
        c.rows = vec![
            LinRow::eq(vec![(0, 1.0), (1, -1.0)], 0.0),
            LinRow::eq(vec![(1, 1.0), (2, -1.0)], 0.0),
            LinRow::le(vec![(2, 1.0)], 0.4),
        ];
        let before: Vec<bool> = [0.1, 0.4, 0.5].iter().map(|x| c.contains(&real(&[*x])).unwrap()).collect();
        c.simplify();
        assert_eq!(c.n_aux(), 0);
        assert_eq!(c.rendered_rows(), vec!["texture.texture <= 0.4".to_string()]);
        let after: Vec<bool> = [0.1, 0.4, 0.5].iter().map(|x| c.contains(&real(&[*x])).unwrap()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn point_paths_and_strict_start_times() {
        let path = Arc::new(Domain::path("path", &["x"], 3).unwrap());
        let moving = Cell::full(vec![path.clone()]);
        let now = Trajectory::new(0.0, vec![vec![1.0]; 3]).unwrap();
        let past = Trajectory::linear(-1.0, &[0.0], &[1.0], 3).unwrap();
        assert!(!moving.contains(&Point(vec![Value::Path(now.clone())])).unwrap());
        assert!(moving.contains(&Point(vec![Value::Path(past.clone())])).unwrap());
        let mut still = Cell::full(vec![path]);
        still.make_point_path(0).unwrap();
        assert!(still.contains(&Point(vec![Value::Path(now)])).unwrap());
        assert!(!still.contains(&Point(vec![Value::Path(past)])).unwrap());
        assert!(moving.intersect(&still).unwrap().is_empty().unwrap());
    }

    #[test]
    fn condensing_drops_implied_rows_and_keeps_the_set() {
        // yellow twice over, plus the weaker R >= 0.3 and a free auxiliary block
        let mut c = yellow().intersect(&banana_colour()).unwrap();
        c.push_row(LinRow::le(vec![(0, -1.0)], -0.3)).unwrap();
        let shrunk = c.condensed().unwrap();
        assert!(shrunk.rows().len() < c.rows().len());
        for x in [[0.8, 0.9, 0.05], [0.7, 0.7, 0.1], [0.8, 0.7, 0.05], [0.75, 1.0, 0.0]] {
            assert_eq!(c.contains(&real(&x)).unwrap(), shrunk.contains(&real(&x)).unwrap(), "{x:?}");
        }
        let projected = c.product(&yellow()).project(&[0]).unwrap().condensed().unwrap();
        assert_eq!(projected.n_aux(), 0);
    }
}
