//! Evaluation of document expressions into relations.
//!
//! Every expression is evaluated against an expected list of wires when one
//! is known. Names and literals are then lifted into that shape: a region
//! over some of the factors of a single wire is extended by the full carrier
//! of the factors it does not mention. Lifting never spreads a region across
//! several wires; products do that explicitly.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::syntax::{Constraint, DomainSpec, Expr, LinExpr, Op, VarRef};
use crate::convexalg::{Cell, ConvexError, Domain, DomainKind, LinRow, Semilattice, STRICT_MARGIN};
use crate::relsem::{ConvexityStatus, Relation, SemanticObject};

/// Why an expression failed, before a line number is attached.
#[derive(Debug)]
pub(crate) enum Fault {
    Shape(String),
    Lattice(String),
    Dangling(String),
}

impl From<ConvexError> for Fault {
    fn from(e: ConvexError) -> Self {
        match e {
            ConvexError::Lattice(m) => Fault::Lattice(m),
            other => Fault::Shape(other.to_string()),
        }
    }
}

impl From<crate::relsem::RelError> for Fault {
    fn from(e: crate::relsem::RelError) -> Self {
        match e {
            crate::relsem::RelError::Convex(c) => c.into(),
            other => Fault::Shape(other.to_string()),
        }
    }
}

type FResult<T> = Result<T, Fault>;

pub(crate) struct Scope<'a> {
    pub domains: &'a BTreeMap<String, Arc<Domain>>,
    pub objects: &'a BTreeMap<String, SemanticObject>,
    pub properties: &'a BTreeMap<String, Relation>,
}

pub(crate) fn domain_object(d: &Arc<Domain>) -> SemanticObject {
    SemanticObject::new(&d.name, vec![d.clone()])
}

fn flat(wires: &[SemanticObject]) -> Vec<Arc<Domain>> {
    wires.iter().flat_map(|w| w.factors.iter().cloned()).collect()
}

fn same_domains(a: &[Arc<Domain>], b: &[Arc<Domain>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| Arc::ptr_eq(x, y) || x == y)
}

fn describe(wires: &[SemanticObject]) -> String {
    let parts: Vec<String> = wires
        .iter()
        .map(|w| {
            let names: Vec<&str> = w.factors.iter().map(|d| d.name.as_str()).collect();
            format!("{}[{}]", w.name, names.join(" * "))
        })
        .collect();
    format!("({})", parts.join(", "))
}

fn rewrap(rel: Relation, wires: &[SemanticObject]) -> FResult<Relation> {
    let status = rel.convexity;
    Ok(Relation::new(wires.to_vec(), rel.into_cells(), status)?)
}

/// Fit `rel` into `expected`, extending it by full carriers when it covers
/// only some factors of a single expected wire.
pub(crate) fn lift(rel: Relation, expected: &[SemanticObject]) -> FResult<Relation> {
    let have = rel.domains();
    let want = flat(expected);
    if same_domains(&have, &want) {
        return rewrap(rel, expected);
    }
    let mismatch = || Fault::Shape(format!("expected shape {}, found {}", describe(expected), describe(rel.wires())));
    if expected.len() != 1 {
        return Err(mismatch());
    }
    let mut pos = Vec::with_capacity(have.len());
    let mut next = 0;
    for d in &have {
        let k = (next..want.len()).find(|&j| Arc::ptr_eq(d, &want[j]) || **d == *want[j]).ok_or_else(mismatch)?;
        pos.push(k);
        next = k + 1;
    }
    let missing: Vec<usize> = (0..want.len()).filter(|j| !pos.contains(j)).collect();
    let filler = Cell::full(missing.iter().map(|&j| want[j].clone()).collect());
    // Factor j of the target sits at `pos.index(j)` or after the original
    // factors in the extended cell.
    let keep: Vec<usize> = (0..want.len())
        .map(|j| match pos.iter().position(|&p| p == j) {
            Some(i) => i,
            None => have.len() + missing.iter().position(|&m| m == j).expect("missing"),
        })
        .collect();
    let status = rel.convexity;
    let cells = rel
        .cells()
        .iter()
        .map(|c| c.product(&filler).project(&keep))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Relation::new(expected.to_vec(), cells, status)?)
}

fn prune(cells: Vec<Cell>) -> FResult<Vec<Cell>> {
    let mut out = Vec::with_capacity(cells.len());
    for c in cells {
        if !c.is_empty()? {
            out.push(c);
        }
    }
    Ok(out)
}

impl Scope<'_> {
    /// The relation a bare name denotes: a property, the full space of an
    /// atomic type's object, or the full carrier of a domain.
    fn named(&self, name: &str) -> FResult<Relation> {
        if let Some(p) = self.properties.get(name) {
            return Ok(p.clone());
        }
        self.space(name).map(|w| Relation::full(vec![w]))
    }

    fn space(&self, name: &str) -> FResult<SemanticObject> {
        if let Some(o) = self.objects.get(name) {
            return Ok(o.clone());
        }
        if let Some(d) = self.domains.get(name) {
            return Ok(domain_object(d));
        }
        Err(Fault::Dangling(name.to_string()))
    }

    pub fn eval(&self, e: &Expr, expected: Option<&[SemanticObject]>) -> FResult<Relation> {
        let fit = |r: Relation| match expected {
            Some(w) => lift(r, w),
            None => Ok(r),
        };
        match e {
            Expr::Name(n) => fit(self.named(n)?),
            Expr::Any(n) => fit(Relation::full(vec![self.space(n)?])),
            Expr::HullPoints(_) | Expr::Interval(..) | Expr::Elements(_) => {
                let w = expected.ok_or_else(|| Fault::Shape(format!("cannot tell which domain `{e}` constrains")))?;
                let fl = flat(w);
                if fl.len() != 1 {
                    return Err(Fault::Shape(format!(
                        "`{e}` constrains a single domain but {} has {} factors",
                        describe(w),
                        fl.len()
                    )));
                }
                let cell = literal(e, &fl[0])?;
                Ok(Relation::new(w.to_vec(), vec![cell], ConvexityStatus::Verified)?)
            }
            Expr::Where(base, cs) => {
                let rel = match base {
                    Some(b) => self.eval(b, expected)?,
                    None => Relation::full(
                        expected
                            .ok_or_else(|| Fault::Shape(format!("cannot tell which space `{e}` restricts")))?
                            .to_vec(),
                    ),
                };
                let mut cells = rel.cells().to_vec();
                for c in cs {
                    cells = apply_constraint(cells, c, rel.wires())?;
                }
                Ok(Relation::new(rel.wires().to_vec(), prune(cells)?, rel.convexity)?)
            }
            Expr::Diag(inner) => {
                let wire = match expected {
                    Some([a, b]) if a == b => Some(a.clone()),
                    Some(w) => {
                        return Err(Fault::Shape(format!("a diagonal has two equal wires, expected {}", describe(w))));
                    }
                    None => None,
                };
                let r = self.eval(inner, wire.as_ref().map(std::slice::from_ref))?;
                if r.wires().len() != 1 {
                    return Err(Fault::Shape(format!("diag needs a one-wire region, found {}", describe(r.wires()))));
                }
                let w = r.wires()[0].clone();
                let cells: Vec<Cell> = r.cells().iter().flat_map(|c| c.diagonal()).collect();
                Ok(Relation::new(vec![w.clone(), w], cells, r.convexity)?)
            }
            Expr::Hull(inner) => {
                let r = self.eval(inner, expected)?.pruned()?;
                if r.cells().is_empty() {
                    return Ok(r);
                }
                let cell = Cell::hull_of_union(r.cells())?;
                Ok(Relation::new(r.wires().to_vec(), vec![cell], ConvexityStatus::Verified)?)
            }
            Expr::Union(parts) => {
                let rels = self.eval_all(parts, expected)?;
                let wires = rels[0].wires().to_vec();
                let cells = rels.into_iter().flat_map(Relation::into_cells).collect();
                Ok(Relation::new(wires, cells, ConvexityStatus::Unknown)?)
            }
            Expr::Inter(parts) => {
                let rels = self.eval_all(parts, expected)?;
                let wires = rels[0].wires().to_vec();
                let mut cells = rels[0].cells().to_vec();
                for r in &rels[1..] {
                    let mut next = Vec::new();
                    for a in &cells {
                        for b in r.cells() {
                            next.push(a.intersect(b)?);
                        }
                    }
                    cells = prune(next)?;
                }
                Ok(Relation::new(wires, cells, ConvexityStatus::Unknown)?)
            }
            Expr::Product(parts) => self.product(parts, expected),
        }
    }

    /// Evaluate operands of a union or intersection to one common shape.
    fn eval_all(&self, parts: &[Expr], expected: Option<&[SemanticObject]>) -> FResult<Vec<Relation>> {
        if let Some(w) = expected {
            return parts.iter().map(|p| self.eval(p, Some(w))).collect();
        }
        let rels = parts.iter().map(|p| self.eval(p, None)).collect::<FResult<Vec<_>>>()?;
        let widest = rels.iter().max_by_key(|r| r.domains().len()).expect("nonempty").wires().to_vec();
        rels.into_iter().map(|r| lift(r, &widest)).collect()
    }

    fn product(&self, parts: &[Expr], expected: Option<&[SemanticObject]>) -> FResult<Relation> {
        let tensor = |rels: Vec<Relation>| -> Relation {
            let mut it = rels.into_iter();
            let first = it.next().expect("nonempty product");
            it.fold(first, |acc, r| acc.tensor(&r))
        };
        let Some(w) = expected else {
            let rels = parts.iter().map(|p| self.eval(p, None)).collect::<FResult<Vec<_>>>()?;
            return Ok(tensor(rels));
        };
        if w.len() == parts.len() {
            let rels = parts
                .iter()
                .zip(w)
                .map(|(p, wi)| self.eval(p, Some(std::slice::from_ref(wi))))
                .collect::<FResult<Vec<_>>>()?;
            return rewrap(tensor(rels), w);
        }
        // Positional: factors cover consecutive domains of the flattened
        // expected shape.
        let fl = flat(w);
        let mut at = 0;
        let mut rels = Vec::with_capacity(parts.len());
        for p in parts {
            let r = if p.is_literal() {
                let d = fl.get(at).ok_or_else(|| Fault::Shape(format!("too many factors for {}", describe(w))))?;
                self.eval(p, Some(&[domain_object(d)]))?
            } else {
                self.eval(p, None)?
            };
            let n = r.domains().len();
            if at + n > fl.len() || !same_domains(&r.domains(), &fl[at..at + n]) {
                return Err(Fault::Shape(format!(
                    "factor `{p}` over {} does not fit {} at position {at}",
                    describe(r.wires()),
                    describe(w)
                )));
            }
            at += n;
            rels.push(r);
        }
        if at != fl.len() {
            return Err(Fault::Shape(format!("product covers {at} of the {} factors of {}", fl.len(), describe(w))));
        }
        rewrap(tensor(rels), w)
    }
}

/// A single-domain literal.
fn literal(e: &Expr, d: &Arc<Domain>) -> FResult<Cell> {
    match e {
        Expr::Interval(lo, hi) => {
            if d.n_vars() != 1 || d.is_path() {
                return Err(Fault::Shape(format!("an interval needs a one-coordinate domain, `{}` is not", d.name)));
            }
            let mut rows = Vec::new();
            if lo.is_finite() {
                rows.push(LinRow::le(vec![(0, -1.0)], -lo));
            }
            if hi.is_finite() {
                rows.push(LinRow::le(vec![(0, 1.0)], *hi));
            }
            Ok(Cell::from_rows(vec![d.clone()], rows)?)
        }
        Expr::HullPoints(pts) => Ok(Cell::hull(d.clone(), pts)?),
        Expr::Elements(names) => {
            let l = d
                .as_lattice()
                .ok_or_else(|| Fault::Shape(format!("`{e}` lists elements but `{}` is not a lattice", d.name)))?;
            let set = names
                .iter()
                .map(|n| l.index_of(n).ok_or_else(|| Fault::Dangling(format!("{}.{n}", d.name))))
                .collect::<FResult<_>>()?;
            Ok(Cell::finite_subset(d.clone(), &set)?)
        }
        _ => unreachable!("not a literal"),
    }
}

enum Resolved {
    Scalar(usize),
    Vars(Vec<usize>),
    Factors(Vec<usize>),
}

fn var_offsets(domains: &[Arc<Domain>]) -> Vec<usize> {
    let mut acc = 0;
    domains
        .iter()
        .map(|d| {
            let o = acc;
            acc += d.n_vars();
            o
        })
        .collect()
}

fn resolve(v: &VarRef, wires: &[SemanticObject]) -> FResult<Resolved> {
    let domains = flat(wires);
    let voff = var_offsets(&domains);
    let mut foff = Vec::new();
    let mut acc = 0;
    for w in wires {
        foff.push(acc);
        acc += w.factors.len();
    }
    let scope: Vec<usize> = match v.wire {
        Some(k) if k < wires.len() => (foff[k]..foff[k] + wires[k].factors.len()).collect(),
        Some(k) => return Err(Fault::Shape(format!("`${k}` but the region has {} wires", wires.len()))),
        None => (0..domains.len()).collect(),
    };
    if v.path.is_empty() {
        return Ok(Resolved::Factors(scope));
    }
    let dangling = || Fault::Dangling(v.to_string());
    let (head, rest) = match v.path.split_once('.') {
        Some((h, r)) => (h, r),
        None => (v.path.as_str(), ""),
    };
    let named: Vec<usize> = scope.iter().copied().filter(|&f| domains[f].name == head).collect();
    if named.len() > 1 {
        return Err(Fault::Shape(format!("`{v}` is ambiguous; qualify it with a wire such as `$0.`")));
    }
    if let Some(&f) = named.first() {
        let d = &domains[f];
        if rest.is_empty() {
            return Ok(Resolved::Factors(vec![f]));
        }
        if let DomainKind::Path { loc_coords, .. } = &d.kind {
            if rest == "start" || rest == "end" {
                let idx = loc_coords
                    .iter()
                    .map(|c| d.var_index(&format!("{rest}.{c}")).map(|i| voff[f] + i).ok_or_else(dangling))
                    .collect::<FResult<_>>()?;
                return Ok(Resolved::Vars(idx));
            }
        }
        return d.var_index(rest).map(|i| Resolved::Scalar(voff[f] + i)).ok_or_else(dangling);
    }
    let hits: Vec<usize> =
        scope.iter().filter_map(|&f| domains[f].var_index(&v.path).map(|i| voff[f] + i)).collect();
    match hits.as_slice() {
        [i] => Ok(Resolved::Scalar(*i)),
        [] => Err(dangling()),
        _ => Err(Fault::Shape(format!("`{v}` is ambiguous; qualify it with its domain or wire"))),
    }
}

fn factor_vars(f: &[usize], domains: &[Arc<Domain>]) -> FResult<Vec<usize>> {
    let voff = var_offsets(domains);
    let mut out = Vec::new();
    for &k in f {
        if domains[k].is_lattice() {
            return Err(Fault::Shape(format!("lattice `{}` has no coordinates to equate", domains[k].name)));
        }
        out.extend(voff[k]..voff[k] + domains[k].n_vars());
    }
    Ok(out)
}

/// Linear constraint rows `(terms, cmp, rhs)` from a chain; `scalar` maps a
/// variable to its index.
pub(crate) fn chain_rows(
    parts: &[LinExpr],
    ops: &[Op],
    scalar: &mut dyn FnMut(&VarRef) -> FResult<usize>,
) -> FResult<Vec<LinRow>> {
    let mut rows = Vec::new();
    for (k, op) in ops.iter().enumerate() {
        // lhs - rhs  (op)  0
        let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
        let mut constant = 0.0;
        for (sign, side) in [(1.0, &parts[k]), (-1.0, &parts[k + 1])] {
            for (c, v) in &side.0 {
                match v {
                    Some(v) => *terms.entry(scalar(v)?).or_default() += sign * c,
                    None => constant += sign * c,
                }
            }
        }
        let t: Vec<(usize, f64)> = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        let neg: Vec<(usize, f64)> = t.iter().map(|&(i, c)| (i, -c)).collect();
        rows.push(match op {
            Op::Le => LinRow::le(t, -constant),
            Op::Lt => LinRow::le(t, -constant - STRICT_MARGIN),
            Op::Ge => LinRow::le(neg, constant),
            Op::Gt => LinRow::le(neg, constant - STRICT_MARGIN),
            Op::Eq => LinRow::eq(t, -constant),
        });
    }
    Ok(rows)
}

fn apply_constraint(cells: Vec<Cell>, c: &Constraint, wires: &[SemanticObject]) -> FResult<Vec<Cell>> {
    let domains = flat(wires);
    let mut scalar = |v: &VarRef| match resolve(v, wires)? {
        Resolved::Scalar(i) => Ok(i),
        // A one-coordinate domain stands for its coordinate.
        Resolved::Factors(f) if f.len() == 1 && !domains[f[0]].is_path() && domains[f[0]].n_vars() == 1 => {
            Ok(var_offsets(&domains)[f[0]])
        }
        _ => Err(Fault::Shape(format!("`{v}` names several coordinates; use it only in `a = b` between blocks"))),
    };
    let push_all = |mut cells: Vec<Cell>, rows: Vec<LinRow>| -> FResult<Vec<Cell>> {
        for cell in &mut cells {
            for r in &rows {
                cell.push_row(r.clone())?;
            }
        }
        Ok(cells)
    };
    match c {
        Constraint::PointPath(v) => match resolve(v, wires)? {
            Resolved::Factors(f) if f.len() == 1 && domains[f[0]].is_path() => {
                let mut cells = cells;
                for cell in &mut cells {
                    cell.make_point_path(f[0])?;
                }
                Ok(cells)
            }
            _ => Err(Fault::Shape(format!("point_path needs a path domain, `{v}` is not one"))),
        },
        Constraint::In(v, lo, hi) => {
            let i = scalar(v)?;
            let mut rows = Vec::new();
            if lo.is_finite() {
                rows.push(LinRow::le(vec![(i, -1.0)], -lo));
            }
            if hi.is_finite() {
                rows.push(LinRow::le(vec![(i, 1.0)], *hi));
            }
            push_all(cells, rows)
        }
        Constraint::Chain(parts, ops) => {
            if let ([LinExpr(a), LinExpr(b)], [Op::Eq]) = (parts.as_slice(), ops.as_slice()) {
                if let ([(ca, Some(va))], [(cb, Some(vb))]) = (a.as_slice(), b.as_slice()) {
                    if *ca == 1.0 && *cb == 1.0 {
                        let (ra, rb) = (resolve(va, wires)?, resolve(vb, wires)?);
                        if !matches!((&ra, &rb), (Resolved::Scalar(_), Resolved::Scalar(_))) {
                            return block_equality(cells, ra, rb, &domains, c);
                        }
                    }
                }
            }
            let rows = chain_rows(parts, ops, &mut scalar)?;
            push_all(cells, rows)
        }
    }
}

fn block_equality(cells: Vec<Cell>, a: Resolved, b: Resolved, domains: &[Arc<Domain>], c: &Constraint) -> FResult<Vec<Cell>> {
    if let (Resolved::Factors(fa), Resolved::Factors(fb)) = (&a, &b) {
        let da: Vec<Arc<Domain>> = fa.iter().map(|&f| domains[f].clone()).collect();
        let db: Vec<Arc<Domain>> = fb.iter().map(|&f| domains[f].clone()).collect();
        if !same_domains(&da, &db) {
            return Err(Fault::Shape(format!("`{c}` equates blocks over different domains")));
        }
        let mut out = Vec::new();
        for cell in &cells {
            out.extend(cell.link_blocks(fa, fb)?);
        }
        return Ok(out);
    }
    let vars = |r: Resolved| -> FResult<Vec<usize>> {
        match r {
            Resolved::Scalar(i) => Ok(vec![i]),
            Resolved::Vars(v) => Ok(v),
            Resolved::Factors(f) => factor_vars(&f, domains),
        }
    };
    let (va, vb) = (vars(a)?, vars(b)?);
    if va.len() != vb.len() {
        return Err(Fault::Shape(format!("`{c}` equates blocks of {} and {} coordinates", va.len(), vb.len())));
    }
    let mut cells = cells;
    for cell in &mut cells {
        for (&i, &j) in va.iter().zip(&vb) {
            cell.push_row(LinRow::eq(vec![(i, 1.0), (j, -1.0)], 0.0))?;
        }
    }
    Ok(cells)
}

/// Build a domain from its declaration; earlier domains are visible to
/// `path` declarations.
pub(crate) fn build_domain(
    name: &str,
    spec: &DomainSpec,
    earlier: &BTreeMap<String, Arc<Domain>>,
) -> FResult<Domain> {
    let kind = match spec {
        DomainSpec::Box(cs) => DomainKind::Box {
            coords: cs.iter().map(|c| c.0.clone()).collect(),
            intervals: cs.iter().map(|c| (c.1, c.2)).collect(),
        },
        DomainSpec::Simplex(labels) => {
            let l: Vec<&str> = labels.iter().map(String::as_str).collect();
            return Ok(Domain::simplex(name, &l));
        }
        DomainSpec::Hull { coords, points } => {
            DomainKind::VertexHull { coords: coords.clone(), vertices: points.clone(), labels: None }
        }
        DomainSpec::Halfspace { coords, constraints } => {
            let mut rows = Vec::new();
            for c in constraints {
                let Constraint::Chain(parts, ops) = c else {
                    return Err(Fault::Shape(format!("`{c}` is not a linear constraint")));
                };
                let mut scalar = |v: &VarRef| {
                    coords
                        .iter()
                        .position(|x| v.wire.is_none() && *x == v.path)
                        .ok_or_else(|| Fault::Dangling(v.to_string()))
                };
                for r in chain_rows(parts, ops, &mut scalar)? {
                    let mut a = vec![0.0; coords.len()];
                    for &(i, c) in &r.terms {
                        a[i] = c;
                    }
                    if r.cmp == crate::feasibility::Cmp::Eq {
                        rows.push((a.iter().map(|x| -x).collect(), -r.rhs));
                    }
                    rows.push((a, r.rhs));
                }
            }
            DomainKind::Halfspace { coords: coords.clone(), rows }
        }
        DomainSpec::Grid(k) => DomainKind::Lattice(Semilattice::boolean_grid(*k)),
        DomainSpec::Tree(t) => DomainKind::Lattice(Semilattice::from_tree(t)?),
        DomainSpec::Table { elements, joins } => {
            let n = elements.len();
            let mut table: Vec<Vec<Option<usize>>> = vec![vec![None; n]; n];
            let idx = |e: &String| elements.iter().position(|x| x == e).expect("checked by the parser");
            for (i, row) in table.iter_mut().enumerate() {
                row[i] = Some(i);
            }
            for (a, b, c) in joins {
                let (a, b, c) = (idx(a), idx(b), idx(c));
                for (x, y) in [(a, b), (b, a)] {
                    if table[x][y].is_some_and(|old| old != c) {
                        return Err(Fault::Lattice(format!(
                            "conflicting joins for {} | {}",
                            elements[x], elements[y]
                        )));
                    }
                    table[x][y] = Some(c);
                }
            }
            let mut join = vec![vec![0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    join[i][j] = table[i][j].ok_or_else(|| {
                        Fault::Lattice(format!("no join given for {} | {}", elements[i], elements[j]))
                    })?;
                }
            }
            DomainKind::Lattice(Semilattice::new(elements.clone(), join)?)
        }
        DomainSpec::Path { location, waypoints } => {
            let loc = earlier.get(location).ok_or_else(|| Fault::Dangling(location.clone()))?;
            let coords = match &loc.kind {
                DomainKind::Box { coords, .. }
                | DomainKind::Halfspace { coords, .. }
                | DomainKind::VertexHull { coords, .. } => coords.clone(),
                _ => return Err(Fault::Shape(format!("`{location}` has no coordinates to move through"))),
            };
            DomainKind::Path { loc_coords: coords, waypoints: *waypoints }
        }
    };
    Ok(Domain::new(name, kind)?)
}
