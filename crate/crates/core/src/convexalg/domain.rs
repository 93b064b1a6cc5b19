use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{ConvexError, Trajectory, Value};
use crate::feasibility::{self, LinearSystem};

/// Tolerance on mixing weights summing to one.
pub const WEIGHT_TOL: f64 = 1e-9;

/// A finite join semilattice with all nonempty joins. Mixing forgets the
/// weights and joins the support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Semilattice {
    elements: Vec<String>,
    join: Vec<Vec<usize>>,
}

/// A node of a finite hierarchy, used to build a semilattice whose join is
/// the lowest common ancestor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tree {
    pub label: String,
    pub children: Vec<Tree>,
}

impl Tree {
    pub fn leaf(label: &str) -> Self {
        Self { label: label.to_string(), children: Vec::new() }
    }

    pub fn node(label: &str, children: Vec<Tree>) -> Self {
        Self { label: label.to_string(), children }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl Semilattice {
    /// Validates the table: in range, idempotent, commutative, associative.
    pub fn new(elements: Vec<String>, join: Vec<Vec<usize>>) -> Result<Self, ConvexError> {
        let n = elements.len();
        let bad = |msg: String| Err(ConvexError::Lattice(msg));
        if n == 0 {
            return bad("a semilattice needs at least one element".into());
        }
        let distinct: BTreeSet<&String> = elements.iter().collect();
        if distinct.len() != n {
            return bad("duplicate element names".into());
        }
        if join.len() != n || join.iter().any(|r| r.len() != n || r.iter().any(|&j| j >= n)) {
            return bad(format!("join table must be {n}x{n} over element indices"));
        }
        for a in 0..n {
            if join[a][a] != a {
                return bad(format!("join is not idempotent at `{}`", elements[a]));
            }
            for b in 0..n {
                if join[a][b] != join[b][a] {
                    return bad(format!(
                        "join is not commutative at `{}`, `{}`",
                        elements[a], elements[b]
                    ));
                }
                for c in 0..n {
                    if join[join[a][b]][c] != join[a][join[b][c]] {
                        return bad(format!(
                            "join is not associative at `{}`, `{}`, `{}`",
                            elements[a], elements[b], elements[c]
                        ));
                    }
                }
            }
        }
        Ok(Self { elements, join })
    }

    /// Join is the lowest common ancestor.
    pub fn from_tree(tree: &Tree) -> Result<Self, ConvexError> {
        fn walk(t: &Tree, parent: Option<usize>, labels: &mut Vec<String>, parents: &mut Vec<Option<usize>>) {
            let me = labels.len();
            labels.push(t.label.clone());
            parents.push(parent);
            for c in &t.children {
                walk(c, Some(me), labels, parents);
            }
        }
        let mut labels = Vec::new();
        let mut parents = Vec::new();
        walk(tree, None, &mut labels, &mut parents);
        let ancestors = |mut x: usize| {
            let mut v = vec![x];
            while let Some(p) = parents[x] {
                v.push(p);
                x = p;
            }
            v
        };
        let n = labels.len();
        let mut join = vec![vec![0; n]; n];
        for a in 0..n {
            let anc_a = ancestors(a);
            for b in 0..n {
                let anc_b: BTreeSet<usize> = ancestors(b).into_iter().collect();
                join[a][b] = *anc_a.iter().find(|x| anc_b.contains(x)).expect("shared root");
            }
        }
        Self::new(labels, join)
    }

    /// `{0,1}^k` under elementwise max, elements named like `(1,0)`.
    pub fn boolean_grid(k: usize) -> Self {
        let n = 1usize << k;
        let name = |m: usize| {
            let bits: Vec<String> = (0..k).map(|i| ((m >> (k - 1 - i)) & 1).to_string()).collect();
            format!("({})", bits.join(","))
        };
        let elements = (0..n).map(name).collect();
        let join = (0..n).map(|a| (0..n).map(|b| a | b).collect()).collect();
        Self { elements, join }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn name(&self, e: usize) -> &str {
        &self.elements[e]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        self.elements.iter().position(|e| *e == compact)
    }

    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a][b]
    }

    pub fn join_table(&self) -> &[Vec<usize>] {
        &self.join
    }

    /// Join of a nonempty collection.
    pub fn join_all(&self, items: impl IntoIterator<Item = usize>) -> Option<usize> {
        items.into_iter().reduce(|a, b| self.join(a, b))
    }

    /// Smallest join-closed superset.
    pub fn join_closure(&self, s: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = s.clone();
        loop {
            let mut added = Vec::new();
            for &a in &out {
                for &b in &out {
                    let j = self.join(a, b);
                    if !out.contains(&j) {
                        added.push(j);
                    }
                }
            }
            if added.is_empty() {
                return out;
            }
            out.extend(added);
        }
    }

    pub fn is_join_closed(&self, s: &BTreeSet<usize>) -> bool {
        s.iter().all(|&a| s.iter().all(|&b| s.contains(&self.join(a, b))))
    }
}

/// The carrier of one factor of a conceptual space.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainKind {
    /// Axis-aligned box; `lo <= hi` per coordinate.
    Box { coords: Vec<String>, intervals: Vec<(f64, f64)> },
    /// `{x : a·x <= b}` for each listed row (possibly none: all of R^dim).
    Halfspace { coords: Vec<String>, rows: Vec<(Vec<f64>, f64)> },
    /// Convex hull of finitely many vertices. With `labels` the vertices are
    /// the unit vectors and the domain is the simplex over those labels.
    VertexHull { coords: Vec<String>, vertices: Vec<Vec<f64>>, labels: Option<Vec<String>> },
    Lattice(Semilattice),
    /// Discretised trajectories: start time then `waypoints` points of
    /// `loc_coords.len()` coordinates, evenly spaced over `[t_start, 0]`.
    Path { loc_coords: Vec<String>, waypoints: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub name: String,
    pub kind: DomainKind,
}

impl AsRef<Domain> for Domain {
    fn as_ref(&self) -> &Domain {
        self
    }
}

impl Domain {
    pub fn new(name: &str, kind: DomainKind) -> Result<Self, ConvexError> {
        match &kind {
            DomainKind::Box { coords, intervals } => {
                if coords.len() != intervals.len() {
                    return Err(ConvexError::DimensionMismatch {
                        expected: coords.len(),
                        found: intervals.len(),
                    });
                }
                if let Some((lo, hi)) = intervals.iter().find(|(lo, hi)| !(lo <= hi)) {
                    return Err(ConvexError::Carrier(format!(
                        "box `{name}` has an empty interval [{lo}, {hi}]"
                    )));
                }
            }
            DomainKind::Halfspace { coords, rows } => {
                if let Some((a, _)) = rows.iter().find(|(a, _)| a.len() != coords.len()) {
                    return Err(ConvexError::DimensionMismatch {
                        expected: coords.len(),
                        found: a.len(),
                    });
                }
            }
            DomainKind::VertexHull { coords, vertices, labels } => {
                if vertices.is_empty() {
                    return Err(ConvexError::Carrier(format!("hull `{name}` has no vertices")));
                }
                if let Some(v) = vertices.iter().find(|v| v.len() != coords.len()) {
                    return Err(ConvexError::DimensionMismatch {
                        expected: coords.len(),
                        found: v.len(),
                    });
                }
                if let Some(l) = labels {
                    if l.len() != coords.len() {
                        return Err(ConvexError::DimensionMismatch {
                            expected: coords.len(),
                            found: l.len(),
                        });
                    }
                }
            }
            DomainKind::Lattice(_) => {}
            DomainKind::Path { waypoints, .. } => {
                if *waypoints < 2 {
                    return Err(ConvexError::Carrier(format!(
                        "path domain `{name}` needs at least 2 waypoints"
                    )));
                }
            }
        }
        Ok(Self { name: name.to_string(), kind })
    }

    pub fn boxed(name: &str, coords: &[&str], intervals: &[(f64, f64)]) -> Result<Self, ConvexError> {
        Self::new(
            name,
            DomainKind::Box {
                coords: coords.iter().map(|c| c.to_string()).collect(),
                intervals: intervals.to_vec(),
            },
        )
    }

    /// The probability simplex over `labels`; coordinates are named `t_<label>`.
    pub fn simplex(name: &str, labels: &[&str]) -> Self {
        let k = labels.len();
        let vertices = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            name: name.to_string(),
            kind: DomainKind::VertexHull {
                coords: labels.iter().map(|l| format!("t_{l}")).collect(),
                vertices,
                labels: Some(labels.iter().map(|l| l.to_string()).collect()),
            },
        }
    }

    /// All of R^dim.
    pub fn euclidean(name: &str, dim: usize) -> Self {
        Self {
            name: name.to_string(),
            kind: DomainKind::Halfspace {
                coords: (0..dim).map(|i| format!("x{i}")).collect(),
                rows: Vec::new(),
            },
        }
    }

    pub fn lattice(name: &str, l: Semilattice) -> Self {
        Self { name: name.to_string(), kind: DomainKind::Lattice(l) }
    }

    pub fn path(name: &str, loc_coords: &[&str], waypoints: usize) -> Result<Self, ConvexError> {
        Self::new(
            name,
            DomainKind::Path {
                loc_coords: loc_coords.iter().map(|c| c.to_string()).collect(),
                waypoints,
            },
        )
    }

    pub fn as_lattice(&self) -> Option<&Semilattice> {
        match &self.kind {
            DomainKind::Lattice(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.kind, DomainKind::Lattice(_))
    }

    pub fn is_path(&self) -> bool {
        matches!(self.kind, DomainKind::Path { .. })
    }

    /// Number of real variables a point of this domain occupies.
    pub fn n_vars(&self) -> usize {
        match &self.kind {
            DomainKind::Box { coords, .. }
            | DomainKind::Halfspace { coords, .. }
            | DomainKind::VertexHull { coords, .. } => coords.len(),
            DomainKind::Lattice(_) => 0,
            DomainKind::Path { loc_coords, waypoints } => 1 + loc_coords.len() * waypoints,
        }
    }

    /// Names of the real variables, e.g. `R`, `t_sweet`, `t`, `p0.x1`.
    pub fn var_names(&self) -> Vec<String> {
        match &self.kind {
            DomainKind::Box { coords, .. }
            | DomainKind::Halfspace { coords, .. }
            | DomainKind::VertexHull { coords, .. } => coords.clone(),
            DomainKind::Lattice(_) => Vec::new(),
            DomainKind::Path { loc_coords, waypoints } => {
                let mut v = vec!["t".to_string()];
                for k in 0..*waypoints {
                    v.extend(loc_coords.iter().map(|c| format!("p{k}.{c}")));
                }
                v
            }
        }
    }

    /// Resolve a variable name, accepting `start.` and `end.` as aliases for
    /// the first and last waypoint of a path.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        if let DomainKind::Path { loc_coords, waypoints } = &self.kind {
            let alias = |prefix: &str, k: usize| {
                name.strip_prefix(prefix)
                    .and_then(|c| loc_coords.iter().position(|x| x == c))
                    .map(|j| 1 + k * loc_coords.len() + j)
            };
            if let Some(i) = alias("start.", 0).or_else(|| alias("end.", waypoints - 1)) {
                return Some(i);
            }
        }
        self.var_names().iter().position(|v| v == name)
    }

    /// Linear rows `(terms, is_equality, rhs)` describing the carrier. Terms
    /// index the domain's variables first, then the auxiliaries whose count
    /// is returned alongside. Lattice and path carriers are handled by cells.
    pub(crate) fn carrier_rows(&self) -> (Vec<(Vec<(usize, f64)>, bool, f64)>, usize) {
        let mut rows = Vec::new();
        match &self.kind {
            DomainKind::Box { intervals, .. } => {
                for (i, &(lo, hi)) in intervals.iter().enumerate() {
                    if lo.is_finite() {
                        rows.push((vec![(i, -1.0)], false, -lo));
                    }
                    if hi.is_finite() {
                        rows.push((vec![(i, 1.0)], false, hi));
                    }
                }
                (rows, 0)
            }
            DomainKind::Halfspace { rows: hs, .. } => {
                for (a, b) in hs {
                    rows.push((a.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect(), false, *b));
                }
                (rows, 0)
            }
            DomainKind::VertexHull { coords, vertices, labels } => {
                let d = coords.len();
                if labels.is_some() {
                    for i in 0..d {
                        rows.push((vec![(i, -1.0)], false, 0.0));
                    }
                    rows.push(((0..d).map(|i| (i, 1.0)).collect(), true, 1.0));
                    return (rows, 0);
                }
                let k = vertices.len();
                for i in 0..d {
                    let mut terms = vec![(i, 1.0)];
                    terms.extend(vertices.iter().enumerate().map(|(j, v)| (d + j, -v[i])));
                    rows.push((terms, true, 0.0));
                }
                for j in 0..k {
                    rows.push((vec![(d + j, -1.0)], false, 0.0));
                }
                rows.push(((d..d + k).map(|j| (j, 1.0)).collect(), true, 1.0));
                (rows, k)
            }
            DomainKind::Lattice(_) | DomainKind::Path { .. } => (rows, 0),
        }
    }

    /// Whether `v` lies in the carrier.
    pub fn contains_value(&self, v: &Value) -> Result<bool, ConvexError> {
        match (&self.kind, v) {
            (DomainKind::Lattice(l), Value::Element(e)) => Ok(*e < l.len()),
            (DomainKind::Path { loc_coords, waypoints }, Value::Path(tr)) => {
                Ok(tr.waypoints.len() == *waypoints
                    && tr.waypoints.iter().all(|w| w.len() == loc_coords.len())
                    && tr.t_start <= super::TOL)
            }
            (_, Value::Real(x)) if !self.is_lattice() && !self.is_path() => {
                if x.len() != self.n_vars() {
                    return Err(ConvexError::DimensionMismatch { expected: self.n_vars(), found: x.len() });
                }
                let (rows, n_aux) = self.carrier_rows();
                let d = x.len();
                let mut sys = LinearSystem::new(n_aux);
                for (terms, eq, rhs) in rows {
                    let mut coeffs = vec![0.0; n_aux];
                    let mut r = rhs;
                    for (i, c) in terms {
                        if i < d {
                            r -= c * x[i];
                        } else {
                            coeffs[i - d] += c;
                        }
                    }
                    if eq {
                        sys.push_eq(coeffs, r);
                    } else {
                        sys.push_le(coeffs, r);
                    }
                }
                Ok(feasibility::feasible(&sys)?.is_feasible())
            }
            _ => Err(ConvexError::ShapeMismatch(format!(
                "value does not fit domain `{}`",
                self.name
            ))),
        }
    }

    /// The convex-algebra mixing operation.
    pub fn mix(&self, weights: &[f64], points: &[Value]) -> Result<Value, ConvexError> {
        check_weights(weights, points.len())?;
        match &self.kind {
            DomainKind::Lattice(l) => {
                let mut support = Vec::new();
                for (w, p) in weights.iter().zip(points) {
                    match p {
                        Value::Element(e) if *e < l.len() => {
                            if *w > 0.0 {
                                support.push(*e);
                            }
                        }
                        _ => return Err(ConvexError::Carrier(format!("not an element of `{}`", self.name))),
                    }
                }
                Ok(Value::Element(l.join_all(support).expect("weights sum to one")))
            }
            DomainKind::Path { .. } => {
                let trs = points
                    .iter()
                    .map(|p| match p {
                        Value::Path(t) => Ok(t),
                        _ => Err(ConvexError::Carrier(format!("not a trajectory of `{}`", self.name))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Trajectory::mix_many(weights, &trs).map(Value::Path)
            }
            _ => {
                let d = self.n_vars();
                let mut out = vec![0.0; d];
                for (w, p) in weights.iter().zip(points) {
                    match p {
                        Value::Real(x) if x.len() == d => {
                            for (o, xi) in out.iter_mut().zip(x) {
                                *o += w * xi;
                            }
                        }
                        _ => return Err(ConvexError::Carrier(format!("not a point of `{}`", self.name))),
                    }
                }
                Ok(Value::Real(out))
            }
        }
    }
}

pub(crate) fn check_weights(weights: &[f64], n_points: usize) -> Result<(), ConvexError> {
    if weights.is_empty() || weights.len() != n_points {
        return Err(ConvexError::WeightSum(format!(
            "{} weights for {} points",
            weights.len(),
            n_points
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(ConvexError::WeightSum("weights must be finite and nonnegative".into()));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > WEIGHT_TOL {
        return Err(ConvexError::WeightSum(format!("weights sum to {s}")));
    }
    Ok(())
}

/// Serializable summary used by reports.
#[derive(Clone, Debug, Serialize)]
pub struct DomainSummary {
    pub name: String,
    pub kind: &'static str,
    pub vars: Vec<String>,
}

impl From<&Domain> for DomainSummary {
    fn from(d: &Domain) -> Self {
        let kind = match d.kind {
            DomainKind::Box { .. } => "box",
            DomainKind::Halfspace { .. } => "halfspace",
            DomainKind::VertexHull { .. } => "hull",
            DomainKind::Lattice(_) => "lattice",
            DomainKind::Path { .. } => "path",
        };
        Self { name: d.name.clone(), kind, vars: d.var_names() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn food_tree() -> Semilattice {
        Semilattice::from_tree(&Tree::node(
            "food",
            vec![
                Tree::node("fruit", vec![Tree::leaf("apples"), Tree::leaf("bananas")]),
                Tree::leaf("beer"),
            ],
        ))
        .unwrap()
    }

    #[test]
    fn tree_join_is_lowest_common_ancestor() {
        let t = food_tree();
        let (a, b) = (t.index_of("apples").unwrap(), t.index_of("bananas").unwrap());
        assert_eq!(t.name(t.join(a, b)), "fruit");
        assert_eq!(t.name(t.join(a, t.index_of("beer").unwrap())), "food");
    }

    #[test]
    fn semilattice_mix_joins_the_support() {
        let d = Domain::lattice("foods", food_tree());
        let t = d.as_lattice().unwrap();
        let (a, b) = (t.index_of("apples").unwrap(), t.index_of("bananas").unwrap());
        let m = d.mix(&[0.5, 0.5], &[Value::Element(a), Value::Element(b)]).unwrap();
        assert_eq!(m, Value::Element(t.index_of("fruit").unwrap()));
        // zero weight drops out of the support
        let m = d.mix(&[1.0, 0.0], &[Value::Element(a), Value::Element(b)]).unwrap();
        assert_eq!(m, Value::Element(a));
    }

    #[test]
    fn join_closure_examples() {
        let t = food_tree();
        let s: BTreeSet<usize> = ["apples", "bananas"].iter().map(|n| t.index_of(n).unwrap()).collect();
        let c = t.join_closure(&s);
        let names: BTreeSet<&str> = c.iter().map(|&e| t.name(e)).collect();
        assert_eq!(names, ["apples", "bananas", "fruit"].into_iter().collect());

        let g = Semilattice::boolean_grid(2);
        let single: BTreeSet<usize> = [g.index_of("(1,0)").unwrap()].into();
        assert_eq!(g.join_closure(&single), single);
        let pair: BTreeSet<usize> = [g.index_of("(1,0)").unwrap(), g.index_of("(0,1)").unwrap()].into();
        let names: BTreeSet<&str> = g.join_closure(&pair).iter().map(|&e| g.name(e)).collect();
        assert_eq!(names, ["(1,0)", "(0,1)", "(1,1)"].into_iter().collect());
    }

    #[test]
    fn rgb_midpoint() {
        let rgb = Domain::boxed("colour", &["R", "G", "B"], &[(0.0, 1.0); 3]).unwrap();
        let m = rgb
            .mix(&[0.5, 0.5], &[Value::Real(vec![1.0, 0.0, 0.0]), Value::Real(vec![0.0, 0.0, 1.0])])
            .unwrap();
        assert_eq!(m, Value::Real(vec![0.5, 0.0, 0.5]));
    }

    #[test]
    fn weight_errors() {
        let rgb = Domain::boxed("colour", &["R", "G", "B"], &[(0.0, 1.0); 3]).unwrap();
        let p = Value::Real(vec![0.0; 3]);
        assert!(matches!(rgb.mix(&[0.5, 0.6], &[p.clone(), p.clone()]), Err(ConvexError::WeightSum(_))));
        assert!(matches!(rgb.mix(&[1.0], &[Value::Real(vec![0.0])]), Err(ConvexError::Carrier(_))));
        assert!(matches!(rgb.mix(&[], &[]), Err(ConvexError::WeightSum(_))));
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(Semilattice::new(names.clone(), vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(Semilattice::new(names.clone(), vec![vec![1, 1], vec![1, 1]]).is_err());
        assert!(Semilattice::new(names, vec![vec![0, 1], vec![1, 1]]).is_ok());
    }

    #[test]
    fn carrier_membership() {
        let taste = Domain::simplex("taste", &["sweet", "sour", "bitter", "salt"]);
        assert!(taste.contains_value(&Value::Real(vec![0.5, 0.0, 0.5, 0.0])).unwrap());
        assert!(!taste.contains_value(&Value::Real(vec![0.5, 0.0, 0.6, 0.0])).unwrap());
        let tri = Domain::new(
            "tri",
            DomainKind::VertexHull {
                coords: vec!["x".into(), "y".into()],
                vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
                labels: None,
            },
        )
        .unwrap();
        assert!(tri.contains_value(&Value::Real(vec![0.2, 0.2])).unwrap());
        assert!(!tri.contains_value(&Value::Real(vec![0.6, 0.6])).unwrap());
    }

    #[test]
    fn path_variable_aliases() {
        let p = Domain::path("path", &["x1", "x2"], 4).unwrap();
        assert_eq!(p.n_vars(), 9);
        assert_eq!(p.var_index("t"), Some(0));
        assert_eq!(p.var_index("start.x2"), Some(2));
        assert_eq!(p.var_index("end.x1"), Some(7));
        assert_eq!(p.var_index("p1.x1"), Some(3));
        assert!(Domain::path("p", &["x"], 1).is_err());
    }
}
