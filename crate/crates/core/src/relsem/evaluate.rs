use std::collections::BTreeMap;

use super::{ConvexityStatus, RelError, Relation, SemanticObject};
use crate::convexalg::Cell;
use crate::pregroup::{Output, SpiderGroup, Wiring};

/// `{(a, ..., a)}` on `m + n` copies of `d`. The split into inputs and
/// outputs only matters for composition; as a set all spiders with the same
/// number of legs coincide.
pub fn spider(d: &SemanticObject, m: usize, n: usize) -> Result<Relation, RelError> {
    let legs = m + n;
    if legs == 0 {
        return Err(RelError::DegenerateSpider);
    }
    let k = d.factors.len();
    let flat = (0..legs).flat_map(|_| d.factors.iter().cloned()).collect();
    let mut cells = vec![Cell::full(flat)];
    let first: Vec<usize> = (0..k).collect();
    for leg in 1..legs {
        let other: Vec<usize> = (leg * k..(leg + 1) * k).collect();
        let mut next = Vec::new();
        for c in &cells {
            next.extend(c.link_blocks(&first, &other)?);
        }
        cells = next;
    }
    // A diagonal is closed under mixtures in any convex algebra.
    Relation::new(vec![d.clone(); legs], cells, ConvexityStatus::Verified)
}

/// The effect `d ⊗ d -> I`.
pub fn cup(d: &SemanticObject) -> Relation {
    spider(d, 2, 0).expect("two legs")
}

/// The state `I -> d ⊗ d`.
pub fn cap(d: &SemanticObject) -> Relation {
    spider(d, 0, 2).expect("two legs")
}

pub fn identity(d: &SemanticObject) -> Relation {
    spider(d, 1, 1).expect("two legs")
}

/// Sequential composition of `r : A -> B` (its first `r_in` wires are `A`)
/// with `s : B -> C` (its first `s_in` wires are `B`). The result has the
/// wires of `A` followed by those of `C`.
pub fn compose(r: &Relation, r_in: usize, s: &Relation, s_in: usize) -> Result<Relation, RelError> {
    let nr = r.wires().len();
    if r_in > nr || s_in > s.wires().len() || nr - r_in != s_in {
        return Err(RelError::ShapeMismatch(format!(
            "cannot compose a relation with {} outputs into one with {s_in} inputs",
            nr.saturating_sub(r_in)
        )));
    }
    let n_wires = nr + s.wires().len();
    let spiders = (0..s_in)
        .map(|j| SpiderGroup { positions: vec![r_in + j, nr + j], out_arity: 0 })
        .collect();
    let outputs = (0..r_in).chain(nr + s_in..n_wires).map(Output::Wire).collect();
    let w = Wiring { n_wires, cups: Vec::new(), spiders, outputs };
    evaluate(&w, &[r, s])
}

/// The image of the state `x` under `r`, whose first `r_in` wires are inputs.
pub fn apply(r: &Relation, r_in: usize, x: &Relation) -> Result<Relation, RelError> {
    compose(x, 0, r, r_in)
}

/// Interpret a reduction diagram: link every cup and spider group, keep the
/// output wires and existentially quantify everything else.
pub fn evaluate(w: &Wiring, words: &[&Relation]) -> Result<Relation, RelError> {
    let wires: Vec<SemanticObject> = words.iter().flat_map(|r| r.wires().iter().cloned()).collect();
    if wires.len() != w.n_wires {
        return Err(RelError::ShapeMismatch(format!(
            "diagram has {} wires but the words supply {}",
            w.n_wires,
            wires.len()
        )));
    }
    w.validate()?;
    let mut offsets = Vec::with_capacity(wires.len());
    let mut acc = 0;
    for o in &wires {
        offsets.push(acc);
        acc += o.factors.len();
    }
    let block = |p: usize| -> Vec<usize> { (offsets[p]..offsets[p] + wires[p].factors.len()).collect() };

    let groups = w.groups();
    let mut slot_rep: BTreeMap<usize, usize> = BTreeMap::new();
    for (positions, slot) in &groups {
        let rep = positions[0];
        for &p in &positions[1..] {
            if wires[p] != wires[rep] {
                return Err(RelError::DomainMismatch(format!(
                    "wire {rep} ({}) is connected to wire {p} ({})",
                    wires[rep], wires[p]
                )));
            }
        }
        if let Some(s) = slot {
            slot_rep.insert(*s, rep);
        }
    }
    let out_wires: Vec<SemanticObject> = (0..w.outputs.len()).map(|s| wires[slot_rep[&s]].clone()).collect();
    let keep: Vec<usize> = (0..w.outputs.len()).flat_map(|s| block(slot_rep[&s])).collect();

    let mut result = Vec::new();
    if words.iter().any(|r| r.cells().is_empty()) {
        return Ok(Relation::empty(out_wires));
    }
    let mut choice = vec![0usize; words.len()];
    loop {
        let mut joint = Cell::unit();
        for (r, &k) in words.iter().zip(&choice) {
            joint = joint.product(&r.cells()[k]);
        }
        let mut cells = vec![joint];
        for (positions, _) in &groups {
            let rep = block(positions[0]);
            for &p in &positions[1..] {
                let mut next = Vec::new();
                for c in &cells {
                    next.extend(c.link_blocks(&rep, &block(p))?);
                }
                cells = next;
            }
        }
        for c in cells {
            let projected = c.project(&keep)?;
            if !projected.is_empty()? {
                result.push(projected);
            }
        }
        // advance the odometer
        let mut i = words.len();
        loop {
            if i == 0 {
                let convexity = if result.len() <= 1 { ConvexityStatus::Verified } else { ConvexityStatus::Unknown };
                return Relation::new(out_wires, result, convexity);
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < words[i].cells().len() {
                break;
            }
            choice[i] = 0;
        }
    }
}

/// The simplified diagram of a subject-relative clause `subject which verb
/// object`: the subject and the verb's subject wire merge into the single
/// output, the verb's sentence wire is deleted and the object is cupped
/// with the verb's object wire.
pub fn which_wiring(subject_len: usize, verb_len: usize, object_len: usize) -> Result<Wiring, RelError> {
    if subject_len != 1 || verb_len != 3 || object_len != 1 {
        return Err(RelError::ShapeMismatch(format!(
            "a relative clause needs wires 1, 3, 1; found {subject_len}, {verb_len}, {object_len}"
        )));
    }
    Ok(Wiring {
        n_wires: 5,
        cups: vec![(3, 4)],
        spiders: vec![
            SpiderGroup { positions: vec![0, 1], out_arity: 1 },
            SpiderGroup { positions: vec![2], out_arity: 0 },
        ],
        outputs: vec![Output::Spider(0)],
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Arc;

    use super::*;
    use crate::convexalg::{Domain, LinRow, Point, Semilattice, Tree, Value};

    fn interval_obj() -> SemanticObject {
        SemanticObject::new("X", vec![Arc::new(Domain::boxed("x", &["x"], &[(0.0, 1.0)]).unwrap())])
    }

    fn interval(o: &SemanticObject, lo: f64, hi: f64) -> Relation {
        let c = Cell::from_rows(o.factors.clone(), vec![LinRow::le(vec![(0, -1.0)], -lo), LinRow::le(vec![(0, 1.0)], hi)])
            .unwrap();
        Relation::from_cell(vec![o.clone()], c).unwrap()
    }

    fn pt(x: f64) -> Point {
        Point(vec![Value::Real(vec![x])])
    }

    fn tree_obj() -> SemanticObject {
        let t = Tree::node(
            "food",
            vec![Tree::node("fruit", vec![Tree::leaf("apples"), Tree::leaf("bananas")]), Tree::leaf("beer")],
        );
        SemanticObject::new("F", vec![Arc::new(Domain::lattice("food", Semilattice::from_tree(&t).unwrap()))])
    }

    #[test]
    fn degenerate_spider() {
        assert_eq!(spider(&interval_obj(), 0, 0).unwrap_err(), RelError::DegenerateSpider);
    }

    #[test]
    fn cup_on_points() {
        let x = interval_obj();
        let p = interval(&x, 0.3, 0.3);
        let q = interval(&x, 0.6, 0.6);
        let c = cup(&x);
        let yes = evaluate(&Wiring { n_wires: 4, cups: vec![], spiders: vec![
            SpiderGroup { positions: vec![0, 2], out_arity: 0 },
            SpiderGroup { positions: vec![1, 3], out_arity: 0 },
        ], outputs: vec![] }, &[&p, &p, &c]).unwrap();
        assert!(!yes.is_empty().unwrap());
        let no = compose(&p.tensor(&q), 0, &c, 2).unwrap();
        assert!(no.is_empty().unwrap());
        assert!(no.wires().is_empty());
    }

    #[test]
    fn cap_on_grid_has_four_diagonal_pairs() {
        let g = SemanticObject::new("S", vec![Arc::new(Domain::lattice("s", Semilattice::boolean_grid(2)))]);
        let e = cap(&g).enumerate().unwrap().unwrap();
        let want: BTreeSet<Vec<usize>> = (0..4).map(|i| vec![i, i]).collect();
        assert_eq!(e, want);
    }

    #[test]
    fn cap_projects_onto_the_full_space() {
        let x = interval_obj();
        let c = cap(&x);
        let first = Relation::new(vec![x.clone()], c.cells().iter().map(|c| c.project(&[0]).unwrap()).collect(), ConvexityStatus::Verified).unwrap();
        for v in [0.0, 0.5, 1.0] {
            assert!(first.contains(&pt(v)).unwrap());
        }
    }

    #[test]
    fn snake_on_the_food_tree() {
        let f = tree_obj();
        // (1 ⊗ cup) ∘ (cap ⊗ 1), inputs listed first in each stage
        let first = cap(&f).tensor(&identity(&f)).permute(&[2, 0, 1, 3]).unwrap();
        let second = identity(&f).tensor(&cup(&f)).permute(&[0, 2, 3, 1]).unwrap();
        let e = compose(&first, 1, &second, 3).unwrap().enumerate().unwrap().unwrap();
        assert_eq!(e, identity(&f).enumerate().unwrap().unwrap());
        assert_eq!(e.len(), 5);
    }

    #[test]
    fn merge_of_disjoint_intervals_is_empty() {
        let x = interval_obj();
        let a = interval(&x, 0.2, 0.5);
        let b = interval(&x, 0.0, 0.01);
        let mu = spider(&x, 2, 1).unwrap();
        let same = apply(&mu, 2, &a.tensor(&a)).unwrap();
        assert!(same.contains(&pt(0.3)).unwrap() && !same.contains(&pt(0.6)).unwrap());
        assert!(apply(&mu, 2, &a.tensor(&b)).unwrap().is_empty().unwrap());
    }

    #[test]
    fn identity_spider_is_neutral() {
        let x = interval_obj();
        let a = interval(&x, 0.2, 0.5);
        let out = apply(&spider(&x, 1, 1).unwrap(), 1, &a).unwrap();
        for v in [0.1, 0.2, 0.35, 0.5, 0.6] {
            assert_eq!(out.contains(&pt(v)).unwrap(), a.contains(&pt(v)).unwrap());
        }
    }

    #[test]
    fn mismatched_links_are_rejected() {
        let x = interval_obj();
        let g = tree_obj();
        let w = Wiring { n_wires: 2, cups: vec![(0, 1)], spiders: vec![], outputs: vec![] };
        let a = interval(&x, 0.0, 1.0);
        let b = Relation::full(vec![g]);
        assert!(matches!(evaluate(&w, &[&a, &b]), Err(RelError::DomainMismatch(_))));
        assert!(matches!(evaluate(&w, &[&a]), Err(RelError::ShapeMismatch(_))));
    }

    #[test]
    fn relative_clause_diagram() {
        let w = which_wiring(1, 3, 1).unwrap();
        w.validate().unwrap();
        assert_eq!(w.to_string(), "wires 5\ncups (3,4)\nspiders {0,1}->1 {2}->0\noutputs s0");
        assert!(which_wiring(1, 2, 1).is_err());
    }

    #[test]
    fn empty_word_gives_empty_result() {
        let x = interval_obj();
        let e = Relation::empty(vec![x.clone()]);
        let a = interval(&x, 0.0, 1.0);
        let r = evaluate(&Wiring { n_wires: 2, cups: vec![], spiders: vec![SpiderGroup { positions: vec![0, 1], out_arity: 1 }], outputs: vec![Output::Spider(0)] }, &[&e, &a]).unwrap();
        assert!(r.cells().is_empty());
    }
}
