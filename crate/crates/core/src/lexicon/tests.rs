use super::*;
use crate::convexalg::{Point, Value};
use crate::feasibility::Optimum;
use crate::pregroup::SimpleType;

fn factor_range(rel: &Relation, var: usize) -> (f64, f64) {
    assert_eq!(rel.cells().len(), 1);
    let c = &rel.cells()[0];
    let hi = match c.maximize(&[(var, 1.0)]).unwrap() {
        Optimum::Optimal { value, .. } => value,
        o => panic!("{o:?}"),
    };
    let lo = match c.maximize(&[(var, -1.0)]).unwrap() {
        Optimum::Optimal { value, .. } => -value,
        o => panic!("{o:?}"),
    };
    (lo, hi)
}

#[test]
fn food_world_shape() {
    let w = World::builtin_food();
    assert_eq!(w.name, "food");
    assert_eq!(w.entries().len(), 11);
    assert_eq!(w.object("n").unwrap().factors.len(), 4);
    let s = &w.object("s").unwrap().factors;
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].as_lattice().unwrap().len(), 4);
}

#[test]
fn banana_lookup() {
    let w = World::builtin_food();
    let e = w.lookup("Bananas").unwrap();
    assert_eq!(e.surface, "banana");
    assert_eq!(e.ptype.simples(), &[SimpleType::new("n", 0)]);
    // colour 3 + taste 4 variables precede texture.
    let (lo, hi) = factor_range(e.relation().unwrap(), 7);
    assert!((lo - 0.2).abs() < 1e-9 && (hi - 0.5).abs() < 1e-9, "{lo} {hi}");
}

#[test]
fn which_is_builtin() {
    let w = World::builtin_food();
    assert!(matches!(w.lookup("which").unwrap().meaning, Meaning::Builtin(Builtin::Which)));
}

#[test]
fn sweet_dominates() {
    let w = World::builtin_food();
    let sweet = w.lookup("sweet").unwrap().relation().unwrap();
    let point = |t: [f64; 4]| {
        Point(vec![
            Value::Real(vec![0.5, 0.5, 0.5]),
            Value::Real(t.to_vec()),
            Value::Real(vec![0.5]),
            Value::Real(vec![0.5]),
        ])
    };
    assert!(sweet.contains(&point([0.4, 0.2, 0.3, 0.1])).unwrap());
    assert!(!sweet.contains(&point([0.3, 0.2, 0.4, 0.1])).unwrap());
}

#[test]
fn taste_is_assumed_convex() {
    let w = World::builtin_food();
    let t = w.lookup("tastes").unwrap().relation().unwrap();
    assert_eq!(t.convexity, ConvexityStatus::Assumed);
    assert_eq!(t.wires().len(), 3);
}

#[test]
fn noun_cells_are_pairwise_disjoint() {
    let w = World::builtin_food();
    let rel = |s: &str| w.lookup(s).unwrap().relation().unwrap().cells()[0].clone();
    for (a, b) in [("banana", "beer"), ("banana", "apple"), ("apple", "beer")] {
        assert!(rel(a).intersect(&rel(b)).unwrap().is_empty().unwrap(), "{a} and {b} overlap");
    }
}

#[test]
fn robot_world_loads() {
    let w = World::builtin_robot();
    for noun in ["armchair", "ball", "cathy", "david", "dave", "kitchen", "living room"] {
        assert!(w.lookup(noun).is_some(), "{noun}");
    }
    let is_in = w.lookup("is in").unwrap().relation().unwrap();
    // four agents times two rooms
    assert_eq!(is_in.cells().len(), 8);
    assert!(is_in.cells().iter().all(|c| c.path_parts()[0].point_path));
    let moves = w.lookup("moves to").unwrap().relation().unwrap();
    assert_eq!(moves.cells().len(), 4);
    assert!(moves.cells().iter().all(|c| !c.path_parts()[0].point_path));
}

#[test]
fn kitchen_location() {
    let w = World::builtin_robot();
    let k = w.property("kitchen_location").unwrap();
    assert_eq!(factor_range(k, 0), (0.0, 5.0));
    assert_eq!(factor_range(k, 1), (0.0, 10.0));
}

#[test]
fn empty_document_is_a_parse_error() {
    assert!(matches!(World::load(""), Err(LexError::Parse { .. })));
}

const MINI: &str = "\
[types]
n = colour
s = truth

[domains]
colour = box R:[0,1] G:[0,1]
truth = lattice grid 1

[properties]
red : colour = where R >= 0.5
";

#[test]
fn adjective_shape_is_checked() {
    let err = World::load(&format!("{MINI}\n[words]\nsoft : n n^l = red\n")).unwrap_err();
    assert!(matches!(err, LexError::Shape { line: 13, .. }), "{err}");
    assert!(World::load(&format!("{MINI}\n[words]\nsoft : n n^l = diag(red)\n")).is_ok());
}

#[test]
fn dangling_names_are_reported() {
    let err = World::load(&format!("{MINI}\n[words]\nblue : n = bluish\n")).unwrap_err();
    assert_eq!(err, LexError::DanglingName { line: 13, name: "bluish".into() });
    let err = World::load(&format!("{MINI}\n[words]\nblue : n = where Q <= 1\n")).unwrap_err();
    assert!(matches!(err, LexError::DanglingName { .. }));
}

#[test]
fn join_tables_are_validated() {
    let bad = "[types]\nn = l\n\n[domains]\nl = lattice {a, b, c} join a|b=c, a|c=c, b|c=a\n";
    assert!(matches!(World::load(bad), Err(LexError::Lattice { line: 5, .. })));
    let partial = "[types]\nn = l\n\n[domains]\nl = lattice {a, b, c} join a|b=c, a|c=c\n";
    assert!(matches!(World::load(partial), Err(LexError::Lattice { .. })));
    let good = "[types]\nn = l\n\n[domains]\nl = lattice {a, b, c} join a|b=c, a|c=c, b|c=c\n";
    assert!(World::load(good).is_ok());
}

#[test]
fn parse_errors_carry_columns() {
    let err = World::load("[types]\nn = c\n\n[domains]\nc = box x:[0,1]\n\n[words]\nthing : n = where x <= ?\n")
        .unwrap_err();
    assert!(matches!(err, LexError::Parse { line: 8, col: 24, .. }), "{err:?}");
}

#[test]
fn serialized_documents_reparse_identically() {
    for w in [World::builtin_food(), World::builtin_robot()] {
        let text = w.serialize();
        let again = World::load(&text).unwrap();
        let (a, b) = (again.document(), w.document());
        assert_eq!(a.domains.iter().map(|d| &d.spec).collect::<Vec<_>>(), b.domains.iter().map(|d| &d.spec).collect::<Vec<_>>());
        assert_eq!(a.properties.iter().map(|p| &p.expr).collect::<Vec<_>>(), b.properties.iter().map(|p| &p.expr).collect::<Vec<_>>());
        assert_eq!(a.words.iter().map(|w| &w.body).collect::<Vec<_>>(), b.words.iter().map(|w| &w.body).collect::<Vec<_>>());
        assert_eq!(again.serialize(), text);
    }
}

#[test]
fn eval_expr_matches_word_definitions() {
    let w = World::builtin_food();
    let n = w.grammar.parse_type("n").unwrap();
    let r = w.eval_expr("banana & yellow", &n).unwrap();
    assert_eq!(r.cells().len(), 1);
    assert!(!r.is_empty().unwrap());
    assert!(w.eval_expr("banana & beer", &n).unwrap().is_empty().unwrap());
}
