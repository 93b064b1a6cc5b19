//! Self-checks over a world: compact-closed and Frobenius laws, convexity
//! of word meanings, and known sentence meanings of the built-in worlds.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convexalg::{Domain, Point, Semilattice, Tree};
use crate::feasibility::Optimum;
use crate::lexicon::World;
use crate::phrase::{evaluate_phrase, PhraseError};
use crate::relsem::{
    cap, check_convexity, compose, cup, identity, probe_equal, random_point, spider, ConvexityStatus, ConvexityVerdict,
    ProbeVerdict, Relation, SemanticObject,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    All,
    Snakes,
    Spiders,
    Convexity,
    Golden,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

const PROBES: usize = 500;

/// Run the selected suites. Random choices are drawn from `seed`, so the
/// report is reproducible.
pub fn run(world: &World, suite: Suite, seed: u64) -> Result<Vec<CheckLine>, PhraseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    if suite.includes(Suite::Snakes) {
        for obj in finite_objects(world) {
            let (ok, detail) = snakes_exact(&obj)?;
            out.push(CheckLine { suite: "snakes", name: obj.name.clone(), passed: ok, detail });
        }
    }
    if suite.includes(Suite::Spiders) {
        for obj in finite_objects(world) {
            let (a, b) = fusion_pair(&obj)?;
            let ok = a.enumerate()? == b.enumerate()?;
            out.push(CheckLine {
                suite: "spiders",
                name: format!("fusion on {}", obj.name),
                passed: ok,
                detail: "exact enumeration".into(),
            });
        }
        if let Some(n) = world.object("n") {
            let (a, b) = fusion_pair(n)?;
            let mut probes: Vec<Point> = (0..PROBES).map(|_| random_point(&a.domains(), 10.0, &mut rng)).collect();
            for _ in 0..PROBES / 5 {
                probes.extend(b.sample(&mut rng)?);
            }
            let v = probe_equal(&a, &b, &probes, 1e-7)?;
            out.push(CheckLine {
                suite: "spiders",
                name: "fusion on the noun space".into(),
                passed: v.agrees(),
                detail: describe_probe(&v),
            });
        }
    }
    if suite.includes(Suite::Convexity) {
        for e in world.entries() {
            let Some(r) = e.relation() else { continue };
            let verdict = check_convexity(r, 200, &mut rng)?;
            let (passed, detail) = match (&verdict, r.convexity) {
                (ConvexityVerdict::Counterexample { .. }, ConvexityStatus::Verified) => {
                    (false, "marked verified but a midpoint escapes".to_string())
                }
                (ConvexityVerdict::Counterexample { .. }, s) => (true, format!("{s}; sampling found a non-convex midpoint")),
                (ConvexityVerdict::Verified, s) => (true, format!("{s}; single cell")),
                (ConvexityVerdict::Inconclusive { pairs }, s) => (true, format!("{s}; {pairs} midpoints stayed inside")),
            };
            out.push(CheckLine { suite: "convexity", name: e.surface.clone(), passed, detail });
        }
    }
    if suite.includes(Suite::Golden) {
        out.extend(golden(world, &mut rng)?);
    }
    Ok(out)
}

/// The food taxonomy tree, small boolean grids, and every lattice domain of
/// the world, each as a one-factor object.
fn finite_objects(world: &World) -> Vec<SemanticObject> {
    let tree = Tree::node(
        "food",
        vec![Tree::node("fruit", vec![Tree::leaf("apples"), Tree::leaf("bananas")]), Tree::leaf("beer")],
    );
    let mut ds = vec![
        Domain::lattice("food_tree", Semilattice::from_tree(&tree).expect("valid tree")),
        Domain::lattice("grid1", Semilattice::boolean_grid(1)),
        Domain::lattice("grid2", Semilattice::boolean_grid(2)),
        Domain::lattice("grid3", Semilattice::boolean_grid(3)),
    ];
    ds.extend(world.domains().filter(|d| d.is_lattice()).map(|d| (**d).clone()));
    ds.into_iter().map(|d| SemanticObject::new(&d.name.clone(), vec![Arc::new(d)])).collect()
}

/// Both snake composites on a finite object, compared with the identity.
pub fn snakes_exact(obj: &SemanticObject) -> Result<(bool, String), PhraseError> {
    let id = identity(obj).enumerate()?;
    // (1 ⊗ cup) ∘ (cap ⊗ 1) and (cup ⊗ 1) ∘ (1 ⊗ cap), inputs first.
    let left = compose(
        &cap(obj).tensor(&identity(obj)).permute(&[2, 0, 1, 3])?,
        1,
        &identity(obj).tensor(&cup(obj)).permute(&[0, 2, 3, 1])?,
        3,
    )?;
    let right = compose(
        &identity(obj).tensor(&cap(obj)).permute(&[0, 2, 3, 1])?,
        1,
        &cup(obj).tensor(&identity(obj)).permute(&[0, 1, 2, 3])?,
        3,
    )?;
    let (l, r) = (left.enumerate()?, right.enumerate()?);
    let n = id.as_ref().map_or(0, |s| s.len());
    Ok((l == id && r == id, format!("{n} identity pairs")))
}

/// `μ ∘ (μ ⊗ 1)` and the three-input spider, both with wires `a b c out`.
pub fn fusion_pair(obj: &SemanticObject) -> Result<(Relation, Relation), PhraseError> {
    let mu = spider(obj, 2, 1)?;
    let first = mu.tensor(&identity(obj)).permute(&[0, 1, 3, 2, 4])?;
    let fused = compose(&first, 3, &mu, 2)?;
    Ok((fused, spider(obj, 3, 1)?))
}

fn describe_probe(v: &ProbeVerdict) -> String {
    match v {
        ProbeVerdict::Agrees { probes } => format!("{probes} probes agree"),
        ProbeVerdict::Counterexample { in_first, in_second, .. } => {
            format!("mismatch (in first: {in_first}, in second: {in_second})")
        }
    }
}

fn line(name: &str, passed: bool, detail: String) -> CheckLine {
    CheckLine { suite: "golden", name: name.to_string(), passed, detail }
}

/// Lower and upper bound of one variable over a single-cell relation.
pub fn var_range(r: &Relation, var: usize) -> Result<Option<(f64, f64)>, PhraseError> {
    let live = r.pruned()?;
    let [c] = live.cells() else { return Ok(None) };
    let bound = |sign: f64| -> Result<Option<f64>, PhraseError> {
        Ok(match c.maximize(&[(var, sign)])? {
            Optimum::Optimal { value, .. } => Some(sign * value),
            _ => None,
        })
    };
    Ok(bound(-1.0)?.zip(bound(1.0)?))
}

fn enumeration(world: &World, text: &str) -> Result<Vec<Vec<String>>, PhraseError> {
    let r = evaluate_phrase(world, text, None)?.relation;
    Ok(r.enumerate()?.unwrap_or_default().iter().map(|t| r.tuple_names(t)).collect())
}

fn golden(world: &World, rng: &mut ChaCha8Rng) -> Result<Vec<CheckLine>, PhraseError> {
    let mut out = Vec::new();
    match world.name.as_str() {
        "food" => {
            for (text, want) in [
                ("bananas taste sweet", vec!["(1,0)", "(1,1)"]),
                ("beer tastes sweet", vec!["(0,1)"]),
            ] {
                let got: Vec<String> = enumeration(world, text)?.into_iter().map(|t| t.join(" ")).collect();
                out.push(line(text, got == want, format!("{{{}}}", got.join(", "))));
            }
            let n = world.grammar.parse_type("n")?;
            for (text, prop) in [("fruit which tastes bitter", "green_banana"), ("yellow banana", "yellow_banana")] {
                let got = evaluate_phrase(world, text, Some(&n))?.relation;
                let want = world.property(prop).expect("food world property").clone();
                let mut probes: Vec<Point> = (0..PROBES).map(|_| random_point(&want.domains(), 1.0, rng)).collect();
                for _ in 0..PROBES / 5 {
                    probes.extend(want.sample(rng)?);
                    probes.extend(got.sample(rng)?);
                }
                let v = probe_equal(&got, &want, &probes, 1e-7)?;
                out.push(line(text, v.agrees(), format!("against {prop}: {}", describe_probe(&v))));
            }
            // colour (3) and taste (4) variables come first
            let soft = evaluate_phrase(world, "soft apple", None)?.relation;
            let range = var_range(&soft, 7)?;
            let ok = range.is_some_and(|(lo, hi)| (lo - 0.5).abs() < 1e-7 && (hi - 0.6).abs() < 1e-7);
            out.push(line("soft apple", ok, format!("texture {range:?}")));
        }
        "robot" => {
            let moves = evaluate_phrase(world, "Cathy moves to the living room", None)?.relation;
            let mut ok = !moves.is_empty()?;
            for _ in 0..50 {
                match moves.sample(rng)? {
                    Some(p) => ok &= moves.contains_within(&p, 1e-7)?,
                    None => ok = false,
                }
            }
            out.push(line("Cathy moves to the living room", ok, "nonempty; samples are members".into()));
            let is_in = evaluate_phrase(world, "the ball is in the living room", None)?.relation;
            let point = is_in.pruned()?.cells().iter().all(|c| c.path_parts().iter().all(|p| p.point_path));
            out.push(line("the ball is in the living room", !is_in.is_empty()? && point, "nonempty point path".into()));
            let room = evaluate_phrase(world, "the kitchen moves to the living room", None)?.relation;
            out.push(line("the kitchen moves to the living room", room.is_empty()?, "rooms do not move".into()));
        }
        _ => out.push(line("golden sentences", true, format!("none defined for world `{}`", world.name))),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_on_the_food_world() {
        let lines = run(&World::builtin_food(), Suite::All, 1).unwrap();
        assert!(lines.iter().all(|l| l.passed), "{lines:#?}");
        assert!(lines.iter().any(|l| l.suite == "convexity" && l.name == "taste"));
    }

    #[test]
    fn golden_robot_sentences() {
        let lines = run(&World::builtin_robot(), Suite::Golden, 2).unwrap();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.passed), "{lines:#?}");
    }
}
