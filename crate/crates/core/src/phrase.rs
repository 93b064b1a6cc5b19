//! From text to meaning: tokenize against a world's lexicon, reduce the
//! assigned types, and evaluate the reduction diagram.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::convexalg::{fmt_num, ConvexError, Domain, DomainKind, Point, Trajectory, Value};
use crate::lexicon::{Builtin, Meaning, World};
use crate::pregroup::{reduce, Output, PregroupError, PregroupType, SpiderGroup, Wiring};
use crate::relsem::{evaluate, spider, ConvexityStatus, RelError, Relation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhraseError {
    #[error("unknown word `{0}`")]
    UnknownWord(String),
    #[error("empty phrase")]
    EmptyPhrase,
    #[error("no reduction of `{from}` to {targets}")]
    NoReduction { from: String, targets: String },
    #[error(transparent)]
    Pregroup(#[from] PregroupError),
    #[error(transparent)]
    Relation(#[from] RelError),
    #[error("bad point: {0}")]
    BadPoint(String),
}

impl From<ConvexError> for PhraseError {
    fn from(e: ConvexError) -> Self {
        PhraseError::Relation(e.into())
    }
}

/// Split on whitespace, then match the longest run of words that is a
/// surface form or alias. Matching ignores case.
pub fn tokenize(world: &World, text: &str) -> Result<Vec<String>, PhraseError> {
    let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    if words.is_empty() {
        return Err(PhraseError::EmptyPhrase);
    }
    let longest = world.surfaces().map(|s| s.split(' ').count()).max().unwrap_or(1);
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let hit = (1..=longest.min(words.len() - i))
            .rev()
            .map(|k| words[i..i + k].join(" "))
            .enumerate()
            .find(|(_, cand)| world.lookup(cand).is_some());
        match hit {
            Some((skip, cand)) => {
                i += longest.min(words.len() - i) - skip;
                out.push(cand);
            }
            None => return Err(PhraseError::UnknownWord(words[i].clone())),
        }
    }
    Ok(out)
}

/// The relation of a built-in word.
pub fn builtin_relation(world: &World, b: Builtin) -> Result<Relation, PhraseError> {
    match b {
        // `{(x, x, s, x)}` over n^r n s^l n: the subject merges with the
        // verb's subject and the clause's sentence value is discarded.
        Builtin::Which => {
            let (n, s) = match (world.object("n"), world.object("s")) {
                (Some(n), Some(s)) => (n, s),
                _ => return Err(PhraseError::UnknownWord("which".into())),
            };
            let merged = spider(n, 0, 3)?.tensor(&Relation::full(vec![s.clone()]));
            Ok(merged.permute(&[0, 1, 3, 2])?)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub tokens: Vec<String>,
    pub types: Vec<PregroupType>,
    pub target: PregroupType,
    pub wiring: Wiring,
    pub relation: Relation,
}

/// Tokenize, reduce to `target` (or to `s`, then `n`, when none is given)
/// and evaluate.
pub fn evaluate_phrase(world: &World, text: &str, target: Option<&PregroupType>) -> Result<Evaluation, PhraseError> {
    let tokens = tokenize(world, text)?;
    let entries: Vec<_> = tokens.iter().map(|t| world.lookup(t).expect("tokenized")).collect();
    let types: Vec<PregroupType> = entries.iter().map(|e| e.ptype.clone()).collect();
    let candidates: Vec<PregroupType> = match target {
        Some(t) => vec![t.clone()],
        None => ["s", "n"].iter().filter_map(|a| world.grammar.parse_type(a).ok()).collect(),
    };
    let mut found = None;
    for t in &candidates {
        match reduce(&types, t) {
            Ok(w) => {
                found = Some((t.clone(), w));
                break;
            }
            Err(PregroupError::NoReduction { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    let Some((target, wiring)) = found else {
        return Err(PhraseError::NoReduction {
            from: types.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
            targets: candidates.iter().map(|t| format!("`{t}`")).collect::<Vec<_>>().join(" or "),
        });
    };
    let mut owned = Vec::with_capacity(entries.len());
    for e in &entries {
        owned.push(match &e.meaning {
            Meaning::Relation(r) => r.clone(),
            Meaning::Builtin(b) => builtin_relation(world, *b)?,
        });
    }
    let refs: Vec<&Relation> = owned.iter().collect();
    let relation = evaluate(&wiring, &refs)?;
    Ok(Evaluation { tokens, types, target, wiring, relation })
}

/// Names of the properties over the result's single wire whose members are
/// exactly the result's, for finite results.
pub fn labels(world: &World, rel: &Relation) -> Result<Vec<String>, PhraseError> {
    let Some(mine) = rel.enumerate()? else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for (name, p) in world.properties() {
        if p.wires() == rel.wires() && p.enumerate()?.as_ref() == Some(&mine) {
            out.push(name.clone());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WiringReport {
    pub cups: Vec<(usize, usize)>,
    pub spiders: Vec<SpiderGroup>,
    pub outputs: Vec<Output>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathReport {
    pub factor: String,
    pub t_max: f64,
    pub point_path: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub constraints: Vec<String>,
    pub finite_parts: Vec<Vec<String>>,
    pub path_parts: Vec<PathReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultReport {
    pub wires: Vec<String>,
    pub cells: Vec<CellReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finite_enumeration: Option<Vec<Vec<String>>>,
    pub labels: Vec<String>,
    pub convexity_status: ConvexityStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub tokens: Vec<String>,
    pub types: Vec<String>,
    pub target: String,
    pub wiring: WiringReport,
    pub result: ResultReport,
}

impl EvalReport {
    pub fn new(world: &World, ev: &Evaluation) -> Result<Self, PhraseError> {
        let rel = ev.relation.pruned()?;
        let mut cells = Vec::new();
        for c in rel.cells() {
            let c = c.condensed()?;
            let domains = c.domains().to_vec();
            let finite_parts = c
                .finite_parts()
                .iter()
                .zip(domains.iter().filter(|d| d.is_lattice()))
                .map(|(set, d)| {
                    let l = d.as_lattice().expect("lattice");
                    set.iter().map(|&e| l.name(e).to_string()).collect()
                })
                .collect();
            let path_parts = c
                .path_parts()
                .iter()
                .zip(domains.iter().filter(|d| d.is_path()))
                .map(|(p, d)| PathReport { factor: d.name.clone(), t_max: p.t_max, point_path: p.point_path })
                .collect();
            cells.push(CellReport { constraints: c.rendered_rows(), finite_parts, path_parts });
        }
        let finite_enumeration = rel
            .enumerate()?
            .map(|set: BTreeSet<Vec<usize>>| set.iter().map(|t| rel.tuple_names(t)).collect());
        Ok(EvalReport {
            tokens: ev.tokens.clone(),
            types: ev.types.iter().map(ToString::to_string).collect(),
            target: ev.target.to_string(),
            wiring: WiringReport {
                cups: ev.wiring.cups.clone(),
                spiders: ev.wiring.spiders.clone(),
                outputs: ev.wiring.outputs.clone(),
            },
            result: ResultReport {
                wires: rel.wires().iter().map(|w| w.name.clone()).collect(),
                cells,
                finite_enumeration,
                labels: labels(world, &rel)?,
                convexity_status: ev.relation.convexity,
            },
        })
    }

    /// Plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s += &format!("tokens:  {}\n", self.tokens.join(" | "));
        s += &format!("types:   {}\n", self.types.join(", "));
        s += &format!("target:  {}\n", self.target);
        let cups: Vec<String> = self.wiring.cups.iter().map(|(a, b)| format!("({a},{b})")).collect();
        s += &format!("cups:    {}\n", if cups.is_empty() { "none".into() } else { cups.join(" ") });
        for (k, g) in self.wiring.spiders.iter().enumerate() {
            s += &format!("spider {k}: {:?} -> {} output(s)\n", g.positions, g.out_arity);
        }
        let outs: Vec<String> = self
            .wiring
            .outputs
            .iter()
            .map(|o| match o {
                Output::Wire(i) => format!("wire {i}"),
                Output::Spider(k) => format!("spider {k}"),
            })
            .collect();
        s += &format!("outputs: {}\n", if outs.is_empty() { "none".into() } else { outs.join(", ") });
        let r = &self.result;
        s += &format!("result over [{}], convexity {}\n", r.wires.join(", "), r.convexity_status);
        if r.cells.is_empty() {
            s += "  empty\n";
        }
        if let Some(e) = &r.finite_enumeration {
            let items: Vec<String> = e.iter().map(|t| t.join(" ")).collect();
            s += &format!("  members: {{{}}}\n", items.join(", "));
        } else {
            for (k, c) in r.cells.iter().enumerate() {
                s += &format!("  cell {k}:\n");
                for row in &c.constraints {
                    s += &format!("    {row}\n");
                }
                for p in &c.finite_parts {
                    s += &format!("    elements {{{}}}\n", p.join(", "));
                }
                for p in &c.path_parts {
                    let when = if p.point_path { "t = 0".to_string() } else { format!("t <= {}", fmt_num(p.t_max)) };
                    s += &format!("    path {}: {when}\n", p.factor);
                }
            }
        }
        if !r.labels.is_empty() {
            s += &format!("  labels: {}\n", r.labels.join(", "));
        }
        s
    }
}

/// Parse a point over `domains`. Factors are separated by `|`; a factor is
/// a list of numbers, a simplex label (`sweet` or `t_sweet`), a lattice
/// element, or for paths `t=<start> (x, y) (x, y) ...` with either every
/// waypoint or just the two endpoints.
pub fn parse_point(domains: &[impl AsRef<Domain>], text: &str) -> Result<Point, PhraseError> {
    let parts: Vec<&str> = text.split('|').map(str::trim).collect();
    if parts.len() != domains.len() {
        return Err(PhraseError::BadPoint(format!("expected {} factors, found {}", domains.len(), parts.len())));
    }
    let bad = |m: String| PhraseError::BadPoint(m);
    let numbers = |s: &str| -> Result<Vec<f64>, PhraseError> {
        s.trim_matches(|c| c == '(' || c == ')')
            .split([',', ' '])
            .filter(|x| !x.trim().is_empty())
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{x}`"))))
            .collect()
    };
    let mut values = Vec::new();
    for (d, part) in domains.iter().map(AsRef::as_ref).zip(parts) {
        let v = match &d.kind {
            DomainKind::Lattice(l) => {
                Value::Element(l.index_of(part).ok_or_else(|| bad(format!("`{part}` is not an element of `{}`", d.name)))?)
            }
            DomainKind::VertexHull { labels: Some(labels), .. }
                if part.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) =>
            {
                let name = part.strip_prefix("t_").unwrap_or(part);
                let k = labels.iter().position(|l| l == name).ok_or_else(|| bad(format!("`{part}` is not a label of `{}`", d.name)))?;
                Value::Real((0..labels.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
            }
            DomainKind::Path { loc_coords, waypoints } => {
                let rest = part.strip_prefix("t=").ok_or_else(|| bad(format!("a path starts with `t=`, found `{part}`")))?;
                let (t, pts) = rest.split_once(|c: char| c.is_whitespace() || c == '(').map_or((rest, ""), |(a, _)| {
                    (a, &rest[a.len()..])
                });
                let t: f64 = t.trim().parse().map_err(|_| bad(format!("bad start time `{t}`")))?;
                let pts: Vec<Vec<f64>> = pts
                    .split(')')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| numbers(p.trim().trim_start_matches(',')))
                    .collect::<Result<_, _>>()?;
                if pts.iter().any(|p| p.len() != loc_coords.len()) {
                    return Err(bad(format!("waypoints need {} coordinates", loc_coords.len())));
                }
                let traj = match pts.len() {
                    2 if *waypoints != 2 => Trajectory::linear(t, &pts[0], &pts[1], *waypoints)?,
                    n if n == *waypoints => Trajectory::new(t, pts)?,
                    n => return Err(bad(format!("expected 2 or {waypoints} waypoints, found {n}"))),
                };
                Value::Path(traj)
            }
            _ => {
                let xs = numbers(part)?;
                if xs.len() != d.n_vars() {
                    return Err(bad(format!("`{}` has {} coordinates, found {}", d.name, d.n_vars(), xs.len())));
                }
                Value::Real(xs)
            }
        };
        values.push(v);
    }
    Ok(Point(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relsem::{probe_equal, random_point, which_wiring};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn multiword_tokens() {
        let w = World::builtin_robot();
        assert_eq!(tokenize(&w, "Cathy moves to the living room").unwrap(), ["cathy", "moves to", "the", "living room"]);
        assert_eq!(tokenize(&w, "Cathy flies"), Err(PhraseError::UnknownWord("flies".into())));
        assert_eq!(tokenize(&w, "  "), Err(PhraseError::EmptyPhrase));
    }

    #[test]
    fn auto_target_falls_back_to_nouns() {
        let w = World::builtin_food();
        assert_eq!(evaluate_phrase(&w, "yellow banana", None).unwrap().target.to_string(), "n");
        assert_eq!(evaluate_phrase(&w, "bananas taste sweet", None).unwrap().target.to_string(), "s");
        assert!(matches!(evaluate_phrase(&w, "taste taste", None), Err(PhraseError::NoReduction { .. })));
    }

    #[test]
    fn labels_name_matching_properties() {
        let w = World::builtin_food();
        let ev = evaluate_phrase(&w, "bananas taste sweet", None).unwrap();
        assert_eq!(labels(&w, &ev.relation).unwrap(), ["positive"]);
        let ev = evaluate_phrase(&w, "beer tastes sweet", None).unwrap();
        assert_eq!(labels(&w, &ev.relation).unwrap(), ["negative_and_surprising"]);
    }

    #[test]
    fn which_as_relation_agrees_with_the_merge_diagram() {
        let w = World::builtin_food();
        let n = w.grammar.parse_type("n").unwrap();
        let uniform = evaluate_phrase(&w, "fruit which tastes bitter", Some(&n)).unwrap().relation;
        let rel = |s: &str| w.lookup(s).unwrap().relation().unwrap().clone();
        let merged = evaluate(&which_wiring(1, 3, 1).unwrap(), &[&rel("fruit"), &rel("tastes"), &rel("bitter")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut probes: Vec<Point> = (0..300).map(|_| random_point(&uniform.domains(), 1.0, &mut rng)).collect();
        for _ in 0..100 {
            probes.extend(merged.sample(&mut rng).unwrap());
        }
        assert!(probe_equal(&uniform, &merged, &probes, 1e-7).unwrap().agrees());
    }

    #[test]
    fn points_parse_per_factor() {
        let w = World::builtin_food();
        let n = w.object("n").unwrap();
        let p = parse_point(&n.factors, "0.8, 0.75, 0.05 | t_sweet | 0.3 | 0.1").unwrap();
        assert_eq!(p.0[1], Value::Real(vec![1.0, 0.0, 0.0, 0.0]));
        assert!(parse_point(&n.factors, "0.8, 0.75 | sweet | 0.3 | 0.1").is_err());
        assert!(parse_point(&n.factors, "0.8, 0.75, 0.05 | sweet | 0.3").is_err());
        let r = World::builtin_robot();
        let s = r.object("s").unwrap();
        let p = parse_point(&s.factors, "1, 2 | 2.2 | t=-3 (1, 2) (7, 5)").unwrap();
        let Value::Path(t) = &p.0[2] else { panic!() };
        assert_eq!(t.start(), &[1.0, 2.0]);
        assert_eq!(t.end(), &[7.0, 5.0]);
    }
}
