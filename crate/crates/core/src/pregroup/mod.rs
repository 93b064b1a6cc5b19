//! Free pregroup grammars: simple types with iterated adjoints, type
//! parsing, and cup-only reduction to a target type.

mod wiring;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use wiring::{Output, SpiderGroup, Wiring, WiringError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PregroupError {
    #[error("unknown atomic type `{0}`")]
    UnknownAtom(String),
    #[error("malformed adjoint suffix in `{0}`")]
    MalformedSuffix(String),
    #[error("no cup-only reduction of `{from}` to `{target}`")]
    NoReduction { from: String, target: String },
    #[error("reduction needs at least one type")]
    EmptyInput,
}

/// An atomic type together with its adjoint order: 0 is plain, +k is the
/// k-fold right adjoint, -k the k-fold left adjoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SimpleType {
    pub base: String,
    pub adjoint: i32,
}

impl SimpleType {
    pub fn new(base: impl Into<String>, adjoint: i32) -> Self {
        Self { base: base.into(), adjoint }
    }
}

impl fmt::Display for SimpleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        match self.adjoint {
            0 => Ok(()),
            z if z > 0 => write!(f, "^{}", "r".repeat(z as usize)),
            z => write!(f, "^{}", "l".repeat(z.unsigned_abs() as usize)),
        }
    }
}

/// A pregroup element of the free pregroup: a word over simple types. The
/// empty word is the unit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct PregroupType(pub Vec<SimpleType>);

impl PregroupType {
    pub fn unit() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn simples(&self) -> &[SimpleType] {
        &self.0
    }

    /// Monoid product.
    pub fn concat(&self, other: &PregroupType) -> PregroupType {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        PregroupType(v)
    }
}

impl fmt::Display for PregroupType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `(xy)^l = y^l x^l` and `(xy)^r = y^r x^r`.
pub fn adjoint(t: &PregroupType, side: Side) -> PregroupType {
    let shift = match side {
        Side::Left => -1,
        Side::Right => 1,
    };
    PregroupType(
        t.0.iter()
            .rev()
            .map(|s| SimpleType::new(s.base.clone(), s.adjoint + shift))
            .collect(),
    )
}

/// Whether `a` immediately followed by `b` contracts to the unit, i.e. the
/// pair is an instance of `x x^r <= 1` (or its iterates, such as `x^l x <= 1`).
pub fn contractible(a: &SimpleType, b: &SimpleType) -> bool {
    a.base == b.base && b.adjoint == a.adjoint + 1
}

/// The set of atomic types a grammar is generated from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    atoms: BTreeSet<String>,
}

impl Default for Grammar {
    fn default() -> Self {
        Self::new(["n", "s"])
    }
}

impl Grammar {
    pub fn new<I, S>(atoms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { atoms: atoms.into_iter().map(Into::into).collect() }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &str> {
        self.atoms.iter().map(String::as_str)
    }

    pub fn contains(&self, atom: &str) -> bool {
        self.atoms.contains(atom)
    }

    /// Parse whitespace separated simple types such as `n^r s n^l`. Suffixes
    /// are strings of `l` and `r`, each shifting the adjoint order by one.
    pub fn parse_type(&self, text: &str) -> Result<PregroupType, PregroupError> {
        text.split_whitespace()
            .map(|tok| self.parse_simple(tok))
            .collect::<Result<Vec<_>, _>>()
            .map(PregroupType)
    }

    fn parse_simple(&self, tok: &str) -> Result<SimpleType, PregroupError> {
        let (base, suffix) = match tok.split_once('^') {
            Some((b, s)) => (b, Some(s)),
            None => (tok, None),
        };
        if base.is_empty() {
            return Err(PregroupError::MalformedSuffix(tok.to_string()));
        }
        let mut adjoint = 0;
        if let Some(s) = suffix {
            if s.is_empty() {
                return Err(PregroupError::MalformedSuffix(tok.to_string()));
            }
            for c in s.chars() {
                adjoint += match c {
                    'l' => -1,
                    'r' => 1,
                    _ => return Err(PregroupError::MalformedSuffix(tok.to_string())),
                };
            }
        }
        if !self.contains(base) {
            return Err(PregroupError::UnknownAtom(base.to_string()));
        }
        Ok(SimpleType::new(base, adjoint))
    }

    /// Parse a comma separated list of types, one per word.
    pub fn parse_sequence(&self, text: &str) -> Result<Vec<PregroupType>, PregroupError> {
        text.split(',').map(|part| self.parse_type(part)).collect()
    }
}

/// Find a planar cup matching of the concatenated simple types whose
/// uncontracted residue is exactly `target`.
///
/// Among all valid matchings the canonical one is returned: output wires are
/// placed as far left as possible, and within each fully contracting gap the
/// leftmost open wire is matched to the nearest partner (innermost bracket),
/// which is what a stack-based bracket matcher produces.
pub fn reduce(types: &[PregroupType], target: &PregroupType) -> Result<Wiring, PregroupError> {
    if types.is_empty() {
        return Err(PregroupError::EmptyInput);
    }
    let seq: Vec<&SimpleType> = types.iter().flat_map(|t| t.0.iter()).collect();
    let tgt: Vec<&SimpleType> = target.0.iter().collect();
    let n = seq.len();

    // empty[i][j]: seq[i..j] contracts completely.
    let mut empty = vec![vec![false; n + 1]; n + 1];
    for (i, row) in empty.iter_mut().enumerate() {
        row[i] = true;
    }
    for len in (2..=n).step_by(2) {
        for i in 0..=n - len {
            let j = i + len;
            empty[i][j] = (i + 1..j)
                .step_by(2)
                .any(|k| contractible(seq[i], seq[k]) && empty[i + 1][k] && empty[k + 1][j]);
        }
    }

    // reach[p][t]: seq[p..] reduces to tgt[t..].
    let m = tgt.len();
    let mut reach = vec![vec![false; m + 1]; n + 1];
    reach[n][m] = true;
    for p in (0..n).rev() {
        reach[p][m] = empty[p][n];
        for t in (0..m).rev() {
            reach[p][t] = (p..n).any(|q| empty[p][q] && seq[q] == tgt[t] && reach[q + 1][t + 1]);
        }
    }
    if !reach[0][0] {
        return Err(PregroupError::NoReduction {
            from: types.iter().map(ToString::to_string).collect::<Vec<_>>().join(" · "),
            target: target.to_string(),
        });
    }

    let mut cups = Vec::new();
    let mut outputs = Vec::new();
    let mut p = 0;
    for t in 0..m {
        let q = (p..n)
            .find(|&q| empty[p][q] && seq[q] == tgt[t] && reach[q + 1][t + 1])
            .expect("reachability table guarantees an output position");
        match_gap(&seq, &empty, p, q, &mut cups);
        outputs.push(Output::Wire(q));
        p = q + 1;
    }
    match_gap(&seq, &empty, p, n, &mut cups);
    cups.sort_unstable();

    Ok(Wiring {
        n_wires: n,
        cups,
        spiders: Vec::new(),
        outputs,
    })
}

fn match_gap(
    seq: &[&SimpleType],
    empty: &[Vec<bool>],
    i: usize,
    j: usize,
    cups: &mut Vec<(usize, usize)>,
) {
    if i >= j {
        return;
    }
    let k = (i + 1..j)
        .step_by(2)
        .find(|&k| contractible(seq[i], seq[k]) && empty[i + 1][k] && empty[k + 1][j])
        .expect("gap is known to contract");
    cups.push((i, k));
    match_gap(seq, empty, i + 1, k, cups);
    match_gap(seq, empty, k + 1, j, cups);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Grammar {
        Grammar::default()
    }

    fn ty(s: &str) -> PregroupType {
        g().parse_type(s).unwrap()
    }

    #[test]
    fn parses_transitive_verb_type() {
        let t = ty("n^r s n^l");
        assert_eq!(
            t.0,
            vec![SimpleType::new("n", 1), SimpleType::new("s", 0), SimpleType::new("n", -1)]
        );
        assert_eq!(t.to_string(), "n^r s n^l");
    }

    #[test]
    fn parses_unit_and_iterated_adjoints() {
        assert!(ty("").is_empty());
        assert_eq!(ty("n^ll").0, vec![SimpleType::new("n", -2)]);
        assert_eq!(ty("n^lr").0, vec![SimpleType::new("n", 0)]);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(g().parse_type("n q"), Err(PregroupError::UnknownAtom("q".into())));
        assert!(matches!(g().parse_type("n^"), Err(PregroupError::MalformedSuffix(_))));
        assert!(matches!(g().parse_type("n^x"), Err(PregroupError::MalformedSuffix(_))));
        assert!(matches!(g().parse_type("^l"), Err(PregroupError::MalformedSuffix(_))));
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(adjoint(&ty("n^r s"), Side::Left), ty("s^l n"));
        assert_eq!(adjoint(&PregroupType::unit(), Side::Right), PregroupType::unit());
        let t = ty("n^r s n^l");
        assert_eq!(adjoint(&adjoint(&t, Side::Left), Side::Right), t);
    }

    #[test]
    fn contraction_rules() {
        let n0 = SimpleType::new("n", 0);
        assert!(contractible(&n0, &SimpleType::new("n", 1)));
        assert!(contractible(&SimpleType::new("n", -1), &n0));
        assert!(!contractible(&n0, &SimpleType::new("s", 1)));
        assert!(!contractible(&SimpleType::new("n", 1), &n0));
    }

    #[test]
    fn transitive_sentence_reduces_to_s() {
        let w = reduce(&[ty("n"), ty("n^r s n^l"), ty("n")], &ty("s")).unwrap();
        assert_eq!(w.cups, vec![(0, 1), (3, 4)]);
        assert_eq!(w.outputs, vec![Output::Wire(2)]);
        w.validate().unwrap();
    }

    #[test]
    fn identity_and_adjective_reductions() {
        let w = reduce(&[ty("n")], &ty("n")).unwrap();
        assert!(w.cups.is_empty());
        assert_eq!(w.outputs, vec![Output::Wire(0)]);

        let w = reduce(&[ty("n n^l"), ty("n")], &ty("n")).unwrap();
        assert_eq!(w.cups, vec![(1, 2)]);
        assert_eq!(w.outputs, vec![Output::Wire(0)]);
    }

    #[test]
    fn no_reduction_is_reported() {
        assert!(matches!(
            reduce(&[ty("n")], &ty("s")),
            Err(PregroupError::NoReduction { .. })
        ));
        assert_eq!(reduce(&[], &ty("s")), Err(PregroupError::EmptyInput));
    }

    #[test]
    fn target_decides_between_matchings() {
        // n^l n n^r: either the left or the right pair contracts.
        let seq = [ty("n^l n n^r")];
        let w = reduce(&seq, &ty("n^r")).unwrap();
        assert_eq!((w.cups.clone(), w.outputs.clone()), (vec![(0, 1)], vec![Output::Wire(2)]));
        let w = reduce(&seq, &ty("n^l")).unwrap();
        assert_eq!((w.cups.clone(), w.outputs.clone()), (vec![(1, 2)], vec![Output::Wire(0)]));
    }

    #[test]
    fn nested_brackets_match_innermost() {
        // Adjacent pairs close immediately.
        let w = reduce(&[ty("n n^r n n^r")], &PregroupType::unit()).unwrap();
        assert_eq!(w.cups, vec![(0, 1), (2, 3)]);
        // n n (n^r) n^r nests.
        let w = reduce(&[ty("n n n^r n^r")], &PregroupType::unit()).unwrap();
        assert_eq!(w.cups, vec![(0, 3), (1, 2)]);
    }

    #[test]
    fn preposition_composes_into_transitive_verb() {
        // (n^r s)(s^r s n^l) <= n^r s n^l
        let w = reduce(&[ty("n^r s"), ty("s^r s n^l")], &ty("n^r s n^l")).unwrap();
        assert_eq!(w.cups, vec![(1, 2)]);
        assert_eq!(w.outputs, vec![Output::Wire(0), Output::Wire(3), Output::Wire(4)]);
    }
}
