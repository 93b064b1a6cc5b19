//! Worlds: conceptual spaces, named properties and a typed lexicon, loaded
//! from a small line-oriented document format (see `docs/world-format.md`).

mod build;
pub mod syntax;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::convexalg::Domain;
use crate::pregroup::{Grammar, PregroupType, SimpleType};
use crate::relsem::{ConvexityStatus, Relation, SemanticObject};
use build::{domain_object, lift, Fault, Scope};
use syntax::{parse_document, Document, WordBody};

pub use syntax::SyntaxError;

const FOOD: &str = include_str!("../../worlds/food.world");
const ROBOT: &str = include_str!("../../worlds/robot.world");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexError {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("line {line}: {msg}")]
    Shape { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Lattice { line: usize, msg: String },
    #[error("line {line}: unknown name `{name}`")]
    DanglingName { line: usize, name: String },
    #[error("line {line}: `{name}` is defined twice")]
    Duplicate { line: usize, name: String },
}

impl LexError {
    pub fn line(&self) -> usize {
        match self {
            LexError::Parse { line, .. }
            | LexError::Shape { line, .. }
            | LexError::Lattice { line, .. }
            | LexError::DanglingName { line, .. }
            | LexError::Duplicate { line, .. } => *line,
        }
    }

    fn at(line: usize, f: Fault) -> Self {
        match f {
            Fault::Shape(msg) => LexError::Shape { line, msg },
            Fault::Lattice(msg) => LexError::Lattice { line, msg },
            Fault::Dangling(name) => LexError::DanglingName { line, name },
        }
    }
}

impl From<SyntaxError> for LexError {
    fn from(e: SyntaxError) -> Self {
        LexError::Parse { line: e.line, col: e.col, msg: e.msg }
    }
}

/// Word meanings that are structural rather than given by a relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// The relative pronoun in `subject which verb object`.
    Which,
}

#[derive(Clone, Debug)]
pub enum Meaning {
    Relation(Relation),
    Builtin(Builtin),
}

#[derive(Clone, Debug)]
pub struct LexiconEntry {
    pub surface: String,
    pub aliases: Vec<String>,
    pub ptype: PregroupType,
    pub meaning: Meaning,
}

impl LexiconEntry {
    pub fn relation(&self) -> Option<&Relation> {
        match &self.meaning {
            Meaning::Relation(r) => Some(r),
            Meaning::Builtin(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct World {
    pub name: String,
    pub grammar: Grammar,
    domains: BTreeMap<String, Arc<Domain>>,
    objects: BTreeMap<String, SemanticObject>,
    properties: BTreeMap<String, Relation>,
    entries: Vec<LexiconEntry>,
    index: BTreeMap<String, usize>,
    doc: Document,
}

impl World {
    pub fn load(text: &str) -> Result<World, LexError> {
        Self::from_document(parse_document(text)?)
    }

    pub fn builtin_food() -> World {
        Self::load(FOOD).expect("the shipped food world loads")
    }

    pub fn builtin_robot() -> World {
        Self::load(ROBOT).expect("the shipped robot world loads")
    }

    /// The shipped document text of a built-in world.
    pub fn builtin_source(name: &str) -> Option<&'static str> {
        match name {
            "food" => Some(FOOD),
            "robot" => Some(ROBOT),
            _ => None,
        }
    }

    pub fn from_document(doc: Document) -> Result<World, LexError> {
        let mut domains: BTreeMap<String, Arc<Domain>> = BTreeMap::new();
        for d in &doc.domains {
            if domains.contains_key(&d.name) {
                return Err(LexError::Duplicate { line: d.line, name: d.name.clone() });
            }
            let built = build::build_domain(&d.name, &d.spec, &domains).map_err(|f| LexError::at(d.line, f))?;
            domains.insert(d.name.clone(), Arc::new(built));
        }

        let atoms = doc.atoms.clone().unwrap_or_else(|| doc.objects.iter().map(|o| o.atom.clone()).collect());
        let grammar = Grammar::new(atoms.clone());
        let mut objects = BTreeMap::new();
        for o in &doc.objects {
            if !grammar.contains(&o.atom) {
                return Err(LexError::DanglingName { line: o.line, name: o.atom.clone() });
            }
            if objects.contains_key(&o.atom) {
                return Err(LexError::Duplicate { line: o.line, name: o.atom.clone() });
            }
            let factors = o
                .factors
                .iter()
                .map(|f| domains.get(f).cloned().ok_or_else(|| LexError::DanglingName { line: o.line, name: f.clone() }))
                .collect::<Result<Vec<_>, _>>()?;
            objects.insert(o.atom.clone(), SemanticObject::new(&o.atom, factors));
        }
        if let Some(a) = atoms.iter().find(|a| !objects.contains_key(*a)) {
            return Err(LexError::DanglingName { line: 1, name: format!("{a} (no object for this atomic type)") });
        }

        let mut properties = BTreeMap::new();
        for p in &doc.properties {
            if properties.contains_key(&p.name) {
                return Err(LexError::Duplicate { line: p.line, name: p.name.clone() });
            }
            let scope = Scope { domains: &domains, objects: &objects, properties: &properties };
            let target = match (objects.get(&p.target), domains.get(&p.target)) {
                (Some(o), _) => o.clone(),
                (None, Some(d)) => domain_object(d),
                (None, None) => return Err(LexError::DanglingName { line: p.line, name: p.target.clone() }),
            };
            let wires = [target];
            let rel = scope
                .eval(&p.expr, Some(&wires))
                .and_then(|r| lift(r, &wires))
                .map_err(|f| LexError::at(p.line, f))?;
            properties.insert(p.name.clone(), status_by_cells(rel, false));
        }

        let mut entries = Vec::new();
        let mut index = BTreeMap::new();
        for w in &doc.words {
            let ptype = grammar.parse_type(&w.ptype).map_err(|e| LexError::Parse {
                line: w.line,
                col: 1,
                msg: format!("bad pregroup type `{}`: {e}", w.ptype),
            })?;
            let meaning = match &w.body {
                WordBody::Builtin(b) => match b.as_str() {
                    "which" => {
                        let want = grammar.parse_type("n^r n s^l n").map_err(|e| LexError::Shape {
                            line: w.line,
                            msg: format!("builtin(which) needs atomic types n and s: {e}"),
                        })?;
                        if ptype != want {
                            return Err(LexError::Shape { line: w.line, msg: format!("builtin(which) has type `{want}`") });
                        }
                        Meaning::Builtin(Builtin::Which)
                    }
                    other => return Err(LexError::DanglingName { line: w.line, name: format!("builtin({other})") }),
                },
                WordBody::Expr(e) => {
                    let wires: Vec<SemanticObject> = ptype.simples().iter().map(|s| objects[&s.base].clone()).collect();
                    let scope = Scope { domains: &domains, objects: &objects, properties: &properties };
                    let rel = scope
                        .eval(e, Some(&wires))
                        .and_then(|r| lift(r, &wires))
                        .map_err(|f| LexError::at(w.line, f))?;
                    Meaning::Relation(status_by_cells(rel, w.assumed))
                }
            };
            let k = entries.len();
            for s in std::iter::once(&w.surface).chain(&w.aliases) {
                if index.insert(s.clone(), k).is_some() {
                    return Err(LexError::Duplicate { line: w.line, name: s.clone() });
                }
            }
            entries.push(LexiconEntry { surface: w.surface.clone(), aliases: w.aliases.clone(), ptype, meaning });
        }

        Ok(World {
            name: doc.name.clone().unwrap_or_else(|| "world".into()),
            grammar,
            domains,
            objects,
            properties,
            entries,
            index,
            doc,
        })
    }

    /// Canonical document text; loading it gives an equivalent world.
    pub fn serialize(&self) -> String {
        self.doc.to_string()
    }

    pub fn document(&self) -> &Document {
        &self.doc
    }

    /// Case-insensitive lookup by surface form or alias.
    pub fn lookup(&self, word: &str) -> Option<&LexiconEntry> {
        self.index.get(&syntax::normalise_surface(word)).map(|&k| &self.entries[k])
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Every surface form and alias, lowercase.
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn property(&self, name: &str) -> Option<&Relation> {
        self.properties.get(name)
    }

    pub fn properties(&self) -> &BTreeMap<String, Relation> {
        &self.properties
    }

    pub fn domain(&self, name: &str) -> Option<&Arc<Domain>> {
        self.domains.get(name)
    }

    pub fn domains(&self) -> impl Iterator<Item = &Arc<Domain>> {
        self.doc.domains.iter().map(|d| &self.domains[&d.name])
    }

    /// The semantic object of an atomic type.
    pub fn object(&self, atom: &str) -> Option<&SemanticObject> {
        self.objects.get(atom)
    }

    /// The wires of a pregroup type: one object per simple type.
    pub fn wires_of(&self, t: &PregroupType) -> Option<Vec<SemanticObject>> {
        t.simples().iter().map(|s: &SimpleType| self.objects.get(&s.base).cloned()).collect()
    }

    /// Evaluate an expression of the document language against a pregroup
    /// type, as a word definition would be.
    pub fn eval_expr(&self, expr: &str, ptype: &PregroupType) -> Result<Relation, LexError> {
        let wires = self.wires_of(ptype).ok_or_else(|| LexError::Shape { line: 1, msg: format!("no object for `{ptype}`") })?;
        let doc = parse_document(&format!("[words]\n__expr : {ptype} = {expr}\n"))?;
        let WordBody::Expr(e) = &doc.words[0].body else {
            return Err(LexError::Shape { line: 1, msg: "builtins are not expressions".into() });
        };
        let scope = Scope { domains: &self.domains, objects: &self.objects, properties: &self.properties };
        let rel = scope.eval(e, Some(&wires)).and_then(|r| lift(r, &wires)).map_err(|f| LexError::at(1, f))?;
        Ok(status_by_cells(rel, false))
    }
}

fn status_by_cells(rel: Relation, assumed: bool) -> Relation {
    let mut rel = rel;
    rel.convexity = if rel.cells().len() <= 1 {
        ConvexityStatus::Verified
    } else if assumed {
        ConvexityStatus::Assumed
    } else {
        ConvexityStatus::Unknown
    };
    rel
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "world {}", self.name)?;
        for d in self.domains() {
            writeln!(f, "  domain {}: {}", d.name, d.var_names().join(", "))?;
        }
        for (a, o) in &self.objects {
            let names: Vec<&str> = o.factors.iter().map(|d| d.name.as_str()).collect();
            writeln!(f, "  type {a} = {}", names.join(" * "))?;
        }
        for e in &self.entries {
            let kind = match &e.meaning {
                Meaning::Relation(r) => format!("{} cell(s), {}", r.cells().len(), r.convexity),
                Meaning::Builtin(b) => format!("builtin {b:?}").to_lowercase(),
            };
            writeln!(f, "  word {} : {} ({kind})", e.surface, e.ptype)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
