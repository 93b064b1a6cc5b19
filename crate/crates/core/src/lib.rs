//! Compositional semantics for pregroup grammars interpreted in convex
//! relations over conceptual spaces.

pub mod check;
pub mod convexalg;
pub mod feasibility;
pub mod lexicon;
pub mod phrase;
pub mod pregroup;
pub mod relsem;
