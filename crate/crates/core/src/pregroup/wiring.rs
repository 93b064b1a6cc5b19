use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// A group of wire positions joined by one multi-wire. With `out_arity` 1
/// the shared value also leaves the diagram as an output; with 0 it is
/// deleted (a cup is the two-position case).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpiderGroup {
    pub positions: Vec<usize>,
    pub out_arity: u8,
}

/// One open wire of the reduced diagram, in output order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// An input position passed straight through.
    Wire(usize),
    /// The output leg of the spider at this index.
    Spider(usize),
}

/// The combinatorial reduction diagram that evaluation interprets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Wiring {
    pub n_wires: usize,
    pub cups: Vec<(usize, usize)>,
    pub spiders: Vec<SpiderGroup>,
    pub outputs: Vec<Output>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WiringError {
    #[error("position {0} is out of range")]
    OutOfRange(usize),
    #[error("position {0} is attached more than once")]
    Reused(usize),
    #[error("position {0} is not attached to anything")]
    Dangling(usize),
    #[error("cup ({0},{1}) is not ordered")]
    Unordered(usize, usize),
    #[error("cups ({0},{1}) and ({2},{3}) cross")]
    Crossing(usize, usize, usize, usize),
    #[error("spider {0} is malformed")]
    BadSpider(usize),
}

impl Wiring {
    /// The identity diagram on `n` wires.
    pub fn identity(n: usize) -> Self {
        Self {
            n_wires: n,
            cups: Vec::new(),
            spiders: Vec::new(),
            outputs: (0..n).map(Output::Wire).collect(),
        }
    }

    pub fn is_planar(&self) -> bool {
        self.first_crossing().is_none()
    }

    fn first_crossing(&self) -> Option<((usize, usize), (usize, usize))> {
        for (a, &(i, j)) in self.cups.iter().enumerate() {
            for &(k, l) in &self.cups[a + 1..] {
                if (i < k && k < j && j < l) || (k < i && i < l && l < j) {
                    return Some(((i, j), (k, l)));
                }
            }
        }
        None
    }

    /// Checks the structural invariants: every position is used exactly once
    /// and cups neither cross nor run backwards.
    pub fn validate(&self) -> Result<(), WiringError> {
        let mut seen = BTreeSet::new();
        let mut mark = |p: usize| -> Result<(), WiringError> {
            if p >= self.n_wires {
                return Err(WiringError::OutOfRange(p));
            }
            if !seen.insert(p) {
                return Err(WiringError::Reused(p));
            }
            Ok(())
        };
        for &(i, j) in &self.cups {
            if i >= j {
                return Err(WiringError::Unordered(i, j));
            }
            mark(i)?;
            mark(j)?;
        }
        let mut spider_outputs = vec![0usize; self.spiders.len()];
        for (k, s) in self.spiders.iter().enumerate() {
            if s.positions.is_empty() || s.out_arity > 1 {
                return Err(WiringError::BadSpider(k));
            }
            for &p in &s.positions {
                mark(p)?;
            }
        }
        for o in &self.outputs {
            match *o {
                Output::Wire(p) => mark(p)?,
                Output::Spider(k) => {
                    if k >= self.spiders.len() || self.spiders[k].out_arity != 1 {
                        return Err(WiringError::BadSpider(k));
                    }
                    spider_outputs[k] += 1;
                }
            }
        }
        for (k, s) in self.spiders.iter().enumerate() {
            if spider_outputs[k] != usize::from(s.out_arity) {
                return Err(WiringError::BadSpider(k));
            }
        }
        if let Some(p) = (0..self.n_wires).find(|p| !seen.contains(p)) {
            return Err(WiringError::Dangling(p));
        }
        if let Some(((i, j), (k, l))) = self.first_crossing() {
            return Err(WiringError::Crossing(i, j, k, l));
        }
        Ok(())
    }

    /// Groups of positions forced equal, each with the output slot it feeds
    /// (if any). Cups come first, then spiders, then pass-through outputs.
    pub fn groups(&self) -> Vec<(Vec<usize>, Option<usize>)> {
        let mut out = Vec::new();
        for &(i, j) in &self.cups {
            out.push((vec![i, j], None));
        }
        for (k, s) in self.spiders.iter().enumerate() {
            let slot = self.outputs.iter().position(|o| *o == Output::Spider(k));
            out.push((s.positions.clone(), slot));
        }
        for (slot, o) in self.outputs.iter().enumerate() {
            if let Output::Wire(p) = *o {
                out.push((vec![p], Some(slot)));
            }
        }
        out
    }
}

impl fmt::Display for Wiring {
    /// A line-oriented record: `wires`, `cups`, `spiders`, `outputs`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wires {}", self.n_wires)?;
        f.write_str("cups")?;
        for (i, j) in &self.cups {
            write!(f, " ({i},{j})")?;
        }
        f.write_str("\nspiders")?;
        for s in &self.spiders {
            let ps: Vec<String> = s.positions.iter().map(ToString::to_string).collect();
            write!(f, " {{{}}}->{}", ps.join(","), s.out_arity)?;
        }
        f.write_str("\noutputs")?;
        for o in &self.outputs {
            match o {
                Output::Wire(p) => write!(f, " {p}")?,
                Output::Spider(k) => write!(f, " s{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_cups_are_rejected() {
        let w = Wiring {
            n_wires: 4,
            cups: vec![(0, 2), (1, 3)],
            spiders: vec![],
            outputs: vec![],
        };
        assert!(!w.is_planar());
        assert_eq!(w.validate(), Err(WiringError::Crossing(0, 2, 1, 3)));
    }

    #[test]
    fn coverage_is_enforced() {
        let w = Wiring { n_wires: 2, cups: vec![], spiders: vec![], outputs: vec![Output::Wire(0)] };
        assert_eq!(w.validate(), Err(WiringError::Dangling(1)));
        let w = Wiring {
            n_wires: 2,
            cups: vec![(0, 1)],
            spiders: vec![],
            outputs: vec![Output::Wire(0)],
        };
        assert_eq!(w.validate(), Err(WiringError::Reused(0)));
    }

    #[test]
    fn spider_outputs_must_match_arity() {
        let w = Wiring {
            n_wires: 2,
            cups: vec![],
            spiders: vec![SpiderGroup { positions: vec![0, 1], out_arity: 1 }],
            outputs: vec![],
        };
        assert_eq!(w.validate(), Err(WiringError::BadSpider(0)));
        let ok = Wiring { outputs: vec![Output::Spider(0)], ..w };
        ok.validate().unwrap();
        assert_eq!(ok.groups(), vec![(vec![0, 1], Some(0))]);
    }

    #[test]
    fn text_record() {
        let w = Wiring {
            n_wires: 5,
            cups: vec![(3, 4)],
            spiders: vec![
                SpiderGroup { positions: vec![0, 1], out_arity: 1 },
                SpiderGroup { positions: vec![2], out_arity: 0 },
            ],
            outputs: vec![Output::Spider(0)],
        };
        w.validate().unwrap();
        assert_eq!(
            w.to_string(),
            "wires 5\ncups (3,4)\nspiders {0,1}->1 {2}->0\noutputs s0"
        );
    }
}
