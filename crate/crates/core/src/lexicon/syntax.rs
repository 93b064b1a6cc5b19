//! Surface syntax of world documents: statements grouped into sections, an
//! expression language for regions, and a canonical printer.

use std::fmt;

use crate::convexalg::{fmt_num, Tree};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

type PResult<T> = Result<T, SyntaxError>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub name: Option<String>,
    pub atoms: Option<Vec<String>>,
    pub objects: Vec<ObjectDef>,
    pub domains: Vec<DomainDef>,
    pub properties: Vec<PropertyDef>,
    pub words: Vec<WordDef>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectDef {
    pub atom: String,
    pub factors: Vec<String>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainDef {
    pub name: String,
    pub spec: DomainSpec,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    Box(Vec<(String, f64, f64)>),
    Simplex(Vec<String>),
    Hull { coords: Vec<String>, points: Vec<Vec<f64>> },
    Halfspace { coords: Vec<String>, constraints: Vec<Constraint> },
    Grid(usize),
    Tree(Tree),
    Table { elements: Vec<String>, joins: Vec<(String, String, String)> },
    Path { location: String, waypoints: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyDef {
    pub name: String,
    pub target: String,
    pub expr: Expr,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WordBody {
    Expr(Expr),
    Builtin(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordDef {
    pub surface: String,
    pub aliases: Vec<String>,
    pub ptype: String,
    pub body: WordBody,
    pub assumed: bool,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Name(String),
    Any(String),
    Diag(Box<Expr>),
    Hull(Box<Expr>),
    HullPoints(Vec<Vec<f64>>),
    Interval(f64, f64),
    Elements(Vec<String>),
    /// `base where constraints`; without a base the whole expected space is
    /// restricted.
    Where(Option<Box<Expr>>, Vec<Constraint>),
    Union(Vec<Expr>),
    Inter(Vec<Expr>),
    Product(Vec<Expr>),
}

impl Expr {
    /// Forms that constrain exactly one domain which the context supplies.
    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::HullPoints(_) | Expr::Interval(..) | Expr::Elements(_) | Expr::Where(None, _))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarRef {
    pub wire: Option<usize>,
    pub path: String,
}

/// `sum coeff * var + constant`; a `None` variable is the constant term.
#[derive(Clone, Debug, PartialEq)]
pub struct LinExpr(pub Vec<(f64, Option<VarRef>)>);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Op {
    fn text(self) -> &'static str {
        match self {
            Op::Le => "<=",
            Op::Lt => "<",
            Op::Ge => ">=",
            Op::Gt => ">",
            Op::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    /// A chain `e0 op0 e1 op1 e2 ...`.
    Chain(Vec<LinExpr>, Vec<Op>),
    In(VarRef, f64, f64),
    PointPath(VarRef),
}

// ---------------------------------------------------------------- lexing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Wire(usize),
    Braced(String),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

/// Text of one statement, with the source position of every character.
struct Source {
    chars: Vec<char>,
    pos: Vec<(usize, usize)>,
    end: (usize, usize),
}

impl Source {
    fn at(&self, i: usize) -> (usize, usize) {
        self.pos.get(i).copied().unwrap_or(self.end)
    }
}

const SYMBOLS: [&str; 18] = ["<=", ">=", "(", ")", "[", "]", ",", "|", "&", "*", "⊗", "<", ">", "=", "+", "-", ":", "@"];

fn lex(src: &Source) -> PResult<Vec<Spanned>> {
    let c = &src.chars;
    let mut out = Vec::new();
    let mut i = 0;
    while i < c.len() {
        let ch = c[i];
        let (line, col) = src.at(i);
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        let after_wire = matches!(out.last(), Some(Spanned { tok: Tok::Wire(_), .. }))
            && ch == '.'
            && c.get(i + 1).is_some_and(|n| n.is_ascii_alphabetic() || *n == '_');
        if ch.is_ascii_alphabetic() || ch == '_' || after_wire {
            let s = i;
            while i < c.len() && (c[i].is_ascii_alphanumeric() || c[i] == '_' || c[i] == '.' || c[i] == '\'') {
                i += 1;
            }
            let word: String = c[s..i].iter().collect::<String>().trim_end_matches('.').to_string();
            i = s + word.chars().count();
            out.push(Spanned { tok: Tok::Ident(word), line, col });
            continue;
        }
        if ch.is_ascii_digit() || (ch == '.' && c.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let s = i;
            while i < c.len() && (c[i].is_ascii_digit() || c[i] == '.') {
                i += 1;
            }
            if i < c.len() && (c[i] == 'e' || c[i] == 'E') {
                let mut j = i + 1;
                if j < c.len() && (c[j] == '+' || c[j] == '-') {
                    j += 1;
                }
                if j < c.len() && c[j].is_ascii_digit() {
                    i = j;
                    while i < c.len() && c[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = c[s..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| SyntaxError { line, col, msg: format!("bad number `{text}`") })?;
            out.push(Spanned { tok: Tok::Num(v), line, col });
            continue;
        }
        if ch == '$' {
            let s = i + 1;
            i = s;
            while i < c.len() && c[i].is_ascii_digit() {
                i += 1;
            }
            if i == s {
                return Err(SyntaxError { line, col, msg: "expected a wire number after `$`".into() });
            }
            let n: String = c[s..i].iter().collect();
            out.push(Spanned { tok: Tok::Wire(n.parse().expect("digits")), line, col });
            continue;
        }
        if ch == '{' {
            let mut depth = 0;
            let s = i + 1;
            let mut j = i;
            loop {
                if j >= c.len() {
                    return Err(SyntaxError { line, col, msg: "unclosed `{`".into() });
                }
                match c[j] {
                    '{' => depth += 1,
                    '}' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                j += 1;
            }
            out.push(Spanned { tok: Tok::Braced(c[s..j].iter().collect()), line, col });
            i = j + 1;
            continue;
        }
        let rest: String = c[i..c.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push(Spanned { tok: Tok::Sym(s), line, col });
                i += s.chars().count();
            }
            None => return Err(SyntaxError { line, col, msg: format!("unexpected character `{ch}`") }),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- statements

struct Statement {
    src: Source,
    line: usize,
}

impl Statement {
    fn text(&self) -> String {
        self.src.chars.iter().collect()
    }

    fn err(&self, offset: usize, msg: impl Into<String>) -> SyntaxError {
        let (line, col) = self.src.at(offset);
        SyntaxError { line, col, msg: msg.into() }
    }

    /// Sub-statement starting at char offset `from`.
    fn tail(&self, from: usize) -> Source {
        Source {
            chars: self.src.chars[from..].to_vec(),
            pos: self.src.pos[from..].to_vec(),
            end: self.src.end,
        }
    }

    fn find(&self, ch: char, from: usize) -> Option<usize> {
        self.src.chars[from..].iter().position(|&c| c == ch).map(|k| k + from)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Types,
    Domains,
    Properties,
    Words,
}

/// Split a document into statements. `#` starts a comment; a line that
/// begins with whitespace continues the previous statement.
pub fn parse_document(text: &str) -> PResult<Document> {
    let mut doc = Document::default();
    let mut section = Section::Preamble;
    let mut pending: Option<(Section, Statement)> = None;
    let mut any = false;
    let flush = |doc: &mut Document, p: Option<(Section, Statement)>| -> PResult<()> {
        if let Some((sec, st)) = p {
            parse_statement(doc, sec, &st)?;
        }
        Ok(())
    };
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let continues = body.starts_with(char::is_whitespace);
        if continues {
            if let Some((_, st)) = pending.as_mut() {
                st.src.chars.push(' ');
                st.src.pos.push((line, 1));
                for (k, ch) in body.chars().enumerate() {
                    st.src.chars.push(ch);
                    st.src.pos.push((line, k + 1));
                }
                st.src.end = (line, body.chars().count() + 1);
                continue;
            }
        }
        flush(&mut doc, pending.take())?;
        let trimmed = body.trim();
        if trimmed.starts_with('[') && trimmed.ends_with(']') {
            section = match &trimmed[1..trimmed.len() - 1] {
                "types" => Section::Types,
                "domains" => Section::Domains,
                "properties" => Section::Properties,
                "words" => Section::Words,
                other => {
                    return Err(SyntaxError { line, col: 1, msg: format!("unknown section `[{other}]`") });
                }
            };
            any = true;
            continue;
        }
        let lead = body.chars().take_while(|c| c.is_whitespace()).count();
        let chars: Vec<char> = body.chars().skip(lead).collect();
        let pos = (0..chars.len()).map(|k| (line, lead + k + 1)).collect();
        let end = (line, body.chars().count() + 1);
        pending = Some((section, Statement { src: Source { chars, pos, end }, line }));
    }
    flush(&mut doc, pending.take())?;
    if !any {
        return Err(SyntaxError { line: 1, col: 1, msg: "document has no sections".into() });
    }
    Ok(doc)
}

fn parse_statement(doc: &mut Document, sec: Section, st: &Statement) -> PResult<()> {
    let text = st.text();
    match sec {
        Section::Preamble => {
            let mut it = text.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some("world"), Some(name), None) => {
                    doc.name = Some(name.to_string());
                    Ok(())
                }
                _ => Err(st.err(0, "expected `world <name>` or a section header")),
            }
        }
        Section::Types => {
            let words: Vec<&str> = text.split_whitespace().collect();
            if words.first() == Some(&"atoms") {
                if words.len() < 2 {
                    return Err(st.err(0, "`atoms` needs at least one symbol"));
                }
                doc.atoms = Some(words[1..].iter().map(|s| s.to_string()).collect());
                return Ok(());
            }
            let eq = st.find('=', 0).ok_or_else(|| st.err(0, "expected `<atom> = <domain> * ...`"))?;
            let atom = text[..byte(&text, eq)].trim().to_string();
            if !is_name(&atom) {
                return Err(st.err(0, format!("bad atomic type name `{atom}`")));
            }
            let factors: Vec<String> =
                text[byte(&text, eq) + 1..].split(['*', '⊗']).map(|s| s.trim().to_string()).collect();
            if let Some(f) = factors.iter().find(|f| !is_name(f)) {
                return Err(st.err(eq + 1, format!("bad domain name `{f}`")));
            }
            doc.objects.push(ObjectDef { atom, factors, line: st.line });
            Ok(())
        }
        Section::Domains => {
            let eq = st.find('=', 0).ok_or_else(|| st.err(0, "expected `<name> = <domain spec>`"))?;
            let name = text[..byte(&text, eq)].trim().to_string();
            if !is_name(&name) {
                return Err(st.err(0, format!("bad domain name `{name}`")));
            }
            let toks = lex(&st.tail(eq + 1))?;
            let spec = Parser::new(toks, st.src.end).domain_spec()?;
            doc.domains.push(DomainDef { name, spec, line: st.line });
            Ok(())
        }
        Section::Properties => {
            let colon = st.find(':', 0).ok_or_else(|| st.err(0, "expected `<name> : <domain> = <expr>`"))?;
            let eq = st.find('=', colon).ok_or_else(|| st.err(colon, "expected `=`"))?;
            let name = text[..byte(&text, colon)].trim().to_string();
            let target = text[byte(&text, colon) + 1..byte(&text, eq)].trim().to_string();
            if !is_name(&name) {
                return Err(st.err(0, format!("bad property name `{name}`")));
            }
            if !is_name(&target) {
                return Err(st.err(colon + 1, format!("bad domain name `{target}`")));
            }
            let toks = lex(&st.tail(eq + 1))?;
            let mut p = Parser::new(toks, st.src.end);
            let expr = p.expr()?;
            p.finish()?;
            doc.properties.push(PropertyDef { name, target, expr, line: st.line });
            Ok(())
        }
        Section::Words => {
            let colon = st.find(':', 0).ok_or_else(|| st.err(0, "expected `<surface> : <type> = <expr>`"))?;
            let eq = st.find('=', colon).ok_or_else(|| st.err(colon, "expected `=`"))?;
            let head = &text[..byte(&text, colon)];
            let (surface, aliases) = match head.find('(') {
                Some(open) => {
                    let close = head.rfind(')').ok_or_else(|| st.err(0, "unclosed alias list"))?;
                    let aliases = head[open + 1..close]
                        .split(',')
                        .map(normalise_surface)
                        .filter(|a| !a.is_empty())
                        .collect();
                    (normalise_surface(&head[..open]), aliases)
                }
                None => (normalise_surface(head), Vec::new()),
            };
            if surface.is_empty() {
                return Err(st.err(0, "empty word surface"));
            }
            let ptype = text[byte(&text, colon) + 1..byte(&text, eq)].trim().to_string();
            let toks = lex(&st.tail(eq + 1))?;
            let mut p = Parser::new(toks, st.src.end);
            let body = if p.peek_ident("builtin") && p.peek_sym_at(1, "(") {
                p.next();
                p.expect_sym("(")?;
                let name = p.ident()?;
                p.expect_sym(")")?;
                WordBody::Builtin(name)
            } else {
                WordBody::Expr(p.expr()?)
            };
            let mut assumed = false;
            if p.eat_sym("@") {
                let (line, col) = p.here();
                match p.ident()?.as_str() {
                    "assumed" => assumed = true,
                    other => return Err(SyntaxError { line, col, msg: format!("unknown annotation `@{other}`") }),
                }
            }
            p.finish()?;
            doc.words.push(WordDef { surface, aliases, ptype, body, assumed, line: st.line });
            Ok(())
        }
    }
}

fn byte(s: &str, char_idx: usize) -> usize {
    s.char_indices().nth(char_idx).map_or(s.len(), |(b, _)| b)
}

pub(crate) fn is_name(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

pub(crate) fn normalise_surface(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
    end: (usize, usize),
}

impl Parser {
    fn new(toks: Vec<Spanned>, end: (usize, usize)) -> Self {
        Self { toks, i: 0, end }
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.i).map_or(self.end, |t| (t.line, t.col))
    }

    fn fail<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(SyntaxError { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|t| t.tok.clone());
        self.i += 1;
        t
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_sym_at(&self, k: usize, s: &str) -> bool {
        matches!(self.toks.get(self.i + k).map(|t| &t.tok), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.fail(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.i += 1;
                Ok(s)
            }
            _ => self.fail("expected a name"),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let neg = self.eat_sym("-");
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.i += 1;
                Ok(if neg { -v } else { v })
            }
            Some(Tok::Ident(s)) if s == "inf" => {
                self.i += 1;
                Ok(if neg { f64::NEG_INFINITY } else { f64::INFINITY })
            }
            _ => self.fail("expected a number"),
        }
    }

    fn finish(&self) -> PResult<()> {
        if self.i < self.toks.len() {
            return self.fail("unexpected trailing input");
        }
        Ok(())
    }

    fn interval(&mut self) -> PResult<(f64, f64)> {
        self.expect_sym("[")?;
        let lo = self.number()?;
        self.expect_sym(",")?;
        let hi = self.number()?;
        self.expect_sym("]")?;
        Ok((lo, hi))
    }

    fn braced(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Braced(s)) => {
                let s = s.clone();
                self.i += 1;
                Ok(s)
            }
            _ => self.fail("expected `{...}`"),
        }
    }

    fn domain_spec(&mut self) -> PResult<DomainSpec> {
        let kind = self.ident()?;
        let spec = match kind.as_str() {
            "box" => {
                let mut coords = Vec::new();
                while let Some(Tok::Ident(_)) = self.peek() {
                    let c = self.ident()?;
                    self.expect_sym(":")?;
                    let (lo, hi) = self.interval()?;
                    coords.push((c, lo, hi));
                }
                if coords.is_empty() {
                    return self.fail("a box needs at least one `coord:[lo,hi]`");
                }
                DomainSpec::Box(coords)
            }
            "simplex" => {
                let mut labels = Vec::new();
                while let Some(Tok::Ident(_)) = self.peek() {
                    labels.push(self.ident()?);
                }
                if labels.is_empty() {
                    return self.fail("a simplex needs at least one label");
                }
                DomainSpec::Simplex(labels)
            }
            "hull" => {
                let mut coords = Vec::new();
                while let Some(Tok::Ident(_)) = self.peek() {
                    coords.push(self.ident()?);
                }
                self.expect_sym(":")?;
                let (line, col) = self.here();
                let body = self.braced()?;
                let points = parse_tuples(&body).map_err(|msg| SyntaxError { line, col, msg })?;
                DomainSpec::Hull { coords, points }
            }
            "halfspace" => {
                let mut coords = Vec::new();
                while let Some(Tok::Ident(s)) = self.peek() {
                    if s == "where" {
                        break;
                    }
                    coords.push(self.ident()?);
                }
                let constraints = if self.peek_ident("where") {
                    self.next();
                    self.constraints()?
                } else {
                    Vec::new()
                };
                DomainSpec::Halfspace { coords, constraints }
            }
            "lattice" => {
                if self.peek_ident("grid") {
                    self.next();
                    match self.next() {
                        Some(Tok::Num(k)) if k >= 1.0 && k.fract() == 0.0 => DomainSpec::Grid(k as usize),
                        _ => {
                            self.i -= 1;
                            return self.fail("expected a grid dimension");
                        }
                    }
                } else if self.peek_ident("tree") {
                    self.next();
                    DomainSpec::Tree(self.tree()?)
                } else {
                    let body = self.braced()?;
                    let elements: Vec<String> = split_top(&body).into_iter().map(|s| compact(&s)).collect();
                    let mut joins = Vec::new();
                    if self.peek_ident("join") {
                        self.next();
                        loop {
                            let (line, col) = self.here();
                            let a = self.element_name()?;
                            self.expect_sym("|")?;
                            let b = self.element_name()?;
                            self.expect_sym("=")?;
                            let c = self.element_name()?;
                            if [&a, &b, &c].iter().any(|e| !elements.contains(e)) {
                                return Err(SyntaxError { line, col, msg: "join refers to an undeclared element".into() });
                            }
                            joins.push((a, b, c));
                            if !self.eat_sym(",") {
                                break;
                            }
                        }
                    }
                    DomainSpec::Table { elements, joins }
                }
            }
            "path" => {
                let location = self.ident()?;
                let waypoints = match self.next() {
                    Some(Tok::Num(k)) if k >= 2.0 && k.fract() == 0.0 => k as usize,
                    _ => {
                        self.i -= 1;
                        return self.fail("expected a waypoint count >= 2");
                    }
                };
                DomainSpec::Path { location, waypoints }
            }
            other => {
                self.i -= 1;
                return self.fail(format!("unknown domain kind `{other}`"));
            }
        };
        self.finish()?;
        Ok(spec)
    }

    fn element_name(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(_)) => self.ident(),
            Some(Tok::Num(v)) => {
                let v = *v;
                self.i += 1;
                Ok(fmt_num(v))
            }
            _ => self.fail("expected an element name"),
        }
    }

    fn tree(&mut self) -> PResult<Tree> {
        let label = self.ident()?;
        if !self.eat_sym("(") {
            return Ok(Tree::leaf(&label));
        }
        let mut children = vec![self.tree()?];
        while self.eat_sym(",") {
            children.push(self.tree()?);
        }
        self.expect_sym(")")?;
        Ok(Tree::node(&label, children))
    }

    // expr := inter ('|' inter)*
    fn expr(&mut self) -> PResult<Expr> {
        let mut parts = vec![self.inter()?];
        while self.eat_sym("|") {
            parts.push(self.inter()?);
        }
        Ok(if parts.len() == 1 { parts.pop().expect("one") } else { Expr::Union(parts) })
    }

    fn inter(&mut self) -> PResult<Expr> {
        let mut parts = vec![self.product()?];
        while self.eat_sym("&") {
            parts.push(self.product()?);
        }
        Ok(if parts.len() == 1 { parts.pop().expect("one") } else { Expr::Inter(parts) })
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut parts = vec![self.restricted()?];
        while self.eat_sym("*") || self.eat_sym("⊗") {
            parts.push(self.restricted()?);
        }
        Ok(if parts.len() == 1 { parts.pop().expect("one") } else { Expr::Product(parts) })
    }

    fn restricted(&mut self) -> PResult<Expr> {
        let a = self.atom()?;
        if self.peek_ident("where") {
            self.next();
            let cs = self.constraints()?;
            return Ok(Expr::Where(Some(Box::new(a)), cs));
        }
        Ok(a)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().cloned() {
            Some(Tok::Sym("(")) => {
                self.next();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Sym("[")) => {
                let (lo, hi) = self.interval()?;
                Ok(Expr::Interval(lo, hi))
            }
            Some(Tok::Braced(body)) => {
                self.next();
                Ok(Expr::Elements(split_top(&body).into_iter().map(|s| compact(&s)).collect()))
            }
            Some(Tok::Ident(name)) => {
                self.next();
                match name.as_str() {
                    "where" => Ok(Expr::Where(None, self.constraints()?)),
                    "any" | "diag" | "hull" if self.peek_sym("(") => {
                        self.next();
                        let e = if name == "any" { Expr::Any(self.ident()?) } else { self.expr()? };
                        self.expect_sym(")")?;
                        Ok(match name.as_str() {
                            "any" => e,
                            "diag" => Expr::Diag(Box::new(e)),
                            _ => Expr::Hull(Box::new(e)),
                        })
                    }
                    "hull" => {
                        let (line, col) = self.here();
                        let body = self.braced()?;
                        let pts = parse_tuples(&body).map_err(|msg| SyntaxError { line, col, msg })?;
                        Ok(Expr::HullPoints(pts))
                    }
                    _ => Ok(Expr::Name(name)),
                }
            }
            _ => self.fail("expected an expression"),
        }
    }

    fn constraints(&mut self) -> PResult<Vec<Constraint>> {
        let mut cs = vec![self.constraint()?];
        while self.eat_sym(",") {
            cs.push(self.constraint()?);
        }
        Ok(cs)
    }

    fn constraint(&mut self) -> PResult<Constraint> {
        if self.peek_ident("point_path") && self.peek_sym_at(1, "(") {
            self.next();
            self.next();
            let v = self.var()?;
            self.expect_sym(")")?;
            return Ok(Constraint::PointPath(v));
        }
        let first = self.linexpr()?;
        if self.peek_ident("in") {
            self.next();
            let v = match first.0.as_slice() {
                [(c, Some(v))] if *c == 1.0 => v.clone(),
                _ => return self.fail("`in` needs a single variable on the left"),
            };
            let (lo, hi) = self.interval()?;
            return Ok(Constraint::In(v, lo, hi));
        }
        let mut parts = vec![first];
        let mut ops = Vec::new();
        while let Some(op) = self.op() {
            ops.push(op);
            parts.push(self.linexpr()?);
        }
        if ops.is_empty() {
            return self.fail("expected a comparison");
        }
        Ok(Constraint::Chain(parts, ops))
    }

    fn op(&mut self) -> Option<Op> {
        let op = match self.peek() {
            Some(Tok::Sym("<=")) => Op::Le,
            Some(Tok::Sym("<")) => Op::Lt,
            Some(Tok::Sym(">=")) => Op::Ge,
            Some(Tok::Sym(">")) => Op::Gt,
            Some(Tok::Sym("=")) => Op::Eq,
            _ => return None,
        };
        self.i += 1;
        Some(op)
    }

    fn var(&mut self) -> PResult<VarRef> {
        let wire = match self.peek() {
            Some(Tok::Wire(w)) => {
                let w = *w;
                self.i += 1;
                Some(w)
            }
            _ => None,
        };
        let path = match (wire, self.peek()) {
            (Some(_), Some(Tok::Ident(s))) if s.starts_with('.') => {
                let s = s[1..].to_string();
                self.i += 1;
                s
            }
            (Some(_), _) => String::new(),
            (None, _) => self.ident()?,
        };
        Ok(VarRef { wire, path })
    }

    fn linexpr(&mut self) -> PResult<LinExpr> {
        let mut terms = Vec::new();
        let mut sign = if self.eat_sym("-") { -1.0 } else { 1.0 };
        loop {
            let term = match self.peek() {
                Some(Tok::Num(v)) => {
                    let v = *v;
                    self.i += 1;
                    if self.eat_sym("*") {
                        (sign * v, Some(self.var()?))
                    } else {
                        (sign * v, None)
                    }
                }
                Some(Tok::Ident(_) | Tok::Wire(_)) => (sign, Some(self.var()?)),
                _ => return self.fail("expected a number or a variable"),
            };
            terms.push(term);
            if self.eat_sym("+") {
                sign = 1.0;
            } else if self.eat_sym("-") {
                sign = -1.0;
            } else {
                break;
            }
        }
        Ok(LinExpr(terms))
    }
}

fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    out
}

fn compact(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn parse_tuples(body: &str) -> Result<Vec<Vec<f64>>, String> {
    let items = split_top(body);
    if items.is_empty() {
        return Err("empty point list".into());
    }
    items
        .iter()
        .map(|it| {
            let t = it.trim();
            let inner = t
                .strip_prefix('(')
                .and_then(|x| x.strip_suffix(')'))
                .ok_or_else(|| format!("expected a point `(x, y, ...)`, found `{t}`"))?;
            inner
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad coordinate `{}`", x.trim())))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------- printing

fn tuple(p: &[f64]) -> String {
    format!("({})", p.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", "))
}

fn bound(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        fmt_num(x)
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.wire, self.path.is_empty()) {
            (Some(w), true) => write!(f, "${w}"),
            (Some(w), false) => write!(f, "${w}.{}", self.path),
            (None, _) => f.write_str(&self.path),
        }
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (c, v)) in self.0.iter().enumerate() {
            let (neg, mag) = (*c < 0.0, c.abs());
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match v {
                Some(v) if mag == 1.0 => write!(f, "{v}")?,
                Some(v) => write!(f, "{}*{v}", fmt_num(mag))?,
                None => f.write_str(&fmt_num(mag))?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Chain(parts, ops) => {
                write!(f, "{}", parts[0])?;
                for (op, e) in ops.iter().zip(&parts[1..]) {
                    write!(f, " {} {e}", op.text())?;
                }
                Ok(())
            }
            Constraint::In(v, lo, hi) => write!(f, "{v} in [{}, {}]", bound(*lo), bound(*hi)),
            Constraint::PointPath(v) => write!(f, "point_path({v})"),
        }
    }
}

fn join_constraints(cs: &[Constraint]) -> String {
    cs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl Expr {
    fn prec(&self) -> u8 {
        match self {
            Expr::Union(_) => 0,
            Expr::Inter(_) => 1,
            Expr::Product(_) => 2,
            Expr::Where(..) => 3,
            _ => 4,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            f.write_str("(")?;
            self.fmt_at(f, 0)?;
            return f.write_str(")");
        }
        let seq = |f: &mut fmt::Formatter<'_>, parts: &[Expr], sep: &str, p: u8| -> fmt::Result {
            for (k, e) in parts.iter().enumerate() {
                if k > 0 {
                    f.write_str(sep)?;
                }
                e.fmt_at(f, p)?;
            }
            Ok(())
        };
        match self {
            Expr::Name(n) => f.write_str(n),
            Expr::Any(n) => write!(f, "any({n})"),
            Expr::Diag(e) => write!(f, "diag({e})"),
            Expr::Hull(e) => write!(f, "hull({e})"),
            Expr::HullPoints(ps) => {
                write!(f, "hull{{{}}}", ps.iter().map(|p| tuple(p)).collect::<Vec<_>>().join(", "))
            }
            Expr::Interval(lo, hi) => write!(f, "[{}, {}]", bound(*lo), bound(*hi)),
            Expr::Elements(es) => write!(f, "{{{}}}", es.join(", ")),
            Expr::Where(None, cs) => write!(f, "where {}", join_constraints(cs)),
            Expr::Where(Some(b), cs) => {
                b.fmt_at(f, 4)?;
                write!(f, " where {}", join_constraints(cs))
            }
            // Where clauses swallow everything up to the next `|`, `&` or `)`,
            // so they are parenthesised whenever something follows them.
            Expr::Union(ps) => seq(f, ps, " | ", 1),
            Expr::Inter(ps) => seq(f, ps, " & ", 2),
            Expr::Product(ps) => seq(f, ps, " * ", 4),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::Box(cs) => {
                f.write_str("box")?;
                for (c, lo, hi) in cs {
                    write!(f, " {c}:[{}, {}]", bound(*lo), bound(*hi))?;
                }
                Ok(())
            }
            DomainSpec::Simplex(ls) => write!(f, "simplex {}", ls.join(" ")),
            DomainSpec::Hull { coords, points } => write!(
                f,
                "hull {} : {{{}}}",
                coords.join(" "),
                points.iter().map(|p| tuple(p)).collect::<Vec<_>>().join(", ")
            ),
            DomainSpec::Halfspace { coords, constraints } if constraints.is_empty() => {
                write!(f, "halfspace {}", coords.join(" "))
            }
            DomainSpec::Halfspace { coords, constraints } => {
                write!(f, "halfspace {} where {}", coords.join(" "), join_constraints(constraints))
            }
            DomainSpec::Grid(k) => write!(f, "lattice grid {k}"),
            DomainSpec::Tree(t) => write!(f, "lattice tree {t}"),
            DomainSpec::Table { elements, joins } => {
                write!(f, "lattice {{{}}}", elements.join(", "))?;
                if !joins.is_empty() {
                    let js: Vec<String> = joins.iter().map(|(a, b, c)| format!("{a} | {b} = {c}")).collect();
                    write!(f, " join {}", js.join(", "))?;
                }
                Ok(())
            }
            DomainSpec::Path { location, waypoints } => write!(f, "path {location} {waypoints}"),
        }
    }
}

impl fmt::Display for Document {
    /// Canonical form: one statement per line, sections in fixed order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            writeln!(f, "world {n}\n")?;
        }
        writeln!(f, "[types]")?;
        if let Some(a) = &self.atoms {
            writeln!(f, "atoms {}", a.join(" "))?;
        }
        for o in &self.objects {
            writeln!(f, "{} = {}", o.atom, o.factors.join(" * "))?;
        }
        writeln!(f, "\n[domains]")?;
        for d in &self.domains {
            writeln!(f, "{} = {}", d.name, d.spec)?;
        }
        writeln!(f, "\n[properties]")?;
        for p in &self.properties {
            writeln!(f, "{} : {} = {}", p.name, p.target, p.expr)?;
        }
        writeln!(f, "\n[words]")?;
        for w in &self.words {
            f.write_str(&w.surface)?;
            if !w.aliases.is_empty() {
                write!(f, " ({})", w.aliases.join(", "))?;
            }
            write!(f, " : {} = ", w.ptype)?;
            match &w.body {
                WordBody::Expr(e) => write!(f, "{e}")?,
                WordBody::Builtin(b) => write!(f, "builtin({b})")?,
            }
            if w.assumed {
                f.write_str(" @assumed")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(s: &str) -> Expr {
        let src = Source { chars: s.chars().collect(), pos: (0..s.chars().count()).map(|k| (1, k + 1)).collect(), end: (1, s.len() + 1) };
        let mut p = Parser::new(lex(&src).unwrap(), src.end);
        let e = p.expr().unwrap();
        p.finish().unwrap();
        e
    }

    #[test]
    fn precedence() {
        let e = expr("a * b | c & d");
        assert_eq!(
            e,
            Expr::Union(vec![
                Expr::Product(vec![Expr::Name("a".into()), Expr::Name("b".into())]),
                Expr::Inter(vec![Expr::Name("c".into()), Expr::Name("d".into())]),
            ])
        );
    }

    #[test]
    fn constraint_chains_and_wires() {
        let e = expr("where 0.9*R <= G <= 1.5*R, B < 0.1, $1.path.end = $2.location, point_path($1.path)");
        let Expr::Where(None, cs) = &e else { panic!("{e:?}") };
        assert_eq!(cs.len(), 4);
        assert_eq!(cs[0].to_string(), "0.9*R <= G <= 1.5*R");
        assert_eq!(cs[2].to_string(), "$1.path.end = $2.location");
        assert_eq!(cs[3], Constraint::PointPath(VarRef { wire: Some(1), path: "path".into() }));
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "green_banana * {(0,0)} * bitter | beer * {(1,0)} * sweet",
            "diag((banana & (where texture <= 0.35)) | apple & (where texture <= 0.6))",
            "(agent * any(s) * (kitchen | living_room)) where $0 = $1.n, x1 in [0, 5]",
            "hull{(1, 0, 0, 0), (0.25, 0, 0.75, 0)}",
            "where G >= 1 - R, -R + 2*G < -0.5",
        ] {
            let e = expr(s);
            assert_eq!(expr(&e.to_string()), e, "{s} -> {e}");
        }
    }

    #[test]
    fn document_errors_carry_positions() {
        assert_eq!(parse_document("").unwrap_err().line, 1);
        let err = parse_document("[domains]\ncolour = box R:[0,1] G:[0,1\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_document("[properties]\nyellow : colour = where R >= 0.7 ~\n").unwrap_err();
        assert_eq!((err.line, err.col), (2, 34));
    }

    #[test]
    fn continuation_lines_join() {
        let d = parse_document("[words]\ntaste (tastes) : n^r s n^l = a * b * c\n    | d * e * f @assumed\n").unwrap();
        assert_eq!(d.words.len(), 1);
        assert!(d.words[0].assumed);
        assert_eq!(d.words[0].aliases, vec!["tastes".to_string()]);
        assert!(matches!(&d.words[0].body, WordBody::Expr(Expr::Union(v)) if v.len() == 2));
    }
}
