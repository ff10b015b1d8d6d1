//! Potential responses, counterfactual queries and the query grammar.
//!
//! A regime is a list of [`Intervention`]s. An intervention with
//! `targets: None` replaces the mechanism of `var` by a constant; one with
//! `targets: Some(C)` fixes the value of `var` only as an input to the
//! children in `C`, leaving the natural mechanism of `var` and its other
//! out-edges untouched. For an edge `P -> C` the value seen by `C` is the
//! restricted value when `C` is a target of some restricted entry of `P`,
//! otherwise the full value of `P` if present, otherwise the natural `P`.

use std::fmt;

use crate::diagram::CausalDiagram;
use crate::error::{Error, Result};
use crate::varset::{VarId, VarSet};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Intervention {
    pub var: VarId,
    pub value: usize,
    pub targets: Option<VarSet>,
}

impl Intervention {
    pub fn full(var: VarId, value: usize) -> Self {
        Intervention { var, value, targets: None }
    }

    pub fn restricted(var: VarId, value: usize, targets: VarSet) -> Self {
        Intervention { var, value, targets: Some(targets) }
    }
}

/// `var` evaluated under `regime`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PotentialResponse {
    pub var: VarId,
    pub regime: Vec<Intervention>,
}

impl PotentialResponse {
    pub fn natural(var: VarId) -> Self {
        PotentialResponse { var, regime: Vec::new() }
    }

    pub fn new(var: VarId, mut regime: Vec<Intervention>) -> Self {
        regime.sort();
        PotentialResponse { var, regime }
    }

    /// Convenience constructor from `(variable, value)` name pairs, all full.
    pub fn parse_simple(diagram: &CausalDiagram, var: &str, regime: &[(&str, &str)]) -> Result<Self> {
        let v = diagram.id(var)?;
        let mut entries = Vec::with_capacity(regime.len());
        for (x, val) in regime {
            let xi = diagram.id(x)?;
            entries.push(Intervention::full(xi, diagram.value_index(xi, val)?));
        }
        let t = PotentialResponse::new(v, entries);
        t.validate(diagram)?;
        Ok(t)
    }

    pub fn is_natural(&self) -> bool {
        self.regime.is_empty()
    }

    /// Variables carrying a full (mechanism-replacing) intervention.
    pub fn full_vars(&self) -> VarSet {
        self.regime.iter().filter(|i| i.targets.is_none()).map(|i| i.var).collect()
    }

    /// Variables mentioned anywhere in the regime.
    pub fn regime_vars(&self) -> VarSet {
        self.regime.iter().map(|i| i.var).collect()
    }

    pub fn full_value(&self, var: VarId) -> Option<usize> {
        self.regime.iter().find(|i| i.var == var && i.targets.is_none()).map(|i| i.value)
    }

    /// Fixed value on edge `p -> c`, if any.
    #[inline]
    pub fn edge_value(&self, p: VarId, c: VarId) -> Option<usize> {
        let mut full = None;
        for i in &self.regime {
            if i.var != p {
                continue;
            }
            match i.targets {
                Some(t) if t.contains(c) => return Some(i.value),
                Some(_) => {}
                None => full = Some(i.value),
            }
        }
        full
    }

    pub fn validate(&self, g: &CausalDiagram) -> Result<()> {
        if self.var >= g.len() {
            return Err(Error::InvalidQuery(format!("unknown variable id {}", self.var)));
        }
        let mut full = VarSet::EMPTY;
        for i in &self.regime {
            if i.var >= g.len() {
                return Err(Error::InvalidQuery(format!("unknown variable id {}", i.var)));
            }
            if i.var == self.var {
                return Err(Error::InvalidQuery(format!("self-intervention on {}", g.name(self.var))));
            }
            if i.value >= g.domain_size(i.var) {
                return Err(Error::InvalidValue { var: g.name(i.var).into(), value: i.value.to_string() });
            }
            match i.targets {
                None => {
                    if !full.insert(i.var) {
                        return Err(Error::InvalidQuery(format!("{} is intervened on twice", g.name(i.var))));
                    }
                }
                Some(t) => {
                    if t.is_empty() {
                        return Err(Error::InvalidQuery(format!("empty target set for {}", g.name(i.var))));
                    }
                    if !t.is_subset(g.children_of(i.var)) {
                        let bad = g.names_of(t.difference(g.children_of(i.var)));
                        return Err(Error::InvalidQuery(format!("{:?} are not children of {}", bad, g.name(i.var))));
                    }
                }
            }
        }
        for (a, ia) in self.regime.iter().enumerate() {
            for ib in &self.regime[a + 1..] {
                if let (Some(ta), Some(tb)) = (ia.targets, ib.targets) {
                    if ia.var == ib.var && ta.intersects(tb) {
                        return Err(Error::InvalidQuery(format!(
                            "overlapping targets for {} in one regime",
                            g.name(ia.var)
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Variables whose value can affect this response: the response itself
    /// plus everything reaching it backwards along edges that are not fixed.
    pub fn relevant(&self, g: &CausalDiagram) -> VarSet {
        relevance_set(g, self.var, |p, c| self.edge_value(p, c).is_some())
    }

    /// Every fixed edge `p -> c` with `c` in `within`, as `(p, c, value)`.
    pub fn fixed_edges_into(&self, g: &CausalDiagram, within: VarSet) -> Vec<(VarId, VarId, usize)> {
        let mut out = Vec::new();
        for c in within {
            for p in g.parents_of(c) {
                if let Some(v) = self.edge_value(p, c) {
                    out.push((p, c, v));
                }
            }
        }
        out.sort();
        out
    }

    /// Equivalent term keeping only what influences the response.
    ///
    /// Fixed edges that do not land in the relevance set are dropped. A
    /// variable outside the relevance set whose relevant out-edges all share
    /// one value becomes a full intervention; otherwise the edges are grouped
    /// into restricted interventions by value.
    pub fn normalized(&self, g: &CausalDiagram) -> PotentialResponse {
        let r = self.relevant(g);
        let edges = self.fixed_edges_into(g, r);
        let mut regime = Vec::new();
        let mut k = 0;
        while k < edges.len() {
            let p = edges[k].0;
            let mut j = k;
            while j < edges.len() && edges[j].0 == p {
                j += 1;
            }
            let group = &edges[k..j];
            let first = group[0].2;
            if !r.contains(p) && group.iter().all(|e| e.2 == first) {
                regime.push(Intervention::full(p, first));
            } else {
                let mut values: Vec<usize> = group.iter().map(|e| e.2).collect();
                values.sort_unstable();
                values.dedup();
                for v in values {
                    let t: VarSet = group.iter().filter(|e| e.2 == v).map(|e| e.1).collect();
                    regime.push(Intervention::restricted(p, v, t));
                }
            }
            k = j;
        }
        PotentialResponse::new(self.var, regime)
    }

    pub fn display<'a>(&'a self, g: &'a CausalDiagram) -> TermDisplay<'a> {
        TermDisplay { term: self, g, value: None }
    }
}

/// Backward closure from `w` along edges for which `fixed` is false.
#[inline]
pub fn relevance_set(g: &CausalDiagram, w: VarId, fixed: impl Fn(VarId, VarId) -> bool) -> VarSet {
    let mut r = VarSet::singleton(w);
    let mut frontier = r;
    while let Some(c) = frontier.first() {
        frontier.remove(c);
        for p in g.parents_of(c) {
            if !r.contains(p) && !fixed(p, c) {
                r.insert(p);
                frontier.insert(p);
            }
        }
    }
    r
}

pub struct TermDisplay<'a> {
    term: &'a PotentialResponse,
    g: &'a CausalDiagram,
    value: Option<usize>,
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.g;
        write!(f, "{}", g.name(self.term.var))?;
        if !self.term.regime.is_empty() {
            write!(f, "[")?;
            for (k, i) in self.term.regime.iter().enumerate() {
                if k > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}={}", g.name(i.var), g.value_name(i.var, i.value))?;
                if let Some(t) = i.targets {
                    if t.len() == 1 {
                        write!(f, "->{}", g.name(t.first().unwrap()))?;
                    } else {
                        write!(f, "->{{{}}}", g.names_of(t).join(","))?;
                    }
                }
            }
            write!(f, "]")?;
        }
        if let Some(v) = self.value {
            write!(f, "={}", g.value_name(self.term.var, v))?;
        }
        Ok(())
    }
}

/// A conjunction of potential responses, each optionally assigned a value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CtfQuery {
    pub terms: Vec<PotentialResponse>,
    pub values: Vec<Option<usize>>,
}

impl CtfQuery {
    pub fn new(terms: Vec<PotentialResponse>) -> Self {
        let n = terms.len();
        CtfQuery { terms, values: vec![None; n] }
    }

    pub fn with_values(terms: Vec<PotentialResponse>, values: Vec<usize>) -> Self {
        CtfQuery { terms, values: values.into_iter().map(Some).collect() }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_valued(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }

    pub fn validate(&self, g: &CausalDiagram) -> Result<()> {
        if self.values.len() != self.terms.len() {
            return Err(Error::InvalidQuery("values and terms differ in length".into()));
        }
        for (t, v) in self.terms.iter().zip(&self.values) {
            t.validate(g)?;
            if let Some(v) = v {
                if *v >= g.domain_size(t.var) {
                    return Err(Error::InvalidValue { var: g.name(t.var).into(), value: v.to_string() });
                }
            }
        }
        Ok(())
    }

    /// Normalizes every term in place, returning the indices that changed.
    pub fn normalize(&mut self, g: &CausalDiagram) -> Vec<usize> {
        let mut changed = Vec::new();
        for (k, t) in self.terms.iter_mut().enumerate() {
            let n = t.normalized(g);
            if n != *t {
                *t = n;
                changed.push(k);
            }
        }
        changed
    }

    pub fn display<'a>(&'a self, g: &'a CausalDiagram) -> QueryDisplay<'a> {
        QueryDisplay { q: self, g }
    }
}

pub struct QueryDisplay<'a> {
    q: &'a CtfQuery,
    g: &'a CausalDiagram,
}

impl fmt::Display for QueryDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P(")?;
        for (k, t) in self.q.terms.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            let value = self.q.values.get(k).copied().flatten();
            write!(f, "{}", TermDisplay { term: t, g: self.g, value })?;
        }
        write!(f, ")")
    }
}

/// Counterfactual ancestors of a query: for each term and each variable `A`
/// in its relevance set, `A` under the term's regime, normalized. Sorted and
/// deduplicated.
pub fn counterfactual_ancestors(query: &CtfQuery, g: &CausalDiagram) -> Vec<PotentialResponse> {
    let mut out = Vec::new();
    for t in &query.terms {
        for a in t.relevant(g) {
            let mut regime: Vec<Intervention> = t.regime.iter().filter(|i| i.var != a).cloned().collect();
            regime.sort();
            out.push(PotentialResponse { var: a, regime }.normalized(g));
        }
    }
    out.sort();
    out.dedup();
    out
}

// ---------------------------------------------------------------------------
// Parser

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Word(&'a str),
    Sym(&'static str),
    End,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> (usize, Tok<'a>) {
        let save = self.pos;
        let t = self.next();
        let r = (t.0, t.1);
        self.pos = save;
        r
    }

    fn next(&mut self) -> (usize, Tok<'a>) {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        if rest.is_empty() {
            return (start, Tok::End);
        }
        if rest.starts_with("->") {
            self.pos += 2;
            return (start, Tok::Sym("->"));
        }
        for s in ["(", ")", "[", "]", "{", "}", ",", "="] {
            if rest.starts_with(s) {
                self.pos += 1;
                return (start, Tok::Sym(s));
            }
        }
        let len: usize = rest
            .chars()
            .take_while(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '′' | '"'))
            .map(char::len_utf8)
            .sum();
        if len == 0 {
            let c = rest.chars().next().unwrap();
            self.pos += c.len_utf8();
            return (start, Tok::Sym("?"));
        }
        self.pos += len;
        (start, Tok::Word(&rest[..len]))
    }
}

struct Parser<'a, 'g> {
    lx: Lexer<'a>,
    g: &'g CausalDiagram,
}

fn perr<T>(pos: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { pos, msg: msg.into() })
}

impl<'a, 'g> Parser<'a, 'g> {
    fn expect(&mut self, sym: &'static str) -> Result<usize> {
        match self.lx.next() {
            (p, Tok::Sym(s)) if s == sym => Ok(p),
            (p, t) => perr(p, format!("expected `{sym}`, found {}", describe(&t))),
        }
    }

    fn word(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lx.next() {
            (p, Tok::Word(w)) => Ok((p, w)),
            (p, t) => perr(p, format!("expected {what}, found {}", describe(&t))),
        }
    }

    fn var(&mut self) -> Result<(usize, VarId)> {
        let (p, w) = self.word("a variable name")?;
        match self.g.id(w) {
            Ok(v) => Ok((p, v)),
            Err(_) => perr(p, format!("unknown variable `{w}`")),
        }
    }

    fn value(&mut self, var: VarId) -> Result<usize> {
        let (p, w) = self.word("a value")?;
        match self.g.value_index(var, w) {
            Ok(v) => Ok(v),
            Err(_) => perr(p, format!("`{w}` is not in the domain of `{}` {:?}", self.g.name(var), self.g.domain(var))),
        }
    }

    fn term(&mut self) -> Result<(PotentialResponse, Option<usize>)> {
        let (tpos, v) = self.var()?;
        let mut regime = Vec::new();
        if let (_, Tok::Sym("[")) = self.lx.peek() {
            self.lx.next();
            loop {
                let (apos, x) = self.var()?;
                if x == v {
                    return perr(apos, format!("self-intervention on `{}`", self.g.name(v)));
                }
                self.expect("=")?;
                let val = self.value(x)?;
                let mut targets = None;
                if let (_, Tok::Sym("->")) = self.lx.peek() {
                    self.lx.next();
                    let mut set = VarSet::EMPTY;
                    if let (_, Tok::Sym("{")) = self.lx.peek() {
                        self.lx.next();
                        loop {
                            let (_, c) = self.var()?;
                            set.insert(c);
                            match self.lx.next() {
                                (_, Tok::Sym(",")) => continue,
                                (_, Tok::Sym("}")) => break,
                                (p, t) => return perr(p, format!("expected `,` or `}}`, found {}", describe(&t))),
                            }
                        }
                    } else {
                        let (_, c) = self.var()?;
                        set.insert(c);
                    }
                    targets = Some(set);
                }
                regime.push(Intervention { var: x, value: val, targets });
                match self.lx.next() {
                    (_, Tok::Sym(",")) => continue,
                    (_, Tok::Sym("]")) => break,
                    (p, t) => return perr(p, format!("expected `,` or `]`, found {}", describe(&t))),
                }
            }
        }
        let mut value = None;
        if let (_, Tok::Sym("=")) = self.lx.peek() {
            self.lx.next();
            value = Some(self.value(v)?);
        }
        let term = PotentialResponse::new(v, regime);
        if let Err(e) = term.validate(self.g) {
            return perr(tpos, e.to_string());
        }
        Ok((term, value))
    }
}

fn describe(t: &Tok<'_>) -> String {
    match t {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::End => "end of input".into(),
    }
}

/// Parses `P(term, ...)` against a diagram. Positions in errors are byte
/// offsets into `text`.
pub fn parse_query(text: &str, g: &CausalDiagram) -> Result<CtfQuery> {
    let mut p = Parser { lx: Lexer { src: text, pos: 0 }, g };
    match p.lx.next() {
        (_, Tok::Word("P")) => {}
        (pos, t) => return perr(pos, format!("expected `P(`, found {}", describe(&t))),
    }
    p.expect("(")?;
    let mut q = CtfQuery::default();
    if let (_, Tok::Sym(")")) = p.lx.peek() {
        p.lx.next();
    } else {
        loop {
            let (t, v) = p.term()?;
            q.terms.push(t);
            q.values.push(v);
            match p.lx.next() {
                (_, Tok::Sym(",")) => continue,
                (_, Tok::Sym(")")) => break,
                (pos, t) => return perr(pos, format!("expected `,` or `)`, found {}", describe(&t))),
            }
        }
    }
    match p.lx.next() {
        (_, Tok::End) => {}
        (pos, t) => return perr(pos, format!("trailing input {}", describe(&t))),
    }
    if q.values.iter().any(Option::is_some) && !q.is_valued() {
        return Err(Error::InvalidQuery("either every term carries a value or none does".into()));
    }
    Ok(q)
}

/// Parses a single term such as `Y[X=1->Y]`.
pub fn parse_term(text: &str, g: &CausalDiagram) -> Result<PotentialResponse> {
    let q = parse_query(&format!("P({text})"), g).map_err(|e| match e {
        Error::Parse { pos, msg } => Error::Parse { pos: pos.saturating_sub(2), msg },
        e => e,
    })?;
    match q.terms.len() {
        1 => Ok(q.terms.into_iter().next().unwrap()),
        _ => Err(Error::Parse { pos: 0, msg: "expected exactly one term".into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> CausalDiagram {
        CausalDiagram::binary(
            &["T", "X", "A", "W", "Z"],
            &[("T", "A"), ("A", "W"), ("A", "Z"), ("X", "Z")],
            &[("W", "Z")],
        )
        .unwrap()
    }

    fn mab() -> CausalDiagram {
        CausalDiagram::binary(
            &["Z", "X", "D", "Y"],
            &[("Z", "X"), ("Z", "D"), ("Z", "Y"), ("X", "D"), ("X", "Y"), ("D", "Y")],
            &[("X", "D"), ("X", "Y"), ("D", "Y")],
        )
        .unwrap()
    }

    #[test]
    fn parses_ett_and_roundtrips() {
        let g = mab();
        let q = parse_query("P(Y[X=1], X)", &g).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q.terms[0].regime, vec![Intervention::full(1, 1)]);
        assert!(q.terms[1].is_natural());
        assert_eq!(q.display(&g).to_string(), "P(Y[X=1], X)");
    }

    #[test]
    fn parses_path_restricted() {
        let g = mab();
        let q = parse_query("P(Y[X=1->Y], X, D[X=0->D])", &g).unwrap();
        assert_eq!(q.terms[0].regime[0].targets, Some(VarSet::singleton(3)));
        assert_eq!(q.display(&g).to_string(), "P(Y[X=1->Y], X, D[X=0->D])");
        let q = parse_query("P(Y[X=1->{D,Y}]=0)", &g).unwrap();
        assert_eq!(q.values, vec![Some(0)]);
        assert_eq!(q.display(&g).to_string(), "P(Y[X=1->{D,Y}]=0)");
    }

    #[test]
    fn rejects_self_intervention_with_position() {
        let g = mab();
        match parse_query("P(Y[Y=1])", &g) {
            Err(Error::Parse { pos, msg }) => {
                assert_eq!(pos, 4);
                assert!(msg.contains("self-intervention"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_domain_and_syntax_errors() {
        let g = mab();
        assert!(matches!(parse_query("P(Y[X=5])", &g), Err(Error::Parse { pos: 6, .. })));
        assert!(matches!(parse_query("P(Q)", &g), Err(Error::Parse { pos: 2, .. })));
        assert!(matches!(parse_query("P(Y[X=1]", &g), Err(Error::Parse { pos: 8, .. })));
        assert!(matches!(parse_query("P(Y[X=1->Z])", &g), Err(Error::Parse { .. })));
        assert!(parse_query("P()", &g).unwrap().is_empty());
        assert!(matches!(parse_query("P(Y[X=1]=1, X)", &g), Err(Error::InvalidQuery(_))));
    }

    #[test]
    fn cf_ancestors_of_g1_example() {
        let g = g1();
        let q = parse_query("P(Z[X=0], W[T=0])", &g).unwrap();
        let an: Vec<String> = counterfactual_ancestors(&q, &g).iter().map(|t| t.display(&g).to_string()).collect();
        assert_eq!(an, vec!["T", "A", "A[T=0]", "W[T=0]", "Z[X=0]"]);
    }

    #[test]
    fn normalization_drops_irrelevant_subscripts() {
        let g = g1();
        let t = parse_term("W[X=1, T=0]", &g).unwrap();
        assert_eq!(t.normalized(&g).display(&g).to_string(), "W[T=0]");
        let bow = CausalDiagram::binary(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).unwrap();
        let t = parse_term("Y[X=1->Y]", &bow).unwrap();
        assert_eq!(t.normalized(&bow).display(&bow).to_string(), "Y[X=1]");
    }

    #[test]
    fn unsubscripted_ancestors_are_graph_ancestors() {
        let g = g1();
        let q = parse_query("P(Z)", &g).unwrap();
        let an: VarSet = counterfactual_ancestors(&q, &g).iter().map(|t| t.var).collect();
        assert_eq!(an, g.ancestors("Z").unwrap());
    }
}
