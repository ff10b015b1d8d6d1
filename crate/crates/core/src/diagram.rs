//! Causal diagrams: directed acyclic graphs over named finite-domain
//! variables, plus bidirected edges standing for shared latent causes.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::varset::{VarId, VarSet, MAX_VARS};

/// Declaration of one endogenous variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub domain: Vec<String>,
    pub constant: bool,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, domain: &[&str]) -> Self {
        VarDecl { name: name.into(), domain: domain.iter().map(|s| s.to_string()).collect(), constant: false }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, &["0", "1"])
    }

    pub fn constant(name: impl Into<String>, value: &str) -> Self {
        VarDecl { name: name.into(), domain: vec![value.to_string()], constant: true }
    }
}

/// A causal diagram over at most [`MAX_VARS`] variables.
///
/// Immutable after construction. Construction rejects cycles, unknown or
/// duplicated endpoints and self-loops, so every value of this type is a
/// valid acyclic mixed graph.
#[derive(Clone, Debug)]
pub struct CausalDiagram {
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    constant: Vec<bool>,
    parents: Vec<VarSet>,
    children: Vec<VarSet>,
    bidirected: Vec<(VarId, VarId)>,
    index: HashMap<String, VarId>,
    topo: Vec<VarId>,
}

impl PartialEq for CausalDiagram {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.domains == other.domains
            && self.constant == other.constant
            && self.parents == other.parents
            && self.bidirected == other.bidirected
    }
}

impl CausalDiagram {
    pub fn new<S: AsRef<str>>(vars: Vec<VarDecl>, edges: &[(S, S)], bidirected: &[(S, S)]) -> Result<Self> {
        if vars.len() > MAX_VARS {
            return Err(Error::TooManyVariables { got: vars.len(), max: MAX_VARS });
        }
        let mut index = HashMap::new();
        for (i, v) in vars.iter().enumerate() {
            if index.insert(v.name.clone(), i).is_some() {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
            if v.domain.len() < 2 && !(v.constant && v.domain.len() == 1) {
                return Err(Error::DomainTooSmall(v.name.clone()));
            }
            let mut seen = v.domain.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != v.domain.len() {
                return Err(Error::DuplicateDomainValue(v.name.clone()));
            }
        }
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::UnknownVariable(s.to_string()));
        let n = vars.len();
        let mut id_edges = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            id_edges.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        let mut id_bi = Vec::with_capacity(bidirected.len());
        for (a, b) in bidirected {
            id_bi.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        let names: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();
        let domains = vars.iter().map(|v| v.domain.clone()).collect();
        let constant = vars.iter().map(|v| v.constant).collect();
        Self::from_ids(names, domains, constant, &id_edges, &id_bi, index, n)
    }

    fn from_ids(
        names: Vec<String>,
        domains: Vec<Vec<String>>,
        constant: Vec<bool>,
        edges: &[(VarId, VarId)],
        bidirected: &[(VarId, VarId)],
        index: HashMap<String, VarId>,
        n: usize,
    ) -> Result<Self> {
        let mut parents = vec![VarSet::EMPTY; n];
        let mut children = vec![VarSet::EMPTY; n];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::SelfLoop(names[a].clone()));
            }
            if !children[a].insert(b) {
                return Err(Error::DuplicateEdge(names[a].clone(), names[b].clone()));
            }
            parents[b].insert(a);
        }
        let mut bi: Vec<(VarId, VarId)> = Vec::with_capacity(bidirected.len());
        for &(a, b) in bidirected {
            if a == b {
                return Err(Error::SelfLoop(names[a].clone()));
            }
            let e = (a.min(b), a.max(b));
            if bi.contains(&e) {
                return Err(Error::DuplicateEdge(names[e.0].clone(), names[e.1].clone()));
            }
            bi.push(e);
        }
        bi.sort_unstable();
        let topo =
            kahn(&parents, &children).map_err(|rest| Error::Cycle(rest.iter().map(|&v| names[v].clone()).collect()))?;
        Ok(CausalDiagram { names, domains, constant, parents, children, bidirected: bi, index, topo })
    }

    /// Builds a binary-domain diagram from name lists; handy for tests.
    pub fn binary(vars: &[&str], edges: &[(&str, &str)], bidirected: &[(&str, &str)]) -> Result<Self> {
        let decls = vars.iter().map(|v| VarDecl::binary(*v)).collect();
        Self::new(decls, edges, bidirected)
    }

    /// Builds a binary-domain diagram on variables `V0..V{n-1}` from ids.
    pub fn binary_from_ids(n: usize, edges: &[(VarId, VarId)], bidirected: &[(VarId, VarId)]) -> Result<Self> {
        let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
        let index = names.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let domains = vec![vec!["0".to_string(), "1".to_string()]; n];
        Self::from_ids(names, domains, vec![false; n], edges, bidirected, index, n)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn all(&self) -> VarSet {
        (0..self.len()).collect()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Result<VarId> {
        self.index.get(name).copied().ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Resolves a list of names into a set, rejecting duplicates.
    pub fn set_of<S: AsRef<str>>(&self, names: &[S]) -> Result<VarSet> {
        let mut s = VarSet::EMPTY;
        for n in names {
            let id = self.id(n.as_ref())?;
            if !s.insert(id) {
                return Err(Error::DuplicateVariable(n.as_ref().to_string()));
            }
        }
        Ok(s)
    }

    pub fn names_of(&self, set: VarSet) -> Vec<String> {
        set.iter().map(|v| self.names[v].clone()).collect()
    }

    pub fn domain(&self, v: VarId) -> &[String] {
        &self.domains[v]
    }

    pub fn domain_size(&self, v: VarId) -> usize {
        self.domains[v].len()
    }

    pub fn is_constant(&self, v: VarId) -> bool {
        self.constant[v]
    }

    pub fn value_index(&self, v: VarId, value: &str) -> Result<usize> {
        self.domains[v]
            .iter()
            .position(|d| d == value)
            .ok_or_else(|| Error::InvalidValue { var: self.names[v].clone(), value: value.to_string() })
    }

    pub fn value_name(&self, v: VarId, value: usize) -> &str {
        &self.domains[v][value]
    }

    #[inline]
    pub fn parents_of(&self, v: VarId) -> VarSet {
        self.parents[v]
    }

    #[inline]
    pub fn children_of(&self, v: VarId) -> VarSet {
        self.children[v]
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.children[a].contains(b)
    }

    pub fn has_bidirected(&self, a: VarId, b: VarId) -> bool {
        self.bidirected.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn directed_edges(&self) -> Vec<(VarId, VarId)> {
        let mut out = Vec::new();
        for a in 0..self.len() {
            for b in self.children[a] {
                out.push((a, b));
            }
        }
        out
    }

    pub fn bidirected_edges(&self) -> &[(VarId, VarId)] {
        &self.bidirected
    }

    /// Direct children of `v` by name.
    pub fn children(&self, v: &str) -> Result<VarSet> {
        Ok(self.children[self.id(v)?])
    }

    pub fn parents(&self, v: &str) -> Result<VarSet> {
        Ok(self.parents[self.id(v)?])
    }

    /// Ancestors of `v`, including `v` itself.
    pub fn ancestors(&self, v: &str) -> Result<VarSet> {
        Ok(self.ancestors_of(VarSet::singleton(self.id(v)?)))
    }

    /// Descendants of `v`, including `v` itself.
    pub fn descendants(&self, v: &str) -> Result<VarSet> {
        Ok(self.descendants_of(VarSet::singleton(self.id(v)?)))
    }

    pub fn ancestors_of(&self, set: VarSet) -> VarSet {
        closure(set, &self.parents)
    }

    pub fn descendants_of(&self, set: VarSet) -> VarSet {
        closure(set, &self.children)
    }

    /// Deterministic topological order; ties go to the earlier-declared variable.
    pub fn topological_order(&self) -> &[VarId] {
        &self.topo
    }

    /// Removes edges into `cut_into` (directed and bidirected) and directed
    /// edges out of `cut_out_of`. The receiver is left untouched.
    pub fn mutilate(&self, cut_into: VarSet, cut_out_of: VarSet) -> CausalDiagram {
        let mut g = self.clone();
        for v in 0..g.len() {
            if cut_into.contains(v) {
                for p in g.parents[v] {
                    g.children[p].remove(v);
                }
                g.parents[v] = VarSet::EMPTY;
            }
            if cut_out_of.contains(v) {
                for c in g.children[v] {
                    g.parents[c].remove(v);
                }
                g.children[v] = VarSet::EMPTY;
            }
        }
        g.bidirected.retain(|&(a, b)| !cut_into.contains(a) && !cut_into.contains(b));
        g.topo = kahn(&g.parents, &g.children).expect("removing edges keeps a DAG acyclic");
        g
    }

    /// Name-based form of [`CausalDiagram::mutilate`].
    pub fn mutilate_names<S: AsRef<str>>(&self, cut_into: &[S], cut_out_of: &[S]) -> Result<CausalDiagram> {
        Ok(self.mutilate(self.set_of(cut_into)?, self.set_of(cut_out_of)?))
    }

    /// A diagram with the same structure and permuted variable ids;
    /// `perm[old] = new`.
    pub fn relabel(&self, perm: &[VarId]) -> CausalDiagram {
        let n = self.len();
        let mut names = vec![String::new(); n];
        let mut domains = vec![Vec::new(); n];
        let mut constant = vec![false; n];
        for old in 0..n {
            names[perm[old]] = self.names[old].clone();
            domains[perm[old]] = self.domains[old].clone();
            constant[perm[old]] = self.constant[old];
        }
        let edges: Vec<_> = self.directed_edges().into_iter().map(|(a, b)| (perm[a], perm[b])).collect();
        let bi: Vec<_> = self.bidirected.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let index = names.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Self::from_ids(names, domains, constant, &edges, &bi, index, n).expect("relabelling preserves validity")
    }
}

fn closure(seed: VarSet, step: &[VarSet]) -> VarSet {
    let mut out = seed;
    let mut frontier = seed;
    while let Some(v) = frontier.first() {
        frontier.remove(v);
        let new = step[v].difference(out);
        out = out.union(new);
        frontier = frontier.union(new);
    }
    out
}

fn kahn(parents: &[VarSet], children: &[VarSet]) -> std::result::Result<Vec<VarId>, Vec<VarId>> {
    let n = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut ready: VarSet = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.first() {
        ready.remove(v);
        order.push(v);
        for c in children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        let placed: VarSet = order.iter().copied().collect();
        Err((0..n).filter(|v| !placed.contains(*v)).collect())
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

    #[test]
    fn construction_errors() {
        assert!(matches!(CausalDiagram::binary(&["A", "B"], &[("A", "B"), ("B", "A")], &[]), Err(Error::Cycle(_))));
        assert!(matches!(CausalDiagram::binary(&["A"], &[("A", "A")], &[]), Err(Error::SelfLoop(_))));
        assert!(matches!(CausalDiagram::binary(&["A"], &[("A", "B")], &[]), Err(Error::UnknownVariable(_))));
        assert!(matches!(CausalDiagram::binary(&["A", "A"], &[], &[]), Err(Error::DuplicateVariable(_))));
        assert!(matches!(
            CausalDiagram::new(vec![VarDecl::new("A", &["0"])], &[] as &[(&str, &str)], &[]),
            Err(Error::DomainTooSmall(_))
        ));
        assert!(CausalDiagram::new(vec![VarDecl::constant("A", "0")], &[] as &[(&str, &str)], &[]).is_ok());
    }

    #[test]
    fn g1_children_and_ancestors() {
        let g = g1();
        assert_eq!(g.names_of(g.children("T").unwrap()), vec!["A"]);
        assert_eq!(g.names_of(g.ancestors("W").unwrap()), vec!["T", "A", "W"]);
        assert!(g.children("Q").is_err());
    }

    #[test]
    fn cycle_reports_members() {
        let err = CausalDiagram::binary(&["A", "B", "C"], &[("A", "B"), ("B", "C"), ("C", "B")], &[]).unwrap_err();
        assert_eq!(err, Error::Cycle(vec!["B".into(), "C".into()]));
    }

    #[test]
    fn topo_tie_break_is_declaration_order() {
        let g = g1();
        let order: Vec<_> = g.topological_order().iter().map(|&v| g.name(v)).collect();
        assert_eq!(order, vec!["T", "X", "A", "W", "Z"]);
        let g2 =
            CausalDiagram::binary(&["X", "T", "A", "W", "Z"], &[("T", "A"), ("A", "W"), ("A", "Z"), ("X", "Z")], &[])
                .unwrap();
        let order: Vec<_> = g2.topological_order().iter().map(|&v| g2.name(v)).collect();
        assert_eq!(order, vec!["X", "T", "A", "W", "Z"]);
    }

    #[test]
    fn mutilate_isolates() {
        let g = g1();
        let m = g.mutilate_names(&["T"], &["T"]).unwrap();
        let t = g.id("T").unwrap();
        assert!(m.children_of(t).is_empty() && m.parents_of(t).is_empty());
        assert_eq!(m.directed_edges().len(), 3);
        assert_eq!(g.directed_edges().len(), 4);
        let same = g.mutilate(VarSet::EMPTY, VarSet::EMPTY);
        assert_eq!(same, g);
    }

    #[test]
    fn mutilate_drops_bidirected_into_cut() {
        let g = g1();
        let m = g.mutilate_names(&["W"], &[] as &[&str]).unwrap();
        assert!(m.bidirected_edges().is_empty());
        let m = g.mutilate_names(&[] as &[&str], &["W"]).unwrap();
        assert_eq!(m.bidirected_edges().len(), 1);
    }
}
