use std::fmt;

use crate::diagram::CausalDiagram;
use crate::error::{Error, Result};
use crate::varset::{VarId, VarSet};

/// A physical action an agent may perform on a unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Select,
    Read(VarId),
    /// Fisherian randomization: erases the mechanism of the variable.
    Rand(VarId),
    /// Counterfactual randomization of the variable as an input to `targets` only.
    CtfRand(VarId, VarSet),
}

impl Action {
    pub fn var(&self) -> Option<VarId> {
        match *self {
            Action::Select => None,
            Action::Read(v) | Action::Rand(v) | Action::CtfRand(v, _) => Some(v),
        }
    }

    pub fn display<'a>(&'a self, g: &'a CausalDiagram) -> ActionDisplay<'a> {
        ActionDisplay { a: self, g }
    }
}

pub struct ActionDisplay<'a> {
    a: &'a Action,
    g: &'a CausalDiagram,
}

impl fmt::Display for ActionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.g;
        match *self.a {
            Action::Select => write!(f, "Select"),
            Action::Read(v) => write!(f, "Read({})", g.name(v)),
            Action::Rand(v) => write!(f, "Rand({})", g.name(v)),
            Action::CtfRand(v, t) => write!(f, "CtfRand({}->{{{}}})", g.name(v), g.names_of(t).join(",")),
        }
    }
}

/// A validated set of feasible actions over one diagram.
///
/// Counterfactual randomization sets of one variable are kept sorted by
/// size, so the first set covering a child is the smallest one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSet {
    n: usize,
    select: bool,
    read: VarSet,
    rand: VarSet,
    ctf: Vec<Vec<VarSet>>,
}

impl ActionSet {
    pub fn empty(g: &CausalDiagram) -> Self {
        ActionSet {
            n: g.len(),
            select: false,
            read: VarSet::EMPTY,
            rand: VarSet::EMPTY,
            ctf: vec![Vec::new(); g.len()],
        }
    }

    /// Select and a Read of every variable.
    pub fn reads_only(g: &CausalDiagram) -> Self {
        let mut a = ActionSet::empty(g);
        a.select = true;
        a.read = g.all();
        a
    }

    pub fn new(g: &CausalDiagram, actions: impl IntoIterator<Item = Action>) -> Result<Self> {
        let mut a = ActionSet::empty(g);
        for act in actions {
            a.insert(g, act)?;
        }
        Ok(a)
    }

    /// Adds an action, enforcing target validity and the containment property.
    pub fn insert(&mut self, g: &CausalDiagram, action: Action) -> Result<bool> {
        if let Some(v) = action.var() {
            if v >= g.len() || g.len() != self.n {
                return Err(Error::InvalidAction(format!("variable id {v} outside the diagram")));
            }
        }
        Ok(match action {
            Action::Select => !std::mem::replace(&mut self.select, true),
            Action::Read(v) => self.read.insert(v),
            Action::Rand(v) => self.rand.insert(v),
            Action::CtfRand(v, t) => {
                if t.is_empty() {
                    return Err(Error::InvalidAction(format!("CtfRand of {} with no targets", g.name(v))));
                }
                if !t.is_subset(g.children_of(v)) {
                    return Err(Error::InvalidAction(format!(
                        "CtfRand targets {:?} are not children of {}",
                        g.names_of(t.difference(g.children_of(v))),
                        g.name(v)
                    )));
                }
                let sets = &mut self.ctf[v];
                if sets.contains(&t) {
                    return Ok(false);
                }
                for &s in sets.iter() {
                    if s.intersects(t) && !s.is_subset(t) && !t.is_subset(s) {
                        return Err(Error::Containment {
                            var: g.name(v).into(),
                            first: g.names_of(s),
                            second: g.names_of(t),
                        });
                    }
                }
                sets.push(t);
                sets.sort_by_key(|s| (s.len(), s.bits()));
                true
            }
        })
    }

    pub fn contains(&self, action: &Action) -> bool {
        match *action {
            Action::Select => self.select,
            Action::Read(v) => self.read.contains(v),
            Action::Rand(v) => self.rand.contains(v),
            Action::CtfRand(v, t) => self.ctf.get(v).is_some_and(|s| s.contains(&t)),
        }
    }

    #[inline]
    pub fn has_read(&self, v: VarId) -> bool {
        self.read.contains(v)
    }

    #[inline]
    pub fn has_rand(&self, v: VarId) -> bool {
        self.rand.contains(v)
    }

    /// CtfRand target sets of `v`, smallest first.
    #[inline]
    pub fn ctf_sets(&self, v: VarId) -> &[VarSet] {
        &self.ctf[v]
    }

    pub fn var_count(&self) -> usize {
        self.n
    }

    pub fn union(&self, g: &CausalDiagram, other: &ActionSet) -> Result<ActionSet> {
        ActionSet::new(g, self.to_vec().into_iter().chain(other.to_vec()))
    }

    pub fn to_vec(&self) -> Vec<Action> {
        let mut out = Vec::new();
        if self.select {
            out.push(Action::Select);
        }
        for v in 0..self.n {
            if self.read.contains(v) {
                out.push(Action::Read(v));
            }
            if self.rand.contains(v) {
                out.push(Action::Rand(v));
            }
            for &t in &self.ctf[v] {
                out.push(Action::CtfRand(v, t));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.to_vec().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn display(&self, g: &CausalDiagram) -> String {
        let parts: Vec<String> = self.to_vec().iter().map(|a| a.display(g).to_string()).collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// Parses a comma-separated list such as `Rand(X), CtfRand(X->{Y,Z})`.
    ///
    /// Select and a Read of every variable are always included. The word
    /// `maximal` expands to [`maximal_action_set`].
    pub fn parse(g: &CausalDiagram, text: &str) -> Result<ActionSet> {
        let mut set = ActionSet::reads_only(g);
        let items = split_top_level(text);
        for item in items {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let bad = || Error::InvalidAction(format!("cannot parse action `{item}`"));
            if item.eq_ignore_ascii_case("maximal") {
                set = set.union(g, &maximal_action_set(g))?;
                continue;
            }
            if item == "Select" {
                continue;
            }
            let open = item.find('(').ok_or_else(bad)?;
            if !item.ends_with(')') {
                return Err(bad());
            }
            let head = item[..open].trim();
            let body = item[open + 1..item.len() - 1].trim();
            let action = match head {
                "Read" => Action::Read(g.id(body)?),
                "Rand" => Action::Rand(g.id(body)?),
                "CtfRand" => {
                    let (x, t) = body.split_once("->").ok_or_else(bad)?;
                    let x = g.id(x.trim())?;
                    let t = t.trim();
                    let names: Vec<&str> = match t.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                        Some(inner) => inner.split(',').map(str::trim).filter(|s| !s.is_empty()).collect(),
                        None => vec![t],
                    };
                    Action::CtfRand(x, g.set_of(&names)?)
                }
                _ => return Err(bad()),
            };
            set.insert(g, action)?;
        }
        Ok(set)
    }
}

fn split_top_level(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

/// The maximal feasible action set: Select, every Read, and a
/// counterfactual randomization of each variable towards each single child.
pub fn maximal_action_set(g: &CausalDiagram) -> ActionSet {
    let mut a = ActionSet::reads_only(g);
    for v in 0..g.len() {
        for c in g.children_of(v) {
            a.ctf[v].push(VarSet::singleton(c));
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fan() -> CausalDiagram {
        CausalDiagram::binary(&["X", "Y", "Z", "W"], &[("X", "Y"), ("X", "Z"), ("X", "W")], &[]).unwrap()
    }

    #[test]
    fn containment_is_enforced() {
        let g = fan();
        let mut a = ActionSet::empty(&g);
        a.insert(&g, Action::CtfRand(0, g.set_of(&["Z", "W"]).unwrap())).unwrap();
        a.insert(&g, Action::CtfRand(0, g.set_of(&["Z"]).unwrap())).unwrap();
        let err = a.insert(&g, Action::CtfRand(0, g.set_of(&["Y", "Z"]).unwrap())).unwrap_err();
        assert!(matches!(err, Error::Containment { .. }));
        assert_eq!(a.ctf_sets(0)[0], g.set_of(&["Z"]).unwrap());
    }

    #[test]
    fn targets_must_be_children() {
        let g = fan();
        assert!(ActionSet::new(&g, [Action::CtfRand(1, VarSet::singleton(2))]).is_err());
        assert!(ActionSet::new(&g, [Action::CtfRand(0, VarSet::EMPTY)]).is_err());
    }

    #[test]
    fn maximal_and_parse() {
        let bow = CausalDiagram::binary(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).unwrap();
        let m = maximal_action_set(&bow);
        assert_eq!(m.display(&bow), "{Select, Read(X), CtfRand(X->{Y}), Read(Y)}");
        let p = ActionSet::parse(&bow, "CtfRand(X->Y)").unwrap();
        assert_eq!(p, m);
        let edgeless = CausalDiagram::binary(&["A", "B"], &[], &[]).unwrap();
        assert_eq!(maximal_action_set(&edgeless), ActionSet::reads_only(&edgeless));
        let g = fan();
        let a = ActionSet::parse(&g, "Rand(X), CtfRand(X->{Z,W}), CtfRand(X->Z)").unwrap();
        assert!(a.has_rand(0));
        assert_eq!(a.ctf_sets(0).len(), 2);
    }
}
