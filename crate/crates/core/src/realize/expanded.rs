use crate::diagram::{CausalDiagram, VarDecl};
use crate::engine::regime_values;
use crate::error::{Error, Result};
use crate::query::{Intervention, PotentialResponse};
use crate::realize::{Action, ActionSet};
use crate::scm::{ExpandedSpec, ScmModel};
use crate::varset::{VarId, VarSet};

/// A counterfactual mediator, with ids in the expanded diagram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mediator {
    pub node: VarId,
    pub of: VarId,
    /// Base children of `of` that perceive it through this mediator.
    pub served: VarSet,
    pub invertible: bool,
    pub randomizable: bool,
}

/// An expanded diagram together with its projection onto base variables.
#[derive(Clone, Debug)]
pub struct ExpandedDiagram {
    full: CausalDiagram,
    base: CausalDiagram,
    mediators: Vec<Mediator>,
    elicit_natural: VarSet,
    randomizable: VarSet,
    to_base: Vec<Option<VarId>>,
}

impl ExpandedDiagram {
    /// Validates the tree structure and projects the mediators out.
    pub fn new(full: CausalDiagram, spec: &ExpandedSpec) -> Result<Self> {
        let g = &full;
        let mut of = vec![None; g.len()];
        for m in &spec.mediators {
            if m.node >= g.len() || m.of >= g.len() || m.node == m.of {
                return Err(Error::TreeStructure("mediator annotation out of range".into()));
            }
            if of[m.node].replace(m.of).is_some() {
                return Err(Error::TreeStructure(format!("{} is annotated twice", g.name(m.node))));
            }
        }
        for m in &spec.mediators {
            if of[m.of].is_some() {
                return Err(Error::TreeStructure(format!(
                    "{} is itself a mediator and cannot have mediators",
                    g.name(m.of)
                )));
            }
            let pa = g.parents_of(m.node);
            if pa.len() != 1 {
                return Err(Error::TreeStructure(format!("mediator {} has {} parents", g.name(m.node), pa.len())));
            }
            let mut p = pa.first().unwrap();
            while let Some(root) = of[p] {
                if root != m.of {
                    return Err(Error::TreeStructure(format!(
                        "mediator {} of {} descends from mediator {} of {}",
                        g.name(m.node),
                        g.name(m.of),
                        g.name(p),
                        g.name(root)
                    )));
                }
                let pp = g.parents_of(p);
                if pp.len() != 1 {
                    return Err(Error::TreeStructure(format!("mediator {} has {} parents", g.name(p), pp.len())));
                }
                p = pp.first().unwrap();
            }
            if p != m.of {
                return Err(Error::NoForks {
                    mediator: g.name(m.node).into(),
                    var: g.name(m.of).into(),
                    via: g.name(p).into(),
                });
            }
            for c in g.children_of(m.node) {
                if let Some(r) = of[c] {
                    if r != m.of {
                        return Err(Error::TreeStructure(format!(
                            "mediator {} feeds mediator {} of another variable",
                            g.name(m.node),
                            g.name(c)
                        )));
                    }
                }
            }
        }
        let is_med: VarSet = spec.mediators.iter().map(|m| m.node).collect();
        let base_ids: Vec<VarId> = (0..g.len()).filter(|v| !is_med.contains(*v)).collect();
        let mut to_base = vec![None; g.len()];
        for (i, &v) in base_ids.iter().enumerate() {
            to_base[v] = Some(i);
        }
        for v in 0..g.len() {
            if is_med.contains(v) {
                continue;
            }
            for x in 0..g.len() {
                let count = g.parents_of(v).iter().filter(|&p| of[p] == Some(x)).count();
                if count > 1 {
                    return Err(Error::TreeStructure(format!(
                        "{} perceives {} through {} mediators",
                        g.name(v),
                        g.name(x),
                        count
                    )));
                }
            }
        }
        let subtree = |w: VarId| -> VarSet {
            let mut seen = VarSet::singleton(w);
            let mut stack = vec![w];
            while let Some(n) = stack.pop() {
                for c in g.children_of(n).intersection(is_med) {
                    if seen.insert(c) {
                        stack.push(c);
                    }
                }
            }
            seen
        };
        let mut mediators = Vec::new();
        for m in &spec.mediators {
            let mut served = VarSet::EMPTY;
            for n in subtree(m.node) {
                served = served.union(g.children_of(n).difference(is_med));
            }
            mediators.push(Mediator {
                node: m.node,
                of: m.of,
                served,
                invertible: m.invertible,
                randomizable: m.randomizable,
            });
        }
        let decls: Vec<VarDecl> = base_ids
            .iter()
            .map(|&v| VarDecl { name: g.name(v).into(), domain: g.domain(v).to_vec(), constant: g.is_constant(v) })
            .collect();
        let mut edges: Vec<(String, String)> = Vec::new();
        for (a, b) in g.directed_edges() {
            let (src, dst) = match (of[a], is_med.contains(b)) {
                (_, true) => continue,
                (Some(x), false) => (x, b),
                (None, false) => (a, b),
            };
            let e = (g.name(src).to_string(), g.name(dst).to_string());
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        let bidirected: Vec<(String, String)> = g
            .bidirected_edges()
            .iter()
            .filter(|(a, b)| !is_med.contains(*a) && !is_med.contains(*b))
            .map(|&(a, b)| (g.name(a).to_string(), g.name(b).to_string()))
            .collect();
        let base = CausalDiagram::new(decls, &edges, &bidirected)?;
        let map = |s: VarSet| -> VarSet { s.iter().filter_map(|v| to_base[v]).collect() };
        Ok(ExpandedDiagram {
            elicit_natural: map(spec.elicit_natural),
            randomizable: map(spec.randomizable),
            full,
            base,
            mediators,
            to_base,
        })
    }

    pub fn full(&self) -> &CausalDiagram {
        &self.full
    }

    pub fn base(&self) -> &CausalDiagram {
        &self.base
    }

    pub fn mediators(&self) -> &[Mediator] {
        &self.mediators
    }

    /// Base id of an expanded-diagram variable, `None` for mediators.
    pub fn to_base(&self, v: VarId) -> Option<VarId> {
        self.to_base[v]
    }

    pub fn from_base(&self, b: VarId) -> VarId {
        self.to_base.iter().position(|x| *x == Some(b)).expect("base id in range")
    }

    pub fn elicit_natural(&self) -> VarSet {
        self.elicit_natural
    }

    pub fn randomizable(&self) -> VarSet {
        self.randomizable
    }
}

/// Counterfactual randomizations of base variable `x` the environment supports.
pub fn ctf_procedures(exp: &ExpandedDiagram, x: VarId) -> Result<ActionSet> {
    let base = &exp.base;
    if x >= base.len() {
        return Err(Error::InvalidAction(format!("variable id {x} outside the base diagram")));
    }
    let mut out = ActionSet::empty(base);
    let children = base.children_of(x);
    if exp.elicit_natural.contains(x) && exp.randomizable.contains(x) && !children.is_empty() {
        out.insert(base, Action::CtfRand(x, children))?;
    }
    let full_x = exp.from_base(x);
    for m in exp.mediators.iter().filter(|m| m.of == full_x) {
        if !(m.invertible && m.randomizable) {
            log::info!("mediator {} of {} is not usable for randomization", exp.full.name(m.node), base.name(x));
            continue;
        }
        let served: VarSet = m.served.iter().filter_map(|v| exp.to_base[v]).collect();
        out.insert(base, Action::CtfRand(x, served))?;
    }
    Ok(out)
}

/// Every action of the environment over the base diagram: Select, all Reads,
/// Rand of each randomizable variable and all counterfactual procedures.
pub fn environment_actions(exp: &ExpandedDiagram) -> Result<ActionSet> {
    let base = &exp.base;
    let mut a = ActionSet::reads_only(base);
    for v in exp.randomizable {
        a.insert(base, Action::Rand(v))?;
    }
    for x in 0..base.len() {
        for act in ctf_procedures(exp, x)?.to_vec() {
            a.insert(base, act)?;
        }
    }
    Ok(a)
}

/// Enumeration-based check of the counterfactual-mediator conditions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MediatorReport {
    /// The mechanism of the mediator reads exactly the decision variable and
    /// distinct decision values never produce a common mediator value.
    pub invertible: bool,
    /// The outcome mechanism depends on the mediator only through its class.
    pub class_respecting: bool,
    /// `Y_{w,a}(u) = Y_{x,a}(u)` for every exogenous state, every assignment
    /// `a` of the other parents and every `w` in the class of `x`.
    pub proxy_equality: bool,
    /// Mediator value to decision value, `None` outside every image.
    pub classes: Vec<Option<usize>>,
}

impl MediatorReport {
    pub fn is_mediator(&self) -> bool {
        self.invertible && self.class_respecting && self.proxy_equality
    }
}

pub fn verify_counterfactual_mediator(model: &ScmModel, w: VarId, x: VarId, y: VarId) -> Result<MediatorReport> {
    let g = model.diagram();
    for v in [w, x, y] {
        if v >= g.len() {
            return Err(Error::InvalidQuery(format!("unknown variable id {v}")));
        }
    }
    let fw = model.mechanism(w);
    let mut classes: Vec<Option<usize>> = vec![None; g.domain_size(w)];
    let mut invertible = fw.inputs == [x];
    if invertible {
        for (row, &out) in fw.table.iter().enumerate() {
            let (inp, _) = fw.decode_row(row);
            match classes[out] {
                Some(c) if c != inp[0] => invertible = false,
                _ => classes[out] = Some(inp[0]),
            }
        }
    }
    let fy = model.mechanism(y);
    let mut class_respecting = invertible;
    if let Some(wpos) = fy.inputs.iter().position(|&i| i == w) {
        if invertible {
            for (row, &out) in fy.table.iter().enumerate() {
                let (mut inp, ex) = fy.decode_row(row);
                let Some(c) = classes[inp[wpos]] else { continue };
                for (w2, c2) in classes.iter().enumerate() {
                    if *c2 == Some(c) {
                        inp[wpos] = w2;
                        if fy.table[fy.encode_row(&inp, &ex)] != out {
                            class_respecting = false;
                        }
                    }
                }
            }
        }
    } else {
        class_respecting = false;
    }
    let others: Vec<VarId> = g.parents_of(y).iter().filter(|&p| p != w && p != x).collect();
    let mut proxy_equality = invertible;
    if invertible {
        let radix: Vec<usize> = others.iter().map(|&v| g.domain_size(v)).collect();
        let combos: usize = radix.iter().product();
        'outer: for (u, _) in model.support() {
            for combo in 0..combos {
                let mut c = combo;
                let mut a_regime = Vec::with_capacity(others.len());
                for (k, &v) in others.iter().enumerate().rev() {
                    a_regime.push(Intervention::full(v, c % radix[k]));
                    c /= radix[k];
                }
                for xv in 0..g.domain_size(x) {
                    let mut rx = a_regime.clone();
                    rx.push(Intervention::full(x, xv));
                    let yx = regime_values(model, u, &PotentialResponse::new(y, rx))?[y];
                    for (wv, cls) in classes.iter().enumerate() {
                        if *cls != Some(xv) {
                            continue;
                        }
                        let mut rw = a_regime.clone();
                        rw.push(Intervention::full(w, wv));
                        if regime_values(model, u, &PotentialResponse::new(y, rw))?[y] != yx {
                            proxy_equality = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    Ok(MediatorReport { invertible, class_respecting, proxy_equality, classes })
}
