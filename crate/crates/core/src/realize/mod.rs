//! Deciding whether a counterfactual distribution can be sampled physically.
//!
//! [`ctf_realize`] walks the diagram in topological order and, for every
//! variable `V` and every query term, records which randomization of `V`
//! each relevant child must receive (a fixed value or the natural value).
//! Two terms asking for incompatible treatment of the same action make the
//! query not realizable; otherwise the collected tags form a
//! [`RealizationPlan`] that the simulator can execute.

mod action;
mod criterion;
mod expanded;

use std::fmt;

pub use action::{maximal_action_set, Action, ActionDisplay, ActionSet};
pub use criterion::{conflict_matrix, realizable_by_criterion, term_signatures, CriterionResult};
pub use expanded::{
    ctf_procedures, environment_actions, verify_counterfactual_mediator, ExpandedDiagram, Mediator, MediatorReport,
};

use crate::diagram::CausalDiagram;
use crate::error::{Error, Result};
use crate::query::{CtfQuery, PotentialResponse};
use crate::varset::{VarId, VarSet};

/// Requirement attached to an action: perform it with a given value, or do
/// not perform it so that children receive the natural value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Value(usize),
    Natural,
}

impl Tag {
    pub fn display<'a>(&'a self, g: &'a CausalDiagram, var: VarId) -> String {
        match self {
            Tag::Value(v) => g.value_name(var, *v).to_string(),
            Tag::Natural => "Natural".into(),
        }
    }
}

/// Why a query failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FailureKind {
    /// A fixed input needs the smallest covering CtfRand, already tagged otherwise.
    CtfRandValueClash,
    /// A fixed input falls back to Rand, already tagged otherwise.
    RandValueClash,
    /// A fixed input has neither a covering CtfRand nor Rand available.
    NoAction,
    /// A query term reads a variable whose mechanism must be erased by Rand.
    RandomizedOutput,
    /// A natural input is covered by a CtfRand that already carries a value.
    CtfRandNaturalClash,
    /// A natural input would be overwritten by a Rand that carries a value.
    RandNaturalClash,
    /// A query term needs a Read that is not available.
    ReadUnavailable,
}

/// Structured explanation of a failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub kind: FailureKind,
    /// The variable whose interventions clash.
    pub var: VarId,
    /// The child whose input triggered the clash, when applicable.
    pub child: Option<VarId>,
    pub action: Option<Action>,
    /// Tag already on the action and the term index that placed it.
    pub existing: Option<(Tag, usize)>,
    /// Tag requested by the failing term and that term's index.
    pub requested: (Tag, usize),
}

impl Witness {
    /// Indices of the query terms involved, earlier one first.
    pub fn terms(&self) -> (Option<usize>, usize) {
        (self.existing.map(|e| e.1), self.requested.1)
    }

    pub fn describe(&self, g: &CausalDiagram, query: &CtfQuery) -> String {
        let term = |i: usize| format!("#{i} {}", query.terms[i].display(g));
        let action = self.action.map(|a| a.display(g).to_string()).unwrap_or_else(|| "-".into());
        let v = self.var;
        match self.kind {
            FailureKind::NoAction => format!(
                "no action can fix {} as an input to {} for term {}",
                g.name(v),
                self.child.map(|c| g.name(c)).unwrap_or("?"),
                term(self.requested.1)
            ),
            FailureKind::ReadUnavailable => {
                format!("Read({}) is unavailable for term {}", g.name(v), term(self.requested.1))
            }
            FailureKind::RandomizedOutput => format!(
                "{} is tagged {} by term {}, which erases {} needed by term {}",
                action,
                self.existing.map(|e| e.0.display(g, v)).unwrap_or_default(),
                self.existing.map(|e| term(e.1)).unwrap_or_default(),
                g.name(v),
                term(self.requested.1)
            ),
            _ => format!(
                "conflict at {} on {}: tagged {} by term {} but term {} requires {}",
                g.name(v),
                action,
                self.existing.map(|e| e.0.display(g, v)).unwrap_or_default(),
                self.existing.map(|e| term(e.1)).unwrap_or_default(),
                term(self.requested.1),
                self.requested.0.display(g, v)
            ),
        }
    }
}

/// Tags collected for the interventions on one variable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InterventionTracker {
    pub var: VarId,
    ctf: Vec<Option<(Tag, usize)>>,
    rand: Option<(Tag, usize)>,
}

impl InterventionTracker {
    pub fn new(var: VarId, actions: &ActionSet) -> Self {
        let mut t = InterventionTracker::default();
        t.reset(var, actions);
        t
    }

    fn reset(&mut self, var: VarId, actions: &ActionSet) {
        self.var = var;
        self.ctf.clear();
        self.ctf.resize(actions.ctf_sets(var).len(), None);
        self.rand = None;
    }

    pub fn rand_tag(&self) -> Option<Tag> {
        self.rand.map(|t| t.0)
    }

    /// `(action, tag, term index)` for every tagged action.
    pub fn entries(&self, actions: &ActionSet) -> Vec<(Action, Tag, usize)> {
        let mut out = Vec::new();
        if let Some((t, k)) = self.rand {
            out.push((Action::Rand(self.var), t, k));
        }
        for (s, tag) in actions.ctf_sets(self.var).iter().zip(&self.ctf) {
            if let Some((t, k)) = tag {
                out.push((Action::CtfRand(self.var, *s), *t, *k));
            }
        }
        out
    }

    pub fn get(&self, actions: &ActionSet, action: &Action) -> Option<Tag> {
        match *action {
            Action::Rand(v) if v == self.var => self.rand_tag(),
            Action::CtfRand(v, s) if v == self.var => {
                let i = actions.ctf_sets(v).iter().position(|x| *x == s)?;
                self.ctf[i].map(|t| t.0)
            }
            _ => None,
        }
    }
}

/// Work counters for complexity checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RealizeStats {
    /// (variable, term, child) triples inspected.
    pub child_checks: u64,
    /// (variable, term) pairs visited.
    pub term_visits: u64,
}

#[inline]
fn compatible_core(
    tracker: &mut InterventionTracker,
    k: usize,
    term: &PotentialResponse,
    relevant: VarSet,
    g: &CausalDiagram,
    a: &ActionSet,
    stats: &mut RealizeStats,
) -> std::result::Result<(), Witness> {
    let v = tracker.var;
    let sets = a.ctf_sets(v);
    for c in g.children_of(v).intersection(relevant) {
        stats.child_checks += 1;
        match term.edge_value(v, c) {
            Some(x) => {
                let want = Tag::Value(x);
                if let Some(i) = sets.iter().position(|s| s.contains(c)) {
                    match tracker.ctf[i] {
                        Some((t, j)) if t != want => {
                            return Err(Witness {
                                kind: FailureKind::CtfRandValueClash,
                                var: v,
                                child: Some(c),
                                action: Some(Action::CtfRand(v, sets[i])),
                                existing: Some((t, j)),
                                requested: (want, k),
                            })
                        }
                        Some(_) => {}
                        None => tracker.ctf[i] = Some((want, k)),
                    }
                } else {
                    match tracker.rand {
                        Some((t, j)) if t != want => {
                            return Err(Witness {
                                kind: FailureKind::RandValueClash,
                                var: v,
                                child: Some(c),
                                action: Some(Action::Rand(v)),
                                existing: Some((t, j)),
                                requested: (want, k),
                            })
                        }
                        Some(_) => {}
                        None if !a.has_rand(v) => {
                            return Err(Witness {
                                kind: FailureKind::NoAction,
                                var: v,
                                child: Some(c),
                                action: None,
                                existing: None,
                                requested: (want, k),
                            })
                        }
                        None => tracker.rand = Some((want, k)),
                    }
                }
            }
            None => {
                for (i, s) in sets.iter().enumerate() {
                    if !s.contains(c) {
                        continue;
                    }
                    match tracker.ctf[i] {
                        Some((t @ Tag::Value(_), j)) => {
                            return Err(Witness {
                                kind: FailureKind::CtfRandNaturalClash,
                                var: v,
                                child: Some(c),
                                action: Some(Action::CtfRand(v, *s)),
                                existing: Some((t, j)),
                                requested: (Tag::Natural, k),
                            })
                        }
                        Some(_) => {}
                        None => tracker.ctf[i] = Some((Tag::Natural, k)),
                    }
                }
                match tracker.rand {
                    Some((t @ Tag::Value(_), j)) => {
                        return Err(Witness {
                            kind: FailureKind::RandNaturalClash,
                            var: v,
                            child: Some(c),
                            action: Some(Action::Rand(v)),
                            existing: Some((t, j)),
                            requested: (Tag::Natural, k),
                        })
                    }
                    Some(_) => {}
                    None if a.has_rand(v) => tracker.rand = Some((Tag::Natural, k)),
                    None => {}
                }
            }
        }
    }
    Ok(())
}

/// Updates `tracker` (for variable `tracker.var`) with the requirements of
/// term number `k`, or reports the first clash.
pub fn compatible(
    tracker: &mut InterventionTracker,
    k: usize,
    term: &PotentialResponse,
    g: &CausalDiagram,
    a: &ActionSet,
) -> std::result::Result<(), Witness> {
    let mut stats = RealizeStats::default();
    compatible_core(tracker, k, term, term.relevant(g), g, a, &mut stats)
}

/// Reusable buffers for [`decide`].
#[derive(Clone, Debug, Default)]
pub struct RealizeScratch {
    relevant: Vec<VarSet>,
    tracker: InterventionTracker,
}

/// Allocation-free decision core. `on_step` sees each variable's final
/// tracker before the next variable is processed.
pub fn decide(
    terms: &[PotentialResponse],
    g: &CausalDiagram,
    a: &ActionSet,
    scratch: &mut RealizeScratch,
    stats: &mut RealizeStats,
    mut on_step: impl FnMut(&InterventionTracker),
) -> std::result::Result<(), Witness> {
    scratch.relevant.clear();
    scratch.relevant.extend(terms.iter().map(|t| t.relevant(g)));
    let tracker = &mut scratch.tracker;
    for &v in g.topological_order() {
        tracker.reset(v, a);
        let ch = g.children_of(v);
        for (k, term) in terms.iter().enumerate() {
            let rel = scratch.relevant[k];
            if term.var == v || !ch.intersects(rel) {
                continue;
            }
            stats.term_visits += 1;
            compatible_core(tracker, k, term, rel, g, a, stats)?;
        }
        for (k, term) in terms.iter().enumerate() {
            if term.var != v {
                continue;
            }
            if !a.has_read(v) {
                return Err(Witness {
                    kind: FailureKind::ReadUnavailable,
                    var: v,
                    child: None,
                    action: Some(Action::Read(v)),
                    existing: None,
                    requested: (Tag::Natural, k),
                });
            }
            if let Some((t @ Tag::Value(_), j)) = tracker.rand {
                return Err(Witness {
                    kind: FailureKind::RandomizedOutput,
                    var: v,
                    child: None,
                    action: Some(Action::Rand(v)),
                    existing: Some((t, j)),
                    requested: (Tag::Natural, k),
                });
            }
        }
        on_step(tracker);
    }
    Ok(())
}

/// Interventions and reads scheduled at one variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub var: VarId,
    /// Every tagged action of `var`. Value tags are performed and the unit is
    /// rejected unless the device produces that value; Natural tags mark
    /// actions that must not be performed.
    pub interventions: Vec<(Action, Tag)>,
    /// Query term indices that read `var` at this step.
    pub reads: Vec<usize>,
}

/// Notable plan properties worth surfacing to the user.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanFlag {
    /// `Rand(var)` must not be performed while a CtfRand of `var` carries a value.
    NaturalRandWithValueCtfRand { var: VarId },
}

/// A schedule drawing one sample of the query per accepted unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RealizationPlan {
    pub steps: Vec<PlanStep>,
    /// Variable read for each query term.
    pub outputs: Vec<VarId>,
    pub flags: Vec<PlanFlag>,
    /// Terms whose regime was simplified before reporting.
    pub normalized_terms: Vec<usize>,
}

impl RealizationPlan {
    /// Value-tagged actions in schedule order.
    pub fn randomizations(&self) -> impl Iterator<Item = (Action, usize)> + '_ {
        self.steps.iter().flat_map(|s| {
            s.interventions.iter().filter_map(|(a, t)| match t {
                Tag::Value(v) => Some((*a, *v)),
                Tag::Natural => None,
            })
        })
    }

    /// Acceptance probability when every device is uniform.
    pub fn uniform_acceptance(&self, g: &CausalDiagram) -> f64 {
        self.randomizations().map(|(a, _)| 1.0 / g.domain_size(a.var().unwrap()) as f64).product()
    }

    pub fn describe(&self, g: &CausalDiagram, query: &CtfQuery) -> String {
        use fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "Select a unit");
        for step in &self.steps {
            for (a, t) in &step.interventions {
                match t {
                    Tag::Value(v) => {
                        let _ = writeln!(
                            s,
                            "{}: perform {} and reject unless it draws {}",
                            g.name(step.var),
                            a.display(g),
                            g.value_name(step.var, *v)
                        );
                    }
                    Tag::Natural => {
                        let _ = writeln!(s, "{}: leave {} unperformed", g.name(step.var), a.display(g));
                    }
                }
            }
            for &k in &step.reads {
                let _ = writeln!(
                    s,
                    "{}: Read({}) -> output #{k} {}",
                    g.name(step.var),
                    g.name(step.var),
                    query.terms[k].display(g)
                );
            }
        }
        for f in &self.flags {
            match f {
                PlanFlag::NaturalRandWithValueCtfRand { var } => {
                    let _ = writeln!(
                        s,
                        "note: Rand({0}) stays unperformed while a CtfRand of {0} carries a value",
                        g.name(*var)
                    );
                }
            }
        }
        s
    }
}

/// Outcome of [`ctf_realize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Realizable(RealizationPlan),
    NotRealizable(Witness),
}

impl Verdict {
    pub fn is_realizable(&self) -> bool {
        matches!(self, Verdict::Realizable(_))
    }

    pub fn plan(&self) -> Option<&RealizationPlan> {
        match self {
            Verdict::Realizable(p) => Some(p),
            Verdict::NotRealizable(_) => None,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Realizable(_) => None,
            Verdict::NotRealizable(w) => Some(w),
        }
    }
}

fn check_inputs(query: &CtfQuery, g: &CausalDiagram, a: &ActionSet) -> Result<()> {
    query.validate(g)?;
    if a.var_count() != g.len() {
        return Err(Error::InvalidAction("action set was built for a different diagram".into()));
    }
    Ok(())
}

/// Decides realizability of `query` given the diagram and feasible actions.
pub fn ctf_realize(query: &CtfQuery, g: &CausalDiagram, a: &ActionSet) -> Result<Verdict> {
    ctf_realize_with_stats(query, g, a).map(|(v, _)| v)
}

pub fn ctf_realize_with_stats(query: &CtfQuery, g: &CausalDiagram, a: &ActionSet) -> Result<(Verdict, RealizeStats)> {
    check_inputs(query, g, a)?;
    let normalized_terms: Vec<usize> =
        query.terms.iter().enumerate().filter(|(_, t)| t.normalized(g) != **t).map(|(k, _)| k).collect();
    for &k in &normalized_terms {
        log::warn!("term #{k} {} simplified to {}", query.terms[k].display(g), query.terms[k].normalized(g).display(g));
    }
    let mut scratch = RealizeScratch::default();
    let mut stats = RealizeStats::default();
    let mut steps = Vec::new();
    let mut flags = Vec::new();
    let res = decide(&query.terms, g, a, &mut scratch, &mut stats, |tr| {
        let entries = tr.entries(a);
        let interventions: Vec<(Action, Tag)> = entries.iter().map(|e| (e.0, e.1)).collect();
        if tr.rand_tag() == Some(Tag::Natural)
            && interventions.iter().any(|(a, t)| matches!(a, Action::CtfRand(..)) && matches!(t, Tag::Value(_)))
        {
            flags.push(PlanFlag::NaturalRandWithValueCtfRand { var: tr.var });
        }
        let reads: Vec<usize> =
            query.terms.iter().enumerate().filter(|(_, t)| t.var == tr.var).map(|(k, _)| k).collect();
        if !interventions.is_empty() || !reads.is_empty() {
            steps.push(PlanStep { var: tr.var, interventions, reads });
        }
    });
    let verdict = match res {
        Ok(()) => Verdict::Realizable(RealizationPlan {
            steps,
            outputs: query.terms.iter().map(|t| t.var).collect(),
            flags,
            normalized_terms,
        }),
        Err(w) => Verdict::NotRealizable(w),
    };
    Ok((verdict, stats))
}
