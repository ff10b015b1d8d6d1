//! Unit-level simulation of physical actions against a hidden model.
//!
//! Each selected unit carries its exogenous state and a status per
//! mechanism. Mechanisms fire lazily when a read needs them and never fire
//! twice; randomizations must happen before the mechanisms they affect fire.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::query::PotentialResponse;
use crate::realize::{Action, ActionSet, RealizationPlan, Tag};
use crate::rng;
use crate::scm::ScmModel;
use crate::varset::{VarId, VarSet};

/// Default cap on rejected units per accepted sample.
pub const DEFAULT_MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismStatus {
    Unfired,
    Fired,
    /// Replaced by a randomized constant.
    Erased,
}

/// Distribution used to draw a randomized value.
#[derive(Clone, Debug, PartialEq)]
pub enum RandomDevice {
    Uniform,
    /// Weights over the domain; every value must have positive weight.
    Weighted(Vec<f64>),
    /// Always the given value, turning a randomization into a write.
    Constant(usize),
}

impl RandomDevice {
    pub fn draw<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<usize> {
        match self {
            RandomDevice::Uniform => Ok(rng.random_range(0..size)),
            RandomDevice::Weighted(w) => {
                if w.len() != size || w.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
                    return Err(Error::InvalidAction("device weights must cover the domain with positive mass".into()));
                }
                let wi = WeightedIndex::new(w).map_err(|e| Error::InvalidAction(e.to_string()))?;
                Ok(wi.sample(rng))
            }
            RandomDevice::Constant(v) => {
                if *v >= size {
                    return Err(Error::InvalidAction(format!("constant device value {v} outside the domain")));
                }
                Ok(*v)
            }
        }
    }
}

/// A model together with the environment's feasible actions.
pub struct Population<'m> {
    model: &'m ScmModel,
    actions: Option<ActionSet>,
    sampler: WeightedIndex<f64>,
}

impl<'m> Population<'m> {
    /// A population where every action is permitted.
    pub fn new(model: &'m ScmModel) -> Result<Self> {
        let sampler = WeightedIndex::new(model.support_weights())
            .map_err(|e| Error::InvalidModel(format!("exogenous distribution: {e}")))?;
        Ok(Population { model, actions: None, sampler })
    }

    /// A population that rejects actions outside `actions`.
    pub fn with_actions(model: &'m ScmModel, actions: ActionSet) -> Result<Self> {
        let mut p = Population::new(model)?;
        if actions.var_count() != model.diagram().len() {
            return Err(Error::InvalidAction("action set was built for a different diagram".into()));
        }
        p.actions = Some(actions);
        Ok(p)
    }

    pub fn model(&self) -> &'m ScmModel {
        self.model
    }

    /// Draws a fresh unit.
    pub fn select<R: Rng + ?Sized>(&self, id: u64, rng: &mut R) -> UnitState<'_> {
        let u = self.model.support_state(self.sampler.sample(rng)).to_vec();
        self.unit_with(id, u)
    }

    /// A unit with a chosen exogenous state, for exhaustive checks.
    pub fn unit_with(&self, id: u64, u: Vec<usize>) -> UnitState<'_> {
        let n = self.model.diagram().len();
        UnitState {
            pop: self,
            id,
            u,
            status: vec![MechanismStatus::Unfired; n],
            values: vec![None; n],
            fire_count: vec![0; n],
            ctf: vec![Vec::new(); n],
        }
    }
}

/// One selected unit.
pub struct UnitState<'p> {
    pop: &'p Population<'p>,
    pub id: u64,
    u: Vec<usize>,
    status: Vec<MechanismStatus>,
    values: Vec<Option<usize>>,
    fire_count: Vec<u32>,
    /// Performed CtfRand actions per source variable, as `(targets, value)`.
    ctf: Vec<Vec<(VarSet, usize)>>,
}

impl<'p> UnitState<'p> {
    /// The hidden exogenous state. Agents never see it; harnesses do.
    pub fn reveal_exogenous(&self) -> &[usize] {
        &self.u
    }

    pub fn status(&self, v: VarId) -> MechanismStatus {
        self.status[v]
    }

    pub fn fire_count(&self, v: VarId) -> u32 {
        self.fire_count[v]
    }

    fn permit(&self, action: Action) -> Result<()> {
        match &self.pop.actions {
            Some(a) if !a.contains(&action) => {
                Err(Error::ActionUnavailable(action.display(self.pop.model.diagram()).to_string()))
            }
            _ => Ok(()),
        }
    }

    /// Input value seen by `child` on the edge from `parent`.
    fn input(&mut self, parent: VarId, child: VarId) -> Result<usize> {
        let mut best: Option<(usize, usize)> = None;
        for &(t, v) in &self.ctf[parent] {
            if t.contains(child) && best.map_or(true, |(len, _)| t.len() < len) {
                best = Some((t.len(), v));
            }
        }
        match best {
            Some((_, v)) => Ok(v),
            None => self.fire(parent),
        }
    }

    fn fire(&mut self, v: VarId) -> Result<usize> {
        if let Some(x) = self.values[v] {
            return Ok(x);
        }
        if self.fire_count[v] > 0 {
            return Err(Error::Fce(format!("mechanism of {} would fire twice", self.pop.model.diagram().name(v))));
        }
        let model = self.pop.model;
        let m = model.mechanism(v);
        let mut inputs = Vec::with_capacity(m.inputs.len());
        for &p in &m.inputs {
            inputs.push(self.input(p, v)?);
        }
        let x = m.eval(inputs.into_iter(), &self.u);
        self.fire_count[v] += 1;
        self.status[v] = MechanismStatus::Fired;
        self.values[v] = Some(x);
        Ok(x)
    }

    /// Measures `v`, firing whatever mechanisms it needs.
    pub fn read(&mut self, v: VarId) -> Result<usize> {
        self.check_var(v)?;
        self.permit(Action::Read(v))?;
        self.fire(v)
    }

    /// Erases the mechanism of `x` and fixes `x` to a drawn value.
    pub fn rand<R: Rng + ?Sized>(&mut self, x: VarId, device: &RandomDevice, rng: &mut R) -> Result<usize> {
        self.check_var(x)?;
        self.permit(Action::Rand(x))?;
        let name = self.pop.model.diagram().name(x);
        match self.status[x] {
            MechanismStatus::Fired => return Err(Error::Fce(format!("mechanism of {name} already fired"))),
            MechanismStatus::Erased => return Err(Error::Fce(format!("{name} already randomized"))),
            MechanismStatus::Unfired => {}
        }
        let v = device.draw(self.pop.model.diagram().domain_size(x), rng)?;
        self.status[x] = MechanismStatus::Erased;
        self.values[x] = Some(v);
        Ok(v)
    }

    /// Fixes `x` as an input to `targets` only, leaving the natural `x` intact.
    pub fn ctf_rand<R: Rng + ?Sized>(
        &mut self,
        x: VarId,
        targets: VarSet,
        device: &RandomDevice,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_var(x)?;
        let g = self.pop.model.diagram();
        if targets.is_empty() || !targets.is_subset(g.children_of(x)) {
            return Err(Error::InvalidAction(format!(
                "CtfRand targets {:?} must be nonempty children of {}",
                g.names_of(targets),
                g.name(x)
            )));
        }
        self.permit(Action::CtfRand(x, targets))?;
        for c in targets {
            if self.status[c] != MechanismStatus::Unfired {
                return Err(Error::Fce(format!("target {} of CtfRand({}) is no longer unfired", g.name(c), g.name(x))));
            }
        }
        for &(t, _) in &self.ctf[x] {
            if t == targets {
                return Err(Error::Fce(format!("CtfRand({}->{:?}) performed twice", g.name(x), g.names_of(t))));
            }
            if t.intersects(targets) && !t.is_subset(targets) && !targets.is_subset(t) {
                return Err(Error::Containment {
                    var: g.name(x).into(),
                    first: g.names_of(t),
                    second: g.names_of(targets),
                });
            }
        }
        let v = device.draw(g.domain_size(x), rng)?;
        self.ctf[x].push((targets, v));
        Ok(v)
    }

    fn check_var(&self, v: VarId) -> Result<()> {
        if v >= self.values.len() {
            return Err(Error::InvalidAction(format!("variable id {v} outside the model")));
        }
        Ok(())
    }
}

/// Rows drawn for a list of query terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleBatch {
    pub terms: Vec<PotentialResponse>,
    pub rows: Vec<Vec<usize>>,
    pub rejected: u64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        let total = self.rows.len() as f64 + self.rejected as f64;
        if total == 0.0 {
            0.0
        } else {
            self.rows.len() as f64 / total
        }
    }

    /// Relative frequency of each observed row.
    pub fn empirical(&self) -> BTreeMap<Vec<usize>, f64> {
        let mut m = BTreeMap::new();
        let n = self.rows.len() as f64;
        for r in &self.rows {
            *m.entry(r.clone()).or_insert(0.0) += 1.0 / n;
        }
        m
    }
}

/// One accepted unit's output, with the number of units discarded before it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRow {
    pub values: Vec<usize>,
    pub rejections: u64,
}

/// Runs the plan on fresh units until one passes every rejection check.
pub fn execute_plan<R: Rng + ?Sized>(
    plan: &RealizationPlan,
    pop: &Population<'_>,
    rng: &mut R,
    max_rejections: u64,
) -> Result<SampleRow> {
    let mut rejections = 0u64;
    let mut out = vec![0usize; plan.outputs.len()];
    'unit: loop {
        let mut unit = pop.select(rejections, rng);
        for step in &plan.steps {
            for (action, tag) in &step.interventions {
                let Tag::Value(want) = *tag else { continue };
                let got = match *action {
                    Action::Rand(x) => unit.rand(x, &RandomDevice::Uniform, rng)?,
                    Action::CtfRand(x, t) => unit.ctf_rand(x, t, &RandomDevice::Uniform, rng)?,
                    _ => return Err(Error::InvalidAction("plan schedules a non-randomizing action".into())),
                };
                if got != want {
                    rejections += 1;
                    if rejections > max_rejections {
                        return Err(Error::MaxRejections {
                            rejections,
                            acceptance: plan.uniform_acceptance(pop.model().diagram()),
                        });
                    }
                    continue 'unit;
                }
            }
            for &k in &step.reads {
                out[k] = unit.read(step.var)?;
            }
        }
        return Ok(SampleRow { values: out, rejections });
    }
}

/// Draws `n` samples; sample `i` uses substream `i` of `seed`.
pub fn sample_plan(
    plan: &RealizationPlan,
    terms: &[PotentialResponse],
    pop: &Population<'_>,
    n: usize,
    seed: u64,
    max_rejections: u64,
) -> Result<SampleBatch> {
    let rows: Vec<SampleRow> = (0..n as u64)
        .into_par_iter()
        .map(|i| execute_plan(plan, pop, &mut rng::stream(seed, &[i]), max_rejections))
        .collect::<Result<_>>()?;
    let rejected = rows.iter().map(|r| r.rejections).sum();
    Ok(SampleBatch { terms: terms.to_vec(), rows: rows.into_iter().map(|r| r.values).collect(), rejected })
}

/// Empirical frequency of the event `column = value` for all given pairs.
pub fn estimate(batch: &SampleBatch, event: &[(usize, usize)]) -> Result<f64> {
    if batch.rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for &(c, _) in event {
        if c >= batch.terms.len() {
            return Err(Error::InvalidQuery(format!("event column {c} out of range")));
        }
    }
    let hits = batch.rows.iter().filter(|r| event.iter().all(|&(c, v)| r[c] == v)).count();
    Ok(hits as f64 / batch.rows.len() as f64)
}
