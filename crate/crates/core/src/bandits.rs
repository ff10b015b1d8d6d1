//! Causal bandits over the four-variable template `Z -> X -> {D, Y}`,
//! with `Z -> Y` and arbitrary confounding.
//!
//! Strategies are ordered by how much of the counterfactual structure they
//! use: `obs` does nothing, `int` writes `X`, `ett` chooses the input to `Y`
//! after seeing the natural `X`, and `opt` additionally probes `D` under a
//! chosen input before choosing. Exact values come from enumerating the
//! exogenous support; the learning algorithms act on simulated units through
//! [`crate::sim::UnitState`] and never see exogenous state.
//!
//! Regret is measured per round as the gap between the optimal strategy and
//! the executed arm, both evaluated conditionally on the unit's full potential
//! context `(z, x', D_{x''} for every x'')`. The learner's choice is a function
//! of that context and of its own independent randomness, so the expected sum
//! of these gaps is the usual pseudo-regret against the optimal value.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::eval_potential_response;
use crate::error::{Error, Result};
use crate::query::{CtfQuery, Intervention, PotentialResponse};
use crate::realize::{ctf_realize, Action, ActionSet, RealizationPlan, Verdict};
use crate::rng;
use crate::scm::ScmModel;
use crate::sim::{Population, RandomDevice};
use crate::varset::{VarId, VarSet};

/// Largest Π5 enumeration `brute_force_optimal` will attempt.
pub const BRUTE_FORCE_CAP: u128 = 1 << 24;
/// Length of the trailing window used for terminal-reward summaries.
pub const TERMINAL_WINDOW: usize = 500;
const OPTIMAL_TOL: f64 = 1e-9;
const MAX_FULL_CONTEXTS: usize = 1 << 20;

/// Exact per-unit quantities over the exogenous support.
#[derive(Clone, Debug)]
struct UnitTable {
    w: Vec<f64>,
    /// Context index `z * nx + x'`.
    c2: Vec<usize>,
    /// `D_{x''}` for each `x''`.
    d: Vec<Vec<usize>>,
    /// `Y_x` for each `x`.
    y: Vec<Vec<f64>>,
    full_key: Vec<usize>,
}

/// A bandit problem on the template diagram.
#[derive(Clone, Debug)]
pub struct MabProblem {
    model: ScmModel,
    pub x: VarId,
    pub d: VarId,
    pub y: VarId,
    pub z: Option<VarId>,
    pub horizon: usize,
    pub epochs: usize,
    nx: usize,
    nd: usize,
    nz: usize,
    actions: ActionSet,
    table: UnitTable,
    support_index: HashMap<Vec<usize>, usize>,
    optimal: Strategy,
    optimum: f64,
    q_full: Vec<f64>,
    v_full: Vec<f64>,
}

impl MabProblem {
    /// Wraps a model whose variables are named `X`, `D`, `Y` and optionally `Z`.
    pub fn new(model: ScmModel) -> Result<Self> {
        let g = model.diagram();
        let lookup = |name: &str| g.names().iter().position(|n| n == name);
        let need = |name: &str| lookup(name).ok_or_else(|| Error::Template(format!("missing variable {name}")));
        let (x, d, y) = (need("X")?, need("D")?, need("Y")?);
        let z = lookup("Z");
        let expected = 3 + usize::from(z.is_some());
        if g.len() != expected {
            return Err(Error::Template(format!("expected {expected} variables, found {}", g.len())));
        }
        let mut allowed = vec![(x, y), (x, d)];
        if let Some(z) = z {
            allowed.extend([(z, x), (z, y)]);
        }
        for e in g.directed_edges() {
            if !allowed.contains(&e) {
                return Err(Error::Template(format!("edge {} -> {} is not in the template", g.name(e.0), g.name(e.1))));
            }
        }
        if !g.has_edge(x, y) || !g.has_edge(x, d) {
            return Err(Error::Template("the template needs X -> Y and X -> D".into()));
        }
        if g.domain_size(y) != 2 {
            return Err(Error::Template("reward Y must be binary".into()));
        }
        let nx = g.domain_size(x);
        let nd = g.domain_size(d);
        let nz = z.map_or(1, |z| g.domain_size(z));
        let d_radix = checked_pow(nd, nx)
            .filter(|r| r * nz * nx <= MAX_FULL_CONTEXTS)
            .ok_or_else(|| Error::Template("domains too large for exact context enumeration".into()))?;

        let mut actions = ActionSet::reads_only(g);
        actions.insert(g, Action::Rand(x))?;
        actions.insert(g, Action::CtfRand(x, VarSet::singleton(y)))?;
        actions.insert(g, Action::CtfRand(x, VarSet::singleton(d)))?;

        let d_terms: Vec<_> = (0..nx).map(|v| PotentialResponse::new(d, vec![Intervention::full(x, v)])).collect();
        let y_terms: Vec<_> = (0..nx).map(|v| PotentialResponse::new(y, vec![Intervention::full(x, v)])).collect();
        let mut table = UnitTable { w: vec![], c2: vec![], d: vec![], y: vec![], full_key: vec![] };
        let mut support_index = HashMap::new();
        for (i, (u, w)) in model.support().enumerate() {
            let vals = model.forward(u);
            let c2 = z.map_or(0, |z| vals[z]) * nx + vals[x];
            let dv = d_terms.iter().map(|t| eval_potential_response(&model, u, t)).collect::<Result<Vec<_>>>()?;
            let yv = y_terms
                .iter()
                .map(|t| eval_potential_response(&model, u, t).map(|v| v as f64))
                .collect::<Result<Vec<_>>>()?;
            let digits = dv.iter().rev().fold(0, |acc, &v| acc * nd + v);
            table.full_key.push(c2 * d_radix + digits);
            table.w.push(w);
            table.c2.push(c2);
            table.d.push(dv);
            table.y.push(yv);
            support_index.insert(u.to_vec(), i);
        }

        let mut p = MabProblem {
            model,
            x,
            d,
            y,
            z,
            horizon: 2000,
            epochs: 200,
            nx,
            nd,
            nz,
            actions,
            table,
            support_index,
            optimal: Strategy::Observe,
            optimum: 0.0,
            q_full: vec![],
            v_full: vec![],
        };
        p.optimal = p.tier_strategy(StrategyTier::Opt);
        p.optimum = p.value_unchecked(&p.optimal);
        p.build_full_context_tables(d_radix);
        Ok(p)
    }

    pub fn with_horizon(mut self, horizon: usize, epochs: usize) -> Self {
        self.horizon = horizon;
        self.epochs = epochs;
        self
    }

    pub fn model(&self) -> &ScmModel {
        &self.model
    }

    /// Read everything, randomize `X`, and ctf-randomize `X` into `Y` or `D`.
    pub fn environment_actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn x_size(&self) -> usize {
        self.nx
    }

    pub fn d_size(&self) -> usize {
        self.nd
    }

    pub fn z_size(&self) -> usize {
        self.nz
    }

    /// Number of `(z, x')` contexts.
    pub fn contexts(&self) -> usize {
        self.nz * self.nx
    }

    /// The optimal strategy and its value.
    pub fn optimum(&self) -> (&Strategy, f64) {
        (&self.optimal, self.optimum)
    }

    fn build_full_context_tables(&mut self, d_radix: usize) {
        let n = self.contexts() * d_radix;
        let mut mass = vec![0.0; n];
        let mut q = vec![0.0; n * self.nx];
        for i in 0..self.table.w.len() {
            let k = self.table.full_key[i];
            mass[k] += self.table.w[i];
            for x in 0..self.nx {
                q[k * self.nx + x] += self.table.w[i] * self.table.y[i][x];
            }
        }
        for k in 0..n {
            if mass[k] > 0.0 {
                for x in 0..self.nx {
                    q[k * self.nx + x] /= mass[k];
                }
            }
        }
        let Strategy::Opt { d_arm, y_arm } = &self.optimal else { unreachable!("opt tier yields an Opt strategy") };
        let v = (0..n)
            .map(|k| {
                let c2 = k / d_radix;
                let x2 = d_arm[c2];
                let dv = (k % d_radix) / self.nd.pow(x2 as u32) % self.nd;
                q[k * self.nx + y_arm[c2 * self.nd + dv]]
            })
            .collect();
        self.q_full = q;
        self.v_full = v;
    }

    /// `(optimal value, chosen-arm value)` given the unit's full context.
    fn round_values(&self, u: &[usize], x: usize) -> (f64, f64) {
        let i = self.support_index[u];
        let k = self.table.full_key[i];
        (self.v_full[k], self.q_full[k * self.nx + x])
    }

    /// Mass `Σ w · Y_x` over units in context `c2` with `D_{x''} = d`.
    fn opt_cells(&self) -> Vec<f64> {
        let (nx, nd) = (self.nx, self.nd);
        let mut m = vec![0.0; self.contexts() * nx * nd * nx];
        for i in 0..self.table.w.len() {
            for x2 in 0..nx {
                let base = ((self.table.c2[i] * nx + x2) * nd + self.table.d[i][x2]) * nx;
                for x in 0..nx {
                    m[base + x] += self.table.w[i] * self.table.y[i][x];
                }
            }
        }
        m
    }

    /// Best strategy within a tier, computed in closed form.
    pub fn tier_strategy(&self, tier: StrategyTier) -> Strategy {
        let (nx, nd, nc) = (self.nx, self.nd, self.contexts());
        let t = &self.table;
        match tier {
            StrategyTier::Obs => Strategy::Observe,
            StrategyTier::Int => {
                let vals: Vec<f64> = (0..nx).map(|x| (0..t.w.len()).map(|i| t.w[i] * t.y[i][x]).sum()).collect();
                Strategy::Write(argmax(&vals))
            }
            StrategyTier::Ett | StrategyTier::Aug => {
                let mut m = vec![0.0; nc * nx];
                for i in 0..t.w.len() {
                    for x in 0..nx {
                        m[t.c2[i] * nx + x] += t.w[i] * t.y[i][x];
                    }
                }
                Strategy::Ett((0..nc).map(|c| argmax(&m[c * nx..(c + 1) * nx])).collect())
            }
            StrategyTier::Opt => {
                let m = self.opt_cells();
                let cell = |c: usize, x2: usize, d: usize| &m[((c * nx + x2) * nd + d) * nx..][..nx];
                let mut d_arm = vec![0; nc];
                let mut y_arm = vec![0; nc * nd];
                for c in 0..nc {
                    let scores: Vec<f64> = (0..nx)
                        .map(|x2| (0..nd).map(|d| cell(c, x2, d).iter().copied().fold(f64::MIN, f64::max)).sum())
                        .collect();
                    d_arm[c] = argmax(&scores);
                    for d in 0..nd {
                        y_arm[c * nd + d] = argmax(cell(c, d_arm[c], d));
                    }
                }
                Strategy::Opt { d_arm, y_arm }
            }
        }
    }

    fn value_unchecked(&self, s: &Strategy) -> f64 {
        let t = &self.table;
        let nx = self.nx;
        (0..t.w.len())
            .map(|i| {
                let x = match s {
                    Strategy::Observe => t.c2[i] % nx,
                    Strategy::Write(x) => *x,
                    Strategy::Ett(m) => m[t.c2[i]],
                    Strategy::Opt { d_arm, y_arm } => {
                        let c = t.c2[i];
                        y_arm[c * self.nd + t.d[i][d_arm[c]]]
                    }
                };
                t.w[i] * t.y[i][x]
            })
            .sum()
    }

    fn term(&self, var: VarId, x: Option<usize>) -> PotentialResponse {
        match x {
            Some(v) => PotentialResponse::new(var, vec![Intervention::full(self.x, v)]),
            None => PotentialResponse::natural(var),
        }
    }

    fn with_context(&self, mut terms: Vec<PotentialResponse>) -> CtfQuery {
        if let Some(z) = self.z {
            terms.push(PotentialResponse::natural(z));
        }
        CtfQuery::new(terms)
    }

    /// Sampling distributions a strategy must be able to draw from, one per
    /// distinct action it takes on a reachable context.
    pub fn strategy_queries(&self, s: &Strategy) -> Vec<CtfQuery> {
        let t = &self.table;
        let reachable = |c: usize| t.c2.iter().zip(&t.w).any(|(&ci, &w)| ci == c && w > 0.0);
        let mut pairs: Vec<(Option<usize>, Option<usize>)> = Vec::new();
        match s {
            Strategy::Observe => {
                return vec![self.with_context(vec![self.term(self.y, None), self.term(self.x, None)])];
            }
            Strategy::Write(x) => return vec![self.with_context(vec![self.term(self.y, Some(*x))])],
            Strategy::Ett(m) => {
                for c in (0..self.contexts()).filter(|&c| reachable(c)) {
                    pairs.push((Some(m[c]), None));
                }
            }
            Strategy::Opt { d_arm, y_arm } => {
                for c in (0..self.contexts()).filter(|&c| reachable(c)) {
                    for d in 0..self.nd {
                        pairs.push((Some(y_arm[c * self.nd + d]), Some(d_arm[c])));
                    }
                }
            }
        }
        pairs.sort();
        pairs.dedup();
        pairs
            .into_iter()
            .map(|(xy, xd)| {
                let mut terms = vec![self.term(self.y, xy), self.term(self.x, None)];
                if xd.is_some() {
                    terms.push(self.term(self.d, xd));
                }
                self.with_context(terms)
            })
            .collect()
    }

    /// Plan for drawing from a strategy's sampling distribution, or an
    /// error naming why it cannot be drawn.
    pub fn check_context(&self, query: &CtfQuery) -> Result<RealizationPlan> {
        let g = self.model.diagram();
        match ctf_realize(query, g, &self.actions)? {
            Verdict::Realizable(plan) => Ok(plan),
            Verdict::NotRealizable(w) => {
                Err(Error::UnrealizableStrategy(format!("{}: {}", query.display(g), w.describe(g, query))))
            }
        }
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// The strategy tiers compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTier {
    Obs,
    Int,
    Ett,
    Opt,
    /// Contextual learner that treats the probe of `D` as plain context. Its
    /// exact value coincides with `Ett`.
    Aug,
}

/// A deterministic decision strategy. Context indices are `z * |X| + x'`,
/// and `(z, x', d)` contexts are `(z * |X| + x') * |D| + d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// No action: the unit's natural reward.
    Observe,
    /// `Write(X := x)` on every unit.
    Write(usize),
    /// Per `(z, x')`, the input written into `Y`.
    Ett(Vec<usize>),
    /// Per `(z, x')` the input written into `D`, then per `(z, x', d)` the
    /// input written into `Y`.
    Opt { d_arm: Vec<usize>, y_arm: Vec<usize> },
}

/// Expected reward of `strategy`, after checking that every context it uses
/// can be sampled in this environment.
pub fn evaluate_strategy_exact(problem: &MabProblem, strategy: &Strategy) -> Result<f64> {
    let nx = problem.nx;
    let nc = problem.contexts();
    let bad = |m: &[usize], len: usize| m.len() != len || m.iter().any(|&v| v >= nx);
    let malformed = match strategy {
        Strategy::Observe => false,
        Strategy::Write(x) => *x >= nx,
        Strategy::Ett(m) => bad(m, nc),
        Strategy::Opt { d_arm, y_arm } => bad(d_arm, nc) || bad(y_arm, nc * problem.nd),
    };
    if malformed {
        return Err(Error::Template("strategy does not match the problem's context domains".into()));
    }
    for q in problem.strategy_queries(strategy) {
        problem.check_context(&q)?;
    }
    Ok(problem.value_unchecked(strategy))
}

/// Exhaustive search over strategies that always probe `D` and then write
/// into `Y`: every map `(z, x') -> x''` combined with every map
/// `(z, x', d) -> x`. Returns the first maximizer in enumeration order.
pub fn brute_force_optimal(problem: &MabProblem) -> Result<(Strategy, f64)> {
    let (nx, nd, nc) = (problem.nx, problem.nd, problem.contexts());
    let slots = nc * (1 + nd);
    let count = (nx as u128).checked_pow(slots as u32).filter(|&c| c <= BRUTE_FORCE_CAP);
    if count.is_none() {
        return Err(Error::TooLarge(format!("{nx}^{slots} strategies exceed the brute-force cap")));
    }
    let m = problem.opt_cells();
    let mut digits = vec![0usize; slots];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let (d_arm, y_arm) = digits.split_at(nc);
        let mut v = 0.0;
        for c in 0..nc {
            for d in 0..nd {
                v += m[((c * nx + d_arm[c]) * nd + d) * nx + y_arm[c * nd + d]];
            }
        }
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((digits.clone(), v));
        }
        // Mixed-radix increment, last slot fastest.
        let mut i = slots;
        loop {
            if i == 0 {
                let (digits, v) = best.expect("at least one strategy");
                let (d_arm, y_arm) = digits.split_at(nc);
                return Ok((Strategy::Opt { d_arm: d_arm.to_vec(), y_arm: y_arm.to_vec() }, v));
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < nx {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Optimum over every per-context action set: nothing, `Write(x)`, a write
/// into `Y` alone, or a probe of `D` followed by a per-`d` choice between
/// the natural reward and a write into `Y`. Serves as a cross-check on
/// [`brute_force_optimal`].
pub fn general_optimum(problem: &MabProblem) -> f64 {
    let (nx, nd, nc) = (problem.nx, problem.nd, problem.contexts());
    let t = &problem.table;
    let m = problem.opt_cells();
    let mut by_ctx = vec![0.0; nc * nx];
    for i in 0..t.w.len() {
        for x in 0..nx {
            by_ctx[t.c2[i] * nx + x] += t.w[i] * t.y[i][x];
        }
    }
    (0..nc)
        .map(|c| {
            let natural = by_ctx[c * nx + c % nx];
            let write = by_ctx[c * nx..(c + 1) * nx].iter().copied().fold(f64::MIN, f64::max);
            let probe = (0..nx)
                .map(|x2| {
                    (0..nd)
                        .map(|d| {
                            let cell = &m[((c * nx + x2) * nd + d) * nx..][..nx];
                            cell.iter().copied().fold(f64::MIN, f64::max).max(cell[c % nx])
                        })
                        .sum::<f64>()
                })
                .fold(f64::MIN, f64::max);
            natural.max(write).max(probe)
        })
        .sum()
}

/// Observational conditional means used to hot-start learners.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsTable {
    nx: usize,
    nd: usize,
    /// `E[Y | z, x]`, indexed `z * |X| + x`.
    pub ey_xz: Vec<f64>,
    /// `E[Y | z, x, d]`, indexed `(z * |X| + x) * |D| + d`.
    pub ey_xdz: Vec<f64>,
}

impl ObsTable {
    /// Exact conditional means. Contexts of zero probability get 0.
    pub fn exact(p: &MabProblem) -> Self {
        let t = &p.table;
        let mut rows = Vec::with_capacity(t.w.len());
        for i in 0..t.w.len() {
            let x = t.c2[i] % p.nx;
            rows.push((t.c2[i], t.d[i][x], t.w[i], t.w[i] * t.y[i][x]));
        }
        Self::from_rows(p, rows, 0.0)
    }

    /// Empirical conditional means from `n` passively observed units.
    /// Unseen contexts get 0.5.
    pub fn estimate(p: &MabProblem, n: usize, seed: u64) -> Result<Self> {
        let pop = Population::with_actions(&p.model, p.actions.clone())?;
        let mut r = rng::stream(seed, &[0]);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let mut unit = pop.select(i, &mut r);
            let z = p.z.map_or(Ok(0), |z| unit.read(z))?;
            let x = unit.read(p.x)?;
            let d = unit.read(p.d)?;
            let y = unit.read(p.y)? as f64;
            rows.push((z * p.nx + x, d, 1.0, y));
        }
        Ok(Self::from_rows(p, rows, 0.5))
    }

    fn from_rows(p: &MabProblem, rows: Vec<(usize, usize, f64, f64)>, empty: f64) -> Self {
        let nc = p.contexts();
        let (mut m2, mut s2) = (vec![0.0; nc], vec![0.0; nc]);
        let (mut m3, mut s3) = (vec![0.0; nc * p.nd], vec![0.0; nc * p.nd]);
        for (c, d, w, wy) in rows {
            m2[c] += w;
            s2[c] += wy;
            m3[c * p.nd + d] += w;
            s3[c * p.nd + d] += wy;
        }
        let ratio =
            |s: Vec<f64>, m: Vec<f64>| s.iter().zip(&m).map(|(s, m)| if *m > 0.0 { s / m } else { empty }).collect();
        ObsTable { nx: p.nx, nd: p.nd, ey_xz: ratio(s2, m2), ey_xdz: ratio(s3, m3) }
    }

    pub fn given_xz(&self, z: usize, x: usize) -> f64 {
        self.ey_xz[z * self.nx + x]
    }

    pub fn given_xdz(&self, z: usize, x: usize, d: usize) -> f64 {
        self.ey_xdz[(z * self.nx + x) * self.nd + d]
    }
}

/// Bandit solver over a flat arm index space.
pub trait Solver {
    /// Forgets everything and prepares `arms` fresh arms.
    fn reset(&mut self, arms: usize);
    /// Score of `arm` for the current round; the harness plays the argmax.
    fn draw(&mut self, arm: usize, rng: &mut dyn RngCore) -> f64;
    fn update(&mut self, arm: usize, reward: f64);
}

/// Thompson sampling with Beta(1, 1) priors on Bernoulli arms.
#[derive(Clone, Debug, Default)]
pub struct BetaTs {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl BetaTs {
    pub fn alpha(&self, arm: usize) -> f64 {
        self.alpha[arm]
    }

    pub fn beta(&self, arm: usize) -> f64 {
        self.beta[arm]
    }

    pub fn arms(&self) -> usize {
        self.alpha.len()
    }
}

impl Solver for BetaTs {
    fn reset(&mut self, arms: usize) {
        self.alpha = vec![1.0; arms];
        self.beta = vec![1.0; arms];
    }

    fn draw(&mut self, arm: usize, rng: &mut dyn RngCore) -> f64 {
        Beta::new(self.alpha[arm], self.beta[arm]).expect("positive parameters").sample(rng)
    }

    fn update(&mut self, arm: usize, reward: f64) {
        self.alpha[arm] += reward;
        self.beta[arm] += 1.0 - reward;
    }
}

/// Per-round trace of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub rewards: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    /// Whether the round's executed arm was as good as the optimal
    /// strategy's on the same unit.
    pub optimal: Vec<bool>,
    /// Number of solver updates routed to each arm.
    pub updates: Vec<u64>,
}

impl RunMetrics {
    fn with_arms(t: usize, arms: usize) -> Self {
        RunMetrics {
            rewards: Vec::with_capacity(t),
            cumulative_regret: Vec::with_capacity(t),
            optimal: Vec::with_capacity(t),
            updates: vec![0; arms],
        }
    }

    fn record(&mut self, p: &MabProblem, u: &[usize], x: usize, y: f64) {
        let (best, got) = p.round_values(u, x);
        let prev = self.cumulative_regret.last().copied().unwrap_or(0.0);
        self.cumulative_regret.push(prev + (best - got));
        self.optimal.push(got >= best - OPTIMAL_TOL);
        self.rewards.push(y);
    }

    fn route(&mut self, s: &mut dyn Solver, arm: usize, y: f64) {
        s.update(arm, y);
        self.updates[arm] += 1;
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn mean_reward(&self) -> f64 {
        mean(&self.rewards)
    }

    /// Mean reward over the last `window` rounds.
    pub fn terminal_reward(&self, window: usize) -> f64 {
        mean(&self.rewards[self.rewards.len().saturating_sub(window)..])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn device(v: usize) -> RandomDevice {
    RandomDevice::Constant(v)
}

/// Probe `D` with a solver-chosen input, then write a solver-chosen input
/// into `Y`. Arms whose input agrees with both the natural `X` and the probe
/// are hot-started from `obs.given_xdz` and never updated; the `D`-arm
/// always receives the final reward.
pub fn mab_opt<S: Solver, R: Rng>(
    p: &MabProblem,
    solver: &mut S,
    t: usize,
    obs: &ObsTable,
    rng: &mut R,
) -> Result<RunMetrics> {
    let (nx, nd, nc) = (p.nx, p.nd, p.contexts());
    let y_base = nc * nx;
    let y_arm = |c: usize, x2: usize, d: usize, x: usize| y_base + ((c * nx + x2) * nd + d) * nx + x;
    let arms = y_base + nc * nx * nd * nx;
    solver.reset(arms);
    let mut out = RunMetrics::with_arms(t, arms);
    let pop = Population::with_actions(&p.model, p.actions.clone())?;
    let mut scores = vec![0.0; nx];
    for round in 0..t as u64 {
        let mut unit = pop.select(round, rng);
        let z = p.z.map_or(Ok(0), |z| unit.read(z))?;
        let xn = unit.read(p.x)?;
        let c = z * nx + xn;
        for (k, s) in scores.iter_mut().enumerate() {
            *s = solver.draw(c * nx + k, rng);
        }
        let x2 = argmax(&scores);
        unit.ctf_rand(p.x, VarSet::singleton(p.d), &device(x2), rng)?;
        let d = unit.read(p.d)?;
        for (k, s) in scores.iter_mut().enumerate() {
            *s = if k == xn && xn == x2 { obs.given_xdz(z, xn, d) } else { solver.draw(y_arm(c, x2, d, k), rng) };
        }
        let x = argmax(&scores);
        unit.ctf_rand(p.x, VarSet::singleton(p.y), &device(x), rng)?;
        let y = unit.read(p.y)? as f64;
        out.route(solver, c * nx + x2, y);
        if !(x == xn && xn == x2) {
            out.route(solver, y_arm(c, x2, d, x), y);
        }
        out.record(p, unit.reveal_exogenous(), x, y);
    }
    Ok(out)
}

/// [`mab_opt`] with the Beta-Bernoulli Thompson solver.
pub fn ts_opt<R: Rng>(p: &MabProblem, t: usize, obs: &ObsTable, rng: &mut R) -> Result<RunMetrics> {
    mab_opt(p, &mut BetaTs::default(), t, obs, rng)
}

/// Chooses the input written into `Y` after reading `Z` and the natural `X`.
/// The arm equal to the natural `X` is hot-started from `obs.given_xz`.
pub fn ts_ett<R: Rng>(p: &MabProblem, t: usize, obs: &ObsTable, rng: &mut R) -> Result<RunMetrics> {
    let nx = p.nx;
    let mut solver = BetaTs::default();
    let arms = p.contexts() * nx;
    solver.reset(arms);
    let mut out = RunMetrics::with_arms(t, arms);
    let pop = Population::with_actions(&p.model, p.actions.clone())?;
    let mut scores = vec![0.0; nx];
    for round in 0..t as u64 {
        let mut unit = pop.select(round, rng);
        let z = p.z.map_or(Ok(0), |z| unit.read(z))?;
        let xn = unit.read(p.x)?;
        let c = z * nx + xn;
        for (k, s) in scores.iter_mut().enumerate() {
            *s = if k == xn { obs.given_xz(z, xn) } else { solver.draw(c * nx + k, rng) };
        }
        let x = argmax(&scores);
        unit.ctf_rand(p.x, VarSet::singleton(p.y), &device(x), rng)?;
        let y = unit.read(p.y)? as f64;
        if x != xn {
            out.route(&mut solver, c * nx + x, y);
        }
        out.record(p, unit.reveal_exogenous(), x, y);
    }
    Ok(out)
}

/// Contextual Thompson sampling on `(z, x', d)`, where `d` comes from
/// probing `D` with a uniformly random input the learner does not track.
pub fn ts_aug<R: Rng>(p: &MabProblem, t: usize, rng: &mut R) -> Result<RunMetrics> {
    let (nx, nd) = (p.nx, p.nd);
    let mut solver = BetaTs::default();
    let arms = p.contexts() * nd * nx;
    solver.reset(arms);
    let mut out = RunMetrics::with_arms(t, arms);
    let pop = Population::with_actions(&p.model, p.actions.clone())?;
    let mut scores = vec![0.0; nx];
    for round in 0..t as u64 {
        let mut unit = pop.select(round, rng);
        let z = p.z.map_or(Ok(0), |z| unit.read(z))?;
        let xn = unit.read(p.x)?;
        unit.ctf_rand(p.x, VarSet::singleton(p.d), &RandomDevice::Uniform, rng)?;
        let d = unit.read(p.d)?;
        let c3 = (z * nx + xn) * nd + d;
        for (k, s) in scores.iter_mut().enumerate() {
            *s = solver.draw(c3 * nx + k, rng);
        }
        let x = argmax(&scores);
        unit.ctf_rand(p.x, VarSet::singleton(p.y), &device(x), rng)?;
        let y = unit.read(p.y)? as f64;
        out.route(&mut solver, c3 * nx + x, y);
        out.record(p, unit.reveal_exogenous(), x, y);
    }
    Ok(out)
}

/// Context-free Thompson sampling on `Write(X := x)`.
pub fn ts_standard<R: Rng>(p: &MabProblem, t: usize, rng: &mut R) -> Result<RunMetrics> {
    let nx = p.nx;
    let mut solver = BetaTs::default();
    solver.reset(nx);
    let mut out = RunMetrics::with_arms(t, nx);
    let pop = Population::with_actions(&p.model, p.actions.clone())?;
    let mut scores = vec![0.0; nx];
    for round in 0..t as u64 {
        let mut unit = pop.select(round, rng);
        for (k, s) in scores.iter_mut().enumerate() {
            *s = solver.draw(k, rng);
        }
        let x = argmax(&scores);
        unit.rand(p.x, &device(x), rng)?;
        let y = unit.read(p.y)? as f64;
        out.route(&mut solver, x, y);
        out.record(p, unit.reveal_exogenous(), x, y);
    }
    Ok(out)
}

/// Learning algorithms selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Algo {
    #[serde(rename = "ts")]
    Ts,
    #[serde(rename = "ts-aug")]
    TsAug,
    #[serde(rename = "ts-ett")]
    TsEtt,
    #[serde(rename = "ts-opt")]
    TsOpt,
    /// The generic probe-then-write loop; with the default Thompson solver it
    /// behaves exactly like `TsOpt`.
    #[serde(rename = "mab-opt")]
    MabOpt,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Ts, Algo::TsAug, Algo::TsEtt, Algo::TsOpt, Algo::MabOpt];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Ts => "ts",
            Algo::TsAug => "ts-aug",
            Algo::TsEtt => "ts-ett",
            Algo::TsOpt => "ts-opt",
            Algo::MabOpt => "mab-opt",
        }
    }

    /// One run of `t` rounds.
    pub fn run(self, p: &MabProblem, t: usize, obs: &ObsTable, rng: &mut ChaCha8Rng) -> Result<RunMetrics> {
        match self {
            Algo::Ts => ts_standard(p, t, rng),
            Algo::TsAug => ts_aug(p, t, rng),
            Algo::TsEtt => ts_ett(p, t, obs, rng),
            Algo::TsOpt => ts_opt(p, t, obs, rng),
            Algo::MabOpt => mab_opt(p, &mut BetaTs::default(), t, obs, rng),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidAction(format!("unknown algorithm `{s}`")))
    }
}

/// Mean with a normal-approximation 95% confidence band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Band {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn of(samples: impl ExactSizeIterator<Item = f64> + Clone) -> Band {
        let n = samples.len() as f64;
        if n == 0.0 {
            return Band { mean: 0.0, lower: 0.0, upper: 0.0 };
        }
        let m = samples.clone().sum::<f64>() / n;
        let half = if n > 1.0 {
            let var = samples.map(|s| (s - m) * (s - m)).sum::<f64>() / (n - 1.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        Band { mean: m, lower: m - half, upper: m + half }
    }
}

/// Epoch-level aggregation of one algorithm's runs.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedMetrics {
    pub algo: Algo,
    pub horizon: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimum: f64,
    pub cr: Vec<Band>,
    pub oap: Vec<Band>,
    pub mean_reward: Band,
    pub terminal_reward: Band,
    pub terminal_window: usize,
}

/// Scalar results of a run set, serialized into `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub algo: Algo,
    pub horizon: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimum: f64,
    pub mean_reward: Band,
    pub terminal_reward: Band,
    pub terminal_window: usize,
    pub final_cr: Option<Band>,
    pub final_oap: Option<Band>,
}

impl AggregatedMetrics {
    pub fn from_runs(algo: Algo, p: &MabProblem, seed: u64, runs: &[RunMetrics]) -> Self {
        let horizon = runs.first().map_or(0, RunMetrics::len);
        let window = TERMINAL_WINDOW.min(horizon);
        let per_round = |f: &dyn Fn(&RunMetrics, usize) -> f64| -> Vec<Band> {
            (0..horizon).map(|i| Band::of(runs.iter().map(|r| f(r, i)).collect::<Vec<_>>().into_iter())).collect()
        };
        AggregatedMetrics {
            algo,
            horizon,
            epochs: runs.len(),
            seed,
            optimum: p.optimum,
            cr: per_round(&|r, i| r.cumulative_regret[i]),
            oap: per_round(&|r, i| f64::from(u8::from(r.optimal[i]))),
            mean_reward: Band::of(runs.iter().map(RunMetrics::mean_reward).collect::<Vec<_>>().into_iter()),
            terminal_reward: Band::of(runs.iter().map(|r| r.terminal_reward(window)).collect::<Vec<_>>().into_iter()),
            terminal_window: window,
        }
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            algo: self.algo,
            horizon: self.horizon,
            epochs: self.epochs,
            seed: self.seed,
            optimum: self.optimum,
            mean_reward: self.mean_reward,
            terminal_reward: self.terminal_reward,
            terminal_window: self.terminal_window,
            final_cr: self.cr.last().copied(),
            final_oap: self.oap.last().copied(),
        }
    }

    pub fn cr_csv(&self) -> String {
        bands_csv(&self.cr)
    }

    pub fn oap_csv(&self) -> String {
        bands_csv(&self.oap)
    }
}

fn bands_csv(bands: &[Band]) -> String {
    let mut s = String::from("t,mean,lower,upper\n");
    for (i, b) in bands.iter().enumerate() {
        s.push_str(&format!("{},{:.6},{:.6},{:.6}\n", i + 1, b.mean, b.lower, b.upper));
    }
    s
}

/// Runs `epochs` independent epochs in parallel; epoch `e` uses substream
/// `e` of `seed`, so results do not depend on the thread count.
pub fn run_epochs(algo: Algo, p: &MabProblem, t: usize, epochs: usize, seed: u64) -> Result<AggregatedMetrics> {
    run_epochs_with_obs(algo, p, t, epochs, seed, &ObsTable::exact(p))
}

pub fn run_epochs_with_obs(
    algo: Algo,
    p: &MabProblem,
    t: usize,
    epochs: usize,
    seed: u64,
    obs: &ObsTable,
) -> Result<AggregatedMetrics> {
    let runs: Vec<RunMetrics> = (0..epochs as u64)
        .into_par_iter()
        .map(|e| algo.run(p, t, obs, &mut rng::stream(seed, &[e])))
        .collect::<Result<_>>()?;
    Ok(AggregatedMetrics::from_runs(algo, p, seed, &runs))
}

/// The social-media problem with its default horizon.
pub fn example3_problem() -> MabProblem {
    MabProblem::new(crate::catalog::example3_scm()).expect("example model fits the template")
}
