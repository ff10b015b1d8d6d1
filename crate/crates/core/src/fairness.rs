//! Fairness auditing on the two-decision admissions diagram.
//!
//! A [`CanonicalScm`] parameterizes every model of the diagram `X -> Y`,
//! `X -> Z`, `Y <-> Z` by a distribution over joint response types. The
//! counterfactual disparity [`mu_ctf_exact`] compares `Z` under two races while
//! holding the race seen by `Y` fixed; the interventional disparities
//! [`mu_int`] only ever use one race per unit.

use rand_distr::{Dirichlet, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog;
use crate::diagram::CausalDiagram;
use crate::engine::{exact_l3_probability, interventional_distribution};
use crate::error::{Error, Result};
use crate::query::{CtfQuery, Intervention, PotentialResponse};
use crate::realize::{ctf_realize, Action, ActionSet, Verdict};
use crate::rng;
use crate::scm::{ExogenousDist, ExogenousVar, Mechanism, ScmModel};
use crate::sim::{sample_plan, Population, DEFAULT_MAX_REJECTIONS};
use crate::varset::VarSet;

/// Response of one classifier to the perceived race.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ResponseType {
    AlwaysApprove,
    ApproveIfX1,
    ApproveIfX0,
    AlwaysReject,
}

impl ResponseType {
    pub const ALL: [ResponseType; 4] =
        [ResponseType::AlwaysApprove, ResponseType::ApproveIfX1, ResponseType::ApproveIfX0, ResponseType::AlwaysReject];

    pub fn respond(self, x: usize) -> usize {
        match self {
            ResponseType::AlwaysApprove => 1,
            ResponseType::ApproveIfX1 => x,
            ResponseType::ApproveIfX0 => 1 - x,
            ResponseType::AlwaysReject => 0,
        }
    }

    fn from_outputs(at_x0: usize, at_x1: usize) -> Self {
        match (at_x0, at_x1) {
            (1, 1) => ResponseType::AlwaysApprove,
            (0, 1) => ResponseType::ApproveIfX1,
            (1, 0) => ResponseType::ApproveIfX0,
            _ => ResponseType::AlwaysReject,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Canonical parameterization: `P(U_X = 1)` and a 16-entry table whose
/// entry `4 * y + z` is the probability of Y-type `y` and Z-type `z`
/// (types in [`ResponseType::ALL`] order).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CanonicalScm {
    pub p_x1: f64,
    pub table: [f64; 16],
}

impl CanonicalScm {
    pub fn new(p_x1: f64, table: [f64; 16]) -> Result<Self> {
        if !(0.0 < p_x1 && p_x1 < 1.0) {
            return Err(Error::InvalidModel(format!("P(U_X = 1) = {p_x1} must lie strictly inside (0, 1)")));
        }
        if table.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidModel("canonical table entries must lie in [0, 1]".into()));
        }
        let s: f64 = table.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("canonical table sums to {s}")));
        }
        Ok(CanonicalScm { p_x1, table })
    }

    pub fn prob(&self, y: ResponseType, z: ResponseType) -> f64 {
        self.table[4 * y.index() + z.index()]
    }

    /// Probability that `Y` under race `xy` and `Z` under race `xz` take the given values.
    pub fn joint(&self, xy: usize, y: usize, xz: usize, z: usize) -> f64 {
        let mut p = 0.0;
        for ty in ResponseType::ALL {
            for tz in ResponseType::ALL {
                if ty.respond(xy) == y && tz.respond(xz) == z {
                    p += self.prob(ty, tz);
                }
            }
        }
        p
    }

    /// The induced model over `X, Y, Z` with exogenous `U_X` and `U_YZ`.
    pub fn to_model(&self) -> ScmModel {
        let g = catalog::fig5a();
        let x = 0;
        let exo = vec![ExogenousVar::new("U_X", 2), ExogenousVar::new("U_YZ", 16)];
        let fx = Mechanism::from_fn(&g, &exo, vec![], vec![0], |_, u| u[0]).expect("shape");
        let fy = Mechanism::from_fn(&g, &exo, vec![x], vec![1], |i, u| ResponseType::ALL[u[0] / 4].respond(i[0]))
            .expect("shape");
        let fz = Mechanism::from_fn(&g, &exo, vec![x], vec![1], |i, u| ResponseType::ALL[u[0] % 4].respond(i[0]))
            .expect("shape");
        let dist = ExogenousDist::Product(vec![vec![1.0 - self.p_x1, self.p_x1], self.table.to_vec()]);
        ScmModel::new(g, exo, dist, vec![fx, fy, fz]).expect("canonical model")
    }

    /// Recovers the canonical table of any model over the admissions diagram
    /// by classifying each exogenous state's responses.
    pub fn from_model(model: &ScmModel) -> Result<Self> {
        let g = model.diagram();
        let (x, y, z) = (g.id("X")?, g.id("Y")?, g.id("Z")?);
        let mut table = [0.0; 16];
        let mut p_x1 = 0.0;
        for (u, p) in model.support() {
            let resp = |v| -> Result<[usize; 2]> {
                let mut out = [0; 2];
                for (xv, o) in out.iter_mut().enumerate() {
                    let t = PotentialResponse::new(v, vec![Intervention::full(x, xv)]);
                    *o = crate::engine::eval_potential_response(model, u, &t)?;
                }
                Ok(out)
            };
            let ry = resp(y)?;
            let rz = resp(z)?;
            let ty = ResponseType::from_outputs(ry[0], ry[1]);
            let tz = ResponseType::from_outputs(rz[0], rz[1]);
            table[4 * ty.index() + tz.index()] += p;
            p_x1 += p * model.forward(u)[x] as f64;
        }
        CanonicalScm::new(p_x1, table)
    }

    /// The same model with the roles of the two races exchanged.
    pub fn swap_races(&self) -> Self {
        let swap = |t: usize| match t {
            1 => 2,
            2 => 1,
            t => t,
        };
        let mut table = [0.0; 16];
        for (i, p) in self.table.iter().enumerate() {
            table[4 * swap(i / 4) + swap(i % 4)] = *p;
        }
        CanonicalScm { p_x1: 1.0 - self.p_x1, table }
    }
}

/// The published admissions model.
pub fn example2_scm() -> CanonicalScm {
    CanonicalScm::new(
        0.5,
        [
            0.040, 0.175, 0.160, 0.010, 0.040, 0.055, 0.170, 0.010, 0.040, 0.140, 0.025, 0.025, 0.050, 0.010, 0.025,
            0.025,
        ],
    )
    .expect("published table is valid")
}

/// Disparity threshold above which a model is reported as discriminating.
pub const DISCRIMINATION_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Penalize `mu_int1 + mu_int2`.
    L2Penalty,
    /// Penalize `mu_ctf`.
    L3Penalty,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Estimation {
    Exact,
    /// Monte Carlo with `n` accepted samples per probability.
    Sampled {
        n: usize,
        ci_half_width: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FairnessReport {
    pub mu_ctf: f64,
    pub mu_int1: f64,
    pub mu_int2: f64,
    pub estimation: Estimation,
}

impl FairnessReport {
    pub fn exact(scm: &CanonicalScm) -> Self {
        FairnessReport {
            mu_ctf: mu_ctf_closed_form(scm),
            mu_int1: mu_int_closed_form(scm, 1),
            mu_int2: mu_int_closed_form(scm, 2),
            estimation: Estimation::Exact,
        }
    }

    pub fn discriminates(&self) -> bool {
        self.mu_ctf > DISCRIMINATION_THRESHOLD
    }
}

fn mu_ctf_closed_form(s: &CanonicalScm) -> f64 {
    (s.joint(1, 1, 1, 0) - s.joint(1, 1, 0, 0)).abs()
}

fn mu_int_closed_form(s: &CanonicalScm, variant: u8) -> f64 {
    if variant == 1 {
        let py = s.joint(1, 1, 1, 0) + s.joint(1, 1, 1, 1);
        let pz1 = s.joint(1, 0, 1, 0) + s.joint(1, 1, 1, 0);
        let pz0 = s.joint(0, 0, 0, 0) + s.joint(0, 1, 0, 0);
        (py * pz1 - py * pz0).abs()
    } else {
        (s.joint(1, 1, 1, 0) - s.joint(0, 1, 0, 0)).abs()
    }
}

fn ids(g: &CausalDiagram) -> Result<(usize, usize, usize)> {
    Ok((g.id("X")?, g.id("Y")?, g.id("Z")?))
}

/// `P(Y_{x1} = 1, Z_{xz} = 0)` as a valued two-term query.
fn disparity_query(g: &CausalDiagram, xz: usize) -> Result<CtfQuery> {
    let (x, y, z) = ids(g)?;
    Ok(CtfQuery::with_values(
        vec![
            PotentialResponse::new(y, vec![Intervention::full(x, 1)]),
            PotentialResponse::new(z, vec![Intervention::full(x, xz)]),
        ],
        vec![1, 0],
    ))
}

/// The two counterfactual randomizations that make the disparity observable.
pub fn audit_actions(g: &CausalDiagram) -> Result<ActionSet> {
    let (x, y, z) = ids(g)?;
    let mut a = ActionSet::reads_only(g);
    a.insert(g, Action::CtfRand(x, VarSet::singleton(y)))?;
    a.insert(g, Action::CtfRand(x, VarSet::singleton(z)))?;
    Ok(a)
}

/// Exact `mu_ctf` through the counterfactual engine.
pub fn mu_ctf_exact(scm: &CanonicalScm) -> Result<f64> {
    model_mu_ctf(&scm.to_model())
}

fn model_mu_ctf(m: &ScmModel) -> Result<f64> {
    let a = exact_l3_probability(m, &disparity_query(m.diagram(), 1)?)?;
    let b = exact_l3_probability(m, &disparity_query(m.diagram(), 0)?)?;
    Ok((a - b).abs())
}

/// `mu_ctf` estimated by simulating both counterfactual randomizations on
/// `n` accepted units per probability. Realizability is checked first.
pub fn mu_ctf_sampled(scm: &CanonicalScm, n: usize, seed: u64) -> Result<FairnessReport> {
    let m = scm.to_model();
    let g = m.diagram();
    let actions = audit_actions(g)?;
    let pop = Population::with_actions(&m, actions.clone())?;
    let mut p = [0.0; 2];
    for (k, xz) in [1usize, 0].into_iter().enumerate() {
        let q = disparity_query(g, xz)?;
        let plan = match ctf_realize(&q, g, &actions)? {
            Verdict::Realizable(plan) => plan,
            Verdict::NotRealizable(w) => return Err(Error::UnrealizableStrategy(w.describe(g, &q))),
        };
        let batch = sample_plan(&plan, &q.terms, &pop, n, rng::derive_seed(seed, &[k as u64]), DEFAULT_MAX_REJECTIONS)?;
        p[k] = crate::sim::estimate(&batch, &[(0, 1), (1, 0)])?;
    }
    let se = ((p[0] * (1.0 - p[0]) + p[1] * (1.0 - p[1])) / n as f64).sqrt();
    Ok(FairnessReport {
        mu_ctf: (p[0] - p[1]).abs(),
        mu_int1: mu_int(scm, 1)?,
        mu_int2: mu_int(scm, 2)?,
        estimation: Estimation::Sampled { n, ci_half_width: 1.96 * se },
    })
}

/// Exact interventional disparity: `1` is the product form, `2` the joint form.
pub fn mu_int(scm: &CanonicalScm, variant: u8) -> Result<f64> {
    model_mu_int(&scm.to_model(), variant)
}

fn model_mu_int(m: &ScmModel, variant: u8) -> Result<f64> {
    let g = m.diagram();
    let (x, y, z) = ids(g)?;
    let yz = VarSet::singleton(y).with(z);
    let d1 = interventional_distribution(m, yz, &[(x, 1)])?;
    let d0 = interventional_distribution(m, yz, &[(x, 0)])?;
    // Rows are ordered by variable id: (Y, Z).
    match variant {
        1 => {
            let py = d1.event(&[(0, 1)]);
            Ok((py * d1.event(&[(1, 0)]) - py * d0.event(&[(1, 0)])).abs())
        }
        2 => Ok((d1.prob(&[1, 0]) - d0.prob(&[1, 0])).abs()),
        v => Err(Error::InvalidQuery(format!("unknown interventional variant {v}"))),
    }
}

/// Exact report through the engine (as opposed to the closed form used by the sampler).
pub fn exact_report(scm: &CanonicalScm) -> Result<FairnessReport> {
    model_report(&scm.to_model())
}

/// Exact metrics of any model over the admissions diagram `X -> Y`,
/// `X -> Z`, whatever its exogenous parametrization.
pub fn model_report(model: &ScmModel) -> Result<FairnessReport> {
    Ok(FairnessReport {
        mu_ctf: model_mu_ctf(model)?,
        mu_int1: model_mu_int(model, 1)?,
        mu_int2: model_mu_int(model, 2)?,
        estimation: Estimation::Exact,
    })
}

/// Penalized metric of `constraint`.
pub fn penalty(scm: &CanonicalScm, constraint: Constraint) -> f64 {
    match constraint {
        Constraint::L2Penalty => mu_int_closed_form(scm, 1) + mu_int_closed_form(scm, 2),
        Constraint::L3Penalty => mu_ctf_closed_form(scm),
    }
}

pub fn satisfies(scm: &CanonicalScm, constraint: Constraint, epsilon: f64) -> bool {
    penalty(scm, constraint) <= epsilon
}

/// Tuning of [`sample_constrained_scms`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerConfig {
    /// Minimum acceptance rate before giving up.
    pub min_acceptance: f64,
    /// Proposals evaluated in one parallel round.
    pub chunk: u64,
    /// Proposals always tried before the floor is enforced.
    pub warmup: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { min_acceptance: 1e-5, chunk: 1 << 15, warmup: 1 << 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstrainedSample {
    pub scms: Vec<(CanonicalScm, FairnessReport)>,
    pub proposals: u64,
}

impl ConstrainedSample {
    pub fn acceptance_rate(&self) -> f64 {
        self.scms.len() as f64 / self.proposals as f64
    }

    pub fn fraction_discriminating(&self) -> f64 {
        if self.scms.is_empty() {
            return 0.0;
        }
        self.scms.iter().filter(|(_, r)| r.discriminates()).count() as f64 / self.scms.len() as f64
    }

    /// Counts of `mu_ctf` in bins of width `0.01` over `[0, 1]`.
    pub fn histogram(&self) -> Vec<(f64, f64, usize)> {
        let mut counts = vec![0usize; 100];
        for (_, r) in &self.scms {
            let b = ((r.mu_ctf * 100.0).floor() as usize).min(99);
            counts[b] += 1;
        }
        counts.into_iter().enumerate().map(|(i, c)| (i as f64 / 100.0, (i + 1) as f64 / 100.0, c)).collect()
    }

    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (lo, hi, c) in self.histogram() {
            s.push_str(&format!("{lo:.2},{hi:.2},{c}\n"));
        }
        s
    }
}

fn propose(seed: u64, i: u64) -> CanonicalScm {
    let mut r = rng::stream(seed, &[i]);
    let dir = Dirichlet::new([1.0f64; 16]).expect("valid concentration");
    let mut table: [f64; 16] = dir.sample(&mut r);
    let s: f64 = table.iter().sum();
    table.iter_mut().for_each(|p| *p /= s);
    CanonicalScm { p_x1: 0.5, table }
}

/// Draws `n` canonical models uniformly from the simplex, keeping those
/// whose penalized metric is at most `epsilon`. Proposal `i` uses substream
/// `i`, so the result does not depend on the thread count.
pub fn sample_constrained_scms(
    constraint: Constraint,
    n: usize,
    epsilon: f64,
    seed: u64,
    config: &SamplerConfig,
) -> Result<ConstrainedSample> {
    if n == 0 {
        return Err(Error::InvalidQuery("at least one model must be requested".into()));
    }
    let mut scms = Vec::with_capacity(n);
    let mut next = 0u64;
    while scms.len() < n {
        let hits: Vec<CanonicalScm> = (next..next + config.chunk)
            .into_par_iter()
            .filter_map(|i| {
                let s = propose(seed, i);
                satisfies(&s, constraint, epsilon).then_some(s)
            })
            .collect();
        next += config.chunk;
        for s in hits {
            if scms.len() < n {
                let report = FairnessReport::exact(&s);
                scms.push((s, report));
            }
        }
        let rate = scms.len() as f64 / next as f64;
        if scms.len() < n && next >= config.warmup && rate < config.min_acceptance {
            return Err(Error::LowAcceptance { rate, proposals: next, accepted: scms.len() });
        }
    }
    Ok(ConstrainedSample { scms, proposals: next })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_engine_on_published_table() {
        let s = example2_scm();
        let e = exact_report(&s).unwrap();
        let c = FairnessReport::exact(&s);
        assert!((e.mu_ctf - c.mu_ctf).abs() < 1e-12);
        assert!((e.mu_int1 - c.mu_int1).abs() < 1e-12);
        assert!((e.mu_int2 - c.mu_int2).abs() < 1e-12);
    }

    #[test]
    fn round_trip_through_model() {
        let s = example2_scm();
        let back = CanonicalScm::from_model(&s.to_model()).unwrap();
        for (a, b) in s.table.iter().zip(back.table.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
