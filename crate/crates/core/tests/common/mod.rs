//! Checks shared by the acceptance harness and the integration tests.
#![allow(dead_code)]

use ctfkit::bandits::{evaluate_strategy_exact, example3_problem, StrategyTier};
use ctfkit::catalog::{self, BUILTIN_NAMES, GOLDEN_CASES};
use ctfkit::fairness;
use ctfkit::realize::Action;
use ctfkit::sim::{sample_plan, MechanismStatus, DEFAULT_MAX_REJECTIONS};
use ctfkit::{
    ctf_realize, eval_potential_response, exact_distribution, interventional_distribution, maximal_action_set,
    parse_query, ActionSet, CtfQuery, Error, Intervention, Population, PotentialResponse, RandomDevice, ScmModel,
    VarId, VarSet,
};
use rand::seq::IndexedRandom;
use rand::Rng;

pub type Check = Result<String, String>;

/// Builtin fixtures that carry a model.
pub fn model_fixtures() -> Vec<(&'static str, ScmModel)> {
    BUILTIN_NAMES.iter().filter_map(|&n| catalog::builtin(n).and_then(|f| f.model).map(|m| (n, m))).collect()
}

pub fn golden_cases() -> Check {
    let mut bad = Vec::new();
    for c in GOLDEN_CASES {
        let g = catalog::builtin(c.fixture).ok_or("missing fixture")?.diagram;
        let q = parse_query(c.query, &g).map_err(|e| e.to_string())?;
        let a = ActionSet::parse(&g, c.actions).map_err(|e| e.to_string())?;
        let v = ctf_realize(&q, &g, &a).map_err(|e| e.to_string())?;
        let got = v.witness().map(|w| w.kind);
        if got != c.failure {
            bad.push(format!("{}: expected {:?}, got {:?}", c.name, c.failure, got));
        }
    }
    if bad.is_empty() {
        Ok(format!("{} cases", GOLDEN_CASES.len()))
    } else {
        Err(bad.join("; "))
    }
}

/// Executes every realizable fixture query and compares the empirical joint
/// with the exact one. Returns the largest distance seen.
pub fn sampling_fidelity(n: usize, seed: u64, tol: f64) -> Check {
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut bad = Vec::new();
    for (k, (name, model)) in model_fixtures().into_iter().enumerate() {
        let g = model.diagram();
        let actions = maximal_action_set(g);
        let pop = Population::with_actions(&model, actions.clone()).map_err(|e| e.to_string())?;
        for (j, text) in catalog::fixture_queries(name).iter().enumerate() {
            let q = parse_query(text, g).map_err(|e| e.to_string())?;
            let verdict = ctf_realize(&q, g, &actions).map_err(|e| e.to_string())?;
            let Some(plan) = verdict.plan() else { continue };
            let batch = sample_plan(
                plan,
                &q.terms,
                &pop,
                n,
                ctfkit::rng::derive_seed(seed, &[k as u64, j as u64]),
                DEFAULT_MAX_REJECTIONS,
            )
            .map_err(|e| format!("{name} {text}: {e}"))?;
            let exact = exact_distribution(&model, &q).map_err(|e| e.to_string())?;
            let tv = exact.total_variation(&batch.empirical());
            worst = worst.max(tv);
            count += 1;
            if tv >= tol {
                bad.push(format!("{name} {text}: tv {tv:.4}"));
            }
        }
    }
    if count == 0 {
        return Err("no realizable fixture query".into());
    }
    if bad.is_empty() {
        Ok(format!("{count} queries, max tv {worst:.4}"))
    } else {
        Err(bad.join("; "))
    }
}

/// One randomly generated action on a unit.
#[derive(Clone, Debug)]
pub enum Step {
    Read(VarId),
    Rand(VarId, usize),
    CtfRand(VarId, VarSet, usize),
}

/// Random action sequence over `model`'s variables.
pub fn random_steps<R: Rng>(model: &ScmModel, len: usize, rng: &mut R) -> Vec<Step> {
    let g = model.diagram();
    (0..len)
        .map(|_| {
            let v = rng.random_range(0..g.len());
            let value = rng.random_range(0..g.domain_size(v));
            let children: Vec<VarId> = g.children_of(v).iter().collect();
            match rng.random_range(0..3) {
                0 => Step::Read(v),
                1 => Step::Rand(v, value),
                _ if children.is_empty() => Step::Read(v),
                _ => {
                    let mut t = VarSet::singleton(*children.choose(rng).unwrap());
                    for &c in &children {
                        if rng.random_bool(0.5) {
                            t.insert(c);
                        }
                    }
                    Step::CtfRand(v, t, value)
                }
            }
        })
        .collect()
}

/// Runs `steps` on a unit and checks them against a shadow of the status
/// table: every action that would re-run or pre-empt a mechanism must raise
/// the FCE error, and no mechanism ever fires twice. Returns the number of
/// violations raised.
pub fn check_fce_sequence(model: &ScmModel, u: Vec<usize>, steps: &[Step]) -> Result<usize, String> {
    let pop = Population::new(model).map_err(|e| e.to_string())?;
    let mut unit = pop.unit_with(0, u);
    let n = model.diagram().len();
    let mut rng = ctfkit::rng::stream(0, &[]);
    let mut done: Vec<Vec<VarSet>> = vec![Vec::new(); n];
    let mut read_values: Vec<Option<usize>> = vec![None; n];
    let mut rand_values: Vec<Option<usize>> = vec![None; n];
    let mut raised = 0;
    for (i, step) in steps.iter().enumerate() {
        let before: Vec<MechanismStatus> = (0..n).map(|v| unit.status(v)).collect();
        match *step {
            Step::Read(v) => {
                let got = unit.read(v).map_err(|e| format!("step {i}: read failed: {e}"))?;
                if let Some(prev) = read_values[v] {
                    if prev != got {
                        return Err(format!("step {i}: second read changed the value"));
                    }
                }
                if let Some(r) = rand_values[v] {
                    if r != got {
                        return Err(format!("step {i}: read ignores the randomized value"));
                    }
                }
                read_values[v] = Some(got);
            }
            Step::Rand(v, value) => {
                let expect_fce = before[v] != MechanismStatus::Unfired;
                let res = unit.rand(v, &RandomDevice::Constant(value), &mut rng);
                match (expect_fce, res) {
                    (true, Err(Error::Fce(_))) => raised += 1,
                    (false, Ok(x)) if x == value => rand_values[v] = Some(x),
                    (e, r) => return Err(format!("step {i}: Rand expected fce={e}, got {r:?}")),
                }
            }
            Step::CtfRand(v, t, value) => {
                let blocked = t.iter().any(|c| before[c] != MechanismStatus::Unfired) || done[v].contains(&t);
                let crossing = done[v].iter().any(|&s| s.intersects(t) && !s.is_subset(t) && !t.is_subset(s));
                let res = unit.ctf_rand(v, t, &RandomDevice::Constant(value), &mut rng);
                match (blocked, crossing, res) {
                    (true, _, Err(Error::Fce(_))) => raised += 1,
                    (false, true, Err(Error::Containment { .. })) => {}
                    (false, false, Ok(_)) => done[v].push(t),
                    (b, c, r) => return Err(format!("step {i}: CtfRand expected fce={b} crossing={c}, got {r:?}")),
                }
            }
        }
        for (v, &was) in before.iter().enumerate() {
            if unit.fire_count(v) > 1 {
                return Err(format!("step {i}: mechanism {v} fired twice"));
            }
            let now = unit.status(v);
            if was != MechanismStatus::Unfired && now != was {
                return Err(format!("step {i}: status of {v} regressed"));
            }
            if now == MechanismStatus::Erased && unit.fire_count(v) != 0 {
                return Err(format!("step {i}: erased mechanism {v} has fired"));
            }
        }
    }
    Ok(raised)
}

/// Every randomization of `X`, its edge to `{Z, T, B}` and its edge to
/// `{T, B}` supersedes the coarser ones on every unit.
pub fn supersede_base() -> Check {
    let model = catalog::fig11_base_scm();
    let g = model.diagram();
    let id = |n: &str| g.id(n).unwrap();
    let (x, y, z, t, b) = (id("X"), id("Y"), id("Z"), id("T"), id("B"));
    let pop = Population::new(&model).map_err(|e| e.to_string())?;
    let mut rng = ctfkit::rng::stream(0, &[]);
    let mut cases = 0;
    for (u, _) in model.support() {
        for (x0, x1, x2) in triples(3) {
            let mut unit = pop.unit_with(0, u.to_vec());
            let e = |e: Error| e.to_string();
            unit.rand(x, &RandomDevice::Constant(x0), &mut rng).map_err(e)?;
            unit.ctf_rand(x, VarSet::from_iter([z, t, b]), &RandomDevice::Constant(x1), &mut rng).map_err(e)?;
            unit.ctf_rand(x, VarSet::from_iter([t, b]), &RandomDevice::Constant(x2), &mut rng).map_err(e)?;
            let got = [y, z, t, b].map(|v| unit.read(v).unwrap());
            if got != [x0, x1, x2, x2] {
                return Err(format!("u={u:?} inputs ({x0},{x1},{x2}) gave {got:?}"));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} unit/value cases"))
}

/// The same scenario on the expanded model, through its nested mediators.
pub fn supersede_expanded() -> Check {
    let (model, _) = catalog::fig11();
    let g = model.diagram();
    let id = |n: &str| g.id(n).unwrap();
    let pop = Population::new(&model).map_err(|e| e.to_string())?;
    let mut rng = ctfkit::rng::stream(0, &[]);
    let mut cases = 0;
    for (u, _) in model.support() {
        for (x0, x1, x2) in triples(3) {
            let mut unit = pop.unit_with(0, u.to_vec());
            for (v, val) in [("X", x0), ("W1", x1), ("W2", x2)] {
                unit.rand(id(v), &RandomDevice::Constant(val), &mut rng).map_err(|e| e.to_string())?;
            }
            let got = ["Y", "Z", "T", "B"].map(|v| unit.read(id(v)).unwrap());
            if got != [x0, x1, x2, x2] {
                return Err(format!("u={u:?} inputs ({x0},{x1},{x2}) gave {got:?}"));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} unit/value cases"))
}

fn triples(k: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..k).flat_map(move |a| (0..k).flat_map(move |b| (0..k).map(move |c| (a, b, c))))
}

/// `(mediator, decision, child)` triples declared by the expanded fixtures.
pub fn mediator_triples() -> Vec<(ScmModel, [&'static str; 3])> {
    let (m9, _) = catalog::fig9c();
    let (m10, _) = catalog::fig10a();
    vec![
        (m9.clone(), ["W1", "X", "Y"]),
        (m9.clone(), ["W2", "X", "Z"]),
        (m9, ["W2", "X", "T"]),
        (m10, ["W1", "X", "A"]),
    ]
}

pub fn mediator_lemma() -> Check {
    let mut n = 0;
    for (model, [w, x, y]) in mediator_triples() {
        let g = model.diagram();
        let r = ctfkit::verify_counterfactual_mediator(&model, g.id(w).unwrap(), g.id(x).unwrap(), g.id(y).unwrap())
            .map_err(|e| e.to_string())?;
        if !r.is_mediator() {
            return Err(format!("{w} for {x} -> {y}: {r:?}"));
        }
        n += 1;
    }
    Ok(format!("{n} mediator edges"))
}

pub fn example3_values(tol: f64) -> Check {
    let p = example3_problem();
    let want =
        [(StrategyTier::Obs, 0.65), (StrategyTier::Int, 0.70), (StrategyTier::Ett, 0.75), (StrategyTier::Opt, 0.80)];
    let mut got = Vec::new();
    for (tier, v) in want {
        let s = p.tier_strategy(tier);
        let val = evaluate_strategy_exact(&p, &s).map_err(|e| e.to_string())?;
        if (val - v).abs() > tol {
            return Err(format!("{tier:?}: {val} != {v}"));
        }
        got.push(format!("{val:.2}"));
    }
    let (_, best) = ctfkit::bandits::brute_force_optimal(&p).map_err(|e| e.to_string())?;
    if (best - 0.80).abs() > tol {
        return Err(format!("brute force optimum {best}"));
    }
    Ok(format!("tiers {} brute {best:.2}", got.join("/")))
}

pub fn fairness_values(n: usize, seed: u64) -> Check {
    let s = fairness::example2_scm();
    let r = fairness::exact_report(&s).map_err(|e| e.to_string())?;
    if (r.mu_ctf - 0.10).abs() > 1e-12 || r.mu_int1.abs() > 1e-12 || r.mu_int2.abs() > 1e-12 {
        return Err(format!("exact {r:?}"));
    }
    let m = fairness::mu_ctf_sampled(&s, n, seed).map_err(|e| e.to_string())?;
    if (m.mu_ctf - 0.10).abs() > 0.01 {
        return Err(format!("sampled mu_ctf {}", m.mu_ctf));
    }
    Ok(format!("exact {:.2}/{:.0}/{:.0}, sampled {:.4}", r.mu_ctf, r.mu_int1, r.mu_int2, m.mu_ctf))
}

pub fn fairness_contrast(n: usize, eps: f64, seed: u64) -> Check {
    use fairness::{sample_constrained_scms, Constraint, SamplerConfig};
    let cfg = SamplerConfig::default();
    let l3 = sample_constrained_scms(Constraint::L3Penalty, n, eps, seed, &cfg).map_err(|e| e.to_string())?;
    let l2 = sample_constrained_scms(Constraint::L2Penalty, n, eps, seed, &cfg).map_err(|e| e.to_string())?;
    let fair3 = 1.0 - l3.fraction_discriminating();
    let unfair2 = l2.fraction_discriminating();
    let msg = format!("l3 fair {fair3:.3}, l2 discriminating {unfair2:.3}");
    if fair3 >= 0.95 && unfair2 >= 0.25 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Observational and interventional estimators for one fixture: the
/// probability that the last variable takes value 1, observed and under
/// `do(first = 1)`.
pub fn estimator_queries(model: &ScmModel) -> [(CtfQuery, f64); 2] {
    let g = model.diagram();
    let (first, last) = (0, g.len() - 1);
    let obs = CtfQuery::with_values(vec![PotentialResponse::natural(last)], vec![1]);
    let p_obs = exact_distribution(model, &obs).expect("exact").event(&[(0, 1)]);
    let int = CtfQuery::with_values(vec![PotentialResponse::new(last, vec![Intervention::full(first, 1)])], vec![1]);
    let p_int =
        interventional_distribution(model, VarSet::singleton(last), &[(first, 1)]).expect("exact").event(&[(0, 1)]);
    [(obs, p_obs), (int, p_int)]
}

/// Mean of `batches` estimates of `N` samples each lies within three
/// standard errors of the exact value.
pub fn estimator_unbiased(batches: usize, n: usize, seed: u64) -> Check {
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (k, (name, model)) in model_fixtures().into_iter().enumerate() {
        let g = model.diagram();
        let mut actions = maximal_action_set(g);
        for v in 0..g.len() {
            actions.insert(g, Action::Rand(v)).map_err(|e| e.to_string())?;
        }
        let pop = Population::with_actions(&model, actions.clone()).map_err(|e| e.to_string())?;
        for (j, (q, exact)) in estimator_queries(&model).into_iter().enumerate() {
            let plan = ctf_realize(&q, g, &actions).map_err(|e| e.to_string())?;
            let plan = plan.plan().ok_or_else(|| format!("{name}: estimator {j} not realizable"))?;
            let mut sum = 0.0;
            for b in 0..batches {
                let s = ctfkit::rng::derive_seed(seed, &[k as u64, j as u64, b as u64]);
                let batch =
                    sample_plan(plan, &q.terms, &pop, n, s, DEFAULT_MAX_REJECTIONS).map_err(|e| e.to_string())?;
                sum += ctfkit::estimate(&batch, &[(0, 1)]).map_err(|e| e.to_string())?;
            }
            let mean = sum / batches as f64;
            let se = (exact * (1.0 - exact) / (n * batches) as f64).sqrt();
            let dev = (mean - exact).abs();
            if se == 0.0 {
                if dev > 1e-12 {
                    return Err(format!("{name} estimator {j}: {mean} vs degenerate {exact}"));
                }
            } else {
                let z = dev / se;
                worst = worst.max(z);
                if z > 3.0 {
                    return Err(format!("{name} estimator {j}: mean {mean:.5} exact {exact:.5} z {z:.2}"));
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} estimators, max |z| {worst:.2}"))
}

/// `P(Y_{x', Z_x} = y) - P(Y_x = y)` by evaluating `Z_x(u)` first and then
/// `Y_{x', z}(u)` on every exogenous state.
pub fn nde_oracle(model: &ScmModel, x: VarId, z: VarId, y: VarId, xv: usize, xp: usize, yv: usize) -> f64 {
    let mut nested = 0.0;
    let mut total = 0.0;
    for (u, p) in model.support() {
        let zx =
            eval_potential_response(model, u, &PotentialResponse::new(z, vec![Intervention::full(x, xv)])).unwrap();
        let y_nested = eval_potential_response(
            model,
            u,
            &PotentialResponse::new(y, vec![Intervention::full(x, xp), Intervention::full(z, zx)]),
        )
        .unwrap();
        let y_total =
            eval_potential_response(model, u, &PotentialResponse::new(y, vec![Intervention::full(x, xv)])).unwrap();
        nested += p * f64::from(u8::from(y_nested == yv));
        total += p * f64::from(u8::from(y_total == yv));
    }
    nested - total
}

pub fn nde_checks() -> Check {
    let ids = |m: &ScmModel| {
        let g = m.diagram();
        (g.id("X").unwrap(), g.id("Z").unwrap(), g.id("Y").unwrap())
    };
    let zero = catalog::nde_zero_scm();
    let (x, z, y) = ids(&zero);
    for (xv, xp) in [(0, 1), (1, 0)] {
        let v = ctfkit::nde(&zero, x, z, y, xv, xp, 1).map_err(|e| e.to_string())?;
        if v != 0.0 {
            return Err(format!("zero-effect fixture gave {v}"));
        }
    }
    let direct = catalog::nde_direct_scm();
    let (x, z, y) = ids(&direct);
    let mut worst = 0.0f64;
    let mut last = 0.0;
    for (xv, xp) in [(0, 1), (1, 0)] {
        for yv in 0..2 {
            let v = ctfkit::nde(&direct, x, z, y, xv, xp, yv).map_err(|e| e.to_string())?;
            let o = nde_oracle(&direct, x, z, y, xv, xp, yv);
            worst = worst.max((v - o).abs());
            last = v;
        }
    }
    if worst > 1e-12 {
        return Err(format!("direct fixture differs from the oracle by {worst:e}"));
    }
    if last == 0.0 {
        return Err("direct fixture has no direct effect".into());
    }
    Ok(format!("zero exact, direct max diff {worst:e}"))
}
