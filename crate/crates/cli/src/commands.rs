use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use ctfkit::bandits::{evaluate_strategy_exact, run_epochs_with_obs, Algo, MabProblem, ObsTable, StrategyTier};
use ctfkit::catalog;
use ctfkit::fairness::{sample_constrained_scms, Constraint, SamplerConfig, DISCRIMINATION_THRESHOLD};
use ctfkit::realize::environment_actions;
use ctfkit::sim::sample_plan;
use ctfkit::{
    ctf_procedures, ctf_realize, exact_distribution, exact_l3_probability, load_fixture, maximal_action_set,
    parse_query, realizable_by_criterion, ActionSet, CausalDiagram, CtfQuery, Error, ExpandedDiagram, Fixture,
    Population, PotentialResponse, RealizationPlan, Tag, Verdict, Witness,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{resolve_dir, RunDir};
use crate::{BanditArgs, EvalArgs, FairnessArgs, OutputArgs, ProceduresArgs, RealizeArgs, SampleArgs};

pub enum Outcome {
    Success,
    NotRealizable,
}

/// A problem with the command line or its inputs, as opposed to a failure
/// while running.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<InputError>() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Fce(_)
                | Error::ActionUnavailable(_)
                | Error::MaxRejections { .. }
                | Error::EmptyBatch
                | Error::TooLarge(_)
                | Error::LowAcceptance { .. }
                | Error::UnrealizableStrategy(_) => 2,
                _ => 1,
            };
        }
    }
    2
}

fn load(spec: &str) -> Result<Fixture> {
    if Path::new(spec).exists() {
        return Ok(load_fixture(spec)?);
    }
    catalog::builtin(spec).ok_or_else(|| {
        input(format!(
            "`{spec}` is neither a fixture file nor a builtin (one of: {})",
            catalog::BUILTIN_NAMES.join(", ")
        ))
    })
}

fn query(text: &str, g: &CausalDiagram) -> Result<CtfQuery> {
    parse_query(text, g).with_context(|| format!("query `{text}`"))
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(ctfkit::rng::random_seed)
}

/// Common header of every JSON document: version, subcommand and the
/// resolved configuration.
fn envelope(command: &str, config: &impl Serialize, seed: Option<u64>) -> Result<serde_json::Map<String, Value>> {
    let mut cfg = serde_json::to_value(config)?;
    if let (Some(s), Value::Object(m)) = (seed, &mut cfg) {
        m.insert("seed".into(), json!(s));
    }
    let mut out = serde_json::Map::new();
    out.insert("ctfkit_version".into(), json!(ctfkit::VERSION));
    out.insert("command".into(), json!(command));
    out.insert("config".into(), cfg);
    Ok(out)
}

fn actions_for(g: &CausalDiagram, spec: Option<&str>, maximal: bool) -> Result<ActionSet> {
    match (spec, maximal) {
        (Some(s), _) => ActionSet::parse(g, s).with_context(|| format!("action set `{s}`")),
        (None, true) => Ok(maximal_action_set(g)),
        (None, false) => Err(input("pass --actions <SPEC> or --maximal")),
    }
}

fn plan_json(plan: &RealizationPlan, g: &CausalDiagram, q: &CtfQuery) -> Value {
    let steps: Vec<Value> = plan
        .steps
        .iter()
        .map(|s| {
            let iv: Vec<Value> = s
                .interventions
                .iter()
                .map(|(a, t)| {
                    json!({
                        "action": a.display(g).to_string(),
                        "tag": match t { Tag::Value(_) => "value", Tag::Natural => "natural" },
                        "value": match t { Tag::Value(v) => json!(g.value_name(s.var, *v)), Tag::Natural => Value::Null },
                    })
                })
                .collect();
            json!({ "var": g.name(s.var), "interventions": iv, "reads": s.reads })
        })
        .collect();
    json!({
        "steps": steps,
        "outputs": plan.outputs.iter().map(|&v| g.name(v)).collect::<Vec<_>>(),
        "uniform_acceptance": plan.uniform_acceptance(g),
        "description": plan.describe(g, q),
    })
}

fn witness_json(w: &Witness, g: &CausalDiagram, q: &CtfQuery) -> Value {
    json!({
        "kind": format!("{:?}", w.kind),
        "var": g.name(w.var),
        "child": w.child.map(|c| g.name(c)),
        "action": w.action.map(|a| a.display(g).to_string()),
        "terms": [w.terms().0, Some(w.terms().1)],
        "message": w.describe(g, q),
    })
}

/// The clashing pair of counterfactual ancestors, which rules the query
/// out under every action set.
fn criterion_witness(q: &CtfQuery, g: &CausalDiagram) -> Option<(PotentialResponse, PotentialResponse)> {
    realizable_by_criterion(q, g).witness
}

fn print_verdict(v: &Verdict, g: &CausalDiagram, q: &CtfQuery) {
    if let Some((a, b)) = criterion_witness(q, g) {
        println!("not realizable: {}", q.display(g));
        println!("graphical witness: {} and {} are both required", a.display(g), b.display(g));
    }
    match v {
        Verdict::Realizable(plan) => {
            println!("realizable: {}", q.display(g));
            print!("{}", plan.describe(g, q));
            println!("acceptance with uniform devices: {:.6}", plan.uniform_acceptance(g));
        }
        Verdict::NotRealizable(w) => {
            if criterion_witness(q, g).is_none() {
                println!("not realizable: {}", q.display(g));
            }
            println!("{:?}: {}", w.kind, w.describe(g, q));
        }
    }
}

fn write_run(out: &OutputArgs, sub: &str, fill: impl FnOnce(&mut RunDir) -> Result<()>) -> Result<()> {
    let mut run = RunDir::new(resolve_dir(out.out.as_deref(), sub), out.format);
    fill(&mut run)?;
    let dir = run.commit()?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

pub fn realize(a: &RealizeArgs) -> Result<Outcome> {
    let f = load(&a.graph)?;
    let (g, actions) = if a.expanded {
        let spec = f.expanded.as_ref().ok_or_else(|| input("--expanded needs a fixture with expanded metadata"))?;
        let exp = ExpandedDiagram::new(f.diagram.clone(), spec)?;
        let acts = environment_actions(&exp)?;
        (exp.base().clone(), acts)
    } else {
        let acts = actions_for(&f.diagram, a.actions.as_deref(), a.maximal)?;
        (f.diagram.clone(), acts)
    };
    let q = query(&a.query, &g)?;
    let v = ctf_realize(&q, &g, &actions)?;
    print_verdict(&v, &g, &q);
    let mut doc = envelope("realize", a, None)?;
    doc.insert("query".into(), json!(q.display(&g).to_string()));
    doc.insert("actions".into(), json!(actions.display(&g)));
    doc.insert("realizable".into(), json!(v.is_realizable()));
    match &v {
        Verdict::Realizable(p) => doc.insert("plan".into(), plan_json(p, &g, &q)),
        Verdict::NotRealizable(w) => doc.insert("witness".into(), witness_json(w, &g, &q)),
    };
    let pair = criterion_witness(&q, &g).map(|(x, y)| [x.display(&g).to_string(), y.display(&g).to_string()]);
    doc.insert("criterion_witness".into(), json!(pair));
    write_run(&a.output, "realize", |r| r.json("realize.json", &Value::Object(doc)))?;
    Ok(if v.is_realizable() { Outcome::Success } else { Outcome::NotRealizable })
}

fn distribution_rows(dist: &ctfkit::ExactDistribution, g: &CausalDiagram, q: &CtfQuery) -> Vec<(Vec<String>, f64)> {
    dist.iter()
        .map(|(row, p)| {
            let vals = row.iter().zip(&q.terms).map(|(&v, t)| g.value_name(t.var, v).to_string()).collect();
            (vals, p)
        })
        .collect()
}

fn table_csv(header: &[String], rows: &[(Vec<String>, f64)], extra: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut h = header.to_vec();
    h.push(extra.to_string());
    w.write_record(&h)?;
    for (vals, p) in rows {
        let mut rec = vals.clone();
        rec.push(format!("{p:.12}"));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn term_headers(g: &CausalDiagram, q: &CtfQuery) -> Vec<String> {
    q.terms.iter().map(|t| t.display(g).to_string()).collect()
}

pub fn eval(a: &EvalArgs) -> Result<Outcome> {
    let f = load(&a.graph)?;
    let m = f.require_model().map_err(|e| input(e.to_string()))?;
    let g = m.diagram();
    let q = query(&a.query, g)?;
    let mut doc = envelope("eval", a, None)?;
    doc.insert("query".into(), json!(q.display(g).to_string()));
    if q.is_valued() {
        let p = exact_l3_probability(m, &q)?;
        println!("{} = {p:.12}", q.display(g));
        doc.insert("probability".into(), json!(p));
        write_run(&a.output, "eval", |r| r.json("eval.json", &Value::Object(doc)))?;
        return Ok(Outcome::Success);
    }
    let dist = exact_distribution(m, &q)?;
    let header = term_headers(g, &q);
    let rows = distribution_rows(&dist, g, &q);
    println!("{}\tP", header.join("\t"));
    for (vals, p) in &rows {
        println!("{}\t{p:.12}", vals.join("\t"));
    }
    let table: Vec<Value> = rows.iter().map(|(v, p)| json!({ "values": v, "p": p })).collect();
    doc.insert("terms".into(), json!(header));
    doc.insert("distribution".into(), json!(table));
    let csv = table_csv(&header, &rows, "p")?;
    write_run(&a.output, "eval", |r| {
        r.json("eval.json", &Value::Object(doc))?;
        r.csv("distribution.csv", csv);
        Ok(())
    })?;
    Ok(Outcome::Success)
}

pub fn sample(a: &SampleArgs) -> Result<Outcome> {
    let f = load(&a.graph)?;
    let m = f.require_model().map_err(|e| input(e.to_string()))?;
    let g = m.diagram();
    let q = query(&a.query, g)?;
    let actions = actions_for(g, a.actions.as_deref(), a.maximal)?;
    let v = ctf_realize(&q, g, &actions)?;
    let Some(plan) = v.plan() else {
        print_verdict(&v, g, &q);
        return Ok(Outcome::NotRealizable);
    };
    let seed = seed_or_random(a.seed);
    let pop = Population::with_actions(m, actions.clone())?;
    let batch = sample_plan(plan, &q.terms, &pop, a.n, seed, a.max_rejections)?;
    let header = term_headers(g, &q);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for row in &batch.rows {
        w.write_record(row.iter().zip(&q.terms).map(|(&v, t)| g.value_name(t.var, v)))?;
    }
    let samples = String::from_utf8(w.into_inner()?)?;

    let empirical = batch.empirical();
    let mut doc = envelope("sample", a, Some(seed))?;
    doc.insert("query".into(), json!(q.display(g).to_string()));
    doc.insert("actions".into(), json!(actions.display(g)));
    doc.insert("accepted".into(), json!(batch.len()));
    doc.insert("rejected".into(), json!(batch.rejected));
    doc.insert("acceptance_rate".into(), json!(batch.acceptance_rate()));
    doc.insert("plan".into(), plan_json(plan, g, &q));
    let named = |row: &[usize]| -> Vec<String> {
        row.iter().zip(&q.terms).map(|(&v, t)| g.value_name(t.var, v).to_string()).collect()
    };
    match exact_distribution(m, &q) {
        Ok(exact) => {
            let table: Vec<Value> = exact
                .iter()
                .map(|(row, p)| json!({ "values": named(row), "exact": p, "empirical": empirical.get(row).copied().unwrap_or(0.0) }))
                .collect();
            let tv = exact.total_variation(&empirical);
            doc.insert("table".into(), json!(table));
            doc.insert("total_variation".into(), json!(tv));
            println!("{} samples, acceptance {:.4}, total variation {tv:.4}", batch.len(), batch.acceptance_rate());
        }
        Err(Error::TooLarge(msg)) => {
            log::info!("skipping exact comparison: {msg}");
            let table: Vec<Value> =
                empirical.iter().map(|(row, p)| json!({ "values": named(row), "empirical": p })).collect();
            doc.insert("table".into(), json!(table));
            doc.insert("total_variation".into(), Value::Null);
            println!("{} samples, acceptance {:.4}", batch.len(), batch.acceptance_rate());
        }
        Err(e) => return Err(e.into()),
    }
    write_run(&a.output, "sample", |r| {
        r.csv("samples.csv", samples);
        r.json("summary.json", &Value::Object(doc))
    })?;
    Ok(Outcome::Success)
}

pub fn bandit(a: &BanditArgs) -> Result<Outcome> {
    let algo: Algo = a.algo.parse().map_err(|_| {
        let names: Vec<&str> = Algo::ALL.iter().map(|x| x.name()).collect();
        input(format!("unknown algorithm `{}` (one of: {})", a.algo, names.join(", ")))
    })?;
    let f = load(&a.problem)?;
    let m = f.require_model().map_err(|e| input(e.to_string()))?.clone();
    let p = MabProblem::new(m)?;
    let seed = seed_or_random(a.seed);
    let obs = match a.obs_samples {
        Some(n) => ObsTable::estimate(&p, n, ctfkit::rng::derive_seed(seed, &[u64::MAX]))?,
        None => ObsTable::exact(&p),
    };
    let metrics = run_epochs_with_obs(algo, &p, a.horizon, a.epochs, seed, &obs)?;
    let summary = metrics.summary();
    let mut tiers = serde_json::Map::new();
    for tier in [StrategyTier::Obs, StrategyTier::Int, StrategyTier::Ett, StrategyTier::Opt] {
        let v = evaluate_strategy_exact(&p, &p.tier_strategy(tier))?;
        tiers.insert(serde_json::to_value(tier)?.as_str().unwrap_or_default().to_string(), json!(v));
    }
    let mut doc = envelope("bandit", a, Some(seed))?;
    doc.insert("summary".into(), serde_json::to_value(&summary)?);
    doc.insert("strategy_values".into(), Value::Object(tiers));
    println!(
        "{algo}: terminal reward {:.4} (optimum {:.4}), final CR {}",
        summary.terminal_reward.mean,
        summary.optimum,
        summary.final_cr.map(|b| format!("{:.2}", b.mean)).unwrap_or_else(|| "-".into())
    );
    write_run(&a.output, "bandit", |r| {
        r.csv("cr.csv", metrics.cr_csv());
        r.csv("oap.csv", metrics.oap_csv());
        r.json("summary.json", &Value::Object(doc))
    })?;
    Ok(Outcome::Success)
}

pub fn fairness(a: &FairnessArgs) -> Result<Outcome> {
    let constraint = match a.constraint.as_str() {
        "l2" | "l2_penalty" => Constraint::L2Penalty,
        "l3" | "l3_penalty" => Constraint::L3Penalty,
        other => return Err(input(format!("unknown constraint `{other}` (one of: l2, l3)"))),
    };
    if !(a.epsilon >= 0.0 && a.epsilon.is_finite()) {
        return Err(input("--epsilon must be a finite non-negative number"));
    }
    let seed = seed_or_random(a.seed);
    let s = sample_constrained_scms(constraint, a.n, a.epsilon, seed, &SamplerConfig::default())?;
    let mean = s.scms.iter().map(|(_, r)| r.mu_ctf).sum::<f64>() / s.scms.len() as f64;
    let mut doc = envelope("fairness", a, Some(seed))?;
    doc.insert("constraint".into(), serde_json::to_value(constraint)?);
    doc.insert("accepted".into(), json!(s.scms.len()));
    doc.insert("proposals".into(), json!(s.proposals));
    doc.insert("acceptance_rate".into(), json!(s.acceptance_rate()));
    doc.insert("threshold".into(), json!(DISCRIMINATION_THRESHOLD));
    doc.insert("fraction_above_threshold".into(), json!(s.fraction_discriminating()));
    doc.insert("mean_mu_ctf".into(), json!(mean));
    println!(
        "{} models under {constraint:?} <= {}: {:.1}% have mu_ctf > {DISCRIMINATION_THRESHOLD}",
        s.scms.len(),
        a.epsilon,
        100.0 * s.fraction_discriminating()
    );
    write_run(&a.output, "fairness", |r| {
        r.csv("mu_ctf_histogram.csv", s.histogram_csv());
        r.json("summary.json", &Value::Object(doc))
    })?;
    Ok(Outcome::Success)
}

pub fn procedures(a: &ProceduresArgs) -> Result<Outcome> {
    let f = load(&a.graph)?;
    let spec = f.expanded.as_ref().ok_or_else(|| input("the fixture has no expanded-diagram metadata"))?;
    let exp = ExpandedDiagram::new(f.diagram.clone(), spec)?;
    let base = exp.base();
    let vars: Vec<usize> = match &a.var {
        Some(name) => vec![base.id(name).map_err(|e| input(e.to_string()))?],
        None => {
            let mut v: Vec<usize> = exp.mediators().iter().filter_map(|m| exp.to_base(m.of)).collect();
            v.extend(exp.elicit_natural().iter().filter_map(|x| exp.to_base(x)));
            v.sort_unstable();
            v.dedup();
            v
        }
    };
    let mut per_var = serde_json::Map::new();
    for &x in &vars {
        let procs = ctf_procedures(&exp, x)?;
        let list: Vec<String> = procs.to_vec().iter().map(|p| p.display(base).to_string()).collect();
        println!("{}: {}", base.name(x), if list.is_empty() { "-".to_string() } else { list.join(", ") });
        per_var.insert(base.name(x).to_string(), json!(list));
    }
    let env = environment_actions(&exp)?;
    println!("environment: {}", env.display(base));
    let mut doc = envelope("procedures", a, None)?;
    doc.insert("base_variables".into(), json!(base.names()));
    doc.insert("procedures".into(), Value::Object(per_var));
    doc.insert("environment_actions".into(), json!(env.display(base)));
    write_run(&a.output, "procedures", |r| r.json("procedures.json", &Value::Object(doc)))?;
    Ok(Outcome::Success)
}
