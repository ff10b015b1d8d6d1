//! Acceptance run: every criterion at full scale, one PASS/FAIL line each.
//! Exits with status 1 if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::Check;
use ctfkit::bandits::{example3_problem, run_epochs_with_obs, AggregatedMetrics, Algo, ObsTable};
use ctfkit::enumerate::check_equivalence;
use rand::Rng;

const SEED: u64 = 7;

fn equivalence() -> Check {
    let r = check_equivalence(4, 3, 2).map_err(|e| e.to_string())?;
    let msg = format!("{} diagrams, {} queries, {} realizable", r.diagrams, r.queries, r.realizable);
    if r.disagreements.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {} disagreements, first {:?}", r.disagreements.len(), r.disagreements[0]))
    }
}

fn fce() -> Check {
    let fixtures = common::model_fixtures();
    let mut rng = ctfkit::rng::stream(SEED, &[4]);
    let sequences = 10_000;
    let mut raised = 0;
    for i in 0..sequences {
        let (name, model) = &fixtures[rng.random_range(0..fixtures.len())];
        let u = model.support_state(rng.random_range(0..model.support_len())).to_vec();
        let len = rng.random_range(1..=16);
        let steps = common::random_steps(model, len, &mut rng);
        raised += common::check_fce_sequence(model, u, &steps).map_err(|e| format!("sequence {i} on {name}: {e}"))?;
    }
    Ok(format!("{sequences} sequences, {raised} violations raised"))
}

fn supersede() -> Check {
    let a = common::supersede_base()?;
    let b = common::supersede_expanded()?;
    Ok(format!("base {a}; expanded {b}"))
}

fn bandits() -> Check {
    let p = example3_problem();
    let obs = ObsTable::exact(&p);
    let run = |a: Algo| run_epochs_with_obs(a, &p, 2000, 200, SEED, &obs).map_err(|e| e.to_string());
    let ts = run(Algo::Ts)?;
    let aug = run(Algo::TsAug)?;
    let ett = run(Algo::TsEtt)?;
    let opt = run(Algo::TsOpt)?;
    let mut bad = Vec::new();
    for (m, want) in [(&opt, 0.80), (&ett, 0.75), (&ts, 0.70)] {
        if (m.terminal_reward.mean - want).abs() > 0.02 {
            bad.push(format!("{} terminal {:.4} vs {want}", m.algo, m.terminal_reward.mean));
        }
    }
    let last = |m: &AggregatedMetrics| *m.cr.last().expect("nonempty horizon");
    let below = |a: &AggregatedMetrics, b: &AggregatedMetrics| last(a).upper < last(b).lower;
    if !below(&opt, &ett) {
        bad.push("opt CR band overlaps ett".into());
    }
    for other in [&ts, &aug] {
        if !below(&ett, other) {
            bad.push(format!("ett CR band overlaps {}", other.algo));
        }
    }
    let msg = [&ts, &aug, &ett, &opt]
        .iter()
        .map(|m| format!("{} {:.3}/{:.1}", m.algo, m.terminal_reward.mean, last(m).mean))
        .collect::<Vec<_>>()
        .join(", ");
    if bad.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", bad.join("; ")))
    }
}

type Criterion = (&'static str, Box<dyn Fn() -> Check>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("algorithm-criterion equivalence", Box::new(equivalence)),
        ("worked examples", Box::new(common::golden_cases)),
        ("sampling fidelity", Box::new(|| common::sampling_fidelity(100_000, SEED, 0.02))),
        ("FCE enforcement", Box::new(fce)),
        ("supersede semantics", Box::new(supersede)),
        ("mediator lemma", Box::new(common::mediator_lemma)),
        ("example 3 exact values", Box::new(|| common::example3_values(1e-12))),
        ("bandit reproduction", Box::new(bandits)),
        ("fairness exact values", Box::new(|| common::fairness_values(100_000, SEED))),
        ("fairness contrast", Box::new(|| common::fairness_contrast(1000, 0.01, SEED))),
        ("estimator unbiasedness", Box::new(|| common::estimator_unbiased(200, 1000, SEED))),
        ("natural direct effect", Box::new(common::nde_checks)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(m) => println!("PASS {:>2} {name} [{secs:.1}s]: {m}", i + 1),
            Err(m) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1}s]: {m}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
