mod common;

use ctfkit::catalog;
use ctfkit::enumerate::{canonical_diagrams, check_diagram};
use ctfkit::realize::environment_actions;
use ctfkit::{
    ctf_procedures, ctf_realize, maximal_action_set, parse_query, realizable_by_criterion, Action, ActionSet,
    CausalDiagram, Error, ExpandedDiagram, FailureKind,
};
use proptest::prelude::*;

fn ctf_sets(exp: &ExpandedDiagram, a: &ActionSet, x: &str) -> Vec<Vec<String>> {
    let g = exp.base();
    let mut sets: Vec<Vec<String>> = a.ctf_sets(g.id(x).unwrap()).iter().map(|&t| sorted(g.names_of(t))).collect();
    sets.sort();
    sets
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

fn names(sets: &[&[&str]]) -> Vec<Vec<String>> {
    let mut v: Vec<Vec<String>> = sets.iter().map(|s| sorted(s.iter().map(|n| n.to_string()).collect())).collect();
    v.sort();
    v
}

#[test]
fn golden_verdicts() {
    common::golden_cases().unwrap();
}

#[test]
fn shared_grandchild_breaks_the_tree_structure() {
    let (g, s) = catalog::fig9a();
    assert!(matches!(ExpandedDiagram::new(g, &s), Err(Error::TreeStructure(_))));
}

#[test]
fn elicited_decision_gets_a_joint_ctf_rand() {
    let (g, s) = catalog::fig9b();
    let exp = ExpandedDiagram::new(g, &s).unwrap();
    let x = exp.base().id("X").unwrap();
    let procs = ctf_procedures(&exp, x).unwrap();
    assert_eq!(ctf_sets(&exp, &procs, "X"), names(&[&["Y", "Z"]]));
}

#[test]
fn parallel_mediators_give_one_procedure_each() {
    let (m, s) = catalog::fig9c();
    let exp = ExpandedDiagram::new(m.diagram().clone(), &s).unwrap();
    let x = exp.base().id("X").unwrap();
    let procs = ctf_procedures(&exp, x).unwrap();
    assert_eq!(ctf_sets(&exp, &procs, "X"), names(&[&["Y"], &["T", "Z"]]));
}

#[test]
fn chained_mediators_give_nested_procedures() {
    let (g, s) = catalog::fig9d();
    let exp = ExpandedDiagram::new(g, &s).unwrap();
    let x = exp.base().id("X").unwrap();
    let procs = ctf_procedures(&exp, x).unwrap();
    assert_eq!(ctf_sets(&exp, &procs, "X"), names(&[&["T", "Y", "Z"], &["T", "Z"]]));
}

#[test]
fn mediator_below_a_base_variable_is_rejected() {
    let (g, s) = catalog::fig10b();
    assert!(matches!(ExpandedDiagram::new(g, &s), Err(Error::NoForks { .. })));
}

#[test]
fn environment_actions_enable_path_specific_queries() {
    let (m, s) = catalog::fig9c();
    let exp = ExpandedDiagram::new(m.diagram().clone(), &s).unwrap();
    let base = exp.base();
    let actions = environment_actions(&exp).unwrap();
    let ok = parse_query("P(Y[X=1], Z[X=1], T[X=1], X)", base).unwrap();
    assert!(ctf_realize(&ok, base, &actions).unwrap().is_realizable());
    let clash = parse_query("P(Z[X=1], T[X=0])", base).unwrap();
    let v = ctf_realize(&clash, base, &actions).unwrap();
    assert_eq!(v.witness().unwrap().kind, FailureKind::CtfRandValueClash);
    // Z and T share a mediator, so only the idealized action set separates them.
    assert!(ctf_realize(&clash, base, &maximal_action_set(base)).unwrap().is_realizable());
}

#[test]
fn ett_needs_ctf_rand() {
    let g = catalog::bow();
    let q = parse_query("P(Y[X=1], X)", &g).unwrap();
    let rand_only = ActionSet::parse(&g, "Rand(X)").unwrap();
    assert!(!ctf_realize(&q, &g, &rand_only).unwrap().is_realizable());
    let plan = ctf_realize(&q, &g, &maximal_action_set(&g)).unwrap();
    let plan = plan.plan().unwrap();
    let x = g.id("X").unwrap();
    let y = g.id("Y").unwrap();
    let rands: Vec<_> = plan.randomizations().collect();
    assert_eq!(rands, vec![(Action::CtfRand(x, ctfkit::VarSet::singleton(y)), 1)]);
    assert!((plan.uniform_acceptance(&g) - 0.5).abs() < 1e-15);
}

#[test]
fn fundamental_problem_is_never_realizable() {
    for g in [catalog::single_edge(), catalog::bow(), catalog::chain()] {
        let q = parse_query("P(Y[X=1], Y[X=0])", &g).or_else(|_| parse_query("P(W[X=1], W[X=0])", &g)).unwrap();
        assert!(!realizable_by_criterion(&q, &g).realizable);
        assert!(!ctf_realize(&q, &g, &maximal_action_set(&g)).unwrap().is_realizable());
    }
}

#[test]
fn empty_action_set_cannot_realize_anything_interventional() {
    let g = catalog::bow();
    let q = parse_query("P(Y[X=1])", &g).unwrap();
    let v = ctf_realize(&q, &g, &ActionSet::reads_only(&g)).unwrap();
    assert_eq!(v.witness().unwrap().kind, FailureKind::NoAction);
}

fn small_diagram() -> impl Strategy<Value = CausalDiagram> {
    (1usize..=4, any::<u64>()).prop_map(|(n, pick)| {
        let all = canonical_diagrams(n).unwrap();
        all[(pick % all.len() as u64) as usize].clone()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn algorithm_agrees_with_criterion(g in small_diagram()) {
        let r = check_diagram(&g, 2, 2).unwrap();
        prop_assert!(r.disagreements.is_empty(), "{:?}", r.disagreements.first());
    }

    #[test]
    fn adding_actions_never_loses_realizability(g in small_diagram(), pick in any::<u64>()) {
        let terms = ctfkit::enumerate::enumerate_terms(&g, 2);
        let k = terms.len() as u64;
        let q = ctfkit::CtfQuery::new(vec![
            terms[(pick % k) as usize].clone(),
            terms[((pick / k) % k) as usize].clone(),
        ]);
        let mut small = ActionSet::reads_only(&g);
        for v in 0..g.len() {
            small.insert(&g, Action::Rand(v)).unwrap();
        }
        let big = maximal_action_set(&g).union(&g, &small).unwrap();
        if ctf_realize(&q, &g, &small).unwrap().is_realizable() {
            prop_assert!(ctf_realize(&q, &g, &big).unwrap().is_realizable());
        }
    }
}

/// The shared full regime of a query whose terms all live in one
/// interventional world, if there is one.
fn single_regime(q: &ctfkit::CtfQuery, g: &CausalDiagram) -> Option<Vec<ctfkit::Intervention>> {
    let terms: Vec<_> = q.terms.iter().map(|t| t.normalized(g)).collect();
    let mut regime: Vec<ctfkit::Intervention> = Vec::new();
    for t in &terms {
        for i in &t.regime {
            i.targets.is_none().then_some(())?;
            match regime.iter().find(|r| r.var == i.var) {
                Some(r) if r.value != i.value => return None,
                Some(_) => {}
                None => regime.push(i.clone()),
            }
        }
    }
    let world_vars: ctfkit::VarSet = regime.iter().map(|r| r.var).collect();
    for t in &terms {
        if world_vars.contains(t.var) {
            return None;
        }
        let lifted = ctfkit::PotentialResponse::new(t.var, regime.clone()).normalized(g);
        if lifted != *t {
            return None;
        }
    }
    Some(regime)
}

#[test]
fn reads_and_rands_realize_exactly_the_interventional_queries() {
    for n in 1..=4 {
        for g in canonical_diagrams(n).unwrap() {
            let terms = ctfkit::enumerate::enumerate_terms(&g, 2);
            let reads = ActionSet::reads_only(&g);
            let mut rands = reads.clone();
            for v in 0..g.len() {
                rands.insert(&g, Action::Rand(v)).unwrap();
            }
            for i in 0..terms.len() {
                for j in i..terms.len() {
                    let mut picked = vec![terms[i].clone()];
                    if j > i {
                        picked.push(terms[j].clone());
                    }
                    let q = ctfkit::CtfQuery::new(picked);
                    let natural = q.terms.iter().all(|t| t.normalized(&g).is_natural());
                    assert_eq!(ctf_realize(&q, &g, &reads).unwrap().is_realizable(), natural, "{}", q.display(&g));
                    let l2 = single_regime(&q, &g).is_some();
                    assert_eq!(ctf_realize(&q, &g, &rands).unwrap().is_realizable(), l2, "{}", q.display(&g));
                }
            }
        }
    }
}

#[test]
fn fundamental_problem_on_every_small_diagram() {
    let mut checked = 0;
    for n in 2..=4 {
        for g in canonical_diagrams(n).unwrap() {
            let acts = maximal_action_set(&g);
            for x in 0..g.len() {
                for y in g.descendants_of(ctfkit::VarSet::singleton(x)).without(x).iter() {
                    let q = ctfkit::CtfQuery::new(vec![
                        ctfkit::PotentialResponse::new(y, vec![ctfkit::Intervention::full(x, 1)]),
                        ctfkit::PotentialResponse::new(y, vec![ctfkit::Intervention::full(x, 0)]),
                    ]);
                    assert!(!ctf_realize(&q, &g, &acts).unwrap().is_realizable(), "{}", q.display(&g));
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000, "{checked}");
}

#[test]
fn verdicts_are_deterministic() {
    for f in catalog::all_builtins() {
        let g = &f.diagram;
        let acts = maximal_action_set(g);
        for text in catalog::fixture_queries(f.name.as_deref().unwrap()) {
            let q = parse_query(text, g).unwrap();
            let a = format!("{:?}", ctf_realize(&q, g, &acts).unwrap());
            let b = format!("{:?}", ctf_realize(&q, g, &acts.clone()).unwrap());
            assert_eq!(a, b, "{text}");
        }
    }
}

fn path(n: usize) -> CausalDiagram {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    CausalDiagram::binary_from_ids(n, &edges, &[]).unwrap()
}

#[test]
fn work_grows_at_most_quadratically_on_paths() {
    let mut last: Option<(usize, u64)> = None;
    for n in [8, 16, 32, 64, 128] {
        let g = path(n);
        let q = ctfkit::CtfQuery::new(vec![
            ctfkit::PotentialResponse::new(n - 1, vec![ctfkit::Intervention::full(0, 1)]),
            ctfkit::PotentialResponse::new(n / 2, vec![ctfkit::Intervention::full(0, 1)]),
            ctfkit::PotentialResponse::new(0, vec![]),
        ]);
        let (v, stats) = ctfkit::realize::ctf_realize_with_stats(&q, &g, &maximal_action_set(&g)).unwrap();
        assert!(v.is_realizable());
        let work = stats.child_checks + stats.term_visits;
        if let Some((m, w)) = last {
            let ratio = work as f64 / w as f64;
            let bound = (n as f64 / m as f64).powi(2);
            assert!(ratio <= bound * 1.1, "n={n}: work {work} vs {w} at n={m}");
        }
        last = Some((n, work));
    }
}
