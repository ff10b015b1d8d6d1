mod common;

use ctfkit::catalog;
use ctfkit::sim::{sample_plan, MechanismStatus, DEFAULT_MAX_REJECTIONS};
use ctfkit::{
    ctf_realize, exact_distribution, maximal_action_set, parse_query, ActionSet, Error, Population, RandomDevice,
    VarSet,
};
use proptest::prelude::*;

#[test]
fn supersede_on_base_and_expanded_models() {
    common::supersede_base().unwrap();
    common::supersede_expanded().unwrap();
}

#[test]
fn small_sample_matches_exact_joint() {
    common::sampling_fidelity(20_000, 11, 0.05).unwrap();
}

#[test]
fn reads_are_lazy_and_idempotent() {
    let m = catalog::bow_scm();
    let g = m.diagram();
    let (x, y) = (g.id("X").unwrap(), g.id("Y").unwrap());
    let pop = Population::new(&m).unwrap();
    let mut rng = ctfkit::rng::stream(1, &[]);
    let mut unit = pop.select(0, &mut rng);
    assert_eq!(unit.status(x), MechanismStatus::Unfired);
    let first = unit.read(y).unwrap();
    assert_eq!(unit.status(x), MechanismStatus::Fired);
    assert_eq!(unit.read(y).unwrap(), first);
    assert_eq!(unit.fire_count(x), 1);
    assert_eq!(unit.fire_count(y), 1);
    assert!(matches!(unit.rand(x, &RandomDevice::Uniform, &mut rng), Err(Error::Fce(_))));
}

#[test]
fn ctf_rand_leaves_the_natural_value_intact() {
    let m = catalog::bow_scm();
    let g = m.diagram();
    let (x, y) = (g.id("X").unwrap(), g.id("Y").unwrap());
    let pop = Population::new(&m).unwrap();
    let mut rng = ctfkit::rng::stream(2, &[]);
    for (u, _) in m.support() {
        let natural = m.forward(u)[x];
        let mut unit = pop.unit_with(0, u.to_vec());
        unit.ctf_rand(x, VarSet::singleton(y), &RandomDevice::Constant(1 - natural), &mut rng).unwrap();
        assert_eq!(unit.read(x).unwrap(), natural);
        let mut twin = pop.unit_with(1, u.to_vec());
        twin.rand(x, &RandomDevice::Constant(1 - natural), &mut rng).unwrap();
        assert_eq!(unit.read(y).unwrap(), twin.read(y).unwrap());
    }
}

#[test]
fn restricted_population_rejects_missing_actions() {
    let m = catalog::bow_scm();
    let g = m.diagram();
    let pop = Population::with_actions(&m, ActionSet::parse(g, "Rand(X)").unwrap()).unwrap();
    let mut rng = ctfkit::rng::stream(3, &[]);
    let mut unit = pop.select(0, &mut rng);
    let (x, y) = (g.id("X").unwrap(), g.id("Y").unwrap());
    assert!(matches!(
        unit.ctf_rand(x, VarSet::singleton(y), &RandomDevice::Uniform, &mut rng),
        Err(Error::ActionUnavailable(_))
    ));
    unit.rand(x, &RandomDevice::Uniform, &mut rng).unwrap();
}

#[test]
fn bad_devices_are_rejected() {
    let m = catalog::bow_scm();
    let pop = Population::new(&m).unwrap();
    let mut rng = ctfkit::rng::stream(4, &[]);
    let mut unit = pop.select(0, &mut rng);
    assert!(unit.rand(0, &RandomDevice::Constant(5), &mut rng).is_err());
    assert!(unit.rand(0, &RandomDevice::Weighted(vec![1.0, 0.0]), &mut rng).is_err());
    assert!(unit.rand(0, &RandomDevice::Weighted(vec![1.0]), &mut rng).is_err());
}

#[test]
fn rejection_cap_is_reported() {
    let m = catalog::fig11_base_scm();
    let g = m.diagram();
    let q = parse_query("P(Y[X=0], Z[X=1], T[X=2], B[X=2])", g).unwrap();
    let a = maximal_action_set(g);
    let v = ctf_realize(&q, g, &a).unwrap();
    let pop = Population::with_actions(&m, a).unwrap();
    let err = sample_plan(v.plan().unwrap(), &q.terms, &pop, 10, 5, 0).unwrap_err();
    match err {
        Error::MaxRejections { acceptance, .. } => assert!((acceptance - 1.0 / 81.0).abs() < 1e-12),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn sampling_is_reproducible() {
    let m = catalog::bow_scm();
    let g = m.diagram();
    let q = parse_query("P(Y[X=1], X)", g).unwrap();
    let a = maximal_action_set(g);
    let v = ctf_realize(&q, g, &a).unwrap();
    let pop = Population::with_actions(&m, a).unwrap();
    let one = sample_plan(v.plan().unwrap(), &q.terms, &pop, 500, 9, DEFAULT_MAX_REJECTIONS).unwrap();
    let two = sample_plan(v.plan().unwrap(), &q.terms, &pop, 500, 9, DEFAULT_MAX_REJECTIONS).unwrap();
    assert_eq!(one, two);
    assert!(one.acceptance_rate() > 0.3 && one.acceptance_rate() < 0.7);
    let exact = exact_distribution(&m, &q).unwrap();
    assert!(exact.total_variation(&one.empirical()) < 0.1);
}

fn small_fixtures() -> Vec<(&'static str, ctfkit::ScmModel)> {
    common::model_fixtures().into_iter().filter(|(_, m)| m.support_len() <= 4096 && m.diagram().len() <= 8).collect()
}

fn tv(a: &std::collections::BTreeMap<Vec<usize>, f64>, b: &std::collections::BTreeMap<Vec<usize>, f64>) -> f64 {
    let keys: std::collections::BTreeSet<&Vec<usize>> = a.keys().chain(b.keys()).collect();
    keys.into_iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum::<f64>() / 2.0
}

fn normalize(counts: std::collections::BTreeMap<Vec<usize>, f64>) -> std::collections::BTreeMap<Vec<usize>, f64> {
    let total: f64 = counts.values().sum();
    counts.into_iter().map(|(k, c)| (k, c / total)).collect()
}

/// Units are drawn before any action, so a fixed plan of actions leaves the
/// exogenous distribution of the selected units untouched.
#[test]
fn selection_is_independent_of_the_actions_taken() {
    let n = 40_000;
    for (name, m) in small_fixtures() {
        let g = m.diagram();
        let pop = Population::new(&m).unwrap();
        let mut rng = ctfkit::rng::stream(17, &[]);
        let first = g.topological_order()[0];
        let children = g.children_of(first);
        let mut counts = std::collections::BTreeMap::new();
        for id in 0..n {
            let mut unit = pop.select(id, &mut rng);
            match children.iter().next() {
                Some(c) => unit.ctf_rand(first, VarSet::singleton(c), &RandomDevice::Uniform, &mut rng).map(|_| ()),
                None => unit.rand(first, &RandomDevice::Uniform, &mut rng).map(|_| ()),
            }
            .unwrap();
            let last = *g.topological_order().last().unwrap();
            unit.read(last).unwrap();
            *counts.entry(unit.reveal_exogenous().to_vec()).or_insert(0.0) += 1.0;
        }
        let exact: std::collections::BTreeMap<Vec<usize>, f64> = m.support().map(|(u, p)| (u.to_vec(), p)).collect();
        let d = tv(&normalize(counts), &exact);
        let slack = 0.5 * (m.support_len() as f64 / n as f64).sqrt() + 0.01;
        assert!(d < slack, "{name}: tv {d} >= {slack}");
    }
}

/// Randomizing a variable and conditioning on the drawn value reproduces
/// the atomic intervention on that value.
#[test]
fn conditioning_on_the_drawn_value_matches_do() {
    let n = 60_000;
    for (name, m) in small_fixtures() {
        let g = m.diagram();
        let pop = Population::new(&m).unwrap();
        let x = g.topological_order()[0];
        let rest = g.all().without(x);
        if rest.is_empty() {
            continue;
        }
        let mut counts = vec![std::collections::BTreeMap::new(); g.domain_size(x)];
        let mut rng = ctfkit::rng::stream(23, &[x as u64]);
        for id in 0..n {
            let mut unit = pop.select(id, &mut rng);
            let drawn = unit.rand(x, &RandomDevice::Uniform, &mut rng).unwrap();
            let row: Vec<usize> = rest.iter().map(|v| unit.read(v).unwrap()).collect();
            *counts[drawn].entry(row).or_insert(0.0) += 1.0;
        }
        for (value, c) in counts.into_iter().enumerate() {
            let exact = ctfkit::interventional_distribution(&m, rest, &[(x, value)]).unwrap();
            let d = exact.total_variation(&normalize(c));
            assert!(d < 0.03, "{name}: do({}={value}) tv {d}", g.name(x));
        }
    }
}

fn fixture_index() -> impl Strategy<Value = usize> {
    0..common::model_fixtures().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn fce_holds_on_random_sequences(k in fixture_index(), seed in any::<u64>(), len in 1usize..20) {
        use rand::Rng;
        let fixtures = common::model_fixtures();
        let model = &fixtures[k].1;
        let mut rng = ctfkit::rng::stream(seed, &[]);
        let u = model.support_state(rng.random_range(0..model.support_len())).to_vec();
        let steps = common::random_steps(model, len, &mut rng);
        if let Err(e) = common::check_fce_sequence(model, u, &steps) {
            return Err(TestCaseError::fail(format!("{}: {e}; {steps:?}", fixtures[k].0)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ctf_rand_never_changes_the_natural_decision(k in fixture_index(), pick in any::<u64>(), seed in any::<u64>()) {
        use rand::Rng;
        let fixtures = common::model_fixtures();
        let m = &fixtures[k].1;
        let g = m.diagram();
        let parents: Vec<usize> = (0..g.len()).filter(|&v| !g.children_of(v).is_empty()).collect();
        if parents.is_empty() {
            return Ok(());
        }
        let x = parents[(pick % parents.len() as u64) as usize];
        let pop = Population::new(m).unwrap();
        let mut rng = ctfkit::rng::stream(seed, &[]);
        for (u, _) in m.support().take(256) {
            let mut unit = pop.unit_with(0, u.to_vec());
            for c in g.children_of(x).iter() {
                if rng.random_bool(0.7) {
                    let value = rng.random_range(0..g.domain_size(x));
                    unit.ctf_rand(x, VarSet::singleton(c), &RandomDevice::Constant(value), &mut rng).unwrap();
                }
            }
            prop_assert_eq!(unit.read(x).unwrap(), m.forward(u)[x]);
        }
    }
}
