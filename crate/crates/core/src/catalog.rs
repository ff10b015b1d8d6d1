//! Builtin diagrams and models.
//!
//! Every named entry here is also shipped as a JSON file under `fixtures/`;
//! the files are generated from this module and a test keeps them in sync.

use rand::Rng;

use crate::diagram::{CausalDiagram, VarDecl};
use crate::fairness;
use crate::fixture::Fixture;
use crate::realize::FailureKind;
use crate::rng;
use crate::scm::{ExogenousDist, ExogenousVar, ExpandedSpec, Mechanism, MediatorAnnotation, ScmModel};

/// Incremental construction of a product-distribution model.
pub struct ModelBuilder {
    g: CausalDiagram,
    exo: Vec<ExogenousVar>,
    marginals: Vec<Vec<f64>>,
    mechs: Vec<Option<Mechanism>>,
}

impl ModelBuilder {
    pub fn new(g: CausalDiagram) -> Self {
        let n = g.len();
        ModelBuilder { g, exo: Vec::new(), marginals: Vec::new(), mechs: vec![None; n] }
    }

    pub fn diagram(&self) -> &CausalDiagram {
        &self.g
    }

    /// Adds an exogenous variable with the given marginal and returns its index.
    pub fn exogenous(&mut self, name: &str, probs: Vec<f64>) -> usize {
        self.exo.push(ExogenousVar::new(name, probs.len()));
        self.marginals.push(probs);
        self.exo.len() - 1
    }

    /// Sets the mechanism of `var` to `f(input values, exogenous values)`.
    pub fn mechanism(
        &mut self,
        var: &str,
        inputs: &[&str],
        exogenous: &[usize],
        f: impl Fn(&[usize], &[usize]) -> usize,
    ) -> &mut Self {
        let v = self.g.id(var).expect("builtin variable");
        let ins = inputs.iter().map(|i| self.g.id(i).expect("builtin variable")).collect();
        let m = Mechanism::from_fn(&self.g, &self.exo, ins, exogenous.to_vec(), f).expect("builtin mechanism");
        self.mechs[v] = Some(m);
        self
    }

    pub fn build(self) -> ScmModel {
        let mechs = self
            .mechs
            .into_iter()
            .enumerate()
            .map(|(v, m)| m.unwrap_or_else(|| panic!("no mechanism for {}", self.g.name(v))))
            .collect();
        ScmModel::new(self.g, self.exo, ExogenousDist::Product(self.marginals), mechs).expect("builtin model")
    }
}

fn binary(vars: &[&str], edges: &[(&str, &str)], bi: &[(&str, &str)]) -> CausalDiagram {
    CausalDiagram::binary(vars, edges, bi).expect("builtin diagram")
}

/// `X -> Y` with `X <-> Y`.
pub fn bow() -> CausalDiagram {
    binary(&["X", "Y"], &[("X", "Y")], &[("X", "Y")])
}

/// `X -> Y` without confounding.
pub fn single_edge() -> CausalDiagram {
    binary(&["X", "Y"], &[("X", "Y")], &[])
}

pub fn chain() -> CausalDiagram {
    binary(&["X", "A", "W"], &[("X", "A"), ("A", "W")], &[])
}

/// `T -> A <- X` with `A` feeding both `W` and `Z`; `X` is declared first.
pub fn collider_fork() -> CausalDiagram {
    binary(&["X", "T", "A", "W", "Z"], &[("T", "A"), ("X", "A"), ("A", "W"), ("A", "Z")], &[])
}

/// `X` with three children `Y`, `Z`, `W`.
pub fn fan() -> CausalDiagram {
    binary(&["X", "Y", "Z", "W"], &[("X", "Y"), ("X", "Z"), ("X", "W")], &[])
}

pub fn fig4_g1() -> CausalDiagram {
    binary(&["T", "X", "A", "W", "Z"], &[("T", "A"), ("A", "W"), ("A", "Z"), ("X", "Z")], &[("W", "Z")])
}

pub fn fig4_g2() -> CausalDiagram {
    binary(&["T", "X", "W", "Z"], &[("T", "W"), ("T", "Z"), ("X", "Z")], &[("W", "Z")])
}

/// Decision `X` affecting a score `Y` and a second decision `Z`, confounded.
pub fn fig5a() -> CausalDiagram {
    binary(&["X", "Y", "Z"], &[("X", "Y"), ("X", "Z")], &[("Y", "Z")])
}

/// The four-variable bandit template: context `Z`, decision `X`,
/// post-decision `D` and reward `Y`, all pairwise confounded.
pub fn mab_template() -> CausalDiagram {
    binary(
        &["Z", "X", "D", "Y"],
        &[("Z", "X"), ("Z", "Y"), ("X", "Y"), ("X", "D")],
        &[("X", "Z"), ("X", "Y"), ("X", "D"), ("Z", "Y"), ("Z", "D"), ("Y", "D")],
    )
}

/// The bandit diagram of the social-media example (no context variable).
pub fn example3_diagram() -> CausalDiagram {
    binary(&["X", "D", "Y"], &[("X", "Y"), ("X", "D")], &[("X", "Y"), ("D", "Y")])
}

/// Reward means in tenths, indexed `[u3][x][2 * u1 + u2]`.
pub const EXAMPLE3_MEANS: [[[usize; 4]; 2]; 2] = [[[6, 9, 8, 5], [9, 6, 5, 8]], [[8, 7, 6, 7], [7, 8, 7, 6]]];

/// The social-media bandit model. `U4` is a uniform digit that turns the
/// mean tables into a Bernoulli reward: `Y = 1` iff `U4 < 10 * mean`.
pub fn example3_scm() -> ScmModel {
    let mut b = ModelBuilder::new(example3_diagram());
    let u1 = b.exogenous("U1", vec![0.5, 0.5]);
    let u2 = b.exogenous("U2", vec![0.5, 0.5]);
    let u3 = b.exogenous("U3", vec![0.5, 0.5]);
    let u4 = b.exogenous("U4", vec![0.1; 10]);
    b.mechanism("X", &[], &[u1, u2], |_, u| u[0] ^ u[1]);
    b.mechanism("D", &["X"], &[u3], |i, u| i[0] ^ u[0]);
    b.mechanism("Y", &["X"], &[u1, u2, u3, u4], |i, u| {
        let mean = EXAMPLE3_MEANS[u[2]][i[0]][2 * u[0] + u[1]];
        usize::from(u[3] < mean)
    });
    b.build()
}

/// A bandit without confounding: `int` is already optimal.
pub fn mab_unconfounded_scm() -> ScmModel {
    let g = binary(&["X", "D", "Y"], &[("X", "Y"), ("X", "D")], &[]);
    let mut b = ModelBuilder::new(g);
    let ux = b.exogenous("U_X", vec![0.4, 0.6]);
    let ud = b.exogenous("U_D", vec![0.7, 0.3]);
    let uy = b.exogenous("U_Y", vec![0.1; 10]);
    b.mechanism("X", &[], &[ux], |_, u| u[0]);
    b.mechanism("D", &["X"], &[ud], |i, u| i[0] ^ u[0]);
    b.mechanism("Y", &["X"], &[uy], |i, u| usize::from(u[0] < [3, 7][i[0]]));
    b.build()
}

/// The social-media bandit with a reward that ignores the decision.
pub fn mab_no_effect_scm() -> ScmModel {
    let mut b = ModelBuilder::new(example3_diagram());
    let u1 = b.exogenous("U1", vec![0.5, 0.5]);
    let u2 = b.exogenous("U2", vec![0.5, 0.5]);
    let u3 = b.exogenous("U3", vec![0.5, 0.5]);
    let u4 = b.exogenous("U4", vec![0.1; 10]);
    b.mechanism("X", &[], &[u1, u2], |_, u| u[0] ^ u[1]);
    b.mechanism("D", &["X"], &[u3], |i, u| i[0] ^ u[0]);
    b.mechanism("Y", &["X"], &[u1, u2, u3, u4], |_, u| usize::from(u[3] < EXAMPLE3_MEANS[u[2]][0][2 * u[0] + u[1]]));
    b.build()
}

/// A bow model with a three-valued confounder.
pub fn bow_scm() -> ScmModel {
    let mut b = ModelBuilder::new(bow());
    let uxy = b.exogenous("U_XY", vec![0.3, 0.5, 0.2]);
    let uy = b.exogenous("U_Y", vec![0.6, 0.4]);
    b.mechanism("X", &[], &[uxy], |_, u| usize::from(u[0] >= 1));
    b.mechanism("Y", &["X"], &[uxy, uy], |i, u| match (i[0], u[0]) {
        (1, 1) => 1,
        (1, _) => u[1],
        (0, 2) => 1,
        _ => u[1] & usize::from(u[0] == 0),
    });
    b.build()
}

/// Mediation diagram `X -> Z -> Y` plus the direct edge `X -> Y`.
pub fn mediation() -> CausalDiagram {
    binary(&["X", "Z", "Y"], &[("X", "Z"), ("Z", "Y"), ("X", "Y")], &[("Z", "Y")])
}

/// Mediation model whose outcome ignores its direct input from `X`.
pub fn nde_zero_scm() -> ScmModel {
    let mut b = ModelBuilder::new(mediation());
    let uz = b.exogenous("U_Z", vec![0.7, 0.3]);
    let uzy = b.exogenous("U_ZY", vec![0.45, 0.55]);
    let uy = b.exogenous("U_Y", vec![0.2, 0.8]);
    let ux = b.exogenous("U_X", vec![0.55, 0.45]);
    b.mechanism("X", &[], &[ux], |_, u| u[0]);
    b.mechanism("Z", &["X"], &[uz, uzy], |i, u| i[0] ^ (u[0] & u[1]));
    b.mechanism("Y", &["X", "Z"], &[uzy, uy], |i, u| (i[1] & u[1]) | (u[0] & (1 - u[1])));
    b.build()
}

/// Mediation model with a genuine direct effect.
pub fn nde_direct_scm() -> ScmModel {
    let mut b = ModelBuilder::new(mediation());
    let ux = b.exogenous("U_X", vec![0.4, 0.6]);
    let uz = b.exogenous("U_Z", vec![0.7, 0.3]);
    let uzy = b.exogenous("U_ZY", vec![0.45, 0.55]);
    let uy = b.exogenous("U_Y", vec![0.25, 0.5, 0.25]);
    b.mechanism("X", &[], &[ux], |_, u| u[0]);
    b.mechanism("Z", &["X"], &[uz, uzy], |i, u| i[0] ^ (u[0] & u[1]));
    b.mechanism("Y", &["X", "Z"], &[uzy, uy], |i, u| match u[1] {
        0 => i[0] & i[1],
        1 => i[0] | (i[1] & u[0]),
        _ => (1 - i[0]) ^ i[1],
    });
    b.build()
}

/// Binary marginal with whole-percent masses, so it prints exactly.
fn percent_pair(r: &mut impl Rng) -> Vec<f64> {
    let k = r.random_range(15u32..=85);
    vec![f64::from(100 - k) / 100.0, f64::from(k) / 100.0]
}

/// A model for `g` with one binary noise term per variable and one shared
/// binary term per bidirected edge; marginals and tables are drawn from `seed`.
pub fn random_scm(g: &CausalDiagram, seed: u64) -> ScmModel {
    let mut r = rng::stream(seed, &[0x5C3]);
    let mut b = ModelBuilder::new(g.clone());
    let mut own = Vec::new();
    for v in 0..g.len() {
        own.push(b.exogenous(&format!("U_{}", g.name(v)), percent_pair(&mut r)));
    }
    let mut shared: Vec<Vec<usize>> = vec![Vec::new(); g.len()];
    for &(a, c) in g.bidirected_edges() {
        let e = b.exogenous(&format!("U_{}_{}", g.name(a), g.name(c)), percent_pair(&mut r));
        shared[a].push(e);
        shared[c].push(e);
    }
    for v in 0..g.len() {
        let inputs: Vec<String> = g.parents_of(v).iter().map(|p| g.name(p).to_string()).collect();
        let input_refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
        let mut exo = vec![own[v]];
        exo.extend(&shared[v]);
        let mut radix: Vec<usize> = g.parents_of(v).iter().map(|p| g.domain_size(p)).collect();
        radix.extend(std::iter::repeat(2).take(exo.len()));
        let rows: usize = radix.iter().product();
        let size = g.domain_size(v);
        let table: Vec<usize> = (0..rows).map(|_| r.random_range(0..size)).collect();
        let flat = move |i: &[usize], u: &[usize]| {
            let mut idx = 0;
            for (k, &d) in i.iter().chain(u.iter()).enumerate() {
                idx = idx * radix[k] + d;
            }
            table[idx]
        };
        b.mechanism(g.name(v), &input_refs, &exo, flat);
    }
    b.build()
}

fn expanded_spec(
    g: &CausalDiagram,
    mediators: &[(&str, &str)],
    elicit: &[&str],
    randomizable: &[&str],
) -> ExpandedSpec {
    ExpandedSpec {
        mediators: mediators
            .iter()
            .map(|(n, o)| MediatorAnnotation {
                node: g.id(n).expect("builtin variable"),
                of: g.id(o).expect("builtin variable"),
                invertible: true,
                randomizable: true,
            })
            .collect(),
        elicit_natural: g.set_of(elicit).expect("builtin variables"),
        randomizable: g.set_of(randomizable).expect("builtin variables"),
    }
}

/// Two mediators with a shared grandchild; violates the tree structure.
pub fn fig9a() -> (CausalDiagram, ExpandedSpec) {
    let g = binary(
        &["X", "W1", "W2", "Y", "Z", "T"],
        &[("X", "W1"), ("X", "W2"), ("W1", "Y"), ("W1", "Z"), ("W2", "Z"), ("W2", "T")],
        &[],
    );
    let s = expanded_spec(&g, &[("W1", "X"), ("W2", "X")], &[], &["X"]);
    (g, s)
}

/// No mediators, but the natural decision can be elicited before randomizing.
pub fn fig9b() -> (CausalDiagram, ExpandedSpec) {
    let g = binary(&["T", "X", "Y", "Z"], &[("T", "X"), ("X", "Y"), ("X", "Z")], &[("T", "Y"), ("T", "Z")]);
    let s = expanded_spec(&g, &[], &["X"], &["X"]);
    (g, s)
}

pub fn fig9c_diagram() -> CausalDiagram {
    let decl4 = |n: &str| VarDecl::new(n, &["0", "1", "2", "3"]);
    CausalDiagram::new(
        vec![
            VarDecl::binary("X"),
            decl4("W1"),
            decl4("W2"),
            VarDecl::binary("Z"),
            VarDecl::binary("T"),
            VarDecl::binary("Y"),
        ],
        &[("X", "W1"), ("X", "W2"), ("W1", "Y"), ("W2", "Z"), ("W2", "T"), ("Z", "Y")],
        &[("Z", "Y")],
    )
    .expect("builtin diagram")
}

/// Two parallel mediators of `X`, each with a four-valued state `2x + noise`.
pub fn fig9c() -> (ScmModel, ExpandedSpec) {
    let g = fig9c_diagram();
    let spec = expanded_spec(&g, &[("W1", "X"), ("W2", "X")], &[], &[]);
    let mut b = ModelBuilder::new(g);
    let ux = b.exogenous("U_X", vec![0.35, 0.65]);
    let uw1 = b.exogenous("U_W1", vec![0.5, 0.5]);
    let uw2 = b.exogenous("U_W2", vec![0.2, 0.8]);
    let uzy = b.exogenous("U_ZY", vec![0.6, 0.4]);
    let ut = b.exogenous("U_T", vec![0.3, 0.7]);
    let uy = b.exogenous("U_Y", vec![0.75, 0.25]);
    b.mechanism("X", &[], &[ux], |_, u| u[0]);
    b.mechanism("W1", &["X"], &[uw1], |i, u| 2 * i[0] + u[0]);
    b.mechanism("W2", &["X"], &[uw2], |i, u| 2 * i[0] + u[0]);
    b.mechanism("Z", &["W2"], &[uzy], |i, u| (i[0] / 2) ^ u[0]);
    b.mechanism("T", &["W2"], &[ut], |i, u| (i[0] / 2) & u[0]);
    b.mechanism("Y", &["W1", "Z"], &[uzy, uy], |i, u| ((i[0] / 2) & i[1]) | (u[0] & u[1]));
    let mut model = b.build();
    model = model.with_expanded(spec.clone());
    (model, spec)
}

/// A chain of mediators: `W2` hangs below `W1`.
pub fn fig9d() -> (CausalDiagram, ExpandedSpec) {
    let g = binary(
        &["X", "W1", "W2", "Y", "T", "Z"],
        &[("X", "W1"), ("W1", "Y"), ("W1", "W2"), ("W2", "Z"), ("W2", "T"), ("Y", "Z"), ("T", "Z")],
        &[],
    );
    let s = expanded_spec(&g, &[("W1", "X"), ("W2", "X")], &[], &[]);
    (g, s)
}

/// A mediator of `X` placed in front of the child `A`.
pub fn fig10a() -> (ScmModel, ExpandedSpec) {
    let g = binary(&["X", "W1", "A", "Y", "Z"], &[("X", "W1"), ("W1", "A"), ("A", "Y"), ("A", "Z")], &[("Y", "Z")]);
    let spec = expanded_spec(&g, &[("W1", "X")], &[], &[]);
    let mut b = ModelBuilder::new(g);
    let ux = b.exogenous("U_X", vec![0.5, 0.5]);
    let ua = b.exogenous("U_A", vec![0.7, 0.3]);
    let uyz = b.exogenous("U_YZ", vec![0.4, 0.6]);
    b.mechanism("X", &[], &[ux], |_, u| u[0]);
    b.mechanism("W1", &["X"], &[], |i, _| i[0]);
    b.mechanism("A", &["W1"], &[ua], |i, u| i[0] ^ u[0]);
    b.mechanism("Y", &["A"], &[uyz], |i, u| i[0] | u[0]);
    b.mechanism("Z", &["A"], &[uyz], |i, u| i[0] & u[0]);
    (b.build().with_expanded(spec.clone()), spec)
}

/// A would-be mediator of `X` that sits below the base variable `A`.
pub fn fig10b() -> (CausalDiagram, ExpandedSpec) {
    let g = binary(
        &["X", "W1", "A", "W2", "Y", "Z"],
        &[("X", "W1"), ("W1", "A"), ("A", "W2"), ("W2", "Z"), ("A", "Y")],
        &[("Y", "Z")],
    );
    let s = expanded_spec(&g, &[("W1", "X"), ("W2", "X")], &[], &[]);
    (g, s)
}

fn ternary(n: &str) -> VarDecl {
    VarDecl::new(n, &["0", "1", "2"])
}

/// Nested mediators serving `Z` and `{T, B}`, with `Y` reading `X` directly.
pub fn fig11() -> (ScmModel, ExpandedSpec) {
    let g = CausalDiagram::new(
        ["X", "W1", "W2", "Y", "Z", "T", "B"].iter().map(|n| ternary(n)).collect(),
        &[("X", "Y"), ("X", "W1"), ("W1", "Z"), ("W1", "W2"), ("W2", "T"), ("W2", "B")],
        &[],
    )
    .expect("builtin diagram");
    let spec = expanded_spec(&g, &[("W1", "X"), ("W2", "X")], &[], &["X"]);
    let mut b = ModelBuilder::new(g);
    let ux = b.exogenous("U_X", vec![0.2, 0.5, 0.3]);
    b.mechanism("X", &[], &[ux], |_, u| u[0]);
    for (v, p) in [("W1", "X"), ("W2", "W1"), ("Y", "X"), ("Z", "W1"), ("T", "W2"), ("B", "W2")] {
        b.mechanism(v, &[p], &[], |i, _| i[0]);
    }
    (b.build().with_expanded(spec.clone()), spec)
}

/// The base diagram of [`fig11`] with every child copying its input from `X`.
pub fn fig11_base_scm() -> ScmModel {
    let g = CausalDiagram::new(
        ["X", "Y", "Z", "T", "B"].iter().map(|n| ternary(n)).collect(),
        &[("X", "Y"), ("X", "Z"), ("X", "T"), ("X", "B")],
        &[],
    )
    .expect("builtin diagram");
    let mut b = ModelBuilder::new(g);
    let ux = b.exogenous("U_X", vec![0.2, 0.5, 0.3]);
    b.mechanism("X", &[], &[ux], |_, u| u[0]);
    for v in ["Y", "Z", "T", "B"] {
        b.mechanism(v, &["X"], &[], |i, _| i[0]);
    }
    b.build()
}

/// Seed used for every randomly parameterized builtin.
pub const RANDOM_SEED: u64 = 20_240_601;

fn fixture(name: &str, diagram: CausalDiagram, model: Option<ScmModel>, expanded: Option<ExpandedSpec>) -> Fixture {
    Fixture { name: Some(name.to_string()), diagram, model, expanded }
}

fn with_random(name: &str, g: CausalDiagram) -> Fixture {
    let m = random_scm(&g, RANDOM_SEED);
    fixture(name, g, Some(m), None)
}

/// Names of all builtin fixtures, in a stable order.
pub const BUILTIN_NAMES: &[&str] = &[
    "bow",
    "single_edge",
    "chain",
    "collider_fork",
    "fan",
    "fig4_g1",
    "fig4_g2",
    "fig5a",
    "fig7_mab_template",
    "example3",
    "mab_unconfounded",
    "mab_no_effect",
    "fig9a",
    "fig9b",
    "fig9c",
    "fig9d",
    "fig10a",
    "fig10b",
    "fig11",
    "fig11_base",
    "nde_zero",
    "nde_direct",
];

/// Looks up a builtin fixture by name.
pub fn builtin(name: &str) -> Option<Fixture> {
    let f = match name {
        "bow" => fixture(name, bow(), Some(bow_scm()), None),
        "single_edge" => with_random(name, single_edge()),
        "chain" => with_random(name, chain()),
        "collider_fork" => with_random(name, collider_fork()),
        "fan" => with_random(name, fan()),
        "fig4_g1" => with_random(name, fig4_g1()),
        "fig4_g2" => with_random(name, fig4_g2()),
        "fig5a" => fixture(name, fig5a(), Some(fairness::example2_scm().to_model()), None),
        "fig7_mab_template" => with_random(name, mab_template()),
        "example3" => fixture(name, example3_diagram(), Some(example3_scm()), None),
        "mab_unconfounded" => {
            let m = mab_unconfounded_scm();
            fixture(name, m.diagram().clone(), Some(m), None)
        }
        "mab_no_effect" => fixture(name, example3_diagram(), Some(mab_no_effect_scm()), None),
        "fig9a" => {
            let (g, s) = fig9a();
            fixture(name, g, None, Some(s))
        }
        "fig9b" => {
            let (g, s) = fig9b();
            let m = random_scm(&g, RANDOM_SEED).with_expanded(s.clone());
            fixture(name, g, Some(m), Some(s))
        }
        "fig9c" => {
            let (m, s) = fig9c();
            fixture(name, m.diagram().clone(), Some(m), Some(s))
        }
        "fig9d" => {
            let (g, s) = fig9d();
            fixture(name, g, None, Some(s))
        }
        "fig10a" => {
            let (m, s) = fig10a();
            fixture(name, m.diagram().clone(), Some(m), Some(s))
        }
        "fig10b" => {
            let (g, s) = fig10b();
            fixture(name, g, None, Some(s))
        }
        "fig11" => {
            let (m, s) = fig11();
            fixture(name, m.diagram().clone(), Some(m), Some(s))
        }
        "fig11_base" => {
            let m = fig11_base_scm();
            fixture(name, m.diagram().clone(), Some(m), None)
        }
        "nde_zero" => fixture(name, mediation(), Some(nde_zero_scm()), None),
        "nde_direct" => fixture(name, mediation(), Some(nde_direct_scm()), None),
        _ => return None,
    };
    Some(f)
}

/// Every builtin fixture, in [`BUILTIN_NAMES`] order.
pub fn all_builtins() -> Vec<Fixture> {
    BUILTIN_NAMES.iter().map(|n| builtin(n).expect("listed builtin")).collect()
}

/// A query with a known verdict under a given action set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoldenCase {
    pub name: &'static str,
    pub fixture: &'static str,
    pub query: &'static str,
    /// Action-set text as accepted by [`crate::realize::ActionSet::parse`].
    pub actions: &'static str,
    /// `None` when the query must be realizable.
    pub failure: Option<FailureKind>,
}

/// Worked realizability examples with their verdicts.
pub const GOLDEN_CASES: &[GoldenCase] = &[
    GoldenCase { name: "bow_ett_maximal", fixture: "bow", query: "P(Y[X=1], X)", actions: "maximal", failure: None },
    GoldenCase {
        name: "bow_ett_rand_only",
        fixture: "bow",
        query: "P(Y[X=1], X)",
        actions: "Rand(X)",
        failure: Some(FailureKind::RandomizedOutput),
    },
    GoldenCase {
        name: "single_edge_natural_and_fixed_input",
        fixture: "single_edge",
        query: "P(Y[X=1], X, Y)",
        actions: "maximal",
        failure: Some(FailureKind::CtfRandNaturalClash),
    },
    GoldenCase {
        name: "collider_fork_conflicting_inputs",
        fixture: "collider_fork",
        query: "P(W[X=1, T=1], Z[X=0])",
        actions: "maximal",
        failure: Some(FailureKind::CtfRandValueClash),
    },
    GoldenCase {
        name: "fan_shared_ctf_rand",
        fixture: "fan",
        query: "P(Y[X=1], Z[X=0], W[X=1])",
        actions: "Rand(X), CtfRand(X->{Z,W})",
        failure: Some(FailureKind::CtfRandValueClash),
    },
    GoldenCase {
        name: "fan_nested_ctf_rand",
        fixture: "fan",
        query: "P(Y[X=1], Z[X=0], W[X=1])",
        actions: "Rand(X), CtfRand(X->{Z,W}), CtfRand(X->Z)",
        failure: None,
    },
    GoldenCase {
        name: "fig4_g1_shared_mediator",
        fixture: "fig4_g1",
        query: "P(Z[X=1], W[T=1])",
        actions: "maximal",
        failure: Some(FailureKind::CtfRandValueClash),
    },
    GoldenCase {
        name: "fig4_g2_separate_paths",
        fixture: "fig4_g2",
        query: "P(Z[X=1], W[T=1])",
        actions: "maximal",
        failure: None,
    },
    GoldenCase {
        name: "two_regimes_one_outcome",
        fixture: "single_edge",
        query: "P(Y[X=1], Y[X=0])",
        actions: "maximal",
        failure: Some(FailureKind::CtfRandValueClash),
    },
];

/// Queries exercised against each builtin model. Only some are realizable
/// under every action set.
pub fn fixture_queries(name: &str) -> &'static [&'static str] {
    match name {
        "bow" => &["P(Y[X=1], X)", "P(Y[X=0], X)", "P(X, Y)", "P(Y[X=1])", "P(Y[X=1], Y[X=0])"],
        "single_edge" => &["P(Y[X=1], X)", "P(Y[X=0], X)", "P(Y[X=1], X, Y)"],
        "chain" => &["P(W[A=1], A)", "P(W[X=1], A)", "P(W[X=0], X, A[X=1])", "P(A[X=1], W)"],
        "collider_fork" => &["P(W[X=1], Z[T=0])", "P(W[X=1, T=1], Z[X=0])", "P(W[A=1], Z, A)"],
        "fan" => &["P(Y[X=1], Z[X=0], W)", "P(Y[X=1], Z[X=0], W[X=1])", "P(X, Y[X=0], Z[X=1])"],
        "fig4_g1" => &["P(Z[X=1], W[T=1])", "P(Z[X=1], W)", "P(Z[X=0], W[T=0], X)"],
        "fig4_g2" => &["P(Z[X=1], W[T=1])", "P(Z[X=0], W[T=0], X, T)"],
        "fig5a" => &["P(Y[X=1], Z[X=0])", "P(Y[X=1], Z[X=1])", "P(Y[X=0], Z, X)"],
        "fig7_mab_template" => &["P(Y[X=1], X, Z)", "P(Y[X=0], X, Z, D[X=1])", "P(Y[X=1], X, D[X=0], D[X=1])"],
        "example3" => &["P(Y, X)", "P(Y[X=1], X)", "P(Y[X=1], X, D[X=0])", "P(Y[X=0], X, D[X=1])"],
        "mab_unconfounded" => &["P(Y[X=1], X, D[X=0])"],
        "mab_no_effect" => &["P(Y[X=0], X, D[X=1])"],
        "nde_zero" | "nde_direct" => &["P(Y[X=1, Z=0], Z[X=0])", "P(Y[X=1, Z=1], Z[X=0], X)", "P(Y[X=1], Z)"],
        "fig11_base" => &["P(Y[X=0], Z[X=1], T[X=2], B[X=2])", "P(Y, Z[X=1], T[X=2])"],
        _ => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::validate_scm;

    #[test]
    fn every_builtin_model_validates() {
        for f in all_builtins() {
            if let Some(m) = &f.model {
                let r = validate_scm(m);
                assert!(r.is_valid(), "{:?}: {:?}", f.name, r.violations);
            }
        }
    }

    #[test]
    fn golden_cases_hold() {
        use crate::query::parse_query;
        use crate::realize::{ctf_realize, ActionSet};
        for c in GOLDEN_CASES {
            let g = builtin(c.fixture).unwrap().diagram;
            let q = parse_query(c.query, &g).unwrap();
            let a = ActionSet::parse(&g, c.actions).unwrap();
            let v = ctf_realize(&q, &g, &a).unwrap();
            assert_eq!(v.witness().map(|w| w.kind), c.failure, "{}", c.name);
        }
    }

    #[test]
    fn fixture_queries_parse() {
        for name in BUILTIN_NAMES {
            let g = builtin(name).unwrap().diagram;
            for q in fixture_queries(name) {
                crate::query::parse_query(q, &g).unwrap_or_else(|e| panic!("{name}: {q}: {e}"));
            }
        }
    }

    #[test]
    fn random_scm_is_deterministic() {
        let a = random_scm(&fig4_g1(), 3);
        let b = random_scm(&fig4_g1(), 3);
        assert_eq!(a.mechanisms(), b.mechanisms());
    }
}
