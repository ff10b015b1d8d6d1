//! Exhaustive enumeration of small diagrams and queries, used to check the
//! realization algorithm against the graphical criterion.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::diagram::CausalDiagram;
use crate::error::{Error, Result};
use crate::query::{CtfQuery, Intervention, PotentialResponse};
use crate::realize::{ctf_realize, maximal_action_set, realizable_by_criterion};
use crate::varset::VarId;

/// Largest diagram size accepted by the enumerators.
pub const MAX_ENUM_VARS: usize = 5;

/// Relation between two variables `i < j` in a mixed graph.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Arrow {
    None,
    Forward,
    Backward,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut p, &mut out);
    out
}

fn heap_permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k {
        heap_permute(k - 1, p, out);
        let j = if k % 2 == 0 { i } else { 0 };
        p.swap(j, k - 1);
    }
}

/// Adjacency code of a mixed graph: one bit per ordered directed edge and
/// one per unordered bidirected pair.
fn code(n: usize, edges: &[(usize, usize)], bi: &[(usize, usize)], perm: &[usize]) -> u64 {
    let mut c = 0u64;
    for &(a, b) in edges {
        c |= 1 << (perm[a] * n + perm[b]);
    }
    for &(a, b) in bi {
        let (x, y) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
        c |= 1 << (n * n + x * n + y);
    }
    c
}

/// Every acyclic mixed graph on `n` binary variables, one representative
/// per isomorphism class. Representatives are returned in ascending order
/// of their canonical code.
pub fn canonical_diagrams(n: usize) -> Result<Vec<CausalDiagram>> {
    if n > MAX_ENUM_VARS {
        return Err(Error::TooLarge(format!("{n} variables exceed the enumeration cap of {MAX_ENUM_VARS}")));
    }
    let ps = pairs(n);
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let arrows = [Arrow::None, Arrow::Forward, Arrow::Backward];
    let total_dir = 3usize.pow(ps.len() as u32);
    for dmask in 0..total_dir {
        let mut m = dmask;
        let mut edges = Vec::new();
        for &(i, j) in &ps {
            match arrows[m % 3] {
                Arrow::None => {}
                Arrow::Forward => edges.push((i, j)),
                Arrow::Backward => edges.push((j, i)),
            }
            m /= 3;
        }
        if !acyclic(n, &edges) {
            continue;
        }
        for bmask in 0..1usize << ps.len() {
            let bi: Vec<_> = ps.iter().enumerate().filter(|(k, _)| bmask >> k & 1 == 1).map(|(_, &p)| p).collect();
            let canon = perms.iter().map(|p| code(n, &edges, &bi, p)).min().unwrap_or(0);
            if seen.insert(canon) {
                out.push((canon, CausalDiagram::binary_from_ids(n, &edges, &bi)?));
            }
        }
    }
    out.sort_by_key(|(c, _)| *c);
    Ok(out.into_iter().map(|(_, g)| g).collect())
}

fn acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &(a, b) in edges {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    seen == n
}

/// Distinct normalized terms whose regime sets at most `max_regime`
/// variables, each by a full intervention.
pub fn enumerate_terms(g: &CausalDiagram, max_regime: usize) -> Vec<PotentialResponse> {
    let n = g.len();
    let mut out = BTreeSet::new();
    for y in 0..n {
        let others: Vec<VarId> = (0..n).filter(|&v| v != y).collect();
        for subset in 0u32..1 << others.len() {
            if subset.count_ones() as usize > max_regime {
                continue;
            }
            let vars: Vec<VarId> =
                others.iter().enumerate().filter(|(k, _)| subset >> k & 1 == 1).map(|(_, &v)| v).collect();
            let combos: usize = vars.iter().map(|&v| g.domain_size(v)).product();
            for mut c in 0..combos {
                let regime = vars
                    .iter()
                    .map(|&v| {
                        let s = g.domain_size(v);
                        let val = c % s;
                        c /= s;
                        Intervention::full(v, val)
                    })
                    .collect();
                out.insert(PotentialResponse::new(y, regime).normalized(g));
            }
        }
    }
    out.into_iter().collect()
}

/// A query on which the algorithm and the criterion disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disagreement {
    pub diagram: String,
    pub query: String,
    pub algorithm: bool,
    pub criterion: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub diagrams: usize,
    pub queries: u64,
    pub realizable: u64,
    pub disagreements: Vec<Disagreement>,
}

fn describe(g: &CausalDiagram) -> String {
    let e: Vec<String> = g.directed_edges().iter().map(|&(a, b)| format!("{}->{}", g.name(a), g.name(b))).collect();
    let b: Vec<String> = g.bidirected_edges().iter().map(|&(a, b)| format!("{}<->{}", g.name(a), g.name(b))).collect();
    format!("n={} [{}] [{}]", g.len(), e.join(" "), b.join(" "))
}

/// Compares `ctf_realize` under the maximal action set with the criterion
/// on every query of one to `max_terms` distinct terms.
pub fn check_diagram(g: &CausalDiagram, max_terms: usize, max_regime: usize) -> Result<EquivalenceReport> {
    let terms = enumerate_terms(g, max_regime);
    let actions = maximal_action_set(g);
    let mut report = EquivalenceReport { diagrams: 1, ..Default::default() };
    let mut idx = Vec::with_capacity(max_terms);
    let check = |idx: &[usize], report: &mut EquivalenceReport| -> Result<()> {
        let q = CtfQuery::new(idx.iter().map(|&i| terms[i].clone()).collect());
        let alg = ctf_realize(&q, g, &actions)?.is_realizable();
        let crit = realizable_by_criterion(&q, g).realizable;
        report.queries += 1;
        report.realizable += u64::from(alg);
        if alg != crit {
            report.disagreements.push(Disagreement {
                diagram: describe(g),
                query: q.display(g).to_string(),
                algorithm: alg,
                criterion: crit,
            });
        }
        Ok(())
    };
    combinations(terms.len(), max_terms, &mut idx, 0, &mut |c| check(c, &mut report))?;
    Ok(report)
}

fn combinations(
    n: usize,
    k: usize,
    cur: &mut Vec<usize>,
    start: usize,
    f: &mut dyn FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    for i in start..n {
        cur.push(i);
        f(cur)?;
        if cur.len() < k {
            combinations(n, k, cur, i + 1, f)?;
        }
        cur.pop();
    }
    Ok(())
}

/// Runs [`check_diagram`] on every canonical diagram with up to `max_vars`
/// variables.
pub fn check_equivalence(max_vars: usize, max_terms: usize, max_regime: usize) -> Result<EquivalenceReport> {
    let mut diagrams = Vec::new();
    for n in 1..=max_vars {
        diagrams.extend(canonical_diagrams(n)?);
    }
    let reports: Vec<EquivalenceReport> =
        diagrams.par_iter().map(|g| check_diagram(g, max_terms, max_regime)).collect::<Result<_>>()?;
    Ok(reports.into_iter().fold(EquivalenceReport::default(), |mut acc, r| {
        acc.diagrams += r.diagrams;
        acc.queries += r.queries;
        acc.realizable += r.realizable;
        acc.disagreements.extend(r.disagreements);
        acc
    }))
}
