//! Exact evaluation of potential responses and distributions at every layer,
//! by enumerating the exogenous support.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::query::{CtfQuery, Intervention, PotentialResponse};
use crate::scm::ScmModel;
use crate::varset::{VarId, VarSet};

/// Joint distribution over the values of a list of terms.
///
/// `support` holds only tuples with positive probability, in lexicographic
/// order; `probabilities` is aligned with it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution {
    pub support: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
}

impl ExactDistribution {
    pub fn from_map(map: BTreeMap<Vec<usize>, f64>) -> Self {
        let (support, probabilities) = map.into_iter().filter(|(_, p)| *p > 0.0).unzip();
        ExactDistribution { support, probabilities }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn prob(&self, row: &[usize]) -> f64 {
        match self.support.binary_search_by(|s| s.as_slice().cmp(row)) {
            Ok(i) => self.probabilities[i],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.support.iter().map(|s| s.as_slice()).zip(self.probabilities.iter().copied())
    }

    /// Probability that every `(column, value)` pair holds.
    pub fn event(&self, event: &[(usize, usize)]) -> f64 {
        self.iter().filter(|(row, _)| event.iter().all(|&(c, v)| row[c] == v)).map(|(_, p)| p).sum()
    }

    /// Marginal over the given columns, in the given order.
    pub fn marginal(&self, columns: &[usize]) -> ExactDistribution {
        let mut map = BTreeMap::new();
        for (row, p) in self.iter() {
            let key: Vec<usize> = columns.iter().map(|&c| row[c]).collect();
            *map.entry(key).or_insert(0.0) += p;
        }
        ExactDistribution::from_map(map)
    }

    /// Total-variation distance to an empirical or exact table.
    pub fn total_variation(&self, other: &BTreeMap<Vec<usize>, f64>) -> f64 {
        let mut keys: Vec<&Vec<usize>> = self.support.iter().chain(other.keys()).collect();
        keys.sort();
        keys.dedup();
        0.5 * keys.iter().map(|k| (self.prob(k) - other.get(*k).copied().unwrap_or(0.0)).abs()).sum::<f64>()
    }
}

/// Values of every variable in the submodel induced by `term`'s regime.
#[inline]
pub(crate) fn regime_values_into(model: &ScmModel, u: &[usize], term: &PotentialResponse, vals: &mut [usize]) {
    let g = model.diagram();
    for &v in g.topological_order() {
        if let Some(x) = term.full_value(v) {
            vals[v] = x;
            continue;
        }
        let m = model.mechanism(v);
        vals[v] = if term.regime.is_empty() {
            m.eval(m.inputs.iter().map(|&p| vals[p]), u)
        } else {
            m.eval(m.inputs.iter().map(|&p| term.edge_value(p, v).unwrap_or(vals[p])), u)
        };
    }
}

#[inline]
pub(crate) fn eval_term_unchecked(
    model: &ScmModel,
    u: &[usize],
    term: &PotentialResponse,
    scratch: &mut [usize],
) -> usize {
    regime_values_into(model, u, term, scratch);
    scratch[term.var]
}

fn check_u(model: &ScmModel, u: &[usize]) -> Result<()> {
    let exo = model.exogenous();
    if u.len() != exo.len() || u.iter().zip(exo).any(|(&x, e)| x >= e.domain.len()) {
        return Err(Error::InvalidModel("exogenous assignment out of range".into()));
    }
    Ok(())
}

/// Value of `term` for the unit with exogenous state `u`.
pub fn eval_potential_response(model: &ScmModel, u: &[usize], term: &PotentialResponse) -> Result<usize> {
    check_u(model, u)?;
    term.validate(model.diagram())?;
    let mut scratch = vec![0; model.diagram().len()];
    Ok(eval_term_unchecked(model, u, term, &mut scratch))
}

/// Values of every endogenous variable under `term`'s regime.
pub fn regime_values(model: &ScmModel, u: &[usize], term: &PotentialResponse) -> Result<Vec<usize>> {
    check_u(model, u)?;
    term.validate(model.diagram())?;
    let mut vals = vec![0; model.diagram().len()];
    regime_values_into(model, u, term, &mut vals);
    Ok(vals)
}

/// P(W_1 = w_1, ..., W_k = w_k) for a fully valued query.
pub fn exact_l3_probability(model: &ScmModel, query: &CtfQuery) -> Result<f64> {
    query.validate(model.diagram())?;
    if !query.is_valued() {
        return Err(Error::InvalidQuery("every term needs a value for an event probability".into()));
    }
    let mut scratch = vec![0; model.diagram().len()];
    let mut total = 0.0;
    for (u, p) in model.support() {
        let hit = query
            .terms
            .iter()
            .zip(&query.values)
            .all(|(t, v)| eval_term_unchecked(model, u, t, &mut scratch) == v.unwrap());
        if hit {
            total += p;
        }
    }
    Ok(total)
}

/// Joint distribution of the query's terms. Assigned values are ignored.
pub fn exact_distribution(model: &ScmModel, query: &CtfQuery) -> Result<ExactDistribution> {
    let g = model.diagram();
    for t in &query.terms {
        t.validate(g)?;
    }
    let mut scratch = vec![0; g.len()];
    let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (u, p) in model.support() {
        let row: Vec<usize> = query.terms.iter().map(|t| eval_term_unchecked(model, u, t, &mut scratch)).collect();
        *map.entry(row).or_insert(0.0) += p;
    }
    Ok(ExactDistribution::from_map(map))
}

fn do_regime(model: &ScmModel, intervention: &[(VarId, usize)]) -> Result<Vec<Intervention>> {
    let g = model.diagram();
    let mut seen = VarSet::EMPTY;
    let mut regime = Vec::new();
    for &(x, v) in intervention {
        if x >= g.len() {
            return Err(Error::InvalidQuery(format!("unknown variable id {x}")));
        }
        if v >= g.domain_size(x) {
            return Err(Error::InvalidValue { var: g.name(x).into(), value: v.to_string() });
        }
        if !seen.insert(x) {
            return Err(Error::InvalidQuery(format!("{} is intervened on twice", g.name(x))));
        }
        regime.push(Intervention::full(x, v));
    }
    Ok(regime)
}

/// P(outcome ; do(intervention)), via the single-regime L3 valuation.
///
/// Outcome variables that are themselves intervened on take their fixed value.
pub fn interventional_distribution(
    model: &ScmModel,
    outcome: VarSet,
    intervention: &[(VarId, usize)],
) -> Result<ExactDistribution> {
    let regime = do_regime(model, intervention)?;
    let terms: Vec<PotentialResponse> = outcome
        .iter()
        .map(|v| PotentialResponse::new(v, regime.iter().filter(|i| i.var != v).cloned().collect()))
        .collect();
    let fixed: Vec<Option<usize>> =
        outcome.iter().map(|v| intervention.iter().find(|(x, _)| *x == v).map(|&(_, val)| val)).collect();
    let dist = exact_distribution(model, &CtfQuery::new(terms))?;
    if fixed.iter().all(Option::is_none) {
        return Ok(dist);
    }
    let mut map = BTreeMap::new();
    for (row, p) in dist.iter() {
        let r: Vec<usize> = row.iter().zip(&fixed).map(|(&v, f)| f.unwrap_or(v)).collect();
        *map.entry(r).or_insert(0.0) += p;
    }
    Ok(ExactDistribution::from_map(map))
}

const MAX_FACTORIZATION_ROWS: usize = 50_000_000;

/// P(outcome ; do(intervention)) by the truncated product formula over every
/// endogenous assignment, independent of the forward evaluator.
pub fn truncated_factorization(
    model: &ScmModel,
    outcome: VarSet,
    intervention: &[(VarId, usize)],
) -> Result<ExactDistribution> {
    do_regime(model, intervention)?;
    let g = model.diagram();
    let n = g.len();
    let mut fixed = vec![None; n];
    for &(x, v) in intervention {
        fixed[x] = Some(v);
    }
    let radix: Vec<usize> = (0..n).map(|v| if fixed[v].is_some() { 1 } else { g.domain_size(v) }).collect();
    let rows: usize = radix.iter().try_fold(1usize, |a, &r| a.checked_mul(r)).unwrap_or(usize::MAX);
    if rows.saturating_mul(model.support_len()) > MAX_FACTORIZATION_ROWS {
        return Err(Error::TooLarge(format!("{rows} endogenous assignments")));
    }
    let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut assign: Vec<usize> = (0..n).map(|v| fixed[v].unwrap_or(0)).collect();
    for _ in 0..rows {
        let mut mass = 0.0;
        for (u, p) in model.support() {
            let consistent = (0..n).all(|v| {
                if fixed[v].is_some() {
                    return true;
                }
                let m = model.mechanism(v);
                m.eval(m.inputs.iter().map(|&i| assign[i]), u) == assign[v]
            });
            if consistent {
                mass += p;
            }
        }
        if mass > 0.0 {
            let key: Vec<usize> = outcome.iter().map(|v| assign[v]).collect();
            *map.entry(key).or_insert(0.0) += mass;
        }
        for v in (0..n).rev() {
            if fixed[v].is_some() {
                continue;
            }
            assign[v] += 1;
            if assign[v] < radix[v] {
                break;
            }
            assign[v] = 0;
        }
    }
    Ok(ExactDistribution::from_map(map))
}

/// Natural direct effect `P(Y_{x', Z_x} = y) - P(Y_x = y)`.
///
/// The first term keeps `X = x` everywhere except on the edge `X -> Y`,
/// which receives `x'`.
pub fn nde(model: &ScmModel, x: VarId, z: VarId, y: VarId, x_val: usize, x_prime: usize, y_val: usize) -> Result<f64> {
    let g = model.diagram();
    for v in [x, z, y] {
        if v >= g.len() {
            return Err(Error::InvalidQuery(format!("unknown variable id {v}")));
        }
    }
    for (a, b) in [(x, z), (z, y), (x, y)] {
        if !g.has_edge(a, b) {
            return Err(Error::InvalidQuery(format!("NDE needs the edge {} -> {}", g.name(a), g.name(b))));
        }
    }
    if x_val == x_prime {
        return Err(Error::InvalidQuery("NDE needs two distinct treatment values".into()));
    }
    let nested = PotentialResponse::new(
        y,
        vec![Intervention::full(x, x_val), Intervention::restricted(x, x_prime, VarSet::singleton(y))],
    );
    let total = PotentialResponse::new(y, vec![Intervention::full(x, x_val)]);
    let p1 = exact_l3_probability(model, &CtfQuery::with_values(vec![nested], vec![y_val]))?;
    let p0 = exact_l3_probability(model, &CtfQuery::with_values(vec![total], vec![y_val]))?;
    Ok(p1 - p0)
}

/// Effect of treatment on the treated, `P(Y_x = y | X = x')`.
pub fn ett(model: &ScmModel, x: VarId, y: VarId, x_val: usize, x_prime: usize, y_val: usize) -> Result<f64> {
    let terms = vec![PotentialResponse::new(y, vec![Intervention::full(x, x_val)]), PotentialResponse::natural(x)];
    let joint = exact_l3_probability(model, &CtfQuery::with_values(terms, vec![y_val, x_prime]))?;
    let px = exact_l3_probability(model, &CtfQuery::with_values(vec![PotentialResponse::natural(x)], vec![x_prime]))?;
    if px == 0.0 {
        return Err(Error::InvalidQuery("conditioning event has probability zero".into()));
    }
    Ok(joint / px)
}

/// Probability of sufficiency `P(Y_{x1} = y1 | X = x0, Y = y0)`.
pub fn probability_of_sufficiency(
    model: &ScmModel,
    x: VarId,
    y: VarId,
    (x1, x0): (usize, usize),
    (y1, y0): (usize, usize),
) -> Result<f64> {
    let nat = vec![PotentialResponse::natural(x), PotentialResponse::natural(y)];
    let denom = exact_l3_probability(model, &CtfQuery::with_values(nat.clone(), vec![x0, y0]))?;
    if denom == 0.0 {
        return Err(Error::InvalidQuery("conditioning event has probability zero".into()));
    }
    let mut terms = vec![PotentialResponse::new(y, vec![Intervention::full(x, x1)])];
    terms.extend(nat);
    let joint = exact_l3_probability(model, &CtfQuery::with_values(terms, vec![y1, x0, y0]))?;
    Ok(joint / denom)
}
