//! Finite-domain structural causal models with lookup-table mechanisms.

use std::fmt;

use crate::diagram::CausalDiagram;
use crate::error::{Error, Result};
use crate::varset::{VarId, VarSet};

/// Tolerance for the exogenous distribution summing to one.
pub const DIST_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct ExogenousVar {
    pub name: String,
    pub domain: Vec<String>,
}

impl ExogenousVar {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        ExogenousVar { name: name.into(), domain: (0..size).map(|i| i.to_string()).collect() }
    }
}

/// Distribution over joint exogenous assignments.
#[derive(Clone, Debug, PartialEq)]
pub enum ExogenousDist {
    /// Mutually independent marginals, one per exogenous variable.
    Product(Vec<Vec<f64>>),
    /// Explicit joint rows; assignments not listed have probability zero.
    Joint { states: Vec<Vec<usize>>, probs: Vec<f64> },
}

/// A total lookup table `(inputs, exogenous) -> value`.
///
/// Rows are laid out in mixed radix with the first input most significant and
/// the last exogenous variable least significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism {
    pub inputs: Vec<VarId>,
    pub exogenous: Vec<usize>,
    pub table: Vec<usize>,
    radix: Vec<usize>,
    strides: Vec<usize>,
}

impl Mechanism {
    pub fn new(inputs: Vec<VarId>, exogenous: Vec<usize>, radix: Vec<usize>, table: Vec<usize>) -> Result<Self> {
        if radix.len() != inputs.len() + exogenous.len() {
            return Err(Error::InvalidModel("mechanism radix does not match its arguments".into()));
        }
        let mut strides = vec![0usize; radix.len()];
        let mut acc = 1usize;
        for i in (0..radix.len()).rev() {
            strides[i] = acc;
            acc = acc.checked_mul(radix[i]).ok_or_else(|| Error::InvalidModel("mechanism table too large".into()))?;
        }
        if table.len() != acc {
            return Err(Error::InvalidModel(format!("mechanism table has {} rows, expected {acc}", table.len())));
        }
        Ok(Mechanism { inputs, exogenous, table, radix, strides })
    }

    /// Tabulates `f(input_values, exogenous_values)` over every row.
    pub fn from_fn(
        diagram: &CausalDiagram,
        exo: &[ExogenousVar],
        inputs: Vec<VarId>,
        exogenous: Vec<usize>,
        f: impl Fn(&[usize], &[usize]) -> usize,
    ) -> Result<Self> {
        let mut radix: Vec<usize> = inputs.iter().map(|&v| diagram.domain_size(v)).collect();
        radix.extend(exogenous.iter().map(|&e| exo[e].domain.len()));
        let rows: usize = radix.iter().product();
        let ni = inputs.len();
        let mut table = Vec::with_capacity(rows);
        let mut digits = vec![0usize; radix.len()];
        for _ in 0..rows {
            table.push(f(&digits[..ni], &digits[ni..]));
            for i in (0..digits.len()).rev() {
                digits[i] += 1;
                if digits[i] < radix[i] {
                    break;
                }
                digits[i] = 0;
            }
        }
        Mechanism::new(inputs, exogenous, radix, table)
    }

    pub fn radix(&self) -> &[usize] {
        &self.radix
    }

    #[inline]
    pub fn row_index(&self, input_values: impl Iterator<Item = usize>, u: &[usize]) -> usize {
        let mut idx = 0;
        let mut k = 0;
        for v in input_values {
            idx += v * self.strides[k];
            k += 1;
        }
        for &e in &self.exogenous {
            idx += u[e] * self.strides[k];
            k += 1;
        }
        idx
    }

    /// Evaluates with the given endogenous input values (aligned with `inputs`).
    #[inline]
    pub fn eval(&self, input_values: impl Iterator<Item = usize>, u: &[usize]) -> usize {
        self.table[self.row_index(input_values, u)]
    }

    /// Row index of endogenous `inputs` and mechanism-local exogenous values `ex`.
    pub fn encode_row(&self, inputs: &[usize], ex: &[usize]) -> usize {
        inputs.iter().chain(ex).zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    /// Decodes a row index back into `(input values, exogenous values)`.
    pub fn decode_row(&self, mut row: usize) -> (Vec<usize>, Vec<usize>) {
        let mut digits = vec![0; self.radix.len()];
        for i in (0..self.radix.len()).rev() {
            digits[i] = row % self.radix[i];
            row /= self.radix[i];
        }
        let ex = digits.split_off(self.inputs.len());
        (digits, ex)
    }
}

/// Annotation declaring `node` to be a counterfactual mediator of `of`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MediatorAnnotation {
    pub node: VarId,
    pub of: VarId,
    /// Whether the mechanism of `node` is declared invertible back to `of`.
    pub invertible: bool,
    pub randomizable: bool,
}

/// Expanded-diagram metadata attached to a model or diagram fixture.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExpandedSpec {
    pub mediators: Vec<MediatorAnnotation>,
    /// Decision variables whose natural value stays observable under randomization.
    pub elicit_natural: VarSet,
    /// Variables that can be physically randomized.
    pub randomizable: VarSet,
}

/// A finite structural causal model.
#[derive(Clone, Debug)]
pub struct ScmModel {
    diagram: CausalDiagram,
    exogenous: Vec<ExogenousVar>,
    dist: ExogenousDist,
    mechanisms: Vec<Mechanism>,
    expanded: Option<ExpandedSpec>,
    support: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

const MAX_SUPPORT: usize = 1 << 22;

impl ScmModel {
    /// Assembles a model. Only shape errors that would make evaluation
    /// impossible are rejected; semantic checks live in [`validate_scm`].
    pub fn new(
        diagram: CausalDiagram,
        exogenous: Vec<ExogenousVar>,
        dist: ExogenousDist,
        mechanisms: Vec<Mechanism>,
    ) -> Result<Self> {
        if mechanisms.len() != diagram.len() {
            return Err(Error::InvalidModel(format!(
                "{} mechanisms for {} variables",
                mechanisms.len(),
                diagram.len()
            )));
        }
        for (v, m) in mechanisms.iter().enumerate() {
            for (k, &i) in m.inputs.iter().enumerate() {
                if i >= diagram.len() || i == v {
                    return Err(Error::InvalidModel(format!("mechanism of {} has a bad input", diagram.name(v))));
                }
                if m.radix[k] != diagram.domain_size(i) {
                    return Err(Error::InvalidModel(format!("mechanism of {} has a bad radix", diagram.name(v))));
                }
            }
            for (k, &e) in m.exogenous.iter().enumerate() {
                if e >= exogenous.len() || m.radix[m.inputs.len() + k] != exogenous[e].domain.len() {
                    return Err(Error::InvalidModel(format!(
                        "mechanism of {} has a bad exogenous argument",
                        diagram.name(v)
                    )));
                }
            }
            if m.table.iter().any(|&o| o >= diagram.domain_size(v)) {
                return Err(Error::InvalidModel(format!(
                    "mechanism of {} outputs outside its domain",
                    diagram.name(v)
                )));
            }
        }
        let (support, weights) = expand_support(&exogenous, &dist)?;
        Ok(ScmModel { diagram, exogenous, dist, mechanisms, expanded: None, support, weights })
    }

    pub fn with_expanded(mut self, spec: ExpandedSpec) -> Self {
        self.expanded = Some(spec);
        self
    }

    pub fn diagram(&self) -> &CausalDiagram {
        &self.diagram
    }

    pub fn exogenous(&self) -> &[ExogenousVar] {
        &self.exogenous
    }

    pub fn exogenous_dist(&self) -> &ExogenousDist {
        &self.dist
    }

    pub fn mechanism(&self, v: VarId) -> &Mechanism {
        &self.mechanisms[v]
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn expanded(&self) -> Option<&ExpandedSpec> {
        self.expanded.as_ref()
    }

    /// Joint exogenous assignments with their probabilities.
    pub fn support(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.support.iter().map(|s| s.as_slice()).zip(self.weights.iter().copied())
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    pub fn support_state(&self, i: usize) -> &[usize] {
        &self.support[i]
    }

    pub fn support_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Natural values of every endogenous variable under `u`.
    pub fn forward(&self, u: &[usize]) -> Vec<usize> {
        let mut vals = vec![0usize; self.diagram.len()];
        for &v in self.diagram.topological_order() {
            let m = &self.mechanisms[v];
            vals[v] = m.eval(m.inputs.iter().map(|&i| vals[i]), u);
        }
        vals
    }

    /// Replaces the exogenous distribution, keeping everything else.
    pub fn with_dist(&self, dist: ExogenousDist) -> Result<Self> {
        let mut m = ScmModel::new(self.diagram.clone(), self.exogenous.clone(), dist, self.mechanisms.clone())?;
        m.expanded = self.expanded.clone();
        Ok(m)
    }
}

fn expand_support(exo: &[ExogenousVar], dist: &ExogenousDist) -> Result<(Vec<Vec<usize>>, Vec<f64>)> {
    match dist {
        ExogenousDist::Product(marginals) => {
            if marginals.len() != exo.len() {
                return Err(Error::InvalidModel("one marginal per exogenous variable required".into()));
            }
            let mut total = 1usize;
            for (e, m) in exo.iter().zip(marginals) {
                if m.len() != e.domain.len() {
                    return Err(Error::InvalidModel(format!("marginal of {} has the wrong length", e.name)));
                }
                total = total.saturating_mul(m.len());
            }
            if total > MAX_SUPPORT {
                return Err(Error::TooLarge(format!("{total} joint exogenous states")));
            }
            let mut states = vec![Vec::new()];
            let mut weights = vec![1.0];
            for m in marginals {
                let mut ns = Vec::with_capacity(states.len() * m.len());
                let mut nw = Vec::with_capacity(states.len() * m.len());
                for (s, w) in states.iter().zip(&weights) {
                    for (k, &p) in m.iter().enumerate() {
                        if p == 0.0 {
                            continue;
                        }
                        let mut t = s.clone();
                        t.push(k);
                        ns.push(t);
                        nw.push(w * p);
                    }
                }
                states = ns;
                weights = nw;
            }
            Ok((states, weights))
        }
        ExogenousDist::Joint { states, probs } => {
            if states.len() != probs.len() {
                return Err(Error::InvalidModel("joint table rows and probabilities differ in length".into()));
            }
            for s in states {
                if s.len() != exo.len() || s.iter().zip(exo).any(|(&v, e)| v >= e.domain.len()) {
                    return Err(Error::InvalidModel("joint exogenous row out of range".into()));
                }
            }
            Ok((states.clone(), probs.clone()))
        }
    }
}

/// One failed invariant of an [`ScmModel`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ReadsNonParent { var: String, input: String },
    MissingParent { var: String, parent: String },
    ProbabilityOutOfRange { index: usize, p: f64 },
    MarginalSum { exogenous: String, total: f64 },
    JointSum { total: f64 },
    DuplicateJointRow { index: usize },
    BidirectedUndeclared { a: String, b: String },
    BidirectedUnsupported { a: String, b: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ReadsNonParent { var, input } => write!(f, "mechanism of {var} reads non-parent {input}"),
            Violation::MissingParent { var, parent } => {
                write!(f, "diagram parent {parent} of {var} is not an input of its mechanism")
            }
            Violation::ProbabilityOutOfRange { index, p } => write!(f, "probability #{index} = {p} outside [0,1]"),
            Violation::MarginalSum { exogenous, total } => write!(f, "marginal of {exogenous} sums to {total}"),
            Violation::JointSum { total } => write!(f, "exogenous distribution sums to {total}"),
            Violation::DuplicateJointRow { index } => write!(f, "joint exogenous row #{index} repeats an assignment"),
            Violation::BidirectedUndeclared { a, b } => {
                write!(f, "{a} and {b} share exogenous causes but {a} <-> {b} is not declared")
            }
            Violation::BidirectedUnsupported { a, b } => {
                write!(f, "{a} <-> {b} is declared but no shared exogenous cause induces it")
            }
        }
    }
}

/// Result of [`validate_scm`]; empty means valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every model invariant and lists the ones that fail.
pub fn validate_scm(model: &ScmModel) -> ValidationReport {
    let g = &model.diagram;
    let mut out = Vec::new();
    for v in 0..g.len() {
        let m = &model.mechanisms[v];
        let inputs: VarSet = m.inputs.iter().copied().collect();
        for i in inputs.difference(g.parents_of(v)) {
            out.push(Violation::ReadsNonParent { var: g.name(v).into(), input: g.name(i).into() });
        }
        for p in g.parents_of(v).difference(inputs) {
            out.push(Violation::MissingParent { var: g.name(v).into(), parent: g.name(p).into() });
        }
    }
    let n_exo = model.exogenous.len();
    let mut dependent = vec![vec![false; n_exo]; n_exo];
    match &model.dist {
        ExogenousDist::Product(marginals) => {
            let mut idx = 0;
            for (e, m) in model.exogenous.iter().zip(marginals) {
                for &p in m {
                    if !(0.0..=1.0).contains(&p) || p.is_nan() {
                        out.push(Violation::ProbabilityOutOfRange { index: idx, p });
                    }
                    idx += 1;
                }
                let total: f64 = m.iter().sum();
                if (total - 1.0).abs() > DIST_TOLERANCE {
                    out.push(Violation::MarginalSum { exogenous: e.name.clone(), total });
                }
            }
        }
        ExogenousDist::Joint { states, probs } => {
            for (i, &p) in probs.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    out.push(Violation::ProbabilityOutOfRange { index: i, p });
                }
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > DIST_TOLERANCE {
                out.push(Violation::JointSum { total });
            }
            let mut seen = std::collections::HashSet::new();
            for (i, s) in states.iter().enumerate() {
                if !seen.insert(s.clone()) {
                    out.push(Violation::DuplicateJointRow { index: i });
                }
            }
            #[allow(clippy::needless_range_loop)]
            for a in 0..n_exo {
                for b in (a + 1)..n_exo {
                    if pair_dependent(model, a, b) {
                        dependent[a][b] = true;
                        dependent[b][a] = true;
                    }
                }
            }
        }
    }
    for a in 0..g.len() {
        for b in (a + 1)..g.len() {
            let ea = &model.mechanisms[a].exogenous;
            let eb = &model.mechanisms[b].exogenous;
            let induced = ea.iter().any(|x| eb.iter().any(|y| x == y || dependent[*x][*y]));
            let declared = g.has_bidirected(a, b);
            if induced && !declared {
                out.push(Violation::BidirectedUndeclared { a: g.name(a).into(), b: g.name(b).into() });
            } else if declared && !induced {
                out.push(Violation::BidirectedUnsupported { a: g.name(a).into(), b: g.name(b).into() });
            }
        }
    }
    ValidationReport { violations: out }
}

fn pair_dependent(model: &ScmModel, a: usize, b: usize) -> bool {
    let na = model.exogenous[a].domain.len();
    let nb = model.exogenous[b].domain.len();
    let mut joint = vec![0.0; na * nb];
    let mut pa = vec![0.0; na];
    let mut pb = vec![0.0; nb];
    let mut total = 0.0;
    for (s, w) in model.support() {
        joint[s[a] * nb + s[b]] += w;
        pa[s[a]] += w;
        pb[s[b]] += w;
        total += w;
    }
    if total <= 0.0 {
        return false;
    }
    (0..na).any(|i| (0..nb).any(|j| (joint[i * nb + j] / total - pa[i] * pb[j] / (total * total)).abs() > 1e-12))
}
