use crate::diagram::CausalDiagram;
use crate::query::{counterfactual_ancestors, CtfQuery, PotentialResponse};

/// Verdict of the graphical criterion with a clashing pair when it fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriterionResult {
    pub realizable: bool,
    pub witness: Option<(PotentialResponse, PotentialResponse)>,
}

/// True iff no variable appears among the counterfactual ancestors of the
/// query under two different regimes.
pub fn realizable_by_criterion(query: &CtfQuery, g: &CausalDiagram) -> CriterionResult {
    let an = counterfactual_ancestors(query, g);
    for pair in an.windows(2) {
        if pair[0].var == pair[1].var {
            return CriterionResult { realizable: false, witness: Some((pair[0].clone(), pair[1].clone())) };
        }
    }
    CriterionResult { realizable: true, witness: None }
}

/// Counterfactual ancestors contributed by a single term, in variable order.
pub fn term_signatures(term: &PotentialResponse, g: &CausalDiagram) -> Vec<PotentialResponse> {
    counterfactual_ancestors(&CtfQuery::new(vec![term.clone()]), g)
}

/// `m[i][j]` is true when terms `i` and `j` place some variable under two
/// regimes. One term never conflicts with itself, so a query satisfies the
/// criterion iff no pair of its terms conflicts.
pub fn conflict_matrix(terms: &[PotentialResponse], g: &CausalDiagram) -> Vec<Vec<bool>> {
    let sigs: Vec<Vec<PotentialResponse>> = terms.iter().map(|t| term_signatures(t, g)).collect();
    let n = terms.len();
    let mut m = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let clash = sigs[i].iter().any(|a| sigs[j].iter().any(|b| a.var == b.var && a != b));
            m[i][j] = clash;
            m[j][i] = clash;
        }
    }
    m
}
