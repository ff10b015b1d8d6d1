//! Counterfactual realizability for finite structural causal models.
//!
//! The crate covers the full pipeline: discrete models and their diagrams
//! ([`scm`], [`diagram`]), exact evaluation of potential responses
//! ([`engine`]), deciding whether a counterfactual distribution can be
//! sampled through physical actions ([`realize`]), simulating those actions
//! on units ([`sim`]), and two applications, causal bandits ([`bandits`]) and
//! fairness auditing ([`fairness`]).

pub mod bandits;
pub mod catalog;
pub mod diagram;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod fairness;
pub mod fixture;
pub mod query;
pub mod realize;
pub mod rng;
pub mod scm;
pub mod sim;
pub mod varset;

pub use diagram::{CausalDiagram, VarDecl};
pub use engine::{
    eval_potential_response, exact_distribution, exact_l3_probability, interventional_distribution, nde,
    truncated_factorization, ExactDistribution,
};
pub use error::{Error, Result};
pub use fixture::{load_fixture, parse_fixture, Fixture};
pub use query::{counterfactual_ancestors, parse_query, parse_term, CtfQuery, Intervention, PotentialResponse};
pub use realize::{
    ctf_procedures, ctf_realize, maximal_action_set, realizable_by_criterion, verify_counterfactual_mediator, Action,
    ActionSet, ExpandedDiagram, FailureKind, RealizationPlan, Tag, Verdict, Witness,
};
pub use scm::{validate_scm, ExogenousDist, ExogenousVar, ExpandedSpec, Mechanism, MediatorAnnotation, ScmModel};
pub use sim::{estimate, execute_plan, Population, RandomDevice, SampleBatch, UnitState};
pub use varset::{VarId, VarSet, MAX_VARS};

/// Crate version, embedded in every output artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
