//! Shared setup for the benchmarks.

use ctfkit::catalog::{builtin, fixture_queries};
use ctfkit::{parse_query, CtfQuery, Fixture};

/// A builtin fixture together with its parsed sample queries.
pub fn fixture_with_queries(name: &str) -> (Fixture, Vec<CtfQuery>) {
    let f = builtin(name).unwrap_or_else(|| panic!("unknown builtin {name}"));
    let qs = fixture_queries(name).iter().map(|q| parse_query(q, &f.diagram).expect("catalog query")).collect();
    (f, qs)
}
