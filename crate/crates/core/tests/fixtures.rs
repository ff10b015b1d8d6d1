//! The JSON files under `fixtures/` mirror the builtin catalog.
//! Set `CTFKIT_REGEN_FIXTURES=1` to rewrite them.

use std::path::PathBuf;

use ctfkit::catalog::{all_builtins, fixture_queries};
use ctfkit::fixture::fixture_to_json;
use ctfkit::{exact_distribution, parse_fixture, parse_query, Fixture};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn json(f: &Fixture) -> String {
    fixture_to_json(f.name.as_deref(), &f.diagram, f.model.as_ref(), f.expanded.as_ref())
}

#[test]
fn fixture_files_match_the_catalog() {
    let regen = std::env::var_os("CTFKIT_REGEN_FIXTURES").is_some();
    if regen {
        std::fs::create_dir_all(dir()).unwrap();
    }
    for f in all_builtins() {
        let name = f.name.clone().unwrap();
        let path = dir().join(format!("{name}.json"));
        let want = json(&f);
        if regen {
            std::fs::write(&path, &want).unwrap();
            continue;
        }
        let got = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(got, want, "{name} is stale; rerun with CTFKIT_REGEN_FIXTURES=1");
    }
}

#[test]
fn serialization_round_trips() {
    for f in all_builtins() {
        let text = json(&f);
        let back = parse_fixture(&text).unwrap();
        assert_eq!(json(&back), text);
        assert_eq!(back.diagram.names(), f.diagram.names());
        let (Some(a), Some(b)) = (&f.model, &back.model) else { continue };
        for q in fixture_queries(f.name.as_deref().unwrap()) {
            let q = parse_query(q, a.diagram()).unwrap();
            let (da, db) = (exact_distribution(a, &q).unwrap(), exact_distribution(b, &q).unwrap());
            assert!(da.iter().all(|(row, p)| (p - db.prob(row)).abs() < 1e-12));
        }
    }
}

#[test]
fn malformed_fixtures_are_rejected() {
    assert!(parse_fixture("{").is_err());
    assert!(parse_fixture(r#"{"variables": ["X"], "edges": [["X", "Q"]]}"#).is_err());
}
