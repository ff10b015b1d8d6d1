//! JSON fixture format for diagrams and models.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagram::{CausalDiagram, VarDecl};
use crate::error::{Error, Result};
use crate::scm::{validate_scm, ExogenousDist, ExogenousVar, ExpandedSpec, Mechanism, MediatorAnnotation, ScmModel};
use crate::varset::VarSet;

#[derive(Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
struct FixtureJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    variables: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    domains: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    constant: Vec<String>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    bidirected: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exogenous: Vec<ExoJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exogenous_joint: Option<Vec<JointRow>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    mechanisms: BTreeMap<String, MechJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expanded: Option<ExpandedJson>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct ExoJson {
    name: String,
    domain: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct JointRow {
    values: Vec<String>,
    p: f64,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct MechJson {
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    exogenous: Vec<String>,
    /// Rows keyed by comma-joined input values followed by exogenous values.
    table: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct ExpandedJson {
    mediators: Vec<MediatorJson>,
    #[serde(default)]
    elicit_natural: Vec<String>,
    #[serde(default)]
    randomizable: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
struct MediatorJson {
    node: String,
    of: String,
    #[serde(default = "yes")]
    invertible: bool,
    #[serde(default = "yes")]
    randomizable: bool,
}

fn yes() -> bool {
    true
}

/// A loaded fixture: always a diagram, optionally a model and expanded metadata.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: Option<String>,
    pub diagram: CausalDiagram,
    pub model: Option<ScmModel>,
    pub expanded: Option<ExpandedSpec>,
}

impl Fixture {
    pub fn require_model(&self) -> Result<&ScmModel> {
        self.model.as_ref().ok_or_else(|| Error::Fixture("fixture has no mechanisms".into()))
    }
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Fixture> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))?;
    parse_fixture(&text).map_err(|e| match e {
        Error::Fixture(m) => Error::Fixture(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Parses a fixture and rejects models with validation violations.
pub fn parse_fixture(text: &str) -> Result<Fixture> {
    let f = parse_fixture_unchecked(text)?;
    if let Some(m) = &f.model {
        let report = validate_scm(m);
        if !report.is_valid() {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidModel(msgs.join("; ")));
        }
    }
    Ok(f)
}

/// Parses a fixture without running [`validate_scm`].
pub fn parse_fixture_unchecked(text: &str) -> Result<Fixture> {
    let j: FixtureJson = serde_json::from_str(text)?;
    let decls: Vec<VarDecl> = j
        .variables
        .iter()
        .map(|v| {
            let constant = j.constant.contains(v);
            let domain = j.domains.get(v).cloned().unwrap_or_else(|| {
                if constant {
                    vec!["0".into()]
                } else {
                    vec!["0".into(), "1".into()]
                }
            });
            VarDecl { name: v.clone(), domain, constant }
        })
        .collect();
    for k in j.domains.keys().chain(&j.constant) {
        if !j.variables.contains(k) {
            return Err(Error::UnknownVariable(k.clone()));
        }
    }
    let diagram = CausalDiagram::new(decls, &j.edges, &j.bidirected)?;
    let expanded = match &j.expanded {
        None => None,
        Some(e) => Some(ExpandedSpec {
            mediators: e
                .mediators
                .iter()
                .map(|m| {
                    Ok(MediatorAnnotation {
                        node: diagram.id(&m.node)?,
                        of: diagram.id(&m.of)?,
                        invertible: m.invertible,
                        randomizable: m.randomizable,
                    })
                })
                .collect::<Result<_>>()?,
            elicit_natural: diagram.set_of(&e.elicit_natural)?,
            randomizable: diagram.set_of(&e.randomizable)?,
        }),
    };
    let model = if j.mechanisms.is_empty() && j.exogenous.is_empty() { None } else { Some(build_model(&j, &diagram)?) };
    let model = match (model, &expanded) {
        (Some(m), Some(e)) => Some(m.with_expanded(e.clone())),
        (m, _) => m,
    };
    Ok(Fixture { name: j.name, diagram, model, expanded })
}

fn build_model(j: &FixtureJson, g: &CausalDiagram) -> Result<ScmModel> {
    let exo: Vec<ExogenousVar> =
        j.exogenous.iter().map(|e| ExogenousVar { name: e.name.clone(), domain: e.domain.clone() }).collect();
    let exo_index = |name: &str| -> Result<usize> {
        exo.iter().position(|e| e.name == name).ok_or_else(|| Error::Fixture(format!("unknown exogenous `{name}`")))
    };
    let dist = match &j.exogenous_joint {
        Some(rows) => {
            let mut states = Vec::with_capacity(rows.len());
            let mut probs = Vec::with_capacity(rows.len());
            for r in rows {
                if r.values.len() != exo.len() {
                    return Err(Error::Fixture("joint row arity differs from exogenous count".into()));
                }
                let s = r
                    .values
                    .iter()
                    .zip(&exo)
                    .map(|(v, e)| {
                        e.domain
                            .iter()
                            .position(|d| d == v)
                            .ok_or_else(|| Error::Fixture(format!("`{v}` not in domain of {}", e.name)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                states.push(s);
                probs.push(r.p);
            }
            ExogenousDist::Joint { states, probs }
        }
        None => ExogenousDist::Product(
            j.exogenous
                .iter()
                .map(|e| e.probs.clone().ok_or_else(|| Error::Fixture(format!("exogenous {} lacks probs", e.name))))
                .collect::<Result<_>>()?,
        ),
    };
    let mut mechanisms = Vec::with_capacity(g.len());
    for v in 0..g.len() {
        let name = g.name(v);
        let mj = j.mechanisms.get(name).ok_or_else(|| Error::Fixture(format!("no mechanism for {name}")))?;
        let inputs = mj.inputs.iter().map(|s| g.id(s)).collect::<Result<Vec<_>>>()?;
        let exos = mj.exogenous.iter().map(|s| exo_index(s)).collect::<Result<Vec<_>>>()?;
        let mut radix: Vec<usize> = inputs.iter().map(|&i| g.domain_size(i)).collect();
        radix.extend(exos.iter().map(|&e| exo[e].domain.len()));
        let rows: usize = radix.iter().product();
        let mut table = vec![usize::MAX; rows];
        for (key, out) in &mj.table {
            let parts: Vec<&str> = if key.is_empty() { Vec::new() } else { key.split(',').map(str::trim).collect() };
            if parts.len() != radix.len() {
                return Err(Error::Fixture(format!("row `{key}` of {name} has the wrong arity")));
            }
            let mut idx = 0;
            for (k, part) in parts.iter().enumerate() {
                let pos = if k < inputs.len() {
                    g.domain(inputs[k]).iter().position(|d| d == part)
                } else {
                    exo[exos[k - inputs.len()]].domain.iter().position(|d| d == part)
                };
                let pos = pos.ok_or_else(|| Error::Fixture(format!("row `{key}` of {name}: bad value `{part}`")))?;
                idx = idx * radix[k] + pos;
            }
            table[idx] = g.value_index(v, out).map_err(|_| Error::Fixture(format!("{name} outputs `{out}`")))?;
        }
        if table.contains(&usize::MAX) {
            return Err(Error::Fixture(format!("mechanism table of {name} is not total")));
        }
        mechanisms.push(Mechanism::new(inputs, exos, radix, table)?);
    }
    ScmModel::new(g.clone(), exo, dist, mechanisms)
}

/// Serializes a diagram, optional model and optional expanded metadata.
pub fn fixture_to_json(
    name: Option<&str>,
    diagram: &CausalDiagram,
    model: Option<&ScmModel>,
    expanded: Option<&ExpandedSpec>,
) -> String {
    let g = diagram;
    let mut j = FixtureJson { name: name.map(str::to_string), variables: g.names().to_vec(), ..Default::default() };
    for v in 0..g.len() {
        let d = g.domain(v);
        let default =
            if g.is_constant(v) { d.len() == 1 && d[0] == "0" } else { d.len() == 2 && d[0] == "0" && d[1] == "1" };
        if !default {
            j.domains.insert(g.name(v).into(), d.to_vec());
        }
        if g.is_constant(v) {
            j.constant.push(g.name(v).into());
        }
    }
    j.edges = g.directed_edges().iter().map(|&(a, b)| (g.name(a).into(), g.name(b).into())).collect();
    j.bidirected = g.bidirected_edges().iter().map(|&(a, b)| (g.name(a).into(), g.name(b).into())).collect();
    if let Some(m) = model {
        let exo = m.exogenous();
        match m.exogenous_dist() {
            ExogenousDist::Product(marg) => {
                j.exogenous = exo
                    .iter()
                    .zip(marg)
                    .map(|(e, p)| ExoJson { name: e.name.clone(), domain: e.domain.clone(), probs: Some(p.clone()) })
                    .collect();
            }
            ExogenousDist::Joint { states, probs } => {
                j.exogenous = exo
                    .iter()
                    .map(|e| ExoJson { name: e.name.clone(), domain: e.domain.clone(), probs: None })
                    .collect();
                j.exogenous_joint = Some(
                    states
                        .iter()
                        .zip(probs)
                        .map(|(s, &p)| JointRow {
                            values: s.iter().zip(exo).map(|(&v, e)| e.domain[v].clone()).collect(),
                            p,
                        })
                        .collect(),
                );
            }
        }
        for v in 0..g.len() {
            let mech = m.mechanism(v);
            let mut table = BTreeMap::new();
            for (row, &out) in mech.table.iter().enumerate() {
                let (iv, ev) = mech.decode_row(row);
                let mut parts: Vec<&str> = mech.inputs.iter().zip(&iv).map(|(&i, &x)| g.value_name(i, x)).collect();
                parts.extend(mech.exogenous.iter().zip(&ev).map(|(&e, &x)| exo[e].domain[x].as_str()));
                table.insert(parts.join(","), g.value_name(v, out).to_string());
            }
            j.mechanisms.insert(
                g.name(v).into(),
                MechJson {
                    inputs: mech.inputs.iter().map(|&i| g.name(i).to_string()).collect(),
                    exogenous: mech.exogenous.iter().map(|&e| exo[e].name.clone()).collect(),
                    table,
                },
            );
        }
    }
    let expanded = expanded.or_else(|| model.and_then(|m| m.expanded()));
    if let Some(e) = expanded {
        let names = |s: VarSet| g.names_of(s);
        j.expanded = Some(ExpandedJson {
            mediators: e
                .mediators
                .iter()
                .map(|m| MediatorJson {
                    node: g.name(m.node).into(),
                    of: g.name(m.of).into(),
                    invertible: m.invertible,
                    randomizable: m.randomizable,
                })
                .collect(),
            elicit_natural: names(e.elicit_natural),
            randomizable: names(e.randomizable),
        });
    }
    let mut s = serde_json::to_string_pretty(&j).expect("fixture serializes");
    s.push('\n');
    s
}
