//! JSON scenario files.
//!
//! ```json
//! {
//!   "nodes": ["n0", "n1"],
//!   "edges": [{"u": "n0", "v": "n1", "delay": 2.5}],
//!   "contents": ["1", "2"],
//!   "sources": {"1": ["n1"], "2": ["n0"]},
//!   "capacities": {"n0": 1, "n1": 1},
//!   "requests": [{"content": "1", "path": ["n0", "n1"], "rate": 1.0}],
//!   "dissimilarity": {"power_law": {"beta": 3}},
//!   "alpha": 10.0,
//!   "availability_excludes_terminal": false
//! }
//! ```
//!
//! `dissimilarity` may also be a dense row-major matrix indexed like
//! `contents`. Saved files always use the dense form. Reals are written in
//! shortest round-trip decimal form, so save followed by load is lossless.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path as FsPath;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AvailabilityRule, Catalog, DissimilarityMatrix, Edge, Network, Path, Request, Scenario, SourceMap,
};
use crate::scalar::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct EdgeDoc {
    u: String,
    v: String,
    delay: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestDoc {
    content: String,
    path: Vec<String>,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PowerLaw {
    beta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum DissimilarityDoc {
    Dense(Vec<Vec<f64>>),
    PowerLaw { power_law: PowerLaw },
}

/// On-disk layout; every field optional so a missing key is reported by name.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contents: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sources: Option<BTreeMap<String, Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacities: Option<BTreeMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    requests: Option<Vec<RequestDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dissimilarity: Option<DissimilarityDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    availability_excludes_terminal: bool,
}

fn required<V>(v: Option<V>, key: &str) -> Result<V> {
    v.ok_or_else(|| Error::MissingField(key.to_string()))
}

fn field_err(key: &str, message: impl Into<String>) -> Error {
    Error::Field {
        key: key.to_string(),
        message: message.into(),
    }
}

fn lookup(map: &HashMap<&str, usize>, label: &str, key: &str) -> Result<usize> {
    map.get(label)
        .copied()
        .ok_or_else(|| field_err(key, format!("unknown label {label:?}")))
}

/// Parses a scenario from its JSON text. Structural invariants beyond label
/// resolution are left to [`crate::model::validate_scenario`].
pub fn scenario_from_str<T: Scalar>(text: &str) -> Result<Scenario<T>> {
    let doc: ScenarioDoc = serde_json::from_str(text)?;
    let nodes = required(doc.nodes, "nodes")?;
    let edges = required(doc.edges, "edges")?;
    let contents = required(doc.contents, "contents")?;
    let sources = required(doc.sources, "sources")?;
    let capacities = required(doc.capacities, "capacities")?;
    let requests = required(doc.requests, "requests")?;
    let dissimilarity = required(doc.dissimilarity, "dissimilarity")?;
    let alpha = required(doc.alpha, "alpha")?;

    let node_ix: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let content_ix: HashMap<&str, usize> =
        contents.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let edges = edges
        .iter()
        .map(|e| {
            Ok(Edge {
                u: lookup(&node_ix, &e.u, "edges")?,
                v: lookup(&node_ix, &e.v, "edges")?,
                delay: T::lit(e.delay),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut source_sets = vec![Vec::new(); contents.len()];
    for (label, list) in &sources {
        let f = lookup(&content_ix, label, "sources")?;
        source_sets[f] = list
            .iter()
            .map(|n| lookup(&node_ix, n, "sources"))
            .collect::<Result<_>>()?;
    }

    let mut caps = vec![0usize; nodes.len()];
    for v in 0..nodes.len() {
        caps[v] = *capacities
            .get(&nodes[v])
            .ok_or_else(|| field_err("capacities", format!("no capacity for node {:?}", nodes[v])))?;
    }
    for label in capacities.keys() {
        lookup(&node_ix, label, "capacities")?;
    }

    let requests = requests
        .iter()
        .map(|r| {
            Ok(Request {
                content: lookup(&content_ix, &r.content, "requests")?,
                path: Path::new(
                    r.path
                        .iter()
                        .map(|n| lookup(&node_ix, n, "requests"))
                        .collect::<Result<_>>()?,
                ),
                rate: T::lit(r.rate),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let nf = contents.len();
    let dissimilarity = match dissimilarity {
        DissimilarityDoc::PowerLaw { power_law } => DissimilarityMatrix::power_law(nf, T::lit(power_law.beta)),
        DissimilarityDoc::Dense(rows) => {
            if rows.len() != nf || rows.iter().any(|r| r.len() != nf) {
                return Err(field_err("dissimilarity", format!("expected a {nf}x{nf} matrix")));
            }
            DissimilarityMatrix::new(Array2::from_shape_fn((nf, nf), |(i, j)| T::lit(rows[i][j])))
        }
    };

    let s = Scenario::new(
        Catalog::new(contents),
        Network::new(nodes, edges),
        SourceMap::new(source_sets),
        requests,
        dissimilarity,
        caps,
        T::lit(alpha),
    );
    Ok(if doc.availability_excludes_terminal {
        s.with_availability(AvailabilityRule::ExcludeTerminal)
    } else {
        s
    })
}

pub fn scenario_to_string<T: Scalar>(s: &Scenario<T>) -> String {
    let nodes = s.network().labels();
    let contents = s.catalog().labels();
    let doc = ScenarioDoc {
        nodes: Some(nodes.to_vec()),
        edges: Some(
            s.network()
                .edges()
                .iter()
                .map(|e| EdgeDoc {
                    u: nodes[e.u].clone(),
                    v: nodes[e.v].clone(),
                    delay: e.delay.as_f64(),
                })
                .collect(),
        ),
        contents: Some(contents.to_vec()),
        sources: Some(
            s.sources()
                .iter()
                .enumerate()
                .map(|(f, list)| (contents[f].clone(), list.iter().map(|&v| nodes[v].clone()).collect()))
                .collect(),
        ),
        capacities: Some(
            s.capacities()
                .iter()
                .enumerate()
                .map(|(v, &c)| (nodes[v].clone(), c))
                .collect(),
        ),
        requests: Some(
            s.requests()
                .iter()
                .map(|r| RequestDoc {
                    content: contents[r.content].clone(),
                    path: r.path.nodes().iter().map(|&v| nodes[v].clone()).collect(),
                    rate: r.rate.as_f64(),
                })
                .collect(),
        ),
        dissimilarity: Some(DissimilarityDoc::Dense(
            s.dissimilarity()
                .matrix()
                .rows()
                .into_iter()
                .map(|row| row.iter().map(|v| v.as_f64()).collect())
                .collect(),
        )),
        alpha: Some(s.alpha().as_f64()),
        availability_excludes_terminal: s.availability() == AvailabilityRule::ExcludeTerminal,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("scenario document serializes");
    text.push('\n');
    text
}

pub fn load_scenario<T: Scalar>(path: impl AsRef<FsPath>) -> Result<Scenario<T>> {
    scenario_from_str(&fs::read_to_string(path)?)
}

pub fn save_scenario<T: Scalar>(s: &Scenario<T>, path: impl AsRef<FsPath>) -> Result<()> {
    fs::write(path, scenario_to_string(s))?;
    Ok(())
}
