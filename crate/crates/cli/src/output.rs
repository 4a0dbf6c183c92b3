//! CSV rows, solution files and run manifests.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use simcache::cost::{objective, PrimalState};
use simcache::hibsa::{IntegerSolution, OfflineSolution};
use simcache::Scenario64;

use crate::SchemeArg;

pub const SUMMARY_HEADER: &str =
    "scheme,alpha,expected_delay,dissimilarity_cost,objective,iterations,converged,gap_vs_fractional";

pub const SWEEP_HEADER_PREFIX: &str = "rho,capacity,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scheme: SchemeArg,
    pub alpha: f64,
    pub expected_delay: f64,
    pub dissimilarity_cost: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Relative excess of the rounded objective over the fractional one.
    pub gap_vs_fractional: f64,
}

impl Summary {
    pub fn new(s: &Scenario64, sol: &OfflineSolution<f64>, scheme: SchemeArg) -> Self {
        let rounded: PrimalState<f64> = sol.integer.to_state();
        let obj = objective(s, &rounded);
        let frac = objective(s, &sol.fractional);
        let gap = if frac > 0.0 {
            (obj - frac) / frac
        } else if obj == frac {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            scheme,
            alpha: s.alpha(),
            expected_delay: simcache::cost::expected_delay(s, &rounded),
            dissimilarity_cost: simcache::cost::dissimilarity_cost(s, &rounded),
            objective: obj,
            iterations: sol.trace.iterations,
            converged: sol.trace.converged(),
            gap_vs_fractional: gap,
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            scheme_name(self.scheme),
            self.alpha,
            self.expected_delay,
            self.dissimilarity_cost,
            self.objective,
            self.iterations,
            self.converged,
            self.gap_vs_fractional
        )
    }
}

pub fn scheme_name(s: SchemeArg) -> &'static str {
    match s {
        SchemeArg::Similarity => "similarity",
        SchemeArg::Adaptive => "adaptive",
    }
}

/// Quotes a free-text CSV field.
pub fn quote(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

#[derive(Serialize)]
struct CacheEntry<'a> {
    node: &'a str,
    contents: Vec<&'a str>,
}

#[derive(Serialize)]
struct DeliveryEntry<'a> {
    request: usize,
    requested: &'a str,
    delivered: &'a str,
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    scheme: &'static str,
    cache: Vec<CacheEntry<'a>>,
    delivery: Vec<DeliveryEntry<'a>>,
}

pub fn solution_json(s: &Scenario64, sol: &IntegerSolution, scheme: SchemeArg) -> String {
    let nodes = s.network().labels();
    let contents = s.catalog().labels();
    let doc = SolutionDoc {
        scheme: scheme_name(scheme),
        cache: (0..s.num_nodes())
            .map(|v| CacheEntry {
                node: &nodes[v],
                contents: (0..s.num_contents())
                    .filter(|&f| sol.cache[[v, f]])
                    .map(|f| contents[f].as_str())
                    .collect(),
            })
            .collect(),
        delivery: sol
            .delivery
            .iter()
            .enumerate()
            .map(|(r, &g)| DeliveryEntry {
                request: r,
                requested: &contents[s.request(r).content],
                delivered: &contents[g],
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("solution serializes");
    text.push('\n');
    text
}

#[derive(Serialize)]
pub struct ScenarioInfo {
    /// Input file, or absent when generated.
    pub file: Option<String>,
    pub generator_seed: Option<u64>,
    pub nodes: usize,
    pub links: usize,
    pub contents: usize,
    pub requests: usize,
}

impl ScenarioInfo {
    pub fn of(s: &Scenario64, file: Option<&Path>, generator_seed: Option<u64>) -> Self {
        Self {
            file: file.map(|p| p.display().to_string()),
            generator_seed,
            nodes: s.num_nodes(),
            links: s.network().edges().len(),
            contents: s.num_contents(),
            requests: s.num_requests(),
        }
    }
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: &'a C,
    pub scenario: Option<ScenarioInfo>,
    pub outputs: Vec<&'static str>,
}

pub fn write_manifest<C: Serialize>(dir: &Path, m: &Manifest<'_, C>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m).context("serializing manifest")?;
    text.push('\n');
    write_file(&dir.join("manifest.json"), text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
