use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Catalog, DissimilarityMatrix, Edge, Network, NodeId, Path, Request, Scenario, SourceMap,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Square grid, `2 s (s - 1)` links.
    #[default]
    Grid,
    /// Grid with wraparound links, `2 s^2` links for `s >= 3`.
    Torus,
}

impl std::str::FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Self::Grid),
            "torus" => Ok(Self::Torus),
            other => Err(Error::Config(format!("unknown topology {other:?}"))),
        }
    }
}

/// Parameters of the synthetic scenario family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub nodes_side: usize,
    pub topology: Topology,
    pub num_contents: usize,
    pub num_requests: usize,
    pub num_origins: usize,
    pub capacity: usize,
    pub beta: f64,
    pub rho: f64,
    pub alpha: f64,
    pub min_delay: f64,
    pub max_delay: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            nodes_side: 5,
            topology: Topology::Grid,
            num_contents: 10,
            num_requests: 40,
            num_origins: 12,
            capacity: 2,
            beta: 3.0,
            rho: 1.2,
            alpha: 10.0,
            min_delay: 1.0,
            max_delay: 10.0,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.nodes_side == 0 || self.num_contents == 0 {
            return bad("nodes_side and num_contents must be positive");
        }
        if self.num_origins == 0 || self.num_origins > self.nodes_side * self.nodes_side {
            return bad("num_origins must be between 1 and the number of nodes");
        }
        if self.num_requests > self.num_origins * self.num_contents {
            return bad("more requests than distinct (content, origin) pairs");
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad("rho must be nonnegative");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be nonnegative");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be nonnegative");
        }
        if !(self.min_delay > 0.0 && self.max_delay >= self.min_delay && self.max_delay.is_finite()) {
            return bad("delay range must satisfy 0 < min_delay <= max_delay");
        }
        Ok(())
    }
}

/// Links of a `side x side` grid (row-major node ids), optionally wrapped.
pub fn grid_edges(side: usize, topology: Topology) -> Vec<(NodeId, NodeId)> {
    let id = |r: usize, c: usize| r * side + c;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |a: NodeId, b: NodeId| {
        if a != b && seen.insert((a.min(b), a.max(b))) {
            out.push((a.min(b), a.max(b)));
        }
    };
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                push(id(r, c), id(r, c + 1));
            } else if topology == Topology::Torus {
                push(id(r, c), id(r, 0));
            }
            if r + 1 < side {
                push(id(r, c), id(r + 1, c));
            } else if topology == Topology::Torus {
                push(id(r, c), id(0, c));
            }
        }
    }
    out
}

/// Minimum total-delay path from `from` to `to`; among equal-delay paths the
/// lexicographically smallest node sequence wins.
pub fn shortest_path<T: Scalar>(net: &Network<T>, from: NodeId, to: NodeId) -> Option<Path> {
    let n = net.num_nodes();
    let adj = net.adjacency();
    let mut dist = vec![T::infinity(); n];
    let mut best: Vec<Option<Vec<NodeId>>> = vec![None; n];
    let mut done = vec![false; n];
    dist[from] = T::zero();
    best[from] = Some(vec![from]);
    loop {
        // smallest (distance, path) among unsettled nodes
        let mut pick: Option<NodeId> = None;
        for v in 0..n {
            if done[v] || best[v].is_none() {
                continue;
            }
            pick = match pick {
                None => Some(v),
                Some(u) => {
                    let better = dist[v] < dist[u] || (dist[v] == dist[u] && best[v] < best[u]);
                    Some(if better { v } else { u })
                }
            };
        }
        let u = pick?;
        if u == to {
            return best[u].clone().map(Path::new);
        }
        done[u] = true;
        let base = best[u].clone().expect("settled node has a path");
        for &(v, w) in &adj[u] {
            if done[v] {
                continue;
            }
            let cand = dist[u] + w;
            let mut cand_path = base.clone();
            cand_path.push(v);
            let improves = match &best[v] {
                None => true,
                Some(p) => cand < dist[v] || (cand == dist[v] && cand_path < *p),
            };
            if improves {
                dist[v] = cand;
                best[v] = Some(cand_path);
            }
        }
    }
}

/// Zipf popularity over ranks `1..=n`: `P(f) ∝ f^{-rho}`.
pub fn zipf_weights(n: usize, rho: f64) -> Vec<f64> {
    (1..=n).map(|f| (f as f64).powf(-rho)).collect()
}

/// Draws a synthetic scenario.
///
/// Requests are distinct `(content, origin)` pairs; a duplicate draw is
/// rejected and redrawn.
pub fn generate_scenario<T: Scalar, R: Rng + ?Sized>(g: &GenConfig, rng: &mut R) -> Result<Scenario<T>> {
    g.validate()?;
    let side = g.nodes_side;
    let nv = side * side;
    let labels: Vec<String> = (0..nv).map(|i| format!("n{i}")).collect();
    let edges: Vec<Edge<T>> = grid_edges(side, g.topology)
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            delay: T::lit(if g.max_delay > g.min_delay {
                rng.random_range(g.min_delay..g.max_delay)
            } else {
                g.min_delay
            }),
        })
        .collect();
    let network = Network::new(labels, edges);

    let sources: Vec<Vec<NodeId>> = (0..g.num_contents)
        .map(|_| vec![rng.random_range(0..nv)])
        .collect();
    let origins: Vec<NodeId> = sample(rng, nv, g.num_origins).into_vec();

    let popularity = WeightedIndex::new(zipf_weights(g.num_contents, g.rho))
        .map_err(|e| Error::Config(format!("zipf weights: {e}")))?;
    let mut seen = HashSet::new();
    let mut requests = Vec::with_capacity(g.num_requests);
    while requests.len() < g.num_requests {
        let f = popularity.sample(rng);
        let origin = origins[rng.random_range(0..origins.len())];
        if !seen.insert((f, origin)) {
            continue;
        }
        let path = shortest_path(&network, origin, sources[f][0])
            .ok_or_else(|| Error::Config("network is disconnected".into()))?;
        requests.push(Request {
            content: f,
            path,
            rate: T::one(),
        });
    }

    Ok(Scenario::new(
        Catalog::ranked(g.num_contents),
        network,
        SourceMap::new(sources),
        requests,
        DissimilarityMatrix::power_law(g.num_contents, T::lit(g.beta)),
        vec![g.capacity; nv],
        T::lit(g.alpha),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_match_experiment_setup() {
        let g = GenConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Scenario<f64> = generate_scenario(&g, &mut rng).unwrap();
        assert_eq!(s.num_nodes(), 25);
        assert_eq!(s.network().edges().len(), 40);
        assert_eq!(s.num_contents(), 10);
        assert_eq!(s.num_requests(), 40);
        assert!(s.capacities().iter().all(|&c| c == 2));
        assert!(s.requests().iter().all(|r| r.rate == 1.0));
        let origins: HashSet<_> = s.requests().iter().map(|r| r.path.nodes()[0]).collect();
        assert!(origins.len() <= 12);
        assert_eq!(s.dissimilarity().get(0, 1), 1.0);
        assert_eq!(s.dissimilarity().get(1, 4), 27.0);
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn torus_edge_count() {
        assert_eq!(grid_edges(5, Topology::Torus).len(), 50);
        assert_eq!(grid_edges(5, Topology::Grid).len(), 40);
        assert_eq!(grid_edges(2, Topology::Torus).len(), 4);
    }

    #[test]
    fn lexicographic_tie_break() {
        // square 0-1-3, 0-2-3 with equal delays
        let net = Network::new(
            (0..4).map(|i| i.to_string()).collect(),
            vec![
                Edge { u: 0, v: 2, delay: 1.0 },
                Edge { u: 2, v: 3, delay: 1.0 },
                Edge { u: 0, v: 1, delay: 1.0 },
                Edge { u: 1, v: 3, delay: 1.0 },
            ],
        );
        assert_eq!(shortest_path(&net, 0, 3).unwrap().nodes(), &[0, 1, 3]);
        assert_eq!(shortest_path(&net, 2, 2).unwrap().nodes(), &[2]);
    }

    #[test]
    fn rejects_negative_rho() {
        let g = GenConfig { rho: -0.5, ..GenConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_scenario::<f64, _>(&g, &mut rng).is_err());
    }
}
