//! Problem-instance types: network, catalog, sources, requests, dissimilarity.
//!
//! Nodes, contents and requests are dense zero-based indices. The scenario file
//! format uses string labels, which are kept here so a scenario can be written
//! back out unchanged.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use ndarray::Array2;

use crate::scalar::Scalar;

pub type NodeId = usize;
pub type ContentId = usize;
pub type RequestId = usize;

/// The set of contents. Content `i` carries label `labels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    labels: Vec<String>,
}

impl Catalog {
    pub fn new(labels: Vec<String>) -> Self {
        Self { labels }
    }

    /// Contents labelled `1..=n`, matching popularity ranks.
    pub fn ranked(n: usize) -> Self {
        Self::new((1..=n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// An undirected link with a per-content-unit delivery delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub u: NodeId,
    pub v: NodeId,
    pub delay: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    labels: Vec<String>,
    edges: Vec<Edge<T>>,
    index: HashMap<(NodeId, NodeId), usize>,
}

impl<T: Scalar> Network<T> {
    /// Builds the network without validating it; see [`validate_scenario`].
    pub fn new(labels: Vec<String>, edges: Vec<Edge<T>>) -> Self {
        let mut index = HashMap::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            index.entry(key(e.u, e.v)).or_insert(i);
        }
        Self {
            labels,
            edges,
            index,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    /// Delay of the link between `u` and `v`, in either direction.
    pub fn delay(&self, u: NodeId, v: NodeId) -> Option<T> {
        self.index.get(&key(u, v)).map(|&i| self.edges[i].delay)
    }

    /// Neighbour lists over declared nodes; edges with unknown endpoints are skipped.
    pub fn adjacency(&self) -> Vec<Vec<(NodeId, T)>> {
        let n = self.num_nodes();
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            if e.u < n && e.v < n && e.u != e.v {
                adj[e.u].push((e.v, e.delay));
                adj[e.v].push((e.u, e.delay));
            }
        }
        for nbrs in &mut adj {
            nbrs.sort_by_key(|&(v, _)| v);
            nbrs.dedup_by_key(|&mut (v, _)| v);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Source nodes `S_f` for every content.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMap {
    sources: Vec<Vec<NodeId>>,
}

impl SourceMap {
    pub fn new(sources: Vec<Vec<NodeId>>) -> Self {
        Self { sources }
    }

    pub fn of(&self, content: ContentId) -> &[NodeId] {
        &self.sources[content]
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[NodeId]> {
        self.sources.iter().map(Vec::as_slice)
    }
}

/// Forwarding path `p_1, ..., p_|p|`, from the ingress node to a source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<NodeId>);

impl Path {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        Self(nodes)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ingress(&self) -> Option<NodeId> {
        self.0.first().copied()
    }

    pub fn terminal(&self) -> Option<NodeId> {
        self.0.last().copied()
    }

    /// 1-based position of `v`, or `None` if `v` is not on the path.
    pub fn position(&self, v: NodeId) -> Option<usize> {
        position_in_path(v, self)
    }
}

/// 1-based position of node `v` in `p`; `None` plays the role of the `-1` sentinel.
pub fn position_in_path(v: NodeId, p: &Path) -> Option<usize> {
    p.0.iter().position(|&u| u == v).map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Request<T> {
    pub content: ContentId,
    pub path: Path,
    pub rate: T,
}

/// Dense `|F| x |F|` dissimilarity; entry `(f, g)` is the cost of delivering `g` for `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix<T>(Array2<T>);

impl<T: Scalar> DissimilarityMatrix<T> {
    pub fn new(d: Array2<T>) -> Self {
        Self(d)
    }

    /// `d(f, g) = |f - g|^beta` over content ranks.
    pub fn power_law(num_contents: usize, beta: T) -> Self {
        Self(Array2::from_shape_fn((num_contents, num_contents), |(f, g)| {
            if f == g {
                T::zero()
            } else {
                T::from_count(f.abs_diff(g)).powf(beta)
            }
        }))
    }

    #[inline]
    pub fn get(&self, f: ContentId, g: ContentId) -> T {
        self.0[[f, g]]
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.0
    }
}

/// Which path nodes count when deciding whether a delivered content is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AvailabilityRule {
    /// Every node `p_1..p_|p|`, including the terminal source.
    #[default]
    WholePath,
    /// Only `p_1..p_{|p|-1}` for substitutes; the terminal source still serves
    /// the requested content.
    ExcludeTerminal,
}

/// Immutable problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    catalog: Catalog,
    network: Network<T>,
    sources: SourceMap,
    requests: Vec<Request<T>>,
    dissimilarity: DissimilarityMatrix<T>,
    capacities: Vec<usize>,
    alpha: T,
    availability: AvailabilityRule,
    // derived
    hop_delays: Vec<Vec<T>>,
    pinned: Array2<bool>,
}

impl<T: Scalar> Scenario<T> {
    /// Assembles a scenario. No invariant is enforced here; call
    /// [`validate_scenario`] before handing it to a solver.
    pub fn new(
        catalog: Catalog,
        network: Network<T>,
        sources: SourceMap,
        requests: Vec<Request<T>>,
        dissimilarity: DissimilarityMatrix<T>,
        capacities: Vec<usize>,
        alpha: T,
    ) -> Self {
        let hop_delays = requests
            .iter()
            .map(|r| {
                r.path
                    .nodes()
                    .windows(2)
                    .map(|w| network.delay(w[1], w[0]).unwrap_or_else(T::nan))
                    .collect()
            })
            .collect();
        let (nv, nf) = (network.num_nodes(), catalog.len());
        let mut pinned = Array2::from_elem((nv, nf), false);
        for (f, nodes) in sources.iter().enumerate().take(nf) {
            for &v in nodes {
                if v < nv {
                    pinned[[v, f]] = true;
                }
            }
        }
        Self {
            catalog,
            network,
            sources,
            requests,
            dissimilarity,
            capacities,
            alpha,
            availability: AvailabilityRule::default(),
            hop_delays,
            pinned,
        }
    }

    pub fn with_alpha(&self, alpha: T) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    pub fn with_uniform_capacity(&self, capacity: usize) -> Self {
        Self {
            capacities: vec![capacity; self.num_nodes()],
            ..self.clone()
        }
    }

    pub fn with_availability(&self, availability: AvailabilityRule) -> Self {
        Self {
            availability,
            ..self.clone()
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }
    pub fn network(&self) -> &Network<T> {
        &self.network
    }
    pub fn sources(&self) -> &SourceMap {
        &self.sources
    }
    pub fn requests(&self) -> &[Request<T>] {
        &self.requests
    }
    pub fn request(&self, r: RequestId) -> &Request<T> {
        &self.requests[r]
    }
    pub fn dissimilarity(&self) -> &DissimilarityMatrix<T> {
        &self.dissimilarity
    }
    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn availability(&self) -> AvailabilityRule {
        self.availability
    }

    pub fn num_nodes(&self) -> usize {
        self.network.num_nodes()
    }
    pub fn num_contents(&self) -> usize {
        self.catalog.len()
    }
    pub fn num_requests(&self) -> usize {
        self.requests.len()
    }

    /// `tau_{p_{k+1}, p_k}` for `k = 1..|p|-1` along request `r`'s path.
    pub fn hop_delays(&self, r: RequestId) -> &[T] {
        &self.hop_delays[r]
    }

    /// Whether `x_{v,f}` is fixed to one because `v` is a source of `f`.
    #[inline]
    pub fn is_pinned(&self, v: NodeId, f: ContentId) -> bool {
        self.pinned[[v, f]]
    }

    pub fn pinned(&self) -> &Array2<bool> {
        &self.pinned
    }

    /// Number of leading path nodes whose caches count when checking whether
    /// `content` is available to request `r`. The requested content itself is
    /// always served by the terminal source.
    #[inline]
    pub fn availability_len(&self, r: RequestId, content: ContentId) -> usize {
        let req = &self.requests[r];
        let len = req.path.len();
        match self.availability {
            AvailabilityRule::ExcludeTerminal if content != req.content => len.saturating_sub(1),
            _ => len,
        }
    }
}

/// One failed invariant found by [`validate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyCatalog,
    DuplicateContentLabel { label: String },
    DuplicateNodeLabel { label: String },
    EdgeEndpointUnknown { edge: usize },
    SelfLoop { edge: usize },
    DuplicateEdge { edge: usize },
    NonPositiveDelay { edge: usize },
    Disconnected,
    SourceMapSize { expected: usize, found: usize },
    EmptySourceSet { content: ContentId },
    SourceNodeUnknown { content: ContentId, node: NodeId },
    RequestContentUnknown { request: RequestId },
    EmptyPath { request: RequestId },
    PathNodeUnknown { request: RequestId, node: NodeId },
    PathRepeatsNode { request: RequestId, node: NodeId },
    PathMissingEdge { request: RequestId, hop: usize },
    TerminalNotSource { request: RequestId },
    InvalidRate { request: RequestId },
    DissimilarityShape { rows: usize, cols: usize },
    NonzeroSelfDissimilarity { content: ContentId },
    InvalidDissimilarity { from: ContentId, to: ContentId },
    CapacitiesSize { expected: usize, found: usize },
    InvalidAlpha,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptyCatalog => write!(f, "catalog has no contents"),
            DuplicateContentLabel { label } => write!(f, "content label {label:?} repeated"),
            DuplicateNodeLabel { label } => write!(f, "node label {label:?} repeated"),
            EdgeEndpointUnknown { edge } => write!(f, "edge {edge} has an undeclared endpoint"),
            SelfLoop { edge } => write!(f, "edge {edge} is a self loop"),
            DuplicateEdge { edge } => write!(f, "edge {edge} duplicates an earlier edge"),
            NonPositiveDelay { edge } => write!(f, "edge {edge} delay is not a positive number"),
            Disconnected => write!(f, "network is not connected"),
            SourceMapSize { expected, found } => {
                write!(f, "source map has {found} entries, expected {expected}")
            }
            EmptySourceSet { content } => write!(f, "content {content} has no source node"),
            SourceNodeUnknown { content, node } => {
                write!(f, "content {content} lists unknown source node {node}")
            }
            RequestContentUnknown { request } => {
                write!(f, "request {request} asks for an unknown content")
            }
            EmptyPath { request } => write!(f, "request {request} has an empty path"),
            PathNodeUnknown { request, node } => {
                write!(f, "request {request} path visits unknown node {node}")
            }
            PathRepeatsNode { request, node } => {
                write!(f, "request {request} path visits node {node} twice")
            }
            PathMissingEdge { request, hop } => {
                write!(f, "request {request} path hop {hop} is not a network edge")
            }
            TerminalNotSource { request } => {
                write!(f, "request {request} path does not end at a source of its content")
            }
            InvalidRate { request } => write!(f, "request {request} rate is negative or not finite"),
            DissimilarityShape { rows, cols } => {
                write!(f, "dissimilarity matrix is {rows}x{cols}")
            }
            NonzeroSelfDissimilarity { content } => {
                write!(f, "d({content},{content}) is not zero")
            }
            InvalidDissimilarity { from, to } => {
                write!(f, "d({from},{to}) is negative or not finite")
            }
            CapacitiesSize { expected, found } => {
                write!(f, "{found} capacities given for {expected} nodes")
            }
            InvalidAlpha => write!(f, "alpha is negative or not finite"),
        }
    }
}

/// Checks every structural invariant of a scenario. An empty result means the
/// scenario is well formed.
pub fn validate_scenario<T: Scalar>(s: &Scenario<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    let nf = s.num_contents();
    let nv = s.num_nodes();

    if nf == 0 {
        out.push(Violation::EmptyCatalog);
    }
    push_duplicates(s.catalog.labels(), &mut out, |label| {
        Violation::DuplicateContentLabel { label }
    });
    push_duplicates(s.network.labels(), &mut out, |label| {
        Violation::DuplicateNodeLabel { label }
    });

    let mut seen_edges = HashSet::new();
    for (i, e) in s.network.edges().iter().enumerate() {
        if e.u >= nv || e.v >= nv {
            out.push(Violation::EdgeEndpointUnknown { edge: i });
        } else if e.u == e.v {
            out.push(Violation::SelfLoop { edge: i });
        } else if !seen_edges.insert(key(e.u, e.v)) {
            out.push(Violation::DuplicateEdge { edge: i });
        }
        if !(e.delay > T::zero() && e.delay.is_finite()) {
            out.push(Violation::NonPositiveDelay { edge: i });
        }
    }
    if !s.network.is_connected() {
        out.push(Violation::Disconnected);
    }

    if s.sources.len() != nf {
        out.push(Violation::SourceMapSize {
            expected: nf,
            found: s.sources.len(),
        });
    }
    for (f, nodes) in s.sources.iter().enumerate() {
        if nodes.is_empty() {
            out.push(Violation::EmptySourceSet { content: f });
        }
        for &v in nodes {
            if v >= nv {
                out.push(Violation::SourceNodeUnknown {
                    content: f,
                    node: v,
                });
            }
        }
    }

    for (r, req) in s.requests.iter().enumerate() {
        let content_ok = req.content < nf;
        if !content_ok {
            out.push(Violation::RequestContentUnknown { request: r });
        }
        let nodes = req.path.nodes();
        if nodes.is_empty() {
            out.push(Violation::EmptyPath { request: r });
        }
        let mut visited = HashSet::new();
        let mut nodes_ok = true;
        for &v in nodes {
            if v >= nv {
                nodes_ok = false;
                out.push(Violation::PathNodeUnknown {
                    request: r,
                    node: v,
                });
            } else if !visited.insert(v) {
                out.push(Violation::PathRepeatsNode {
                    request: r,
                    node: v,
                });
            }
        }
        if nodes_ok {
            for (hop, w) in nodes.windows(2).enumerate() {
                if s.network.delay(w[0], w[1]).is_none() || w[0] == w[1] {
                    out.push(Violation::PathMissingEdge {
                        request: r,
                        hop: hop + 1,
                    });
                }
            }
        }
        if content_ok && req.content < s.sources.len() {
            if let Some(t) = req.path.terminal() {
                if !s.sources.of(req.content).contains(&t) {
                    out.push(Violation::TerminalNotSource { request: r });
                }
            }
        }
        if !(req.rate >= T::zero() && req.rate.is_finite()) {
            out.push(Violation::InvalidRate { request: r });
        }
    }

    let d = s.dissimilarity.matrix();
    if d.dim() != (nf, nf) {
        out.push(Violation::DissimilarityShape {
            rows: d.nrows(),
            cols: d.ncols(),
        });
    } else {
        for f in 0..nf {
            for g in 0..nf {
                let v = d[[f, g]];
                if f == g {
                    if v != T::zero() {
                        out.push(Violation::NonzeroSelfDissimilarity { content: f });
                    }
                } else if !(v >= T::zero() && v.is_finite()) {
                    out.push(Violation::InvalidDissimilarity { from: f, to: g });
                }
            }
        }
    }

    if s.capacities.len() != nv {
        out.push(Violation::CapacitiesSize {
            expected: nv,
            found: s.capacities.len(),
        });
    }
    if !(s.alpha >= T::zero() && s.alpha.is_finite()) {
        out.push(Violation::InvalidAlpha);
    }
    out
}

fn push_duplicates(labels: &[String], out: &mut Vec<Violation>, make: impl Fn(String) -> Violation) {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            out.push(make(l.clone()));
        }
    }
}
