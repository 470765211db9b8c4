//! Weighted graphs G = (X, w, κ, μ): finite graphs, lazy (countably
//! infinite) graphs, Dirichlet subgraphs and exhaustions.
//!
//! Standing assumptions on the weight function, enforced structurally:
//! symmetry w(x,y) = w(y,x) (weights are stored once per unordered pair),
//! no loops w(x,x) = 0, and Σ_y w(x,y) < ∞ for each x (automatic on finite
//! graphs; lazy graphs must answer `total_weight_at` analytically).

pub mod family;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{GpmeError, Result};
use crate::node_function::Measure;
use crate::num::{kahan_sum, KahanSum};
use crate::NodeId;

/// Finite weighted graph with killing term κ ≥ 0 and node measure μ > 0.
///
/// Node ids are opaque strings mapped to dense indices; the ordering is
/// fixed at construction and determines solver sweep order, summation order
/// and all serialized output.
#[derive(Clone, Debug)]
pub struct Graph {
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    adj: Vec<Vec<(usize, f64)>>,
    kappa: Vec<f64>,
    mu: Vec<f64>,
}

impl Graph {
    /// Builds a graph from `(id, mu, kappa)` node triples and `(u, v, w)`
    /// edge triples.
    ///
    /// # Errors
    /// Duplicate node ids, unknown edge endpoints, self-loops, duplicate
    /// edges (in either orientation), non-finite data, μ ≤ 0, κ < 0 or
    /// w ≤ 0 are all rejected. The node list must be nonempty.
    pub fn new<S, T>(
        nodes: impl IntoIterator<Item = (S, f64, f64)>,
        edges: impl IntoIterator<Item = (T, T, f64)>,
    ) -> Result<Self>
    where
        S: Into<NodeId>,
        T: AsRef<str>,
    {
        let mut ids = Vec::new();
        let mut index = BTreeMap::new();
        let mut kappa = Vec::new();
        let mut mu = Vec::new();
        for (id, m, k) in nodes {
            let id = id.into();
            if !(m.is_finite() && m > 0.0) {
                return Err(GpmeError::InvalidGraph(format!(
                    "node `{id}`: measure mu must be positive and finite, got {m}"
                )));
            }
            if !(k.is_finite() && k >= 0.0) {
                return Err(GpmeError::InvalidGraph(format!(
                    "node `{id}`: killing term kappa must be nonnegative and finite, got {k}"
                )));
            }
            if index.insert(id.clone(), ids.len()).is_some() {
                return Err(GpmeError::InvalidGraph(format!("duplicate node id `{id}`")));
            }
            ids.push(id);
            mu.push(m);
            kappa.push(k);
        }
        if ids.is_empty() {
            return Err(GpmeError::InvalidGraph(
                "graph needs at least one node".into(),
            ));
        }

        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ids.len()];
        let mut seen = BTreeSet::new();
        for (u, v, w) in edges {
            let (u, v) = (u.as_ref(), v.as_ref());
            let iu = *index
                .get(u)
                .ok_or_else(|| GpmeError::UnknownNode(u.to_string()))?;
            let iv = *index
                .get(v)
                .ok_or_else(|| GpmeError::UnknownNode(v.to_string()))?;
            if iu == iv {
                return Err(GpmeError::InvalidGraph(format!("self-loop at `{u}`")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GpmeError::InvalidGraph(format!(
                    "edge `{u}`-`{v}`: weight must be positive and finite, got {w}"
                )));
            }
            if !seen.insert((iu.min(iv), iu.max(iv))) {
                return Err(GpmeError::InvalidGraph(format!(
                    "duplicate edge `{u}`-`{v}`"
                )));
            }
            adj[iu].push((iv, w));
            adj[iv].push((iu, w));
        }
        for list in &mut adj {
            list.sort_by_key(|(j, _)| *j);
        }
        Ok(Graph {
            ids,
            index,
            adj,
            kappa,
            mu,
        })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Node ids in construction order.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    /// Dense index of a node id.
    ///
    /// # Errors
    /// Unknown ids.
    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GpmeError::UnknownNode(id.to_string()))
    }

    pub fn id_of(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn mu_at(&self, idx: usize) -> f64 {
        self.mu[idx]
    }

    pub fn kappa_at(&self, idx: usize) -> f64 {
        self.kappa[idx]
    }

    /// Adjacency of a node: (neighbor index, weight), ascending by index.
    pub fn neighbors(&self, idx: usize) -> &[(usize, f64)] {
        &self.adj[idx]
    }

    /// Weight between two nodes (0 when not adjacent).
    pub fn weight_between(&self, x: &str, y: &str) -> Result<f64> {
        let ix = self.index_of(x)?;
        let iy = self.index_of(y)?;
        Ok(self.adj[ix]
            .iter()
            .find(|(j, _)| *j == iy)
            .map_or(0.0, |(_, w)| *w))
    }

    /// Weighted degrees: deg(x) = Σ_y w(x,y) + κ(x) and Deg(x) = deg(x)/μ(x).
    ///
    /// # Errors
    /// Unknown ids.
    pub fn degree(&self, x: &str) -> Result<(f64, f64)> {
        let i = self.index_of(x)?;
        Ok(self.degree_idx(i))
    }

    pub(crate) fn degree_idx(&self, i: usize) -> (f64, f64) {
        let mut acc = KahanSum::new();
        for (_, w) in &self.adj[i] {
            acc.add(*w);
        }
        acc.add(self.kappa[i]);
        let deg = acc.value();
        (deg, deg / self.mu[i])
    }

    /// Partition of the node set into connected components. Components are
    /// ordered by their smallest node index, nodes within a component by
    /// index.
    pub fn connected_components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.len()];
        let mut blocks = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut block = Vec::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                block.push(i);
                for &(j, _) in &self.adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            block.sort_unstable();
            blocks.push(block.into_iter().map(|i| self.ids[i].clone()).collect());
        }
        blocks
    }

    /// Dirichlet restriction to a nonempty node subset A: weights and μ are
    /// restricted, and the killing term becomes κ_dir = κ|_A + b_dir with
    /// b_dir(x) = Σ_{y∉A} w(x,y).
    ///
    /// # Errors
    /// Empty, repeated or unknown subset entries.
    pub fn dirichlet_restrict(&self, a: &[NodeId]) -> Result<DirichletSubgraph> {
        if a.is_empty() {
            return Err(GpmeError::InvalidArgument(
                "Dirichlet subset must be nonempty".into(),
            ));
        }
        let mut sub_index = BTreeMap::new();
        let mut idxs = Vec::with_capacity(a.len());
        for id in a {
            let i = self.index_of(id)?;
            if sub_index.insert(i, sub_index.len()).is_some() {
                return Err(GpmeError::InvalidArgument(format!(
                    "node `{id}` listed twice in subset"
                )));
            }
            idxs.push(i);
        }

        let mut b_dir = Vec::with_capacity(a.len());
        let mut kappa_parent = Vec::with_capacity(a.len());
        let mut nodes = Vec::with_capacity(a.len());
        let mut edges = Vec::new();
        for (si, &i) in idxs.iter().enumerate() {
            let mut boundary = KahanSum::new();
            for &(j, w) in &self.adj[i] {
                match sub_index.get(&j) {
                    Some(&sj) => {
                        if sj > si {
                            edges.push((self.ids[i].clone(), self.ids[j].clone(), w));
                        }
                    }
                    None => boundary.add(w),
                }
            }
            let b = boundary.value();
            b_dir.push(b);
            kappa_parent.push(self.kappa[i]);
            nodes.push((self.ids[i].clone(), self.mu[i], self.kappa[i] + b));
        }
        let graph = Graph::new(nodes, edges)?;
        Ok(DirichletSubgraph {
            graph,
            b_dir,
            kappa_parent,
        })
    }

    /// Parses the JSON graph format
    /// `{"nodes":[{"id":..,"mu":..,"kappa":..}],"edges":[{"u":..,"v":..,"w":..}]}`.
    /// `mu` defaults to 1 and `kappa` to 0 when omitted.
    ///
    /// # Errors
    /// Malformed JSON or any structural violation (see [`Graph::new`]);
    /// duplicate edges and self-loops are rejected at load time.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(s)?;
        Graph::new(
            file.nodes.into_iter().map(|n| (n.id, n.mu, n.kappa)),
            file.edges.into_iter().map(|e| (e.u, e.v, e.w)),
        )
    }

    /// Serializes to the JSON graph format (nodes in construction order,
    /// each edge once, oriented from the smaller node index).
    pub fn to_json_string(&self) -> String {
        let nodes = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| NodeRec {
                id: id.clone(),
                mu: self.mu[i],
                kappa: self.kappa[i],
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..self.len() {
            for &(j, w) in &self.adj[i] {
                if j > i {
                    edges.push(EdgeRec {
                        u: self.ids[i].clone(),
                        v: self.ids[j].clone(),
                        w,
                    });
                }
            }
        }
        serde_json::to_string_pretty(&GraphFile { nodes, edges }).expect("graph serializes")
    }
}

impl Measure for Graph {
    fn mu(&self, x: &str) -> Option<f64> {
        self.index.get(x).map(|&i| self.mu[i])
    }
}

fn default_mu() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRec {
    id: NodeId,
    #[serde(default = "default_mu")]
    mu: f64,
    #[serde(default)]
    kappa: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRec {
    u: NodeId,
    v: NodeId,
    w: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    nodes: Vec<NodeRec>,
    edges: Vec<EdgeRec>,
}

/// Dirichlet subgraph: the restriction of a graph to a subset A, carrying
/// the boundary weight b_dir(x) = Σ_{y∉A} w(x,y) inside its killing term.
/// b_dir vanishes on interior nodes (those with no exterior neighbor).
#[derive(Clone, Debug)]
pub struct DirichletSubgraph {
    graph: Graph,
    b_dir: Vec<f64>,
    kappa_parent: Vec<f64>,
}

impl DirichletSubgraph {
    /// The effective finite graph on A whose killing term is κ_dir.
    /// All operators (Laplacian, resolvent) act through this view.
    pub fn effective_graph(&self) -> &Graph {
        &self.graph
    }

    /// Boundary (Dirichlet) weight b_dir(x).
    ///
    /// # Errors
    /// Unknown ids.
    pub fn b_dir(&self, x: &str) -> Result<f64> {
        Ok(self.b_dir[self.graph.index_of(x)?])
    }

    /// κ_dir(x) = κ(x) + b_dir(x).
    ///
    /// # Errors
    /// Unknown ids.
    pub fn kappa_dir(&self, x: &str) -> Result<f64> {
        Ok(self.graph.kappa_at(self.graph.index_of(x)?))
    }

    /// The parent graph's κ restricted to A.
    ///
    /// # Errors
    /// Unknown ids.
    pub fn kappa_parent(&self, x: &str) -> Result<f64> {
        Ok(self.kappa_parent[self.graph.index_of(x)?])
    }
}

/// User-asserted hypothesis metadata for lazy graphs, mirroring (H1) local
/// finiteness, (H2) a uniform lower bound on μ and (H3) a uniform bound on
/// Deg = deg/μ. The library verifies these on enumerated regions only and
/// records that fact in diagnostics; the global statements are unverifiable
/// at runtime.
#[derive(Clone, Copy, Debug, Default)]
pub struct HFlags {
    pub locally_finite: bool,
    pub uniform_mu_lower_bound: Option<f64>,
    pub uniform_deg_bound: Option<f64>,
}

impl HFlags {
    /// True when at least one hypothesis is asserted.
    pub fn any(&self) -> bool {
        self.locally_finite
            || self.uniform_mu_lower_bound.is_some()
            || self.uniform_deg_bound.is_some()
    }

    /// Names of the asserted hypotheses, e.g. `["H1", "H2"]`.
    pub fn asserted(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.locally_finite {
            out.push("H1");
        }
        if self.uniform_mu_lower_bound.is_some() {
            out.push("H2");
        }
        if self.uniform_deg_bound.is_some() {
            out.push("H3");
        }
        out
    }
}

/// Neighbor listing of a lazy-graph node. Nodes that are not locally finite
/// answer with a (lazily generated) infinite iterator.
pub enum Neighbors<'a> {
    Finite(Vec<(NodeId, f64)>),
    Infinite(Box<dyn Iterator<Item = (NodeId, f64)> + 'a>),
}

/// Generator interface for countably infinite graphs. Queries must be pure:
/// repeated calls return identical values.
pub trait LazyGraph: Send + Sync {
    /// Distinguished starting node for exhaustions.
    fn root(&self) -> NodeId;

    /// Whether an id names a node of this graph.
    fn contains(&self, x: &str) -> bool;

    /// Neighbors of a node with their weights, in the family's canonical
    /// (ascending) order.
    ///
    /// # Errors
    /// Unknown ids.
    fn neighbors(&self, x: &str) -> Result<Neighbors<'_>>;

    /// w(x,y), zero when not adjacent.
    ///
    /// # Errors
    /// Unknown ids.
    fn weight(&self, x: &str, y: &str) -> Result<f64>;

    /// Σ_y w(x,y), finite by assumption (A3). Families answer analytically,
    /// which is what makes Dirichlet truncation of non-locally-finite nodes
    /// possible.
    ///
    /// # Errors
    /// Unknown ids.
    fn total_weight_at(&self, x: &str) -> Result<f64>;

    /// κ(x).
    ///
    /// # Errors
    /// Unknown ids.
    fn kappa_at(&self, x: &str) -> Result<f64>;

    /// μ(x).
    ///
    /// # Errors
    /// Unknown ids.
    fn mu_at(&self, x: &str) -> Result<f64>;

    /// Asserted hypothesis flags.
    fn flags(&self) -> HFlags;

    /// Short human-readable description for diagnostics.
    fn describe(&self) -> String;
}

impl Measure for dyn LazyGraph + '_ {
    fn mu(&self, x: &str) -> Option<f64> {
        self.mu_at(x).ok()
    }
}

/// Adapter presenting a finite [`Graph`] through the [`LazyGraph`]
/// interface, rooted at its first node. Exhaustions of such a graph
/// stabilize at the full node set (of the root's component).
pub struct LazyFromGraph<'g> {
    graph: &'g Graph,
}

impl<'g> LazyFromGraph<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        LazyFromGraph { graph }
    }
}

impl LazyGraph for LazyFromGraph<'_> {
    fn root(&self) -> NodeId {
        self.graph.ids[0].clone()
    }

    fn contains(&self, x: &str) -> bool {
        self.graph.index.contains_key(x)
    }

    fn neighbors(&self, x: &str) -> Result<Neighbors<'_>> {
        let i = self.graph.index_of(x)?;
        Ok(Neighbors::Finite(
            self.graph.adj[i]
                .iter()
                .map(|&(j, w)| (self.graph.ids[j].clone(), w))
                .collect(),
        ))
    }

    fn weight(&self, x: &str, y: &str) -> Result<f64> {
        self.graph.weight_between(x, y)
    }

    fn total_weight_at(&self, x: &str) -> Result<f64> {
        let i = self.graph.index_of(x)?;
        Ok(kahan_sum(self.graph.adj[i].iter().map(|(_, w)| *w)))
    }

    fn kappa_at(&self, x: &str) -> Result<f64> {
        Ok(self.graph.kappa_at(self.graph.index_of(x)?))
    }

    fn mu_at(&self, x: &str) -> Result<f64> {
        Ok(self.graph.mu_at(self.graph.index_of(x)?))
    }

    fn flags(&self) -> HFlags {
        let mut mu_min = f64::INFINITY;
        let mut deg_max: f64 = 0.0;
        for i in 0..self.graph.len() {
            mu_min = mu_min.min(self.graph.mu_at(i));
            deg_max = deg_max.max(self.graph.degree_idx(i).1);
        }
        HFlags {
            locally_finite: true,
            uniform_mu_lower_bound: Some(mu_min),
            uniform_deg_bound: Some(deg_max),
        }
    }

    fn describe(&self) -> String {
        format!("finite graph with {} nodes (lazy view)", self.graph.len())
    }
}

/// Adapter that withholds every asserted hypothesis flag (including local
/// finiteness), exposing the graph as a bare neighborhood oracle. Solvers
/// then refuse sign-changing data, which is how refusal paths are
/// exercised deliberately.
pub struct WithoutFlags(pub Box<dyn LazyGraph>);

impl LazyGraph for WithoutFlags {
    fn root(&self) -> NodeId {
        self.0.root()
    }

    fn contains(&self, x: &str) -> bool {
        self.0.contains(x)
    }

    fn neighbors(&self, x: &str) -> Result<Neighbors<'_>> {
        self.0.neighbors(x)
    }

    fn weight(&self, x: &str, y: &str) -> Result<f64> {
        self.0.weight(x, y)
    }

    fn total_weight_at(&self, x: &str) -> Result<f64> {
        self.0.total_weight_at(x)
    }

    fn kappa_at(&self, x: &str) -> Result<f64> {
        self.0.kappa_at(x)
    }

    fn mu_at(&self, x: &str) -> Result<f64> {
        self.0.mu_at(x)
    }

    fn flags(&self) -> HFlags {
        HFlags::default()
    }

    fn describe(&self) -> String {
        format!("{} (flags withheld)", self.0.describe())
    }
}

/// Dirichlet truncation of a lazy graph to a finite node list A, in the
/// order given. The boundary weight is computed from the analytic total:
/// b_dir(x) = Σ_y w(x,y) − Σ_{y∈A} w(x,y), so nodes with infinitely many
/// neighbors are handled exactly.
///
/// # Errors
/// Empty or repeated subset entries, unknown ids.
pub fn dirichlet_truncate(g: &dyn LazyGraph, a: &[NodeId]) -> Result<DirichletSubgraph> {
    if a.is_empty() {
        return Err(GpmeError::InvalidArgument(
            "Dirichlet subset must be nonempty".into(),
        ));
    }
    let set: BTreeSet<&str> = a.iter().map(|s| s.as_str()).collect();
    if set.len() != a.len() {
        return Err(GpmeError::InvalidArgument(
            "Dirichlet subset has repeated nodes".into(),
        ));
    }

    let mut nodes = Vec::with_capacity(a.len());
    let mut edges = Vec::new();
    let mut b_dir = Vec::with_capacity(a.len());
    let mut kappa_parent = Vec::with_capacity(a.len());
    for (i, x) in a.iter().enumerate() {
        let mut inside = KahanSum::new();
        for (j, y) in a.iter().enumerate() {
            if i == j {
                continue;
            }
            let w = g.weight(x, y)?;
            if w > 0.0 {
                inside.add(w);
                if j > i {
                    edges.push((x.clone(), y.clone(), w));
                }
            }
        }
        // Cancellation can leave a tiny negative remainder; clamp it.
        let b = (g.total_weight_at(x)? - inside.value()).max(0.0);
        let kp = g.kappa_at(x)?;
        b_dir.push(b);
        kappa_parent.push(kp);
        nodes.push((x.clone(), g.mu_at(x)?, kp + b));
    }
    let graph = Graph::new(nodes, edges)?;
    Ok(DirichletSubgraph {
        graph,
        b_dir,
        kappa_parent,
    })
}

/// Node-count ceiling for [`exhaustion`] level enumeration. Families with
/// exponential ball growth (the binary tree doubles per level) outgrow
/// memory long before deep level caps are reached, so crossing the ceiling
/// reports `TruncationRequired` instead of exhausting the machine. Solvers
/// apply their own, tighter [`SolverOptions::node_budget`] first.
///
/// [`SolverOptions::node_budget`]: crate::resolvent::SolverOptions::node_budget
pub const EXHAUSTION_NODE_BUDGET: usize = 200_000;

/// Ascending exhaustion X₁ ⊂ X₂ ⊂ … ⊂ Xₙ of a lazy graph, starting from
/// its root.
///
/// For locally finite graphs the levels are balls: X_{k+1} is the radius-k
/// ball around the root. Otherwise each node of X_k contributes its first
/// not-yet-included neighbor (in the family's canonical order), which keeps
/// every level finite with |X_k| ≤ 2^k and still covers the root's
/// component in the limit. On finite graphs the levels stabilize at the
/// root's component.
///
/// # Errors
/// Propagates neighbor-query failures; reports a flag contradiction when a
/// graph asserted as locally finite answers an infinite neighbor list, and
/// a truncation requirement when a level outgrows
/// [`EXHAUSTION_NODE_BUDGET`].
pub fn exhaustion(g: &dyn LazyGraph, n: usize) -> Result<Vec<Vec<NodeId>>> {
    exhaustion_from(g, &[g.root()], n)
}

/// [`exhaustion`] with an explicit seed set as X₁ (deduplicated, order
/// preserved). The resolvent exhaustion seeds with the support of the data
/// so the levels cover it from the start.
///
/// # Errors
/// Empty seed set, unknown seed ids, and the failures of [`exhaustion`].
pub fn exhaustion_from(g: &dyn LazyGraph, seeds: &[NodeId], n: usize) -> Result<Vec<Vec<NodeId>>> {
    if n == 0 {
        return Err(GpmeError::InvalidArgument(
            "exhaustion needs at least one level".into(),
        ));
    }
    let (mut current, mut member) = seed_level(g, seeds)?;
    let mut levels = Vec::with_capacity(n);
    levels.push(current.clone());
    for _ in 1..n {
        let next = grow_exhaustion_level(g, &current, &mut member)?;
        if next.len() > EXHAUSTION_NODE_BUDGET {
            return Err(GpmeError::TruncationRequired(format!(
                "exhaustion level {} holds {} nodes, past the {EXHAUSTION_NODE_BUDGET} node \
                 ceiling; this family grows too fast to enumerate at that depth",
                levels.len() + 1,
                next.len(),
            )));
        }
        levels.push(next.clone());
        current = next;
    }
    Ok(levels)
}

/// Validates a seed set and returns it as the first exhaustion level
/// together with its membership set.
pub(crate) fn seed_level(
    g: &dyn LazyGraph,
    seeds: &[NodeId],
) -> Result<(Vec<NodeId>, BTreeSet<NodeId>)> {
    if seeds.is_empty() {
        return Err(GpmeError::InvalidArgument(
            "exhaustion needs at least one seed node".into(),
        ));
    }
    let mut current = Vec::new();
    let mut member: BTreeSet<NodeId> = BTreeSet::new();
    for s in seeds {
        if !g.contains(s) {
            return Err(GpmeError::UnknownNode(s.clone()));
        }
        if member.insert(s.clone()) {
            current.push(s.clone());
        }
    }
    Ok((current, member))
}

/// Grows one exhaustion level: ball growth on locally finite graphs,
/// first-missing-neighbor growth otherwise. `member` mirrors the returned
/// level's node set.
pub(crate) fn grow_exhaustion_level(
    g: &dyn LazyGraph,
    current: &[NodeId],
    member: &mut BTreeSet<NodeId>,
) -> Result<Vec<NodeId>> {
    let mut next = current.to_vec();
    if g.flags().locally_finite {
        // Ball growth: add all neighbors of the current level.
        for x in current {
            match g.neighbors(x)? {
                Neighbors::Finite(list) => {
                    for (y, _) in list {
                        if member.insert(y.clone()) {
                            next.push(y);
                        }
                    }
                }
                Neighbors::Infinite(_) => {
                    return Err(GpmeError::FlagContradiction {
                        hypothesis: "H1".into(),
                        detail: format!(
                            "graph asserted locally finite but node `{x}` has infinitely many neighbors"
                        ),
                    })
                }
            }
        }
    } else {
        // Forward-neighbor growth: each node adds its first neighbor not
        // yet included.
        for x in current {
            if let Some(y) = first_missing_neighbor(g, x, member)? {
                member.insert(y.clone());
                next.push(y);
            }
        }
    }
    Ok(next)
}

fn first_missing_neighbor(
    g: &dyn LazyGraph,
    x: &str,
    member: &BTreeSet<NodeId>,
) -> Result<Option<NodeId>> {
    match g.neighbors(x)? {
        Neighbors::Finite(list) => Ok(list
            .into_iter()
            .map(|(y, _)| y)
            .find(|y| !member.contains(y))),
        Neighbors::Infinite(it) => {
            // The iterator is infinite, so the first missing id is reached
            // after at most |member| hits.
            for (y, _) in it {
                if !member.contains(&y) {
                    return Ok(Some(y));
                }
            }
            unreachable!("infinite neighbor iterator ended")
        }
    }
}

/// Samples the symmetry invariant w(x,y) = w(y,x) over all pairs from a
/// finite node list.
///
/// # Errors
/// Reports a flag contradiction naming the offending pair.
pub fn check_symmetry_sampled(g: &dyn LazyGraph, nodes: &[NodeId]) -> Result<()> {
    for (i, x) in nodes.iter().enumerate() {
        for y in nodes.iter().skip(i + 1) {
            let wxy = g.weight(x, y)?;
            let wyx = g.weight(y, x)?;
            if wxy != wyx {
                return Err(GpmeError::FlagContradiction {
                    hypothesis: "A1".into(),
                    detail: format!("w({x},{y}) = {wxy} but w({y},{x}) = {wyx}"),
                });
            }
        }
    }
    Ok(())
}
