//! Information flow graphs of multi-step attention.
//!
//! Layer `i` holds one node per token entering step `i`. Step `i` adds an
//! edge `u → v` from layer `i` to layer `i + 1` whenever output `v` attends
//! input `u`, so a directed path from an input token to an output token
//! exists exactly when the output can depend on that input.

use std::collections::VecDeque;

use crate::error::{invalid, Result};
use crate::mask::AttentionMask;
use crate::patterns::PatternFactorization;

/// Layered DAG with edges only between consecutive layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InformationFlowGraph {
    layer_sizes: Vec<usize>,
    // successors[i][u] = targets in layer i + 1 of node u in layer i, ascending
    successors: Vec<Vec<Vec<usize>>>,
}

/// Outcome of the full-information check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullInformation {
    pub holds: bool,
    /// Lexicographically smallest `(source, target)` with no path.
    pub witness: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeStats {
    pub edges_per_step: Vec<usize>,
    pub total_edges: usize,
    /// Edges over possible edges; `total / (p·n²)` for square steps.
    pub density: f64,
}

impl InformationFlowGraph {
    /// Graph whose step `i` is `masks[i]`, read as `|V^{i+1}| × |V^i|`.
    pub fn from_masks(masks: &[AttentionMask]) -> Result<Self> {
        let Some(first) = masks.first() else {
            return invalid("an information flow graph needs at least one step");
        };
        let mut layer_sizes = vec![first.n_key()];
        let mut successors = Vec::with_capacity(masks.len());
        for (i, m) in masks.iter().enumerate() {
            let inputs = *layer_sizes.last().expect("non-empty");
            if m.n_key() != inputs {
                return invalid(format!(
                    "step {i} reads {} tokens but the previous layer has {inputs}",
                    m.n_key()
                ));
            }
            let mut succ = vec![Vec::new(); inputs];
            for v in 0..m.n_query() {
                for u in m.attended(v) {
                    succ[u].push(v);
                }
            }
            successors.push(succ);
            layer_sizes.push(m.n_query());
        }
        Ok(Self {
            layer_sizes,
            successors,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn step_count(&self) -> usize {
        self.successors.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn node_count(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    /// Successors in layer `layer + 1` of node `node` in layer `layer`.
    pub fn successors(&self, layer: usize, node: usize) -> &[usize] {
        &self.successors[layer][node]
    }

    /// All edges of step `step` as `(u, v)` pairs, sorted.
    pub fn edges(&self, step: usize) -> Vec<(usize, usize)> {
        self.successors[step]
            .iter()
            .enumerate()
            .flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
            .collect()
    }

    /// Output-layer nodes reachable from input node `source`.
    pub fn reachable_from(&self, source: usize) -> Vec<bool> {
        let mut frontier = vec![false; self.layer_sizes[0]];
        frontier[source] = true;
        for (step, succ) in self.successors.iter().enumerate() {
            let mut next = vec![false; self.layer_sizes[step + 1]];
            for (u, vs) in succ.iter().enumerate() {
                if frontier[u] {
                    for &v in vs {
                        next[v] = true;
                    }
                }
            }
            frontier = next;
        }
        frontier
    }

    /// `reach[source][target]` for every input/output pair.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        (0..self.layer_sizes[0])
            .map(|s| self.reachable_from(s))
            .collect()
    }

    /// Every `(source, target)` pair without a path, in lexicographic order.
    pub fn unreachable_pairs(&self) -> Vec<(usize, usize)> {
        self.reachability()
            .iter()
            .enumerate()
            .flat_map(|(s, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &r)| !r)
                    .map(move |(t, _)| (s, t))
            })
            .collect()
    }
}

/// Graph of a square factorization: `p + 1` layers of `n` nodes.
pub fn build_ifg(f: &PatternFactorization) -> Result<InformationFlowGraph> {
    if f.steps()
        .iter()
        .any(|m| !m.is_square() || m.n_query() != f.n())
    {
        return invalid("information flow graphs need square steps of equal size");
    }
    InformationFlowGraph::from_masks(f.steps())
}

/// Checks that every input node reaches every output node.
pub fn full_information(g: &InformationFlowGraph) -> FullInformation {
    for source in 0..g.layer_sizes[0] {
        let reach = g.reachable_from(source);
        if let Some(target) = reach.iter().position(|&r| !r) {
            return FullInformation {
                holds: false,
                witness: Some((source, target)),
            };
        }
    }
    FullInformation {
        holds: true,
        witness: None,
    }
}

/// `n` inputs feeding one hub that feeds `n` outputs.
pub fn star_topology(n: usize) -> Result<InformationFlowGraph> {
    if n == 0 {
        return invalid("star topology needs at least one token");
    }
    InformationFlowGraph::from_masks(&[AttentionMask::dense(1, n), AttentionMask::dense(n, 1)])
}

pub fn edge_stats(g: &InformationFlowGraph) -> EdgeStats {
    let edges_per_step: Vec<usize> = g
        .successors
        .iter()
        .map(|succ| succ.iter().map(Vec::len).sum())
        .collect();
    let total_edges = edges_per_step.iter().sum();
    let possible: usize = g.layer_sizes.windows(2).map(|w| w[0] * w[1]).sum();
    EdgeStats {
        edges_per_step,
        total_edges,
        density: total_edges as f64 / possible as f64,
    }
}

/// Maximum number of token-disjoint paths from two inputs to two outputs.
///
/// Every edge and every node carries one unit, so the value is 0, 1 or 2;
/// 2 means the two sources can be routed to the two targets at once.
pub fn pair_flow(
    g: &InformationFlowGraph,
    sources: (usize, usize),
    targets: (usize, usize),
) -> Result<usize> {
    let inputs = g.layer_sizes[0];
    let outputs = *g.layer_sizes.last().expect("non-empty");
    if sources.0 >= inputs || sources.1 >= inputs {
        return invalid(format!("source out of range (layer has {inputs} nodes)"));
    }
    if targets.0 >= outputs || targets.1 >= outputs {
        return invalid(format!("target out of range (layer has {outputs} nodes)"));
    }
    if sources.0 == sources.1 || targets.0 == targets.1 {
        return invalid("sources and targets must be distinct pairs");
    }

    // node (layer, idx) splits into in = 2·id and out = 2·id + 1
    let mut offsets = Vec::with_capacity(g.layer_count());
    let mut acc = 0;
    for &size in &g.layer_sizes {
        offsets.push(acc);
        acc += size;
    }
    let id = |layer: usize, idx: usize| offsets[layer] + idx;
    let super_source = 2 * acc;
    let super_sink = super_source + 1;
    let mut net = UnitNetwork::new(super_sink + 1);
    for (layer, &size) in g.layer_sizes.iter().enumerate() {
        for idx in 0..size {
            let x = id(layer, idx);
            net.add_edge(2 * x, 2 * x + 1);
        }
    }
    for (step, succ) in g.successors.iter().enumerate() {
        for (u, vs) in succ.iter().enumerate() {
            for &v in vs {
                net.add_edge(2 * id(step, u) + 1, 2 * id(step + 1, v));
            }
        }
    }
    let last = g.layer_count() - 1;
    for s in [sources.0, sources.1] {
        net.add_edge(super_source, 2 * id(0, s));
    }
    for t in [targets.0, targets.1] {
        net.add_edge(2 * id(last, t) + 1, super_sink);
    }
    Ok(net.max_flow(super_source, super_sink))
}

/// Residual network with unit capacities, solved by BFS augmentation.
struct UnitNetwork {
    // (to, residual capacity, index of reverse edge)
    adj: Vec<Vec<(usize, u8, usize)>>,
}

impl UnitNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push((to, 1, rev_from));
        self.adj[to].push((from, 0, rev_to));
    }

    fn max_flow(&mut self, source: usize, sink: usize) -> usize {
        let mut flow = 0;
        loop {
            let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            while let Some(x) = queue.pop_front() {
                if x == sink {
                    break;
                }
                for (ei, &(to, cap, _)) in self.adj[x].iter().enumerate() {
                    if cap > 0 && !seen[to] {
                        seen[to] = true;
                        parent[to] = Some((x, ei));
                        queue.push_back(to);
                    }
                }
            }
            if !seen[sink] {
                return flow;
            }
            let mut x = sink;
            while let Some((prev, ei)) = parent[x] {
                let rev = self.adj[prev][ei].2;
                self.adj[prev][ei].1 -= 1;
                self.adj[x][rev].1 += 1;
                x = prev;
            }
            flow += 1;
        }
    }
}
