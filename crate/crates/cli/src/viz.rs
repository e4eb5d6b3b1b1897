//! PBM bitmaps, DOT graphs and adjacency lists.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ylg_core::ifg::InformationFlowGraph;
use ylg_core::AttentionMask;

/// Plain PBM (`P1`): one pixel per entry, attended entries black.
pub fn pbm(mask: &AttentionMask) -> String {
    let mut out = format!("P1\n{} {}\n", mask.n_key(), mask.n_query());
    for q in 0..mask.n_query() {
        out.extend(mask.row(q).iter().map(|&b| if b { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

/// `dir/name.ext` becomes `dir/name-step<i>.pbm`, counting from 1.
pub fn step_path(out: &Path, step: usize) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "mask".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}-step{}.pbm", step + 1))
}

fn node_id(layer: usize, node: usize) -> String {
    format!("l{layer}n{node}")
}

/// Nodes are grouped into one same-rank subgraph per layer.
pub fn dot(g: &InformationFlowGraph) -> String {
    let mut out = String::from("digraph ifg {\n  rankdir=TB;\n  node [shape=circle];\n");
    for (layer, &size) in g.layer_sizes().iter().enumerate() {
        let _ = writeln!(out, "  subgraph layer{layer} {{\n    rank=same;");
        for node in 0..size {
            let _ = writeln!(out, "    {} [label=\"{node}\"];", node_id(layer, node));
        }
        out.push_str("  }\n");
    }
    for step in 0..g.step_count() {
        for (u, v) in g.edges(step) {
            let _ = writeln!(out, "  {} -> {};", node_id(step, u), node_id(step + 1, v));
        }
    }
    out.push_str("}\n");
    out
}

/// One line per node: `layer:node -> successor successor ...`, successors in
/// the next layer.
pub fn adjacency(g: &InformationFlowGraph) -> String {
    let sizes: Vec<String> = g.layer_sizes().iter().map(usize::to_string).collect();
    let mut out = format!("# layers {}\n", sizes.join(" "));
    for step in 0..g.step_count() {
        for node in 0..g.layer_sizes()[step] {
            let _ = write!(out, "{step}:{node} ->");
            for v in g.successors(step, node) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
    }
    out
}
