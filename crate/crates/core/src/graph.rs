// SPDX-License-Identifier: Apache-2.0

//! RC tree to GNN graph conversion, node features, labels, normalization and
//! the JSONL dataset format.
//!
//! Every wire segment becomes an edge-node carrying its R and C. Pins (driver
//! and fanouts) stay as node-nodes, junctions are removed and their
//! neighbours wired together along the direction of current flow, and each
//! coupling capacitor becomes a virtual fanout-like node hanging off its
//! segment's edge-node.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rc::{derive_node_quantities, total_capacitance, NodeKind, RcNetwork};

pub const FEATURE_COUNT: usize = 11;

pub const FEATURE_ORDER: [&str; FEATURE_COUNT] =
    ["f_d", "f_f", "t_slew", "r_d", "c_p", "r_w", "c_w", "r_u", "c_d", "h_d", "c_total"];

pub mod col {
    pub const F_D: usize = 0;
    pub const F_F: usize = 1;
    pub const T_SLEW: usize = 2;
    pub const R_D: usize = 3;
    pub const C_P: usize = 4;
    pub const R_W: usize = 5;
    pub const C_W: usize = 6;
    pub const R_U: usize = 7;
    pub const C_D: usize = 8;
    pub const H_D: usize = 9;
    pub const C_TOTAL: usize = 10;
}

/// Columns that are never z-scored.
pub const UNSCALED: [usize; 3] = [col::F_D, col::F_F, col::H_D];

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph `{name}`: label {ceff:e} F is outside (0, {c_total:e}]")]
    OutOfRangeLabel { name: String, ceff: f64, c_total: f64 },
    #[error("graph `{0}` has no label")]
    MissingLabel(String),
    #[error("normalization needs at least one training graph")]
    EmptySplit,
    #[error("malformed graph record on line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Driver,
    Fanout,
    Edge,
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub name: String,
    pub c_total_f: f64,
    /// Pins on the net: the driver plus every fanout.
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnGraph {
    pub x: Vec<[f64; FEATURE_COUNT]>,
    pub edges: Vec<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub meta: GraphMeta,
}

impl GnnGraph {
    pub fn node_count(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Also store every edge reversed.
    #[serde(default)]
    pub bidirectional: bool,
}

/// Sizes observed while building one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildCounts {
    /// Node-nodes plus edge-nodes before junctions are removed.
    pub pre_trim: usize,
    pub post_trim: usize,
    pub fanouts: usize,
    pub virtuals: usize,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltGraph {
    pub graph: GnnGraph,
    pub kinds: Vec<RowKind>,
    pub counts: BuildCounts,
}

/// Untrimmed graph: RC node `i` is row `i`, segment `s` is row `n + s`.
struct Untrimmed {
    out: Vec<Vec<usize>>,
    alive: Vec<bool>,
}

fn untrimmed(net: &RcNetwork) -> Untrimmed {
    let topo = net.topology();
    let n = net.nodes().len();
    let mut out = vec![Vec::new(); n + net.segments().len()];
    for &u in topo.preorder() {
        for &(v, s) in topo.children(u) {
            out[u].push(n + s);
            out[n + s].push(v);
        }
    }
    Untrimmed { out, alive: vec![true; n + net.segments().len()] }
}

/// Removes junction rows, wiring each predecessor to every successor.
fn trim(g: &mut Untrimmed, net: &RcNetwork) {
    let topo = net.topology();
    let n = net.nodes().len();
    for &j in topo.preorder() {
        if net.nodes()[j].kind != NodeKind::Junction {
            continue;
        }
        let (_, up) = topo.parent(j).expect("junctions are below the driver");
        let succ = std::mem::take(&mut g.out[j]);
        let pred = &mut g.out[n + up];
        let at = pred.iter().position(|&x| x == j).expect("edge-node feeds its junction");
        pred.splice(at..=at, succ);
        g.alive[j] = false;
    }
}

pub fn to_gnn_graph(net: &RcNetwork, opts: GraphOptions) -> GnnGraph {
    build_graph(net, opts).graph
}

/// Full build with per-row kinds and the structural counts.
pub fn build_graph(net: &RcNetwork, opts: GraphOptions) -> BuiltGraph {
    let topo = net.topology();
    let n = net.nodes().len();
    let nseg = net.segments().len();
    let derived = derive_node_quantities(net);
    let c_total = total_capacitance(net);
    let driver = net.driver();

    let mut g = untrimmed(net);
    let pre_trim = g.alive.iter().filter(|&&a| a).count();
    trim(&mut g, net);

    // Coupling virtuals get untrimmed ids after every RC row.
    let mut virt_cap: Vec<f64> = Vec::new();
    let mut virt_seg: Vec<usize> = Vec::new();
    let seg_index = |id: usize| net.segments().iter().position(|s| s.id == id).expect("validated coupling");
    let mut per_seg: Vec<Vec<usize>> = vec![Vec::new(); nseg];
    for c in net.coupling() {
        let s = seg_index(c.segment);
        per_seg[s].push(n + nseg + virt_cap.len());
        virt_cap.push(c.capacitance);
        virt_seg.push(s);
    }
    for (s, vs) in per_seg.into_iter().enumerate() {
        if !vs.is_empty() {
            let mut o = vs;
            o.append(&mut g.out[n + s]);
            g.out[n + s] = o;
        }
    }
    g.out.resize(n + nseg + virt_cap.len(), Vec::new());

    // Canonical order: preorder DFS from the driver over the trimmed graph.
    let root = topo.root();
    let total = n + nseg + virt_cap.len();
    let mut row_of = vec![usize::MAX; total];
    let mut order = Vec::new();
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        row_of[u] = order.len();
        order.push(u);
        stack.extend(g.out[u].iter().rev().copied());
    }

    let mut edges: Vec<[u32; 2]> = Vec::new();
    for &u in &order {
        for &v in &g.out[u] {
            edges.push([row_of[u] as u32, row_of[v] as u32]);
        }
    }

    // Hop counts on the trimmed graph.
    let mut hops = vec![0usize; order.len()];
    let mut seen = vec![false; order.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut adj = vec![Vec::new(); order.len()];
    for e in &edges {
        adj[e[0] as usize].push(e[1] as usize);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                hops[v] = hops[u] + 1;
                queue.push_back(v);
            }
        }
    }

    let mut x = Vec::with_capacity(order.len());
    let mut kinds = Vec::with_capacity(order.len());
    for (row, &u) in order.iter().enumerate() {
        let mut f = [0.0; FEATURE_COUNT];
        f[col::T_SLEW] = driver.input_slew;
        f[col::R_D] = driver.drive_resistance;
        f[col::H_D] = hops[row] as f64;
        let kind = if u < n {
            let d = derived.by_index(u);
            f[col::R_U] = d.upstream_resistance;
            f[col::C_D] = d.downstream_capacitance;
            match net.nodes()[u].kind {
                NodeKind::Driver => {
                    f[col::F_D] = 1.0;
                    f[col::C_TOTAL] = c_total;
                    RowKind::Driver
                }
                NodeKind::Fanout => {
                    f[col::F_F] = 1.0;
                    f[col::C_P] = net.nodes()[u].pin_capacitance;
                    RowKind::Fanout
                }
                NodeKind::Junction => unreachable!("junction rows are trimmed"),
            }
        } else if u < n + nseg {
            let s = u - n;
            let seg = &net.segments()[s];
            let d = derived.by_index(topo.downstream_node(s));
            f[col::R_W] = seg.resistance;
            f[col::C_W] = seg.capacitance;
            f[col::R_U] = d.upstream_resistance;
            f[col::C_D] = d.downstream_capacitance + 0.5 * seg.capacitance;
            RowKind::Edge
        } else {
            let k = u - n - nseg;
            let d = derived.by_index(topo.downstream_node(virt_seg[k]));
            f[col::F_F] = 1.0;
            f[col::C_P] = virt_cap[k];
            f[col::R_U] = d.upstream_resistance;
            f[col::C_D] = virt_cap[k];
            RowKind::Virtual
        };
        x.push(f);
        kinds.push(kind);
    }

    if opts.bidirectional {
        let m = edges.len();
        for i in 0..m {
            let [a, b] = edges[i];
            edges.push([b, a]);
        }
    }

    let fanouts = net.fanout_count();
    let counts = BuildCounts { pre_trim, post_trim: x.len(), fanouts, virtuals: virt_cap.len(), segments: nseg };
    let meta = GraphMeta { name: net.name().to_string(), c_total_f: c_total, degree: fanouts + 1 };
    BuiltGraph { graph: GnnGraph { x, edges, y: None, meta }, kinds, counts }
}

/// Sets `y = ceff / c_total`.
pub fn attach_label(mut g: GnnGraph, ceff: f64) -> Result<GnnGraph, GraphError> {
    let ct = g.meta.c_total_f;
    if !(ceff > 0.0 && ceff <= ct * (1.0 + 1e-12)) {
        return Err(GraphError::OutOfRangeLabel { name: g.meta.name.clone(), ceff, c_total: ct });
    }
    g.y = Some((ceff / ct).min(1.0));
    Ok(g)
}

// ---------------------------------------------------------------------------
// Normalization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_order: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `false` for flag/count columns and constant columns.
    pub scaled: Vec<bool>,
}

impl NormStats {
    /// Stats that leave every column unchanged.
    pub fn identity() -> Self {
        Self {
            feature_order: FEATURE_ORDER.iter().map(|s| s.to_string()).collect(),
            mean: vec![0.0; FEATURE_COUNT],
            std: vec![1.0; FEATURE_COUNT],
            scaled: vec![false; FEATURE_COUNT],
        }
    }

    pub fn apply_row(&self, row: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = *row;
        for c in 0..FEATURE_COUNT {
            if self.scaled[c] {
                out[c] = (row[c] - self.mean[c]) / self.std[c];
            }
        }
        out
    }

    pub fn has_standard_order(&self) -> bool {
        self.feature_order.len() == FEATURE_COUNT && self.feature_order.iter().zip(FEATURE_ORDER).all(|(a, b)| a == b)
    }
}

/// Streaming per-column mean and population variance (Welford).
#[derive(Debug, Clone, Default)]
pub struct NormAccumulator {
    count: u64,
    mean: [f64; FEATURE_COUNT],
    m2: [f64; FEATURE_COUNT],
}

impl NormAccumulator {
    pub fn add_graph(&mut self, g: &GnnGraph) {
        for row in &g.x {
            self.count += 1;
            let n = self.count as f64;
            for c in 0..FEATURE_COUNT {
                let d = row[c] - self.mean[c];
                self.mean[c] += d / n;
                self.m2[c] += d * (row[c] - self.mean[c]);
            }
        }
    }

    pub fn finish(&self) -> Result<NormStats, GraphError> {
        if self.count == 0 {
            return Err(GraphError::EmptySplit);
        }
        let n = self.count as f64;
        let mut stats = NormStats::identity();
        for c in 0..FEATURE_COUNT {
            let std = (self.m2[c] / n).max(0.0).sqrt();
            stats.mean[c] = self.mean[c];
            let constant = std <= 1e-12 * self.mean[c].abs() || std == 0.0;
            if UNSCALED.contains(&c) || constant {
                stats.std[c] = if std > 0.0 { std } else { 1.0 };
                stats.scaled[c] = false;
            } else {
                stats.std[c] = std;
                stats.scaled[c] = true;
            }
        }
        Ok(stats)
    }
}

pub fn fit_norm_stats<'a>(train: impl IntoIterator<Item = &'a GnnGraph>) -> Result<NormStats, GraphError> {
    let mut acc = NormAccumulator::default();
    for g in train {
        acc.add_graph(g);
    }
    acc.finish()
}

pub fn apply_norm(g: &GnnGraph, stats: &NormStats) -> GnnGraph {
    GnnGraph { x: g.x.iter().map(|r| stats.apply_row(r)).collect(), ..g.clone() }
}

// ---------------------------------------------------------------------------
// JSONL

pub fn write_graph<W: Write>(w: &mut W, g: &GnnGraph) -> Result<(), GraphError> {
    serde_json::to_writer(&mut *w, g).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn parse_graph_line(line: &str, line_no: usize) -> Result<GnnGraph, GraphError> {
    let g: GnnGraph =
        serde_json::from_str(line).map_err(|e| GraphError::Malformed { line: line_no, reason: e.to_string() })?;
    let n = g.x.len() as u32;
    if n == 0 {
        return Err(GraphError::Malformed { line: line_no, reason: "graph has no nodes".into() });
    }
    if let Some(e) = g.edges.iter().find(|e| e[0] >= n || e[1] >= n) {
        return Err(GraphError::Malformed { line: line_no, reason: format!("edge {e:?} out of range") });
    }
    Ok(g)
}

/// Reads one graph per non-empty line.
pub fn read_graphs<R: BufRead>(r: R) -> impl Iterator<Item = Result<GnnGraph, GraphError>> {
    r.lines().enumerate().filter_map(|(i, l)| match l {
        Err(e) => Some(Err(GraphError::Io(e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(parse_graph_line(&l, i + 1)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: u64,
    pub test: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNames {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Describes an exported train/test pair of graph files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub feature_order: Vec<String>,
    pub counts: SplitCounts,
    pub split: SplitNames,
    pub norm_stats: NormStats,
    pub bidirectional: bool,
}

/// Writes labeled graphs to the train or test sink by name and returns the
/// manifest body (stats fitted on the train graphs only).
pub fn export_dataset<W1: Write, W2: Write>(
    graphs: impl IntoIterator<Item = (GnnGraph, bool)>,
    train_out: &mut W1,
    test_out: &mut W2,
) -> Result<(SplitNames, NormStats), GraphError> {
    let mut acc = NormAccumulator::default();
    let mut names = SplitNames { train: Vec::new(), test: Vec::new() };
    for (g, is_train) in graphs {
        if g.y.is_none() {
            return Err(GraphError::MissingLabel(g.meta.name.clone()));
        }
        if is_train {
            acc.add_graph(&g);
            write_graph(train_out, &g)?;
            names.train.push(g.meta.name.clone());
        } else {
            write_graph(test_out, &g)?;
            names.test.push(g.meta.name.clone());
        }
    }
    Ok((names, acc.finish()?))
}
