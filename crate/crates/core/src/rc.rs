// SPDX-License-Identifier: Apache-2.0

//! RC interconnect trees.
//!
//! An [`RcNetwork`] is an extracted, unreduced net: one driver pin, fanout
//! pins at the leaves, junction nodes in between and one wire segment per
//! tree edge. Networks are validated on construction and immutable afterwards,
//! so every derived quantity can be computed from the cached [`Topology`].
//!
//! Segment capacitance is split half to each endpoint (π-segment). Coupling
//! capacitance is treated as grounded load on the downstream endpoint of the
//! segment it belongs to.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RcError {
    #[error("malformed net document: {0}")]
    MalformedDocument(String),
    #[error("net `{name}` is not a tree rooted at the driver: {reason}")]
    NonTreeTopology { name: String, reason: String },
    #[error("net `{0}` has no driver node")]
    NoDriver(String),
    #[error("net `{0}` has more than one driver node")]
    MultipleDrivers(String),
    #[error("net `{name}`: {what} must be finite and non-negative, got {value}")]
    NegativeElement { name: String, what: String, value: f64 },
    #[error("net `{name}`: invalid driver parameters: {reason}")]
    InvalidDriver { name: String, reason: String },
    #[error("net `{name}`: {reason}")]
    InvalidNode { name: String, reason: String },
    #[error("net `{name}` references unknown {what} {id}")]
    UnknownReference { name: String, what: &'static str, id: usize },
    #[error("net `{name}` repeats {what} id {id}")]
    DuplicateId { name: String, what: &'static str, id: usize },
    #[error("net `{0}` has zero total capacitance")]
    ZeroCapacitance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Driver,
    Fanout,
    Junction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcNode {
    pub id: usize,
    pub kind: NodeKind,
    /// Farads. Zero for the driver and junctions.
    pub pin_capacitance: f64,
    /// Nanometers.
    pub position: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireSegment {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    /// Ohms.
    pub resistance: f64,
    /// Farads.
    pub capacitance: f64,
    pub layer: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub segment: usize,
    pub capacitance: f64,
}

/// Thevenin driver: a saturated ramp behind a fixed resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverParams {
    #[serde(rename = "rd_ohm")]
    pub drive_resistance: f64,
    /// Input transition time between the low and high thresholds, seconds.
    #[serde(rename = "slew_s")]
    pub input_slew: f64,
    #[serde(rename = "vdd_v")]
    pub vdd: f64,
    #[serde(rename = "vlo")]
    pub v_low_frac: f64,
    #[serde(rename = "vhi")]
    pub v_high_frac: f64,
}

impl DriverParams {
    pub const DEFAULT_V_LOW: f64 = 0.2;
    pub const DEFAULT_V_HIGH: f64 = 0.8;

    pub fn new(drive_resistance: f64, input_slew: f64, vdd: f64) -> Self {
        Self {
            drive_resistance,
            input_slew,
            vdd,
            v_low_frac: Self::DEFAULT_V_LOW,
            v_high_frac: Self::DEFAULT_V_HIGH,
        }
    }

    /// Full 0-to-vdd duration of the source ramp whose threshold-to-threshold
    /// time equals `input_slew`.
    pub fn ramp_time(&self) -> f64 {
        self.input_slew / (self.v_high_frac - self.v_low_frac)
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.drive_resistance) {
            return Err(format!("drive resistance {} must be > 0", self.drive_resistance));
        }
        if !finite_pos(self.input_slew) {
            return Err(format!("input slew {} must be > 0", self.input_slew));
        }
        if !finite_pos(self.vdd) {
            return Err(format!("vdd {} must be > 0", self.vdd));
        }
        let (lo, hi) = (self.v_low_frac, self.v_high_frac);
        if !(lo > 0.0 && lo < 0.5 && hi > 0.5 && hi < 1.0) {
            return Err(format!("thresholds must satisfy 0 < vlo < 0.5 < vhi < 1, got {lo}/{hi}"));
        }
        Ok(())
    }
}

/// Rooted view of a validated network. Indices refer to positions in
/// [`RcNetwork::nodes`] and [`RcNetwork::segments`].
#[derive(Debug, Clone)]
pub struct Topology {
    root: usize,
    node_index: HashMap<usize, usize>,
    parent: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<(usize, usize)>>,
    preorder: Vec<usize>,
    depth: Vec<usize>,
    seg_downstream: Vec<usize>,
    seg_coupling: Vec<f64>,
}

impl Topology {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn index_of(&self, node_id: usize) -> Option<usize> {
        self.node_index.get(&node_id).copied()
    }

    /// `(parent node, connecting segment)`; `None` for the driver.
    pub fn parent(&self, node: usize) -> Option<(usize, usize)> {
        self.parent[node]
    }

    /// `(child node, connecting segment)` pairs ordered by child id.
    pub fn children(&self, node: usize) -> &[(usize, usize)] {
        &self.children[node]
    }

    /// Driver first; children visited in id order.
    pub fn preorder(&self) -> &[usize] {
        &self.preorder
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn downstream_node(&self, segment: usize) -> usize {
        self.seg_downstream[segment]
    }

    /// Sum of coupling capacitance attached to `segment`.
    pub fn segment_coupling(&self, segment: usize) -> f64 {
        self.seg_coupling[segment]
    }
}

#[derive(Debug, Clone)]
pub struct RcNetwork {
    name: String,
    driver: DriverParams,
    nodes: Vec<RcNode>,
    segments: Vec<WireSegment>,
    coupling: Vec<Coupling>,
    topo: Topology,
}

impl PartialEq for RcNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.driver == other.driver
            && self.nodes == other.nodes
            && self.segments == other.segments
            && self.coupling == other.coupling
    }
}

impl RcNetwork {
    pub fn new(
        name: impl Into<String>,
        driver: DriverParams,
        nodes: Vec<RcNode>,
        segments: Vec<WireSegment>,
        coupling: Vec<Coupling>,
    ) -> Result<Self, RcError> {
        let name = name.into();
        let topo = validate(&name, &driver, &nodes, &segments, &coupling)?;
        Ok(Self { name, driver, nodes, segments, coupling, topo })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn driver(&self) -> &DriverParams {
        &self.driver
    }

    pub fn nodes(&self) -> &[RcNode] {
        &self.nodes
    }

    pub fn segments(&self) -> &[WireSegment] {
        &self.segments
    }

    pub fn coupling(&self) -> &[Coupling] {
        &self.coupling
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn fanout_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Fanout).count()
    }

    pub fn with_driver(&self, driver: DriverParams) -> Result<Self, RcError> {
        driver
            .validate()
            .map_err(|reason| RcError::InvalidDriver { name: self.name.clone(), reason })?;
        Ok(Self { driver, ..self.clone() })
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        Self { name: name.into(), ..self.clone() }
    }

    /// Renumbers nodes densely in driver-first preorder (children by original
    /// id), orients every segment parent to child and gives the segment into
    /// node `k` the id `k - 1`.
    pub fn canonicalize(&self) -> Self {
        let order = self.topo.preorder();
        let mut new_id = vec![0usize; self.nodes.len()];
        for (k, &node) in order.iter().enumerate() {
            new_id[node] = k;
        }
        let nodes: Vec<RcNode> = order
            .iter()
            .enumerate()
            .map(|(k, &node)| RcNode { id: k, ..self.nodes[node].clone() })
            .collect();
        let mut seg_new_id = vec![0usize; self.segments.len()];
        let mut segments = Vec::with_capacity(self.segments.len());
        for &node in &order[1..] {
            let (parent, seg) = self.topo.parent(node).expect("non-root has a parent");
            let s = &self.segments[seg];
            seg_new_id[seg] = new_id[node] - 1;
            segments.push(WireSegment {
                id: new_id[node] - 1,
                from: new_id[parent],
                to: new_id[node],
                resistance: s.resistance,
                capacitance: s.capacitance,
                layer: s.layer.clone(),
            });
        }
        let seg_index: HashMap<usize, usize> =
            self.segments.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        let mut coupling: Vec<Coupling> = self
            .coupling
            .iter()
            .map(|c| Coupling { segment: seg_new_id[seg_index[&c.segment]], ..*c })
            .collect();
        coupling.sort_by_key(|c| c.segment);
        Self::new(self.name.clone(), self.driver, nodes, segments, coupling)
            .expect("canonical form of a valid network is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&NetDocument::from(self)).expect("net documents always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&NetDocument::from(self)).expect("net documents always serialize")
    }
}

impl Serialize for RcNetwork {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        NetDocument::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RcNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = NetDocument::deserialize(deserializer)?;
        RcNetwork::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Parses and validates one JSON net document.
pub fn parse_network(text: &str) -> Result<RcNetwork, RcError> {
    let doc: NetDocument =
        serde_json::from_str(text).map_err(|e| RcError::MalformedDocument(e.to_string()))?;
    RcNetwork::try_from(doc)
}

/// Parses a JSONL corpus, skipping blank lines. Errors carry the line number.
pub fn parse_corpus(text: &str) -> Result<Vec<RcNetwork>, RcError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_network(l).map_err(|e| match e {
                RcError::MalformedDocument(m) => RcError::MalformedDocument(format!("line {}: {m}", i + 1)),
                other => other,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Wire format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetDocument {
    name: String,
    driver: DriverParams,
    nodes: Vec<NodeDocument>,
    segments: Vec<SegmentDocument>,
    #[serde(default)]
    coupling: Vec<CouplingDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDocument {
    id: usize,
    kind: NodeKind,
    #[serde(default)]
    cp_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_nm: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDocument {
    id: usize,
    from: usize,
    to: usize,
    r_ohm: f64,
    c_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layer: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingDocument {
    seg: usize,
    c_f: f64,
}

impl From<&RcNetwork> for NetDocument {
    fn from(net: &RcNetwork) -> Self {
        NetDocument {
            name: net.name.clone(),
            driver: net.driver,
            nodes: net
                .nodes
                .iter()
                .map(|n| NodeDocument {
                    id: n.id,
                    kind: n.kind,
                    cp_f: n.pin_capacitance,
                    x_nm: n.position.map(|p| p.0),
                    y_nm: n.position.map(|p| p.1),
                })
                .collect(),
            segments: net
                .segments
                .iter()
                .map(|s| SegmentDocument {
                    id: s.id,
                    from: s.from,
                    to: s.to,
                    r_ohm: s.resistance,
                    c_f: s.capacitance,
                    layer: s.layer.clone(),
                })
                .collect(),
            coupling: net.coupling.iter().map(|c| CouplingDocument { seg: c.segment, c_f: c.capacitance }).collect(),
        }
    }
}

impl TryFrom<NetDocument> for RcNetwork {
    type Error = RcError;

    fn try_from(doc: NetDocument) -> Result<Self, RcError> {
        let mut nodes = Vec::with_capacity(doc.nodes.len());
        for n in doc.nodes {
            let position = match (n.x_nm, n.y_nm) {
                (Some(x), Some(y)) => Some((x, y)),
                (None, None) => None,
                _ => {
                    return Err(RcError::MalformedDocument(format!(
                        "node {} has only one of x_nm/y_nm",
                        n.id
                    )))
                }
            };
            nodes.push(RcNode { id: n.id, kind: n.kind, pin_capacitance: n.cp_f, position });
        }
        let segments = doc
            .segments
            .into_iter()
            .map(|s| WireSegment {
                id: s.id,
                from: s.from,
                to: s.to,
                resistance: s.r_ohm,
                capacitance: s.c_f,
                layer: s.layer,
            })
            .collect();
        let coupling = doc.coupling.into_iter().map(|c| Coupling { segment: c.seg, capacitance: c.c_f }).collect();
        RcNetwork::new(doc.name, doc.driver, nodes, segments, coupling)
    }
}

// ---------------------------------------------------------------------------
// Validation

fn check_element(name: &str, what: impl FnOnce() -> String, value: f64) -> Result<(), RcError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(RcError::NegativeElement { name: name.to_string(), what: what(), value })
    }
}

fn validate(
    name: &str,
    driver: &DriverParams,
    nodes: &[RcNode],
    segments: &[WireSegment],
    coupling: &[Coupling],
) -> Result<Topology, RcError> {
    let owned = || name.to_string();
    driver.validate().map_err(|reason| RcError::InvalidDriver { name: owned(), reason })?;

    let mut node_index = HashMap::with_capacity(nodes.len());
    let mut root = None;
    for (i, n) in nodes.iter().enumerate() {
        if node_index.insert(n.id, i).is_some() {
            return Err(RcError::DuplicateId { name: owned(), what: "node", id: n.id });
        }
        check_element(name, || format!("pin capacitance of node {}", n.id), n.pin_capacitance)?;
        if let Some((x, y)) = n.position {
            if !(x.is_finite() && y.is_finite()) {
                return Err(RcError::InvalidNode { name: owned(), reason: format!("node {} has a non-finite position", n.id) });
            }
        }
        match n.kind {
            NodeKind::Driver => {
                if root.replace(i).is_some() {
                    return Err(RcError::MultipleDrivers(owned()));
                }
            }
            NodeKind::Junction | NodeKind::Fanout => {}
        }
        if n.kind != NodeKind::Fanout && n.pin_capacitance != 0.0 {
            return Err(RcError::InvalidNode {
                name: owned(),
                reason: format!("{:?} node {} must have zero pin capacitance", n.kind, n.id),
            });
        }
    }
    let root = root.ok_or_else(|| RcError::NoDriver(owned()))?;

    let mut seg_ids = HashMap::with_capacity(segments.len());
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    for (si, s) in segments.iter().enumerate() {
        if seg_ids.insert(s.id, si).is_some() {
            return Err(RcError::DuplicateId { name: owned(), what: "segment", id: s.id });
        }
        check_element(name, || format!("resistance of segment {}", s.id), s.resistance)?;
        check_element(name, || format!("capacitance of segment {}", s.id), s.capacitance)?;
        let a = *node_index
            .get(&s.from)
            .ok_or(RcError::UnknownReference { name: owned(), what: "node", id: s.from })?;
        let b = *node_index
            .get(&s.to)
            .ok_or(RcError::UnknownReference { name: owned(), what: "node", id: s.to })?;
        if a == b {
            return Err(RcError::NonTreeTopology { name: owned(), reason: format!("segment {} is a self-loop", s.id) });
        }
        adjacency[a].push((b, si));
        adjacency[b].push((a, si));
    }
    if segments.len() + 1 != nodes.len() {
        return Err(RcError::NonTreeTopology {
            name: owned(),
            reason: format!("{} nodes but {} segments", nodes.len(), segments.len()),
        });
    }

    // BFS from the driver orients the tree and detects cycles/disconnection.
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nodes.len()];
    let mut visited = vec![false; nodes.len()];
    let mut depth = vec![0usize; nodes.len()];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes.len()];
    let mut seg_downstream = vec![usize::MAX; segments.len()];
    let mut queue = VecDeque::from([root]);
    visited[root] = true;
    while let Some(u) = queue.pop_front() {
        for &(v, si) in &adjacency[u] {
            if parent[u].map(|(_, ps)| ps) == Some(si) {
                continue;
            }
            if visited[v] {
                return Err(RcError::NonTreeTopology {
                    name: owned(),
                    reason: format!("segment {} closes a loop", segments[si].id),
                });
            }
            visited[v] = true;
            parent[v] = Some((u, si));
            depth[v] = depth[u] + 1;
            children[u].push((v, si));
            seg_downstream[si] = v;
            queue.push_back(v);
        }
    }
    if let Some(i) = visited.iter().position(|v| !v) {
        return Err(RcError::NonTreeTopology {
            name: owned(),
            reason: format!("node {} is not connected to the driver", nodes[i].id),
        });
    }
    for c in children.iter_mut() {
        c.sort_by_key(|&(v, _)| nodes[v].id);
    }
    for (i, n) in nodes.iter().enumerate() {
        if n.kind == NodeKind::Fanout && !children[i].is_empty() {
            return Err(RcError::InvalidNode { name: owned(), reason: format!("fanout node {} is not a leaf", n.id) });
        }
    }

    let mut preorder = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        preorder.push(u);
        stack.extend(children[u].iter().rev().map(|&(v, _)| v));
    }

    let mut seg_coupling = vec![0.0; segments.len()];
    let mut sorted: Vec<&Coupling> = coupling.iter().collect();
    sorted.sort_by(|a, b| a.segment.cmp(&b.segment).then(a.capacitance.total_cmp(&b.capacitance)));
    for c in sorted {
        let si = *seg_ids
            .get(&c.segment)
            .ok_or(RcError::UnknownReference { name: owned(), what: "segment", id: c.segment })?;
        check_element(name, || format!("coupling capacitance on segment {}", c.segment), c.capacitance)?;
        seg_coupling[si] += c.capacitance;
    }

    let topo = Topology { root, node_index, parent, children, preorder, depth, seg_downstream, seg_coupling };
    let total: f64 = nodes.iter().map(|n| n.pin_capacitance).sum::<f64>()
        + segments.iter().map(|s| s.capacitance).sum::<f64>()
        + coupling.iter().map(|c| c.capacitance).sum::<f64>();
    if total <= 0.0 {
        return Err(RcError::ZeroCapacitance(owned()));
    }
    Ok(topo)
}

// ---------------------------------------------------------------------------
// Derived quantities

/// Σ wire capacitance + Σ pin capacitance + Σ coupling capacitance.
/// Summed in sorted order so the result does not depend on record order.
pub fn total_capacitance(net: &RcNetwork) -> f64 {
    let mut caps: Vec<f64> = (net.segments.iter().map(|s| s.capacitance))
        .chain(net.nodes.iter().map(|n| n.pin_capacitance))
        .chain(net.coupling.iter().map(|c| c.capacitance))
        .collect();
    caps.sort_by(f64::total_cmp);
    caps.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeDerived {
    /// Sum of segment resistance on the driver-to-node path (excludes R_d).
    pub upstream_resistance: f64,
    /// Ground capacitance of the node's subtree, itself included.
    pub downstream_capacitance: f64,
    pub hops_from_driver: usize,
    /// Pin cap + half of every incident segment + coupling on the upstream segment.
    pub node_ground_cap: f64,
}

/// Per-node quantities, indexed like [`RcNetwork::nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedQuantities {
    values: Vec<NodeDerived>,
    ids: Vec<usize>,
}

impl DerivedQuantities {
    pub fn by_index(&self, node: usize) -> &NodeDerived {
        &self.values[node]
    }

    pub fn by_id(&self, id: usize) -> Option<&NodeDerived> {
        self.ids.iter().position(|&i| i == id).map(|k| &self.values[k])
    }

    pub fn as_slice(&self) -> &[NodeDerived] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &NodeDerived)> {
        self.ids.iter().copied().zip(self.values.iter())
    }
}

/// Grounded capacitance lumped at each node under the half/half segment split.
pub fn node_ground_caps(net: &RcNetwork) -> Vec<f64> {
    let topo = &net.topo;
    let mut cap: Vec<f64> = net.nodes.iter().map(|n| n.pin_capacitance).collect();
    // Preorder keeps the summation order independent of record order.
    for &down in &topo.preorder()[1..] {
        let (up, si) = topo.parent(down).expect("segment endpoint below the root");
        let half = 0.5 * net.segments[si].capacitance;
        cap[up] += half;
        cap[down] += half + topo.segment_coupling(si);
    }
    cap
}

pub fn derive_node_quantities(net: &RcNetwork) -> DerivedQuantities {
    let topo = &net.topo;
    let ground = node_ground_caps(net);
    let n = net.nodes.len();
    let mut ru = vec![0.0; n];
    for &v in &topo.preorder()[1..] {
        let (p, s) = topo.parent(v).unwrap();
        ru[v] = ru[p] + net.segments[s].resistance;
    }
    let mut cd = ground.clone();
    for &v in topo.preorder()[1..].iter().rev() {
        let (p, _) = topo.parent(v).unwrap();
        cd[p] += cd[v];
    }
    let values = (0..n)
        .map(|i| NodeDerived {
            upstream_resistance: ru[i],
            downstream_capacitance: cd[i],
            hops_from_driver: topo.depth(i),
            node_ground_cap: ground[i],
        })
        .collect();
    DerivedQuantities { values, ids: net.nodes.iter().map(|n| n.id).collect() }
}

/// Elmore delay from the driver source to every node, including the drive
/// resistance; indexed like [`RcNetwork::nodes`].
pub fn elmore_delay(net: &RcNetwork) -> Vec<f64> {
    let topo = &net.topo;
    let derived = derive_node_quantities(net);
    let mut delay = vec![0.0; net.nodes.len()];
    let root = topo.root();
    delay[root] = net.driver.drive_resistance * derived.by_index(root).downstream_capacitance;
    for &v in &topo.preorder()[1..] {
        let (p, s) = topo.parent(v).unwrap();
        delay[v] = delay[p] + net.segments[s].resistance * derived.by_index(v).downstream_capacitance;
    }
    delay
}
