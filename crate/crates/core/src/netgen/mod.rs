// SPDX-License-Identifier: Apache-2.0

//! Synthetic net generation: random terminals, a rectilinear Steiner route,
//! layer-based RC values and sampled driver/pin parameters.
//!
//! Every net is produced from its own RNG stream keyed by
//! `(seed, degree, index)`, so any subset can be generated in any order or in
//! parallel and still match a serial run.

pub mod steiner;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rc::{Coupling, DriverParams, NodeKind, RcNetwork, RcNode, WireSegment};
pub use steiner::{build_rsmt, manhattan, rectilinear_mst, Point, SteinerTree};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid technology profile: {0}")]
    InvalidTech(String),
    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerGroup {
    Lower,
    Middle,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub name: String,
    pub r_per_nm: f64,
    pub c_per_nm: f64,
    pub group: LayerGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn check(&self, what: &str, positive: bool) -> Result<(), GenError> {
        let ok = self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi && (!positive || self.lo > 0.0);
        if ok {
            Ok(())
        } else {
            Err(GenError::InvalidTech(format!("range `{what}` [{}, {}] is invalid", self.lo, self.hi)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingRanges {
    pub slew_s: Range,
    pub rd_ohm: Range,
    pub cp_f: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Chance that a wire segment receives a coupling capacitor.
    pub probability: f64,
    pub c_f: Range,
}

/// Technology description used to turn routed wire lengths into R and C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechProfile {
    pub name: String,
    pub layers: Vec<Layer>,
    pub via_r_ohm: f64,
    /// Adds one via resistance to every wire segment and pin stub.
    #[serde(default)]
    pub vias: bool,
    /// Edges shorter than the first bound use lower layers, shorter than the
    /// second use middle layers, the rest upper layers.
    pub length_classes_nm: [f64; 2],
    pub ranges: SamplingRanges,
    pub vdd_v: f64,
    #[serde(default = "default_vlo")]
    pub vlo: f64,
    #[serde(default = "default_vhi")]
    pub vhi: f64,
    pub coupling: CouplingSpec,
}

fn default_vlo() -> f64 {
    DriverParams::DEFAULT_V_LOW
}

fn default_vhi() -> f64 {
    DriverParams::DEFAULT_V_HIGH
}

impl Default for TechProfile {
    /// Illustrative seven-layer stack with per-unit values of a 7 nm-class
    /// process. Not calibrated against any foundry data.
    fn default() -> Self {
        let layer = |name: &str, r: f64, c: f64, group| Layer { name: name.into(), r_per_nm: r, c_per_nm: c, group };
        Self {
            name: "generic7".into(),
            layers: vec![
                layer("M2", 0.060, 1.6e-19, LayerGroup::Lower),
                layer("M3", 0.055, 1.6e-19, LayerGroup::Lower),
                layer("M4", 0.025, 1.8e-19, LayerGroup::Middle),
                layer("M5", 0.022, 1.8e-19, LayerGroup::Middle),
                layer("M6", 0.010, 2.0e-19, LayerGroup::Upper),
                layer("M7", 0.0025, 2.2e-19, LayerGroup::Upper),
            ],
            via_r_ohm: 10.0,
            vias: false,
            length_classes_nm: [1_000.0, 10_000.0],
            ranges: SamplingRanges {
                slew_s: Range::new(5e-12, 300e-12),
                rd_ohm: Range::new(100.0, 8_000.0),
                cp_f: Range::new(0.3e-15, 3e-15),
            },
            vdd_v: 0.7,
            vlo: DriverParams::DEFAULT_V_LOW,
            vhi: DriverParams::DEFAULT_V_HIGH,
            coupling: CouplingSpec { probability: 0.0, c_f: Range::new(0.05e-15, 0.5e-15) },
        }
    }
}

impl TechProfile {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidTech(m));
        for g in [LayerGroup::Lower, LayerGroup::Middle, LayerGroup::Upper] {
            if !self.layers.iter().any(|l| l.group == g) {
                return bad(format!("no layer in group {g:?}"));
            }
        }
        for l in &self.layers {
            if !(l.r_per_nm > 0.0 && l.c_per_nm > 0.0 && l.r_per_nm.is_finite() && l.c_per_nm.is_finite()) {
                return bad(format!("layer {} needs positive per-unit values", l.name));
            }
        }
        if !(self.via_r_ohm >= 0.0 && self.via_r_ohm.is_finite()) {
            return bad(format!("via resistance {} is invalid", self.via_r_ohm));
        }
        let [a, b] = self.length_classes_nm;
        if !(a > 0.0 && b > a) {
            return bad(format!("length classes {a}/{b} must be increasing and positive"));
        }
        self.ranges.slew_s.check("slew_s", true)?;
        self.ranges.rd_ohm.check("rd_ohm", true)?;
        self.ranges.cp_f.check("cp_f", false)?;
        self.coupling.c_f.check("coupling.c_f", false)?;
        if !(0.0..=1.0).contains(&self.coupling.probability) {
            return bad(format!("coupling probability {} outside [0, 1]", self.coupling.probability));
        }
        let probe = DriverParams {
            drive_resistance: 1.0,
            input_slew: 1.0,
            vdd: self.vdd_v,
            v_low_frac: self.vlo,
            v_high_frac: self.vhi,
        };
        probe.validate().map_err(GenError::InvalidTech)
    }

    fn group_of(&self, length_nm: f64) -> LayerGroup {
        let [a, b] = self.length_classes_nm;
        if length_nm < a {
            LayerGroup::Lower
        } else if length_nm < b {
            LayerGroup::Middle
        } else {
            LayerGroup::Upper
        }
    }
}

/// What to generate. Missing fields take their defaults when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub degree_min: usize,
    pub degree_max: usize,
    pub nets_per_degree: u32,
    /// Range of the longer bounding-box side, nanometers; sampled log-uniformly.
    pub bbox_long_side_nm: Range,
    /// Terminal coordinates are integers in `[0, coord_grid]` before scaling.
    pub coord_grid: i64,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            degree_min: 3,
            degree_max: 50,
            nets_per_degree: 10_000,
            bbox_long_side_nm: Range::new(30.0, 100_000.0),
            coord_grid: 1_000_000,
            seed: 0,
            train_fraction: 0.1,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidSpec(m));
        if self.degree_min < 3 || self.degree_max < self.degree_min {
            return bad(format!("degrees {}..{} must satisfy 3 <= min <= max", self.degree_min, self.degree_max));
        }
        if self.degree_max > u32::MAX as usize {
            return bad("degree too large".into());
        }
        let b = self.bbox_long_side_nm;
        if !(b.lo > 0.0 && b.hi >= b.lo && b.hi.is_finite()) {
            return bad(format!("bounding-box range [{}, {}] is invalid", b.lo, b.hi));
        }
        let cells = (self.coord_grid as f64 + 1.0).powi(2);
        if self.coord_grid < 1 || cells < self.degree_max as f64 {
            return bad(format!("grid {} too small for degree {}", self.coord_grid, self.degree_max));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad(format!("train fraction {} outside (0, 1]", self.train_fraction));
        }
        Ok(())
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + Clone {
        self.degree_min..=self.degree_max
    }

    pub fn total_nets(&self) -> u64 {
        (self.degree_max - self.degree_min + 1) as u64 * self.nets_per_degree as u64
    }
}

/// Independent RNG stream for one `(degree, index)` slot.
pub fn net_rng(seed: u64, degree: usize, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((degree as u64) << 32) | index as u64);
    rng
}

pub fn net_name(degree: usize, index: u32) -> String {
    format!("n_d{degree:02}_{index:06}")
}

/// Distinct integer terminals plus the scale (nm per grid unit) that puts the
/// longer bounding-box side at a log-uniform length.
pub fn generate_terminals(spec: &GenSpec, degree: usize, rng: &mut ChaCha8Rng) -> (Vec<Point>, f64) {
    let mut pts: Vec<Point> = Vec::with_capacity(degree);
    while pts.len() < degree {
        let p = (rng.gen_range(0..=spec.coord_grid), rng.gen_range(0..=spec.coord_grid));
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    let span = |f: fn(&Point) -> i64| {
        let (lo, hi) = pts.iter().map(f).fold((i64::MAX, i64::MIN), |(a, b), v| (a.min(v), b.max(v)));
        hi - lo
    };
    let long = span(|p| p.0).max(span(|p| p.1)).max(1) as f64;
    let b = spec.bbox_long_side_nm;
    let side = if b.hi > b.lo { (rng.gen_range(b.lo.ln()..=b.hi.ln())).exp() } else { b.lo };
    (pts, side / long)
}

/// Turns a routed tree into an RC network rooted at terminal `driver_terminal`.
///
/// Terminals that end up inside the tree get a junction plus a fanout pin
/// joined by a zero-length stub, so every fanout stays a leaf.
pub fn realize_rc(
    name: &str,
    tree: &SteinerTree,
    scale_nm: f64,
    tech: &TechProfile,
    rng: &mut ChaCha8Rng,
    driver_terminal: usize,
) -> RcNetwork {
    let r = &tech.ranges;
    let driver = DriverParams {
        drive_resistance: r.rd_ohm.sample(rng),
        input_slew: r.slew_s.sample(rng),
        vdd: tech.vdd_v,
        v_low_frac: tech.vlo,
        v_high_frac: tech.vhi,
    };
    let n = tree.points.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &tree.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    let via = if tech.vias { tech.via_r_ohm } else { 0.0 };
    let pos = |i: usize| {
        let p = tree.points[i];
        Some((p.0 as f64 * scale_nm, p.1 as f64 * scale_nm))
    };

    let mut nodes = vec![RcNode { id: 0, kind: NodeKind::Driver, pin_capacitance: 0.0, position: pos(driver_terminal) }];
    let mut segments: Vec<WireSegment> = Vec::new();
    let mut coupling = Vec::new();
    let mut stack = vec![(driver_terminal, usize::MAX, 0usize)];
    while let Some((v, from, rc_id)) = stack.pop() {
        // Push children in reverse so they are numbered in ascending order.
        for &w in adj[v].iter().rev().filter(|&&w| w != from) {
            let length = manhattan(tree.points[v], tree.points[w]) as f64 * scale_nm;
            let group = tech.group_of(length);
            let choices: Vec<&Layer> = tech.layers.iter().filter(|l| l.group == group).collect();
            let layer = choices[rng.gen_range(0..choices.len())];
            let child_id = nodes.len();
            let is_terminal = w < tree.terminal_count;
            let is_leaf = adj[w].len() == 1;
            let kind = if is_terminal && is_leaf { NodeKind::Fanout } else { NodeKind::Junction };
            let cp = if kind == NodeKind::Fanout { r.cp_f.sample(rng) } else { 0.0 };
            nodes.push(RcNode { id: child_id, kind, pin_capacitance: cp, position: pos(w) });
            segments.push(WireSegment {
                id: segments.len(),
                from: rc_id,
                to: child_id,
                resistance: length * layer.r_per_nm + via,
                capacitance: length * layer.c_per_nm,
                layer: Some(layer.name.clone()),
            });
            if tech.coupling.probability > 0.0 && rng.gen_bool(tech.coupling.probability) {
                coupling.push(Coupling { segment: segments.len() - 1, capacitance: tech.coupling.c_f.sample(rng) });
            }
            if is_terminal && !is_leaf {
                let pin_id = nodes.len();
                nodes.push(RcNode {
                    id: pin_id,
                    kind: NodeKind::Fanout,
                    pin_capacitance: r.cp_f.sample(rng),
                    position: pos(w),
                });
                segments.push(WireSegment {
                    id: segments.len(),
                    from: child_id,
                    to: pin_id,
                    resistance: via,
                    capacitance: 0.0,
                    layer: None,
                });
            }
            stack.push((w, v, child_id));
        }
    }
    RcNetwork::new(name, driver, nodes, segments, coupling)
        .expect("generated networks are valid by construction")
        .canonicalize()
}

/// One net of the corpus, fully determined by `(spec.seed, degree, index)`.
pub fn generate_net(spec: &GenSpec, tech: &TechProfile, degree: usize, index: u32) -> RcNetwork {
    let mut rng = net_rng(spec.seed, degree, index);
    let (terminals, scale) = generate_terminals(spec, degree, &mut rng);
    let tree = build_rsmt(&terminals);
    realize_rc(&net_name(degree, index), &tree, scale, tech, &mut rng, 0)
}

/// Nets in corpus order (by degree, then index), generated lazily.
pub fn net_stream<'a>(spec: &'a GenSpec, tech: &'a TechProfile) -> impl Iterator<Item = RcNetwork> + 'a {
    spec.degrees()
        .flat_map(move |d| (0..spec.nets_per_degree).map(move |i| (d, i)))
        .map(move |(d, i)| generate_net(spec, tech, d, i))
}

/// Number of training nets out of `n` for the given fraction; at least one.
pub fn train_count(n: u32, fraction: f64) -> u32 {
    if n == 0 {
        return 0;
    }
    ((n as f64 * fraction).round() as u32).clamp(1, n)
}

/// Random per-degree training subset, as sorted net indices.
pub fn train_indices(spec: &GenSpec, degree: usize) -> Vec<u32> {
    let n = spec.nets_per_degree;
    let k = train_count(n, spec.train_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_5EED_5EED_5EED);
    rng.set_stream(degree as u64);
    let mut picked: Vec<u32> = sample(&mut rng, n as usize, k as usize).into_iter().map(|i| i as u32).collect();
    picked.sort_unstable();
    picked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn dataset_split(spec: &GenSpec) -> Split {
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    for d in spec.degrees() {
        let train = train_indices(spec, d);
        let mut t = train.iter().peekable();
        for i in 0..spec.nets_per_degree {
            if t.peek() == Some(&&i) {
                t.next();
                split.train.push(net_name(d, i));
            } else {
                split.test.push(net_name(d, i));
            }
        }
    }
    split
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub total: u64,
    pub per_degree: BTreeMap<usize, u32>,
    pub train: u64,
    pub test: u64,
}

pub fn corpus_counts(spec: &GenSpec, split: &Split) -> CorpusCounts {
    CorpusCounts {
        total: spec.total_nets(),
        per_degree: spec.degrees().map(|d| (d, spec.nets_per_degree)).collect(),
        train: split.train.len() as u64,
        test: split.test.len() as u64,
    }
}
