// SPDX-License-Identifier: Apache-2.0

//! Batched forward pass: GAT convolutions, attentional aggregation and the MLP
//! head.
//!
//! Node features and convolution weights are `f32`; attention softmaxes,
//! neighbourhood sums and everything after pooling run in `f64`. Graphs of
//! different sizes share one batch through per-graph node ranges, and every
//! per-node or per-graph result depends only on that node's or graph's data.

use serde::{Deserialize, Serialize};

use super::bundle::{BundleError, WeightBundle};
use crate::graph::{GnnGraph, FEATURE_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub name: String,
    pub ratio: f64,
    pub ceff: f64,
}

/// Per-layer activations of a single graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Normalized input, row-major `[n, 11]`.
    pub input: Vec<f32>,
    /// Output of each convolution after its activation, `[n, width]`.
    pub conv: Vec<Vec<f32>>,
    /// Largest `|sum of attention weights - 1|` over nodes, heads and layers.
    pub attention_sum_error: f64,
    /// Softmax weights of the aggregation gate, one per node.
    pub gate_weights: Vec<f64>,
    /// Aggregated graph vector after the transform, `[width]`.
    pub pooled: Vec<f64>,
    /// Hidden MLP activations, one vector per hidden layer.
    pub mlp_hidden: Vec<Vec<f64>>,
    pub ratio: f64,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `c[m, n] = a[m, k] * w[n, k]^T`.
fn sgemm_nt(m: usize, k: usize, n: usize, a: &[f32], w: &[f32], c: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 {
        return;
    }
    // SAFETY: the slices hold exactly m*k, n*k and m*n elements with the
    // row-major strides passed below.
    unsafe {
        matrixmultiply::sgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            w.as_ptr(), 1, k as isize,
            0.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

fn dgemm_nt(m: usize, k: usize, n: usize, a: &[f64], w: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(w.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 {
        return;
    }
    // SAFETY: as in `sgemm_nt`.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), k as isize, 1,
            w.as_ptr(), 1, k as isize,
            0.0,
            c.as_mut_ptr(), n as isize, 1,
        );
    }
}

struct ConvWeights {
    in_dim: usize,
    lin: Vec<f32>,
    att_src: Vec<f64>,
    att_dst: Vec<f64>,
    bias: Vec<f64>,
}

struct Dense {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

/// Graphs flattened into one node array with incoming-neighbour lists.
pub struct Batch {
    x: Vec<f32>,
    graph_start: Vec<usize>,
    in_ptr: Vec<usize>,
    in_src: Vec<u32>,
}

impl Batch {
    pub fn graph_count(&self) -> usize {
        self.graph_start.len() - 1
    }

    pub fn node_count(&self) -> usize {
        *self.graph_start.last().unwrap()
    }
}

/// Inference engine over a validated bundle.
pub struct Model {
    heads: usize,
    channels: usize,
    width: usize,
    slope: f64,
    convs: Vec<ConvWeights>,
    gate_w: Vec<f64>,
    gate_b: f64,
    nn: Dense,
    mlp: Vec<Dense>,
    norm: crate::graph::NormStats,
}

const CHUNK_NODES: usize = 1 << 15;

impl Model {
    pub fn new(bundle: &WeightBundle) -> Self {
        let d = &bundle.descriptor;
        let to64 = |s: &[f32]| s.iter().map(|&v| v as f64).collect::<Vec<f64>>();
        let convs = (1..=d.conv_layers)
            .map(|l| ConvWeights {
                in_dim: if l == 1 { d.in_features } else { d.width() },
                lin: bundle.tensor(&format!("conv{l}.lin.weight")).to_vec(),
                att_src: to64(bundle.tensor(&format!("conv{l}.att_src"))),
                att_dst: to64(bundle.tensor(&format!("conv{l}.att_dst"))),
                bias: to64(bundle.tensor(&format!("conv{l}.bias"))),
            })
            .collect();
        let dense = |prefix: &str| {
            let shape = bundle.shape(&format!("{prefix}.weight"));
            Dense {
                in_dim: shape[1],
                out_dim: shape[0],
                weight: to64(bundle.tensor(&format!("{prefix}.weight"))),
                bias: to64(bundle.tensor(&format!("{prefix}.bias"))),
            }
        };
        Self {
            heads: d.heads,
            channels: d.conv_channels,
            width: d.width(),
            slope: d.negative_slope,
            convs,
            gate_w: to64(bundle.tensor("aggr.gate.weight")),
            gate_b: bundle.tensor("aggr.gate.bias")[0] as f64,
            nn: dense("aggr.nn"),
            mlp: (0..d.linear_layers).map(|k| dense(&format!("mlp.{k}"))).collect(),
            norm: bundle.norm_stats.clone(),
        }
    }

    /// Normalizes features and builds neighbour lists with one self-loop per node.
    pub fn prepare<'a>(&self, graphs: impl IntoIterator<Item = &'a GnnGraph>) -> Batch {
        let mut b = Batch { x: Vec::new(), graph_start: vec![0], in_ptr: vec![0], in_src: Vec::new() };
        let mut incoming: Vec<Vec<u32>> = Vec::new();
        for g in graphs {
            let base = b.node_count();
            for row in &g.x {
                b.x.extend(self.norm.apply_row(row).iter().map(|&v| v as f32));
            }
            incoming.clear();
            incoming.resize(g.x.len(), Vec::new());
            for e in &g.edges {
                if e[0] != e[1] {
                    incoming[e[1] as usize].push(base as u32 + e[0]);
                }
            }
            for (i, srcs) in incoming.iter().enumerate() {
                b.in_src.push((base + i) as u32);
                b.in_src.extend_from_slice(srcs);
                b.in_ptr.push(b.in_src.len());
            }
            b.graph_start.push(base + g.x.len());
        }
        b
    }

    /// One attention convolution followed by ELU.
    fn conv(&self, layer: &ConvWeights, h: &[f32], batch: &Batch, attn_err: &mut f64) -> Vec<f32> {
        let n = batch.node_count();
        let (w, heads, ch) = (self.width, self.heads, self.channels);
        let mut xp = vec![0f32; n * w];
        sgemm_nt(n, layer.in_dim, w, h, &layer.lin, &mut xp);
        let mut a_src = vec![0f64; n * heads];
        let mut a_dst = vec![0f64; n * heads];
        for i in 0..n {
            for hd in 0..heads {
                let row = &xp[i * w + hd * ch..i * w + (hd + 1) * ch];
                let att_s = &layer.att_src[hd * ch..(hd + 1) * ch];
                let att_d = &layer.att_dst[hd * ch..(hd + 1) * ch];
                let (mut s, mut d) = (0.0, 0.0);
                for ((&v, &as_), &ad) in row.iter().zip(att_s).zip(att_d) {
                    s += v as f64 * as_;
                    d += v as f64 * ad;
                }
                a_src[i * heads + hd] = s;
                a_dst[i * heads + hd] = d;
            }
        }
        let mut out = vec![0f32; n * w];
        let mut acc = vec![0f64; w];
        let mut logits: Vec<f64> = Vec::new();
        for i in 0..n {
            let srcs = &batch.in_src[batch.in_ptr[i]..batch.in_ptr[i + 1]];
            acc.fill(0.0);
            for hd in 0..heads {
                logits.clear();
                let dst = a_dst[i * heads + hd];
                let mut max = f64::NEG_INFINITY;
                for &j in srcs {
                    let e = a_src[j as usize * heads + hd] + dst;
                    let e = if e > 0.0 { e } else { self.slope * e };
                    max = max.max(e);
                    logits.push(e);
                }
                let mut total = 0.0;
                for e in logits.iter_mut() {
                    *e = (*e - max).exp();
                    total += *e;
                }
                let mut wsum = 0.0;
                let acc_h = &mut acc[hd * ch..(hd + 1) * ch];
                for (&j, &e) in srcs.iter().zip(logits.iter()) {
                    let alpha = e / total;
                    wsum += alpha;
                    let src = &xp[j as usize * w + hd * ch..j as usize * w + (hd + 1) * ch];
                    for (a, &v) in acc_h.iter_mut().zip(src) {
                        *a += alpha * v as f64;
                    }
                }
                *attn_err = attn_err.max((wsum - 1.0).abs());
            }
            for ((o, &a), &b) in out[i * w..(i + 1) * w].iter_mut().zip(&acc).zip(&layer.bias) {
                *o = elu(a + b) as f32;
            }
        }
        out
    }

    /// Gate softmax per graph and the weighted node sum, `[graphs, width]`.
    fn pool(&self, h: &[f32], batch: &Batch, gate_out: Option<&mut Vec<f64>>) -> Vec<f64> {
        let w = self.width;
        let g = batch.graph_count();
        let mut pooled = vec![0f64; g * w];
        let mut gates = Vec::new();
        let mut scores = Vec::new();
        for gi in 0..g {
            let (s, e) = (batch.graph_start[gi], batch.graph_start[gi + 1]);
            scores.clear();
            let mut max = f64::NEG_INFINITY;
            for i in s..e {
                let row = &h[i * w..(i + 1) * w];
                let mut z = self.gate_b;
                for k in 0..w {
                    z += row[k] as f64 * self.gate_w[k];
                }
                max = max.max(z);
                scores.push(z);
            }
            let mut total = 0.0;
            for z in scores.iter_mut() {
                *z = (*z - max).exp();
                total += *z;
            }
            let out = &mut pooled[gi * w..(gi + 1) * w];
            for (i, z) in (s..e).zip(scores.iter()) {
                let a = z / total;
                gates.push(a);
                let row = &h[i * w..(i + 1) * w];
                for k in 0..w {
                    out[k] += a * row[k] as f64;
                }
            }
        }
        if let Some(gout) = gate_out {
            *gout = gates;
        }
        pooled
    }

    fn dense(&self, layer: &Dense, x: &[f64], rows: usize, act: fn(f64) -> f64) -> Vec<f64> {
        let mut y = vec![0f64; rows * layer.out_dim];
        dgemm_nt(rows, layer.in_dim, layer.out_dim, x, &layer.weight, &mut y);
        for r in 0..rows {
            for o in 0..layer.out_dim {
                let v = &mut y[r * layer.out_dim + o];
                *v = act(*v + layer.bias[o]);
            }
        }
        y
    }

    fn run(&self, batch: &Batch, mut trace: Option<&mut ForwardTrace>) -> Vec<f64> {
        let mut h = batch.x.clone();
        let mut attn_err = 0.0;
        for layer in &self.convs {
            h = self.conv(layer, &h, batch, &mut attn_err);
            if let Some(t) = trace.as_deref_mut() {
                t.conv.push(h.clone());
            }
        }
        let g = batch.graph_count();
        let mut gates = Vec::new();
        let pooled = self.pool(&h, batch, trace.is_some().then_some(&mut gates));
        // The gate weights sum to one, so the transform commutes with pooling.
        let mut z = self.dense(&self.nn, &pooled, g, |v| v);
        let last = self.mlp.len() - 1;
        if let Some(t) = trace.as_deref_mut() {
            t.gate_weights = gates;
            t.pooled = z.clone();
            t.attention_sum_error = attn_err;
        }
        for (k, layer) in self.mlp.iter().enumerate() {
            z = self.dense(layer, &z, g, if k == last { sigmoid } else { elu });
            if k != last {
                if let Some(t) = trace.as_deref_mut() {
                    t.mlp_hidden.push(z.clone());
                }
            }
        }
        z
    }

    /// Ratios for every graph of a prepared batch.
    pub fn forward(&self, batch: &Batch) -> Vec<f64> {
        self.run(batch, None)
    }

    /// Single graph with every intermediate kept.
    pub fn forward_trace(&self, graph: &GnnGraph) -> ForwardTrace {
        let batch = self.prepare([graph]);
        let mut t = ForwardTrace {
            input: batch.x.clone(),
            conv: Vec::new(),
            attention_sum_error: 0.0,
            gate_weights: Vec::new(),
            pooled: Vec::new(),
            mlp_hidden: Vec::new(),
            ratio: 0.0,
        };
        t.ratio = self.run(&batch, Some(&mut t))[0];
        t
    }

    /// Predictions in input order; large inputs are processed in node-bounded chunks.
    pub fn predict(&self, graphs: &[GnnGraph]) -> Vec<Prediction> {
        let mut out = Vec::with_capacity(graphs.len());
        let mut start = 0;
        while start < graphs.len() {
            let mut end = start;
            let mut nodes = 0;
            while end < graphs.len() && (end == start || nodes + graphs[end].x.len() <= CHUNK_NODES) {
                nodes += graphs[end].x.len();
                end += 1;
            }
            let batch = self.prepare(&graphs[start..end]);
            for (g, r) in graphs[start..end].iter().zip(self.forward(&batch)) {
                out.push(Prediction { name: g.meta.name.clone(), ratio: r, ceff: r * g.meta.c_total_f });
            }
            start = end;
        }
        out
    }
}

/// Convenience wrapper: validate the bundle's feature order and predict.
pub fn predict(graphs: &[GnnGraph], bundle: &WeightBundle) -> Result<Vec<Prediction>, BundleError> {
    if !bundle.norm_stats.has_standard_order() {
        return Err(BundleError::FeatureOrderMismatch {
            expected: crate::graph::FEATURE_ORDER.iter().map(|s| s.to_string()).collect(),
            found: bundle.norm_stats.feature_order.clone(),
        });
    }
    Ok(Model::new(bundle).predict(graphs))
}

const _: () = assert!(FEATURE_COUNT == 11);
