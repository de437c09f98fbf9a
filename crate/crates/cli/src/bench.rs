// SPDX-License-Identifier: Apache-2.0

//! Throughput comparison of Dartu iteration and batched GNN inference.

use std::time::Instant;

use ceff_core::ceff::compute_ceff_dartu_net;
use ceff_core::gat::{Model, WeightBundle};
use ceff_core::graph::{to_gnn_graph, GnnGraph, GraphOptions};
use ceff_core::rc::RcNetwork;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::par_map;

/// Graphs per inference batch.
pub const BATCH_GRAPHS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub seconds: f64,
    pub nets_per_sec: f64,
}

impl Throughput {
    fn new(nets: usize, seconds: f64) -> Self {
        Self { seconds, nets_per_sec: nets as f64 / seconds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub nets: usize,
    pub graph_nodes: usize,
    pub workers: usize,
    pub repeats: usize,
    pub dartu_serial: Throughput,
    pub dartu_parallel: Throughput,
    /// Inference only, on graphs built beforehand.
    pub gnn_batch: Throughput,
    /// Graph construction alone.
    pub graph_build: Throughput,
    /// `gnn_batch / dartu_serial` in nets per second.
    pub gnn_over_dartu_serial: f64,
    pub gnn_faster: bool,
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let v = f();
        best = best.min(t.elapsed().as_secs_f64());
        out = Some(v);
    }
    (best, out.unwrap())
}

fn dartu_all(nets: &[RcNetwork]) -> Result<usize, CliError> {
    let mut failed = 0;
    for n in nets {
        let r = compute_ceff_dartu_net(n).map_err(|e| CliError::Numeric(format!("net `{}`: {e}", n.name())))?;
        failed += r.failed as usize;
    }
    Ok(failed)
}

pub fn infer_batched(model: &Model, graphs: &[GnnGraph], workers: usize) -> Vec<f64> {
    let chunks: Vec<&[GnnGraph]> = graphs.chunks(BATCH_GRAPHS).collect();
    par_map(workers, &chunks, |c| Ok::<_, CliError>(model.predict(c).into_iter().map(|p| p.ratio).collect::<Vec<_>>()))
        .expect("inference is infallible")
        .into_iter()
        .flatten()
        .collect()
}

pub fn run_bench(
    nets: &[RcNetwork],
    bundle: &WeightBundle,
    workers: usize,
    repeats: usize,
) -> Result<BenchReport, CliError> {
    let n = nets.len();
    if n == 0 {
        return Err(CliError::Validation("bench corpus is empty".into()));
    }
    let (t_graph, graphs) = best_of(repeats, || {
        nets.iter().map(|net| to_gnn_graph(net, GraphOptions::default())).collect::<Vec<_>>()
    });
    let (t_serial, failed) = best_of(repeats, || dartu_all(nets));
    failed?;
    let (t_par, par) = best_of(repeats, || {
        let chunks: Vec<&[RcNetwork]> = nets.chunks(256).collect();
        par_map(workers, &chunks, |c| dartu_all(c))
    });
    par?;
    let model = Model::new(bundle);
    let (t_gnn, ratios) = best_of(repeats, || infer_batched(&model, &graphs, workers));
    debug_assert_eq!(ratios.len(), n);
    let gnn = Throughput::new(n, t_gnn);
    let serial = Throughput::new(n, t_serial);
    let ratio = gnn.nets_per_sec / serial.nets_per_sec;
    Ok(BenchReport {
        nets: n,
        graph_nodes: graphs.iter().map(|g| g.x.len()).sum(),
        workers,
        repeats: repeats.max(1),
        dartu_serial: serial,
        dartu_parallel: Throughput::new(n, t_par),
        gnn_batch: gnn,
        graph_build: Throughput::new(n, t_graph),
        gnn_over_dartu_serial: ratio,
        gnn_faster: ratio > 1.0,
    })
}
