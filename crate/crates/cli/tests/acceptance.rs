// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion with the pinned
//! tolerance, the measured value and the runtime against its limit. Exits
//! non-zero when any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ceff_cli::bench::run_bench;
use ceff_core::ceff::{compute_ceff_dartu, compute_ceff_dartu_net, ramp_response_pi};
use ceff_core::gat::{Model, WeightBundle};
use ceff_core::graph::{build_graph, col, read_graphs, to_gnn_graph, GnnGraph, GraphOptions};
use ceff_core::mor::{admittance_moments, reduce_network, PiModel};
use ceff_core::netgen::{net_stream, GenSpec, TechProfile};
use ceff_core::rc::{total_capacitance, Coupling, DriverParams, NodeKind, RcNetwork, RcNode, WireSegment};
use ceff_core::sim::{oracle_ceff, simulate, t50_network, SimOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn node(id: usize, kind: NodeKind, cp: f64) -> RcNode {
    RcNode { id, kind, pin_capacitance: cp, position: None }
}

fn seg(child: usize, from: usize, r: f64, c: f64) -> WireSegment {
    WireSegment { id: child - 1, from, to: child, resistance: r, capacitance: c, layer: None }
}

fn driver(rng: &mut ChaCha8Rng) -> DriverParams {
    DriverParams::new(rng.gen_range(100.0..5000.0), rng.gen_range(5e-12..200e-12), 0.7)
}

/// Random tree with `n` nodes: node 0 drives, leaves are fanouts.
fn random_tree(rng: &mut ChaCha8Rng, n: usize, zero_r: bool, name: &str) -> RcNetwork {
    let parent: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
    let mut has_child = vec![false; n];
    for &p in &parent {
        has_child[p] = true;
    }
    let nodes = (0..n)
        .map(|i| match i {
            0 => node(0, NodeKind::Driver, 0.0),
            _ if has_child[i] => node(i, NodeKind::Junction, 0.0),
            _ => node(i, NodeKind::Fanout, rng.gen_range(0.3e-15..3e-15)),
        })
        .collect();
    let segments = (1..n)
        .map(|i| {
            let r = if zero_r { 0.0 } else { log_uniform(rng, 1.0, 2000.0) };
            seg(i, parent[i - 1], r, rng.gen_range(0.0..5e-15))
        })
        .collect();
    let mut coupling = Vec::new();
    for s in 0..n - 1 {
        if rng.gen_bool(0.3) {
            coupling.push(Coupling { segment: s, capacitance: rng.gen_range(0.05e-15..0.5e-15) });
        }
    }
    RcNetwork::new(name, driver(rng), nodes, segments, coupling).expect("valid random tree")
}

/// Driver pin carrying `c1` through a zero-resistance stub, `c2` behind `r_pi`.
fn pi_net(name: &str, d: DriverParams, c1: f64, c2: f64, r_pi: f64) -> RcNetwork {
    let nodes = vec![node(0, NodeKind::Driver, 0.0), node(1, NodeKind::Fanout, c1), node(2, NodeKind::Fanout, c2)];
    let segs = vec![seg(1, 0, 0.0, 0.0), seg(2, 0, r_pi, 0.0)];
    RcNetwork::new(name, d, nodes, segs, vec![]).expect("valid pi net")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ---------------------------------------------------------------------------

fn pi_exactness() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let r = log_uniform(&mut rng, 1.0, 1e5);
        let c = log_uniform(&mut rng, 1e-17, 1e-12);
        let nodes = vec![node(0, NodeKind::Driver, 0.0), node(1, NodeKind::Fanout, c)];
        let net = RcNetwork::new(format!("far{k}"), driver(&mut rng), nodes, vec![seg(1, 0, r, 0.0)], vec![]).unwrap();
        let pi = reduce_network(&net).unwrap();
        worst = worst.max(pi.c1.abs() / c).max(rel(pi.c2, c)).max(rel(pi.r_pi, r));
    }
    let mut lumped_ok = 0;
    for k in 0..100 {
        let n = rng.gen_range(2..=12);
        let net = random_tree(&mut rng, n, true, &format!("lumped{k}"));
        let ct = total_capacitance(&net);
        let pi = reduce_network(&net).unwrap();
        if pi.degenerate && rel(pi.c1, ct) <= TOL && pi.c2 == 0.0 && pi.r_pi == 0.0 {
            lumped_ok += 1;
        }
    }
    Outcome {
        pass: worst <= TOL && lumped_ok == 100,
        detail: format!("far-end cap worst rel err {worst:.2e} (tol {TOL:.0e}); lumped degenerate {lumped_ok}/100"),
    }
}

/// Admittance moments from the nodal equations `G v_k = -C v_(k-1)`.
fn mna_moments(net: &RcNetwork) -> [f64; 3] {
    let n = net.nodes().len();
    let idx = |id: usize| net.nodes().iter().position(|x| x.id == id).unwrap();
    let root = net.nodes().iter().position(|x| x.kind == NodeKind::Driver).unwrap();
    let mut cap = vec![0.0; n];
    for (i, x) in net.nodes().iter().enumerate() {
        cap[i] += x.pin_capacitance;
    }
    for s in net.segments() {
        cap[idx(s.from)] += 0.5 * s.capacitance;
        cap[idx(s.to)] += 0.5 * s.capacitance;
    }
    for c in net.coupling() {
        let s = net.segments().iter().find(|s| s.id == c.segment).unwrap();
        cap[idx(s.to)] += c.capacitance;
    }
    let free: Vec<usize> = (0..n).filter(|&i| i != root).collect();
    let pos = |i: usize| free.iter().position(|&f| f == i);
    let m = free.len();
    let mut g = DMatrix::<f64>::zeros(m, m);
    for s in net.segments() {
        let y = 1.0 / s.resistance;
        let (a, b) = (pos(idx(s.from)), pos(idx(s.to)));
        for (p, q) in [(a, b), (b, a)] {
            if let Some(p) = p {
                g[(p, p)] += y;
                if let Some(q) = q {
                    g[(p, q)] -= y;
                }
            }
        }
    }
    let lu = g.lu();
    let mut v = DVector::<f64>::from_element(m, 1.0);
    let mut y = [cap.iter().sum::<f64>(), 0.0, 0.0];
    for k in 1..3 {
        let rhs = DVector::from_iterator(m, free.iter().enumerate().map(|(j, &i)| -cap[i] * v[j]));
        v = lu.solve(&rhs).expect("nonsingular conductance matrix");
        y[k] = free.iter().enumerate().map(|(j, &i)| cap[i] * v[j]).sum();
    }
    y
}

fn moment_oracle() -> Outcome {
    const TOL: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for k in 0..500 {
        let n = rng.gen_range(2..=12);
        let net = random_tree(&mut rng, n, false, &format!("t{k}"));
        let m = admittance_moments(&net);
        let o = mna_moments(&net);
        let e = rel(m.y1, o[0]).max(rel(m.y2, o[1])).max(rel(m.y3, o[2]));
        worst = worst.max(e);
        bad += (e > TOL) as usize;
    }
    Outcome { pass: bad == 0, detail: format!("500 trees, worst rel err {worst:.2e} (tol {TOL:.0e}), {bad} over") }
}

fn simulator_fidelity() -> Outcome {
    const TOL: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_pole: f64 = 0.0;
    for k in 0..20 {
        let rd = rng.gen_range(100.0..5000.0);
        let c = log_uniform(&mut rng, 1e-16, 1e-13);
        // Ramp a millionth of the time constant: the step limit.
        let slew = 1e-6 * rd * c * 0.6;
        let nodes = vec![node(0, NodeKind::Driver, 0.0), node(1, NodeKind::Fanout, c)];
        let net = RcNetwork::new(format!("pole{k}"), DriverParams::new(rd, slew, 0.7), nodes, vec![seg(1, 0, 0.0, 0.0)], vec![])
            .unwrap();
        let (t50, _) = t50_network(&net, &SimOptions::default()).unwrap();
        worst_pole = worst_pole.max(rel(t50, rd * c * std::f64::consts::LN_2));
    }
    let mut worst_pi: f64 = 0.0;
    for k in 0..100 {
        let d = driver(&mut rng);
        let (c1, c2) = (log_uniform(&mut rng, 1e-16, 2e-14), log_uniform(&mut rng, 1e-16, 2e-14));
        let r_pi = log_uniform(&mut rng, 1.0, 1e4);
        let net = pi_net(&format!("pi{k}"), d, c1, c2, r_pi);
        let res = simulate(&net, &SimOptions::default()).unwrap();
        let pi = PiModel::new(c1, c2, r_pi);
        for (t, v) in res.times.iter().zip(&res.node_voltages) {
            let (v1, v2) = ramp_response_pi(d.drive_resistance, &pi, d.ramp_time(), d.vdd, *t);
            worst_pi = worst_pi.max((v[0] - v1).abs() / d.vdd).max((v[2] - v2).abs() / d.vdd);
        }
    }
    Outcome {
        pass: worst_pole <= TOL && worst_pi <= TOL,
        detail: format!(
            "one-pole t50 worst rel err {worst_pole:.2e}; pi voltages worst err {worst_pi:.2e} of vdd (tol {TOL:.0e})"
        ),
    }
}

fn oracle_dartu_consistency() -> Outcome {
    const MEDIAN_TOL: f64 = 0.05;
    let spec = GenSpec { degree_min: 3, degree_max: 30, nets_per_degree: 36, seed: 404, ..Default::default() };
    let tech = TechProfile::default();
    let nets: Vec<RcNetwork> = net_stream(&spec, &tech).take(1000).collect();
    let mut errs = Vec::new();
    let mut failed = 0;
    for n in &nets {
        let d = compute_ceff_dartu_net(n).unwrap();
        if d.failed {
            failed += 1;
            continue;
        }
        let o = oracle_ceff(n).unwrap();
        errs.push((d.ceff - o.ceff).abs() / total_capacitance(n));
    }
    errs.sort_by(f64::total_cmp);
    let median = errs[errs.len() / 2];

    // Shielding sweep: scaling r_pi up must lower both estimates.
    let mut rng = ChaCha8Rng::seed_from_u64(405);
    let mut monotone = 0;
    for k in 0..20 {
        let d = DriverParams::new(rng.gen_range(200.0..3000.0), rng.gen_range(10e-12..100e-12), 0.7);
        let ct = log_uniform(&mut rng, 5e-15, 50e-15);
        let c1 = ct * rng.gen_range(0.1..0.6);
        let base = rng.gen_range(0.05..0.5) * d.drive_resistance * ct / (ct - c1);
        let mut prev: Option<(f64, f64)> = None;
        let mut ok = true;
        for f in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let net = pi_net(&format!("sweep{k}"), d, c1, ct - c1, base * f);
            let dartu = compute_ceff_dartu(&PiModel::new(c1, ct - c1, base * f), &d);
            let oracle = oracle_ceff(&net).unwrap().ceff;
            if dartu.failed {
                ok = false;
            }
            if let Some((pd, po)) = prev {
                ok &= dartu.ceff < pd && oracle < po;
            }
            prev = Some((dartu.ceff, oracle));
        }
        monotone += ok as usize;
    }

    // High-shielding stress family: tiny near cap, slow far branch, fast input.
    let mut stress_failed = 0;
    for _ in 0..200 {
        let rd = rng.gen_range(100.0..5000.0);
        let ct = log_uniform(&mut rng, 1e-15, 1e-13);
        let c1 = ct * log_uniform(&mut rng, 1e-7, 1e-5);
        let c2 = ct - c1;
        let b = rng.gen_range(0.35..0.45);
        let slew = 0.6 * rd * ct * log_uniform(&mut rng, 1e-5, 1e-3);
        let d = DriverParams::new(rd, slew, 0.7);
        stress_failed += compute_ceff_dartu(&PiModel::new(c1, c2, b * rd * ct / c2), &d).failed as usize;
    }
    Outcome {
        pass: median < MEDIAN_TOL && monotone == 20 && stress_failed >= 1,
        detail: format!(
            "{} nets, {failed} Dartu failures, median |dCeff|/Ctotal {:.3}% (tol 5%); r_pi sweep monotone {monotone}/20; \
             stress family failures {stress_failed}/200 (need >= 1)",
            nets.len(),
            100.0 * median
        ),
    }
}

fn graph_construction() -> Outcome {
    let spec = GenSpec { degree_min: 3, degree_max: 50, nets_per_degree: 209, seed: 505, ..Default::default() };
    let mut tech = TechProfile::default();
    tech.coupling.probability = 0.3;
    let (mut nets, mut bad_pre, mut bad_post, mut bad_cons, mut virtuals) = (0, 0, 0, 0, 0);
    for net in net_stream(&spec, &tech) {
        nets += 1;
        let b = build_graph(&net, GraphOptions::default());
        let n = net.nodes().len();
        bad_pre += (b.counts.pre_trim != 2 * n - 1) as usize;
        let fanouts = net.fanout_count();
        let expect = 1 + fanouts + net.coupling().len() + net.segments().len();
        bad_post += (b.counts.post_trim != expect || b.graph.x.len() != expect) as usize;
        virtuals += b.counts.virtuals;
        let ct = b.graph.meta.c_total_f;
        let sum: f64 = b.graph.x.iter().map(|r| r[col::C_W] + r[col::C_P]).sum();
        bad_cons += ((sum - ct).abs() > b.graph.x.len() as f64 * f64::EPSILON * ct) as usize;
    }
    Outcome {
        pass: nets >= 10_000 && bad_pre == 0 && bad_post == 0 && bad_cons == 0 && virtuals > 0,
        detail: format!(
            "{nets} nets ({virtuals} coupling virtuals): pre-trim mismatches {bad_pre}, post-trim mismatches {bad_post}, \
             conservation violations {bad_cons} (tol rows*eps*Ctotal)"
        ),
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

#[derive(serde::Deserialize)]
struct Reference {
    conv: Vec<Vec<Vec<f64>>>,
    gate_weights: Vec<f64>,
    pooled: Vec<f64>,
    mlp_hidden: Vec<Vec<f64>>,
    ratio: f64,
}

fn inference_parity() -> Outcome {
    const LAYER_TOL: f64 = 1e-5;
    const BATCH_TOL: f64 = 1e-6;
    const PERM_TOL: f64 = 1e-9;
    let bundle = WeightBundle::load(fixture("golden.bundle")).unwrap();
    let golden = read_graphs(std::io::BufReader::new(std::fs::File::open(fixture("golden_graph.jsonl")).unwrap()))
        .next()
        .unwrap()
        .unwrap();
    let r: Reference = serde_json::from_reader(std::fs::File::open(fixture("golden_reference.json")).unwrap()).unwrap();
    let model = Model::new(&bundle);
    let t = model.forward_trace(&golden);
    let mut layer = 0f64;
    for (got, want) in t.conv.iter().zip(&r.conv) {
        for (a, b) in got.iter().zip(want.iter().flatten()) {
            layer = layer.max((*a as f64 - b).abs());
        }
    }
    let vecs = [(&t.gate_weights, &r.gate_weights), (&t.pooled, &r.pooled)];
    for (a, b) in vecs.into_iter().chain(t.mlp_hidden.iter().zip(&r.mlp_hidden)) {
        for (x, y) in a.iter().zip(b) {
            layer = layer.max((x - y).abs());
        }
    }
    layer = layer.max((t.ratio - r.ratio).abs());

    let spec = GenSpec { degree_min: 3, degree_max: 12, nets_per_degree: 100, seed: 606, ..Default::default() };
    let tech = TechProfile::default();
    let mut batch: Vec<GnnGraph> = net_stream(&spec, &tech).map(|n| to_gnn_graph(&n, GraphOptions::default())).collect();
    batch.truncate(999);
    batch.insert(321, golden.clone());
    let together = model.predict(&batch);
    let mut batch_err = 0f64;
    for i in (0..batch.len()).step_by(37).chain([321]) {
        let alone = model.predict(std::slice::from_ref(&batch[i]));
        batch_err = batch_err.max((alone[0].ratio - together[i].ratio).abs());
    }

    let mut perm_err = 0f64;
    for g in batch.iter().step_by(50) {
        let n = g.x.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut x = g.x.clone();
        for (old, &new) in perm.iter().enumerate() {
            x[new] = g.x[old];
        }
        let edges = g.edges.iter().rev().map(|e| [perm[e[0] as usize] as u32, perm[e[1] as usize] as u32]).collect();
        let shuffled = GnnGraph { x, edges, ..g.clone() };
        let a = model.predict(std::slice::from_ref(g))[0].ratio;
        let b = model.predict(&[shuffled])[0].ratio;
        perm_err = perm_err.max((a - b).abs());
    }
    Outcome {
        pass: layer <= LAYER_TOL && batch_err <= BATCH_TOL && perm_err <= PERM_TOL && batch.len() == 1000,
        detail: format!(
            "golden layers max err {layer:.2e} (tol 1e-5); batch 1 vs {} max diff {batch_err:.2e} (tol 1e-6); \
             permutation max diff {perm_err:.2e} (tol 1e-9)",
            batch.len()
        ),
    }
}

fn throughput() -> Outcome {
    let spec = GenSpec { degree_min: 3, degree_max: 12, nets_per_degree: 1000, seed: 707, ..Default::default() };
    let tech = TechProfile::default();
    let nets: Vec<RcNetwork> = net_stream(&spec, &tech).collect();
    let bundle = WeightBundle::load(fixture("golden.bundle")).unwrap();
    let r = run_bench(&nets, &bundle, 1, 3).unwrap();
    Outcome {
        pass: r.nets >= 10_000 && r.gnn_faster,
        detail: format!(
            "{} nets ({} graph nodes): dartu-serial {:.0} nets/s, gnn-batch {:.0} nets/s, ratio {:.4} (need > 1); \
             graph build {:.0} nets/s",
            r.nets, r.graph_nodes, r.dartu_serial.nets_per_sec, r.gnn_batch.nets_per_sec, r.gnn_over_dartu_serial,
            r.graph_build.nets_per_sec
        ),
    }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 7] = [
        ("pi_reduction_exactness", Duration::from_secs(1), pi_exactness),
        ("moment_oracle", Duration::from_secs(30), moment_oracle),
        ("simulator_fidelity", Duration::from_secs(60), simulator_fidelity),
        ("oracle_dartu_consistency", Duration::from_secs(600), oracle_dartu_consistency),
        ("graph_construction", Duration::from_secs(120), graph_construction),
        ("inference_parity", Duration::from_secs(600), inference_parity),
        ("throughput", Duration::from_secs(600), throughput),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let pass = out.pass && took <= limit;
        failures += !pass as usize;
        println!(
            "{} {name}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {failures} failed");
    if failures > 0 {
        std::process::exit(1);
    }
}
