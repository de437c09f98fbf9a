// SPDX-License-Identifier: Apache-2.0

use ceff_core::ceff::{compute_ceff_dartu, compute_ceff_dartu_net};
use ceff_core::graph::{apply_norm, build_graph, col, fit_norm_stats, to_gnn_graph, GraphOptions, RowKind};
use ceff_core::mor::{admittance_moments, reduce_network, reduce_to_pi, PiModel};
use ceff_core::netgen::{generate_net, GenSpec, TechProfile};
use ceff_core::rc::{
    derive_node_quantities, elmore_delay, node_ground_caps, parse_network, total_capacitance, Coupling, DriverParams,
    NodeKind, RcNetwork, RcNode, WireSegment,
};
use ceff_core::sim::{oracle_ceff_with, simulate, SimOptions};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Parts {
    driver: DriverParams,
    nodes: Vec<RcNode>,
    segments: Vec<WireSegment>,
    coupling: Vec<Coupling>,
}

impl Parts {
    fn build(&self, name: &str) -> RcNetwork {
        RcNetwork::new(name, self.driver, self.nodes.clone(), self.segments.clone(), self.coupling.clone()).unwrap()
    }
}

/// Random tree with scattered ids; leaves are fanouts, inner nodes junctions.
fn random_parts(seed: u64, n: usize) -> Parts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n).map(|i| i * 3 + 7).collect();
    ids.shuffle(&mut rng);
    let parent: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
    let mut inner = vec![false; n];
    for &p in &parent {
        inner[p] = true;
    }
    let nodes = (0..n)
        .map(|i| {
            let (kind, cp) = match i {
                0 => (NodeKind::Driver, 0.0),
                _ if inner[i] => (NodeKind::Junction, 0.0),
                _ => (NodeKind::Fanout, rng.gen_range(0.3e-15..3e-15)),
            };
            RcNode { id: ids[i], kind, pin_capacitance: cp, position: None }
        })
        .collect();
    let segments: Vec<WireSegment> = (1..n)
        .map(|i| WireSegment {
            id: 100 + i,
            from: ids[parent[i - 1]],
            to: ids[i],
            resistance: rng.gen_range(1.0..3000.0),
            capacitance: rng.gen_range(0.0..5e-15),
            layer: None,
        })
        .collect();
    let coupling = segments
        .iter()
        .filter(|_| rng.gen_bool(0.3))
        .map(|s| Coupling { segment: s.id, capacitance: 0.2e-15 })
        .collect();
    let driver = DriverParams::new(rng.gen_range(100.0..5000.0), rng.gen_range(5e-12..200e-12), 0.7);
    Parts { driver, nodes, segments, coupling }
}

fn random_net(seed: u64, n: usize) -> RcNetwork {
    random_parts(seed, n).build("p")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Root-to-node index path.
fn path(net: &RcNetwork, mut i: usize) -> Vec<usize> {
    let mut p = vec![i];
    while let Some((parent, _)) = net.topology().parent(i) {
        p.push(parent);
        i = parent;
    }
    p.reverse();
    p
}

fn upstream_r(net: &RcNetwork, i: usize) -> f64 {
    let p = path(net, i);
    p.windows(2)
        .map(|w| {
            let (_, s) = net.topology().parent(w[1]).unwrap();
            net.segments()[s].resistance
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tree_shape_and_json_round_trip(seed in any::<u64>(), n in 2usize..16) {
        let net = random_net(seed, n);
        prop_assert_eq!(net.segments().len(), net.nodes().len() - 1);
        let canon = net.canonicalize();
        let again = parse_network(&canon.to_json()).unwrap();
        prop_assert_eq!(again.to_json(), canon.to_json());
        prop_assert_eq!(canon.canonicalize().to_json(), canon.to_json());
    }

    #[test]
    fn upstream_resistance_grows_and_downstream_cap_shrinks(seed in any::<u64>(), n in 2usize..16) {
        let net = random_net(seed, n);
        let d = derive_node_quantities(&net);
        for i in 0..net.nodes().len() {
            if let Some((p, _)) = net.topology().parent(i) {
                prop_assert!(d.by_index(i).upstream_resistance >= d.by_index(p).upstream_resistance);
                prop_assert!(d.by_index(i).downstream_capacitance <= d.by_index(p).downstream_capacitance);
            }
            prop_assert!(rel(d.by_index(i).upstream_resistance + 1.0, upstream_r(&net, i) + 1.0) < 1e-12);
        }
    }

    #[test]
    fn ground_caps_sum_to_total(seed in any::<u64>(), n in 2usize..16) {
        let net = random_net(seed, n);
        let ct = total_capacitance(&net);
        let sum: f64 = node_ground_caps(&net).iter().sum();
        prop_assert!((sum - ct).abs() <= net.nodes().len() as f64 * f64::EPSILON * ct);
    }

    #[test]
    fn elmore_matches_shared_path_sum(seed in any::<u64>(), n in 2usize..14) {
        let net = random_net(seed, n);
        let caps = node_ground_caps(&net);
        let rd = net.driver().drive_resistance;
        let got = elmore_delay(&net);
        for i in 0..net.nodes().len() {
            let pi = path(&net, i);
            let mut want = 0.0;
            for (k, ck) in caps.iter().enumerate() {
                let pk = path(&net, k);
                let common = pi.iter().zip(&pk).take_while(|(a, b)| a == b).count();
                want += (rd + upstream_r(&net, pi[common - 1])) * ck;
            }
            prop_assert!(rel(got[i], want) < 1e-12, "node {}: {} vs {}", i, got[i], want);
        }
    }

    #[test]
    fn pi_matches_moments_and_conserves_capacitance(seed in any::<u64>(), n in 2usize..16) {
        let net = random_net(seed, n);
        let m = admittance_moments(&net);
        let pi = reduce_network(&net).unwrap();
        prop_assume!(!pi.degenerate);
        if !pi.clamped {
            let p = pi.moments();
            prop_assert!(rel(p.y1, m.y1) <= 1e-9 && rel(p.y2, m.y2) <= 1e-9 && rel(p.y3, m.y3) <= 1e-9);
            prop_assert!((pi.c1 + pi.c2 - m.y1).abs() <= 2.0 * f64::EPSILON * m.y1);
        }
        prop_assert!(pi.c1 >= 0.0 && pi.c2 > 0.0 && pi.r_pi > 0.0);
    }

    #[test]
    fn extra_series_resistance_raises_y2(seed in any::<u64>(), n in 2usize..16, pick in any::<prop::sample::Index>()) {
        let mut parts = random_parts(seed, n);
        let base = admittance_moments(&parts.build("a"));
        let s = pick.index(parts.segments.len());
        parts.segments[s].resistance *= 1.25;
        let more = admittance_moments(&parts.build("b"));
        prop_assert!(more.y2.abs() > base.y2.abs());
    }

    #[test]
    fn dartu_range_and_determinism(seed in any::<u64>(), n in 2usize..16) {
        let net = random_net(seed, n);
        let pi = reduce_network(&net).unwrap();
        let a = compute_ceff_dartu_net(&net).unwrap();
        let b = compute_ceff_dartu_net(&net).unwrap();
        prop_assert_eq!(a.ceff.to_bits(), b.ceff.to_bits());
        prop_assert_eq!(a.iterations, b.iterations);
        if !a.failed {
            prop_assert!(a.ceff > 0.0 && a.ceff <= pi.total() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dartu_limits(rd in 200.0f64..4000.0, ct in 2e-15f64..50e-15, frac in 0.1f64..0.9) {
        let (c1, c2) = (frac * ct, (1.0 - frac) * ct);
        let tau = rd * ct;
        // Far branch a hundred times faster than the driver: no shielding.
        let d = DriverParams::new(rd, 0.6 * tau, 0.7);
        let r = compute_ceff_dartu(&PiModel::new(c1, c2, 0.01 * tau / c2), &d);
        prop_assert!(!r.failed && rel(r.ceff, ct) < 0.02);
        // Input a hundred times slower than every time constant.
        let r = compute_ceff_dartu(&PiModel::new(c1, c2, rd), &DriverParams::new(rd, 60.0 * tau, 0.7));
        prop_assert!(!r.failed && rel(r.ceff, ct) < 0.02);
        // Fast input, far branch a hundred times slower: only c1 is seen.
        let fast = DriverParams::new(rd, 0.6 * rd * c1, 0.7);
        let r = compute_ceff_dartu(&PiModel::new(c1, c2, 100.0 * rd * c1 / c2 * 100.0), &fast);
        if !r.failed {
            prop_assert!(rel(r.ceff, c1) < 0.02, "{} vs c1 {}", r.ceff, c1);
        }
    }

    #[test]
    fn graph_ignores_input_order(seed in any::<u64>(), n in 2usize..16) {
        let mut parts = random_parts(seed, n);
        let a = to_gnn_graph(&parts.build("g"), GraphOptions::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        parts.nodes.shuffle(&mut rng);
        parts.segments.shuffle(&mut rng);
        parts.coupling.shuffle(&mut rng);
        let b = to_gnn_graph(&parts.build("g"), GraphOptions::default());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn graph_structure_and_reachability(seed in any::<u64>(), n in 2usize..16) {
        let net = random_net(seed, n);
        let built = build_graph(&net, GraphOptions::default());
        let g = &built.graph;
        let rows = g.x.len();
        let mut indeg = vec![0; rows];
        let mut outdeg = vec![0; rows];
        for e in &g.edges {
            outdeg[e[0] as usize] += 1;
            indeg[e[1] as usize] += 1;
        }
        for (i, k) in built.kinds.iter().enumerate() {
            match k {
                RowKind::Edge => prop_assert!(indeg[i] >= 1 && outdeg[i] >= 1),
                RowKind::Virtual | RowKind::Fanout => prop_assert!(outdeg[i] == 0 && indeg[i] == 1),
                RowKind::Driver => prop_assert!(i == 0 && indeg[i] == 0),
            }
        }
        let mut seen = vec![false; rows];
        let mut stack = vec![0usize];
        while let Some(u) = stack.pop() {
            if !std::mem::replace(&mut seen[u], true) {
                stack.extend(g.edges.iter().filter(|e| e[0] as usize == u).map(|e| e[1] as usize));
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        let ct = g.meta.c_total_f;
        let sum: f64 = g.x.iter().map(|r| r[col::C_W] + r[col::C_P]).sum();
        prop_assert!((sum - ct).abs() <= rows as f64 * f64::EPSILON * ct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn delivered_charge_matches_stored_charge(seed in any::<u64>(), n in 2usize..12) {
        let net = random_net(seed, n);
        let r = simulate(&net, &SimOptions::default()).unwrap();
        let caps = node_ground_caps(&net);
        let last = r.node_voltages.last().unwrap();
        let stored: f64 = caps.iter().zip(last).map(|(c, v)| c * v).sum();
        prop_assert!(rel(r.delivered_charge, stored) < 5e-3, "{} vs {}", r.delivered_charge, stored);
    }

    #[test]
    fn halving_the_final_step_barely_moves_t50(seed in any::<u64>(), n in 2usize..12) {
        let net = random_net(seed, n);
        let r = simulate(&net, &SimOptions::default()).unwrap();
        prop_assume!(r.step_converged);
        let finer = simulate(&net, &SimOptions { fixed_step: Some(0.5 * r.step), ..Default::default() }).unwrap();
        prop_assert!(rel(finer.t50_root, r.t50_root) < 1e-4);
    }

    #[test]
    fn oracle_bracket_always_holds_a_sign_change(seed in any::<u64>(), n in 2usize..12) {
        let net = random_net(seed, n);
        let (res, trace) = oracle_ceff_with(&net, &SimOptions::default()).unwrap();
        for b in &trace.brackets {
            prop_assert!(b.lo < b.hi);
            prop_assert!(b.delay_diff_lo < 0.0 && b.delay_diff_hi >= 0.0);
        }
        let ct = total_capacitance(&net);
        prop_assert!(res.ceff > 0.0 && res.ceff <= ct);
    }
}

#[test]
fn clamped_negative_c1_keeps_total() {
    // A π with zero near cap has c1 = 0 up to rounding; nudge y2 to make it slightly negative.
    let p = PiModel::new(0.0, 1e-14, 1000.0).moments();
    let m = ceff_core::mor::AdmittanceMoments { y2: p.y2 * (1.0 + 1e-12), ..p };
    let pi = reduce_to_pi(&m, m.y1).unwrap();
    assert!(pi.clamped && pi.c1 == 0.0 && pi.c2 == m.y1);
    let bad = ceff_core::mor::AdmittanceMoments { y2: p.y2 * 1.1, ..p };
    assert!(reduce_to_pi(&bad, bad.y1).is_err());
}

#[test]
fn normalized_training_columns_are_standardized() {
    let spec = GenSpec { degree_min: 3, degree_max: 10, nets_per_degree: 30, seed: 8, ..Default::default() };
    let tech = TechProfile::default();
    let graphs: Vec<_> = spec
        .degrees()
        .flat_map(|d| (0..30).map(move |i| (d, i)))
        .map(|(d, i)| to_gnn_graph(&generate_net(&spec, &tech, d, i), GraphOptions::default()))
        .collect();
    let stats = fit_norm_stats(&graphs).unwrap();
    let normed: Vec<_> = graphs.iter().map(|g| apply_norm(g, &stats)).collect();
    let rows: Vec<&[f64; 11]> = normed.iter().flat_map(|g| g.x.iter()).collect();
    for c in 0..11 {
        if !stats.scaled[c] {
            assert!(graphs.iter().zip(&normed).all(|(a, b)| a.x.iter().zip(&b.x).all(|(r, s)| r[c] == s[c])));
            continue;
        }
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-9, "column {c} mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-9, "column {c} std {}", var.sqrt());
    }
    for c in [col::F_D, col::F_F, col::H_D] {
        assert!(!stats.scaled[c]);
    }
}

#[test]
fn generation_is_deterministic_and_valid() {
    let spec = GenSpec { degree_min: 3, degree_max: 20, nets_per_degree: 3, seed: 99, ..Default::default() };
    let mut tech = TechProfile::default();
    tech.coupling.probability = 0.5;
    tech.vias = true;
    for d in spec.degrees() {
        for i in 0..3 {
            let a = generate_net(&spec, &tech, d, i);
            let b = generate_net(&spec, &tech, d, i);
            assert_eq!(a.to_json(), b.to_json());
            assert_eq!(a.fanout_count(), d - 1);
            parse_network(&a.to_json()).unwrap();
        }
    }
}
