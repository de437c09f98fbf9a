// SPDX-License-Identifier: Apache-2.0

//! Transient simulation of an RC tree driven by a ramp behind `R_d`, and the
//! delay-matching effective capacitance built on top of it.
//!
//! Integration is trapezoidal with a fixed step that is halved globally until
//! the driver-output 50% crossing settles. The circuit is a tree plus ground,
//! so every step is an O(n) leaf-to-root elimination.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ceff::{CeffMethod, CeffResult};
use crate::rc::{elmore_delay, node_ground_caps, total_capacitance, DriverParams, RcNetwork};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("net `{name}`: driver output never reached vdd/2 within {horizon:e} s")]
    NoCrossing { name: String, horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// End time; `None` means `max(20 x max Elmore, 5 x ramp)`.
    pub horizon: Option<f64>,
    /// Accepted relative change of t50 between successive halvings.
    pub rel_tol: f64,
    /// Initial step count per estimated t50.
    pub initial_steps: u32,
    pub max_halvings: u32,
    /// Use this step and skip the halving loop.
    pub fixed_step: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { horizon: None, rel_tol: 1e-4, initial_steps: 32, max_halvings: 14, fixed_step: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult {
    pub times: Vec<f64>,
    /// `node_voltages[k][i]` is the voltage of `net.nodes()[i]` at `times[k]`.
    pub node_voltages: Vec<Vec<f64>>,
    pub t50_root: f64,
    /// Step used after the input ramp has saturated.
    pub step: f64,
    /// Whether the halving loop met its tolerance before the cap.
    pub step_converged: bool,
    /// `(1/R_d) * integral of (e - v_root)`, accumulated with the trapezoid rule.
    pub delivered_charge: f64,
}

/// Default simulation end time.
pub fn default_horizon(net: &RcNetwork) -> f64 {
    let max_elmore = elmore_delay(net).into_iter().fold(0.0, f64::max);
    (20.0 * max_elmore).max(5.0 * net.driver().ramp_time())
}

/// Capacitor groups joined by positive resistances, parent index < child index.
#[derive(Debug, Clone)]
struct Circuit {
    parent: Vec<usize>,
    /// Conductance to the parent; entry 0 is the driver conductance.
    g: Vec<f64>,
    cap: Vec<f64>,
    node_group: Vec<usize>,
}

impl Circuit {
    fn from_net(net: &RcNetwork) -> Self {
        let topo = net.topology();
        let ground = node_ground_caps(net);
        let mut node_group = vec![0usize; net.nodes().len()];
        let mut parent = vec![0usize];
        let mut g = vec![1.0 / net.driver().drive_resistance];
        let mut cap = vec![0.0];
        for &v in topo.preorder() {
            match topo.parent(v) {
                None => node_group[v] = 0,
                Some((p, s)) => {
                    let r = net.segments()[s].resistance;
                    if r == 0.0 {
                        node_group[v] = node_group[p];
                    } else {
                        node_group[v] = parent.len();
                        parent.push(node_group[p]);
                        g.push(1.0 / r);
                        cap.push(0.0);
                    }
                }
            }
            cap[node_group[v]] += ground[v];
        }
        Self { parent, g, cap, node_group }
    }

    fn single(rd: f64, c: f64) -> Self {
        Self { parent: vec![0], g: vec![1.0 / rd], cap: vec![c], node_group: vec![0] }
    }

    fn len(&self) -> usize {
        self.cap.len()
    }
}

/// Eliminated diagonal of `2C/h + G` for one step size.
struct Factor {
    two_c_over_h: Vec<f64>,
    diag: Vec<f64>,
}

impl Factor {
    fn new(c: &Circuit, h: f64) -> Self {
        let n = c.len();
        let two_c_over_h: Vec<f64> = c.cap.iter().map(|&x| 2.0 * x / h).collect();
        let mut diag: Vec<f64> = (0..n).map(|i| two_c_over_h[i] + c.g[i]).collect();
        for i in 1..n {
            diag[c.parent[i]] += c.g[i];
        }
        for i in (1..n).rev() {
            let p = c.parent[i];
            diag[p] -= c.g[i] * c.g[i] / diag[i];
        }
        Self { two_c_over_h, diag }
    }

    /// Solves in place: `rhs` is consumed, `out` receives the solution.
    fn solve(&self, c: &Circuit, rhs: &mut [f64], out: &mut [f64]) {
        let n = c.len();
        for i in (1..n).rev() {
            rhs[c.parent[i]] += c.g[i] * rhs[i] / self.diag[i];
        }
        out[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            out[i] = (rhs[i] + c.g[i] * out[c.parent[i]]) / self.diag[i];
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    ramp: f64,
    n_ramp: usize,
    h_ramp: f64,
    h_tail: f64,
}

impl Grid {
    fn new(ramp: f64, h: f64) -> Self {
        let n_ramp = ((ramp / h).ceil() as usize).max(1);
        Self { ramp, n_ramp, h_ramp: ramp / n_ramp as f64, h_tail: h }
    }

    fn time(&self, k: usize) -> f64 {
        if k <= self.n_ramp {
            k as f64 * self.h_ramp
        } else {
            self.ramp + (k - self.n_ramp) as f64 * self.h_tail
        }
    }
}

struct Source {
    vdd: f64,
    ramp: f64,
}

impl Source {
    fn at(&self, t: f64) -> f64 {
        if t >= self.ramp {
            self.vdd
        } else {
            self.vdd * t / self.ramp
        }
    }
}

/// Steps from t = 0 to `horizon`; `visit(t, v, e)` returns `false` to stop.
fn run(c: &Circuit, driver: &DriverParams, grid: Grid, horizon: f64, mut visit: impl FnMut(f64, &[f64], f64) -> bool) {
    let src = Source { vdd: driver.vdd, ramp: driver.ramp_time() };
    let n = c.len();
    let f_ramp = Factor::new(c, grid.h_ramp);
    let f_tail = Factor::new(c, grid.h_tail);
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut e_prev = 0.0;
    if !visit(0.0, &v, e_prev) {
        return;
    }
    let mut k = 0usize;
    loop {
        let t_prev = grid.time(k);
        if t_prev >= horizon * (1.0 - 1e-12) {
            return;
        }
        k += 1;
        let t = grid.time(k);
        let f = if k <= grid.n_ramp { &f_ramp } else { &f_tail };
        let e = src.at(t);
        for i in 0..n {
            rhs[i] = f.two_c_over_h[i] * v[i];
        }
        rhs[0] -= c.g[0] * v[0];
        for i in 1..n {
            let p = c.parent[i];
            let flow = c.g[i] * (v[i] - v[p]);
            rhs[i] -= flow;
            rhs[p] += flow;
        }
        rhs[0] += c.g[0] * (e_prev + e);
        f.solve(c, &mut rhs, &mut next);
        std::mem::swap(&mut v, &mut next);
        e_prev = e;
        if !visit(t, &v, e) {
            return;
        }
    }
}

/// First vdd/2 crossing of the root voltage, linearly interpolated.
fn t50_run(c: &Circuit, driver: &DriverParams, h: f64, horizon: f64) -> Option<f64> {
    let half = 0.5 * driver.vdd;
    let (mut tp, mut vp) = (0.0, 0.0);
    let mut found = None;
    run(c, driver, Grid::new(driver.ramp_time(), h), horizon, |t, v, _| {
        if v[0] >= half {
            found = Some(if t == 0.0 { 0.0 } else { tp + (half - vp) / (v[0] - vp) * (t - tp) });
            return false;
        }
        tp = t;
        vp = v[0];
        true
    });
    found
}

fn initial_step(net: &RcNetwork, opts: &SimOptions) -> f64 {
    let ramp = net.driver().ramp_time();
    let root_elmore = net.driver().drive_resistance * total_capacitance(net);
    (0.5 * ramp + std::f64::consts::LN_2 * root_elmore) / opts.initial_steps as f64
}

/// Halves the step until t50 settles; returns `(t50, step, converged)`.
fn converge_step(c: &Circuit, net: &RcNetwork, opts: &SimOptions, horizon: f64) -> Result<(f64, f64, bool), SimError> {
    let no_crossing = || SimError::NoCrossing { name: net.name().to_string(), horizon };
    if let Some(h) = opts.fixed_step {
        let t = t50_run(c, net.driver(), h, horizon).ok_or_else(no_crossing)?;
        return Ok((t, h, true));
    }
    let mut h = initial_step(net, opts);
    let mut prev = t50_run(c, net.driver(), h, horizon).ok_or_else(no_crossing)?;
    for _ in 0..opts.max_halvings {
        h *= 0.5;
        let t = t50_run(c, net.driver(), h, horizon).ok_or_else(no_crossing)?;
        if (t - prev).abs() < opts.rel_tol * t {
            return Ok((t, h, true));
        }
        prev = t;
    }
    Ok((prev, h, false))
}

/// Full transient with every node recorded on the final step grid.
pub fn simulate(net: &RcNetwork, opts: &SimOptions) -> Result<TransientResult, SimError> {
    let c = Circuit::from_net(net);
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(net));
    let (t50_root, step, step_converged) = converge_step(&c, net, opts, horizon)?;
    let driver = net.driver();
    let gd = c.g[0];
    let mut times = Vec::new();
    let mut node_voltages = Vec::new();
    let mut charge = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    run(&c, driver, Grid::new(driver.ramp_time(), step), horizon, |t, v, e| {
        let i = gd * (e - v[0]);
        if let Some((tp, ip)) = prev {
            charge += 0.5 * (t - tp) * (i + ip);
        }
        prev = Some((t, i));
        times.push(t);
        node_voltages.push(c.node_group.iter().map(|&g| v[g]).collect());
        true
    });
    Ok(TransientResult { times, node_voltages, t50_root, step, step_converged, delivered_charge: charge })
}

/// Root t50 of the full network on the converged step grid.
pub fn t50_network(net: &RcNetwork, opts: &SimOptions) -> Result<(f64, f64), SimError> {
    let c = Circuit::from_net(net);
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(net));
    let (t, h, _) = converge_step(&c, net, opts, horizon)?;
    Ok((t, h))
}

/// Root t50 of a single capacitor `c` behind the net's driver with step `h`.
pub fn t50_single_cap(driver: &DriverParams, c: f64, h: f64, horizon: f64) -> Option<f64> {
    t50_run(&Circuit::single(driver.drive_resistance, c), driver, h, horizon)
}

/// One bisection state of the oracle search: delays are `t50_cap - t50_net`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketStep {
    pub lo: f64,
    pub hi: f64,
    pub delay_diff_lo: f64,
    pub delay_diff_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrace {
    pub t50_net: f64,
    pub step: f64,
    pub brackets: Vec<BracketStep>,
}

/// Relative bracket width at which the oracle bisection stops.
pub const ORACLE_REL_WIDTH: f64 = 1e-6;

/// Single capacitance whose simulated driver-output t50 equals the network's.
pub fn oracle_ceff(net: &RcNetwork) -> Result<CeffResult, SimError> {
    oracle_ceff_with(net, &SimOptions::default()).map(|(r, _)| r)
}

pub fn oracle_ceff_with(net: &RcNetwork, opts: &SimOptions) -> Result<(CeffResult, OracleTrace), SimError> {
    let driver = net.driver();
    let ct = total_capacitance(net);
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(net));
    let (t50_net, h) = t50_network(net, opts)?;
    // The lumped total is the slowest possible single-cap load; give it room.
    let cap_horizon = horizon.max(5.0 * driver.ramp_time() + 20.0 * driver.drive_resistance * ct);
    let no_crossing = || SimError::NoCrossing { name: net.name().to_string(), horizon: cap_horizon };
    let diff = |c: f64| t50_single_cap(driver, c, h, cap_horizon).map(|t| t - t50_net).ok_or_else(no_crossing);

    let mut trace = OracleTrace { t50_net, step: h, brackets: Vec::new() };
    let result = |ceff: f64, iterations: u32| CeffResult {
        ceff,
        method: CeffMethod::Oracle,
        converged: true,
        failed: false,
        iterations,
        t50: t50_net,
    };
    let d_hi = diff(ct)?;
    if d_hi <= 0.0 {
        return Ok((result(ct, 0), trace));
    }
    let (mut lo, mut hi) = (0.0, ct);
    let mut d_lo = diff(0.0)?;
    let mut d_hi = d_hi;
    let mut iterations = 0;
    while hi - lo > ORACLE_REL_WIDTH * ct {
        trace.brackets.push(BracketStep { lo, hi, delay_diff_lo: d_lo, delay_diff_hi: d_hi });
        let mid = 0.5 * (lo + hi);
        let d = diff(mid)?;
        if d < 0.0 {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
            d_hi = d;
        }
        iterations += 1;
    }
    trace.brackets.push(BracketStep { lo, hi, delay_diff_lo: d_lo, delay_diff_hi: d_hi });
    Ok((result(0.5 * (lo + hi), iterations), trace))
}

/// SPICE deck of the net with a PWL ramp source behind `R_d`.
pub fn spice_deck(net: &RcNetwork, horizon: Option<f64>) -> String {
    let d = net.driver();
    let horizon = horizon.unwrap_or_else(|| default_horizon(net));
    let ground = node_ground_caps(net);
    let node = |i: usize| format!("n{}", net.nodes()[i].id);
    let root = net.topology().root();
    let mut s = String::new();
    let _ = writeln!(s, "* {}", net.name());
    let _ = writeln!(s, "VIN src 0 PWL(0 0 {:e} {:e})", d.ramp_time(), d.vdd);
    let _ = writeln!(s, "RD src {} {:e}", node(root), d.drive_resistance);
    for (k, seg) in net.segments().iter().enumerate() {
        let down = net.topology().downstream_node(k);
        let (up, _) = net.topology().parent(down).expect("segment has an upstream node");
        // SPICE rejects zero-valued resistors; a tiny value keeps the topology.
        let _ = writeln!(s, "R{} {} {} {:e}", seg.id, node(up), node(down), seg.resistance.max(1e-6));
    }
    for (i, &c) in ground.iter().enumerate() {
        if c > 0.0 {
            let _ = writeln!(s, "C{} {} 0 {:e}", net.nodes()[i].id, node(i), c);
        }
    }
    let _ = writeln!(s, ".tran {:e} {:e}", horizon / 10_000.0, horizon);
    let _ = writeln!(s, ".meas tran t50 WHEN V({})={:e} RISE=1", node(root), 0.5 * d.vdd);
    let _ = writeln!(s, ".end");
    s
}
