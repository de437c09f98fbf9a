// SPDX-License-Identifier: Apache-2.0

//! Closed-form ramp responses and the iterative charge-matching Ceff
//! heuristic on a π load.
//!
//! The driver is a saturated ramp `e(t) = vdd * min(t, ramp) / ramp` behind a
//! resistance `rd`. Here `ramp` is the full 0-to-vdd duration, see
//! [`DriverParams::ramp_time`].

use serde::{Deserialize, Serialize};

use crate::mor::{reduce_network, MorError, PiModel};
use crate::rc::{DriverParams, RcNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeffMethod {
    Dartu,
    GnnCeff,
    Oracle,
    LumpedFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeffResult {
    pub ceff: f64,
    pub method: CeffMethod,
    pub converged: bool,
    pub failed: bool,
    pub iterations: u32,
    /// 50% crossing of the driver output with `ceff` as its only load.
    pub t50: f64,
}

fn source(vdd: f64, ramp: f64, t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= ramp {
        vdd
    } else {
        vdd * t / ramp
    }
}

/// Voltage on a single capacitor `c` charged through `rd` by the ramp.
pub fn ramp_response_cap(rd: f64, c: f64, ramp: f64, vdd: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let tau = rd * c;
    if t <= ramp {
        vdd / ramp * (t + tau * (-t / tau).exp_m1())
    } else {
        let k = vdd * tau / ramp * -(-ramp / tau).exp_m1();
        vdd - k * (-(t - ramp) / tau).exp()
    }
}

/// Time at which [`ramp_response_cap`] reaches `vdd / 2`.
pub fn t50_cap(rd: f64, c: f64, ramp: f64, vdd: f64) -> f64 {
    let tau = rd * c;
    let half = 0.5 * vdd;
    if ramp_response_cap(rd, c, ramp, vdd, ramp) >= half {
        // Convex and increasing on [0, ramp]: Newton from the right converges
        // monotonically.
        let mut t = ramp;
        for _ in 0..200 {
            let f = vdd / ramp * (t + tau * (-t / tau).exp_m1()) - half;
            let df = -vdd / ramp * (-t / tau).exp_m1();
            let next = t - f / df;
            if !(next < t) || t - next <= 1e-15 * t {
                return next.min(t);
            }
            t = next;
        }
        t
    } else {
        let k = vdd * tau / ramp * -(-ramp / tau).exp_m1();
        ramp + tau * (2.0 * k / vdd).ln()
    }
}

/// 2x2 state matrix of the π circuit and the quantities needed to
/// exponentiate it.
struct PiSystem {
    a: [[f64; 2]; 2],
    l1: f64,
    l2: f64,
    p0: [f64; 2],
}

impl PiSystem {
    fn new(rd: f64, pi: &PiModel) -> Self {
        let (gd, gp) = (1.0 / rd, 1.0 / pi.r_pi);
        let a = [[-(gd + gp) / pi.c1, gp / pi.c1], [gp / pi.c2, -gp / pi.c2]];
        let tr = a[0][0] + a[1][1];
        let det = gd * gp / (pi.c1 * pi.c2);
        let disc = ((a[0][0] - a[1][1]).powi(2) + 4.0 * a[0][1] * a[1][0]).sqrt();
        let l1 = 0.5 * (tr - disc);
        let l2 = det / l1;
        let ct = pi.total();
        let p0 = [-rd * ct, -(rd * ct + pi.r_pi * pi.c2)];
        Self { a, l1, l2, p0 }
    }

    /// `(exp(A t) - I) x` via Sylvester's formula with `expm1` terms.
    fn expm1_apply(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let (l1, l2) = (self.l1, self.l2);
        let e1 = (l1 * t).exp_m1();
        let e2 = (l2 * t).exp_m1();
        let a = &self.a;
        let ax = [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]];
        let d = l1 - l2;
        let mut out = [0.0; 2];
        for i in 0..2 {
            let m2 = ax[i] - l2 * x[i];
            let m1 = ax[i] - l1 * x[i];
            out[i] = (e1 * m2 - e2 * m1) / d;
        }
        out
    }
}

/// Node voltages `(v1, v2)` of a π load (`c1` at the driver pin, `c2` behind
/// `r_pi`) charged through `rd` by the ramp.
pub fn ramp_response_pi(rd: f64, pi: &PiModel, ramp: f64, vdd: f64, t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if pi.is_collapsed() {
        let v = ramp_response_cap(rd, pi.total(), ramp, vdd, t);
        return (v, v);
    }
    if pi.c1 == 0.0 {
        let v2 = ramp_response_cap(rd + pi.r_pi, pi.c2, ramp, vdd, t);
        let e = source(vdd, ramp, t);
        return ((e * pi.r_pi + v2 * rd) / (rd + pi.r_pi), v2);
    }
    let sys = PiSystem::new(rd, pi);
    let alpha = vdd / ramp;
    let ramp_state = |t: f64| {
        let m = sys.expm1_apply(t, sys.p0);
        [alpha * (t - m[0]), alpha * (t - m[1])]
    };
    if t <= ramp {
        let x = ramp_state(t);
        (x[0], x[1])
    } else {
        let xr = ramp_state(ramp);
        let dev = [xr[0] - vdd, xr[1] - vdd];
        let m = sys.expm1_apply(t - ramp, dev);
        (xr[0] + m[0], xr[1] + m[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DartuOptions {
    /// Convergence threshold on successive iterates, relative to C1 + C2.
    pub rel_tol: f64,
    pub max_iterations: u32,
}

impl Default for DartuOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-6, max_iterations: 100 }
    }
}

/// Charge-matching update: the capacitance whose single-cap response holds
/// `charge` at time `t`. `None` when no such value lies in `(0, c_max]`.
fn matching_capacitance(rd: f64, ramp: f64, vdd: f64, t: f64, charge: f64, c_max: f64) -> Option<f64> {
    let f = |c: f64| c * ramp_response_cap(rd, c, ramp, vdd, t) - charge;
    if f(c_max) < 0.0 || charge <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0, c_max);
    let width = 1e-10 * c_max;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Iterative effective capacitance of a π load, starting from the lumped total.
pub fn compute_ceff_dartu(pi: &PiModel, driver: &DriverParams) -> CeffResult {
    compute_ceff_dartu_with(pi, driver, DartuOptions::default())
}

pub fn compute_ceff_dartu_with(pi: &PiModel, driver: &DriverParams, opts: DartuOptions) -> CeffResult {
    let (rd, vdd, ramp) = (driver.drive_resistance, driver.vdd, driver.ramp_time());
    let ct = pi.total();
    let fallback = |iterations| CeffResult {
        ceff: ct,
        method: CeffMethod::LumpedFallback,
        converged: false,
        failed: true,
        iterations,
        t50: t50_cap(rd, ct, ramp, vdd),
    };
    if pi.is_collapsed() {
        return CeffResult {
            ceff: ct,
            method: CeffMethod::Dartu,
            converged: true,
            failed: false,
            iterations: 1,
            t50: t50_cap(rd, ct, ramp, vdd),
        };
    }
    let mut c = ct;
    for it in 1..=opts.max_iterations {
        let t = t50_cap(rd, c, ramp, vdd);
        let (v1, v2) = ramp_response_pi(rd, pi, ramp, vdd, t);
        let charge = pi.c1 * v1 + pi.c2 * v2;
        let Some(next) = matching_capacitance(rd, ramp, vdd, t, charge, ct) else {
            return fallback(it);
        };
        if (next - c).abs() <= opts.rel_tol * ct {
            return CeffResult {
                ceff: next,
                method: CeffMethod::Dartu,
                converged: true,
                failed: false,
                iterations: it,
                t50: t50_cap(rd, next, ramp, vdd),
            };
        }
        c = next;
    }
    fallback(opts.max_iterations)
}

/// Reduce the network to its π model and run the iteration with the net's driver.
pub fn compute_ceff_dartu_net(net: &RcNetwork) -> Result<CeffResult, MorError> {
    let pi = reduce_network(net)?;
    Ok(compute_ceff_dartu(&pi, net.driver()))
}
