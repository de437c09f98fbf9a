// SPDX-License-Identifier: Apache-2.0

//! Driving-point admittance moments and three-parameter π reduction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rc::{node_ground_caps, total_capacitance, RcNetwork};

/// Time scale below which a moment ratio is treated as numerically zero.
/// `|y2|/y1` and `sqrt(y3/y1)` both have units of seconds.
pub const DEGENERACY_TIME: f64 = 1e-18;

/// Relative size of a negative C1 that is still attributed to rounding.
pub const C1_CLAMP_REL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MorError {
    #[error("moments are not realizable by an RC load: y1={y1:e}, y2={y2:e}, y3={y3:e}")]
    NonPhysicalMoments { y1: f64, y2: f64, y3: f64 },
}

/// Taylor coefficients of `Y(s) = y1 s + y2 s^2 + y3 s^3 + ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceMoments {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
}

impl AdmittanceMoments {
    pub fn lumped(c: f64) -> Self {
        Self { y1: c, y2: 0.0, y3: 0.0 }
    }

    /// Moments seen through a series resistance `r`.
    pub fn behind_resistance(self, r: f64) -> Self {
        let Self { y1, y2, y3 } = self;
        Self { y1, y2: y2 - r * y1 * y1, y3: y3 - 2.0 * r * y1 * y2 + r * r * y1 * y1 * y1 }
    }

    fn add(self, o: Self) -> Self {
        Self { y1: self.y1 + o.y1, y2: self.y2 + o.y2, y3: self.y3 + o.y3 }
    }
}

/// Bottom-up moment recursion over the RC tree, seen from the driver pin.
pub fn admittance_moments(net: &RcNetwork) -> AdmittanceMoments {
    let topo = net.topology();
    let ground = node_ground_caps(net);
    let mut m: Vec<AdmittanceMoments> = ground.iter().map(|&c| AdmittanceMoments::lumped(c)).collect();
    for &v in topo.preorder()[1..].iter().rev() {
        let (p, s) = topo.parent(v).expect("non-root node");
        let up = m[v].behind_resistance(net.segments()[s].resistance);
        m[p] = m[p].add(up);
    }
    m[topo.root()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiModel {
    pub c1: f64,
    pub c2: f64,
    pub r_pi: f64,
    pub degenerate: bool,
    /// C1 was a rounding-level negative and has been set to zero.
    #[serde(default)]
    pub clamped: bool,
}

impl PiModel {
    pub fn new(c1: f64, c2: f64, r_pi: f64) -> Self {
        Self { c1, c2, r_pi, degenerate: false, clamped: false }
    }

    pub fn lumped(c: f64) -> Self {
        Self { c1: c, c2: 0.0, r_pi: 0.0, degenerate: true, clamped: false }
    }

    pub fn total(&self) -> f64 {
        self.c1 + self.c2
    }

    /// True when the far capacitor is not shielded at all.
    pub fn is_collapsed(&self) -> bool {
        self.r_pi == 0.0 || self.c2 == 0.0
    }

    /// First three admittance moments of the π itself.
    pub fn moments(&self) -> AdmittanceMoments {
        AdmittanceMoments::lumped(self.c1).add(AdmittanceMoments::lumped(self.c2).behind_resistance(self.r_pi))
    }
}

pub fn reduce_to_pi(m: &AdmittanceMoments, c_total: f64) -> Result<PiModel, MorError> {
    let AdmittanceMoments { y1, y2, y3 } = *m;
    let nonphysical = || MorError::NonPhysicalMoments { y1, y2, y3 };
    if !(y1 > 0.0 && y1.is_finite() && y2.is_finite() && y3.is_finite()) {
        return Err(nonphysical());
    }
    let t = DEGENERACY_TIME;
    if y2 > t * y1 || y3 < -t * t * y1 {
        return Err(nonphysical());
    }
    if y2.abs() < t * y1 || y3 < t * t * y1 {
        return Ok(PiModel::lumped(c_total));
    }
    let c2 = y2 * y2 / y3;
    let r_pi = -(y3 * y3) / (y2 * y2 * y2);
    let c1 = y1 - c2;
    if c1 >= 0.0 {
        return Ok(PiModel { c1, c2, r_pi, degenerate: false, clamped: false });
    }
    if -c1 < C1_CLAMP_REL * y1 {
        return Ok(PiModel { c1: 0.0, c2: y1, r_pi, degenerate: false, clamped: true });
    }
    Err(nonphysical())
}

/// Moments plus reduction in one call.
pub fn reduce_network(net: &RcNetwork) -> Result<PiModel, MorError> {
    reduce_to_pi(&admittance_moments(net), total_capacitance(net))
}
