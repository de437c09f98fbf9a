// SPDX-License-Identifier: Apache-2.0

//! Effective-capacitance modeling for RC interconnect.

pub mod ceff;
pub mod gat;
pub mod graph;
pub mod metrics;
pub mod mor;
pub mod netgen;
pub mod rc;
pub mod sim;
