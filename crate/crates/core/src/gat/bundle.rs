// SPDX-License-Identifier: Apache-2.0

//! Weight bundle file: one line of JSON header followed by a raw payload of
//! little-endian `f32` values.
//!
//! The header lists every tensor as `{name, shape, offset, len}` with offsets
//! counted in `f32` elements from the start of the payload, and carries the
//! SHA-256 of the payload bytes. Tensor names:
//!
//! | name | shape |
//! |---|---|
//! | `conv{l}.lin.weight` | `[heads*channels, in]` |
//! | `conv{l}.att_src`, `conv{l}.att_dst` | `[heads, channels]` |
//! | `conv{l}.bias` | `[heads*channels]` |
//! | `aggr.gate.weight` / `aggr.gate.bias` | `[1, width]` / `[1]` |
//! | `aggr.nn.weight` / `aggr.nn.bias` | `[width, width]` / `[width]` |
//! | `mlp.{k}.weight` / `mlp.{k}.bias` | `[out, in]` / `[out]` |
//!
//! `l` counts from 1, `k` from 0, and `width = heads * channels`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{NormStats, FEATURE_COUNT, FEATURE_ORDER};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle header is malformed: {0}")]
    Malformed(String),
    #[error("bundle format version {0} is not supported (expected {BUNDLE_FORMAT_VERSION})")]
    VersionUnsupported(u32),
    #[error("bundle payload does not match its hash")]
    HashMismatch,
    #[error("tensor `{name}`: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("bundle feature order {found:?} does not match {expected:?}")]
    FeatureOrderMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("unsupported architecture: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub conv_layers: usize,
    pub conv_channels: usize,
    pub heads: usize,
    pub linear_layers: usize,
    pub linear_channels: usize,
    pub activation: String,
    #[serde(rename = "final")]
    pub final_activation: String,
    pub in_features: usize,
    pub negative_slope: f64,
    pub concat: bool,
    pub self_loops: bool,
}

impl Default for Descriptor {
    fn default() -> Self {
        Self {
            conv_layers: 3,
            conv_channels: 32,
            heads: 12,
            linear_layers: 3,
            linear_channels: 64,
            activation: "ELU".into(),
            final_activation: "Sigmoid".into(),
            in_features: FEATURE_COUNT,
            negative_slope: 0.2,
            concat: true,
            self_loops: true,
        }
    }
}

impl Descriptor {
    pub fn width(&self) -> usize {
        self.heads * self.conv_channels
    }

    /// Every tensor the descriptor implies, in payload order.
    pub fn expected_tensors(&self) -> Vec<(String, Vec<usize>)> {
        let w = self.width();
        let mut t = Vec::new();
        for l in 1..=self.conv_layers {
            let input = if l == 1 { self.in_features } else { w };
            t.push((format!("conv{l}.lin.weight"), vec![w, input]));
            t.push((format!("conv{l}.att_src"), vec![self.heads, self.conv_channels]));
            t.push((format!("conv{l}.att_dst"), vec![self.heads, self.conv_channels]));
            t.push((format!("conv{l}.bias"), vec![w]));
        }
        t.push(("aggr.gate.weight".into(), vec![1, w]));
        t.push(("aggr.gate.bias".into(), vec![1]));
        t.push(("aggr.nn.weight".into(), vec![w, w]));
        t.push(("aggr.nn.bias".into(), vec![w]));
        for k in 0..self.linear_layers {
            let input = if k == 0 { w } else { self.linear_channels };
            let out = if k + 1 == self.linear_layers { 1 } else { self.linear_channels };
            t.push((format!("mlp.{k}.weight"), vec![out, input]));
            t.push((format!("mlp.{k}.bias"), vec![out]));
        }
        t
    }

    pub fn parameter_count(&self) -> usize {
        self.expected_tensors().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    fn check_supported(&self) -> Result<(), BundleError> {
        let bad = |m: String| Err(BundleError::Unsupported(m));
        if !self.activation.eq_ignore_ascii_case("elu") {
            return bad(format!("activation {}", self.activation));
        }
        if !self.final_activation.eq_ignore_ascii_case("sigmoid") {
            return bad(format!("final activation {}", self.final_activation));
        }
        if !self.concat || !self.self_loops {
            return bad("heads must be concatenated with self-loops added".into());
        }
        if self.conv_layers == 0 || self.linear_layers == 0 || self.heads == 0 || self.conv_channels == 0 {
            return bad("layer counts and widths must be positive".into());
        }
        if self.in_features != FEATURE_COUNT {
            return bad(format!("{} input features, expected {FEATURE_COUNT}", self.in_features));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleHeader {
    pub format_version: u32,
    pub descriptor: Descriptor,
    pub norm_stats: NormStats,
    pub tensors: Vec<TensorEntry>,
    pub payload_len: usize,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub descriptor: Descriptor,
    pub norm_stats: NormStats,
    tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
}

impl WeightBundle {
    /// Builds a bundle from named tensors, checking them against the descriptor.
    pub fn new(
        descriptor: Descriptor,
        norm_stats: NormStats,
        tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
    ) -> Result<Self, BundleError> {
        descriptor.check_supported()?;
        if !norm_stats.has_standard_order() {
            return Err(BundleError::FeatureOrderMismatch {
                expected: FEATURE_ORDER.iter().map(|s| s.to_string()).collect(),
                found: norm_stats.feature_order.clone(),
            });
        }
        for (name, expected) in descriptor.expected_tensors() {
            let found = tensors.get(&name).map(|(s, _)| s.clone()).unwrap_or_default();
            if found != expected {
                return Err(BundleError::ShapeMismatch { name, expected, found });
            }
            let (shape, data) = &tensors[&name];
            if data.len() != shape.iter().product::<usize>() {
                return Err(BundleError::Malformed(format!("tensor `{name}` length does not match its shape")));
            }
        }
        if tensors.len() != descriptor.expected_tensors().len() {
            let extra = tensors.keys().find(|k| !descriptor.expected_tensors().iter().any(|(n, _)| n == *k));
            return Err(BundleError::Malformed(format!("unexpected tensor {extra:?}")));
        }
        Ok(Self { descriptor, norm_stats, tensors })
    }

    /// Glorot-uniform weights, zero biases and small attention vectors.
    pub fn random(descriptor: Descriptor, norm_stats: NormStats, seed: u64) -> Result<Self, BundleError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in descriptor.expected_tensors() {
            let n: usize = shape.iter().product();
            let limit = if name.ends_with(".weight") {
                (6.0 / (shape[0] + shape[1]) as f64).sqrt()
            } else if name.contains(".att_") {
                (6.0 / (1 + shape[1]) as f64).sqrt()
            } else {
                0.1
            };
            let data = (0..n).map(|_| rng.gen_range(-limit..limit) as f32).collect();
            tensors.insert(name, (shape, data));
        }
        Self::new(descriptor, norm_stats, tensors)
    }

    pub fn tensor(&self, name: &str) -> &[f32] {
        &self.tensors[name].1
    }

    pub fn shape(&self, name: &str) -> &[usize] {
        &self.tensors[name].0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        let mut entries = Vec::new();
        let mut offset = 0;
        for (name, shape) in self.descriptor.expected_tensors() {
            let data = self.tensor(&name);
            for v in data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            entries.push(TensorEntry { name, shape, offset, len: data.len() });
            offset += data.len();
        }
        let header = BundleHeader {
            format_version: BUNDLE_FORMAT_VERSION,
            descriptor: self.descriptor.clone(),
            norm_stats: self.norm_stats.clone(),
            tensors: entries,
            payload_len: payload.len(),
            payload_sha256: hex::encode(Sha256::digest(&payload)),
        };
        let mut out = serde_json::to_vec(&header).expect("headers always serialize");
        out.push(b'\n');
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| BundleError::Malformed("missing header line".into()))?;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| BundleError::Malformed(e.to_string()))?;
        let version = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != BUNDLE_FORMAT_VERSION {
            return Err(BundleError::VersionUnsupported(version));
        }
        let header: BundleHeader = serde_json::from_value(value).map_err(|e| BundleError::Malformed(e.to_string()))?;
        let payload = &bytes[nl + 1..];
        if payload.len() != header.payload_len || hex::encode(Sha256::digest(payload)) != header.payload_sha256 {
            return Err(BundleError::HashMismatch);
        }
        let floats: Vec<f32> = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let mut tensors = BTreeMap::new();
        for e in header.tensors {
            if e.len != e.shape.iter().product::<usize>() || e.offset + e.len > floats.len() {
                return Err(BundleError::Malformed(format!("tensor `{}` lies outside the payload", e.name)));
            }
            tensors.insert(e.name, (e.shape, floats[e.offset..e.offset + e.len].to_vec()));
        }
        Self::new(header.descriptor, header.norm_stats, tensors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BundleError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BundleError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
