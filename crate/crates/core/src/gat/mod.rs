// SPDX-License-Identifier: Apache-2.0

//! Graph attention network inference.

pub mod bundle;
pub mod forward;

pub use bundle::{BundleError, Descriptor, WeightBundle};
pub use forward::{predict, Batch, ForwardTrace, Model, Prediction};
