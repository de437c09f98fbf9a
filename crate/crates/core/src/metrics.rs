// SPDX-License-Identifier: Apache-2.0

//! Accuracy metrics against oracle labels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{what}: {left} predictions against {right} labels")]
    LengthMismatch { what: &'static str, left: usize, right: usize },
    #[error("label for `{0}` is not positive")]
    NonPositiveLabel(String),
}

/// Absolute errors in farads, relative errors in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub meae_f: f64,
    pub maae_f: f64,
    pub meaer_pct: f64,
    pub maaer_pct: f64,
}

impl ErrorStats {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut s = Self::default();
        let (mut abs_sum, mut rel_sum) = (0.0, 0.0);
        for (pred, label) in pairs {
            let abs = (pred - label).abs();
            let rel = 100.0 * abs / label;
            s.count += 1;
            abs_sum += abs;
            rel_sum += rel;
            s.maae_f = s.maae_f.max(abs);
            s.maaer_pct = s.maaer_pct.max(rel);
        }
        if s.count > 0 {
            s.meae_f = abs_sum / s.count as f64;
            s.meaer_pct = rel_sum / s.count as f64;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohorts {
    pub failed: ErrorStats,
    pub non_failed: ErrorStats,
    /// Share of nets the baseline flagged as failed, in percent.
    pub fail_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub all: ErrorStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohorts: Option<Cohorts>,
}

/// One evaluated net: predicted and label capacitance in farads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub name: String,
    pub pred: f64,
    pub label: f64,
}

pub fn check_lengths(what: &'static str, left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        return Err(MetricsError::LengthMismatch { what, left, right });
    }
    Ok(())
}

/// Metrics over all samples, split by `failed` flags when given.
pub fn evaluate(samples: &[Sample], failed: Option<&[bool]>) -> Result<EvalReport, MetricsError> {
    if let Some(s) = samples.iter().find(|s| !(s.label > 0.0)) {
        return Err(MetricsError::NonPositiveLabel(s.name.clone()));
    }
    let pairs = |keep: &dyn Fn(usize) -> bool| {
        ErrorStats::from_pairs(samples.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, s)| (s.pred, s.label)))
    };
    let all = pairs(&|_| true);
    let cohorts = match failed {
        None => None,
        Some(flags) => {
            check_lengths("baseline", flags.len(), samples.len())?;
            let n_failed = flags.iter().filter(|&&f| f).count();
            Some(Cohorts {
                failed: pairs(&|i| flags[i]),
                non_failed: pairs(&|i| !flags[i]),
                fail_pct: if samples.is_empty() { 0.0 } else { 100.0 * n_failed as f64 / samples.len() as f64 },
            })
        }
    };
    Ok(EvalReport { all, cohorts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(pred: f64, label: f64) -> Sample {
        Sample { name: "n".into(), pred, label }
    }

    #[test]
    fn exact_predictions_score_zero() {
        let r = evaluate(&[s(1e-15, 1e-15), s(2e-15, 2e-15)], None).unwrap();
        assert_eq!(r.all, ErrorStats { count: 2, ..Default::default() });
    }

    #[test]
    fn single_pair_definition() {
        let r = evaluate(&[s(9e-15, 10e-15)], None).unwrap();
        assert!((r.all.meae_f - 1e-15).abs() < 1e-27);
        assert!((r.all.meaer_pct - 10.0).abs() < 1e-9);
    }

    #[test]
    fn cohorts_split_by_flag() {
        let samples = [s(9e-15, 10e-15), s(20e-15, 10e-15), s(10e-15, 10e-15)];
        let r = evaluate(&samples, Some(&[false, true, false])).unwrap();
        let c = r.cohorts.unwrap();
        assert_eq!((c.failed.count, c.non_failed.count), (1, 2));
        assert!((c.failed.meaer_pct - 100.0).abs() < 1e-9);
        assert!((c.non_failed.meaer_pct - 5.0).abs() < 1e-9);
        assert!(r.all.maae_f >= r.all.meae_f && r.all.maaer_pct >= r.all.meaer_pct);
        assert!(matches!(evaluate(&samples, Some(&[true])), Err(MetricsError::LengthMismatch { .. })));
    }
}
