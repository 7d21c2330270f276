//! Prequential error and drift-detection quality metrics.

use serde::{Deserialize, Serialize};

use crate::streamgen::DriftSpec;
use crate::{Error, Result};

/// Default acceptable-detection interval for drifts of width zero.
pub const DEFAULT_ADI_FLOOR: usize = 250;

/// Running mean of losses, e_i = ((i − 1)·e_{i−1} + L_i)/i.
pub fn prequential_error(losses: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(losses.len());
    let mut e = 0.0;
    for (k, &l) in losses.iter().enumerate() {
        let i = (k + 1) as f64;
        e = ((i - 1.0) * e + l) / i;
        out.push(e);
    }
    out
}

/// 1 − final prequential error.
pub fn accuracy(losses: &[f64]) -> Result<f64> {
    prequential_error(losses)
        .last()
        .map(|e| 1.0 - e)
        .ok_or_else(|| Error::Input("accuracy of an empty trace".into()))
}

/// Acceptable detection interval for a drift of the given width.
pub fn adi(width: usize, floor: usize) -> usize {
    (4 * width).max(floor)
}

/// Detection quality against the true drifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// Mean delay from drift start to its first true detection; absent when
    /// no drift was detected.
    pub add: Option<f64>,
    /// True detections over all detections (0 without detections).
    pub tpr: f64,
    /// True detections over actual drifts; absent without actual drifts.
    pub tpd: Option<f64>,
    /// Actual drifts with at least one true detection.
    pub drift_count: usize,
    pub true_detections: usize,
    pub false_detections: usize,
    /// ADI used for each actual drift.
    pub adi: Vec<usize>,
}

/// Scores `detected` (sorted instance indices) against `truth`.
///
/// A detection d is true for drift p when p < d ≤ p + ADI, with
/// ADI = max(4·width, `adi_floor`). Each detection is credited to one drift:
/// the earliest covering drift that has no true detection yet, otherwise the
/// earliest covering drift.
pub fn detection_metrics(detected: &[usize], truth: &DriftSpec, adi_floor: usize) -> Result<DetectionMetrics> {
    if detected.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Input("detections must be sorted".into()));
    }
    let adis: Vec<usize> = truth.widths.iter().map(|&w| adi(w, adi_floor)).collect();
    let mut first_hit: Vec<Option<usize>> = vec![None; truth.positions.len()];
    let mut true_detections = 0;
    for &d in detected {
        let covering: Vec<usize> = truth
            .positions
            .iter()
            .zip(&adis)
            .enumerate()
            .filter(|(_, (&p, &a))| p < d && d <= p + a)
            .map(|(k, _)| k)
            .collect();
        let chosen = covering
            .iter()
            .copied()
            .find(|&k| first_hit[k].is_none())
            .or_else(|| covering.first().copied());
        if let Some(k) = chosen {
            true_detections += 1;
            first_hit[k].get_or_insert(d);
        }
    }
    let delays: Vec<f64> = first_hit
        .iter()
        .zip(&truth.positions)
        .filter_map(|(h, &p)| h.map(|d| (d - p) as f64))
        .collect();
    let drift_count = delays.len();
    Ok(DetectionMetrics {
        add: (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64),
        tpr: if detected.is_empty() {
            0.0
        } else {
            true_detections as f64 / detected.len() as f64
        },
        tpd: (!truth.positions.is_empty()).then(|| true_detections as f64 / truth.positions.len() as f64),
        drift_count,
        true_detections,
        false_detections: detected.len() - true_detections,
        adi: adis,
    })
}

/// +1 for instances inside (p, p + ADI] of some drift, −1 elsewhere.
pub fn drift_region_labels(len: usize, truth: &DriftSpec, adi_floor: usize) -> Vec<i8> {
    let mut y = vec![-1i8; len];
    for (&p, &w) in truth.positions.iter().zip(&truth.widths) {
        let end = (p + adi(w, adi_floor)).min(len.saturating_sub(1));
        for v in y.iter_mut().take(end + 1).skip(p + 1) {
            *v = 1;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_drift() -> DriftSpec {
        DriftSpec::gradual(vec![5000], vec![250])
    }

    #[test]
    fn prequential_examples() {
        let e = prequential_error(&[1.0, 0.0, 1.0]);
        assert_eq!(e[0], 1.0);
        assert_eq!(e[1], 0.5);
        assert!((e[2] - 2.0 / 3.0).abs() < 1e-15);
        assert!(prequential_error(&[0.0; 10]).iter().all(|&v| v == 0.0));
        assert!((accuracy(&[1.0, 0.0, 1.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&[0.0; 4]).unwrap(), 1.0);
        assert!(accuracy(&[]).is_err());
    }

    #[test]
    fn detection_examples() {
        let m = detection_metrics(&[5600], &one_drift(), 250).unwrap();
        assert_eq!((m.add, m.tpr, m.tpd, m.drift_count), (Some(600.0), 1.0, Some(1.0), 1));
        assert_eq!(m.adi, vec![1000]);

        let m = detection_metrics(&[5600, 5800], &one_drift(), 250).unwrap();
        assert_eq!((m.add, m.tpr, m.tpd, m.drift_count), (Some(600.0), 1.0, Some(2.0), 1));

        let m = detection_metrics(&[300], &one_drift(), 250).unwrap();
        assert_eq!((m.add, m.tpr, m.tpd, m.drift_count), (None, 0.0, Some(0.0), 0));
    }

    #[test]
    fn abrupt_drifts_use_the_floor() {
        let truth = DriftSpec::abrupt(vec![1000]);
        let m = detection_metrics(&[1250], &truth, 250).unwrap();
        assert_eq!(m.true_detections, 1);
        let m = detection_metrics(&[1000, 1251], &truth, 250).unwrap();
        assert_eq!(m.true_detections, 0);
    }

    #[test]
    fn overlapping_intervals_prefer_unfilled_drift() {
        let truth = DriftSpec::abrupt(vec![1000, 1100]);
        let m = detection_metrics(&[1050, 1150], &truth, 250).unwrap();
        assert_eq!(m.drift_count, 2);
        assert_eq!(m.add, Some(50.0));
    }

    #[test]
    fn perfect_detector() {
        let truth = DriftSpec::gradual(vec![100, 2000, 5000], vec![10, 0, 300]);
        let detected: Vec<usize> = truth.positions.iter().map(|p| p + 1).collect();
        let m = detection_metrics(&detected, &truth, 250).unwrap();
        assert_eq!((m.add, m.tpr, m.tpd, m.drift_count), (Some(1.0), 1.0, Some(1.0), 3));
    }

    #[test]
    fn unsorted_and_empty_truth() {
        assert!(detection_metrics(&[5, 3], &one_drift(), 250).is_err());
        let m = detection_metrics(&[10], &DriftSpec::none(), 250).unwrap();
        assert_eq!((m.tpd, m.false_detections, m.tpr), (None, 1, 0.0));
    }

    #[test]
    fn region_labels() {
        let y = drift_region_labels(10, &DriftSpec::abrupt(vec![3]), 2);
        assert_eq!(y, vec![-1, -1, -1, -1, 1, 1, -1, -1, -1, -1]);
    }
}
