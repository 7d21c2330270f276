//! Hoeffding drift detection on exponentially weighted averages.

use serde::{Deserialize, Serialize};

use super::{check_finite, check_open_unit, check_unit, DetectorKind, DriftDetector, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HddmWConfig {
    /// EWMA weight of the newest observation.
    pub lambda: f64,
    pub warning_confidence: f64,
    pub drift_confidence: f64,
}

impl Default for HddmWConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            warning_confidence: 0.005,
            drift_confidence: 0.001,
        }
    }
}

impl HddmWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("HDDM_W lambda must be in (0, 1], got {}", self.lambda)));
        }
        check_open_unit(self.warning_confidence, "HDDM_W warning_confidence")?;
        check_open_unit(self.drift_confidence, "HDDM_W drift_confidence")
    }

    /// λ = 1 turns every estimator into the latest observation.
    pub fn is_degenerate(&self) -> bool {
        self.lambda >= 1.0
    }
}

/// EWMA estimate plus Σ wᵢ², the weighted-sample term of the McDiarmid bound.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ewma {
    value: f64,
    weight_sq: f64,
}

impl Ewma {
    fn push(slot: &mut Option<Ewma>, x: f64, lambda: f64) {
        let keep = 1.0 - lambda;
        *slot = Some(match *slot {
            None => Ewma { value: x, weight_sq: 1.0 },
            Some(e) => Ewma {
                value: lambda * x + keep * e.value,
                weight_sq: lambda * lambda + keep * keep * e.weight_sq,
            },
        });
    }
}

/// HDDM with weighted averages (one-sided: detects increases).
///
/// The total EWMA is split at the point where its value plus bound was
/// smallest; observations after the split feed a second EWMA. Drift when the
/// second exceeds the first by sqrt((Σw₁² + Σw₂²)/2 · ln(1/α)).
#[derive(Debug, Clone, PartialEq)]
pub struct HddmW {
    config: HddmWConfig,
    total: Option<Ewma>,
    before: Option<Ewma>,
    after: Option<Ewma>,
    cut_level: f64,
}

impl HddmW {
    pub fn new(config: HddmWConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            total: None,
            before: None,
            after: None,
            cut_level: f64::INFINITY,
        })
    }

    /// Current EWMA of all observations since the last reset.
    pub fn estimate(&self) -> Option<f64> {
        self.total.map(|e| e.value)
    }

    fn mean_increased(&self, alpha: f64) -> bool {
        match (self.before, self.after) {
            (Some(b), Some(a)) => {
                let bound = ((b.weight_sq + a.weight_sq) * (1.0 / alpha).ln() / 2.0).sqrt();
                a.value - b.value > bound
            }
            _ => false,
        }
    }
}

impl DriftDetector for HddmW {
    fn update(&mut self, x: f64) -> Result<Signal> {
        check_finite(x, "HDDM_W")?;
        check_unit(x, "HDDM_W")?;
        let lambda = self.config.lambda;
        Ewma::push(&mut self.total, x, lambda);
        let total = self.total.expect("just pushed");
        let eps = (total.weight_sq * (1.0 / self.config.drift_confidence).ln() / 2.0).sqrt();
        if total.value + eps < self.cut_level {
            self.cut_level = total.value + eps;
            self.before = Some(total);
            self.after = None;
        } else {
            Ewma::push(&mut self.after, x, lambda);
        }
        if self.mean_increased(self.config.drift_confidence) {
            self.reset();
            Ok(Signal::Drift)
        } else if self.mean_increased(self.config.warning_confidence) {
            Ok(Signal::Warning)
        } else {
            Ok(Signal::InControl)
        }
    }

    fn reset(&mut self) {
        self.total = None;
        self.before = None;
        self.after = None;
        self.cut_level = f64::INFINITY;
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::HddmW
    }
}
