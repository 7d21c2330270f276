//! Hoeffding drift detection on plain running averages.

use serde::{Deserialize, Serialize};

use super::{check_finite, check_open_unit, check_unit, DetectorKind, DriftDetector, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HddmAConfig {
    pub warning_confidence: f64,
    pub drift_confidence: f64,
}

impl Default for HddmAConfig {
    fn default() -> Self {
        Self {
            warning_confidence: 0.005,
            drift_confidence: 0.001,
        }
    }
}

impl HddmAConfig {
    pub fn validate(&self) -> Result<()> {
        check_open_unit(self.warning_confidence, "HDDM_A warning_confidence")?;
        if !(self.drift_confidence > 0.0 && self.drift_confidence <= 1.0) {
            return Err(Error::Config(format!(
                "HDDM_A drift_confidence must be in (0, 1], got {}",
                self.drift_confidence
            )));
        }
        Ok(())
    }
}

/// Hoeffding bound for the difference of a prefix mean (n_cut samples) and the
/// overall mean (n samples) of [0, 1] data at confidence `alpha`.
pub(crate) fn hoeffding_gap(n_cut: f64, n: f64, alpha: f64) -> f64 {
    let m = (n - n_cut) / (n_cut * n);
    (m / 2.0 * (1.0 / alpha).ln()).sqrt()
}

/// HDDM with averages (one-sided: detects increases).
///
/// The cut point is the prefix whose mean plus its own Hoeffding bound is
/// smallest. Drift when the overall mean exceeds the cut mean by more than
/// ε = sqrt((1/n_cut − 1/n)/2 · ln(1/α)).
#[derive(Debug, Clone, PartialEq)]
pub struct HddmA {
    config: HddmAConfig,
    n: u64,
    total: f64,
    n_cut: u64,
    total_cut: f64,
}

impl HddmA {
    pub fn new(config: HddmAConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            n: 0,
            total: 0.0,
            n_cut: 0,
            total_cut: 0.0,
        })
    }

    /// (samples, sum) of the current cut prefix.
    pub fn cut(&self) -> (u64, f64) {
        (self.n_cut, self.total_cut)
    }

    fn mean_increased(&self, alpha: f64) -> bool {
        if self.n_cut == self.n || self.n_cut == 0 {
            return false;
        }
        let (nc, n) = (self.n_cut as f64, self.n as f64);
        let gap = self.total / n - self.total_cut / nc;
        gap > hoeffding_gap(nc, n, alpha)
    }
}

fn bound(n: f64, alpha: f64) -> f64 {
    (1.0 / (2.0 * n) * (1.0 / alpha).ln()).sqrt()
}

impl DriftDetector for HddmA {
    fn update(&mut self, x: f64) -> Result<Signal> {
        check_finite(x, "HDDM_A")?;
        check_unit(x, "HDDM_A")?;
        self.n += 1;
        self.total += x;
        if self.n_cut == 0 {
            self.n_cut = self.n;
            self.total_cut = self.total;
        }
        let alpha = self.config.drift_confidence;
        let cut_level = self.total_cut / self.n_cut as f64 + bound(self.n_cut as f64, alpha);
        let level = self.total / self.n as f64 + bound(self.n as f64, alpha);
        if level <= cut_level {
            self.n_cut = self.n;
            self.total_cut = self.total;
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
        self.n = 0;
        self.total = 0.0;
        self.n_cut = 0;
        self.total_cut = 0.0;
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::HddmA
    }
}
