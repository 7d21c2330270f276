//! Drift Detection Method: monitors the error rate and its binomial deviation.

use serde::{Deserialize, Serialize};

use super::{check_binary, DetectorKind, DriftDetector, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdmConfig {
    /// Instances before the test starts.
    pub min_instances: usize,
    /// Multiple of s_min for a warning.
    pub warning_level: f64,
    /// Multiple of s_min for a drift.
    pub drift_level: f64,
}

impl Default for DdmConfig {
    fn default() -> Self {
        Self {
            min_instances: 30,
            warning_level: 2.0,
            drift_level: 3.0,
        }
    }
}

impl DdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_instances == 0 {
            return Err(Error::Config("DDM min_instances must be >= 1".into()));
        }
        if !(self.warning_level > 0.0 && self.drift_level >= self.warning_level) {
            return Err(Error::Config(format!(
                "DDM needs 0 < warning_level <= drift_level, got {} and {}",
                self.warning_level, self.drift_level
            )));
        }
        Ok(())
    }
}

/// DDM detector.
///
/// p_i is the running error rate and s_i = sqrt(p_i(1 − p_i)/i). The pair
/// (p_min, s_min) is taken where p_i + s_i was smallest. Warning when
/// p_i + s_i > p_min + 2·s_min, drift when p_i + s_i > p_min + 3·s_min.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddm {
    config: DdmConfig,
    n: usize,
    errors: usize,
    p: f64,
    s: f64,
    p_min: f64,
    s_min: f64,
}

impl Ddm {
    pub fn new(config: DdmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            n: 0,
            errors: 0,
            p: 0.0,
            s: 0.0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
        })
    }

    pub fn instances(&self) -> usize {
        self.n
    }

    /// (p_i, s_i) after the last update.
    pub fn error_rate(&self) -> (f64, f64) {
        (self.p, self.s)
    }

    /// (p_min, s_min); infinite before the warm-up ends.
    pub fn minimum(&self) -> (f64, f64) {
        (self.p_min, self.s_min)
    }
}

impl DriftDetector for Ddm {
    fn update(&mut self, x: f64) -> Result<Signal> {
        let error = check_binary(x, "DDM")?;
        self.n += 1;
        self.errors += usize::from(error);
        let n = self.n as f64;
        self.p = self.errors as f64 / n;
        self.s = (self.p * (1.0 - self.p) / n).sqrt();
        if self.n < self.config.min_instances {
            return Ok(Signal::InControl);
        }
        let level = self.p + self.s;
        if level <= self.p_min + self.s_min {
            self.p_min = self.p;
            self.s_min = self.s;
        }
        if level > self.p_min + self.config.drift_level * self.s_min {
            self.reset();
            Ok(Signal::Drift)
        } else if level > self.p_min + self.config.warning_level * self.s_min {
            Ok(Signal::Warning)
        } else {
            Ok(Signal::InControl)
        }
    }

    fn reset(&mut self) {
        self.n = 0;
        self.errors = 0;
        self.p = 0.0;
        self.s = 0.0;
        self.p_min = f64::INFINITY;
        self.s_min = f64::INFINITY;
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Ddm
    }
}
