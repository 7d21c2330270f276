//! Early Drift Detection Method: monitors the spacing between errors.

use serde::{Deserialize, Serialize};

use super::{check_binary, check_open_unit, DetectorKind, DriftDetector, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EddmConfig {
    /// Errors observed before the test starts.
    pub min_errors: usize,
    /// Warning when the ratio falls below this.
    pub alpha: f64,
    /// Drift when the ratio falls below this.
    pub beta: f64,
}

impl Default for EddmConfig {
    fn default() -> Self {
        Self {
            min_errors: 30,
            alpha: 0.95,
            beta: 0.90,
        }
    }
}

impl EddmConfig {
    pub fn validate(&self) -> Result<()> {
        check_open_unit(self.alpha, "EDDM alpha")?;
        check_open_unit(self.beta, "EDDM beta")?;
        if self.beta > self.alpha {
            return Err(Error::Config("EDDM needs beta <= alpha".into()));
        }
        Ok(())
    }
}

/// EDDM detector.
///
/// Tracks mean p′ and standard deviation s′ of the distance between
/// consecutive errors and the running maximum of p′ + 2s′. The ratio
/// (p′ + 2s′)/max is compared with α (warning) and β (drift) once
/// `min_errors` errors have been seen.
#[derive(Debug, Clone, PartialEq)]
pub struct Eddm {
    config: EddmConfig,
    n: usize,
    errors: usize,
    last_error: usize,
    mean: f64,
    m2: f64,
    max_level: f64,
}

impl Eddm {
    pub fn new(config: EddmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            n: 0,
            errors: 0,
            last_error: 0,
            mean: 0.0,
            m2: 0.0,
            max_level: 0.0,
        })
    }

    /// Mean and population standard deviation of inter-error distances.
    pub fn distance_stats(&self) -> (f64, f64) {
        let var = if self.errors > 0 { self.m2 / self.errors as f64 } else { 0.0 };
        (self.mean, var.sqrt())
    }

    /// (p′ + 2s′) / max(p′ + 2s′), or 1 before any error.
    pub fn ratio(&self) -> f64 {
        let (m, s) = self.distance_stats();
        if self.max_level > 0.0 {
            (m + 2.0 * s) / self.max_level
        } else {
            1.0
        }
    }
}

impl DriftDetector for Eddm {
    fn update(&mut self, x: f64) -> Result<Signal> {
        let error = check_binary(x, "EDDM")?;
        self.n += 1;
        if !error {
            return Ok(Signal::InControl);
        }
        self.errors += 1;
        let distance = (self.n - self.last_error) as f64;
        self.last_error = self.n;
        let delta = distance - self.mean;
        self.mean += delta / self.errors as f64;
        self.m2 += delta * (distance - self.mean);
        let (m, s) = self.distance_stats();
        let level = m + 2.0 * s;
        if level > self.max_level {
            self.max_level = level;
        }
        if self.errors < self.config.min_errors {
            return Ok(Signal::InControl);
        }
        let ratio = level / self.max_level;
        if ratio < self.config.beta {
            self.reset();
            Ok(Signal::Drift)
        } else if ratio < self.config.alpha {
            Ok(Signal::Warning)
        } else {
            Ok(Signal::InControl)
        }
    }

    fn reset(&mut self) {
        self.n = 0;
        self.errors = 0;
        self.last_error = 0;
        self.mean = 0.0;
        self.m2 = 0.0;
        self.max_level = 0.0;
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Eddm
    }
}
