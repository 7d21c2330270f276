//! Page-Hinkley test for an upward shift in the mean.

use serde::{Deserialize, Serialize};

use super::{check_finite, DetectorKind, DriftDetector, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageHinkleyConfig {
    /// Magnitude of change tolerated without accumulating evidence.
    pub delta: f64,
    /// Alarm threshold λ on m_t − min m.
    pub threshold: f64,
    /// Forgetting factor applied to m_t.
    pub alpha: f64,
    /// Observations before a drift may be signalled.
    pub min_instances: usize,
}

impl Default for PageHinkleyConfig {
    fn default() -> Self {
        Self {
            delta: 0.005,
            threshold: 50.0,
            alpha: 0.9999,
            min_instances: 30,
        }
    }
}

impl PageHinkleyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("PH delta must be >= 0, got {}", self.delta)));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!("PH threshold must be >= 0, got {}", self.threshold)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("PH alpha must be in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Page-Hinkley detector.
///
/// With running mean x̄_t (including x_t), the statistic follows
/// m_t = α·m_{t−1} + (x_t − x̄_t − δ); drift when m_t − min_{s≤t} m_s > λ.
#[derive(Debug, Clone, PartialEq)]
pub struct PageHinkley {
    config: PageHinkleyConfig,
    n: usize,
    mean: f64,
    sum: f64,
    min: f64,
}

impl PageHinkley {
    pub fn new(config: PageHinkleyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            n: 0,
            mean: 0.0,
            sum: 0.0,
            min: f64::INFINITY,
        })
    }

    /// Current m_t.
    pub fn statistic(&self) -> f64 {
        self.sum
    }

    pub fn minimum(&self) -> f64 {
        self.min
    }

    pub fn running_mean(&self) -> f64 {
        self.mean
    }
}

impl DriftDetector for PageHinkley {
    fn update(&mut self, x: f64) -> Result<Signal> {
        check_finite(x, "PH")?;
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
        self.sum = self.config.alpha * self.sum + (x - self.mean - self.config.delta);
        self.min = self.min.min(self.sum);
        if self.n >= self.config.min_instances && self.sum - self.min > self.config.threshold {
            self.reset();
            return Ok(Signal::Drift);
        }
        Ok(Signal::InControl)
    }

    fn reset(&mut self) {
        self.n = 0;
        self.mean = 0.0;
        self.sum = 0.0;
        self.min = f64::INFINITY;
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::PageHinkley
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::drift_indices;

    /// Direct transcription of the recurrence with explicit sums.
    fn oracle_first_drift(xs: &[f64], delta: f64, lambda: f64, alpha: f64, warmup: usize) -> Option<usize> {
        let mut m = Vec::new();
        for t in 0..xs.len() {
            let mean_t = xs[..=t].iter().sum::<f64>() / (t + 1) as f64;
            let prev = m.last().copied().unwrap_or(0.0);
            m.push(alpha * prev + xs[t] - mean_t - delta);
            let min = m.iter().copied().fold(f64::INFINITY, f64::min);
            if t + 1 >= warmup && m[t] - min > lambda {
                return Some(t);
            }
        }
        None
    }

    #[test]
    fn step_matches_recurrence_oracle() {
        let mut xs = vec![0.0; 1000];
        xs.extend(vec![1.0; 200]);
        let mut ph = PageHinkley::new(PageHinkleyConfig::default()).unwrap();
        let got = drift_indices(&mut ph, &xs).unwrap();
        let want = oracle_first_drift(&xs, 0.005, 50.0, 0.9999, 30).unwrap();
        assert_eq!(got.first(), Some(&want));
        assert!((1040..1070).contains(&want), "drift at {want}");

        let mut plain = PageHinkley::new(PageHinkleyConfig { alpha: 1.0, ..Default::default() }).unwrap();
        let got = drift_indices(&mut plain, &xs).unwrap();
        assert_eq!(got.first().copied(), oracle_first_drift(&xs, 0.005, 50.0, 1.0, 30));
    }

    #[test]
    fn zero_threshold_fires_on_first_positive_deviation() {
        let cfg = PageHinkleyConfig {
            threshold: 0.0,
            ..Default::default()
        };
        let mut ph = PageHinkley::new(cfg).unwrap();
        let mut xs = vec![0.0; 40];
        xs.push(0.5);
        assert_eq!(drift_indices(&mut ph, &xs).unwrap(), vec![40]);
    }

    #[test]
    fn constant_stream_long_run() {
        let mut ph = PageHinkley::new(PageHinkleyConfig::default()).unwrap();
        assert!(drift_indices(&mut ph, &vec![0.0; 100_000]).unwrap().is_empty());
    }
}
