//! Kolmogorov–Smirnov windowing.

use std::collections::VecDeque;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{check_finite, check_open_unit, DetectorKind, DriftDetector, Signal};
use crate::rng::{seeded, Rng};
use crate::{stats, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KswinConfig {
    /// Significance level of the two-sample test.
    pub alpha: f64,
    /// Total window length n.
    pub window_size: usize,
    /// Length r of the recent sub-window.
    pub stat_size: usize,
    /// Compare against a random r-subsample of the older values (true) or
    /// against all n − r of them (false).
    pub subsample: bool,
}

impl Default for KswinConfig {
    fn default() -> Self {
        Self {
            alpha: 0.005,
            window_size: 100,
            stat_size: 30,
            subsample: true,
        }
    }
}

impl KswinConfig {
    pub fn validate(&self) -> Result<()> {
        check_open_unit(self.alpha, "KSWIN alpha")?;
        if self.stat_size >= self.window_size {
            return Err(Error::Config(format!(
                "KSWIN stat_size ({}) must be smaller than window_size ({})",
                self.stat_size, self.window_size
            )));
        }
        if self.stat_size < 10 {
            return Err(Error::Config("KSWIN stat_size must be >= 10".into()));
        }
        if self.subsample && self.window_size - self.stat_size < self.stat_size {
            return Err(Error::Config(
                "KSWIN subsampling needs at least stat_size older values".into(),
            ));
        }
        Ok(())
    }
}

/// KSWIN detector.
///
/// Keeps the last n observations. Once full, the r newest are compared with a
/// seeded uniform r-subsample of the older n − r by the two-sample KS test;
/// drift when the asymptotic p-value is below α. After a drift the window
/// keeps only the r newest values and the generator continues its stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Kswin {
    config: KswinConfig,
    seed: u64,
    rng: Rng,
    window: VecDeque<f64>,
    last_statistic: Option<(f64, f64)>,
}

impl Kswin {
    pub fn new(config: KswinConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            window: VecDeque::with_capacity(config.window_size),
            config,
            seed,
            rng: seeded(seed),
            last_statistic: None,
        })
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    /// (D, p-value) of the most recent test.
    pub fn last_statistic(&self) -> Option<(f64, f64)> {
        self.last_statistic
    }
}

impl DriftDetector for Kswin {
    fn update(&mut self, x: f64) -> Result<Signal> {
        check_finite(x, "KSWIN")?;
        let (n, r) = (self.config.window_size, self.config.stat_size);
        if self.window.len() == n {
            self.window.pop_front();
        }
        self.window.push_back(x);
        if self.window.len() < n {
            return Ok(Signal::InControl);
        }
        let recent: Vec<f64> = self.window.iter().skip(n - r).copied().collect();
        let older: Vec<f64> = if self.config.subsample {
            let mut picks = index::sample(&mut self.rng, n - r, r).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| self.window[i]).collect()
        } else {
            self.window.iter().take(n - r).copied().collect()
        };
        let d = stats::ks_two_sample(&older, &recent);
        let p = stats::ks_two_sample_p(d, older.len(), recent.len());
        self.last_statistic = Some((d, p));
        if p < self.config.alpha {
            self.window.drain(..n - r);
            return Ok(Signal::Drift);
        }
        Ok(Signal::InControl)
    }

    fn reset(&mut self) {
        self.window.clear();
        self.rng = seeded(self.seed);
        self.last_statistic = None;
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Kswin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::run_detector;
    use crate::streamgen::{sample_distribution, DistributionSpec};

    #[test]
    fn disjoint_regimes_drift_with_unit_distance() {
        let mut xs = sample_distribution(&DistributionSpec::Normal { mean: 0.0, std: 1.0 }, 70, 1)
            .unwrap()
            .remove(0);
        xs.extend(
            sample_distribution(&DistributionSpec::Normal { mean: 10.0, std: 1.0 }, 30, 2)
                .unwrap()
                .remove(0),
        );
        assert!(xs[..70].iter().cloned().fold(f64::MIN, f64::max) < xs[70..].iter().cloned().fold(f64::MAX, f64::min));
        let mut k = Kswin::new(KswinConfig::default(), 5).unwrap();
        let out = run_detector(&mut k, &xs).unwrap();
        assert_eq!(out[99].signal, Signal::Drift);
        let (d, p) = k.last_statistic().unwrap();
        assert_eq!(d, 1.0);
        assert!(p < 1e-6);
        assert_eq!(k.window().len(), 30);
        assert!(out[..99].iter().all(|o| o.signal == Signal::InControl));
    }

    #[test]
    fn constant_window_never_drifts() {
        let mut k = Kswin::new(KswinConfig::default(), 0).unwrap();
        let out = run_detector(&mut k, &[3.0; 500]).unwrap();
        assert!(out.iter().all(|o| o.signal == Signal::InControl));
        assert_eq!(k.last_statistic().unwrap().0, 0.0);
    }

    #[test]
    fn full_comparison_mode() {
        let cfg = KswinConfig {
            subsample: false,
            ..Default::default()
        };
        let mut k = Kswin::new(cfg, 0).unwrap();
        let mut xs = vec![0.0; 70];
        xs.extend(vec![1.0; 30]);
        let out = run_detector(&mut k, &xs).unwrap();
        assert_eq!(out[99].signal, Signal::Drift);
    }

    #[test]
    fn invalid_sizes() {
        let bad = KswinConfig {
            stat_size: 100,
            ..Default::default()
        };
        assert!(matches!(Kswin::new(bad, 0), Err(Error::Config(_))));
    }
}
