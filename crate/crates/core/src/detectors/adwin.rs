//! ADWIN2: adaptive windowing over an exponential histogram.

use serde::{Deserialize, Serialize};

use super::{check_finite, check_open_unit, DetectorKind, DriftDetector, Signal};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdwinConfig {
    /// Confidence δ of the cut test.
    pub delta: f64,
    /// Bucket capacity M per histogram row.
    pub max_buckets: usize,
    /// Smallest sub-window on either side of a cut.
    pub min_window: usize,
    /// Window length below which no cut is tested.
    pub grace_period: usize,
    /// Test for cuts every `clock` observations (1 = every instance).
    pub clock: usize,
}

impl Default for AdwinConfig {
    fn default() -> Self {
        Self {
            delta: 0.002,
            max_buckets: 5,
            min_window: 5,
            grace_period: 10,
            clock: 1,
        }
    }
}

impl AdwinConfig {
    pub fn validate(&self) -> Result<()> {
        check_open_unit(self.delta, "ADWIN delta")?;
        if self.max_buckets < 2 {
            return Err(Error::Config("ADWIN max_buckets must be >= 2".into()));
        }
        if self.min_window == 0 || self.clock == 0 {
            return Err(Error::Config("ADWIN min_window and clock must be >= 1".into()));
        }
        if self.grace_period < 2 * self.min_window {
            return Err(Error::Config("ADWIN grace_period must be >= 2 * min_window".into()));
        }
        Ok(())
    }
}

/// Summary of 2^level consecutive observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub total: f64,
    /// Sum of squared deviations from the bucket mean.
    pub variance: f64,
}

/// ADWIN2 detector.
///
/// Row `i` of the histogram holds buckets of 2^i observations, oldest first;
/// no row holds more than M buckets between updates. Every bucket boundary is
/// a candidate cut W₀·W₁, and a cut fires when
/// |μ̂₀ − μ̂₁| ≥ sqrt(2·m·σ̂²·δ′) + (2/3)·m·δ′ with δ′ = ln(2·ln|W|/δ) and
/// m = 1/(n₀ − c + 1) + 1/(n₁ − c + 1) (c = `min_window`). On drift the
/// oldest buckets are dropped until no cut fires, so the window keeps the
/// recent regime instead of restarting empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Adwin {
    config: AdwinConfig,
    rows: Vec<Vec<Bucket>>,
    width: usize,
    total: f64,
    variance: f64,
    tick: usize,
}

impl Adwin {
    pub fn new(config: AdwinConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            rows: Vec::new(),
            width: 0,
            total: 0.0,
            variance: 0.0,
            tick: 0,
        })
    }

    /// Number of observations in the window.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    /// Population variance of the window.
    pub fn variance(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.variance / self.width as f64
        }
    }

    /// Histogram rows, row `i` holding buckets of 2^i observations, oldest first.
    pub fn rows(&self) -> &[Vec<Bucket>] {
        &self.rows
    }

    pub fn bucket_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    fn insert(&mut self, x: f64) {
        self.width += 1;
        if self.rows.is_empty() {
            self.rows.push(Vec::new());
        }
        self.rows[0].push(Bucket { total: x, variance: 0.0 });
        if self.width > 1 {
            let prev = (self.width - 1) as f64;
            let d = x - self.total / prev;
            self.variance += prev * d * d / self.width as f64;
        }
        self.total += x;
        self.compress();
    }

    fn compress(&mut self) {
        let cap = self.config.max_buckets;
        let mut level = 0;
        while level < self.rows.len() && self.rows[level].len() > cap {
            let a = self.rows[level].remove(0);
            let b = self.rows[level].remove(0);
            let n = (1u64 << level) as f64;
            let d = a.total / n - b.total / n;
            let merged = Bucket {
                total: a.total + b.total,
                variance: a.variance + b.variance + n * n * d * d / (2.0 * n),
            };
            if level + 1 == self.rows.len() {
                self.rows.push(Vec::new());
            }
            self.rows[level + 1].push(merged);
            level += 1;
        }
    }

    /// Drops the oldest bucket and returns its size.
    fn delete_oldest(&mut self) -> usize {
        let level = self.rows.len() - 1;
        let b = self.rows[level].remove(0);
        if self.rows[level].is_empty() {
            self.rows.pop();
        }
        let n1 = 1usize << level;
        self.width -= n1;
        self.total -= b.total;
        if self.width == 0 {
            self.total = 0.0;
            self.variance = 0.0;
        } else {
            let w = self.width as f64;
            let u1 = b.total / n1 as f64;
            let d = u1 - self.total / w;
            self.variance -= b.variance + n1 as f64 * w * d * d / (w + n1 as f64);
            self.variance = self.variance.max(0.0);
        }
        n1
    }

    fn cut_fires(&self, n0: f64, n1: f64, u0: f64, u1: f64) -> bool {
        let c = self.config.min_window as f64;
        let w = self.width as f64;
        let dd = (2.0 * w.ln() / self.config.delta).ln();
        let m = 1.0 / (n0 - c + 1.0) + 1.0 / (n1 - c + 1.0);
        let eps = (2.0 * m * self.variance() * dd).sqrt() + 2.0 / 3.0 * dd * m;
        (u0 / n0 - u1 / n1).abs() >= eps
    }

    /// Scans cuts from the oldest boundary forward; returns true if one fired
    /// (after dropping the oldest bucket).
    fn reduce_once(&mut self) -> bool {
        let min = self.config.min_window;
        let (mut n0, mut n1) = (0usize, self.width);
        let (mut u0, mut u1) = (0.0, self.total);
        for level in (0..self.rows.len()).rev() {
            let size = 1usize << level;
            for (k, b) in self.rows[level].iter().enumerate() {
                if level == 0 && k + 1 == self.rows[0].len() {
                    return false;
                }
                n0 += size;
                n1 -= size;
                u0 += b.total;
                u1 -= b.total;
                if n0 >= min && n1 >= min && self.cut_fires(n0 as f64, n1 as f64, u0, u1) {
                    self.delete_oldest();
                    return true;
                }
            }
        }
        false
    }
}

impl DriftDetector for Adwin {
    fn update(&mut self, x: f64) -> Result<Signal> {
        check_finite(x, "ADWIN")?;
        self.insert(x);
        self.tick += 1;
        if self.tick % self.config.clock != 0 || self.width <= self.config.grace_period {
            return Ok(Signal::InControl);
        }
        let mut drift = false;
        while self.width > self.config.grace_period && self.reduce_once() {
            drift = true;
        }
        Ok(if drift { Signal::Drift } else { Signal::InControl })
    }

    fn reset(&mut self) {
        self.rows.clear();
        self.width = 0;
        self.total = 0.0;
        self.variance = 0.0;
        self.tick = 0;
    }

    fn kind(&self) -> DetectorKind {
        DetectorKind::Adwin
    }
}
