//! Incremental binary classifiers.

use crate::{Error, Result};

/// Smallest per-feature variance used in the Gaussian likelihood.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Binary classifier trained one instance at a time.
pub trait Learner {
    fn predict(&self, x: &[f64]) -> Result<u8>;
    fn update(&mut self, x: &[f64], y: u8) -> Result<()>;
    /// Returns to the untrained state.
    fn reset(&mut self);
}

#[derive(Debug, Clone, PartialEq)]
struct ClassStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl ClassStats {
    fn new(d: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    fn log_likelihood(&self, x: &[f64]) -> f64 {
        let n = self.count as f64;
        self.mean
            .iter()
            .zip(&self.m2)
            .zip(x)
            .map(|((&m, &s), &v)| {
                let var = (s / n).max(VARIANCE_FLOOR);
                -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (v - m) * (v - m) / var)
            })
            .sum()
    }
}

/// Online Gaussian naive Bayes with Laplace-smoothed class priors.
///
/// Per class and feature it keeps a Welford mean and sum of squared
/// deviations; the likelihood uses the population variance floored at
/// [`VARIANCE_FLOOR`]. An untrained model, or an exact posterior tie,
/// predicts `prior_label`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    n_features: usize,
    prior_label: u8,
    classes: [ClassStats; 2],
}

impl GaussianNb {
    pub fn new(n_features: usize) -> Self {
        Self::with_prior(n_features, 0)
    }

    pub fn with_prior(n_features: usize, prior_label: u8) -> Self {
        Self {
            n_features,
            prior_label: prior_label.min(1),
            classes: [ClassStats::new(n_features), ClassStats::new(n_features)],
        }
    }

    /// Per-class (count, means, population variances).
    pub fn class_summary(&self, label: u8) -> (u64, Vec<f64>, Vec<f64>) {
        let c = &self.classes[usize::from(label.min(1))];
        let var = c.m2.iter().map(|s| if c.count > 0 { s / c.count as f64 } else { 0.0 }).collect();
        (c.count, c.mean.clone(), var)
    }

    /// Log posterior (up to a shared constant) of each class; `None` for a
    /// class never seen.
    pub fn log_posteriors(&self, x: &[f64]) -> Result<[Option<f64>; 2]> {
        self.check(x)?;
        let total = (self.classes[0].count + self.classes[1].count) as f64;
        let mut out = [None, None];
        for (k, c) in self.classes.iter().enumerate() {
            if c.count > 0 {
                let prior = ((c.count as f64 + 1.0) / (total + 2.0)).ln();
                out[k] = Some(prior + c.log_likelihood(x));
            }
        }
        Ok(out)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Input(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("feature value {v} is not finite")));
        }
        Ok(())
    }
}

impl Learner for GaussianNb {
    fn predict(&self, x: &[f64]) -> Result<u8> {
        Ok(match self.log_posteriors(x)? {
            [Some(a), Some(b)] if a > b => 0,
            [Some(a), Some(b)] if b > a => 1,
            [Some(_), None] => 0,
            [None, Some(_)] => 1,
            _ => self.prior_label,
        })
    }

    fn update(&mut self, x: &[f64], y: u8) -> Result<()> {
        self.check(x)?;
        if y > 1 {
            return Err(Error::Input(format!("labels must be 0 or 1, got {y}")));
        }
        self.classes[usize::from(y)].push(x);
        Ok(())
    }

    fn reset(&mut self) {
        self.classes = [ClassStats::new(self.n_features), ClassStats::new(self.n_features)];
    }
}
