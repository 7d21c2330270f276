//! Distribution identification by one-sample KS distance.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, Normal};

use crate::streamgen::{cauchy_cdf, DistributionSpec, Family};
use crate::{stats, Error, Result};

/// Below this many observations a fit is flagged low-confidence.
pub const MIN_FIT_SAMPLES: usize = 30;

/// One fitted family and its KS distance to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCandidate {
    pub params: DistributionSpec,
    pub ks_distance: f64,
}

/// Best-fitting family; `ranking` holds every fitted candidate by ascending
/// distance, winner first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFit {
    pub family: Family,
    pub params: DistributionSpec,
    pub fit_statistic: f64,
    pub ranking: Vec<FitCandidate>,
    pub low_confidence: bool,
}

fn is_count_data(sorted: &[f64]) -> bool {
    sorted.iter().all(|&x| x >= 0.0 && x.fract() == 0.0 && x < 1e15)
}

fn fit_candidates(sorted: &[f64]) -> Vec<FitCandidate> {
    let mut out = Vec::new();
    let n = sorted.len();
    let mean = stats::mean(sorted).unwrap_or(0.0);
    let var = stats::variance(sorted).unwrap_or(0.0);
    let std = var.sqrt();

    if std > 0.0 {
        if let Ok(d) = Normal::new(mean, std) {
            out.push(FitCandidate {
                params: DistributionSpec::Normal { mean, std },
                ks_distance: stats::ks_distance_continuous(sorted, |x| d.cdf(x)),
            });
        }
        let half = 3f64.sqrt() * std;
        let (low, high) = (mean - half, mean + half);
        out.push(FitCandidate {
            params: DistributionSpec::Uniform { low, high },
            ks_distance: stats::ks_distance_continuous(sorted, |x| ((x - low) / (high - low)).clamp(0.0, 1.0)),
        });
    }

    if sorted[0] >= 0.0 && mean > 0.0 {
        if let Ok(d) = ChiSquared::new(mean) {
            out.push(FitCandidate {
                params: DistributionSpec::ChiSquared { df: mean },
                ks_distance: stats::ks_distance_continuous(sorted, |x| d.cdf(x)),
            });
        }
    }

    let location = stats::quantile_sorted(sorted, 0.5);
    let scale = 0.5 * (stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25));
    if scale > 0.0 {
        out.push(FitCandidate {
            params: DistributionSpec::Cauchy { location, scale },
            ks_distance: stats::ks_distance_continuous(sorted, |x| cauchy_cdf(x, location, scale)),
        });
    }

    if n > 0 && is_count_data(sorted) && mean > 0.0 {
        let p0 = 1.0 - var / mean;
        if p0 > 0.0 && p0 <= 1.0 {
            let max = sorted[n - 1];
            let trials = (mean / p0).round().max(max).max(1.0) as u64;
            let p = (mean / trials as f64).clamp(0.0, 1.0);
            if let Ok(d) = Binomial::new(p, trials) {
                let cdf = |x: f64| if x < 0.0 { 0.0 } else { d.cdf(x as u64) };
                out.push(FitCandidate {
                    params: DistributionSpec::Binomial { trials, p },
                    ks_distance: stats::ks_distance_discrete(sorted, cdf),
                });
            }
        }
    }
    out
}

/// Fits every univariate family by moments (Cauchy by median and IQR) and
/// ranks them by KS distance. Equal distances keep the family declaration
/// order.
pub fn identify_distribution(column: &[f64]) -> Result<DistributionFit> {
    if column.is_empty() {
        return Err(Error::Input("cannot fit a distribution to no values".into()));
    }
    if column.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("distribution fit needs finite values".into()));
    }
    let sorted = stats::sorted(column);
    let mut ranking = fit_candidates(&sorted);
    if ranking.is_empty() {
        return Err(Error::Input("no candidate family fits this column".into()));
    }
    ranking.sort_by(|a, b| a.ks_distance.total_cmp(&b.ks_distance));
    let best = ranking[0].clone();
    Ok(DistributionFit {
        family: best.params.family(),
        params: best.params,
        fit_statistic: best.ks_distance,
        ranking,
        low_confidence: column.len() < MIN_FIT_SAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streamgen::sample_distribution;

    fn fit(spec: DistributionSpec, seed: u64) -> DistributionFit {
        let col = sample_distribution(&spec, 5000, seed).unwrap().remove(0);
        identify_distribution(&col).unwrap()
    }

    #[test]
    fn identifies_each_family() {
        for seed in 0..3 {
            assert_eq!(fit(DistributionSpec::Normal { mean: 0.0, std: 1.0 }, seed).family, Family::Normal);
            assert_eq!(fit(DistributionSpec::Uniform { low: 0.0, high: 1.0 }, seed).family, Family::Uniform);
            assert_eq!(fit(DistributionSpec::Cauchy { location: 0.0, scale: 1.0 }, seed).family, Family::Cauchy);
            assert_eq!(fit(DistributionSpec::ChiSquared { df: 3.0 }, seed).family, Family::ChiSquared);
            assert_eq!(fit(DistributionSpec::Binomial { trials: 10, p: 0.3 }, seed).family, Family::Binomial);
        }
    }

    #[test]
    fn winner_has_minimal_distance() {
        let f = fit(DistributionSpec::Normal { mean: 3.0, std: 2.0 }, 9);
        assert!(f.ranking.iter().all(|c| f.fit_statistic <= c.ks_distance));
        assert!(f.ranking.iter().all(|c| (0.0..=1.0).contains(&c.ks_distance)));
        assert!(!f.low_confidence);
    }

    #[test]
    fn small_samples_are_flagged() {
        let f = identify_distribution(&[1.0, 2.5, 0.3, 4.0, 2.2]).unwrap();
        assert!(f.low_confidence);
        assert!(identify_distribution(&[]).is_err());
        assert!(identify_distribution(&[0.0, 0.0]).is_err());
    }
}
