//! Missingness analysis: runs test on masks, mechanism classification and
//! the expectation shift an imputer introduces.

use serde::{Deserialize, Serialize};

pub use crate::streamgen::Mechanism;
use crate::{stats, Error, Result, SparseMatrix};

/// Sequences shorter than this give a poor normal approximation.
pub const RUNS_TEST_MIN_RECOMMENDED: usize = 20;

/// Wald–Wolfowitz runs test on a binary sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunsTestResult {
    pub runs: usize,
    pub n_observed: usize,
    pub n_missing: usize,
    pub expected_runs: f64,
    pub variance: f64,
    /// `None` when the test is inapplicable (one symbol only or n < 2).
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub degenerate: bool,
    /// Set when n is below [`RUNS_TEST_MIN_RECOMMENDED`].
    pub small_sample: bool,
}

/// Runs test for randomness of a mask column (`true` = observed).
///
/// Uses the normal approximation with
/// `μ = 2·n₁·n₀/n + 1` and `σ² = 2n₁n₀(2n₁n₀ − n) / (n²(n − 1))`.
pub fn runs_test(mask: &[bool]) -> RunsTestResult {
    let n = mask.len();
    let n1 = mask.iter().filter(|&&m| m).count();
    let n0 = n - n1;
    let runs = if n == 0 {
        0
    } else {
        1 + mask.windows(2).filter(|w| w[0] != w[1]).count()
    };
    let small_sample = n < RUNS_TEST_MIN_RECOMMENDED;
    if n < 2 || n1 == 0 || n0 == 0 {
        return RunsTestResult {
            runs,
            n_observed: n1,
            n_missing: n0,
            expected_runs: runs as f64,
            variance: 0.0,
            z: None,
            p_value: None,
            degenerate: true,
            small_sample,
        };
    }
    let (nf, a, b) = (n as f64, n1 as f64, n0 as f64);
    let expected = 2.0 * a * b / nf + 1.0;
    let variance = 2.0 * a * b * (2.0 * a * b - nf) / (nf * nf * (nf - 1.0));
    let (z, p) = if variance > 0.0 {
        let z = (runs as f64 - expected) / variance.sqrt();
        (Some(z), Some(stats::two_sided_normal_p(z)))
    } else {
        (None, None)
    };
    RunsTestResult {
        runs,
        n_observed: n1,
        n_missing: n0,
        expected_runs: expected,
        variance,
        z,
        p_value: p,
        degenerate: z.is_none(),
        small_sample,
    }
}

/// Correlation screen between one feature's mask and the other features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McarScreen {
    /// Largest |point-biserial r| over the screened features.
    pub max_abs_r: f64,
    /// Smallest p-value over the screened features (1 if none screened).
    pub min_p_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVerdict {
    pub feature: usize,
    pub sparsity: f64,
    /// `None` for a complete feature.
    pub mechanism: Option<Mechanism>,
    pub evidence: Option<RunsTestResult>,
    pub mcar_screen: Option<McarScreen>,
}

/// Per-feature missingness classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessVerdict {
    pub alpha: f64,
    pub allow_mcar: bool,
    pub features: Vec<FeatureVerdict>,
}

impl MissingnessVerdict {
    pub fn mechanism_of(&self, feature: usize) -> Option<Mechanism> {
        self.features
            .iter()
            .find(|f| f.feature == feature)
            .and_then(|f| f.mechanism)
    }

    /// Features with nonzero sparsity.
    pub fn sparse_features(&self) -> impl Iterator<Item = &FeatureVerdict> {
        self.features.iter().filter(|f| f.mechanism.is_some())
    }
}

/// Point-biserial correlation between the mask of `feature` and each other
/// feature (over rows where that feature is observed).
///
/// Returns `(other_feature, r, p_value)` for every feature where r is defined.
pub fn mask_correlations(data: &SparseMatrix, feature: usize) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for k in 0..data.n_cols() {
        if k == feature {
            continue;
        }
        let (mut ind, mut xs) = (Vec::new(), Vec::new());
        for r in 0..data.n_rows() {
            if let Some(x) = data.get(r, k) {
                ind.push(if data.is_observed(r, feature) { 1.0 } else { 0.0 });
                xs.push(x);
            }
        }
        if let Some(r) = stats::pearson(&ind, &xs) {
            out.push((k, r, stats::correlation_p_value(r, xs.len())));
        }
    }
    out
}

/// The observed feature most correlated with the mask of `feature`.
pub fn strongest_mask_driver(data: &SparseMatrix, feature: usize) -> Option<usize> {
    mask_correlations(data, feature)
        .into_iter()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .map(|(k, _, _)| k)
}

/// Classifies the missingness of every feature.
///
/// A feature whose mask passes the runs test for randomness (`p ≥ alpha`) is
/// MNAR, or MCAR when `allow_mcar` is set and its mask is uncorrelated with
/// every other feature at level `alpha`. A rejected test means MAR. Complete
/// features get no mechanism. Masks are read in row order.
pub fn classify_missingness(
    data: &SparseMatrix,
    alpha: f64,
    allow_mcar: bool,
) -> Result<MissingnessVerdict> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let mask = data.mask();
    let features = (0..data.n_cols())
        .map(|j| {
            let sparsity = mask.sparsity(j);
            if sparsity == 0.0 {
                return FeatureVerdict {
                    feature: j,
                    sparsity,
                    mechanism: None,
                    evidence: None,
                    mcar_screen: None,
                };
            }
            let rt = runs_test(&mask.column(j));
            let random = rt.p_value.is_none_or(|p| p >= alpha);
            let (mechanism, screen) = if !random {
                (Mechanism::Mar, None)
            } else if allow_mcar {
                let corr = mask_correlations(data, j);
                let screen = McarScreen {
                    max_abs_r: corr.iter().map(|c| c.1.abs()).fold(0.0, f64::max),
                    min_p_value: corr.iter().map(|c| c.2).fold(1.0, f64::min),
                    passed: corr.iter().all(|c| c.2 >= alpha),
                };
                let m = if screen.passed {
                    Mechanism::Mcar
                } else {
                    Mechanism::Mnar
                };
                (m, Some(screen))
            } else {
                (Mechanism::Mnar, None)
            };
            FeatureVerdict {
                feature: j,
                sparsity,
                mechanism: Some(mechanism),
                evidence: Some(rt),
                mcar_screen: screen,
            }
        })
        .collect();
    Ok(MissingnessVerdict {
        alpha,
        allow_mcar,
        features,
    })
}

/// Expectation of one feature before and after imputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBias {
    pub feature: usize,
    /// Mean over observed cells; `None` when the feature is fully missing.
    pub e1_hat: Option<f64>,
    /// Mean over all cells after imputation, `w1·Ê₁ + w2·mean(imputed)`.
    pub e2_hat: f64,
    pub w1: f64,
    pub w2: f64,
    /// `e2_hat − e1_hat`; `None` with `e1_hat`.
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationBiasReport {
    pub features: Vec<FeatureBias>,
}

/// Compares observed-only expectations with post-imputation expectations.
///
/// `observed` supplies the mask; `imputed` must be complete and agree with
/// `observed` on every observed cell. Each cell carries weight 1/n.
pub fn imputation_bias_report(
    observed: &SparseMatrix,
    imputed: &SparseMatrix,
) -> Result<ImputationBiasReport> {
    if observed.n_rows() != imputed.n_rows() || observed.n_cols() != imputed.n_cols() {
        return Err(Error::Input("matrices differ in shape".into()));
    }
    if imputed.missing_count() > 0 {
        return Err(Error::Input("imputed matrix still has missing cells".into()));
    }
    let n = observed.n_rows();
    let mut features = Vec::with_capacity(observed.n_cols());
    for j in 0..observed.n_cols() {
        let mut obs = Vec::new();
        let mut fills = Vec::new();
        for r in 0..n {
            let v = imputed.get(r, j).expect("complete");
            match observed.get(r, j) {
                Some(o) if o.to_bits() == v.to_bits() => obs.push(o),
                Some(_) => {
                    return Err(Error::Input(format!(
                        "observed cell ({r}, {j}) differs after imputation"
                    )))
                }
                None => fills.push(v),
            }
        }
        let w2 = if n == 0 { 0.0 } else { fills.len() as f64 / n as f64 };
        let w1 = 1.0 - w2;
        let fb = match stats::mean(&obs) {
            Some(e1) => {
                // mean of (I − Ê₁) keeps the mean-imputation case exactly zero
                let shift = if fills.is_empty() {
                    0.0
                } else {
                    fills.iter().map(|v| v - e1).sum::<f64>() / fills.len() as f64
                };
                let e2 = e1 + w2 * shift;
                FeatureBias {
                    feature: j,
                    e1_hat: Some(e1),
                    e2_hat: e2,
                    w1,
                    w2,
                    bias: Some(e2 - e1),
                }
            }
            None => FeatureBias {
                feature: j,
                e1_hat: None,
                e2_hat: stats::mean(&fills).unwrap_or(f64::NAN),
                w1,
                w2,
                bias: None,
            },
        };
        features.push(fb);
    }
    Ok(ImputationBiasReport { features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn two_block_mask() {
        let r = runs_test(&bits("1111100000"));
        assert_eq!(r.runs, 2);
        assert!((r.expected_runs - 6.0).abs() < 1e-12);
        assert!((r.variance - 2000.0 / 900.0).abs() < 1e-12);
        assert!((r.z.unwrap() + 2.683).abs() < 1e-3);
        assert!((r.p_value.unwrap() - 0.0073).abs() < 1e-3);
        assert!(r.small_sample);
    }

    #[test]
    fn alternating_mask() {
        let r = runs_test(&bits("1010101010"));
        assert_eq!(r.runs, 10);
        assert!((r.z.unwrap() - 2.683).abs() < 1e-3);
    }

    #[test]
    fn single_symbol_is_degenerate() {
        let r = runs_test(&[true; 30]);
        assert!(r.degenerate);
        assert_eq!(r.runs, 1);
        assert!(r.z.is_none() && r.p_value.is_none());
        assert!(runs_test(&[]).degenerate);
    }

    #[test]
    fn complement_invariance() {
        let mut rng = seeded(3);
        for _ in 0..50 {
            let m: Vec<bool> = (0..60).map(|_| rng.random_bool(0.4)).collect();
            let c: Vec<bool> = m.iter().map(|b| !b).collect();
            let (a, b) = (runs_test(&m), runs_test(&c));
            assert_eq!(a.runs, b.runs);
            assert_eq!(a.expected_runs, b.expected_runs);
            assert_eq!(a.variance, b.variance);
            if let (Some(za), Some(zb)) = (a.z, b.z) {
                assert!((za.abs() - zb.abs()).abs() < 1e-12);
            }
        }
    }

    fn single_column(mask: &[bool]) -> SparseMatrix {
        let rows: Vec<Vec<Option<f64>>> = mask
            .iter()
            .enumerate()
            .map(|(i, &m)| vec![m.then_some(i as f64)])
            .collect();
        SparseMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn block_mask_is_mar() {
        let v = classify_missingness(&single_column(&bits("1111100000")), 0.05, false).unwrap();
        assert_eq!(v.mechanism_of(0), Some(Mechanism::Mar));
    }

    #[test]
    fn random_mask_is_mnar_or_mcar() {
        let mut rng = seeded(17);
        let n = 10_000;
        let mut m = SparseMatrix::empty(n, 3);
        for r in 0..n {
            m.set(r, 0, rng.random::<f64>());
            m.set(r, 1, rng.random::<f64>());
            if rng.random::<f64>() >= 0.3 {
                m.set(r, 2, rng.random::<f64>());
            }
        }
        let v = classify_missingness(&m, 0.05, false).unwrap();
        assert_eq!(v.mechanism_of(2), Some(Mechanism::Mnar));
        assert_eq!(v.mechanism_of(0), None);
        assert_eq!(v.sparse_features().count(), 1);
        let v = classify_missingness(&m, 0.05, true).unwrap();
        assert_eq!(v.mechanism_of(2), Some(Mechanism::Mcar));
        assert_eq!(v, classify_missingness(&m, 0.05, true).unwrap());
    }

    #[test]
    fn bad_alpha() {
        assert!(classify_missingness(&single_column(&[true, false]), 1.0, false).is_err());
    }

    fn col(values: &[Option<f64>]) -> SparseMatrix {
        SparseMatrix::from_rows(&values.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_imputation_bias() {
        let obs = col(&[Some(1.0), Some(2.0), None, Some(3.0)]);
        let imp = col(&[Some(1.0), Some(2.0), Some(0.0), Some(3.0)]);
        let r = imputation_bias_report(&obs, &imp).unwrap();
        let f = &r.features[0];
        assert_eq!(f.e1_hat, Some(2.0));
        assert_eq!((f.w1, f.w2), (0.75, 0.25));
        assert_eq!(f.e2_hat, 1.5);
        assert_eq!(f.bias, Some(-0.5));
    }

    #[test]
    fn complete_column_has_no_bias() {
        let obs = col(&[Some(1.0), Some(2.5)]);
        let r = imputation_bias_report(&obs, &obs).unwrap();
        assert_eq!(r.features[0].bias, Some(0.0));
        assert_eq!(r.features[0].e1_hat, Some(r.features[0].e2_hat));
    }

    #[test]
    fn fully_missing_flagged() {
        let obs = col(&[None, None]);
        let imp = col(&[Some(0.0), Some(0.0)]);
        let r = imputation_bias_report(&obs, &imp).unwrap();
        assert!(r.features[0].e1_hat.is_none() && r.features[0].bias.is_none());
    }

    #[test]
    fn inconsistent_masks_rejected() {
        let obs = col(&[Some(1.0), None]);
        let imp = col(&[Some(2.0), Some(0.0)]);
        assert!(imputation_bias_report(&obs, &imp).is_err());
        assert!(imputation_bias_report(&obs, &obs).is_err());
    }
}
