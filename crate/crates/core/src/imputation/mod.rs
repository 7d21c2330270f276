//! Missing-value imputation.
//!
//! Univariate imputers (mean, median, mode, zero) fill each feature from its
//! own observed values; kNN borrows from the nearest rows. [`select_best_imputer`]
//! scores candidates by re-masking complete rows and measuring RMSE against the
//! known values.

mod fit;
mod knn;
mod select;

use serde::{Deserialize, Serialize};

pub use fit::{identify_distribution, DistributionFit, FitCandidate, MIN_FIT_SAMPLES};
pub use select::{select_best_imputer, CandidateScore, SelectionOptions, SelectionReport};

use crate::par::Execution;
use crate::streamgen::{Family, Mechanism};
use crate::{stats, Error, MissingMask, Result, SparseMatrix};

/// Number of histogram bins used for the mode of continuous data.
pub const MODE_BINS: usize = 32;

/// An imputation strategy.
///
/// The derived ordering (mean < median < mode < zero < knn by ascending k) is
/// the tie-break order used by imputer selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ImputationMethod {
    Mean,
    Median,
    Mode,
    Zero,
    Knn { k: usize },
}

impl ImputationMethod {
    pub fn is_univariate(self) -> bool {
        !matches!(self, ImputationMethod::Knn { .. })
    }

    pub const UNIVARIATE: [ImputationMethod; 4] = [
        ImputationMethod::Mean,
        ImputationMethod::Median,
        ImputationMethod::Mode,
        ImputationMethod::Zero,
    ];
}

impl std::fmt::Display for ImputationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImputationMethod::Mean => f.write_str("mean"),
            ImputationMethod::Median => f.write_str("median"),
            ImputationMethod::Mode => f.write_str("mode"),
            ImputationMethod::Zero => f.write_str("zero"),
            ImputationMethod::Knn { k } => write!(f, "knn({k})"),
        }
    }
}

impl std::str::FromStr for ImputationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let method = match s.as_str() {
            "mean" => ImputationMethod::Mean,
            "median" => ImputationMethod::Median,
            "mode" => ImputationMethod::Mode,
            "zero" => ImputationMethod::Zero,
            _ => {
                let k = s
                    .strip_prefix("knn")
                    .map(|r| r.trim_matches(|c| c == '(' || c == ')' || c == ':'))
                    .and_then(|r| r.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown imputation method '{s}'")))?;
                if k == 0 {
                    return Err(Error::Config("knn needs k >= 1".into()));
                }
                ImputationMethod::Knn { k }
            }
        };
        Ok(method)
    }
}

impl TryFrom<String> for ImputationMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ImputationMethod> for String {
    fn from(m: ImputationMethod) -> String {
        m.to_string()
    }
}

/// Result of [`impute`]: a complete matrix plus the cells where kNN found no
/// candidate rows and fell back to the column mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputed {
    pub data: SparseMatrix,
    pub knn_fallbacks: Vec<(usize, usize)>,
}

/// Fills every missing cell of `data` using `method`.
pub fn impute(data: &SparseMatrix, method: ImputationMethod) -> Result<Imputed> {
    impute_with(data, method, Execution::default())
}

/// [`impute`] with explicit control over parallel execution.
pub fn impute_with(data: &SparseMatrix, method: ImputationMethod, exec: Execution) -> Result<Imputed> {
    match method {
        ImputationMethod::Knn { k } => knn::impute_knn(data, k, exec),
        _ => {
            let mut out = data.clone();
            for j in 0..data.n_cols() {
                if data.missing_in_column(j) == 0 {
                    continue;
                }
                let observed = data.observed_column(j);
                let fill = univariate_fill(&observed, method).ok_or_else(|| {
                    Error::Imputation(format!("feature {j} has no observed values"))
                })?;
                for r in 0..data.n_rows() {
                    if !data.is_observed(r, j) {
                        out.set(r, j, fill);
                    }
                }
            }
            Ok(Imputed {
                data: out,
                knn_fallbacks: Vec::new(),
            })
        }
    }
}

/// Fill value of a univariate method; `None` for an empty column.
pub fn univariate_fill(observed: &[f64], method: ImputationMethod) -> Option<f64> {
    if observed.is_empty() {
        return None;
    }
    match method {
        ImputationMethod::Mean => stats::mean(observed),
        ImputationMethod::Median => stats::median(observed),
        ImputationMethod::Mode => Some(mode(observed)),
        ImputationMethod::Zero => Some(0.0),
        ImputationMethod::Knn { .. } => None,
    }
}

/// Most frequent value.
///
/// Data with at most [`MODE_BINS`] distinct values uses the exact mode (lowest
/// value on ties); otherwise the centre of the fullest of [`MODE_BINS`]
/// equal-width histogram bins.
pub fn mode(observed: &[f64]) -> f64 {
    let sorted = stats::sorted(observed);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in &sorted {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => {
                if distinct.len() > MODE_BINS {
                    break;
                }
                distinct.push((v, 1));
            }
        }
    }
    if distinct.len() <= MODE_BINS {
        let best = distinct.iter().map(|d| d.1).max().unwrap_or(0);
        return distinct.iter().find(|d| d.1 == best).map_or(f64::NAN, |d| d.0);
    }
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let width = (hi - lo) / MODE_BINS as f64;
    let mut counts = [0usize; MODE_BINS];
    for &v in &sorted {
        let b = (((v - lo) / width) as usize).min(MODE_BINS - 1);
        counts[b] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(i, _)| i);
    lo + (best as f64 + 0.5) * width
}

/// Root-mean-square error over the cells `mask` marks missing.
pub fn rmse(truth: &SparseMatrix, imputed: &SparseMatrix, mask: &MissingMask) -> Result<f64> {
    let shape = (truth.n_rows(), truth.n_cols());
    if shape != (imputed.n_rows(), imputed.n_cols()) || shape != (mask.n_rows(), mask.n_cols()) {
        return Err(Error::Input("rmse inputs differ in shape".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in 0..shape.0 {
        for c in 0..shape.1 {
            if mask.is_observed(r, c) {
                continue;
            }
            let (t, v) = truth
                .get(r, c)
                .zip(imputed.get(r, c))
                .ok_or_else(|| Error::Input(format!("cell ({r}, {c}) missing in truth or imputed")))?;
            sum += (t - v) * (t - v);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Input("rmse mask selects no cells".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Best-known imputer for a distribution family and missingness mechanism.
///
/// Symmetric light-tailed and right-skewed families (normal, uniform,
/// chi-squared) take the mean; heavy-tailed or discrete families (Cauchy,
/// binomial) the median. Correlated multivariate normal data uses kNN with
/// k = 50, except MAR or MCAR at 30% sparsity or more, which use k = 100.
pub fn default_method_for(family: Family, mechanism: Mechanism, rate: f64) -> Result<ImputationMethod> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Parameter(format!("rate must be in [0, 1], got {rate}")));
    }
    Ok(match family {
        Family::Normal | Family::Uniform | Family::ChiSquared => ImputationMethod::Mean,
        Family::Cauchy | Family::Binomial => ImputationMethod::Median,
        Family::MultivariateNormal => match mechanism {
            Mechanism::Mcar if rate < 0.3 => ImputationMethod::Knn { k: 50 },
            Mechanism::Mcar | Mechanism::Mar => ImputationMethod::Knn { k: 100 },
            Mechanism::Mnar => ImputationMethod::Knn { k: 50 },
        },
    })
}

/// [`default_method_for`] keyed by family name; unknown names are a
/// [`Error::NoDefault`].
pub fn default_method_for_name(family: &str, mechanism: Mechanism, rate: f64) -> Result<ImputationMethod> {
    default_method_for(family.parse()?, mechanism, rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[Option<f64>]) -> SparseMatrix {
        SparseMatrix::from_rows(&values.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap()
    }

    fn values(m: &SparseMatrix) -> Vec<f64> {
        m.observed_column(0)
    }

    #[test]
    fn univariate_fills() {
        let m = col(&[Some(1.0), Some(2.0), None, Some(3.0)]);
        assert_eq!(values(&impute(&m, ImputationMethod::Mean).unwrap().data), vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(values(&impute(&m, ImputationMethod::Median).unwrap().data), vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(values(&impute(&m, ImputationMethod::Zero).unwrap().data), vec![1.0, 2.0, 0.0, 3.0]);
    }

    #[test]
    fn no_missing_is_identity() {
        let m = col(&[Some(1.0), Some(5.0), Some(2.0)]);
        for method in [
            ImputationMethod::Mean,
            ImputationMethod::Median,
            ImputationMethod::Mode,
            ImputationMethod::Zero,
            ImputationMethod::Knn { k: 1 },
        ] {
            assert_eq!(impute(&m, method).unwrap().data, m, "{method}");
        }
    }

    #[test]
    fn fully_missing_feature_is_error() {
        let m = SparseMatrix::from_rows(&[vec![Some(1.0), None], vec![Some(2.0), None]]).unwrap();
        assert!(matches!(impute(&m, ImputationMethod::Mean), Err(Error::Imputation(_))));
    }

    #[test]
    fn exact_mode_on_discrete_data() {
        assert_eq!(mode(&[3.0, 1.0, 3.0, 2.0, 1.0]), 1.0);
        assert_eq!(mode(&[4.0, 4.0, 2.0]), 4.0);
    }

    #[test]
    fn histogram_mode_on_continuous_data() {
        let mut v: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        v.extend(std::iter::repeat_n(0.505, 20));
        let m = mode(&v);
        assert!((m - 0.5).abs() < 1.0 / 32.0, "mode {m}");
    }

    #[test]
    fn rmse_examples() {
        let t = SparseMatrix::from_dense(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let mask = MissingMask::new(1, 3, vec![false, true, false]).unwrap();
        assert_eq!(rmse(&t, &t, &mask).unwrap(), 0.0);

        let t = SparseMatrix::from_dense(1, 1, vec![4.0]).unwrap();
        let i = SparseMatrix::from_dense(1, 1, vec![1.0]).unwrap();
        let mask = MissingMask::new(1, 1, vec![false]).unwrap();
        assert_eq!(rmse(&t, &i, &mask).unwrap(), 3.0);

        let t = SparseMatrix::from_dense(1, 2, vec![0.0, 0.0]).unwrap();
        let i = SparseMatrix::from_dense(1, 2, vec![3.0, 4.0]).unwrap();
        let mask = MissingMask::new(1, 2, vec![false, false]).unwrap();
        assert!((rmse(&t, &i, &mask).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);

        let mask = MissingMask::new(1, 2, vec![true, true]).unwrap();
        assert!(rmse(&t, &i, &mask).is_err());
    }

    #[test]
    fn table_defaults() {
        use Mechanism::*;
        assert_eq!(default_method_for(Family::Normal, Mar, 0.2).unwrap(), ImputationMethod::Mean);
        assert_eq!(default_method_for(Family::Cauchy, Mnar, 0.5).unwrap(), ImputationMethod::Median);
        assert_eq!(
            default_method_for(Family::MultivariateNormal, Mcar, 0.4).unwrap(),
            ImputationMethod::Knn { k: 100 }
        );
        assert_eq!(
            default_method_for(Family::MultivariateNormal, Mcar, 0.1).unwrap(),
            ImputationMethod::Knn { k: 50 }
        );
        assert_eq!(
            default_method_for(Family::MultivariateNormal, Mnar, 0.4).unwrap(),
            ImputationMethod::Knn { k: 50 }
        );
        assert!(matches!(default_method_for_name("weibull", Mar, 0.1), Err(Error::NoDefault(_))));
        assert!(default_method_for(Family::Normal, Mar, 1.2).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [ImputationMethod::Mean, ImputationMethod::Knn { k: 50 }] {
            assert_eq!(m.to_string().parse::<ImputationMethod>().unwrap(), m);
        }
        assert_eq!("knn5".parse::<ImputationMethod>().unwrap(), ImputationMethod::Knn { k: 5 });
        assert!("knn(0)".parse::<ImputationMethod>().is_err());
        let json = serde_json::to_string(&ImputationMethod::Knn { k: 4 }).unwrap();
        assert_eq!(json, "\"knn(4)\"");
    }

    #[test]
    fn tie_break_order() {
        let mut v = vec![
            ImputationMethod::Knn { k: 5 },
            ImputationMethod::Zero,
            ImputationMethod::Knn { k: 2 },
            ImputationMethod::Mean,
            ImputationMethod::Mode,
            ImputationMethod::Median,
        ];
        v.sort();
        assert_eq!(v[0], ImputationMethod::Mean);
        assert_eq!(v[3], ImputationMethod::Zero);
        assert_eq!(v[4], ImputationMethod::Knn { k: 2 });
    }
}
