//! Synthetic data: feature distributions, drifting labelled streams and
//! missing-value injection.
//!
//! All generators are pure functions of their inputs and seed; see
//! [`crate::rng`] for the generator algorithm.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Binomial, ChiSquared, Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, seeded, Rng};
use crate::{Error, Result, SparseMatrix};

/// Distribution family names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Uniform,
    ChiSquared,
    Cauchy,
    Binomial,
    MultivariateNormal,
}

impl Family {
    pub const UNIVARIATE: [Family; 5] = [
        Family::Normal,
        Family::Uniform,
        Family::ChiSquared,
        Family::Cauchy,
        Family::Binomial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Uniform => "uniform",
            Family::ChiSquared => "chi_squared",
            Family::Cauchy => "cauchy",
            Family::Binomial => "binomial",
            Family::MultivariateNormal => "multivariate_normal",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match norm.as_str() {
            "normal" | "gaussian" => Family::Normal,
            "uniform" => Family::Uniform,
            "chi_squared" | "chisquared" | "chi2" => Family::ChiSquared,
            "cauchy" => Family::Cauchy,
            "binomial" => Family::Binomial,
            "multivariate_normal" | "mvn" => Family::MultivariateNormal,
            _ => return Err(Error::NoDefault(format!("unknown family '{s}'"))),
        })
    }
}

/// A parametrised distribution to sample feature columns from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    ChiSquared { df: f64 },
    Cauchy { location: f64, scale: f64 },
    Binomial { trials: u64, p: f64 },
    MultivariateNormal { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

impl DistributionSpec {
    pub fn family(&self) -> Family {
        match self {
            DistributionSpec::Normal { .. } => Family::Normal,
            DistributionSpec::Uniform { .. } => Family::Uniform,
            DistributionSpec::ChiSquared { .. } => Family::ChiSquared,
            DistributionSpec::Cauchy { .. } => Family::Cauchy,
            DistributionSpec::Binomial { .. } => Family::Binomial,
            DistributionSpec::MultivariateNormal { .. } => Family::MultivariateNormal,
        }
    }

    /// Number of columns a sample produces.
    pub fn dimension(&self) -> usize {
        match self {
            DistributionSpec::MultivariateNormal { mean, .. } => mean.len(),
            _ => 1,
        }
    }

    /// Checks the family invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        match self {
            DistributionSpec::Normal { mean, std } => {
                if !mean.is_finite() || !(*std > 0.0 && std.is_finite()) {
                    return bad(format!("normal needs finite mean and std > 0, got std={std}"));
                }
            }
            DistributionSpec::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return bad(format!("uniform needs low < high, got [{low}, {high}]"));
                }
            }
            DistributionSpec::ChiSquared { df } => {
                if !(*df >= 1.0 && df.is_finite()) {
                    return bad(format!("chi-squared needs df >= 1, got {df}"));
                }
            }
            DistributionSpec::Cauchy { location, scale } => {
                if !location.is_finite() || !(*scale > 0.0 && scale.is_finite()) {
                    return bad(format!("cauchy needs scale > 0, got {scale}"));
                }
            }
            DistributionSpec::Binomial { trials, p } => {
                if *trials == 0 || !(0.0..=1.0).contains(p) {
                    return bad(format!("binomial needs trials >= 1 and p in [0,1], got ({trials}, {p})"));
                }
            }
            DistributionSpec::MultivariateNormal { mean, cov } => {
                if mean.is_empty() {
                    return bad("multivariate normal needs a nonempty mean".into());
                }
                cholesky_psd(cov, mean.len())?;
            }
        }
        Ok(())
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = cov`, accepting semi-definite input.
///
/// Pivots within a relative tolerance of zero are treated as exact zeros; a
/// clearly negative pivot or an asymmetric matrix is rejected.
pub(crate) fn cholesky_psd(cov: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    if cov.len() != dim || cov.iter().any(|r| r.len() != dim) {
        return Err(Error::Parameter(format!("covariance must be {dim}x{dim}")));
    }
    let scale = (0..dim).map(|i| cov[i][i].abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-10 * scale;
    for i in 0..dim {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > tol {
                return Err(Error::Parameter("covariance is not symmetric".into()));
            }
        }
    }
    let mut l = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        let d = cov[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return Err(Error::Parameter(
                "covariance is not positive semi-definite".into(),
            ));
        }
        let d = d.max(0.0);
        l[j][j] = d.sqrt();
        for i in (j + 1)..dim {
            let s = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if l[j][j] > tol.sqrt() {
                l[i][j] = s / l[j][j];
            } else if s.abs() > tol.sqrt() {
                return Err(Error::Parameter(
                    "covariance is not positive semi-definite".into(),
                ));
            }
        }
    }
    Ok(l)
}

/// Draws `n` samples; returns one column per dimension.
pub fn sample_distribution(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Parameter("sample size must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = seeded(seed);
    let param = |e: &dyn std::fmt::Display| Error::Parameter(e.to_string());
    let col: Vec<f64> = match spec {
        DistributionSpec::Normal { mean, std } => {
            let d = Normal::new(*mean, *std).map_err(|e| param(&e))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        DistributionSpec::Uniform { low, high } => {
            let d = Uniform::new(*low, *high).map_err(|e| param(&e))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        DistributionSpec::ChiSquared { df } => {
            let d = ChiSquared::new(*df).map_err(|e| param(&e))?;
            (0..n).map(|_| d.sample(&mut rng)).collect()
        }
        DistributionSpec::Cauchy { location, scale } => (0..n)
            .map(|_| cauchy_inverse_cdf(open_unit(&mut rng), *location, *scale))
            .collect(),
        DistributionSpec::Binomial { trials, p } => {
            let d = Binomial::new(*trials, *p).map_err(|e| param(&e))?;
            (0..n).map(|_| d.sample(&mut rng) as f64).collect()
        }
        DistributionSpec::MultivariateNormal { mean, cov } => {
            return Ok(sample_mvn(mean, cov, n, &mut rng)?);
        }
    };
    Ok(vec![col])
}

fn open_unit(rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Cauchy distribution function.
pub fn cauchy_cdf(x: f64, location: f64, scale: f64) -> f64 {
    0.5 + ((x - location) / scale).atan() / PI
}

/// Cauchy quantile function.
pub fn cauchy_inverse_cdf(u: f64, location: f64, scale: f64) -> f64 {
    location + scale * (PI * (u - 0.5)).tan()
}

fn sample_mvn(mean: &[f64], cov: &[Vec<f64>], n: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let dim = mean.len();
    let l = cholesky_psd(cov, dim)?;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut cols = vec![Vec::with_capacity(n); dim];
    let mut z = vec![0.0; dim];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = std_normal.sample(rng);
        }
        for i in 0..dim {
            let v = mean[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>();
            cols[i].push(v);
        }
    }
    Ok(cols)
}

/// Shape of a concept drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    #[default]
    Abrupt,
    Gradual,
}

/// Ground-truth drift layout; also the JSON sidecar format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DriftSpec {
    pub positions: Vec<usize>,
    pub widths: Vec<usize>,
    pub kind: DriftKind,
}

impl DriftSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn abrupt(positions: Vec<usize>) -> Self {
        let widths = vec![0; positions.len()];
        Self {
            positions,
            widths,
            kind: DriftKind::Abrupt,
        }
    }

    pub fn gradual(positions: Vec<usize>, widths: Vec<usize>) -> Self {
        Self {
            positions,
            widths,
            kind: DriftKind::Gradual,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks ordering, bounds and disjointness against a stream of `len` instances.
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.positions.len() != self.widths.len() {
            return Err(Error::Spec("positions and widths differ in length".into()));
        }
        if self.kind == DriftKind::Abrupt && self.widths.iter().any(|&w| w != 0) {
            return Err(Error::Spec("abrupt drifts must have width 0".into()));
        }
        for (k, (&p, &w)) in self.positions.iter().zip(&self.widths).enumerate() {
            if p + w > len || p >= len.max(1) {
                return Err(Error::Spec(format!(
                    "drift {k} at {p} (width {w}) exceeds stream length {len}"
                )));
            }
            if k > 0 {
                let prev_end = self.positions[k - 1] + self.widths[k - 1];
                if p <= self.positions[k - 1] {
                    return Err(Error::Spec("drift positions must be strictly increasing".into()));
                }
                if p < prev_end {
                    return Err(Error::Spec(format!(
                        "drift {k} at {p} overlaps the previous drift interval ending at {prev_end}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ordered binary-labelled instances with their drift annotations.
///
/// Instance `i` is row `i` of `features` and `labels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStream {
    pub features: SparseMatrix,
    pub labels: Vec<u8>,
    pub drift: DriftSpec,
}

impl LabeledStream {
    pub fn new(features: SparseMatrix, labels: Vec<u8>, drift: DriftSpec) -> Result<Self> {
        if features.n_rows() != labels.len() {
            return Err(Error::Input(format!(
                "{} feature rows but {} labels",
                features.n_rows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Input(format!("label {bad} is not binary")));
        }
        drift.validate(labels.len())?;
        Ok(Self {
            features,
            labels,
            drift,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Parameters of the base (drift-free) classification stream generator.
///
/// Labels are fair coin flips; features are Gaussian around a class centre
/// `offset ± separation/2` with unit variance and pairwise correlation
/// `correlation` from a shared latent factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSpec {
    pub instances: usize,
    pub features: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_offset")]
    pub offset: f64,
    #[serde(default)]
    pub correlation: f64,
}

fn default_separation() -> f64 {
    2.0
}

fn default_offset() -> f64 {
    5.0
}

impl Default for ClassificationSpec {
    fn default() -> Self {
        Self {
            instances: 10_000,
            features: 4,
            separation: default_separation(),
            offset: default_offset(),
            correlation: 0.0,
        }
    }
}

/// Generates a drift-free binary classification stream.
pub fn make_classification_stream(spec: &ClassificationSpec, seed: u64) -> Result<LabeledStream> {
    if spec.features == 0 {
        return Err(Error::Parameter("need at least one feature".into()));
    }
    if !(0.0..1.0).contains(&spec.correlation) {
        return Err(Error::Parameter(format!(
            "correlation must be in [0, 1), got {}",
            spec.correlation
        )));
    }
    let mut rng = seeded(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let shared = spec.correlation.sqrt();
    let own = (1.0 - spec.correlation).sqrt();
    let mut values = Vec::with_capacity(spec.instances * spec.features);
    let mut labels = Vec::with_capacity(spec.instances);
    for _ in 0..spec.instances {
        let y: u8 = rng.random_bool(0.5).into();
        let centre = spec.offset + if y == 1 { 0.5 } else { -0.5 } * spec.separation;
        let latent = unit.sample(&mut rng);
        for _ in 0..spec.features {
            values.push(centre + shared * latent + own * unit.sample(&mut rng));
        }
        labels.push(y);
    }
    let features = SparseMatrix::from_dense(spec.instances, spec.features, values)?;
    LabeledStream::new(features, labels, DriftSpec::none())
}

/// Injects label-flip drifts into `base`.
///
/// Each drift toggles the active concept. Abrupt drifts flip every label from
/// their position on; gradual drifts switch each instance in
/// `[position, position + width)` to the new concept with probability
/// `(i − position) / width`.
pub fn make_drift_stream(base: &LabeledStream, drift: &DriftSpec, seed: u64) -> Result<LabeledStream> {
    drift.validate(base.len())?;
    let mut rng = seeded(seed);
    let mut labels = base.labels.clone();
    let mut settled = 0usize;
    let mut next = 0usize;
    for (i, label) in labels.iter_mut().enumerate() {
        while next < drift.len() && i >= drift.positions[next] + drift.widths[next] {
            settled += 1;
            next += 1;
        }
        let mut flips = settled;
        if next < drift.len() && i >= drift.positions[next] {
            let p = drift.positions[next];
            let w = drift.widths[next];
            let prob = (i - p) as f64 / w as f64;
            if rng.random::<f64>() < prob {
                flips += 1;
            }
        }
        if flips % 2 == 1 {
            *label ^= 1;
        }
    }
    LabeledStream::new(base.features.clone(), labels, drift.clone())
}

/// Randomly permutes instances. Drift annotations are cleared because a
/// shuffle destroys any temporal structure.
pub fn shuffle_instances(stream: &LabeledStream, seed: u64) -> LabeledStream {
    let mut order: Vec<usize> = (0..stream.len()).collect();
    order.shuffle(&mut seeded(seed));
    let features = stream.features.select_rows(&order);
    let labels = order.iter().map(|&i| stream.labels[i]).collect();
    LabeledStream {
        features,
        labels,
        drift: DriftSpec::none(),
    }
}

/// Missing-data mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "MCAR", alias = "mcar")]
    Mcar,
    #[serde(rename = "MAR", alias = "mar")]
    Mar,
    #[serde(rename = "MNAR", alias = "mnar")]
    Mnar,
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::Mar => "MAR",
            Mechanism::Mnar => "MNAR",
        })
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MCAR" => Ok(Mechanism::Mcar),
            "MAR" => Ok(Mechanism::Mar),
            "MNAR" => Ok(Mechanism::Mnar),
            _ => Err(Error::Spec(format!("unknown missingness mechanism '{s}'"))),
        }
    }
}

/// Where and how to remove values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityPlan {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub targets: Vec<usize>,
    #[serde(default)]
    pub driver: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SparsityPlan {
    fn validate(&self, n_cols: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::Parameter(format!(
                "sparsity rate must be in [0, 1], got {}",
                self.rate
            )));
        }
        if let Some(&t) = self.targets.iter().find(|&&t| t >= n_cols) {
            return Err(Error::Spec(format!("target feature {t} out of range")));
        }
        if self.mechanism == Mechanism::Mar {
            let driver = self
                .driver
                .ok_or_else(|| Error::Spec("MAR sparsity requires a driver feature".into()))?;
            if driver >= n_cols {
                return Err(Error::Spec(format!("driver feature {driver} out of range")));
            }
            if self.targets.contains(&driver) {
                return Err(Error::Spec("driver feature cannot be a target".into()));
            }
        }
        Ok(())
    }
}

/// Rows (among `rows`) whose `values` rank in the top `rate` fraction.
/// Ties are broken towards lower row index.
fn top_quantile_rows(rows: &[(usize, f64)], rate: f64) -> Vec<usize> {
    let count = (rate * rows.len() as f64).round() as usize;
    let mut ranked = rows.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.iter().take(count).map(|&(r, _)| r).collect()
}

/// Removes values from `data` according to `plan`.
///
/// Cells already missing stay missing and observed values are never altered.
/// MAR masks the target cells of rows whose driver value is in the top
/// `rate`-quantile; MNAR masks each target column's own top `rate`-quantile.
pub fn inject_sparsity(data: &SparseMatrix, plan: &SparsityPlan) -> Result<SparseMatrix> {
    plan.validate(data.n_cols())?;
    let mut out = data.clone();
    if plan.rate == 0.0 {
        return Ok(out);
    }
    match plan.mechanism {
        Mechanism::Mcar => {
            let mut rng = seeded(plan.seed);
            for r in 0..data.n_rows() {
                for &c in &plan.targets {
                    if rng.random::<f64>() < plan.rate {
                        out.set_missing(r, c);
                    }
                }
            }
        }
        Mechanism::Mar => {
            let driver = plan.driver.expect("validated");
            let rows: Vec<(usize, f64)> = (0..data.n_rows())
                .filter_map(|r| data.get(r, driver).map(|v| (r, v)))
                .collect();
            for r in top_quantile_rows(&rows, plan.rate) {
                for &c in &plan.targets {
                    out.set_missing(r, c);
                }
            }
        }
        Mechanism::Mnar => {
            for &c in &plan.targets {
                let rows: Vec<(usize, f64)> = (0..data.n_rows())
                    .filter_map(|r| data.get(r, c).map(|v| (r, v)))
                    .collect();
                for r in top_quantile_rows(&rows, plan.rate) {
                    out.set_missing(r, c);
                }
            }
        }
    }
    Ok(out)
}

/// Seed for the `k`-th sub-generator of an experiment seed.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    derive_seed(seed, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn normal_sample_moments() {
        let cols = sample_distribution(&DistributionSpec::Normal { mean: 0.0, std: 1.0 }, 100_000, 7).unwrap();
        let m = stats::mean(&cols[0]).unwrap();
        let s = stats::sample_std(&cols[0]).unwrap();
        assert!(m.abs() < 0.02, "mean {m}");
        assert!((s - 1.0).abs() < 0.02, "std {s}");
    }

    #[test]
    fn degenerate_uniform_rejected() {
        let err = sample_distribution(&DistributionSpec::Uniform { low: 5.0, high: 5.0 }, 10, 1);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn chi_squared_mean_matches_df() {
        let cols = sample_distribution(&DistributionSpec::ChiSquared { df: 4.0 }, 100_000, 3).unwrap();
        let m = stats::mean(&cols[0]).unwrap();
        assert!((m - 4.0).abs() < 0.1, "mean {m}");
    }

    #[test]
    fn invalid_params() {
        for spec in [
            DistributionSpec::Normal { mean: 0.0, std: 0.0 },
            DistributionSpec::ChiSquared { df: 0.5 },
            DistributionSpec::Binomial { trials: 10, p: 1.5 },
            DistributionSpec::Cauchy { location: 0.0, scale: -1.0 },
            DistributionSpec::MultivariateNormal {
                mean: vec![0.0, 0.0],
                cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            },
        ] {
            assert!(matches!(spec.validate(), Err(Error::Parameter(_))), "{spec:?}");
        }
        assert!(sample_distribution(&DistributionSpec::Normal { mean: 0.0, std: 1.0 }, 0, 1).is_err());
    }

    #[test]
    fn semidefinite_covariance_accepted() {
        let spec = DistributionSpec::MultivariateNormal {
            mean: vec![1.0, 2.0],
            cov: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
        };
        let cols = sample_distribution(&spec, 100, 5).unwrap();
        for (a, b) in cols[0].iter().zip(&cols[1]) {
            assert!((b - a - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mvn_correlation() {
        let spec = DistributionSpec::MultivariateNormal {
            mean: vec![0.0, 0.0],
            cov: vec![vec![1.0, 0.8], vec![0.8, 1.0]],
        };
        let cols = sample_distribution(&spec, 20_000, 11).unwrap();
        let r = stats::pearson(&cols[0], &cols[1]).unwrap();
        assert!((r - 0.8).abs() < 0.02, "r = {r}");
    }

    #[test]
    fn cauchy_quantiles_exact() {
        assert_eq!(cauchy_inverse_cdf(0.5, 3.0, 2.0), 3.0);
        assert!((cauchy_inverse_cdf(0.75, 3.0, 2.0) - 5.0).abs() < 1e-12);
    }

    fn base(n: usize) -> LabeledStream {
        make_classification_stream(
            &ClassificationSpec {
                instances: n,
                features: 2,
                ..Default::default()
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn abrupt_flip_complements_suffix() {
        let b = base(1000);
        let d = make_drift_stream(&b, &DriftSpec::abrupt(vec![500]), 9).unwrap();
        for i in 0..1000 {
            if i < 500 {
                assert_eq!(d.labels[i], b.labels[i]);
            } else {
                assert_eq!(d.labels[i], 1 - b.labels[i]);
            }
        }
        assert_eq!(d.drift.positions, vec![500]);
    }

    #[test]
    fn gradual_width_zero_equals_abrupt() {
        let b = base(1000);
        let a = make_drift_stream(&b, &DriftSpec::abrupt(vec![300, 700]), 4).unwrap();
        let g = make_drift_stream(&b, &DriftSpec::gradual(vec![300, 700], vec![0, 0]), 4).unwrap();
        assert_eq!(a.labels, g.labels);
    }

    #[test]
    fn gradual_ramp_flips_half() {
        let b = base(1000);
        let g = make_drift_stream(&b, &DriftSpec::gradual(vec![400], vec![200]), 21).unwrap();
        let flipped = (400..600).filter(|&i| g.labels[i] != b.labels[i]).count();
        let frac = flipped as f64 / 200.0;
        assert!((frac - 0.5).abs() <= 0.07, "fraction {frac}");
        assert!((600..1000).all(|i| g.labels[i] != b.labels[i]));
        assert!((0..400).all(|i| g.labels[i] == b.labels[i]));
    }

    #[test]
    fn repeated_drifts_toggle() {
        let b = base(30);
        let d = make_drift_stream(&b, &DriftSpec::abrupt(vec![10, 20]), 0).unwrap();
        assert!((20..30).all(|i| d.labels[i] == b.labels[i]));
        assert!((10..20).all(|i| d.labels[i] != b.labels[i]));
    }

    #[test]
    fn overlapping_drifts_rejected() {
        let b = base(1000);
        let spec = DriftSpec::gradual(vec![100, 150], vec![100, 10]);
        assert!(matches!(make_drift_stream(&b, &spec, 0), Err(Error::Spec(_))));
        let spec = DriftSpec::abrupt(vec![500, 400]);
        assert!(matches!(make_drift_stream(&b, &spec, 0), Err(Error::Spec(_))));
        let spec = DriftSpec::gradual(vec![990], vec![20]);
        assert!(matches!(make_drift_stream(&b, &spec, 0), Err(Error::Spec(_))));
    }

    fn column_matrix(n: usize, seed: u64) -> SparseMatrix {
        let a = sample_distribution(&DistributionSpec::Normal { mean: 0.0, std: 1.0 }, n, seed).unwrap();
        let b = sample_distribution(&DistributionSpec::Normal { mean: 3.0, std: 2.0 }, n, seed + 1).unwrap();
        SparseMatrix::from_columns(&[a[0].clone(), b[0].clone()]).unwrap()
    }

    #[test]
    fn zero_rate_is_noop() {
        let m = column_matrix(100, 1);
        for mech in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
            let plan = SparsityPlan {
                mechanism: mech,
                rate: 0.0,
                targets: vec![1],
                driver: Some(0),
                seed: 3,
            };
            assert_eq!(inject_sparsity(&m, &plan).unwrap(), m);
        }
    }

    #[test]
    fn mcar_rate_concentrates() {
        let m = column_matrix(10_000, 2);
        let plan = SparsityPlan {
            mechanism: Mechanism::Mcar,
            rate: 0.3,
            targets: vec![0],
            driver: None,
            seed: 5,
        };
        let out = inject_sparsity(&m, &plan).unwrap();
        assert!((out.sparsity(0) - 0.3).abs() < 0.02);
        assert_eq!(out.sparsity(1), 0.0);
    }

    #[test]
    fn mnar_masks_top_values() {
        let m = column_matrix(1000, 3);
        let plan = SparsityPlan {
            mechanism: Mechanism::Mnar,
            rate: 0.3,
            targets: vec![1],
            driver: None,
            seed: 0,
        };
        let out = inject_sparsity(&m, &plan).unwrap();
        let max_observed = out.observed_column(1).into_iter().fold(f64::MIN, f64::max);
        for r in 0..1000 {
            if !out.is_observed(r, 1) {
                assert!(m.get(r, 1).unwrap() >= max_observed);
            }
        }
        assert_eq!(out.missing_in_column(1), 300);
    }

    #[test]
    fn mar_follows_driver_and_spares_it() {
        let m = column_matrix(1000, 4);
        let plan = SparsityPlan {
            mechanism: Mechanism::Mar,
            rate: 0.2,
            targets: vec![1],
            driver: Some(0),
            seed: 0,
        };
        let out = inject_sparsity(&m, &plan).unwrap();
        assert_eq!(out.missing_in_column(0), 0);
        let threshold = (0..1000)
            .filter(|&r| !out.is_observed(r, 1))
            .map(|r| m.get(r, 0).unwrap())
            .fold(f64::MAX, f64::min);
        for r in 0..1000 {
            if out.is_observed(r, 1) {
                assert!(m.get(r, 0).unwrap() <= threshold);
            }
        }
    }

    #[test]
    fn plan_errors() {
        let m = column_matrix(10, 1);
        let mut plan = SparsityPlan {
            mechanism: Mechanism::Mar,
            rate: 0.2,
            targets: vec![1],
            driver: None,
            seed: 0,
        };
        assert!(matches!(inject_sparsity(&m, &plan), Err(Error::Spec(_))));
        plan.driver = Some(1);
        assert!(matches!(inject_sparsity(&m, &plan), Err(Error::Spec(_))));
        plan.mechanism = Mechanism::Mcar;
        plan.rate = 1.5;
        assert!(matches!(inject_sparsity(&m, &plan), Err(Error::Parameter(_))));
    }

    #[test]
    fn shuffle_properties() {
        let empty = LabeledStream::new(SparseMatrix::empty(0, 2), vec![], DriftSpec::none()).unwrap();
        assert!(shuffle_instances(&empty, 1).is_empty());

        let b = base(200);
        let s1 = shuffle_instances(&b, 8);
        let s2 = shuffle_instances(&b, 8);
        assert_eq!(s1, s2);
        let key = |s: &LabeledStream| {
            let mut v: Vec<(Vec<u64>, u8)> = (0..s.len())
                .map(|i| {
                    (
                        s.features.row_values(i).iter().map(|x| x.to_bits()).collect(),
                        s.labels[i],
                    )
                })
                .collect();
            v.sort();
            v
        };
        assert_eq!(key(&b), key(&s1));
        assert_ne!(b.labels, s1.labels);
    }

    #[test]
    fn family_parsing() {
        assert_eq!("Chi-Squared".parse::<Family>().unwrap(), Family::ChiSquared);
        assert!(matches!("weibull".parse::<Family>(), Err(Error::NoDefault(_))));
    }
}
