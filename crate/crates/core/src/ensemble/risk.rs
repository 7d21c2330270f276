//! Risk of the voting ensemble: analytic upper bound and empirical estimate.

use serde::{Deserialize, Serialize};

use crate::{stats, Error, Result};

/// Inputs of the risk bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    /// E[z] with z = y·φ.
    pub mu_z: f64,
    /// Average pairwise correlation of the members.
    pub rho_bar: f64,
    /// Cost of a wrong decision.
    pub c1: f64,
    /// Cost of a rejection.
    pub c2: f64,
    /// Rejection threshold.
    pub t: f64,
}

/// Value of the bound; `limiting` marks the ρ̄ = 0 limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBound {
    pub value: f64,
    pub limiting: bool,
}

impl RiskParams {
    fn validate(&self) -> Result<()> {
        let p = |m: String| Err(Error::Parameter(m));
        if !(self.mu_z > -1.0 && self.mu_z < 1.0) {
            return p(format!("mu_z must be in (-1, 1), got {}", self.mu_z));
        }
        if !(0.0..=1.0).contains(&self.rho_bar) {
            return p(format!("rho_bar must be in [0, 1], got {}", self.rho_bar));
        }
        if !(self.c2 >= 0.0 && self.c1 >= self.c2 && self.c1.is_finite()) {
            return p(format!("costs need c1 >= c2 >= 0, got c1={} c2={}", self.c1, self.c2));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return p(format!("threshold must be in [0, 1], got {}", self.t));
        }
        if self.mu_z <= self.t {
            return Err(Error::Validity(format!(
                "bound requires mu_z > t, got mu_z={} t={}",
                self.mu_z, self.t
            )));
        }
        Ok(())
    }
}

/// R ≤ (c1 − c2)/(1 + (μ+t)²/(ρ̄(1−μ²))) + c2/(1 + (μ−t)²/(ρ̄(1−μ²))).
pub fn risk_upper_bound(params: RiskParams) -> Result<RiskBound> {
    params.validate()?;
    let RiskParams { mu_z, rho_bar, c1, c2, t } = params;
    if rho_bar == 0.0 {
        return Ok(RiskBound {
            value: 0.0,
            limiting: true,
        });
    }
    let spread = rho_bar * (1.0 - mu_z * mu_z);
    let value = (c1 - c2) / (1.0 + (mu_z + t).powi(2) / spread) + c2 / (1.0 + (mu_z - t).powi(2) / spread);
    Ok(RiskBound { value, limiting: false })
}

/// The t = 0 form, R ≤ c1/(1 + μ²/(ρ̄(1−μ²))).
pub fn risk_upper_bound_t0(mu_z: f64, rho_bar: f64, c1: f64) -> Result<RiskBound> {
    RiskParams {
        mu_z,
        rho_bar,
        c1,
        c2: 0.0,
        t: 0.0,
    }
    .validate()?;
    if rho_bar == 0.0 {
        return Ok(RiskBound {
            value: 0.0,
            limiting: true,
        });
    }
    Ok(RiskBound {
        value: c1 / (1.0 + mu_z * mu_z / (rho_bar * (1.0 - mu_z * mu_z))),
        limiting: false,
    })
}

/// Error, rejection and risk rates of a z trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRisk {
    /// Fraction with z ≤ −t.
    pub p_e: f64,
    /// Fraction with −t < z < t.
    pub p_r: f64,
    /// Fraction with z ≥ t.
    pub p_a: f64,
    /// c1·P_E + c2·P_R.
    pub r: f64,
}

/// Counts wrong, rejected and accepted decisions over a z trace.
///
/// At t = 0 a zero z is accepted, matching [`super::decide`].
pub fn empirical_risk(z: &[f64], t: f64, c1: f64, c2: f64) -> Result<EmpiricalRisk> {
    if z.is_empty() {
        return Err(Error::Input("empirical risk needs a nonempty trace".into()));
    }
    if let Some(v) = z.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::Input(format!("z values must lie in [-1, 1], got {v}")));
    }
    let (mut wrong, mut reject, mut accept) = (0usize, 0usize, 0usize);
    for &v in z {
        match super::decide(v, t) {
            super::Decision::Negative => wrong += 1,
            super::Decision::Reject => reject += 1,
            super::Decision::Positive => accept += 1,
        }
    }
    let n = z.len() as f64;
    let (p_e, p_r) = (wrong as f64 / n, reject as f64 / n);
    Ok(EmpiricalRisk {
        p_e,
        p_r,
        p_a: accept as f64 / n,
        r: c1 * p_e + c2 * p_r,
    })
}

/// Mean Pearson correlation over member pairs with defined correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseCorrelation {
    /// `None` when no pair had a defined correlation.
    pub rho_bar: Option<f64>,
    pub pairs_used: usize,
    /// Pairs skipped because one history was constant.
    pub excluded: Vec<(usize, usize)>,
}

pub fn pairwise_correlation(histories: &[Vec<i8>]) -> Result<PairwiseCorrelation> {
    if histories.len() < 2 {
        return Err(Error::Input("pairwise correlation needs at least two histories".into()));
    }
    let len = histories[0].len();
    if histories.iter().any(|h| h.len() != len) {
        return Err(Error::Input("vote histories differ in length".into()));
    }
    let as_f64: Vec<Vec<f64>> = histories.iter().map(|h| h.iter().map(|&v| f64::from(v)).collect()).collect();
    let mut sum = 0.0;
    let mut used = 0;
    let mut excluded = Vec::new();
    for a in 0..as_f64.len() {
        for b in a + 1..as_f64.len() {
            match stats::pearson(&as_f64[a], &as_f64[b]) {
                Some(r) => {
                    sum += r;
                    used += 1;
                }
                None => excluded.push((a, b)),
            }
        }
    }
    Ok(PairwiseCorrelation {
        rho_bar: (used > 0).then(|| sum / used as f64),
        pairs_used: used,
        excluded,
    })
}

/// Risk summary of one ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub mu_z: f64,
    pub rho_bar: Option<f64>,
    pub excluded_pairs: Vec<(usize, usize)>,
    pub p_e: f64,
    pub p_r: f64,
    pub r: f64,
    pub t: f64,
    pub c1: f64,
    pub c2: f64,
    /// Analytic bound, absent when inapplicable.
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_note: Option<String>,
}

/// Builds a [`RiskReport`] from the per-instance ensemble scores φ, the truth
/// labels y ∈ {−1, +1} and the member vote histories.
pub fn risk_report(
    phi: &[f64],
    truth: &[i8],
    histories: &[Vec<i8>],
    t: f64,
    c1: f64,
    c2: f64,
) -> Result<RiskReport> {
    if phi.len() != truth.len() {
        return Err(Error::Input("score and truth traces differ in length".into()));
    }
    if let Some(y) = truth.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::Input(format!("truth labels must be +1 or -1, got {y}")));
    }
    let z: Vec<f64> = phi.iter().zip(truth).map(|(&p, &y)| p * f64::from(y)).collect();
    let emp = empirical_risk(&z, t, c1, c2)?;
    let mu_z = stats::mean(&z).unwrap_or(0.0);
    let corr = pairwise_correlation(histories)?;
    let (bound, bound_note) = match corr.rho_bar {
        None => (None, Some("no member pair has a defined correlation".to_string())),
        Some(rho) if rho < 0.0 => (None, Some(format!("negative average correlation {rho}"))),
        Some(rho) => match risk_upper_bound(RiskParams { mu_z, rho_bar: rho, c1, c2, t }) {
            Ok(b) if b.limiting => (Some(b.value), Some("rho_bar = 0 limit".into())),
            Ok(b) => (Some(b.value), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    Ok(RiskReport {
        mu_z,
        rho_bar: corr.rho_bar,
        excluded_pairs: corr.excluded,
        p_e: emp.p_e,
        p_r: emp.p_r,
        r: emp.r,
        t,
        c1,
        c2,
        bound,
        bound_note,
    })
}
