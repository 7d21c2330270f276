//! Windowed majority vote over base detectors, plus the ensemble risk model.
//!
//! A member votes +1 at instance i when it emitted Drift at some j with
//! i − W < j ≤ i, and −1 otherwise. The ensemble declares a drift at the first
//! instance where at least ⌈(N+1)/2⌉ members vote +1 and the averaged vote
//! φ is accepted as positive. Every recorded firing is then cleared and
//! member firings are ignored for the next W instances, so firings that all
//! fall within one W-window yield exactly one ensemble drift.

mod risk;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use risk::{
    empirical_risk, pairwise_correlation, risk_report, risk_upper_bound, risk_upper_bound_t0, EmpiricalRisk,
    PairwiseCorrelation, RiskBound, RiskParams, RiskReport,
};

use crate::detectors::{Detector, DetectorConfig, DetectorKind, DetectorOutput, DriftDetector, Signal};
use crate::{Error, Result};

/// Default vote window for streams of roughly ten thousand instances.
pub const DEFAULT_WINDOW: usize = 2000;

/// φ = mean of ±1 votes.
pub fn ensemble_score(votes: &[i8]) -> Result<f64> {
    if votes.is_empty() {
        return Err(Error::Config("ensemble score needs at least one vote".into()));
    }
    if let Some(v) = votes.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::Input(format!("votes must be +1 or -1, got {v}")));
    }
    Ok(votes.iter().map(|&v| f64::from(v)).sum::<f64>() / votes.len() as f64)
}

/// Three-way decision on an ensemble score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "-1")]
    Negative,
    #[serde(rename = "reject")]
    Reject,
    #[serde(rename = "+1")]
    Positive,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Negative => "-1",
            Decision::Reject => "reject",
            Decision::Positive => "+1",
        }
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// −1 if φ ≤ −t, +1 if φ ≥ t, reject in between. At t = 0, φ = 0 maps to +1.
pub fn decide(phi: f64, t: f64) -> Decision {
    if phi >= t {
        Decision::Positive
    } else if phi <= -t {
        Decision::Negative
    } else {
        Decision::Reject
    }
}

/// Smallest majority of `n` members, ⌈(n+1)/2⌉.
pub fn quorum(n: usize) -> usize {
    (n + 2) / 2
}

/// Named member sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// ADWIN + HDDM_A + KSWIN.
    Abrupt,
    /// HDDM_A + HDDM_W + PH.
    Gradual,
}

impl Preset {
    pub fn members(self) -> Vec<DetectorKind> {
        match self {
            Preset::Abrupt => vec![DetectorKind::Adwin, DetectorKind::HddmA, DetectorKind::Kswin],
            Preset::Gradual => vec![DetectorKind::HddmA, DetectorKind::HddmW, DetectorKind::PageHinkley],
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abrupt" => Ok(Preset::Abrupt),
            "gradual" => Ok(Preset::Gradual),
            _ => Err(Error::Config(format!("unknown ensemble preset '{s}'"))),
        }
    }
}

/// Members, vote window and rejection threshold of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub members: Vec<DetectorKind>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub threshold: f64,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl EnsembleConfig {
    pub fn preset(preset: Preset) -> Self {
        Self {
            members: preset.members(),
            window: DEFAULT_WINDOW,
            threshold: 0.0,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.len() < 2 {
            return Err(Error::Config("an ensemble needs at least two members".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("vote window must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold must be in [0, 1], got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Result of one ensemble step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutput {
    pub index: usize,
    /// Bit k set when member k votes +1.
    pub active_mask: u64,
    pub votes: Vec<i8>,
    pub phi: f64,
    pub decision: Decision,
    pub drift: bool,
}

/// The vote/suppression state machine, independent of the detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleVoter {
    window: usize,
    threshold: f64,
    last_fire: Vec<Option<usize>>,
    last_index: Option<usize>,
    suppressed_until: usize,
}

impl EnsembleVoter {
    pub fn new(members: usize, window: usize, threshold: f64) -> Result<Self> {
        if members < 2 {
            return Err(Error::Config("an ensemble needs at least two members".into()));
        }
        if members > 64 {
            return Err(Error::Config("at most 64 ensemble members are supported".into()));
        }
        if window == 0 {
            return Err(Error::Config("vote window must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!("threshold must be in [0, 1], got {threshold}")));
        }
        Ok(Self {
            window,
            threshold,
            last_fire: vec![None; members],
            last_index: None,
            suppressed_until: 0,
        })
    }

    pub fn members(&self) -> usize {
        self.last_fire.len()
    }

    /// Most recent recorded firing per member.
    pub fn firings(&self) -> &[Option<usize>] {
        &self.last_fire
    }

    /// Advances to `index` with one output per member, in member order.
    pub fn update(&mut self, index: usize, outputs: &[DetectorOutput]) -> Result<EnsembleOutput> {
        if outputs.len() != self.last_fire.len() {
            return Err(Error::Sequencing(format!(
                "expected {} member outputs, got {}",
                self.last_fire.len(),
                outputs.len()
            )));
        }
        if let Some(o) = outputs.iter().find(|o| o.index != index) {
            return Err(Error::Sequencing(format!(
                "member output for instance {} fed at instance {index}",
                o.index
            )));
        }
        if self.last_index.is_some_and(|last| index <= last) {
            return Err(Error::Sequencing(format!(
                "instance {index} does not follow {}",
                self.last_index.unwrap_or(0)
            )));
        }
        self.last_index = Some(index);
        if index >= self.suppressed_until {
            for (slot, o) in self.last_fire.iter_mut().zip(outputs) {
                if o.signal == Signal::Drift {
                    *slot = Some(index);
                }
            }
        }
        let votes: Vec<i8> = self
            .last_fire
            .iter()
            .map(|f| match f {
                Some(j) if index - j < self.window => 1,
                _ => -1,
            })
            .collect();
        let active_mask = votes
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .fold(0u64, |m, (k, _)| m | (1 << k));
        let positive = active_mask.count_ones() as usize;
        let phi = ensemble_score(&votes)?;
        let decision = decide(phi, self.threshold);
        let drift = positive >= quorum(votes.len()) && decision == Decision::Positive;
        if drift {
            self.last_fire.iter_mut().for_each(|f| *f = None);
            self.suppressed_until = index + self.window;
        }
        Ok(EnsembleOutput {
            index,
            active_mask,
            votes,
            phi,
            decision,
            drift,
        })
    }

    /// First instance at which member firings count again.
    pub fn suppressed_until(&self) -> usize {
        self.suppressed_until
    }

    pub fn reset(&mut self) {
        self.last_fire.iter_mut().for_each(|f| *f = None);
        self.last_index = None;
        self.suppressed_until = 0;
    }
}

/// Ensemble drift indices for given member firing indices over `0..len`.
pub fn replay_firings(firings: &[Vec<usize>], len: usize, window: usize, threshold: f64) -> Result<Vec<usize>> {
    let mut voter = EnsembleVoter::new(firings.len(), window, threshold)?;
    let mut out = Vec::new();
    for index in 0..len {
        let outputs: Vec<DetectorOutput> = firings
            .iter()
            .map(|f| DetectorOutput {
                signal: if f.contains(&index) { Signal::Drift } else { Signal::InControl },
                index,
            })
            .collect();
        if voter.update(index, &outputs)?.drift {
            out.push(index);
        }
    }
    Ok(out)
}

/// One ensemble step together with the member signals that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStep {
    pub members: Vec<Signal>,
    pub output: EnsembleOutput,
}

/// Base detectors driven in lockstep by one scalar stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    kinds: Vec<DetectorKind>,
    detectors: Vec<Detector>,
    voter: EnsembleVoter,
    next_index: usize,
}

impl Ensemble {
    /// Builds the members from `detectors`; member k gets seed derived from
    /// (`seed`, k).
    pub fn new(config: &EnsembleConfig, detectors: &DetectorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let built = config
            .members
            .iter()
            .enumerate()
            .map(|(k, &kind)| detectors.build(kind, crate::rng::derive_seed(seed, k as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kinds: config.members.clone(),
            detectors: built,
            voter: EnsembleVoter::new(config.members.len(), config.window, config.threshold)?,
            next_index: 0,
        })
    }

    pub fn members(&self) -> &[DetectorKind] {
        &self.kinds
    }

    pub fn update(&mut self, x: f64) -> Result<EnsembleStep> {
        let index = self.next_index;
        let members = self
            .detectors
            .iter_mut()
            .map(|d| d.update(x))
            .collect::<Result<Vec<_>>>()?;
        let outputs: Vec<DetectorOutput> = members.iter().map(|&signal| DetectorOutput { signal, index }).collect();
        let output = self.voter.update(index, &outputs)?;
        self.next_index += 1;
        Ok(EnsembleStep { members, output })
    }

    pub fn reset(&mut self) {
        self.detectors.iter_mut().for_each(DriftDetector::reset);
        self.voter.reset();
        self.next_index = 0;
    }
}

/// Writes `index,active_mask,decision,drift` rows for every step where a
/// member was active or the ensemble fired.
pub fn write_event_log<W: Write>(mut out: W, outputs: &[EnsembleOutput]) -> std::io::Result<()> {
    writeln!(out, "index,active_mask,decision,drift")?;
    for o in outputs.iter().filter(|o| o.active_mask != 0 || o.drift) {
        writeln!(out, "{},{},{},{}", o.index, o.active_mask, o.decision, u8::from(o.drift))?;
    }
    Ok(())
}
