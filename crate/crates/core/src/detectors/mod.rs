//! Online concept-drift detectors.
//!
//! Every detector consumes one scalar per instance (normally the 0/1
//! prediction error) and answers with a [`Signal`]. A detector that emits
//! [`Signal::Drift`] has already reset itself when `update` returns, except
//! that ADWIN keeps the post-cut window and KSWIN keeps its r newest values.

mod adwin;
mod ddm;
mod eddm;
mod hddm_a;
mod hddm_w;
mod kswin;
mod ph;

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adwin::{Adwin, AdwinConfig, Bucket};
pub use ddm::{Ddm, DdmConfig};
pub use eddm::{Eddm, EddmConfig};
pub use hddm_a::{HddmA, HddmAConfig};
pub use hddm_w::{HddmW, HddmWConfig};
pub use kswin::{Kswin, KswinConfig};
pub use ph::{PageHinkley, PageHinkleyConfig};

use crate::{Error, Result};

/// Detector state after one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signal {
    InControl,
    Warning,
    Drift,
}

impl Signal {
    pub fn as_str(self) -> &'static str {
        match self {
            Signal::InControl => "in_control",
            Signal::Warning => "warning",
            Signal::Drift => "drift",
        }
    }
}

impl std::fmt::Display for Signal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A signal tagged with the zero-based instance index that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorOutput {
    pub signal: Signal,
    pub index: usize,
}

/// Common interface of the seven detectors.
pub trait DriftDetector {
    /// Feeds one observation.
    fn update(&mut self, x: f64) -> Result<Signal>;
    /// Returns to the freshly constructed state.
    fn reset(&mut self);
    fn kind(&self) -> DetectorKind;
}

/// The available detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "PH")]
    PageHinkley,
    #[serde(rename = "DDM")]
    Ddm,
    #[serde(rename = "EDDM")]
    Eddm,
    #[serde(rename = "HDDM_A")]
    HddmA,
    #[serde(rename = "HDDM_W")]
    HddmW,
    #[serde(rename = "ADWIN")]
    Adwin,
    #[serde(rename = "KSWIN")]
    Kswin,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 7] = [
        DetectorKind::PageHinkley,
        DetectorKind::Ddm,
        DetectorKind::Eddm,
        DetectorKind::HddmA,
        DetectorKind::HddmW,
        DetectorKind::Adwin,
        DetectorKind::Kswin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::PageHinkley => "PH",
            DetectorKind::Ddm => "DDM",
            DetectorKind::Eddm => "EDDM",
            DetectorKind::HddmA => "HDDM_A",
            DetectorKind::HddmW => "HDDM_W",
            DetectorKind::Adwin => "ADWIN",
            DetectorKind::Kswin => "KSWIN",
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Ok(match norm.as_str() {
            "PH" | "PAGE_HINKLEY" | "PAGEHINKLEY" => DetectorKind::PageHinkley,
            "DDM" => DetectorKind::Ddm,
            "EDDM" => DetectorKind::Eddm,
            "HDDM_A" | "HDDMA" => DetectorKind::HddmA,
            "HDDM_W" | "HDDMW" => DetectorKind::HddmW,
            "ADWIN" => DetectorKind::Adwin,
            "KSWIN" => DetectorKind::Kswin,
            _ => return Err(Error::Config(format!("unknown detector '{s}'"))),
        })
    }
}

/// Parameters for every detector kind; fields left out of a config file keep
/// their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub ph: PageHinkleyConfig,
    pub ddm: DdmConfig,
    pub eddm: EddmConfig,
    pub hddm_a: HddmAConfig,
    pub hddm_w: HddmWConfig,
    pub adwin: AdwinConfig,
    pub kswin: KswinConfig,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.ph.validate()?;
        self.ddm.validate()?;
        self.eddm.validate()?;
        self.hddm_a.validate()?;
        self.hddm_w.validate()?;
        self.adwin.validate()?;
        self.kswin.validate()
    }

    /// Builds a detector. `seed` only matters for KSWIN.
    pub fn build(&self, kind: DetectorKind, seed: u64) -> Result<Detector> {
        Ok(match kind {
            DetectorKind::PageHinkley => Detector::PageHinkley(PageHinkley::new(self.ph.clone())?),
            DetectorKind::Ddm => Detector::Ddm(Ddm::new(self.ddm.clone())?),
            DetectorKind::Eddm => Detector::Eddm(Eddm::new(self.eddm.clone())?),
            DetectorKind::HddmA => Detector::HddmA(HddmA::new(self.hddm_a.clone())?),
            DetectorKind::HddmW => Detector::HddmW(HddmW::new(self.hddm_w.clone())?),
            DetectorKind::Adwin => Detector::Adwin(Adwin::new(self.adwin.clone())?),
            DetectorKind::Kswin => Detector::Kswin(Kswin::new(self.kswin.clone(), seed)?),
        })
    }
}

/// Any of the seven detectors, dispatched statically.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    PageHinkley(PageHinkley),
    Ddm(Ddm),
    Eddm(Eddm),
    HddmA(HddmA),
    HddmW(HddmW),
    Adwin(Adwin),
    Kswin(Kswin),
}

impl Detector {
    /// Detector with default parameters.
    pub fn with_defaults(kind: DetectorKind, seed: u64) -> Self {
        DetectorConfig::default()
            .build(kind, seed)
            .expect("default configs are valid")
    }

    fn inner(&mut self) -> &mut dyn DriftDetector {
        match self {
            Detector::PageHinkley(d) => d,
            Detector::Ddm(d) => d,
            Detector::Eddm(d) => d,
            Detector::HddmA(d) => d,
            Detector::HddmW(d) => d,
            Detector::Adwin(d) => d,
            Detector::Kswin(d) => d,
        }
    }
}

impl DriftDetector for Detector {
    fn update(&mut self, x: f64) -> Result<Signal> {
        self.inner().update(x)
    }

    fn reset(&mut self) {
        self.inner().reset()
    }

    fn kind(&self) -> DetectorKind {
        match self {
            Detector::PageHinkley(_) => DetectorKind::PageHinkley,
            Detector::Ddm(_) => DetectorKind::Ddm,
            Detector::Eddm(_) => DetectorKind::Eddm,
            Detector::HddmA(_) => DetectorKind::HddmA,
            Detector::HddmW(_) => DetectorKind::HddmW,
            Detector::Adwin(_) => DetectorKind::Adwin,
            Detector::Kswin(_) => DetectorKind::Kswin,
        }
    }
}

/// Feeds a whole stream and returns one output per observation.
pub fn run_detector<D: DriftDetector + ?Sized>(detector: &mut D, xs: &[f64]) -> Result<Vec<DetectorOutput>> {
    xs.iter()
        .enumerate()
        .map(|(index, &x)| detector.update(x).map(|signal| DetectorOutput { signal, index }))
        .collect()
}

/// Indices at which a stream made the detector emit Drift.
pub fn drift_indices<D: DriftDetector + ?Sized>(detector: &mut D, xs: &[f64]) -> Result<Vec<usize>> {
    Ok(run_detector(detector, xs)?
        .into_iter()
        .filter(|o| o.signal == Signal::Drift)
        .map(|o| o.index)
        .collect())
}

/// One non-InControl emission, as written to the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorEvent {
    pub index: usize,
    pub detector: DetectorKind,
    pub signal: Signal,
}

/// Writes events as CSV with header `index,detector,signal`.
pub fn write_event_log<W: Write>(mut out: W, events: &[DetectorEvent]) -> std::io::Result<()> {
    writeln!(out, "index,detector,signal")?;
    for e in events {
        writeln!(out, "{},{},{}", e.index, e.detector, e.signal)?;
    }
    Ok(())
}

pub(crate) fn check_finite(x: f64, who: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("{who} received non-finite observation {x}")))
    }
}

pub(crate) fn check_binary(x: f64, who: &str) -> Result<bool> {
    if x == 0.0 {
        Ok(false)
    } else if x == 1.0 {
        Ok(true)
    } else {
        Err(Error::Input(format!("{who} expects a 0/1 error bit, got {x}")))
    }
}

pub(crate) fn check_unit(x: f64, who: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Input(format!("{who} expects observations in [0, 1], got {x}")))
    }
}

pub(crate) fn check_open_unit(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be in (0, 1), got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng as _;

    fn step_stream(seed: u64, n: usize, change: usize) -> Vec<f64> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|i| {
                let p = if i < change { 0.1 } else { 0.9 };
                f64::from(u8::from(rng.random::<f64>() < p))
            })
            .collect()
    }

    #[test]
    fn constant_streams_never_drift() {
        for kind in DetectorKind::ALL {
            for value in [0.0, 1.0] {
                let mut d = Detector::with_defaults(kind, 7);
                let xs = vec![value; 20_000];
                assert!(drift_indices(&mut d, &xs).unwrap().is_empty(), "{kind} on constant {value}");
            }
        }
    }

    #[test]
    fn every_detector_catches_a_step() {
        for kind in DetectorKind::ALL {
            let mut d = Detector::with_defaults(kind, 3);
            let xs = step_stream(11, 10_000, 5000);
            let hits = drift_indices(&mut d, &xs).unwrap();
            assert!(hits.iter().any(|&i| i > 5000 && i <= 6000), "{kind}: {hits:?}");
        }
    }

    #[test]
    fn identical_inputs_give_identical_outputs() {
        let xs = step_stream(5, 3000, 1500);
        for kind in DetectorKind::ALL {
            let a = run_detector(&mut Detector::with_defaults(kind, 9), &xs).unwrap();
            let b = run_detector(&mut Detector::with_defaults(kind, 9), &xs).unwrap();
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn reset_restores_fresh_state() {
        let xs = step_stream(2, 500, 250);
        for kind in DetectorKind::ALL {
            let fresh = Detector::with_defaults(kind, 1);
            let mut d = fresh.clone();
            run_detector(&mut d, &xs).unwrap();
            d.reset();
            assert_eq!(d, fresh, "{kind}");
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in DetectorKind::ALL {
            assert_eq!(kind.name().parse::<DetectorKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert!("XYZ".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn event_log_format() {
        let mut buf = Vec::new();
        let events = [DetectorEvent {
            index: 12,
            detector: DetectorKind::HddmA,
            signal: Signal::Drift,
        }];
        write_event_log(&mut buf, &events).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,detector,signal\n12,HDDM_A,drift\n");
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        for kind in DetectorKind::ALL {
            let mut d = Detector::with_defaults(kind, 0);
            assert!(matches!(d.update(f64::NAN), Err(Error::Input(_))), "{kind}");
        }
        let mut ddm = Detector::with_defaults(DetectorKind::Ddm, 0);
        assert!(ddm.update(0.5).is_err());
        let mut hddm = Detector::with_defaults(DetectorKind::HddmA, 0);
        assert!(hddm.update(1.5).is_err());
    }
}
