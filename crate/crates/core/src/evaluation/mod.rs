//! Prequential (test-then-train) evaluation with drift-triggered retraining.

mod learner;
mod metrics;

use serde::{Deserialize, Serialize};

pub use learner::{GaussianNb, Learner, VARIANCE_FLOOR};
pub use metrics::{
    accuracy, adi, detection_metrics, drift_region_labels, prequential_error, DetectionMetrics, DEFAULT_ADI_FLOOR,
};

use crate::detectors::{Detector, DriftDetector, Signal};
use crate::ensemble::{Ensemble, EnsembleOutput};
use crate::streamgen::{DriftSpec, LabeledStream};
use crate::{Error, Result};

/// Per-instance loss.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Loss {
    #[default]
    ZeroOne,
    /// Costs of predicting 1 on a 0 and 0 on a 1.
    Weighted { false_positive: f64, false_negative: f64 },
}

impl Loss {
    pub fn eval(self, truth: u8, predicted: u8) -> f64 {
        match (self, truth == predicted) {
            (_, true) => 0.0,
            (Loss::ZeroOne, false) => 1.0,
            (Loss::Weighted { false_positive, .. }, false) if predicted == 1 => false_positive,
            (Loss::Weighted { false_negative, .. }, false) => false_negative,
        }
    }

    pub fn validate(self) -> Result<()> {
        if let Loss::Weighted {
            false_positive,
            false_negative,
        } = self
        {
            if !(false_positive.is_finite() && false_negative.is_finite() && false_positive >= 0.0 && false_negative >= 0.0)
            {
                return Err(Error::Config("loss weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}

/// What to do with the learner when the monitor signals drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainPolicy {
    #[default]
    Reset,
    Ignore,
}

/// Drift monitor fed with the error bit of each prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum Monitor {
    None,
    Detector(Detector),
    Ensemble(Ensemble),
}

impl Monitor {
    fn update(&mut self, error: f64) -> Result<(Signal, Option<EnsembleOutput>)> {
        match self {
            Monitor::None => Ok((Signal::InControl, None)),
            Monitor::Detector(d) => Ok((d.update(error)?, None)),
            Monitor::Ensemble(e) => {
                let step = e.update(error)?;
                let signal = if step.output.drift {
                    Signal::Drift
                } else if step.members.contains(&Signal::Drift) || step.members.contains(&Signal::Warning) {
                    Signal::Warning
                } else {
                    Signal::InControl
                };
                Ok((signal, Some(step.output)))
            }
        }
    }
}

/// One prequential step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub index: usize,
    pub predicted: u8,
    pub truth: u8,
    pub loss: f64,
    pub signal: Signal,
    pub retrained: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    /// Ensemble outputs, one per record, when the monitor is an ensemble.
    pub ensemble: Vec<EnsembleOutput>,
    pub drift: DriftSpec,
}

impl RunTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Instances at which the monitor signalled drift.
    pub fn detections(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.signal == Signal::Drift)
            .map(|r| r.index)
            .collect()
    }

    /// Fraction of correct predictions.
    pub fn accuracy(&self) -> Result<f64> {
        if self.records.is_empty() {
            return Err(Error::Input("accuracy of an empty trace".into()));
        }
        let correct = self.records.iter().filter(|r| r.predicted == r.truth).count();
        Ok(correct as f64 / self.records.len() as f64)
    }

    /// Accuracy over `records[from..to]`.
    pub fn window_accuracy(&self, from: usize, to: usize) -> Option<f64> {
        let slice = self.records.get(from..to.min(self.records.len()))?;
        (!slice.is_empty())
            .then(|| slice.iter().filter(|r| r.predicted == r.truth).count() as f64 / slice.len() as f64)
    }

    /// Writes `index,predicted,truth,loss,signal,retrained` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,predicted,truth,loss,signal,retrained")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.index,
                r.predicted,
                r.truth,
                r.loss,
                r.signal.as_str(),
                u8::from(r.retrained)
            )?;
        }
        Ok(())
    }
}

/// Runs the stream through predict, loss, monitor, policy, learner update.
///
/// The monitor sees the error bit (1 on a misprediction) whatever the loss.
pub fn prequential_run<L: Learner + ?Sized>(
    stream: &LabeledStream,
    learner: &mut L,
    monitor: &mut Monitor,
    policy: RetrainPolicy,
    loss: Loss,
) -> Result<RunTrace> {
    loss.validate()?;
    let mut records = Vec::with_capacity(stream.len());
    let mut ensemble = Vec::new();
    for index in 0..stream.len() {
        let x = stream.features.dense_row(index).ok_or_else(|| {
            Error::Input(format!("instance {index} has missing features; impute before evaluation"))
        })?;
        let truth = stream.labels[index];
        let predicted = learner.predict(x)?;
        let error = if predicted == truth { 0.0 } else { 1.0 };
        let (signal, output) = monitor.update(error)?;
        if let Some(o) = output {
            ensemble.push(o);
        }
        let retrained = signal == Signal::Drift && policy == RetrainPolicy::Reset;
        if retrained {
            learner.reset();
        }
        learner.update(x, truth)?;
        records.push(TraceRecord {
            index,
            predicted,
            truth,
            loss: loss.eval(truth, predicted),
            signal,
            retrained,
        });
    }
    Ok(RunTrace {
        records,
        ensemble,
        drift: stream.drift.clone(),
    })
}

/// Prequential summary and detection metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub prequential_error: Vec<f64>,
    pub accuracy: f64,
    pub detections: Vec<usize>,
    pub retrains: usize,
    #[serde(flatten)]
    pub detection: DetectionMetrics,
}

impl MetricsReport {
    pub fn from_trace(trace: &RunTrace, adi_floor: usize) -> Result<Self> {
        let detections = trace.detections();
        Ok(Self {
            prequential_error: prequential_error(&trace.losses()),
            accuracy: trace.accuracy()?,
            retrains: trace.records.iter().filter(|r| r.retrained).count(),
            detection: detection_metrics(&detections, &trace.drift, adi_floor)?,
            detections,
        })
    }
}
