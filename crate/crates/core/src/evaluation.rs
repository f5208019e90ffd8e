//! Detection scoring against ground truth.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regions::{Label, LossCause};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("prediction and truth lengths differ ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("window '{name}' [{t0}, {t1}) outside stream span [{lo}, {hi})")]
    WindowOutOfRange {
        name: String,
        t0: f64,
        t1: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `100 · num / den` rounded half-up to one decimal, in exact integer
/// arithmetic.
pub fn percent_1dp(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        return None;
    }
    let (n, d) = (num as u128, den as u128);
    let tenths = (2000 * n + d) / (2 * d);
    Some(tenths as f64 / 10.0)
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity_pct(&self) -> Option<f64> {
        percent_1dp(self.tp, self.tp + self.fn_)
    }

    pub fn specificity_pct(&self) -> Option<f64> {
        percent_1dp(self.tn, self.tn + self.fp)
    }

    pub fn accuracy_pct(&self) -> Option<f64> {
        percent_1dp(self.tp + self.tn, self.total())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_, self.tn + o.tn)
    }

    /// Matrix seen from the complementary positive set.
    pub fn swapped(&self) -> Self {
        Self::new(self.tn, self.fn_, self.fp, self.tp)
    }
}

/// Labels counted as detections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveSet(pub BTreeSet<Label>);

impl PositiveSet {
    /// Any RFI: jamming, spoofing and jamming-attributed signal loss.
    pub fn rfi() -> Self {
        Self(BTreeSet::from([
            Label::Jamming,
            Label::Spoofing,
            Label::SignalLoss(LossCause::Jamming),
        ]))
    }

    /// Spoofing characterisation.
    pub fn spoofing() -> Self {
        Self(BTreeSet::from([Label::Spoofing]))
    }

    pub fn complement(&self) -> Self {
        Self(Label::ALL.into_iter().filter(|l| !self.0.contains(l)).collect())
    }

    pub fn contains(&self, l: Label) -> bool {
        self.0.contains(&l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub matrix: ConfusionMatrix,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

impl From<ConfusionMatrix> for DetectionReport {
    fn from(matrix: ConfusionMatrix) -> Self {
        Self {
            sensitivity: matrix.sensitivity(),
            specificity: matrix.specificity(),
            accuracy: matrix.accuracy(),
            matrix,
        }
    }
}

pub fn confusion(pred: &[Label], truth: &[Label], positive: &PositiveSet) -> Result<ConfusionMatrix, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (p, t) in pred.iter().zip(truth) {
        match (positive.contains(*p), positive.contains(*t)) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

pub fn score_detection(pred: &[Label], truth: &[Label], positive: &PositiveSet) -> Result<DetectionReport, EvalError> {
    confusion(pred, truth, positive).map(DetectionReport::from)
}

/// Half-open time window `[t0, t1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub name: String,
    pub t0: f64,
    pub t1: f64,
}

impl Window {
    pub fn new(name: impl Into<String>, t0: f64, t1: f64) -> Self {
        Self {
            name: name.into(),
            t0,
            t1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSlice {
    pub name: String,
    pub pred: Vec<Label>,
    pub truth: Vec<Label>,
}

/// Span covered by sorted epoch times: first epoch to one step past the last.
pub fn stream_span(times: &[f64]) -> (f64, f64) {
    match times {
        [] => (0.0, 0.0),
        [t] => (*t, *t),
        [.., a, b] => (times[0], b + (b - a)),
    }
}

pub fn window_slice(
    times: &[f64],
    pred: &[Label],
    truth: &[Label],
    windows: &[Window],
) -> Result<Vec<WindowSlice>, EvalError> {
    if pred.len() != truth.len() || times.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len().min(times.len()),
        });
    }
    let (lo, hi) = stream_span(times);
    windows
        .iter()
        .map(|w| {
            if w.t0 < lo || w.t1 > hi || w.t1 < w.t0 {
                return Err(EvalError::WindowOutOfRange {
                    name: w.name.clone(),
                    t0: w.t0,
                    t1: w.t1,
                    lo,
                    hi,
                });
            }
            let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= w.t0 && times[k] < w.t1).collect();
            Ok(WindowSlice {
                name: w.name.clone(),
                pred: idx.iter().map(|&k| pred[k]).collect(),
                truth: idx.iter().map(|&k| truth[k]).collect(),
            })
        })
        .collect()
}

/// One scored window as written to report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub name: String,
    pub positive_set: Vec<Label>,
    #[serde(flatten)]
    pub matrix: ConfusionMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specificity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub specificity_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_pct: Option<f64>,
}

impl WindowReport {
    pub fn new(name: impl Into<String>, positive: &PositiveSet, m: ConfusionMatrix) -> Self {
        Self {
            name: name.into(),
            positive_set: positive.0.iter().copied().collect(),
            matrix: m,
            sensitivity: m.sensitivity(),
            specificity: m.specificity(),
            accuracy: m.accuracy(),
            sensitivity_pct: m.sensitivity_pct(),
            specificity_pct: m.specificity_pct(),
            accuracy_pct: m.accuracy_pct(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub windows: Vec<WindowReport>,
}

impl EvalReport {
    /// Table-style CSV: test, counts, then percentages (`-` when undefined).
    pub fn to_csv(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("-".to_string(), |p| format!("{p:.1}"));
        let mut s = String::from("test,tp,fp,fn,tn,sensitivity_pct,specificity_pct,accuracy_pct\n");
        for w in &self.windows {
            let m = &w.matrix;
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                w.name,
                m.tp,
                m.fp,
                m.fn_,
                m.tn,
                pct(w.sensitivity_pct),
                pct(w.specificity_pct),
                pct(w.accuracy_pct)
            ));
        }
        s
    }
}
