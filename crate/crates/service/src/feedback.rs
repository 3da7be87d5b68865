//! In-memory questionnaire buffer and its live analysis.

use std::collections::VecDeque;
use std::sync::Mutex;

use emoheal_core::stats::{one_sample_t, pearson_r, Correlation, StatSummary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CAPACITY: usize = 10_000;
pub const LIKERT_MIDPOINT: f64 = 3.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeedbackError {
    #[error("{field} must be an integer from 1 to 5, got {value}")]
    OutOfRange { field: &'static str, value: i64 },
}

/// One post-session questionnaire, each item on a 1..=5 Likert scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRecord {
    pub mood_impact: i64,
    pub emotion_accuracy: i64,
    pub atmosphere: i64,
    pub coherence: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    MoodImpact,
    EmotionAccuracy,
    Atmosphere,
    Coherence,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::MoodImpact,
        Measure::EmotionAccuracy,
        Measure::Atmosphere,
        Measure::Coherence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::MoodImpact => "mood_impact",
            Measure::EmotionAccuracy => "emotion_accuracy",
            Measure::Atmosphere => "atmosphere",
            Measure::Coherence => "coherence",
        }
    }
}

impl FeedbackRecord {
    pub fn get(&self, m: Measure) -> i64 {
        match m {
            Measure::MoodImpact => self.mood_impact,
            Measure::EmotionAccuracy => self.emotion_accuracy,
            Measure::Atmosphere => self.atmosphere,
            Measure::Coherence => self.coherence,
        }
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        for m in Measure::ALL {
            let value = self.get(m);
            if !(1..=5).contains(&value) {
                return Err(FeedbackError::OutOfRange { field: m.name(), value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub measure: Measure,
    pub n: usize,
    #[serde(flatten)]
    pub summary: Option<SummaryFields>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryFields {
    pub mean: f64,
    pub sd: f64,
    pub t: f64,
    pub p_two_sided: f64,
}

impl From<StatSummary> for SummaryFields {
    fn from(s: StatSummary) -> Self {
        Self {
            mean: s.mean,
            sd: s.sd,
            t: s.t,
            p_two_sided: s.p_two_sided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub x: Measure,
    pub y: Measure,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_two_sided: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub n: usize,
    pub midpoint: f64,
    pub measures: Vec<MeasureReport>,
    pub correlations: Vec<CorrelationReport>,
}

/// Bounded FIFO of feedback records; the oldest record is evicted when full.
#[derive(Debug)]
pub struct FeedbackStore {
    capacity: usize,
    records: Mutex<VecDeque<FeedbackRecord>>,
}

impl Default for FeedbackStore {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

impl FeedbackStore {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "feedback capacity must be positive");
        Self {
            capacity,
            records: Mutex::new(VecDeque::with_capacity(capacity.min(1024))),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn record(&self, f: FeedbackRecord) -> Result<(), FeedbackError> {
        f.validate()?;
        let mut records = self.records.lock().unwrap_or_else(|e| e.into_inner());
        if records.len() == self.capacity {
            records.pop_front();
        }
        records.push_back(f);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<FeedbackRecord> {
        self.records
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .copied()
            .collect()
    }

    pub fn report(&self) -> StatsReport {
        analyze(&self.snapshot())
    }
}

fn column(records: &[FeedbackRecord], m: Measure) -> Vec<f64> {
    records.iter().map(|r| r.get(m) as f64).collect()
}

/// One-sample t-tests of each measure against the scale midpoint, plus the
/// accuracy/mood correlation.
pub fn analyze(records: &[FeedbackRecord]) -> StatsReport {
    let measures = Measure::ALL
        .iter()
        .map(|&m| match one_sample_t(&column(records, m), LIKERT_MIDPOINT) {
            Ok(s) => MeasureReport {
                measure: m,
                n: records.len(),
                summary: Some(s.into()),
                error: None,
            },
            Err(e) => MeasureReport {
                measure: m,
                n: records.len(),
                summary: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let (x, y) = (Measure::EmotionAccuracy, Measure::MoodImpact);
    let correlation = match pearson_r(&column(records, x), &column(records, y)) {
        Ok(Correlation { n, r, p_two_sided }) => CorrelationReport {
            x,
            y,
            n,
            r: Some(r),
            p_two_sided: Some(p_two_sided),
            error: None,
        },
        Err(e) => CorrelationReport {
            x,
            y,
            n: records.len(),
            r: None,
            p_two_sided: None,
            error: Some(e.to_string()),
        },
    };
    StatsReport {
        n: records.len(),
        midpoint: LIKERT_MIDPOINT,
        measures,
        correlations: vec![correlation],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: i64, b: i64, c: i64, d: i64) -> FeedbackRecord {
        FeedbackRecord {
            mood_impact: a,
            emotion_accuracy: b,
            atmosphere: c,
            coherence: d,
        }
    }

    #[test]
    fn validates_likert_range() {
        let store = FeedbackStore::default();
        assert!(store.record(rec(5, 4, 4, 5)).is_ok());
        assert_eq!(
            store.record(rec(0, 4, 4, 5)),
            Err(FeedbackError::OutOfRange {
                field: "mood_impact",
                value: 0
            })
        );
        assert!(store.record(rec(5, 4, 4, 6)).is_err());
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let store = FeedbackStore::new(3);
        for v in 1..=5 {
            store.record(rec(v, 1, 1, 1)).unwrap();
        }
        let kept: Vec<i64> = store.snapshot().iter().map(|r| r.mood_impact).collect();
        assert_eq!(kept, vec![3, 4, 5]);
    }

    #[test]
    fn report_matches_direct_computation() {
        let records = [rec(5, 4, 4, 5), rec(4, 4, 3, 5), rec(5, 5, 4, 4), rec(3, 2, 4, 4)];
        let r = analyze(&records);
        assert_eq!(r.n, 4);
        let direct = one_sample_t(&[5.0, 4.0, 5.0, 3.0], 3.0).unwrap();
        assert_eq!(r.measures[0].summary.unwrap().t, direct.t);
        let c = pearson_r(&[4.0, 4.0, 5.0, 2.0], &[5.0, 4.0, 5.0, 3.0]).unwrap();
        assert_eq!(r.correlations[0].r, Some(c.r));
    }

    #[test]
    fn degenerate_columns_are_reported_not_fatal() {
        let r = analyze(&[rec(4, 4, 4, 4), rec(4, 4, 4, 4)]);
        assert!(r.measures.iter().all(|m| m.summary.is_none() && m.error.is_some()));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["measures"][0]["measure"], "mood_impact");
        assert!(json["measures"][0].get("t").is_none());
        let empty = analyze(&[]);
        assert_eq!(empty.n, 0);
    }

    #[test]
    fn serialized_summary_is_flat() {
        let r = analyze(&[rec(5, 4, 4, 5), rec(4, 3, 3, 5), rec(3, 2, 4, 2)]);
        let json = serde_json::to_value(&r).unwrap();
        let m = &json["measures"][0];
        for key in ["measure", "n", "mean", "sd", "t", "p_two_sided"] {
            assert!(m.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["correlations"][0]["x"], "emotion_accuracy");
    }
}
