//! Fine-grained emotion vectors over the 27-label taxonomy.
//!
//! Covers the label set, validated probability vectors, the coarse-to-fine
//! multi-hot mapping used to align coarser corpora, the focal loss numerics,
//! and the deterministic lexicon scorer used when no classifier service is
//! reachable.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of fine-grained emotion classes.
pub const NUM_EMOTIONS: usize = 27;

/// Clamp floor applied to `p_t` before taking its logarithm.
pub const LOG_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmotionError {
    #[error("expected {NUM_EMOTIONS} scores, got {0}")]
    WrongLength(usize),
    #[error("score {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid focal loss parameters: alpha={alpha}, gamma={gamma}")]
    InvalidFocalParams { alpha: f64, gamma: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

macro_rules! labels {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// One of the 27 fine-grained emotion classes, in canonical order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum EmotionLabel {
            $($variant),+
        }

        impl EmotionLabel {
            pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [$(EmotionLabel::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(EmotionLabel::$variant => $name),+
                }
            }
        }
    };
}

labels! {
    Admiration => "admiration",
    Amusement => "amusement",
    Anger => "anger",
    Annoyance => "annoyance",
    Approval => "approval",
    Caring => "caring",
    Confusion => "confusion",
    Curiosity => "curiosity",
    Desire => "desire",
    Disappointment => "disappointment",
    Disapproval => "disapproval",
    Disgust => "disgust",
    Embarrassment => "embarrassment",
    Excitement => "excitement",
    Fear => "fear",
    Gratitude => "gratitude",
    Grief => "grief",
    Joy => "joy",
    Love => "love",
    Nervousness => "nervousness",
    Optimism => "optimism",
    Pride => "pride",
    Realization => "realization",
    Relief => "relief",
    Remorse => "remorse",
    Sadness => "sadness",
    Surprise => "surprise",
}

impl EmotionLabel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = EmotionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(needle))
            .ok_or_else(|| EmotionError::UnknownLabel(s.to_string()))
    }
}

/// Per-class probabilities. Multi-label, so the entries need not sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmotionVector([f64; NUM_EMOTIONS]);

impl EmotionVector {
    pub fn zeros() -> Self {
        Self([0.0; NUM_EMOTIONS])
    }

    /// Validates raw scores without renormalizing them.
    pub fn new(raw: &[f64]) -> Result<Self, EmotionError> {
        if raw.len() != NUM_EMOTIONS {
            return Err(EmotionError::WrongLength(raw.len()));
        }
        let mut scores = [0.0; NUM_EMOTIONS];
        for (index, (&value, slot)) in raw.iter().zip(scores.iter_mut()).enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(EmotionError::OutOfRange { index, value });
            }
            *slot = value;
        }
        Ok(Self(scores))
    }

    pub fn get(&self, label: EmotionLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> &[f64; NUM_EMOTIONS] {
        &self.0
    }

    /// Label with the highest score; ties go to the lowest index.
    pub fn dominant(&self) -> (EmotionLabel, f64) {
        let mut best = 0;
        for i in 1..NUM_EMOTIONS {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        (EmotionLabel::ALL[best], self.0[best])
    }
}

impl<'de> Deserialize<'de> for EmotionVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        EmotionVector::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// Shorthand for [`EmotionVector::new`].
pub fn validate_vector(raw: &[f64]) -> Result<EmotionVector, EmotionError> {
    EmotionVector::new(raw)
}

/// Binary training target over the fine-grained labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiHotTarget([u8; NUM_EMOTIONS]);

impl MultiHotTarget {
    pub fn from_labels(labels: &[EmotionLabel]) -> Self {
        let mut bits = [0u8; NUM_EMOTIONS];
        for l in labels {
            bits[l.index()] = 1;
        }
        Self(bits)
    }

    pub fn bits(&self) -> &[u8; NUM_EMOTIONS] {
        &self.0
    }

    pub fn is_set(&self, label: EmotionLabel) -> bool {
        self.0[label.index()] == 1
    }

    pub fn active(&self) -> Vec<EmotionLabel> {
        EmotionLabel::ALL.iter().copied().filter(|l| self.is_set(*l)).collect()
    }
}

pub const DEFAULT_COARSE_MAP: &str = include_str!("../config/coarse_map.tsv");

/// Mapping from a coarse corpus label to the fine labels it activates.
///
/// File format: `coarse<TAB>fine1,fine2,...`, one per line, `#` comments.
#[derive(Debug, Clone)]
pub struct CoarseMap {
    entries: HashMap<String, MultiHotTarget>,
}

impl CoarseMap {
    pub fn parse(text: &str) -> Result<Self, EmotionError> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (coarse, fine) = line.split_once('\t').ok_or_else(|| EmotionError::Parse {
                line: line_no,
                msg: "expected `coarse<TAB>fine,...`".into(),
            })?;
            let coarse = coarse.trim().to_lowercase();
            let mut labels = Vec::new();
            for name in fine.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let label = name.parse::<EmotionLabel>().map_err(|e| EmotionError::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
                labels.push(label);
            }
            if labels.is_empty() {
                return Err(EmotionError::Parse {
                    line: line_no,
                    msg: format!("coarse label `{coarse}` maps to no fine labels"),
                });
            }
            if entries
                .insert(coarse.clone(), MultiHotTarget::from_labels(&labels))
                .is_some()
            {
                return Err(EmotionError::Parse {
                    line: line_no,
                    msg: format!("duplicate coarse label `{coarse}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_COARSE_MAP).expect("bundled coarse map is valid")
    }

    pub fn map(&self, coarse_label: &str) -> Result<MultiHotTarget, EmotionError> {
        self.entries
            .get(&coarse_label.trim().to_lowercase())
            .copied()
            .ok_or_else(|| EmotionError::UnknownLabel(coarse_label.to_string()))
    }

    pub fn coarse_labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Maps a coarse label through the bundled table.
pub fn map_coarse_to_fine(coarse_label: &str) -> Result<MultiHotTarget, EmotionError> {
    CoarseMap::bundled().map(coarse_label)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalLossParams {
    alpha: f64,
    gamma: f64,
}

impl FocalLossParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, EmotionError> {
        let ok = alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 && gamma.is_finite() && gamma >= 0.0;
        if !ok {
            return Err(EmotionError::InvalidFocalParams { alpha, gamma });
        }
        Ok(Self { alpha, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Default for FocalLossParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

fn clamp_probability(p_t: f64) -> Result<f64, EmotionError> {
    if !p_t.is_finite() {
        return Err(EmotionError::NonFinite);
    }
    if p_t > 1.0 {
        return Err(EmotionError::OutOfRange { index: 0, value: p_t });
    }
    Ok(p_t.max(LOG_EPSILON))
}

/// `-alpha * (1 - p_t)^gamma * ln(p_t)`, with `p_t` clamped to `[1e-12, 1]`.
pub fn focal_loss(p_t: f64, params: &FocalLossParams) -> Result<f64, EmotionError> {
    let p = clamp_probability(p_t)?;
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok(-params.alpha * (1.0 - p).powf(params.gamma) * p.ln())
}

/// Analytic derivative of [`focal_loss`] with respect to `p_t`.
pub fn focal_loss_grad(p_t: f64, params: &FocalLossParams) -> Result<f64, EmotionError> {
    let p = clamp_probability(p_t)?;
    let q = 1.0 - p;
    let gamma = params.gamma;
    // The focusing term vanishes at gamma = 0 and at p = 1 (where ln p = 0 dominates).
    let focus = if gamma == 0.0 || p == 1.0 {
        0.0
    } else {
        -gamma * q.powf(gamma - 1.0) * p.ln()
    };
    let ce = q.powf(gamma) / p;
    Ok(-params.alpha * (focus + ce))
}

pub const DEFAULT_LEXICON: &str = include_str!("../config/lexicon.tsv");

/// Keyword lexicon backing the deterministic text scorer.
///
/// File format: `keyword<TAB>label<TAB>weight`, weight in `(0, 10]`.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, Vec<(EmotionLabel, f64)>>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, EmotionError> {
        let mut entries: HashMap<String, Vec<(EmotionLabel, f64)>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [keyword, label, weight] = fields[..] else {
                return Err(EmotionError::Parse {
                    line: line_no,
                    msg: "expected `keyword<TAB>label<TAB>weight`".into(),
                });
            };
            let label = label.parse::<EmotionLabel>().map_err(|e| EmotionError::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            let weight: f64 = weight.trim().parse().map_err(|_| EmotionError::Parse {
                line: line_no,
                msg: format!("bad weight `{weight}`"),
            })?;
            if !(weight > 0.0 && weight <= 10.0) {
                return Err(EmotionError::Parse {
                    line: line_no,
                    msg: format!("weight {weight} outside (0, 10]"),
                });
            }
            let keyword = keyword.trim().to_lowercase();
            if keyword.is_empty() || tokenize(&keyword).len() != 1 {
                return Err(EmotionError::Parse {
                    line: line_no,
                    msg: format!("keyword `{keyword}` must be a single token"),
                });
            }
            entries.entry(keyword).or_default().push((label, weight));
        }
        Ok(Self { entries })
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn lookup(&self, keyword: &str) -> &[(EmotionLabel, f64)] {
        self.entries.get(keyword).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Accumulates keyword evidence per label and squashes each total with `s / (1 + s)`.
    pub fn score(&self, text: &str) -> Result<EmotionVector, EmotionError> {
        if text.trim().is_empty() {
            return Err(EmotionError::EmptyInput);
        }
        let mut evidence = [0.0f64; NUM_EMOTIONS];
        for token in tokenize(text) {
            for &(label, weight) in self.lookup(&token) {
                evidence[label.index()] += weight;
            }
        }
        let mut scores = [0.0; NUM_EMOTIONS];
        for (s, e) in scores.iter_mut().zip(evidence) {
            *s = e / (1.0 + e);
        }
        Ok(EmotionVector(scores))
    }
}

/// Lowercased tokens split on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Scores text against the bundled lexicon.
pub fn lexicon_score(text: &str) -> Result<EmotionVector, EmotionError> {
    Lexicon::bundled().score(text)
}
