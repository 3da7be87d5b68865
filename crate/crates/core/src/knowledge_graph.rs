//! Two-tier emotion-to-music inference.
//!
//! Tier 1 fires an expert rule when a single emotion score strictly exceeds
//! the rule's threshold. Otherwise the whole vector is projected through a
//! 27x6 weight matrix and squashed elementwise with the logistic function.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{EmotionLabel, EmotionVector, NUM_EMOTIONS};

pub const NUM_PARAMS: usize = 6;

/// Threshold used by the bundled rules.
pub const DEFAULT_THRESHOLD: f64 = 0.7;

pub const DEFAULT_RULES: &str = include_str!("../config/rules.toml");
pub const DEFAULT_WEIGHTS: &str = include_str!("../config/weights.tsv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("parameter `{name}` = {value} is outside [0, 1]")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("unknown musical parameter `{0}`")]
    UnknownParam(String),
    #[error("rule for `{emotion}`: threshold {threshold} outside (0, 1]")]
    BadThreshold { emotion: EmotionLabel, threshold: f64 },
    #[error("duplicate rule priority {0}")]
    DuplicatePriority(i64),
    #[error("weight matrix: {0}")]
    BadMatrix(String),
    #[error("config: {0}")]
    Config(String),
}

/// The six musical dimensions, in column order of the weight matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Tempo,
    Mode,
    Timbre,
    Harmony,
    Register,
    Density,
}

impl Param {
    pub const ALL: [Param; NUM_PARAMS] = [
        Param::Tempo,
        Param::Mode,
        Param::Timbre,
        Param::Harmony,
        Param::Register,
        Param::Density,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Tempo => "tempo",
            Param::Mode => "mode",
            Param::Timbre => "timbre",
            Param::Harmony => "harmony",
            Param::Register => "register",
            Param::Density => "density",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Param::ALL
            .iter()
            .copied()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| GraphError::UnknownParam(s.to_string()))
    }
}

/// Six musical parameters, each encoded in `[0, 1]` between two semantic poles.
///
/// | field    | 0         | 1          |
/// |----------|-----------|------------|
/// | tempo    | 60 BPM    | 120 BPM    |
/// | mode     | minor     | major      |
/// | timbre   | dark      | bright     |
/// | harmony  | dissonant | consonant  |
/// | register | low       | high       |
/// | density  | sparse    | dense      |
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MusicalParameters {
    pub tempo: f64,
    pub mode: f64,
    pub timbre: f64,
    pub harmony: f64,
    pub register: f64,
    pub density: f64,
}

impl MusicalParameters {
    pub const NEUTRAL: MusicalParameters = MusicalParameters {
        tempo: 0.5,
        mode: 0.5,
        timbre: 0.5,
        harmony: 0.5,
        register: 0.5,
        density: 0.5,
    };

    pub fn from_array(values: [f64; NUM_PARAMS]) -> Result<Self, GraphError> {
        for (p, &v) in Param::ALL.iter().zip(values.iter()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(GraphError::ParamOutOfRange {
                    name: p.name(),
                    value: v,
                });
            }
        }
        let [tempo, mode, timbre, harmony, register, density] = values;
        Ok(Self {
            tempo,
            mode,
            timbre,
            harmony,
            register,
            density,
        })
    }

    pub fn to_array(&self) -> [f64; NUM_PARAMS] {
        [
            self.tempo,
            self.mode,
            self.timbre,
            self.harmony,
            self.register,
            self.density,
        ]
    }

    pub fn get(&self, param: Param) -> f64 {
        self.to_array()[param.index()]
    }

    fn set(&mut self, param: Param, value: f64) {
        let slot = match param {
            Param::Tempo => &mut self.tempo,
            Param::Mode => &mut self.mode,
            Param::Timbre => &mut self.timbre,
            Param::Harmony => &mut self.harmony,
            Param::Register => &mut self.register,
            Param::Density => &mut self.density,
        };
        *slot = value;
    }

    /// Tempo rendered on the 60-120 BPM scale.
    pub fn bpm(&self) -> f64 {
        60.0 + 60.0 * self.tempo
    }
}

impl Default for MusicalParameters {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

impl<'de> Deserialize<'de> for MusicalParameters {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            tempo: f64,
            mode: f64,
            timbre: f64,
            harmony: f64,
            register: f64,
            density: f64,
        }
        let r = Raw::deserialize(deserializer)?;
        MusicalParameters::from_array([r.tempo, r.mode, r.timbre, r.harmony, r.register, r.density])
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub emotion: EmotionLabel,
    pub threshold: f64,
    pub assignments: BTreeMap<Param, f64>,
    pub priority: i64,
}

impl Rule {
    pub fn fires(&self, e: &EmotionVector) -> bool {
        e.get(self.emotion) > self.threshold
    }

    fn validate(&self) -> Result<(), GraphError> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(GraphError::BadThreshold {
                emotion: self.emotion,
                threshold: self.threshold,
            });
        }
        for (p, &v) in &self.assignments {
            if !(0.0..=1.0).contains(&v) {
                return Err(GraphError::ParamOutOfRange {
                    name: p.name(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Validated collection of tier-1 rules.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    rule: Vec<RuleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    emotion: String,
    #[serde(default = "default_threshold")]
    threshold: f64,
    priority: i64,
    #[serde(default)]
    set: BTreeMap<String, f64>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<Self, GraphError> {
        let mut seen = HashSet::new();
        for r in &rules {
            r.validate()?;
            if !seen.insert(r.priority) {
                return Err(GraphError::DuplicatePriority(r.priority));
            }
        }
        Ok(Self { rules })
    }

    pub fn empty() -> Self {
        Self { rules: Vec::new() }
    }

    /// Parses the TOML rule file (`[[rule]]` tables with `emotion`,
    /// `threshold`, `priority` and a `set` table of parameter values).
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| GraphError::Config(e.to_string()))?;
        let mut rules = Vec::with_capacity(file.rule.len());
        for entry in file.rule {
            let emotion = entry
                .emotion
                .parse::<EmotionLabel>()
                .map_err(|e| GraphError::Config(e.to_string()))?;
            let mut assignments = BTreeMap::new();
            for (name, value) in entry.set {
                assignments.insert(name.parse::<Param>()?, value);
            }
            rules.push(Rule {
                emotion,
                threshold: entry.threshold,
                assignments,
                priority: entry.priority,
            });
        }
        Self::new(rules)
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_RULES).expect("bundled rule set is valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn for_emotion(&self, emotion: EmotionLabel) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(move |r| r.emotion == emotion)
    }
}

/// Row-major 27x6 matrix; rows follow the canonical emotion order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix([[f64; NUM_PARAMS]; NUM_EMOTIONS]);

impl WeightMatrix {
    pub fn new(weights: [[f64; NUM_PARAMS]; NUM_EMOTIONS]) -> Result<Self, GraphError> {
        for (i, row) in weights.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() || !(-1.0..=1.0).contains(&w) {
                    return Err(GraphError::BadMatrix(format!(
                        "entry ({}, {}) = {w} outside [-1, 1]",
                        EmotionLabel::ALL[i],
                        Param::ALL[j]
                    )));
                }
            }
        }
        Ok(Self(weights))
    }

    /// Parses 27 non-comment rows of 6 decimals separated by whitespace or commas.
    /// A leading emotion name on a row is allowed and must match the canonical order.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut weights = [[0.0; NUM_PARAMS]; NUM_EMOTIONS];
        let mut row = 0;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if row == NUM_EMOTIONS {
                return Err(GraphError::BadMatrix(format!("line {}: more than 27 rows", i + 1)));
            }
            let mut fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() == NUM_PARAMS + 1 {
                let name = fields.remove(0);
                if name != EmotionLabel::ALL[row].name() {
                    return Err(GraphError::BadMatrix(format!(
                        "line {}: expected row `{}`, found `{name}`",
                        i + 1,
                        EmotionLabel::ALL[row]
                    )));
                }
            }
            if fields.len() != NUM_PARAMS {
                return Err(GraphError::BadMatrix(format!(
                    "line {}: expected 6 columns, found {}",
                    i + 1,
                    fields.len()
                )));
            }
            for (j, f) in fields.iter().enumerate() {
                weights[row][j] = f
                    .parse()
                    .map_err(|_| GraphError::BadMatrix(format!("line {}: bad number `{f}`", i + 1)))?;
            }
            row += 1;
        }
        if row != NUM_EMOTIONS {
            return Err(GraphError::BadMatrix(format!("expected 27 rows, found {row}")));
        }
        Self::new(weights)
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_WEIGHTS).expect("bundled weight matrix is valid")
    }

    pub fn get(&self, emotion: usize, param: usize) -> f64 {
        self.0[emotion][param]
    }

    pub fn rows(&self) -> &[[f64; NUM_PARAMS]; NUM_EMOTIONS] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    #[serde(rename = "tier1")]
    Rule,
    #[serde(rename = "tier2")]
    Blend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference<'a> {
    pub params: MusicalParameters,
    pub tier: Tier,
    pub rule: Option<&'a Rule>,
}

/// Picks the firing rule with the highest emotion score.
///
/// Ties on score go to the lower emotion index, then to the higher priority.
pub fn match_rule<'a>(e: &EmotionVector, rules: &'a RuleSet) -> Option<&'a Rule> {
    let mut best: Option<&Rule> = None;
    for rule in rules.rules.iter().filter(|r| r.fires(e)) {
        let better = match best {
            None => true,
            Some(b) => {
                let (s, bs) = (e.get(rule.emotion), e.get(b.emotion));
                s > bs
                    || (s == bs && rule.emotion.index() < b.emotion.index())
                    || (s == bs && rule.emotion == b.emotion && rule.priority > b.priority)
            }
        };
        if better {
            best = Some(rule);
        }
    }
    best
}

pub fn apply_rule(rule: &Rule, defaults: &MusicalParameters) -> MusicalParameters {
    let mut out = *defaults;
    for (&p, &v) in &rule.assignments {
        out.set(p, v);
    }
    out
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `p = logistic(e W)`, elementwise.
pub fn blend_parameters(e: &EmotionVector, w: &WeightMatrix) -> MusicalParameters {
    let mut z = [0.0f64; NUM_PARAMS];
    for (score, row) in e.as_array().iter().zip(w.rows()) {
        for (zj, wij) in z.iter_mut().zip(row) {
            *zj += score * wij;
        }
    }
    MusicalParameters::from_array(z.map(logistic)).expect("logistic maps into [0, 1]")
}

pub fn infer_parameters<'a>(
    e: &EmotionVector,
    rules: &'a RuleSet,
    w: &WeightMatrix,
    defaults: &MusicalParameters,
) -> Inference<'a> {
    match match_rule(e, rules) {
        Some(rule) => Inference {
            params: apply_rule(rule, defaults),
            tier: Tier::Rule,
            rule: Some(rule),
        },
        None => Inference {
            params: blend_parameters(e, w),
            tier: Tier::Blend,
            rule: None,
        },
    }
}

/// Rule set, weight matrix and rule defaults bundled together.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    pub rules: RuleSet,
    pub weights: WeightMatrix,
    pub defaults: MusicalParameters,
}

impl KnowledgeGraph {
    pub fn bundled() -> Self {
        Self {
            rules: RuleSet::bundled(),
            weights: WeightMatrix::bundled(),
            defaults: MusicalParameters::NEUTRAL,
        }
    }

    pub fn infer(&self, e: &EmotionVector) -> Inference<'_> {
        infer_parameters(e, &self.rules, &self.weights, &self.defaults)
    }
}
