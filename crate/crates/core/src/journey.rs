//! Three-stage match/guide/target journeys.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge_graph::{MusicalParameters, NUM_PARAMS};

pub const DEFAULT_TARGET: &str = include_str!("../config/target.toml");
pub const DEFAULT_BLEND: f64 = 0.5;
pub const DEFAULT_STAGE_SECONDS: f64 = 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JourneyError {
    #[error("blend {0} outside [0, 1]")]
    InvalidBlend(f64),
    #[error("stage duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("target preset: {0}")]
    Preset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageRole {
    Match,
    Guide,
    Target,
}

impl StageRole {
    pub const ALL: [StageRole; 3] = [StageRole::Match, StageRole::Guide, StageRole::Target];
}

/// Calm end state a journey steers toward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetPreset {
    pub params: MusicalParameters,
}

impl TargetPreset {
    /// Parses a TOML file with the six parameter names as keys.
    pub fn parse(text: &str) -> Result<Self, JourneyError> {
        toml::from_str(text).map_err(|e| JourneyError::Preset(e.message().to_string()))
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_TARGET).expect("bundled target preset is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Journey {
    stages: [MusicalParameters; 3],
    stage_duration_s: f64,
}

impl Journey {
    pub fn stages(&self) -> &[MusicalParameters; 3] {
        &self.stages
    }

    pub fn stage(&self, role: StageRole) -> &MusicalParameters {
        &self.stages[role as usize]
    }

    pub fn stage_duration_s(&self) -> f64 {
        self.stage_duration_s
    }

    pub fn with_stage_duration(mut self, seconds: f64) -> Result<Self, JourneyError> {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(JourneyError::InvalidDuration(seconds));
        }
        self.stage_duration_s = seconds;
        Ok(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = (StageRole, &MusicalParameters)> {
        StageRole::ALL.into_iter().zip(self.stages.iter())
    }
}

fn interpolate(from: f64, to: f64, blend: f64) -> f64 {
    if blend == 0.0 {
        return from;
    }
    if blend == 1.0 {
        return to;
    }
    let v = from + blend * (to - from);
    // Rounding may step a hair outside the segment.
    v.clamp(from.min(to), from.max(to))
}

/// Guide stage is the componentwise interpolation `(1 - blend) * match + blend * target`.
pub fn plan_journey(matched: MusicalParameters, target: &TargetPreset, blend: f64) -> Result<Journey, JourneyError> {
    if !(0.0..=1.0).contains(&blend) {
        return Err(JourneyError::InvalidBlend(blend));
    }
    let m = matched.to_array();
    let t = target.params.to_array();
    let mut guide = [0.0; NUM_PARAMS];
    for j in 0..NUM_PARAMS {
        guide[j] = interpolate(m[j], t[j], blend);
    }
    let guide = MusicalParameters::from_array(guide).expect("interpolation stays in [0, 1]");
    Ok(Journey {
        stages: [matched, guide, target.params],
        stage_duration_s: DEFAULT_STAGE_SECONDS,
    })
}
