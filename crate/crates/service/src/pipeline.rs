//! Text in, three-stage clip playlist out.

use std::path::Path;

use anyhow::{Context, Result};
use emoheal_core::emotion::Lexicon;
use emoheal_core::journey::plan_journey;
use emoheal_core::knowledge_graph::{RuleSet, WeightMatrix};
use emoheal_core::prompt::build_prompt;
use emoheal_core::retrieval::{default_nprobe, stub_encode, RetrievalError};
use emoheal_core::{
    EmotionVector, Journey, KnowledgeGraph, MusicalParameters, PromptTemplate, SearchResult, StageRole, TargetPreset,
    Tier,
};
use serde::Serialize;
use thiserror::Error;
use tracing::warn;

use crate::config::ServiceConfig;
use crate::encoder::HttpEncoder;
use crate::index::SharedIndex;
use crate::scorer::HttpScorer;

pub const MAX_TEXT_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("text is empty")]
    EmptyText,
    #[error("text exceeds {MAX_TEXT_CHARS} characters")]
    TextTooLong,
    #[error("no clip index is loaded")]
    IndexUnavailable,
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<RetrievalError> for SessionError {
    fn from(e: RetrievalError) -> Self {
        SessionError::Internal(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageView {
    pub role: StageRole,
    pub prompt: String,
    pub params: MusicalParameters,
    pub clips: SearchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionResponse {
    pub emotion: EmotionVector,
    pub tier: Tier,
    /// A configured remote scorer or encoder failed and a local fallback answered.
    pub degraded: bool,
    pub stages: Vec<StageView>,
    #[serde(skip)]
    pub journey: Journey,
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub graph: KnowledgeGraph,
    pub lexicon: Lexicon,
    pub target: TargetPreset,
    pub template: PromptTemplate,
    pub blend: f64,
    pub k: usize,
    /// Lists probed per query; `None` uses the index's default.
    pub nprobe: Option<usize>,
    pub scorer: Option<HttpScorer>,
    pub encoder: Option<HttpEncoder>,
    pub index: SharedIndex,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Pipeline {
    /// Bundled configuration, lexicon scoring and the hashing encoder.
    pub fn bundled(index: SharedIndex) -> Self {
        Self {
            graph: KnowledgeGraph::bundled(),
            lexicon: Lexicon::bundled(),
            target: TargetPreset::bundled(),
            template: PromptTemplate::bundled(),
            blend: emoheal_core::journey::DEFAULT_BLEND,
            k: 3,
            nprobe: None,
            scorer: None,
            encoder: None,
            index,
        }
    }

    pub fn from_config(cfg: &ServiceConfig, index: SharedIndex) -> Result<Self> {
        let mut p = Self::bundled(index);
        if let Some(path) = &cfg.rules_path {
            p.graph.rules = RuleSet::parse(&read(path)?)?;
        }
        if let Some(tau) = cfg.rule_threshold {
            let rules = p.graph.rules.rules().iter().cloned().map(|mut r| {
                r.threshold = tau;
                r
            });
            p.graph.rules = RuleSet::new(rules.collect())?;
        }
        if let Some(path) = &cfg.weights_path {
            p.graph.weights = WeightMatrix::parse(&read(path)?)?;
        }
        if let Some(path) = &cfg.target_path {
            p.target = TargetPreset::parse(&read(path)?)?;
        }
        if let Some(path) = &cfg.template_path {
            p.template = PromptTemplate::parse(&read(path)?)?;
        }
        if let Some(path) = &cfg.lexicon_path {
            p.lexicon = Lexicon::parse(&read(path)?)?;
        }
        anyhow::ensure!((0.0..=1.0).contains(&cfg.blend), "blend {} outside [0, 1]", cfg.blend);
        anyhow::ensure!(cfg.k >= 1, "k must be at least 1");
        anyhow::ensure!(cfg.nprobe != Some(0), "nprobe must be at least 1");
        p.blend = cfg.blend;
        p.k = cfg.k;
        p.nprobe = cfg.nprobe;
        if let Some(url) = &cfg.scorer_url {
            p.scorer = Some(HttpScorer::new(url, cfg.scorer_timeout())?);
        }
        if let Some(url) = &cfg.encoder_url {
            p.encoder = Some(HttpEncoder::new(url, cfg.encoder_timeout())?);
        }
        Ok(p)
    }

    async fn score(&self, text: &str) -> Result<(EmotionVector, bool), SessionError> {
        if let Some(scorer) = &self.scorer {
            match scorer.score(text).await {
                Ok(v) => return Ok((v, false)),
                Err(e) => warn!(error = %e, "scorer failed; using lexicon"),
            }
        }
        let v = self.lexicon.score(text).map_err(|_| SessionError::EmptyText)?;
        Ok((v, self.scorer.is_some()))
    }

    async fn encode_all(&self, prompts: &[String; 3], dim: usize) -> Result<(Vec<Vec<f32>>, bool), SessionError> {
        if let Some(enc) = &self.encoder {
            let (a, b, c) = tokio::join!(
                enc.encode(&prompts[0], dim),
                enc.encode(&prompts[1], dim),
                enc.encode(&prompts[2], dim)
            );
            match (a, b, c) {
                (Ok(a), Ok(b), Ok(c)) => return Ok((vec![a, b, c], false)),
                (a, b, c) => {
                    let err = [a.err(), b.err(), c.err()].into_iter().flatten().next();
                    warn!(error = ?err, "encoder failed; using hashing stub");
                }
            }
        }
        // All stages use one encoder so their queries share an embedding space.
        let stub = prompts
            .iter()
            .map(|p| stub_encode(p, dim))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((stub, self.encoder.is_some()))
    }

    pub async fn create_session(&self, text: &str) -> Result<SessionResponse, SessionError> {
        validate_text(text)?;
        let index = self.index.load().ok_or(SessionError::IndexUnavailable)?;
        let (emotion, score_degraded) = self.score(text).await?;
        let inference = self.graph.infer(&emotion);
        let journey = plan_journey(inference.params, &self.target, self.blend)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        let prompts = journey.stages().map(|p| build_prompt(&p, &self.template));
        let (queries, encode_degraded) = self.encode_all(&prompts, index.dim()).await?;
        let nlist = index.nlist().max(1);
        let nprobe = self.nprobe.unwrap_or_else(|| default_nprobe(nlist)).min(nlist);
        let mut stages = Vec::with_capacity(3);
        for (((role, params), prompt), q) in journey.iter().zip(prompts).zip(&queries) {
            let clips = index.search(q, self.k, nprobe)?;
            stages.push(StageView {
                role,
                prompt,
                params: *params,
                clips,
            });
        }
        Ok(SessionResponse {
            emotion,
            tier: inference.tier,
            degraded: score_degraded || encode_degraded,
            stages,
            journey,
        })
    }
}

pub fn validate_text(text: &str) -> Result<(), SessionError> {
    if text.trim().is_empty() {
        return Err(SessionError::EmptyText);
    }
    if text.chars().count() > MAX_TEXT_CHARS {
        return Err(SessionError::TextTooLong);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use emoheal_core::{ClipEmbedding, IvfIndex};

    fn small_index() -> SharedIndex {
        let data: Vec<ClipEmbedding> = (0..20)
            .map(|i| {
                let v: Vec<f32> = (0..16).map(|j| ((i * 31 + j * 7) % 13) as f32 - 6.0).collect();
                ClipEmbedding::new(format!("clip-{i:02}"), &v).unwrap()
            })
            .collect();
        SharedIndex::new(IvfIndex::build(data, 4, 1).unwrap())
    }

    #[test]
    fn text_validation() {
        assert!(matches!(validate_text(""), Err(SessionError::EmptyText)));
        assert!(matches!(validate_text("  \n\t"), Err(SessionError::EmptyText)));
        assert!(validate_text(&"é".repeat(2000)).is_ok());
        assert!(matches!(
            validate_text(&"a".repeat(2001)),
            Err(SessionError::TextTooLong)
        ));
    }

    #[tokio::test]
    async fn missing_index_is_unavailable() {
        let p = Pipeline::bundled(SharedIndex::default());
        assert!(matches!(
            p.create_session("calm").await,
            Err(SessionError::IndexUnavailable)
        ));
    }

    #[tokio::test]
    async fn three_stages_in_order() {
        let p = Pipeline::bundled(small_index());
        let s = p.create_session("I feel afraid and nervous tonight").await.unwrap();
        assert_eq!(s.tier, Tier::Rule);
        assert!(!s.degraded);
        let roles: Vec<StageRole> = s.stages.iter().map(|st| st.role).collect();
        assert_eq!(roles, StageRole::ALL);
        assert!(s.stages.iter().all(|st| st.clips.len() == 3));
        assert_eq!(s.stages[2].params, p.target.params);
    }

    #[test]
    fn config_overrides_thresholds() {
        let cfg = ServiceConfig {
            rule_threshold: Some(0.95),
            ..Default::default()
        };
        let p = Pipeline::from_config(&cfg, SharedIndex::default()).unwrap();
        assert!(p.graph.rules.rules().iter().all(|r| r.threshold == 0.95));
        let bad = ServiceConfig {
            blend: 1.5,
            ..Default::default()
        };
        assert!(Pipeline::from_config(&bad, SharedIndex::default()).is_err());
    }
}
