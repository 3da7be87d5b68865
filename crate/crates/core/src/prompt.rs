//! Template-based text prompts from musical parameters.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::knowledge_graph::{MusicalParameters, Param, NUM_PARAMS};

pub const DEFAULT_TEMPLATE: &str = include_str!("../config/template.toml");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("bins must be at least 2, got {0}")]
    TooFewBins(usize),
    #[error("parameter `{param}` has {found} descriptors, expected {expected}")]
    DescriptorCount {
        param: Param,
        found: usize,
        expected: usize,
    },
    #[error("missing vocabulary for `{0}`")]
    MissingVocabulary(Param),
    #[error("descriptors for `{0}` are not distinct")]
    DuplicateDescriptor(Param),
    #[error("frame must contain each of the six slots exactly once: {0}")]
    BadFrame(String),
    #[error("template: {0}")]
    Parse(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    bins: usize,
    frame: String,
    vocabulary: BTreeMap<Param, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    bins: usize,
    vocabulary: [Vec<String>; NUM_PARAMS],
    frame: String,
}

fn slot(p: Param) -> String {
    format!("{{{}}}", p.name())
}

impl PromptTemplate {
    pub fn new(
        bins: usize,
        vocabulary: [Vec<String>; NUM_PARAMS],
        frame: impl Into<String>,
    ) -> Result<Self, TemplateError> {
        let frame = frame.into();
        if bins < 2 {
            return Err(TemplateError::TooFewBins(bins));
        }
        for (p, words) in Param::ALL.iter().zip(&vocabulary) {
            if words.len() != bins {
                return Err(TemplateError::DescriptorCount {
                    param: *p,
                    found: words.len(),
                    expected: bins,
                });
            }
            let mut sorted: Vec<&String> = words.iter().collect();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != words.len() {
                return Err(TemplateError::DuplicateDescriptor(*p));
            }
        }
        for p in Param::ALL {
            let n = frame.matches(&slot(p)).count();
            if n != 1 {
                return Err(TemplateError::BadFrame(format!("`{}` appears {n} times", slot(p))));
            }
        }
        let mut rest = frame.clone();
        for p in Param::ALL {
            rest = rest.replace(&slot(p), "");
        }
        if rest.contains('{') || rest.contains('}') {
            return Err(TemplateError::BadFrame("stray slot marker".into()));
        }
        Ok(Self {
            bins,
            vocabulary,
            frame,
        })
    }

    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = toml::from_str(text).map_err(|e| TemplateError::Parse(e.message().to_string()))?;
        let mut vocab = file.vocabulary;
        let vocabulary = Param::ALL.map(|p| vocab.remove(&p).unwrap_or_default());
        for (p, words) in Param::ALL.iter().zip(&vocabulary) {
            if words.is_empty() {
                return Err(TemplateError::MissingVocabulary(*p));
            }
        }
        Self::new(file.bins, vocabulary, file.frame)
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Half-open bins with `v = 1.0` folded into the last bin.
    pub fn bin_of(&self, value: f64) -> usize {
        ((value * self.bins as f64).floor() as usize).min(self.bins - 1)
    }

    pub fn descriptor(&self, param: Param, bin: usize) -> &str {
        &self.vocabulary[param.index()][bin]
    }

    pub fn render_bins(&self, bins: [usize; NUM_PARAMS]) -> String {
        let mut out = self.frame.clone();
        for p in Param::ALL {
            out = out.replace(&slot(p), self.descriptor(p, bins[p.index()]));
        }
        out
    }

    pub fn quantize(&self, p: &MusicalParameters) -> [usize; NUM_PARAMS] {
        p.to_array().map(|v| self.bin_of(v))
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::bundled()
    }
}

pub fn build_prompt(p: &MusicalParameters, t: &PromptTemplate) -> String {
    t.render_bins(t.quantize(p))
}
