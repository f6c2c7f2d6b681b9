//! Supervision data generation: frontier marking, crowding likelihoods from
//! an annotation oracle, and the on-disk dataset those produce.

mod dataset;
mod frontier;
mod mock;
mod prompt;
mod remote;

pub use dataset::{
    build_dataset, load_index, load_training_samples, validate_dataset, DatasetConfig,
    DatasetIndex, DatasetSource, IndexRecord, INDEX_FILE,
};
pub use frontier::{
    frontier_bands, likelihood_to_map, mark_frontiers, Frontier, FrontierBand, FRONTIER_COLORS,
};
pub use mock::{MockOracle, SceneTruth};
pub use prompt::{PromptTemplate, RenderedPrompt};
pub use remote::{extract_annotation, RemoteConfig, RemoteOracle, API_KEY_ENV};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::ImageFrame;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("oracle gave no usable annotation after {attempts} attempts: {reason}")]
    Oracle {
        attempts: usize,
        reason: String,
        raw: String,
    },
    #[error("source error: {0}")]
    Source(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
    #[error(transparent)]
    Costmap(#[from] crate::costmap::CostmapError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Distill(#[from] crate::distill::DistillError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AnnotateError>;

/// Independent crowding likelihoods of the three frontiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierAnnotation {
    pub p_left: f64,
    pub p_center: f64,
    pub p_right: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

impl FrontierAnnotation {
    pub fn new(p_left: f64, p_center: f64, p_right: f64) -> Result<Self> {
        let a = Self {
            p_left,
            p_center,
            p_right,
            rationale: None,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("left", self.p_left),
            ("center", self.p_center),
            ("right", self.p_right),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(AnnotateError::Validation(format!(
                    "{name} likelihood {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, f: Frontier) -> f64 {
        match f {
            Frontier::Left => self.p_left,
            Frontier::Center => self.p_center,
            Frontier::Right => self.p_right,
        }
    }
}

/// What an oracle is shown. The mock reads `scene`; the remote client reads
/// the frame and prompt.
#[derive(Debug, Clone)]
pub struct AnnotationRequest<'a> {
    pub frame: &'a ImageFrame,
    pub template: &'a PromptTemplate,
    pub scene: Option<&'a SceneTruth>,
}

pub trait AnnotationOracle {
    /// Short identifier recorded in dataset indexes.
    fn kind(&self) -> &'static str;
    fn annotate(&mut self, request: &AnnotationRequest<'_>) -> Result<FrontierAnnotation>;
}
