use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{TaskConfig, ENSEMBLE_NAME};
use crate::backtest::{ModelStatus, ValidationReport};
use crate::ensemble::EnsembleWeights;
use crate::models::TrainedMember;
use crate::panel::Frequency;

pub const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const MODELS_DIR: &str = "models";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: corrupt artifact: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
    #[error("{}: unsupported artifact format version {found} (expected {FORMAT_VERSION})", path.display())]
    Version { path: PathBuf, found: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    pub past: Vec<String>,
    pub known: Vec<String>,
    pub statics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub model: String,
    pub score: Option<f64>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub status: ModelStatus,
    pub weight: f64,
}

/// A trained predictor: task, ensemble weights, leaderboard and the refit
/// members with positive weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorArtifact {
    pub format_version: u32,
    pub task: TaskConfig,
    pub frequency: Frequency,
    pub seasonality: usize,
    pub schema: CovariateSchema,
    pub weights: EnsembleWeights,
    pub leaderboard: Vec<LeaderboardRow>,
    pub members: IndexMap<String, TrainedMember>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    task: TaskConfig,
    frequency: Frequency,
    seasonality: usize,
    schema: CovariateSchema,
    weights: EnsembleWeights,
    leaderboard: Vec<LeaderboardRow>,
    members: Vec<MemberEntry>,
}

#[derive(Serialize, Deserialize)]
struct MemberEntry {
    name: String,
    file: String,
}

fn member_file(index: usize, name: &str) -> String {
    let safe: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    format!("{MODELS_DIR}/{index:02}_{safe}.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

impl PredictorArtifact {
    /// Write `manifest.json` and one JSON file per member under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), ArtifactError> {
        let dir = dir.as_ref();
        let models = dir.join(MODELS_DIR);
        fs::create_dir_all(&models).map_err(io_err(&models))?;
        let mut entries = Vec::with_capacity(self.members.len());
        for (i, (name, member)) in self.members.iter().enumerate() {
            let file = member_file(i, name);
            let path = dir.join(&file);
            let text = serde_json::to_string_pretty(member)
                .map_err(|e| ArtifactError::Corrupt { path: path.clone(), message: e.to_string() })?;
            fs::write(&path, text + "\n").map_err(io_err(&path))?;
            entries.push(MemberEntry { name: name.clone(), file });
        }
        let manifest = Manifest {
            format_version: self.format_version,
            task: self.task.clone(),
            frequency: self.frequency,
            seasonality: self.seasonality,
            schema: self.schema.clone(),
            weights: self.weights.clone(),
            leaderboard: self.leaderboard.clone(),
            members: entries,
        };
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| ArtifactError::Corrupt { path: path.clone(), message: e.to_string() })?;
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ArtifactError> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let version: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| ArtifactError::Corrupt { path: path.clone(), message: e.to_string() })?;
        let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(ArtifactError::Version { path, found });
        }
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| ArtifactError::Corrupt { path: path.clone(), message: e.to_string() })?;
        let mut members = IndexMap::new();
        for entry in &manifest.members {
            let p = dir.join(&entry.file);
            let text = fs::read_to_string(&p).map_err(io_err(&p))?;
            let member: TrainedMember =
                serde_json::from_str(&text).map_err(|e| ArtifactError::Corrupt { path: p.clone(), message: e.to_string() })?;
            members.insert(entry.name.clone(), member);
        }
        for (name, _) in manifest.weights.support() {
            if !members.contains_key(name) {
                return Err(ArtifactError::Corrupt { path, message: format!("weighted member `{name}` has no model file") });
            }
        }
        Ok(PredictorArtifact {
            format_version: manifest.format_version,
            task: manifest.task,
            frequency: manifest.frequency,
            seasonality: manifest.seasonality,
            schema: manifest.schema,
            weights: manifest.weights,
            leaderboard: manifest.leaderboard,
            members,
        })
    }
}

/// Ensemble plus candidates, ok rows sorted by score (the ensemble first on
/// ties), then failed and skipped rows in candidate order.
pub(super) fn leaderboard(
    report: &ValidationReport,
    weights: &EnsembleWeights,
    ensemble_seconds: f64,
    refit_seconds: &IndexMap<String, f64>,
) -> Vec<LeaderboardRow> {
    let mut ok = vec![LeaderboardRow {
        model: ENSEMBLE_NAME.to_string(),
        score: Some(weights.score),
        fit_seconds: ensemble_seconds,
        predict_seconds: weights
            .support()
            .filter_map(|(n, _)| report.get(n).map(|m| m.predict_seconds))
            .sum(),
        status: ModelStatus::Ok,
        weight: 1.0,
    }];
    let mut rest = Vec::new();
    for m in &report.models {
        let row = LeaderboardRow {
            model: m.name.clone(),
            score: m.score,
            fit_seconds: m.fit_seconds + refit_seconds.get(&m.name).copied().unwrap_or(0.0),
            predict_seconds: m.predict_seconds,
            status: m.status.clone(),
            weight: weights.get(&m.name),
        };
        if m.status.is_ok() {
            ok.push(row);
        } else {
            rest.push(row);
        }
    }
    ok.sort_by(|a, b| a.score.unwrap_or(f64::INFINITY).total_cmp(&b.score.unwrap_or(f64::INFINITY)));
    ok.extend(rest);
    ok
}
