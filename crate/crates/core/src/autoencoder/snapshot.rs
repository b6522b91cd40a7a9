//! Model persistence (versioned JSON) and training-log persistence (JSONL,
//! one epoch record per line plus a closing summary line).

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::EpochRecord;
use super::MultimodalAutoencoder;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    version: u32,
    model: MultimodalAutoencoder,
}

pub fn save_snapshot(path: &Path, model: &MultimodalAutoencoder) -> Result<()> {
    let file = SnapshotFile { version: SNAPSHOT_VERSION, model: model.clone() };
    let mut text =
        serde_json::to_string_pretty(&file).map_err(|e| Error::Serialization(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a snapshot back, rejecting unknown versions and models whose
/// deserialized shapes do not wire together.
pub fn load_snapshot(path: &Path) -> Result<MultimodalAutoencoder> {
    let text = fs::read_to_string(path)?;
    let file: SnapshotFile =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
    if file.version != SNAPSHOT_VERSION {
        return Err(Error::UnsupportedConfiguration(format!(
            "snapshot version {} (this build reads {})",
            file.version, SNAPSHOT_VERSION
        )));
    }
    file.model.validate()?;
    Ok(file.model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Epoch(EpochRecord),
    Final { diverged: bool, snapshot: Option<String> },
}

/// Contents of a training log file; `snapshot` names the sibling model
/// file when the run saved one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogFile {
    pub records: Vec<EpochRecord>,
    pub diverged: bool,
    pub snapshot: Option<String>,
}

pub fn write_train_log(
    path: &Path,
    records: &[EpochRecord],
    diverged: bool,
    snapshot: Option<&str>,
) -> Result<()> {
    let mut text = String::new();
    for record in records {
        let line = serde_json::to_string(&LogLine::Epoch(record.clone()))
            .map_err(|e| Error::Serialization(e.to_string()))?;
        text.push_str(&line);
        text.push('\n');
    }
    let closing = LogLine::Final { diverged, snapshot: snapshot.map(str::to_owned) };
    text.push_str(
        &serde_json::to_string(&closing).map_err(|e| Error::Serialization(e.to_string()))?,
    );
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_train_log(path: &Path) -> Result<TrainLogFile> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut records = Vec::new();
    let mut closing = None;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if closing.is_some() {
            return Err(Error::Serialization("log lines after the closing line".into()));
        }
        match serde_json::from_str(&line).map_err(|e| Error::Serialization(e.to_string()))? {
            LogLine::Epoch(record) => records.push(record),
            LogLine::Final { diverged, snapshot } => closing = Some((diverged, snapshot)),
        }
    }
    let (diverged, snapshot) =
        closing.ok_or_else(|| Error::Serialization("log has no closing line".into()))?;
    Ok(TrainLogFile { records, diverged, snapshot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{MlpSpec, ModelSpec};
    use crate::estimator::LipschitzEstimate;
    use crate::fusion::{AttentionSettings, FusionRegistry};

    fn small_model() -> MultimodalAutoencoder {
        let spec = ModelSpec {
            encoders: vec![
                MlpSpec::relu_stack(vec![4, 3, 2]).unwrap(),
                MlpSpec::relu_stack(vec![5, 3, 2]).unwrap(),
            ],
            attention: AttentionSettings::default(),
        };
        spec.build("attention", &FusionRegistry::builtin(), 11).unwrap()
    }

    #[test]
    fn snapshot_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = small_model();
        save_snapshot(&path, &model).unwrap();
        let restored = load_snapshot(&path).unwrap();
        assert_eq!(restored, model);
        assert_eq!(restored.params_flat(), model.params_flat());
    }

    #[test]
    fn future_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_snapshot(&path, &small_model()).unwrap();
        let bumped = fs::read_to_string(&path)
            .unwrap()
            .replacen("\"version\": 1", "\"version\": 2", 1);
        fs::write(&path, bumped).unwrap();
        assert!(matches!(load_snapshot(&path), Err(Error::UnsupportedConfiguration(_))));
    }

    #[test]
    fn tampered_shapes_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = small_model();
        save_snapshot(&path, &model).unwrap();
        // Drop one decoder so the counts disagree.
        let mut file: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        file["model"]["decoders"].as_array_mut().unwrap().pop();
        fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        assert!(matches!(load_snapshot(&path), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn train_log_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        let records = vec![
            EpochRecord {
                epoch: 1,
                train_loss: vec![0.5, 0.25],
                test_loss: vec![0.625, 0.3125],
                combined_train_loss: 0.75,
                combined_test_loss: 0.9375,
                lipschitz: None,
            },
            EpochRecord {
                epoch: 2,
                train_loss: vec![0.4, 0.2],
                test_loss: vec![0.5, 0.25],
                combined_train_loss: 0.6,
                combined_test_loss: 0.75,
                lipschitz: Some(crate::autoencoder::LipschitzSnapshot {
                    encoders: vec![LipschitzEstimate {
                        value: 1.5,
                        pairs_evaluated: 10,
                        pairs_skipped: 0,
                        seed: 7,
                    }],
                    decoders: vec![LipschitzEstimate {
                        value: 2.5,
                        pairs_evaluated: 10,
                        pairs_skipped: 0,
                        seed: 8,
                    }],
                    overall: 2.5,
                }),
            },
        ];
        write_train_log(&path, &records, false, Some("model.json")).unwrap();
        let log = read_train_log(&path).unwrap();
        assert_eq!(log.records, records);
        assert!(!log.diverged);
        assert_eq!(log.snapshot.as_deref(), Some("model.json"));
    }

    #[test]
    fn log_without_closing_line_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        fs::write(&path, "").unwrap();
        assert!(matches!(read_train_log(&path), Err(Error::Serialization(_))));
    }
}
