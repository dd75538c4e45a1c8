use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::config::TrainConfig;
use super::train::{TrainHistory, Trainer};
use crate::error::{Error, Result};
use crate::eval::sha256_hex;
use crate::model::{ModelConfig, ModelParams};
use crate::store::{SplitSpec, Vocabulary};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "OPENKI-CHECKPOINT";

/// Everything needed to score with a model or to resume its training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub vocab_fingerprint: String,
    pub params: ModelParams,
    pub best_params: Option<ModelParams>,
    pub adam: AdamState,
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn from_trainer(trainer: &Trainer<'_>, vocab: &Vocabulary) -> Self {
        Self {
            model_config: trainer.model_config.clone(),
            train_config: trainer.train_config.clone(),
            vocab_fingerprint: vocab.fingerprint(),
            params: trainer.params.clone(),
            best_params: trainer.best_params.clone(),
            adam: trainer.adam.clone(),
            history: trainer.history.clone(),
        }
    }

    /// Parameters for scoring: best validation epoch, else latest.
    pub fn final_params(&self) -> &ModelParams {
        self.best_params.as_ref().unwrap_or(&self.params)
    }

    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if self.vocab_fingerprint != vocab.fingerprint() {
            return Err(Error::InvalidConfig(
                "checkpoint was trained against a different vocabulary".into(),
            ));
        }
        Ok(())
    }

    /// Rebuilds a trainer that continues where this checkpoint left off.
    pub fn into_trainer<'a>(self, vocab: &'a Vocabulary, split: &'a SplitSpec) -> Result<Trainer<'a>> {
        self.check_vocab(vocab)?;
        Trainer::restore(
            vocab,
            split,
            self.model_config,
            self.train_config,
            self.params,
            self.best_params,
            self.adam,
            self.history,
        )
    }

    /// Header line, checksum line, then the JSON body.
    pub fn to_text(&self) -> String {
        let body = serde_json::to_string(self).expect("serializable");
        format!("{MAGIC} {CHECKPOINT_VERSION}\nsha256 {}\n{body}\n", sha256_hex(body.as_bytes()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.splitn(3, '\n');
        let header = parts.next().unwrap_or_default();
        let version = header
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::CorruptCheckpoint("missing checkpoint header".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let digest = parts
            .next()
            .and_then(|l| l.strip_prefix("sha256 "))
            .ok_or_else(|| Error::CorruptCheckpoint("missing checksum".into()))?;
        let body = parts
            .next()
            .and_then(|b| b.strip_suffix('\n'))
            .ok_or_else(|| Error::CorruptCheckpoint("truncated body".into()))?;
        if sha256_hex(body.as_bytes()) != digest.trim() {
            return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
        }
        serde_json::from_str(body).map_err(|e| Error::CorruptCheckpoint(e.to_string()))
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, checkpoint.to_text()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::parse(&text)
}
