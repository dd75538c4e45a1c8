use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub neg_per_pos: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Query relations for validation MAP; `None` picks 10 or 50 by vocabulary size.
    pub eval_top_k: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            neg_per_pos: 16,
            learning_rate: 5e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience: 5,
            max_epochs: 50,
            seed: 0,
            eval_top_k: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_eps]
            .iter()
            .all(|x| *x > 0.0);
        if self.batch_size == 0 || self.neg_per_pos == 0 || self.patience == 0 || !positive {
            return Err(Error::InvalidConfig(
                "batch_size, neg_per_pos, patience and optimizer constants must be positive".into(),
            ));
        }
        if self.adam_beta1 >= 1.0 || self.adam_beta2 >= 1.0 {
            return Err(Error::InvalidConfig("Adam betas must be below 1".into()));
        }
        Ok(())
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("bad value `{value}` for `{key}`"))),
    }
}

/// Applies one `key=value` setting to the model or training configuration.
pub fn apply_setting(model: &mut ModelConfig, train: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let value = value.trim();
    match key.trim() {
        "model" => model.kind = value.parse()?,
        "attention" => model.attention = value.parse()?,
        "dim_rowless" => model.dim_rowless = parse(key, value)?,
        "dim_ene" => model.dim_ene = parse(key, value)?,
        "max_pair_predicates" => model.max_pair_predicates = parse(key, value)?,
        "max_neighbors" => model.max_neighbors = parse(key, value)?,
        "margin" => model.margin = parse(key, value)?,
        "exclude_self" => model.exclude_self = parse_bool(key, value)?,
        "hide_held_out_neighbors" => model.hide_held_out_neighbors = parse_bool(key, value)?,
        "batch_size" => train.batch_size = parse(key, value)?,
        "neg_per_pos" => train.neg_per_pos = parse(key, value)?,
        "learning_rate" => train.learning_rate = parse(key, value)?,
        "adam_beta1" => train.adam_beta1 = parse(key, value)?,
        "adam_beta2" => train.adam_beta2 = parse(key, value)?,
        "adam_eps" => train.adam_eps = parse(key, value)?,
        "patience" => train.patience = parse(key, value)?,
        "max_epochs" => train.max_epochs = parse(key, value)?,
        "seed" => train.seed = parse(key, value)?,
        "eval_top_k" => train.eval_top_k = Some(parse(key, value)?),
        other => return Err(Error::InvalidConfig(format!("unknown config key `{other}`"))),
    }
    Ok(())
}

/// Parses a flat `key=value` file; `#` starts a comment.
pub fn parse_config_text(text: &str, model: &mut ModelConfig, train: &mut TrainConfig) -> Result<()> {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::MalformedLine {
                line: n + 1,
                reason: "expected key=value".into(),
            });
        };
        apply_setting(model, train, k, v)?;
    }
    Ok(())
}

pub fn load_config_file(path: &Path, model: &mut ModelConfig, train: &mut TrainConfig) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text, model, train)
}
