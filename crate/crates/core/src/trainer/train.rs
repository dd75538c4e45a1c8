use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::sample::sample_batch;
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, top_k_relations, EvalOptions};
use crate::model::{gradients, init_params, Model, ModelConfig, ModelParams, ParamScope};
use crate::store::{NeighborIndex, Pair, RelationId, RelationKind, SplitSpec, Triple, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_map: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_map: Option<f64>,
    pub stop_reason: Option<StopReason>,
}

impl TrainHistory {
    /// Completed epochs since the best one (all of them if none was best).
    pub fn stale_epochs(&self) -> usize {
        match self.best_epoch {
            Some(b) => self.epochs.len() - 1 - b,
            None => self.epochs.len(),
        }
    }

    /// One JSON object per epoch.
    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
            .collect()
    }
}

/// The index a model trains and scores against: every training triple,
/// optionally without OpenIE evidence of held-out pairs in neighborhoods.
pub fn training_index(split: &SplitSpec, config: &ModelConfig) -> NeighborIndex {
    if config.hide_held_out_neighbors {
        NeighborIndex::build_hiding(&split.train, &split.held_out_pairs())
    } else {
        NeighborIndex::build(&split.train)
    }
}

/// Mutable training state. Everything an epoch depends on is either here or
/// derived from the epoch number, so a restored trainer continues exactly.
pub struct Trainer<'a> {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub params: ModelParams,
    pub best_params: Option<ModelParams>,
    pub adam: AdamState,
    pub history: TrainHistory,
    vocab: &'a Vocabulary,
    split: &'a SplitSpec,
    index: NeighborIndex,
    positives: Vec<Triple>,
    kb_relations: Vec<RelationId>,
    valid_pairs: Vec<Pair>,
    queries: Vec<RelationId>,
}

impl<'a> Trainer<'a> {
    pub fn new(vocab: &'a Vocabulary, split: &'a SplitSpec, model_config: ModelConfig, train_config: TrainConfig) -> Result<Self> {
        model_config.validate()?;
        train_config.validate()?;
        let params = init_params(&model_config, vocab, &ParamScope::from_split(split), train_config.seed);
        let adam = AdamState::new(&params);
        Self::restore(vocab, split, model_config, train_config, params, None, adam, TrainHistory::default())
    }

    #[allow(clippy::too_many_arguments)]
    pub fn restore(
        vocab: &'a Vocabulary,
        split: &'a SplitSpec,
        model_config: ModelConfig,
        train_config: TrainConfig,
        params: ModelParams,
        best_params: Option<ModelParams>,
        adam: AdamState,
        history: TrainHistory,
    ) -> Result<Self> {
        let positives: Vec<Triple> = split.train.with_source(RelationKind::Kb).copied().collect();
        if positives.is_empty() {
            return Err(Error::InvalidConfig("training split has no KB triples".into()));
        }
        if params.rowless.rows != vocab.num_relations() {
            return Err(Error::InvalidConfig(format!(
                "parameters cover {} relations, vocabulary has {}",
                params.rowless.rows,
                vocab.num_relations()
            )));
        }
        Ok(Self {
            index: training_index(split, &model_config),
            kb_relations: vocab.kb_relations(),
            valid_pairs: split.valid_pairs(),
            queries: top_k_relations(&split.train, vocab, train_config.eval_top_k),
            model_config,
            train_config,
            params,
            best_params,
            adam,
            history,
            vocab,
            split,
            positives,
        })
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    pub fn is_finished(&self) -> bool {
        self.history.stop_reason.is_some()
    }

    /// Parameters to use after training: the best validation epoch if any,
    /// otherwise the latest.
    pub fn final_params(&self) -> &ModelParams {
        self.best_params.as_ref().unwrap_or(&self.params)
    }

    fn epoch_rng(&self, epoch: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.train_config.seed);
        rng.set_stream(epoch as u64 + 1);
        rng
    }

    /// Validation MAP of the current parameters, `None` without usable
    /// validation pairs.
    pub fn validation_map(&self) -> Option<f64> {
        if self.valid_pairs.is_empty() {
            return None;
        }
        let model = Model::new(&self.params, &self.model_config, &self.index);
        let report = evaluate_model(
            model,
            &self.split.valid,
            &self.valid_pairs,
            &self.queries,
            self.vocab,
            EvalOptions::default(),
        );
        (!report.relations.is_empty()).then_some(report.map)
    }

    /// Runs one epoch and updates the history. Returns `None` once training
    /// has stopped.
    pub fn step(&mut self) -> Result<Option<&EpochRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let epoch = self.history.epochs.len();
        if epoch >= self.train_config.max_epochs {
            self.history.stop_reason = Some(StopReason::MaxEpochs);
            return Ok(None);
        }
        let mut rng = self.epoch_rng(epoch);
        let mut order = self.positives.clone();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(self.train_config.batch_size) {
            let batch = sample_batch(
                chunk,
                &self.split.train,
                &self.index,
                &self.kb_relations,
                &self.model_config,
                &self.train_config,
                &mut rng,
            );
            if batch.items.is_empty() {
                continue;
            }
            let (loss, grads) = gradients(&self.params, &self.model_config, &batch);
            adam_step(&mut self.adam, &mut self.params, &grads, &self.train_config)?;
            loss_sum += loss * batch.num_positives() as f64;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / self.positives.len() as f64,
            valid_map: self.validation_map(),
        };
        log::info!("epoch {epoch}: loss {:.6}, valid MAP {:?}", record.train_loss, record.valid_map);
        if let Some(map) = record.valid_map {
            if self.history.best_map.map_or(true, |b| map > b) {
                self.history.best_map = Some(map);
                self.history.best_epoch = Some(epoch);
                self.best_params = Some(self.params.clone());
            }
        }
        self.history.epochs.push(record);
        if self.history.stale_epochs() >= self.train_config.patience && self.history.best_epoch.is_some() {
            self.history.stop_reason = Some(StopReason::EarlyStopping);
        } else if self.history.epochs.len() >= self.train_config.max_epochs {
            self.history.stop_reason = Some(StopReason::MaxEpochs);
        }
        Ok(self.history.epochs.last())
    }

    /// Steps until early stopping or the epoch limit.
    pub fn run(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }
}

/// Output of [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: TrainHistory,
}

/// Trains from fresh parameters and returns the best-validation parameters.
pub fn train(vocab: &Vocabulary, split: &SplitSpec, model_config: &ModelConfig, train_config: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(vocab, split, model_config.clone(), train_config.clone())?;
    trainer.run()?;
    Ok(TrainOutcome {
        params: trainer.final_params().clone(),
        history: trainer.history,
    })
}
