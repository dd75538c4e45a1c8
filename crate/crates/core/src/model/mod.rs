//! Parameters, scoring functions, attention and gradients.

mod config;
mod context;
mod grad;
mod params;
mod score;

pub use config::{AttentionMode, ModelConfig, ModelKind};
pub use context::{agg_neighborhood, mean_role_embedding, sample_capped, PairContext, Role};
pub use grad::{accumulate_score_gradient, batch_loss, gradients, ranking_loss, Batch, RankingItem};
pub use params::{init_params, Gradients, ModelParams, ParamRow, ParamScope, Table, GATE_A, GATE_ALPHA, GATE_B};
pub use score::{
    argmax, attention_weights, dot, relu, score, score_att, score_e, score_ene, score_f, score_openki,
    score_or_fallback, sigmoid, softmax, Model, ScoreBreakdown,
};
