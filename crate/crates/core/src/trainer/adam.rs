use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};

/// First and second moment estimates, shaped like the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One Adam update with bias correction.
///
/// Updates are lazy: rows absent from `grads` keep their parameters and
/// moments untouched. A non-finite gradient aborts before anything changes.
pub fn adam_step(state: &mut AdamState, params: &mut ModelParams, grads: &Gradients, cfg: &TrainConfig) -> Result<()> {
    if let Some((row, _)) = grads.iter().find(|(_, g)| g.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFiniteGradient(row.to_string()));
    }
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (row, g) in grads.iter() {
        let m = state.m.row_mut(row);
        let v = state.v.row_mut(row);
        let theta = params.row_mut(row);
        for i in 0..g.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ParamRow, Table};
    use std::collections::BTreeMap;

    fn scalar_params(x: f64) -> ModelParams {
        ModelParams {
            rowless: Table { rows: 1, dim: 1, data: vec![x] },
            subj: Table::zeros(0, 1),
            obj: Table::zeros(0, 1),
            entity: Table::zeros(0, 1),
            entity_slots: BTreeMap::new(),
            pair: Table::zeros(0, 1),
            pair_slots: BTreeMap::new(),
            gates: Table::zeros(1, 9),
        }
    }

    fn grad(g: f64) -> Gradients {
        let mut grads = Gradients::new();
        grads.axpy(ParamRow::Rowless(0), 1.0, &[g]);
        grads
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            ..TrainConfig::default()
        }
    }

    /// Adam unrolled by hand for a scalar parameter and gradient sequence.
    fn unrolled(x0: f64, gs: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) -> f64 {
        let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
        for (k, g) in gs.iter().enumerate() {
            let t = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            x -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
        }
        x
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut p = scalar_params(0.3);
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &mut p, &grad(0.0), &cfg()).unwrap();
        assert_eq!(p.rowless.data[0], 0.3);
        adam_step(&mut s, &mut p, &Gradients::new(), &cfg()).unwrap();
        assert_eq!(p.rowless.data[0], 0.3);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &mut p, &grad(1.0), &cfg()).unwrap();
        // m̂ = 1, v̂ = 1, so the step is lr / (1 + eps)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p.rowless.data[0] - expected).abs() < 1e-18);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &mut p, &grad(1.0), &cfg()).unwrap();
        adam_step(&mut s, &mut p, &grad(1.0), &cfg()).unwrap();
        let expected = unrolled(0.0, &[1.0, 1.0], 1e-3, 0.9, 0.999, 1e-8);
        assert!((p.rowless.data[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn lazy_rows_keep_moments() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &mut p, &grad(1.0), &cfg()).unwrap();
        let (m, v) = (s.m.rowless.data[0], s.v.rowless.data[0]);
        adam_step(&mut s, &mut p, &Gradients::new(), &cfg()).unwrap();
        assert_eq!((s.m.rowless.data[0], s.v.rowless.data[0]), (m, v));
        assert_eq!(s.t, 2);
    }

    #[test]
    fn mirror_symmetry() {
        let mut a = scalar_params(0.25);
        let mut b = scalar_params(-0.25);
        let mut sa = AdamState::new(&a);
        let mut sb = AdamState::new(&b);
        for g in [0.7, -0.2, 1.3] {
            adam_step(&mut sa, &mut a, &grad(g), &cfg()).unwrap();
            adam_step(&mut sb, &mut b, &grad(-g), &cfg()).unwrap();
            assert_eq!(a.rowless.data[0], -b.rowless.data[0]);
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut s, &mut p, &grad(f64::NAN), &cfg()).unwrap_err();
        assert_eq!(err.to_string(), "non-finite gradient for parameter rowless[0]");
        assert_eq!(s.t, 0);
    }
}
