use serde::{Deserialize, Serialize};

use super::ParamMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "adam requires lr >= 0, 0 < beta1, beta2 < 1, epsilon > 0; got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub step_count: u64,
    pub first_moment: ParamMap<T>,
    pub second_moment: ParamMap<T>,
    pub config: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            step_count: 0,
            first_moment: ParamMap::new(),
            second_moment: ParamMap::new(),
            config,
        }
    }
}

/// One bias-corrected Adam update of every parameter named in `grads`.
/// Moment tensors are created as zeros on first sight of a parameter.
pub fn adam_step<T: Scalar>(
    params: &mut ParamMap<T>,
    grads: &ParamMap<T>,
    state: &mut AdamState<T>,
) -> Result<()> {
    for (name, g) in grads {
        let p = params
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("gradient for unknown parameter {name}")))?;
        p.expect_same_shape("adam_step", g)?;
    }
    state.step_count += 1;
    let cfg = state.config;
    let t = state.step_count as i32;
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let eps = T::from_f64_lossy(cfg.epsilon);
    let c1 = T::one() - T::from_f64_lossy(cfg.beta1.powi(t));
    let c2 = T::one() - T::from_f64_lossy(cfg.beta2.powi(t));

    for (name, g) in grads {
        let m = state
            .first_moment
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
        let v = state
            .second_moment
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape().to_vec()));
        let p = params.get_mut(name).expect("checked above");
        for (((pv, mv), vv), &gv) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            *mv = b1 * *mv + (T::one() - b1) * gv;
            *vv = b2 * *vv + (T::one() - b2) * gv * gv;
            let m_hat = *mv / c1;
            let v_hat = *vv / c2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
