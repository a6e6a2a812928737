use serde::{Deserialize, Serialize};

use crate::diffgraph::{GradientMap, ParameterStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one tensor per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GradientMap,
    pub v: GradientMap,
    /// Number of updates applied so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParameterStore) -> Self {
        AdamState {
            m: GradientMap::zeros_like(params),
            v: GradientMap::zeros_like(params),
            t: 0,
        }
    }
}

/// One Adam update without weight decay. Nothing is modified if any
/// gradient entry is non-finite.
pub fn adam_step(
    params: &mut ParameterStore,
    state: &mut AdamState,
    grads: &GradientMap,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFinite {
            op: format!("gradient of `{name}`"),
        });
    }
    let t = state.t + 1;
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.eps);
    for ((((name, p), (_, m)), (_, v)), (gname, g)) in params
        .iter_mut()
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
        .zip(grads.iter())
    {
        debug_assert_eq!(name, gname);
        let mut p = p.view_mut();
        ndarray::Zip::from(&mut p)
            .and(m)
            .and(v)
            .and(g)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
    }
    state.t = t;
    Ok(())
}
