//! Parameter storage and the Adam optimizer with step-decayed learning rate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tensor::DiffTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    name: String,
    tensor: DiffTensor,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Param {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tensor(&self) -> &DiffTensor {
        &self.tensor
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// Named trainable parameters plus their Adam moment estimates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: DiffTensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        let n = tensor.len();
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Param {
            name,
            tensor: tensor.with_requires_grad(true),
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        self.params[id.0].tensor.values()
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.params[id.0].tensor.values_mut()
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        self.params[id.0].tensor.shape()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Restores optimizer state, e.g. when loading a checkpoint.
    pub fn restore_state(&mut self, id: ParamId, m: Vec<f64>, v: Vec<f64>) -> Result<()> {
        let p = &mut self.params[id.0];
        if m.len() != p.tensor.len() || v.len() != p.tensor.len() {
            return Err(Error::shape("restore_state", p.tensor.shape(), &[m.len(), v.len()]));
        }
        p.m = m;
        p.v = v;
        Ok(())
    }

    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn zero_grads(&self) -> Gradients {
        Gradients {
            grads: self.params.iter().map(|p| vec![0.0; p.tensor.len()]).collect(),
        }
    }
}

/// Per-parameter gradient arrays, indexed by [`ParamId`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub(crate) grads: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.grads[id.0]
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for x in g.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr0: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            weight_decay: 1e-6,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay_factor: 0.75,
            decay_every: 50,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr must be finite and >= 0, got {}", self.lr0)));
        }
        if !(0.0..=1.0).contains(&self.decay_factor) {
            return Err(Error::Config(format!(
                "decay_factor must lie in [0, 1], got {}",
                self.decay_factor
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("decay_every must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Config("eps must be > 0 and weight_decay >= 0".into()));
        }
        Ok(())
    }
}

/// Step schedule: `lr0 * decay_factor^floor(epoch / decay_every)`.
pub fn lr_at(epoch: usize, cfg: &OptimConfig) -> f64 {
    let drops = (epoch / cfg.decay_every.max(1)) as i32;
    cfg.lr0 * cfg.decay_factor.powi(drops)
}

/// One Adam update with decoupled weight decay.
///
/// The decay `θ ← θ − lr·wd·θ` is applied before the bias-corrected moment
/// step, and the step counter advances even when `lr == 0`.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &Gradients,
    lr: f64,
    cfg: &OptimConfig,
) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
    }
    if grads.grads.len() != store.params.len() {
        return Err(Error::shape("adam_step", &[store.params.len()], &[grads.grads.len()]));
    }
    for (p, g) in store.params.iter().zip(&grads.grads) {
        if g.len() != p.tensor.len() {
            return Err(Error::shape("adam_step", p.tensor.shape(), &[g.len()]));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: "adam_step gradient" });
        }
    }

    store.step += 1;
    let t = store.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    let decay = lr * cfg.weight_decay;

    for (p, g) in store.params.iter_mut().zip(&grads.grads) {
        let theta = p.tensor.values_mut();
        for (((w, m), v), &gi) in theta.iter_mut().zip(&mut p.m).zip(&mut p.v).zip(g) {
            *w -= decay * *w;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *w -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> (ParamStore, ParamId) {
        let mut store = ParamStore::new();
        let id = store.insert("w", DiffTensor::scalar(value)).unwrap();
        (store, id)
    }

    fn grads_of(store: &ParamStore, id: ParamId, g: f64) -> Gradients {
        let mut grads = store.zero_grads();
        grads.get_mut(id)[0] = g;
        grads
    }

    #[test]
    fn schedule_values() {
        let cfg = OptimConfig::default();
        assert_eq!(lr_at(0, &cfg), 0.001);
        assert_eq!(lr_at(49, &cfg), 0.001);
        assert!((lr_at(50, &cfg) - 0.00075).abs() < 1e-18);
        assert!((lr_at(100, &cfg) - 0.0005625).abs() < 1e-18);
    }

    #[test]
    fn schedule_is_non_increasing() {
        let cfg = OptimConfig::default();
        let mut prev = f64::INFINITY;
        for e in 0..1000 {
            let lr = lr_at(e, &cfg);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn first_step_is_minus_lr_sign() {
        let cfg = OptimConfig {
            weight_decay: 0.0,
            ..OptimConfig::default()
        };
        let (mut store, id) = single(0.5);
        let g = grads_of(&store, id, 1.0);
        adam_step(&mut store, &g, 1e-3, &cfg).unwrap();
        assert!((store.values(id)[0] - (0.5 - 1e-3)).abs() < 1e-10);
        assert_eq!(store.step(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let cfg = OptimConfig {
            weight_decay: 0.0,
            ..OptimConfig::default()
        };
        let (mut store, id) = single(0.25);
        let g = store.zero_grads();
        adam_step(&mut store, &g, 1e-3, &cfg).unwrap();
        assert_eq!(store.values(id)[0], 0.25);
    }

    #[test]
    fn decay_only_step() {
        let cfg = OptimConfig::default();
        let (mut store, id) = single(1.0);
        let g = store.zero_grads();
        adam_step(&mut store, &g, 1e-3, &cfg).unwrap();
        assert!((store.values(id)[0] - (1.0 - 1e-9)).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let (mut store, id) = single(1.0);
        let g = grads_of(&store, id, f64::NAN);
        assert!(adam_step(&mut store, &g, 1e-3, &OptimConfig::default()).is_err());
        assert_eq!(store.step(), 0);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let (mut store, id) = single(0.3);
            for k in 0..20 {
                let g = grads_of(&store, id, (k as f64 * 0.7).sin());
                adam_step(&mut store, &g, 1e-2, &OptimConfig::default()).unwrap();
            }
            store.values(id)[0].to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::default().validate().is_ok());
        let bad = OptimConfig {
            decay_every: 0,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimConfig {
            decay_factor: 1.5,
            ..OptimConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
