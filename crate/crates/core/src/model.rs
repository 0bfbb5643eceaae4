//! Wavelet neural operator: pointwise lift, wavelet kernel-integration
//! blocks, pointwise projection.
//!
//! Fields are `[points, channels]` with points in row-major grid order. A
//! block computes `φ(K v + W v + b)` where `K` mixes channels of the
//! coarsest-level DWT subbands and passes every finer detail through, which
//! reduces to `K v = v + S(Mix(A v) − A v)` with `A` the coarse analysis and
//! `S` the coarse synthesis.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DiffTensor, LinearMap, NodeId, ParamId, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::wavelet::{make_basis, CoarseAnalysis, CoarseSynthesis, Dwt2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    None,
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gelu" => Ok(Self::Gelu),
            "none" => Ok(Self::None),
            _ => Err(Error::Config(format!("unknown activation `{s}` (gelu | none)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WnoConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub lift_dim: usize,
    pub blocks: usize,
    pub basis: String,
    pub levels: usize,
    pub activation: Activation,
    pub rows: usize,
    pub cols: usize,
    pub proj_hidden: usize,
    /// One mixing matrix per coefficient position instead of per subband.
    pub positionwise: bool,
}

impl WnoConfig {
    pub fn new(in_channels: usize, out_channels: usize, rows: usize, cols: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            lift_dim: 64,
            blocks: 4,
            basis: "db4".into(),
            levels: 3,
            activation: Activation::Gelu,
            rows,
            cols,
            proj_hidden: 128,
            positionwise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.lift_dim == 0 || self.proj_hidden == 0 {
            return Err(Error::Config("channel widths must be positive".into()));
        }
        if self.blocks == 0 {
            return Err(Error::Config("at least one wavelet block required".into()));
        }
        make_basis(&self.basis)?;
        Dwt2::new(make_basis(&self.basis)?, self.rows, self.cols, self.levels)?;
        Ok(())
    }

    pub fn points(&self) -> usize {
        self.rows * self.cols
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> Result<usize> {
        let (i, d, h, o) = (self.in_channels, self.lift_dim, self.proj_hidden, self.out_channels);
        let per_mix = if self.positionwise {
            let plan = Dwt2::new(make_basis(&self.basis)?, self.rows, self.cols, self.levels)?;
            plan.coarse_positions() * d * d
        } else {
            d * d
        };
        Ok(i * d + d + self.blocks * (4 * per_mix + d * d + d) + d * h + h + h * o + o)
    }
}

/// Coarse-level wavelet operators for one grid shape.
#[derive(Clone, Debug)]
pub struct SpectralOps {
    pub analysis: Arc<dyn LinearMap>,
    pub synthesis: Arc<dyn LinearMap>,
    pub positions: usize,
}

impl SpectralOps {
    pub fn new(basis: &str, rows: usize, cols: usize, levels: usize) -> Result<Self> {
        let plan = Arc::new(Dwt2::new(make_basis(basis)?, rows, cols, levels)?);
        Ok(Self {
            positions: plan.coarse_positions(),
            analysis: Arc::new(CoarseAnalysis(plan.clone())),
            synthesis: Arc::new(CoarseSynthesis(plan)),
        })
    }
}

#[derive(Clone, Debug)]
pub struct BlockIds {
    pub mix: [ParamId; 4],
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct ModelIds {
    pub lift_weight: ParamId,
    pub lift_bias: ParamId,
    pub blocks: Vec<BlockIds>,
    pub proj1_weight: ParamId,
    pub proj1_bias: ParamId,
    pub proj2_weight: ParamId,
    pub proj2_bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct WnoModel {
    pub cfg: WnoConfig,
    pub store: ParamStore,
    pub ids: ModelIds,
    ops: SpectralOps,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn param_layout(cfg: &WnoConfig, positions: usize) -> Vec<(String, Vec<usize>)> {
    let (i, d, h, o) = (cfg.in_channels, cfg.lift_dim, cfg.proj_hidden, cfg.out_channels);
    let mut out = vec![("lift.weight".to_string(), vec![i, d]), ("lift.bias".to_string(), vec![d])];
    for b in 0..cfg.blocks {
        for s in 0..4 {
            let shape = if cfg.positionwise { vec![positions, d, d] } else { vec![d, d] };
            out.push((format!("block{b}.mix{s}"), shape));
        }
        out.push((format!("block{b}.weight"), vec![d, d]));
        out.push((format!("block{b}.bias"), vec![d]));
    }
    out.push(("proj1.weight".into(), vec![d, h]));
    out.push(("proj1.bias".into(), vec![h]));
    out.push(("proj2.weight".into(), vec![h, o]));
    out.push(("proj2.bias".into(), vec![o]));
    out
}

fn resolve_ids(cfg: &WnoConfig, store: &ParamStore) -> Result<ModelIds> {
    let get = |name: &str| {
        store
            .id(name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))
    };
    let blocks = (0..cfg.blocks)
        .map(|b| {
            Ok(BlockIds {
                mix: [
                    get(&format!("block{b}.mix0"))?,
                    get(&format!("block{b}.mix1"))?,
                    get(&format!("block{b}.mix2"))?,
                    get(&format!("block{b}.mix3"))?,
                ],
                weight: get(&format!("block{b}.weight"))?,
                bias: get(&format!("block{b}.bias"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelIds {
        lift_weight: get("lift.weight")?,
        lift_bias: get("lift.bias")?,
        blocks,
        proj1_weight: get("proj1.weight")?,
        proj1_bias: get("proj1.bias")?,
        proj2_weight: get("proj2.weight")?,
        proj2_bias: get("proj2.bias")?,
    })
}

/// Deterministic initialization: pointwise linears `U(±1/√fan_in)`, mixing
/// tensors `(1/d_v)·U(0, 1)`.
pub fn init_model(cfg: &WnoConfig, seed: u64) -> Result<WnoModel> {
    cfg.validate()?;
    let ops = SpectralOps::new(&cfg.basis, cfg.rows, cfg.cols, cfg.levels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for (name, shape) in param_layout(cfg, ops.positions) {
        let n: usize = shape.iter().product();
        let values = if name.contains(".mix") {
            let scale = 1.0 / cfg.lift_dim as f64;
            (0..n).map(|_| scale * rng.random::<f64>()).collect()
        } else {
            let fan_in = if name.starts_with("lift") {
                cfg.in_channels
            } else if name.starts_with("proj2") {
                cfg.proj_hidden
            } else {
                cfg.lift_dim
            };
            uniform(&mut rng, n, 1.0 / (fan_in as f64).sqrt())
        };
        store.insert(name, DiffTensor::new(shape, values)?)?;
    }
    let ids = resolve_ids(cfg, &store)?;
    Ok(WnoModel { cfg: cfg.clone(), store, ids, ops })
}

impl WnoModel {
    /// Rebuilds a model around an existing parameter store, checking that
    /// every tensor matches the configuration.
    pub fn from_store(cfg: &WnoConfig, store: ParamStore) -> Result<Self> {
        cfg.validate()?;
        let ops = SpectralOps::new(&cfg.basis, cfg.rows, cfg.cols, cfg.levels)?;
        let layout = param_layout(cfg, ops.positions);
        if layout.len() != store.len() {
            return Err(Error::InvalidArgument(format!(
                "store has {} tensors, configuration needs {}",
                store.len(),
                layout.len()
            )));
        }
        for (name, shape) in &layout {
            let id = store
                .id(name)
                .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))?;
            if store.shape(id) != shape.as_slice() {
                return Err(Error::shape("WnoModel::from_store", shape, store.shape(id)));
            }
        }
        let ids = resolve_ids(cfg, &store)?;
        Ok(Self {
            cfg: cfg.clone(),
            store,
            ids,
            ops,
        })
    }

    pub fn param_count(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    /// Wavelet operators for the configured grid, or for another grid when
    /// the mixing is shared over positions.
    pub fn ops_for(&self, rows: usize, cols: usize) -> Result<SpectralOps> {
        if rows == self.cfg.rows && cols == self.cfg.cols {
            return Ok(self.ops.clone());
        }
        let ops = SpectralOps::new(&self.cfg.basis, rows, cols, self.cfg.levels)?;
        if self.cfg.positionwise && ops.positions != self.ops.positions {
            return Err(Error::InvalidArgument(
                "position-wise mixing is tied to the training grid".into(),
            ));
        }
        Ok(ops)
    }

    /// Runs the network on one `[points, in_channels]` input without
    /// recording gradients.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(&self.store);
        let n = self.cfg.points();
        let a = tape.constant(DiffTensor::new(vec![n, self.cfg.in_channels], input.to_vec())?);
        let u = wno_forward(&mut tape, self, &self.ops, a)?;
        Ok(tape.value(u).values().to_vec())
    }
}

/// Pointwise affine lift to `lift_dim` channels.
pub fn lift(tape: &mut Tape<'_>, model: &WnoModel, a: NodeId) -> Result<NodeId> {
    let w = tape.param(model.ids.lift_weight);
    let b = tape.param(model.ids.lift_bias);
    tape.linear(a, w, Some(b))
}

/// Wavelet-domain kernel convolution of block `block`.
pub fn spectral_conv(
    tape: &mut Tape<'_>,
    model: &WnoModel,
    ops: &SpectralOps,
    block: usize,
    v: NodeId,
) -> Result<NodeId> {
    let ids = &model.ids.blocks[block];
    let coarse = tape.map(v, ops.analysis.clone())?;
    let weights = ids.mix.iter().map(|&id| tape.param(id)).collect();
    let mixed = tape.subband_mix(coarse, weights)?;
    let delta = tape.sub(mixed, coarse)?;
    let back = tape.map(delta, ops.synthesis.clone())?;
    tape.add(v, back)
}

/// `φ(K v + W v + b)`; the last block skips `φ`.
pub fn wavelet_block(
    tape: &mut Tape<'_>,
    model: &WnoModel,
    ops: &SpectralOps,
    block: usize,
    v: NodeId,
) -> Result<NodeId> {
    let k = spectral_conv(tape, model, ops, block, v)?;
    let ids = &model.ids.blocks[block];
    let w = tape.param(ids.weight);
    let b = tape.param(ids.bias);
    let wv = tape.linear(v, w, Some(b))?;
    let pre = tape.add(k, wv)?;
    let last = block + 1 == model.cfg.blocks;
    match model.cfg.activation {
        Activation::Gelu if !last => tape.gelu(pre),
        _ => Ok(pre),
    }
}

/// Full operator: `Q(block_l(… block_1(P a)))`.
pub fn wno_forward(tape: &mut Tape<'_>, model: &WnoModel, ops: &SpectralOps, a: NodeId) -> Result<NodeId> {
    let shape = tape.value(a).shape().to_vec();
    if shape.len() != 2 || shape[1] != model.cfg.in_channels {
        return Err(Error::shape(
            "wno_forward",
            &[ops.analysis.input_len(), model.cfg.in_channels],
            &shape,
        ));
    }
    if shape[0] != ops.analysis.input_len() {
        return Err(Error::shape(
            "wno_forward",
            &[ops.analysis.input_len(), model.cfg.in_channels],
            &shape,
        ));
    }
    let mut v = lift(tape, model, a)?;
    for b in 0..model.cfg.blocks {
        v = wavelet_block(tape, model, ops, b, v)?;
    }
    let ids = &model.ids;
    let (w1, b1) = (tape.param(ids.proj1_weight), tape.param(ids.proj1_bias));
    let h = tape.linear(v, w1, Some(b1))?;
    let h = match model.cfg.activation {
        Activation::Gelu => tape.gelu(h)?,
        Activation::None => h,
    };
    let (w2, b2) = (tape.param(ids.proj2_weight), tape.param(ids.proj2_bias));
    tape.linear(h, w2, Some(b2))
}
