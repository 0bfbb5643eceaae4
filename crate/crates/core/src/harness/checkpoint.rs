//! Model checkpoints.
//!
//! File layout: `b"PWCK"`, `u16` version, `u32` header length, JSON header,
//! then for every parameter (header order) its values, first and second
//! Adam moments as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::metrics::MetricsRecord;
use crate::autodiff::{DiffTensor, ParamStore};
use crate::error::{Error, Result};
use crate::model::{WnoConfig, WnoModel};
use crate::physics::ProblemSpec;

pub const MAGIC: &[u8; 4] = b"PWCK";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub spec: ProblemSpec,
    pub model: WnoModel,
    pub epoch: usize,
    pub metrics: Option<MetricsRecord>,
}

#[derive(Serialize, Deserialize)]
struct ParamDecl {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    hash: String,
    model: WnoConfig,
    spec: ProblemSpec,
    config: TrainConfig,
    epoch: usize,
    step: u64,
    metrics: Option<MetricsRecord>,
    params: Vec<ParamDecl>,
}

/// SHA-256 over the architecture and problem description.
pub fn config_hash(model: &WnoConfig, spec: &ProblemSpec) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(model).expect("serializable"));
    h.update(serde_json::to_vec(spec).expect("serializable"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn hash(&self) -> String {
        config_hash(&self.model.cfg, &self.spec)
    }

    /// Rejects checkpoints trained for a different architecture or problem.
    pub fn ensure_matches(&self, model: &WnoConfig, spec: &ProblemSpec) -> Result<()> {
        if self.hash() != config_hash(model, spec) {
            return Err(Error::Config("checkpoint was trained with a different configuration".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let store = &self.model.store;
        let params = store
            .iter()
            .map(|(_, p)| ParamDecl { name: p.name().to_string(), shape: p.tensor().shape().to_vec() })
            .collect();
        let header = Header {
            hash: self.hash(),
            model: self.model.cfg.clone(),
            spec: self.spec.clone(),
            config: self.config.clone(),
            epoch: self.epoch,
            step: store.step(),
            metrics: self.metrics.clone(),
            params,
        };
        let json = serde_json::to_vec(&header)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::format(path, "header too large"))?;
        let mut buf = Vec::with_capacity(10 + json.len() + 24 * store.num_scalars());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(&json);
        for (_, p) in store.iter() {
            for arr in [p.tensor().values(), p.first_moment(), p.second_moment()] {
                arr.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
            }
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 10 || &bytes[..4] != MAGIC {
            return Err(Error::format(path, "missing PWCK magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
        }
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let body = bytes.get(10..10 + len).ok_or_else(|| Error::format(path, "truncated header"))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.hash != config_hash(&header.model, &header.spec) {
            return Err(Error::format(path, "configuration hash mismatch"));
        }
        let mut offset = 10 + len;
        let mut take = |n: usize| -> Result<Vec<f64>> {
            let raw = bytes
                .get(offset..offset + 8 * n)
                .ok_or_else(|| Error::format(path, "truncated parameter data"))?;
            offset += 8 * n;
            Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let mut store = ParamStore::new();
        for p in &header.params {
            let n: usize = p.shape.iter().product();
            let values = take(n)?;
            let m = take(n)?;
            let v = take(n)?;
            let id = store.insert(p.name.clone(), DiffTensor::new(p.shape.clone(), values)?)?;
            store.restore_state(id, m, v)?;
        }
        if offset != bytes.len() {
            return Err(Error::format(path, "trailing bytes after parameters"));
        }
        store.set_step(header.step);
        let model = WnoModel::from_store(&header.model, store).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(Self {
            config: header.config,
            spec: header.spec,
            model,
            epoch: header.epoch,
            metrics: header.metrics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;
    use crate::physics::ProblemId;

    fn small() -> Checkpoint {
        let mut config = TrainConfig::new(ProblemId::Poisson);
        config.model.lift_dim = 4;
        config.model.proj_hidden = 8;
        config.model.blocks = 2;
        let model = init_model(&config.model, 3).unwrap();
        Checkpoint { spec: config.spec(), config, model, epoch: 2, metrics: None }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pwck");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        for ((_, a), (_, b)) in ck.model.store.iter().zip(back.model.store.iter()) {
            assert_eq!(a.tensor().values(), b.tensor().values());
            assert_eq!(a.name(), b.name());
        }
        let x = vec![0.25; ck.model.cfg.points() * ck.model.cfg.in_channels];
        assert_eq!(ck.model.predict(&x).unwrap(), back.model.predict(&x).unwrap());
        assert_eq!(back.epoch, 2);
        assert_eq!(back.config, ck.config);
    }

    #[test]
    fn corrupt_or_foreign_files_rejected() {
        let ck = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pwck");
        ck.save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Format { .. })));

        let mut other = ck.config.model.clone();
        other.lift_dim = 5;
        assert!(ck.ensure_matches(&other, &ck.spec).is_err());
        assert!(ck.ensure_matches(&ck.config.model, &ck.spec).is_ok());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let ck = small();
        assert_eq!(ck.hash(), small().hash());
        assert_eq!(ck.hash().len(), 64);
        let mut spec = ck.spec.clone();
        spec.weights.bc = 1.0;
        assert_ne!(config_hash(&ck.model.cfg, &spec), ck.hash());
    }
}
