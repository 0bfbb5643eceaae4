//! Generated sample sets and their on-disk container.
//!
//! File layout: `b"PWNO"`, `u16` format version, `u32` header length, UTF-8
//! JSON header, then the arrays it declares as row-major little-endian data.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::samplers::{
    burgers_ic, sample_burgers_params, sample_grf_periodic, sample_poisson_pair, sample_poisson_params,
    sample_rng, wrap_periodic, GrfSpec, SeSampler,
};
use super::solvers::{solve_allen_cahn, solve_burgers, solve_nagumo, SolverConfig};
use crate::error::{Error, Result};
use crate::physics::{ProblemId, ProblemSpec};

pub const MAGIC: &[u8; 4] = b"PWNO";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

/// Everything needed to regenerate a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// Stream index of the first sample; sample `k` uses stream `first + k`.
    pub first: u64,
    pub split: String,
    pub spec: ProblemSpec,
    pub sampler: SamplerParams,
    pub solver: Option<SolverParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplerParams {
    /// `cos(ζπx) + sin(ηπx)` with `ζ, η ~ U[lo, hi]`.
    TrigIc { lo: f64, hi: f64 },
    Grf { field: GrfSpec, fine_points: usize },
    /// Analytic pair with `α, β ~ U[lo, hi]`.
    AnalyticPair { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub space_refine: usize,
    pub steps_per_frame: usize,
    /// Allen–Cahn inner time step.
    pub step: f64,
    /// Allen–Cahn periodic grid size.
    pub modes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ArrayDecl {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    problem: ProblemId,
    dtype: Dtype,
    endianness: String,
    count: usize,
    arrays: Vec<ArrayDecl>,
    manifest: Manifest,
}

/// `count` samples of one problem: raw inputs (`count × input_len`) and
/// optional solutions (`count × points × out_channels`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub count: usize,
    pub inputs: Vec<f64>,
    pub solutions: Option<Vec<f64>>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn spec(&self) -> &ProblemSpec {
        &self.manifest.spec
    }

    pub fn problem(&self) -> ProblemId {
        self.manifest.spec.id
    }

    pub fn input(&self, k: usize) -> &[f64] {
        let l = self.spec().input_len();
        &self.inputs[k * l..(k + 1) * l]
    }

    pub fn solution(&self, k: usize) -> Option<&[f64]> {
        let l = self.spec().output_len();
        self.solutions.as_ref().map(|s| &s[k * l..(k + 1) * l])
    }

    pub fn has_solutions(&self) -> bool {
        self.solutions.is_some()
    }

    pub fn strip_solutions(mut self) -> Self {
        self.solutions = None;
        self
    }

    /// Regenerates the set from its manifest.
    pub fn regenerate(&self) -> Result<Self> {
        generate(&self.manifest, self.count, self.solutions.is_some())
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec();
        spec.validate()?;
        if self.inputs.len() != self.count * spec.input_len() {
            return Err(Error::shape("dataset inputs", &[self.count, spec.input_len()], &[self.inputs.len()]));
        }
        if let Some(s) = &self.solutions {
            if s.len() != self.count * spec.output_len() {
                return Err(Error::shape("dataset solutions", &[self.count, spec.output_len()], &[s.len()]));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, dtype: Dtype) -> Result<()> {
        self.validate()?;
        let spec = self.spec();
        let mut in_shape = vec![self.count];
        in_shape.extend(spec.input_shape());
        let mut arrays = vec![ArrayDecl { name: "inputs".into(), shape: in_shape }];
        if self.solutions.is_some() {
            arrays.push(ArrayDecl {
                name: "solutions".into(),
                shape: vec![self.count, spec.rows(), spec.cols(), spec.out_channels()],
            });
        }
        let header = Header {
            problem: spec.id,
            dtype,
            endianness: "LE".into(),
            count: self.count,
            arrays,
            manifest: self.manifest.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::format(path, "header too large"))?;
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(&json);
        write_values(&mut buf, &self.inputs, dtype);
        if let Some(s) = &self.solutions {
            write_values(&mut buf, s, dtype);
        }
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 10 || &bytes[..4] != MAGIC {
            return Err(Error::format(path, "missing PWNO magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported format version {version}")));
        }
        let len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let body = bytes.get(10..10 + len).ok_or_else(|| Error::format(path, "truncated header"))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.endianness != "LE" {
            return Err(Error::format(path, format!("unsupported endianness {}", header.endianness)));
        }
        let width = match header.dtype {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        };
        let mut offset = 10 + len;
        let mut inputs = None;
        let mut solutions = None;
        for decl in &header.arrays {
            let n: usize = decl.shape.iter().product();
            let raw = bytes
                .get(offset..offset + n * width)
                .ok_or_else(|| Error::format(path, format!("truncated array {}", decl.name)))?;
            offset += n * width;
            let vals = read_values(raw, header.dtype);
            match decl.name.as_str() {
                "inputs" => inputs = Some(vals),
                "solutions" => solutions = Some(vals),
                other => return Err(Error::format(path, format!("unknown array {other}"))),
            }
        }
        if offset != bytes.len() {
            return Err(Error::format(path, "trailing bytes after arrays"));
        }
        let ds = Self {
            count: header.count,
            inputs: inputs.ok_or_else(|| Error::format(path, "no inputs array"))?,
            solutions,
            manifest: header.manifest,
        };
        if ds.problem() != header.problem {
            return Err(Error::format(path, "header problem disagrees with manifest"));
        }
        ds.validate().map_err(|e| Error::format(path, e.to_string()))?;
        Ok(ds)
    }
}

fn write_values(buf: &mut Vec<u8>, vals: &[f64], dtype: Dtype) {
    match dtype {
        Dtype::F64 => vals.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
        Dtype::F32 => vals.iter().for_each(|v| buf.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
}

fn read_values(raw: &[u8], dtype: Dtype) -> Vec<f64> {
    match dtype {
        Dtype::F64 => raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        Dtype::F32 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    }
}

/// Default generation parameters for a problem.
pub fn default_manifest(spec: &ProblemSpec, seed: u64, first: u64, split: &str) -> Manifest {
    let (sampler, solver) = match spec.id {
        ProblemId::Burgers => {
            let c = SolverConfig::burgers();
            (
                SamplerParams::TrigIc { lo: 0.5, hi: 1.5 },
                SolverParams { space_refine: c.space_refine, steps_per_frame: c.steps_per_frame, step: 0.0, modes: 0 },
            )
        }
        ProblemId::Nagumo => {
            let c = SolverConfig::nagumo();
            (
                SamplerParams::Grf {
                    field: GrfSpec::SquaredExponential { sigma: 0.1, length: 0.1 },
                    fine_points: (spec.rows() - 1) * c.space_refine + 1,
                },
                SolverParams { space_refine: c.space_refine, steps_per_frame: c.steps_per_frame, step: 0.0, modes: 0 },
            )
        }
        ProblemId::Poisson => (
            SamplerParams::AnalyticPair { lo: -2.0, hi: 2.0 },
            SolverParams { space_refine: 1, steps_per_frame: 1, step: 0.0, modes: 0 },
        ),
        ProblemId::AllenCahn => (
            SamplerParams::Grf {
                field: GrfSpec::PeriodicSpectral { tau: 15.0, alpha: 1.0 },
                fine_points: spec.rows() - 1,
            },
            SolverParams { space_refine: 1, steps_per_frame: 1, step: 0.01, modes: spec.rows() - 1 },
        ),
    };
    Manifest { seed, first, split: split.into(), spec: spec.clone(), sampler, solver: Some(solver) }
}

enum Prepared {
    None,
    Se(SeSampler),
}

fn prepare(m: &Manifest) -> Result<Prepared> {
    match &m.sampler {
        SamplerParams::Grf { field: GrfSpec::SquaredExponential { sigma, length }, fine_points } => {
            let pts: Vec<f64> = (0..*fine_points).map(|i| i as f64 / (*fine_points - 1) as f64).collect();
            Ok(Prepared::Se(SeSampler::new(&pts, *sigma, *length)?))
        }
        _ => Ok(Prepared::None),
    }
}

fn solver_params(m: &Manifest) -> Result<&SolverParams> {
    m.solver.as_ref().ok_or_else(|| Error::Config("manifest carries no solver parameters".into()))
}

/// One sample: raw input and, if requested, the reference solution in
/// `[points, out_channels]` order.
fn generate_sample(m: &Manifest, prep: &Prepared, index: u64, with_solution: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let spec = &m.spec;
    let mut rng = sample_rng(m.seed, index);
    let (nr, nc) = (spec.rows(), spec.cols());
    match (spec.id, &m.sampler) {
        (ProblemId::Burgers, SamplerParams::TrigIc { lo, hi }) => {
            let (z, e) = sample_burgers_params(&mut rng);
            let (z, e) = (lo + (z - 0.5) * (hi - lo), lo + (e - 0.5) * (hi - lo));
            let input: Vec<f64> = (0..nr).map(|i| burgers_ic(z, e, spec.grid.axis(0).coord(i))).collect();
            let sol = if with_solution {
                let p = solver_params(m)?;
                let cfg = SolverConfig { space_refine: p.space_refine, steps_per_frame: p.steps_per_frame };
                Some(solve_burgers(|x| burgers_ic(z, e, x), spec.nu, nr, nc, spec.boundary, cfg)?)
            } else {
                None
            };
            Ok((input, sol))
        }
        (ProblemId::Nagumo, SamplerParams::Grf { .. }) => {
            let Prepared::Se(s) = prep else {
                return Err(Error::Config("nagumo needs a squared-exponential field".into()));
            };
            let p = solver_params(m)?;
            let fine = s.sample(&mut rng);
            let input: Vec<f64> = (0..nr).map(|i| fine[i * p.space_refine]).collect();
            let sol = if with_solution {
                let cfg = SolverConfig { space_refine: p.space_refine, steps_per_frame: p.steps_per_frame };
                Some(solve_nagumo(&fine, spec.epsilon, spec.alpha, nr, nc, spec.boundary, cfg)?)
            } else {
                None
            };
            Ok((input, sol))
        }
        (ProblemId::Poisson, SamplerParams::AnalyticPair { lo, hi }) => {
            let (a, b) = sample_poisson_params(&mut rng);
            let scale = (hi - lo) / 4.0;
            let (a, b) = (lo + (a + 2.0) * scale, lo + (b + 2.0) * scale);
            let (f, u) = sample_poisson_pair(a, b, nr);
            Ok((f, with_solution.then_some(u)))
        }
        (ProblemId::AllenCahn, SamplerParams::Grf { field: GrfSpec::PeriodicSpectral { tau, alpha }, .. }) => {
            let p = solver_params(m)?;
            let mm = p.modes;
            if mm + 1 != nr || nr != nc {
                return Err(Error::Config("allen-cahn grid must be square with one duplicated endpoint".into()));
            }
            let core = sample_grf_periodic(mm, *tau, *alpha, &mut rng)?;
            let need = if with_solution { spec.frames_in + spec.frames_out + 1 } else { spec.frames_in + 1 };
            let frames = solve_allen_cahn(&core, mm, spec.epsilon, spec.dt, need, p.step)?;
            let wrapped: Vec<Vec<f64>> = frames.iter().map(|f| wrap_periodic(f, mm)).collect();
            let input: Vec<f64> = wrapped[1..=spec.frames_in].iter().flatten().copied().collect();
            let sol = with_solution.then(|| {
                let n = nr * nc;
                let k = spec.frames_out;
                let mut s = vec![0.0; n * k];
                for (f, frame) in wrapped[spec.frames_in + 1..].iter().enumerate() {
                    for (pt, v) in frame.iter().enumerate() {
                        s[pt * k + f] = *v;
                    }
                }
                s
            });
            Ok((input, sol))
        }
        (id, s) => Err(Error::Config(format!("sampler {s:?} does not apply to {id}"))),
    }
}

/// Generates `count` samples described by `manifest` in parallel; results
/// are independent of thread count.
pub fn generate(manifest: &Manifest, count: usize, with_solutions: bool) -> Result<Dataset> {
    manifest.spec.validate()?;
    let prep = prepare(manifest)?;
    let samples: Vec<_> = (0..count as u64)
        .into_par_iter()
        .map(|k| generate_sample(manifest, &prep, manifest.first + k, with_solutions))
        .collect::<Result<_>>()?;
    let mut inputs = Vec::with_capacity(count * manifest.spec.input_len());
    let mut solutions = with_solutions.then(|| Vec::with_capacity(count * manifest.spec.output_len()));
    for (i, s) in samples {
        inputs.extend(i);
        if let (Some(all), Some(s)) = (solutions.as_mut(), s) {
            all.extend(s);
        }
    }
    let ds = Dataset { count, inputs, solutions, manifest: manifest.clone() };
    ds.validate()?;
    Ok(ds)
}

/// `count` default-parameter samples of `problem` seeded with `seed`.
pub fn build_dataset(problem: ProblemId, count: usize, seed: u64, with_solutions: bool) -> Result<Dataset> {
    let spec = ProblemSpec::new(problem);
    generate(&default_manifest(&spec, seed, 0, "train"), count, with_solutions)
}

#[derive(Clone, Debug)]
pub struct DatasetSplits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Sizes of the validation and test sets accompanying `train` training
/// samples (an 80/10/10 partition).
pub fn split_sizes(train: usize) -> (usize, usize) {
    let extra = (train / 8).max(1);
    (extra, extra)
}

/// Train/validation/test sets drawn from disjoint sample streams of one
/// seed. Validation and test always carry solutions.
pub fn generate_splits(spec: &ProblemSpec, train: usize, seed: u64, train_solutions: bool) -> Result<DatasetSplits> {
    let (nv, nt) = split_sizes(train);
    let t = generate(&default_manifest(spec, seed, 0, "train"), train, train_solutions)?;
    let v = generate(&default_manifest(spec, seed, train as u64, "val"), nv, true)?;
    let s = generate(&default_manifest(spec, seed, (train + nv) as u64, "test"), nt, true)?;
    Ok(DatasetSplits { train: t, val: v, test: s })
}
