//! Run configuration and its text format.
//!
//! ```text
//! [run]
//! problem = poisson
//! mode = physics
//! epochs = 300
//!
//! [optim]
//! lr = 1e-3
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown sections or keys are
//! errors. `section.key=value` overrides use the same key names.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::OptimConfig;
use crate::error::{Error, Result};
use crate::model::{Activation, WnoConfig};
use crate::physics::{BoundaryKind, LossWeights, Mode, ProblemId, ProblemSpec};
use crate::spgrad::{BoundaryMode, StencilConfig};

pub const MAX_EPOCHS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub problem: ProblemId,
    pub mode: Mode,
    pub model: WnoConfig,
    pub optim: OptimConfig,
    pub stencil: StencilConfig,
    /// Collocation margin in grid steps; `None` picks one from the stencil.
    pub inset: Option<usize>,
    pub weights: LossWeights,
    pub boundary: BoundaryKind,
    pub epochs: usize,
    pub batch: usize,
    pub model_seed: u64,
    pub data_seed: u64,
    /// Stop once the mean training loss of an epoch falls below this; zero
    /// disables the check.
    pub stop_loss: f64,
    /// Validate every this many epochs (and always on the last one).
    pub val_every: usize,
    pub train_data: Option<PathBuf>,
    pub val_data: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl TrainConfig {
    /// Defaults for one problem.
    pub fn new(problem: ProblemId) -> Self {
        let spec = ProblemSpec::new(problem);
        let (batch, epochs) = match problem {
            ProblemId::Burgers => (20, 350),
            ProblemId::Nagumo => (25, 400),
            ProblemId::Poisson => (20, 300),
            ProblemId::AllenCahn => (10, 400),
        };
        Self {
            problem,
            mode: Mode::Physics,
            model: WnoConfig::new(spec.in_channels(), spec.out_channels(), spec.rows(), spec.cols()),
            optim: OptimConfig::default(),
            stencil: StencilConfig::default(),
            inset: None,
            weights: spec.weights,
            boundary: spec.boundary,
            epochs,
            batch,
            model_seed: 0,
            data_seed: 0,
            stop_loss: 0.0,
            val_every: 1,
            train_data: None,
            val_data: None,
            out_dir: PathBuf::from(format!("runs/{}", problem.as_str())),
        }
    }

    /// Problem description with this configuration's loss weights and walls.
    pub fn spec(&self) -> ProblemSpec {
        let mut s = ProblemSpec::new(self.problem);
        s.weights = self.weights;
        s.boundary = self.boundary;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_EPOCHS).contains(&self.epochs) {
            return Err(Error::Config(format!("epochs must lie in [1, {MAX_EPOCHS}], got {}", self.epochs)));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be >= 1".into()));
        }
        if self.val_every == 0 {
            return Err(Error::Config("val_every must be >= 1".into()));
        }
        if !(self.stop_loss >= 0.0) {
            return Err(Error::Config("stop_loss must be >= 0".into()));
        }
        self.optim.validate()?;
        self.stencil.validate()?;
        self.weights.validate()?;
        let spec = self.spec();
        spec.validate()?;
        if self.model.in_channels != spec.in_channels()
            || self.model.out_channels != spec.out_channels()
            || self.model.rows != spec.rows()
            || self.model.cols != spec.cols()
        {
            return Err(Error::Config(format!("model shape does not fit problem {}", self.problem)));
        }
        self.model.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Parses configuration text; `problem` is read first so that the
    /// remaining keys override that problem's defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = entries(text)?;
        let problem = entries
            .iter()
            .find(|(s, k, _, _)| s == "run" && k == "problem")
            .map(|(_, _, v, _)| v.parse::<ProblemId>())
            .transpose()?
            .ok_or_else(|| Error::Config("missing run.problem".into()))?;
        let mut cfg = Self::new(problem);
        for (section, key, value, line) in &entries {
            cfg.set(section, key, value)
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (lhs, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not section.key=value")))?;
        let (section, key) = lhs
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not section.key=value")))?;
        self.set(section, key, value.trim())
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for {key}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("bad value `{v}` for {key}"))),
            }
        }
        match (section, key) {
            ("run", "problem") => {
                let p: ProblemId = value.parse()?;
                if p != self.problem {
                    let keep = self.clone();
                    *self = Self::new(p);
                    self.mode = keep.mode;
                    self.out_dir = keep.out_dir;
                }
            }
            ("run", "mode") => self.mode = value.parse()?,
            ("run", "epochs") => self.epochs = num(key, value)?,
            ("run", "batch") => self.batch = num(key, value)?,
            ("run", "seed") => self.model_seed = num(key, value)?,
            ("run", "data_seed") => self.data_seed = num(key, value)?,
            ("run", "stop_loss") => self.stop_loss = num(key, value)?,
            ("run", "val_every") => self.val_every = num(key, value)?,
            ("run", "train") => self.train_data = path_or_none(value),
            ("run", "val") => self.val_data = path_or_none(value),
            ("run", "out") => self.out_dir = PathBuf::from(value),
            ("run", "boundary") => self.boundary = value.parse()?,
            ("model", "width") => self.model.lift_dim = num(key, value)?,
            ("model", "blocks") => self.model.blocks = num(key, value)?,
            ("model", "basis") => self.model.basis = value.to_string(),
            ("model", "levels") => self.model.levels = num(key, value)?,
            ("model", "activation") => self.model.activation = value.parse::<Activation>()?,
            ("model", "proj_hidden") => self.model.proj_hidden = num(key, value)?,
            ("model", "positionwise") => self.model.positionwise = flag(key, value)?,
            ("optim", "lr") => self.optim.lr0 = num(key, value)?,
            ("optim", "weight_decay") => self.optim.weight_decay = num(key, value)?,
            ("optim", "beta1") => self.optim.beta1 = num(key, value)?,
            ("optim", "beta2") => self.optim.beta2 = num(key, value)?,
            ("optim", "eps") => self.optim.eps = num(key, value)?,
            ("optim", "decay_factor") => self.optim.decay_factor = num(key, value)?,
            ("optim", "decay_every") => self.optim.decay_every = num(key, value)?,
            ("stencil", "radius") => self.stencil.radius = num(key, value)?,
            ("stencil", "boundary") => self.stencil.boundary = value.parse::<BoundaryMode>()?,
            ("stencil", "inset") => {
                self.inset = if value == "auto" { None } else { Some(num(key, value)?) };
            }
            ("loss", "bc") => self.weights.bc = num(key, value)?,
            ("loss", "ic") => self.weights.ic = num(key, value)?,
            ("loss", "data") => self.weights.data = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{section}.{key}`"))),
        }
        Ok(())
    }

    /// Text form that [`TrainConfig::parse`] reads back to an equal value.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into());
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "problem = {}", self.problem.as_str());
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch = {}", self.batch);
        let _ = writeln!(s, "seed = {}", self.model_seed);
        let _ = writeln!(s, "data_seed = {}", self.data_seed);
        let _ = writeln!(s, "stop_loss = {:?}", self.stop_loss);
        let _ = writeln!(s, "val_every = {}", self.val_every);
        let _ = writeln!(s, "boundary = {}", boundary_name(self.boundary));
        let _ = writeln!(s, "train = {}", p(&self.train_data));
        let _ = writeln!(s, "val = {}", p(&self.val_data));
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "width = {}", self.model.lift_dim);
        let _ = writeln!(s, "blocks = {}", self.model.blocks);
        let _ = writeln!(s, "basis = {}", self.model.basis);
        let _ = writeln!(s, "levels = {}", self.model.levels);
        let act = match self.model.activation {
            Activation::Gelu => "gelu",
            Activation::None => "none",
        };
        let _ = writeln!(s, "activation = {act}");
        let _ = writeln!(s, "proj_hidden = {}", self.model.proj_hidden);
        let _ = writeln!(s, "positionwise = {}", self.model.positionwise);
        let o = &self.optim;
        let _ = writeln!(s, "\n[optim]");
        let _ = writeln!(s, "lr = {:?}", o.lr0);
        let _ = writeln!(s, "weight_decay = {:?}", o.weight_decay);
        let _ = writeln!(s, "beta1 = {:?}", o.beta1);
        let _ = writeln!(s, "beta2 = {:?}", o.beta2);
        let _ = writeln!(s, "eps = {:?}", o.eps);
        let _ = writeln!(s, "decay_factor = {:?}", o.decay_factor);
        let _ = writeln!(s, "decay_every = {}", o.decay_every);
        let _ = writeln!(s, "\n[stencil]");
        let _ = writeln!(s, "radius = {:?}", self.stencil.radius);
        let sb = match self.stencil.boundary {
            BoundaryMode::OneSided => "one-sided",
            BoundaryMode::InteriorShifted => "interior-shifted",
        };
        let _ = writeln!(s, "boundary = {sb}");
        match self.inset {
            Some(i) => {
                let _ = writeln!(s, "inset = {i}");
            }
            None => {
                let _ = writeln!(s, "inset = auto");
            }
        }
        let _ = writeln!(s, "\n[loss]");
        let _ = writeln!(s, "bc = {:?}", self.weights.bc);
        let _ = writeln!(s, "ic = {:?}", self.weights.ic);
        let _ = writeln!(s, "data = {:?}", self.weights.data);
        s
    }
}

fn boundary_name(b: BoundaryKind) -> &'static str {
    match b {
        BoundaryKind::Dirichlet => "dirichlet",
        BoundaryKind::Neumann => "neumann",
        BoundaryKind::Periodic => "periodic",
    }
}

fn path_or_none(v: &str) -> Option<PathBuf> {
    (v != "none" && !v.is_empty()).then(|| PathBuf::from(v))
}

type Entry = (String, String, String, usize);

fn entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: malformed section header", n + 1)))?
                .trim();
            if !["run", "model", "optim", "stencil", "loss"].contains(&name) {
                return Err(Error::Config(format!("line {}: unknown section [{name}]", n + 1)));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let s = section
            .clone()
            .ok_or_else(|| Error::Config(format!("line {}: key outside any section", n + 1)))?;
        out.push((s, k.trim().to_string(), v.trim().to_string(), n + 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_problem() {
        let b = TrainConfig::new(ProblemId::Burgers);
        assert_eq!((b.batch, b.epochs, b.model.rows), (20, 350, 81));
        let n = TrainConfig::new(ProblemId::Nagumo);
        assert_eq!((n.batch, n.epochs), (25, 400));
        let p = TrainConfig::new(ProblemId::Poisson);
        assert_eq!((p.batch, p.epochs, p.model.levels), (20, 300, 3));
        let a = TrainConfig::new(ProblemId::AllenCahn);
        assert_eq!((a.batch, a.epochs, a.model.in_channels, a.model.out_channels), (10, 400, 12, 10));
        for id in ProblemId::ALL {
            TrainConfig::new(id).validate().unwrap();
        }
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::new(ProblemId::Nagumo);
        c.mode = Mode::Hybrid;
        c.optim.lr0 = 3e-4;
        c.inset = Some(5);
        c.train_data = Some("d/train.pwno".into());
        c.stencil.boundary = BoundaryMode::InteriorShifted;
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn parse_and_override() {
        let text = "# run\n[run]\nproblem = poisson\nepochs = 7 # short\n\n[optim]\nlr = 0.01\n";
        let mut c = TrainConfig::parse(text).unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.optim.lr0, 0.01);
        c.apply_override("model.width=16").unwrap();
        assert_eq!(c.model.lift_dim, 16);
        assert!(c.apply_override("model.depth=3").is_err());
        assert!(c.apply_override("width=3").is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TrainConfig::parse("[run]\nproblem = poisson\ncolour = red\n").is_err());
        assert!(TrainConfig::parse("[extra]\nproblem = poisson\n").is_err());
        assert!(TrainConfig::parse("problem = poisson\n").is_err());
        assert!(TrainConfig::parse("[run]\nepochs = 3\n").is_err());
        assert!(TrainConfig::parse("[run]\nproblem = poisson\nepochs = 0\n").is_err());
        assert!(TrainConfig::parse("[run]\nproblem = poisson\nepochs = 100001\n").is_err());
        assert!(TrainConfig::parse("[run]\nproblem = poisson\nbatch = 0\n").is_err());
        assert!(TrainConfig::parse("[run]\nproblem = poisson\nepochs = many\n").is_err());
    }
}
