//! Benchmark problem definitions, PDE residuals, and the composite loss.
//!
//! Every residual is a sum of fixed sparse operators applied to the network
//! output plus pointwise polynomial terms, so it lives on the tape and is
//! differentiable with respect to the network parameters.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{DiffTensor, LinearMap, NodeId, SparseMatrix, Tape};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::spgrad::{as_linear_map, build_stencil, DifferenceOperator, StencilConfig, StencilSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemId {
    Burgers,
    Nagumo,
    Poisson,
    AllenCahn,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [Self::Burgers, Self::Nagumo, Self::Poisson, Self::AllenCahn];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Burgers => "burgers",
            Self::Nagumo => "nagumo",
            Self::Poisson => "poisson",
            Self::AllenCahn => "allen-cahn",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burgers" => Ok(Self::Burgers),
            "nagumo" => Ok(Self::Nagumo),
            "poisson" => Ok(Self::Poisson),
            "allen-cahn" | "allen_cahn" | "allencahn" => Ok(Self::AllenCahn),
            _ => Err(Error::Config(format!(
                "unknown problem `{s}` (burgers | nagumo | poisson | allen-cahn)"
            ))),
        }
    }
}

/// Which loss terms are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Physics,
    Data,
    Hybrid,
}

impl Mode {
    pub fn needs_solutions(self) -> bool {
        !matches!(self, Self::Physics)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Physics => "physics",
            Self::Data => "data",
            Self::Hybrid => "hybrid",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physics" => Ok(Self::Physics),
            "data" => Ok(Self::Data),
            "hybrid" => Ok(Self::Hybrid),
            _ => Err(Error::Config(format!("unknown mode `{s}` (physics | data | hybrid)"))),
        }
    }
}

/// Boundary treatment on the spatial edges of 1-D-in-space problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Periodic,
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "neumann" => Ok(Self::Neumann),
            "periodic" => Ok(Self::Periodic),
            _ => Err(Error::Config(format!(
                "unknown boundary `{s}` (dirichlet | neumann | periodic)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub bc: f64,
    pub ic: f64,
    pub data: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            bc: 10.0,
            ic: 10.0,
            data: 1.0,
        }
    }
}

impl LossWeights {
    /// Default weights for one problem. The Poisson residual is of order
    /// `f² ~ 10³`, so its boundary and data weights are scaled up to keep
    /// the same balance as the O(1) space-time residuals.
    pub fn for_problem(id: ProblemId) -> Self {
        match id {
            ProblemId::Poisson => Self {
                bc: 1000.0,
                ic: 10.0,
                data: 100.0,
            },
            _ => Self::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.bc, self.ic, self.data].iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: ProblemId,
    /// Output grid; for space-time problems axis 0 is `x` and axis 1 is `t`.
    pub grid: Grid,
    /// Burgers viscosity.
    pub nu: f64,
    /// Diffusion coefficient (Nagumo, Allen–Cahn).
    pub epsilon: f64,
    /// Nagumo reaction root.
    pub alpha: f64,
    /// Allen–Cahn frame spacing.
    pub dt: f64,
    /// Allen–Cahn conditioning frames.
    pub frames_in: usize,
    /// Allen–Cahn predicted frames.
    pub frames_out: usize,
    pub boundary: BoundaryKind,
    /// Multiplier on the raw input field when forming network inputs.
    pub input_scale: f64,
    pub weights: LossWeights,
}

impl ProblemSpec {
    pub fn new(id: ProblemId) -> Self {
        let unit = |name: &str, n| Axis::new(name, n, 0.0, 1.0);
        let (grid, boundary) = match id {
            ProblemId::Burgers => (vec![unit("x", 81), unit("t", 81)], BoundaryKind::Dirichlet),
            ProblemId::Nagumo => (vec![unit("x", 65), unit("t", 65)], BoundaryKind::Dirichlet),
            ProblemId::Poisson => (
                vec![Axis::new("x", 65, -1.0, 1.0), Axis::new("y", 65, -1.0, 1.0)],
                BoundaryKind::Dirichlet,
            ),
            ProblemId::AllenCahn => (
                vec![unit("x", 65).periodic(), unit("y", 65).periodic()],
                BoundaryKind::Periodic,
            ),
        };
        Self {
            id,
            grid: Grid::new(grid).expect("static grid"),
            nu: 0.1,
            epsilon: if id == ProblemId::AllenCahn { 1e-3 } else { 1.0 },
            alpha: -0.5,
            dt: 1.0,
            frames_in: 10,
            frames_out: 10,
            boundary,
            input_scale: if id == ProblemId::Poisson { 0.01 } else { 1.0 },
            weights: LossWeights::for_problem(id),
        }
    }

    pub fn rows(&self) -> usize {
        self.grid.axis(0).n
    }

    pub fn cols(&self) -> usize {
        self.grid.axis(1).n
    }

    pub fn points(&self) -> usize {
        self.grid.len()
    }

    /// Length of one raw input sample as stored in a dataset.
    pub fn input_len(&self) -> usize {
        match self.id {
            ProblemId::Burgers | ProblemId::Nagumo => self.rows(),
            ProblemId::Poisson => self.points(),
            ProblemId::AllenCahn => self.frames_in * self.points(),
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self.id {
            ProblemId::Burgers | ProblemId::Nagumo => vec![self.rows()],
            ProblemId::Poisson => vec![self.rows(), self.cols()],
            ProblemId::AllenCahn => vec![self.frames_in, self.rows(), self.cols()],
        }
    }

    /// Length of one solution sample, `[points, out_channels]` order.
    pub fn output_len(&self) -> usize {
        self.points() * self.out_channels()
    }

    pub fn in_channels(&self) -> usize {
        match self.id {
            ProblemId::AllenCahn => self.frames_in + 2,
            _ => 3,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self.id {
            ProblemId::AllenCahn => self.frames_out,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.grid.ndim() != 2 {
            return Err(Error::Config("problems live on 2-D grids".into()));
        }
        if self.id == ProblemId::AllenCahn && (self.frames_in == 0 || self.frames_out == 0 || !(self.dt > 0.0)) {
            return Err(Error::Config("allen-cahn needs frames and a positive dt".into()));
        }
        if !(self.input_scale.is_finite() && self.input_scale != 0.0) {
            return Err(Error::Config("input scale must be finite and nonzero".into()));
        }
        Ok(())
    }

    /// Network input `[points, in_channels]` from one raw input sample.
    ///
    /// Space-time problems broadcast `u₀(x)` along `t` and append the
    /// coordinates; Poisson appends coordinates to the scaled source; Allen–
    /// Cahn stacks the conditioning frames and appends coordinates.
    pub fn encode(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_len() {
            return Err(Error::shape("encode", &self.input_shape(), &[raw.len()]));
        }
        let (nr, nc) = (self.rows(), self.cols());
        let c = self.in_channels();
        let n = self.points();
        let mut out = vec![0.0; n * c];
        let xs = self.grid.axis(0).coords();
        let ys = self.grid.axis(1).coords();
        for i in 0..nr {
            for (j, &y) in ys.iter().enumerate() {
                let p = i * nc + j;
                let row = &mut out[p * c..(p + 1) * c];
                match self.id {
                    ProblemId::Burgers | ProblemId::Nagumo => row[0] = self.input_scale * raw[i],
                    ProblemId::Poisson => row[0] = self.input_scale * raw[p],
                    ProblemId::AllenCahn => {
                        for f in 0..self.frames_in {
                            row[f] = self.input_scale * raw[f * n + p];
                        }
                    }
                }
                row[c - 2] = xs[i];
                row[c - 1] = y;
            }
        }
        Ok(out)
    }
}

/// Loss components of one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pde: f64,
    pub bc: f64,
    pub ic: f64,
    pub data: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn add_scaled(&mut self, other: &LossBreakdown, s: f64) {
        self.pde += s * other.pde;
        self.bc += s * other.bc;
        self.ic += s * other.ic;
        self.data += s * other.data;
        self.total += s * other.total;
    }
}

/// Mean of squared residual values.
pub fn loss_pde(residual: &[f64]) -> f64 {
    residual.iter().map(|r| r * r).sum::<f64>() / residual.len().max(1) as f64
}

/// Mean squared mismatch between prediction and target.
pub fn mean_squared_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / pred.len().max(1) as f64
}

pub fn loss_data(pred: &[f64], truth: &[f64]) -> f64 {
    mean_squared_error(pred, truth)
}

/// Weighted total of the components active in `mode`.
pub fn total_loss(b: &LossBreakdown, w: &LossWeights, mode: Mode) -> f64 {
    let physics = b.pde + w.bc * b.bc + w.ic * b.ic;
    match mode {
        Mode::Physics => physics,
        Mode::Data => b.data,
        Mode::Hybrid => physics + w.data * b.data,
    }
}

/// Precomputed operators for one problem on its grid.
#[derive(Clone, Debug)]
pub struct PhysicsOps {
    spec: ProblemSpec,
    stencils: StencilSet,
    colloc: Vec<usize>,
    /// Linear differential part of the residual at collocation points.
    linear: Arc<DifferenceOperator>,
    /// Burgers flux derivative at collocation points.
    flux: Option<Arc<DifferenceOperator>>,
    select: Arc<SparseMatrix>,
    bc: Option<Arc<dyn LinearMap>>,
    ic: Option<Arc<SparseMatrix>>,
    /// Allen–Cahn time derivative as a channel map `[frames_out + 1, frames_out]`.
    time: Option<Vec<f64>>,
}

fn boundary_lines(grid: &Grid, axis: usize, skip_first_other: bool) -> Vec<(usize, usize)> {
    // Pairs of flat indices (low edge, high edge) along `axis`.
    let other = 1 - axis;
    let n = grid.axis(axis).n;
    let start = usize::from(skip_first_other);
    (start..grid.axis(other).n)
        .map(|k| {
            let mut lo = [0usize; 2];
            lo[axis] = 0;
            lo[other] = k;
            let mut hi = lo;
            hi[axis] = n - 1;
            (grid.index(&lo), grid.index(&hi))
        })
        .collect()
}

impl PhysicsOps {
    /// `inset` is the collocation margin in grid steps from each
    /// non-periodic spatial edge; `None` uses one stencil reach.
    pub fn new(spec: &ProblemSpec, stencil: &StencilConfig, inset: Option<usize>) -> Result<Self> {
        spec.validate()?;
        let grid = &spec.grid;
        let stencils = build_stencil(grid, stencil)?;
        let inset = inset.unwrap_or(stencil.reach());
        let colloc: Vec<usize> = match spec.id {
            // Drop the duplicated periodic endpoints so each physical point
            // is counted once.
            ProblemId::AllenCahn => grid
                .interior(0)
                .into_iter()
                .filter(|&p| {
                    let idx = grid.unravel(p);
                    idx[0] + 1 < spec.rows() && idx[1] + 1 < spec.cols()
                })
                .collect(),
            // Time runs from the first step after the initial line through
            // the final frame; only space is inset.
            ProblemId::Burgers | ProblemId::Nagumo => (0..grid.len())
                .filter(|&p| {
                    let idx = grid.unravel(p);
                    idx[0] >= inset && idx[0] + inset < spec.rows() && idx[1] >= 1
                })
                .collect(),
            ProblemId::Poisson => grid.interior(inset),
        };
        if colloc.is_empty() {
            return Err(Error::Config(format!("collocation inset {inset} leaves no interior points")));
        }
        let n = grid.len();
        let d1 = |a| as_linear_map(&stencils, &[a]);
        let d2 = |a| as_linear_map(&stencils, &[a, a]);
        let (lin, flux) = match spec.id {
            ProblemId::Burgers => (d1(1)?.linear_combination(1.0, &d2(0)?, -spec.nu)?, Some(d1(0)?)),
            ProblemId::Nagumo => (d1(1)?.linear_combination(1.0, &d2(0)?, -spec.epsilon)?, None),
            ProblemId::Poisson => (d2(0)?.linear_combination(1.0, &d2(1)?, 1.0)?, None),
            ProblemId::AllenCahn => (d2(0)?.linear_combination(spec.epsilon, &d2(1)?, spec.epsilon)?, None),
        };
        let linear = Arc::new(DifferenceOperator::from_rows(&lin, &colloc)?);
        let flux = match flux {
            Some(f) => Some(Arc::new(DifferenceOperator::from_rows(&f, &colloc)?)),
            None => None,
        };
        let select = Arc::new(SparseMatrix::selection(n, &colloc)?);

        let (bc, ic): (Option<Arc<dyn LinearMap>>, Option<Arc<SparseMatrix>>) = match spec.id {
            ProblemId::Burgers | ProblemId::Nagumo => {
                let lines = boundary_lines(grid, 0, true);
                let bc: Arc<dyn LinearMap> = match spec.boundary {
                    BoundaryKind::Dirichlet => {
                        let rows: Vec<usize> = lines.iter().flat_map(|&(a, b)| [a, b]).collect();
                        Arc::new(SparseMatrix::selection(n, &rows)?)
                    }
                    BoundaryKind::Neumann => {
                        let rows: Vec<usize> = lines.iter().flat_map(|&(a, b)| [a, b]).collect();
                        Arc::new(DifferenceOperator::from_rows(&d1(0)?, &rows)?)
                    }
                    BoundaryKind::Periodic => {
                        let trip: Vec<(usize, usize, f64)> = lines
                            .iter()
                            .enumerate()
                            .flat_map(|(r, &(a, b))| [(r, a, 1.0), (r, b, -1.0)])
                            .collect();
                        Arc::new(SparseMatrix::from_triplets(lines.len(), n, &trip)?)
                    }
                };
                let ic_rows: Vec<usize> = (0..spec.rows()).map(|i| grid.index(&[i, 0])).collect();
                (Some(bc), Some(Arc::new(SparseMatrix::selection(n, &ic_rows)?)))
            }
            ProblemId::Poisson => {
                let rows: Vec<usize> = (0..n)
                    .filter(|&p| {
                        let idx = grid.unravel(p);
                        idx[0] == 0 || idx[1] == 0 || idx[0] + 1 == spec.rows() || idx[1] + 1 == spec.cols()
                    })
                    .collect();
                (Some(Arc::new(SparseMatrix::selection(n, &rows)?)), None)
            }
            ProblemId::AllenCahn => {
                let mut lines = boundary_lines(grid, 0, false);
                lines.extend(boundary_lines(grid, 1, false));
                let trip: Vec<(usize, usize, f64)> = lines
                    .iter()
                    .enumerate()
                    .flat_map(|(r, &(a, b))| [(r, a, 1.0), (r, b, -1.0)])
                    .collect();
                (Some(Arc::new(SparseMatrix::from_triplets(lines.len(), n, &trip)?)), None)
            }
        };

        let time = if spec.id == ProblemId::AllenCahn {
            let frames = spec.frames_out + 1;
            let taxis = Grid::new(vec![Axis::new("t", frames, 0.0, spec.dt * spec.frames_out as f64)])?;
            let tcfg = StencilConfig {
                radius: 1.0,
                ..*stencil
            };
            let ts = build_stencil(&taxis, &tcfg)?;
            let dt = ts.derivative(0);
            // Column k of the channel map is the derivative at stacked frame k+1.
            let mut w = vec![0.0; frames * spec.frames_out];
            for k in 0..spec.frames_out {
                for (src, v) in dt.row(k + 1) {
                    w[src * spec.frames_out + k] = v;
                }
            }
            Some(w)
        } else {
            None
        };

        Ok(Self {
            spec: spec.clone(),
            stencils,
            colloc,
            linear,
            flux,
            select,
            bc,
            ic,
            time,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn stencils(&self) -> &StencilSet {
        &self.stencils
    }

    pub fn collocation(&self) -> &[usize] {
        &self.colloc
    }

    /// Residual node `[collocation points, out_channels]` for output `u`.
    pub fn residual_node(&self, tape: &mut Tape<'_>, u: NodeId, raw_input: &[f64]) -> Result<NodeId> {
        let spec = &self.spec;
        let n = spec.points();
        let lin = tape.map(u, self.linear.clone())?;
        match spec.id {
            ProblemId::Burgers => {
                let u2 = tape.square(u)?;
                let f = tape.map(u2, self.flux.clone().expect("burgers flux"))?;
                let half = tape.scale(f, 0.5)?;
                tape.add(lin, half)
            }
            ProblemId::Nagumo => {
                // −u(1−u)(u−α) = u³ − (1+α)u² + αu
                let u2 = tape.square(u)?;
                let u3 = tape.mul(u2, u)?;
                let a = tape.scale(u2, -(1.0 + spec.alpha))?;
                let b = tape.scale(u, spec.alpha)?;
                let poly = tape.add(u3, a)?;
                let poly = tape.add(poly, b)?;
                let reaction = tape.map(poly, self.select.clone())?;
                tape.add(lin, reaction)
            }
            ProblemId::Poisson => {
                if raw_input.len() != n {
                    return Err(Error::shape("residual_poisson", &[n], &[raw_input.len()]));
                }
                let f: Vec<f64> = self.colloc.iter().map(|&p| raw_input[p]).collect();
                let f = tape.constant(DiffTensor::new(vec![self.colloc.len(), 1], f)?);
                tape.sub(lin, f)
            }
            ProblemId::AllenCahn => {
                let fo = spec.frames_out;
                if raw_input.len() != spec.frames_in * n {
                    return Err(Error::shape("residual_allen_cahn", &[spec.frames_in * n], &[raw_input.len()]));
                }
                let last = &raw_input[(spec.frames_in - 1) * n..];
                let last = tape.constant(DiffTensor::new(vec![n, 1], last.to_vec())?);
                let stack = tape.concat(last, u)?;
                let tw = tape.constant(DiffTensor::new(vec![fo + 1, fo], self.time.clone().expect("time map"))?);
                let ut = tape.linear(stack, tw, None)?;
                // u_t − εΔu − u + u³
                let u2 = tape.square(u)?;
                let u3 = tape.mul(u2, u)?;
                let poly = tape.sub(u3, u)?;
                let pointwise = tape.add(ut, poly)?;
                let pointwise = tape.map(pointwise, self.select.clone())?;
                tape.sub(pointwise, lin)
            }
        }
    }

    /// Boundary mismatch node, or `None` when the problem has no boundary
    /// term. All boundary targets are zero.
    pub fn bc_node(&self, tape: &mut Tape<'_>, u: NodeId) -> Result<Option<NodeId>> {
        match &self.bc {
            Some(b) => Ok(Some(tape.map(u, b.clone())?)),
            None => Ok(None),
        }
    }

    /// Initial-line mismatch node.
    pub fn ic_node(&self, tape: &mut Tape<'_>, u: NodeId, raw_input: &[f64]) -> Result<Option<NodeId>> {
        match &self.ic {
            Some(sel) => {
                if raw_input.len() != self.spec.rows() {
                    return Err(Error::shape("loss_ic", &[self.spec.rows()], &[raw_input.len()]));
                }
                let at0 = tape.map(u, sel.clone())?;
                let target = tape.constant(DiffTensor::new(vec![raw_input.len(), 1], raw_input.to_vec())?);
                Ok(Some(tape.sub(at0, target)?))
            }
            None => Ok(None),
        }
    }

    /// Records the loss of one sample on the tape; returns the total node and
    /// the component nodes.
    pub fn sample_loss(
        &self,
        tape: &mut Tape<'_>,
        u: NodeId,
        raw_input: &[f64],
        solution: Option<&[f64]>,
        mode: Mode,
    ) -> Result<(NodeId, LossNodes)> {
        let w = &self.spec.weights;
        let mut nodes = LossNodes::default();
        let mut terms: Vec<(NodeId, f64)> = Vec::new();
        if mode != Mode::Data {
            let r = self.residual_node(tape, u, raw_input)?;
            let pde = tape.mean_square(r)?;
            nodes.pde = Some(pde);
            terms.push((pde, 1.0));
            if let Some(b) = self.bc_node(tape, u)? {
                let bc = tape.mean_square(b)?;
                nodes.bc = Some(bc);
                terms.push((bc, w.bc));
            }
            if let Some(i) = self.ic_node(tape, u, raw_input)? {
                let ic = tape.mean_square(i)?;
                nodes.ic = Some(ic);
                terms.push((ic, w.ic));
            }
        }
        if mode != Mode::Physics {
            let truth = solution.ok_or_else(|| Error::Config(format!("{} mode needs solutions", mode.as_str())))?;
            let shape = tape.value(u).shape().to_vec();
            let t = tape.constant(DiffTensor::new(shape, truth.to_vec())?);
            let diff = tape.sub(u, t)?;
            let data = tape.mean_square(diff)?;
            nodes.data = Some(data);
            terms.push((data, if mode == Mode::Hybrid { w.data } else { 1.0 }));
        }
        let mut total: Option<NodeId> = None;
        for (node, weight) in terms {
            let scaled = if weight == 1.0 { node } else { tape.scale(node, weight)? };
            total = Some(match total {
                Some(acc) => tape.add(acc, scaled)?,
                None => scaled,
            });
        }
        let total = total.expect("at least one loss term");
        nodes.total = Some(total);
        Ok((total, nodes))
    }

    /// Residual values at collocation points for a fixed output field.
    pub fn residual(&self, u: &[f64], raw_input: &[f64]) -> Result<Vec<f64>> {
        let store = crate::autodiff::ParamStore::new();
        let mut tape = Tape::new(&store);
        let c = self.spec.out_channels();
        let u = tape.constant(DiffTensor::new(vec![self.spec.points(), c], u.to_vec())?);
        let r = self.residual_node(&mut tape, u, raw_input)?;
        Ok(tape.value(r).values().to_vec())
    }

    /// All loss components for a fixed output field.
    pub fn breakdown(&self, u: &[f64], raw_input: &[f64], solution: Option<&[f64]>, mode: Mode) -> Result<LossBreakdown> {
        let store = crate::autodiff::ParamStore::new();
        let mut tape = Tape::new(&store);
        let c = self.spec.out_channels();
        let un = tape.constant(DiffTensor::new(vec![self.spec.points(), c], u.to_vec())?);
        let (_, nodes) = self.sample_loss(&mut tape, un, raw_input, solution, mode)?;
        Ok(nodes.read(&tape))
    }
}

/// Tape nodes of the loss components of one sample.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossNodes {
    pub pde: Option<NodeId>,
    pub bc: Option<NodeId>,
    pub ic: Option<NodeId>,
    pub data: Option<NodeId>,
    pub total: Option<NodeId>,
}

impl LossNodes {
    pub fn read(&self, tape: &Tape<'_>) -> LossBreakdown {
        let get = |n: Option<NodeId>| n.map(|n| tape.scalar(n)).unwrap_or(0.0);
        LossBreakdown {
            pde: get(self.pde),
            bc: get(self.bc),
            ic: get(self.ic),
            data: get(self.data),
            total: get(self.total),
        }
    }
}

/// Residual of the viscous Burgers equation in conservative form.
pub fn residual_burgers(ops: &PhysicsOps, u: &[f64]) -> Result<Vec<f64>> {
    expect_problem(ops, ProblemId::Burgers)?;
    ops.residual(u, &[])
}

pub fn residual_nagumo(ops: &PhysicsOps, u: &[f64]) -> Result<Vec<f64>> {
    expect_problem(ops, ProblemId::Nagumo)?;
    ops.residual(u, &[])
}

pub fn residual_poisson(ops: &PhysicsOps, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    expect_problem(ops, ProblemId::Poisson)?;
    ops.residual(u, f)
}

/// `u_out` is `[points, frames_out]`; `frames_in` is the raw conditioning
/// stack `[frames_in, points]` whose last frame precedes the output.
pub fn residual_allen_cahn(ops: &PhysicsOps, u_out: &[f64], frames_in: &[f64]) -> Result<Vec<f64>> {
    expect_problem(ops, ProblemId::AllenCahn)?;
    ops.residual(u_out, frames_in)
}

fn expect_problem(ops: &PhysicsOps, id: ProblemId) -> Result<()> {
    if ops.spec.id != id {
        return Err(Error::InvalidArgument(format!(
            "operators were built for {}, not {id}",
            ops.spec.id
        )));
    }
    Ok(())
}
