//! Multilevel separable DWT with periodic extension.
//!
//! Every 1-D step pads an odd-length signal to even length by repeating its
//! last sample, filters with the periodized filter bank, and on the way back
//! crops the padded sample away, so `inverse(forward(x)) == x` for any extent.
//! Signals carry `width` interleaved channels (channel-minor layout) and every
//! channel is transformed independently.

use std::sync::Arc;

use super::basis::WaveletBasis;
use crate::autodiff::LinearMap;
use crate::error::{Error, Result};

/// How a gather step reads the padded sample of an odd-length signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Extend {
    /// Repeat the last sample (forward analysis).
    Edge,
    /// Treat the padded sample as zero (adjoint of synthesis).
    Zero,
}

/// How a scatter step handles the padded sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fold {
    /// Drop it (synthesis).
    Crop,
    /// Add it onto the last real sample (adjoint of analysis).
    Fold,
}

#[inline]
fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// `x: [outer, n, inner]` filtered and downsampled along the middle axis into
/// `out: [outer, ceil(n/2), inner]`.
fn gather_axis(x: &[f64], outer: usize, n: usize, inner: usize, filt: &[f64], ext: Extend, out: &mut [f64]) {
    let m = n + n % 2;
    let half = m / 2;
    debug_assert_eq!(x.len(), outer * n * inner);
    debug_assert_eq!(out.len(), outer * half * inner);
    out.fill(0.0);
    for o in 0..outer {
        let xs = &x[o * n * inner..(o + 1) * n * inner];
        let os = &mut out[o * half * inner..(o + 1) * half * inner];
        for k in 0..half {
            let dst = &mut os[k * inner..(k + 1) * inner];
            for (j, &f) in filt.iter().enumerate() {
                let t = (2 * k + j) % m;
                let src = if t < n {
                    t
                } else {
                    match ext {
                        Extend::Edge => n - 1,
                        Extend::Zero => continue,
                    }
                };
                axpy(dst, f, &xs[src * inner..(src + 1) * inner]);
            }
        }
    }
}

/// Transpose of [`gather_axis`] for a lowpass/highpass pair, accumulated into
/// `out: [outer, n, inner]`.
#[allow(clippy::too_many_arguments)]
fn scatter_axis(
    lo: &[f64],
    hi: Option<&[f64]>,
    outer: usize,
    n: usize,
    inner: usize,
    h: &[f64],
    g: &[f64],
    fold: Fold,
    out: &mut [f64],
) {
    let m = n + n % 2;
    let half = m / 2;
    debug_assert_eq!(lo.len(), outer * half * inner);
    debug_assert_eq!(out.len(), outer * n * inner);
    out.fill(0.0);
    for o in 0..outer {
        let os = &mut out[o * n * inner..(o + 1) * n * inner];
        let base = o * half * inner;
        for k in 0..half {
            let lo_k = &lo[base + k * inner..base + (k + 1) * inner];
            let hi_k = hi.map(|hi| &hi[base + k * inner..base + (k + 1) * inner]);
            for j in 0..h.len() {
                let t = (2 * k + j) % m;
                let dst = if t < n {
                    t
                } else {
                    match fold {
                        Fold::Crop => continue,
                        Fold::Fold => n - 1,
                    }
                };
                let d = &mut os[dst * inner..(dst + 1) * inner];
                axpy(d, h[j], lo_k);
                if let Some(hk) = hi_k {
                    axpy(d, g[j], hk);
                }
            }
        }
    }
}

fn half(n: usize) -> usize {
    n.div_ceil(2)
}

/// Coefficients of a multilevel decomposition.
///
/// `shapes[l]` is the extent of the signal entering level `l` (level 0 is the
/// original field); its parity is the padding record. `details[l]` holds one
/// subband per orientation (1 in 1-D; horizontal, vertical, diagonal in 2-D).
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffPyramid {
    pub width: usize,
    pub shapes: Vec<Vec<usize>>,
    pub approx: Vec<f64>,
    pub details: Vec<Vec<Vec<f64>>>,
}

impl CoeffPyramid {
    pub fn levels(&self) -> usize {
        self.shapes.len()
    }

    pub fn original_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    /// Extent of the subbands produced at `level`.
    pub fn subband_shape(&self, level: usize) -> Vec<usize> {
        self.shapes[level].iter().map(|&n| half(n)).collect()
    }

    pub fn approx_shape(&self) -> Vec<usize> {
        self.subband_shape(self.levels() - 1)
    }

    pub fn energy(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        sq(&self.approx) + self.details.iter().flatten().map(|b| sq(b)).sum::<f64>()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            width: self.width,
            shapes: self.shapes.clone(),
            approx: vec![0.0; self.approx.len()],
            details: self
                .details
                .iter()
                .map(|lvl| lvl.iter().map(|b| vec![0.0; b.len()]).collect())
                .collect(),
        }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            shapes: self.shapes.clone(),
            approx: self.approx.iter().map(|&x| f(x)).collect(),
            details: self
                .details
                .iter()
                .map(|lvl| lvl.iter().map(|b| b.iter().map(|&x| f(x)).collect()).collect())
                .collect(),
        }
    }

    /// Inner product with another pyramid of identical layout.
    pub fn dot(&self, other: &Self) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        d(&self.approx, &other.approx)
            + self
                .details
                .iter()
                .flatten()
                .zip(other.details.iter().flatten())
                .map(|(a, b)| d(a, b))
                .sum::<f64>()
    }

    fn validate(&self, dims: usize) -> Result<()> {
        if self.shapes.is_empty() || self.details.len() != self.shapes.len() {
            return Err(Error::Pyramid("level count disagrees with detail list".into()));
        }
        let nsub = if dims == 1 { 1 } else { 3 };
        for (l, s) in self.shapes.iter().enumerate() {
            if s.len() != dims {
                return Err(Error::Pyramid(format!("level {l} has {} dims", s.len())));
            }
            if l > 0 {
                let prev: Vec<usize> = self.shapes[l - 1].iter().map(|&n| half(n)).collect();
                if &prev != s {
                    return Err(Error::Pyramid(format!("level {l} extent {s:?} != {prev:?}")));
                }
            }
            let len: usize = s.iter().map(|&n| half(n)).product::<usize>() * self.width;
            if self.details[l].len() != nsub || self.details[l].iter().any(|b| b.len() != len) {
                return Err(Error::Pyramid(format!("level {l} subband sizes")));
            }
        }
        let alen: usize = self.approx_shape().iter().product::<usize>() * self.width;
        if self.approx.len() != alen {
            return Err(Error::Pyramid(format!(
                "approximation has {} values, expected {alen}",
                self.approx.len()
            )));
        }
        Ok(())
    }
}

fn level_shapes(extents: &[usize], levels: usize) -> Result<Vec<Vec<usize>>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("at least one decomposition level required".into()));
    }
    for &n in extents {
        if n < (1usize << levels) {
            return Err(Error::LevelsTooDeep { levels, extent: n });
        }
    }
    let mut shapes = vec![extents.to_vec()];
    for _ in 1..levels {
        let next = shapes.last().unwrap().iter().map(|&n| half(n)).collect();
        shapes.push(next);
    }
    Ok(shapes)
}

/// 1-D multilevel transform plan.
#[derive(Clone, Debug)]
pub struct Dwt1 {
    basis: WaveletBasis,
    shapes: Vec<Vec<usize>>,
}

impl Dwt1 {
    pub fn new(basis: WaveletBasis, n: usize, levels: usize) -> Result<Self> {
        Ok(Self {
            shapes: level_shapes(&[n], levels)?,
            basis,
        })
    }

    pub fn forward(&self, x: &[f64], width: usize) -> Result<CoeffPyramid> {
        let n = self.shapes[0][0];
        if x.len() != n * width {
            return Err(Error::shape("dwt1_forward", &[n, width], &[x.len()]));
        }
        let (h, g) = (self.basis.dec_lo(), self.basis.dec_hi());
        let mut cur = x.to_vec();
        let mut details = Vec::new();
        for s in &self.shapes {
            let len = half(s[0]) * width;
            let (mut lo, mut hi) = (vec![0.0; len], vec![0.0; len]);
            gather_axis(&cur, 1, s[0], width, h, Extend::Edge, &mut lo);
            gather_axis(&cur, 1, s[0], width, g, Extend::Edge, &mut hi);
            details.push(vec![hi]);
            cur = lo;
        }
        Ok(CoeffPyramid {
            width,
            shapes: self.shapes.clone(),
            approx: cur,
            details,
        })
    }

    pub fn inverse(&self, p: &CoeffPyramid) -> Result<Vec<f64>> {
        p.validate(1)?;
        if p.shapes != self.shapes {
            return Err(Error::Pyramid("pyramid does not match plan".into()));
        }
        let (h, g) = (self.basis.dec_lo(), self.basis.dec_hi());
        let mut cur = p.approx.clone();
        for (l, s) in self.shapes.iter().enumerate().rev() {
            let mut out = vec![0.0; s[0] * p.width];
            scatter_axis(&cur, Some(&p.details[l][0]), 1, s[0], p.width, h, g, Fold::Crop, &mut out);
            cur = out;
        }
        Ok(cur)
    }
}

/// 2-D multilevel transform plan over a `rows × cols` grid.
#[derive(Clone, Debug)]
pub struct Dwt2 {
    basis: WaveletBasis,
    shapes: Vec<Vec<usize>>,
}

/// The four subbands of one 2-D analysis step, each `[r', c', width]`.
struct Quad {
    approx: Vec<f64>,
    horizontal: Vec<f64>,
    vertical: Vec<f64>,
    diagonal: Vec<f64>,
}

impl Dwt2 {
    pub fn new(basis: WaveletBasis, rows: usize, cols: usize, levels: usize) -> Result<Self> {
        Ok(Self {
            shapes: level_shapes(&[rows, cols], levels)?,
            basis,
        })
    }

    pub fn basis(&self) -> &WaveletBasis {
        &self.basis
    }

    pub fn levels(&self) -> usize {
        self.shapes.len()
    }

    pub fn rows(&self) -> usize {
        self.shapes[0][0]
    }

    pub fn cols(&self) -> usize {
        self.shapes[0][1]
    }

    /// Extent of each subband at the coarsest level.
    pub fn coarse_shape(&self) -> (usize, usize) {
        let s = self.shapes.last().unwrap();
        (half(s[0]), half(s[1]))
    }

    fn analyze(&self, x: &[f64], r: usize, c: usize, w: usize, approx_only: bool, ext: Extend) -> Quad {
        let (h, g) = (self.basis.dec_lo(), self.basis.dec_hi());
        let (hr, hc) = (half(r), half(c));
        let mut lo1 = vec![0.0; r * hc * w];
        gather_axis(x, r, c, w, h, ext, &mut lo1);
        let mut approx = vec![0.0; hr * hc * w];
        gather_axis(&lo1, 1, r, hc * w, h, ext, &mut approx);
        if approx_only {
            return Quad {
                approx,
                horizontal: Vec::new(),
                vertical: Vec::new(),
                diagonal: Vec::new(),
            };
        }
        let mut hi1 = vec![0.0; r * hc * w];
        gather_axis(x, r, c, w, g, ext, &mut hi1);
        let mut horizontal = vec![0.0; hr * hc * w];
        let mut vertical = vec![0.0; hr * hc * w];
        let mut diagonal = vec![0.0; hr * hc * w];
        gather_axis(&lo1, 1, r, hc * w, g, ext, &mut horizontal);
        gather_axis(&hi1, 1, r, hc * w, h, ext, &mut vertical);
        gather_axis(&hi1, 1, r, hc * w, g, ext, &mut diagonal);
        Quad {
            approx,
            horizontal,
            vertical,
            diagonal,
        }
    }

    /// Transpose of `analyze` (with `Fold`) or synthesis (with `Crop`).
    /// Missing detail subbands are treated as zero.
    fn synthesize(&self, q: &Quad, r: usize, c: usize, w: usize, fold: Fold) -> Vec<f64> {
        let (h, g) = (self.basis.dec_lo(), self.basis.dec_hi());
        let hc = half(c);
        let has_details = !q.horizontal.is_empty();
        let mut lo1 = vec![0.0; r * hc * w];
        let hor = has_details.then_some(q.horizontal.as_slice());
        scatter_axis(&q.approx, hor, 1, r, hc * w, h, g, fold, &mut lo1);
        let mut out = vec![0.0; r * c * w];
        if has_details {
            let mut hi1 = vec![0.0; r * hc * w];
            scatter_axis(&q.vertical, Some(&q.diagonal), 1, r, hc * w, h, g, fold, &mut hi1);
            scatter_axis(&lo1, Some(&hi1), r, c, w, h, g, fold, &mut out);
        } else {
            scatter_axis(&lo1, None, r, c, w, h, g, fold, &mut out);
        }
        out
    }

    fn check_field(&self, op: &'static str, x: &[f64], width: usize) -> Result<()> {
        let (r, c) = (self.rows(), self.cols());
        if width == 0 || x.len() != r * c * width {
            return Err(Error::shape(op, &[r, c, width], &[x.len()]));
        }
        Ok(())
    }

    fn check_pyramid(&self, p: &CoeffPyramid) -> Result<()> {
        p.validate(2)?;
        if p.shapes != self.shapes {
            return Err(Error::Pyramid(format!(
                "pyramid levels {:?} do not match plan {:?}",
                p.shapes, self.shapes
            )));
        }
        Ok(())
    }

    fn run_forward(&self, x: &[f64], width: usize, ext: Extend) -> CoeffPyramid {
        let mut cur = x.to_vec();
        let mut details = Vec::with_capacity(self.levels());
        for s in &self.shapes {
            let q = self.analyze(&cur, s[0], s[1], width, false, ext);
            details.push(vec![q.horizontal, q.vertical, q.diagonal]);
            cur = q.approx;
        }
        CoeffPyramid {
            width,
            shapes: self.shapes.clone(),
            approx: cur,
            details,
        }
    }

    fn run_inverse(&self, p: &CoeffPyramid, fold: Fold) -> Vec<f64> {
        let mut cur = p.approx.clone();
        for (l, s) in self.shapes.iter().enumerate().rev() {
            let [hor, ver, dia] = [&p.details[l][0], &p.details[l][1], &p.details[l][2]];
            let q = Quad {
                approx: cur,
                horizontal: hor.clone(),
                vertical: ver.clone(),
                diagonal: dia.clone(),
            };
            cur = self.synthesize(&q, s[0], s[1], p.width, fold);
        }
        cur
    }

    /// Forward transform of a `[rows, cols, width]` field.
    pub fn forward(&self, x: &[f64], width: usize) -> Result<CoeffPyramid> {
        self.check_field("dwt2_forward", x, width)?;
        Ok(self.run_forward(x, width, Extend::Edge))
    }

    /// Inverse transform; restores the original extent.
    pub fn inverse(&self, p: &CoeffPyramid) -> Result<Vec<f64>> {
        self.check_pyramid(p)?;
        Ok(self.run_inverse(p, Fold::Crop))
    }

    /// Transpose of [`Dwt2::forward`].
    pub fn forward_adjoint(&self, p: &CoeffPyramid) -> Result<Vec<f64>> {
        self.check_pyramid(p)?;
        Ok(self.run_inverse(p, Fold::Fold))
    }

    /// Transpose of [`Dwt2::inverse`].
    pub fn inverse_adjoint(&self, x: &[f64], width: usize) -> Result<CoeffPyramid> {
        self.check_field("dwt2_inverse_adjoint", x, width)?;
        Ok(self.run_forward(x, width, Extend::Zero))
    }

    /// Number of grid points in each coarsest subband.
    pub fn coarse_positions(&self) -> usize {
        let (a, b) = self.coarse_shape();
        a * b
    }

    /// Coarsest-level subbands stacked as `[approx; horizontal; vertical;
    /// diagonal]`, each `coarse_positions()` rows of `width` channels.
    fn coarse_analysis(&self, x: &[f64], width: usize, ext: Extend) -> Vec<f64> {
        let last = self.levels() - 1;
        let mut cur = x.to_vec();
        for s in &self.shapes[..last] {
            cur = self.analyze(&cur, s[0], s[1], width, true, ext).approx;
        }
        let s = &self.shapes[last];
        let q = self.analyze(&cur, s[0], s[1], width, false, ext);
        let mut out = q.approx;
        out.extend_from_slice(&q.horizontal);
        out.extend_from_slice(&q.vertical);
        out.extend_from_slice(&q.diagonal);
        out
    }

    /// Reconstruction from coarsest subbands alone (finer details zero), or
    /// its counterpart used as the adjoint of [`Self::coarse_analysis`].
    fn coarse_synthesis(&self, coeffs: &[f64], width: usize, fold: Fold) -> Vec<f64> {
        let last = self.levels() - 1;
        let block = self.coarse_positions() * width;
        let q = Quad {
            approx: coeffs[..block].to_vec(),
            horizontal: coeffs[block..2 * block].to_vec(),
            vertical: coeffs[2 * block..3 * block].to_vec(),
            diagonal: coeffs[3 * block..].to_vec(),
        };
        let s = &self.shapes[last];
        let mut cur = self.synthesize(&q, s[0], s[1], width, fold);
        for s in self.shapes[..last].iter().rev() {
            let q = Quad {
                approx: cur,
                horizontal: Vec::new(),
                vertical: Vec::new(),
                diagonal: Vec::new(),
            };
            cur = self.synthesize(&q, s[0], s[1], width, fold);
        }
        cur
    }
}

/// Field → coarsest subbands, as a fixed linear map.
#[derive(Clone, Debug)]
pub struct CoarseAnalysis(pub Arc<Dwt2>);

/// Coarsest subbands → field (finer details zero), as a fixed linear map.
#[derive(Clone, Debug)]
pub struct CoarseSynthesis(pub Arc<Dwt2>);

impl LinearMap for CoarseAnalysis {
    fn input_len(&self) -> usize {
        self.0.rows() * self.0.cols()
    }

    fn output_len(&self) -> usize {
        4 * self.0.coarse_positions()
    }

    fn apply(&self, x: &[f64], width: usize, y: &mut [f64]) {
        y.copy_from_slice(&self.0.coarse_analysis(x, width, Extend::Edge));
    }

    fn apply_adjoint(&self, y: &[f64], width: usize, x: &mut [f64]) {
        x.copy_from_slice(&self.0.coarse_synthesis(y, width, Fold::Fold));
    }
}

impl LinearMap for CoarseSynthesis {
    fn input_len(&self) -> usize {
        4 * self.0.coarse_positions()
    }

    fn output_len(&self) -> usize {
        self.0.rows() * self.0.cols()
    }

    fn apply(&self, x: &[f64], width: usize, y: &mut [f64]) {
        y.copy_from_slice(&self.0.coarse_synthesis(x, width, Fold::Crop));
    }

    fn apply_adjoint(&self, y: &[f64], width: usize, x: &mut [f64]) {
        x.copy_from_slice(&self.0.coarse_analysis(y, width, Extend::Zero));
    }
}

/// Which transform an adjoint is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

pub fn dwt2_forward(
    field: &[f64],
    rows: usize,
    cols: usize,
    width: usize,
    basis: &WaveletBasis,
    levels: usize,
) -> Result<CoeffPyramid> {
    Dwt2::new(basis.clone(), rows, cols, levels)?.forward(field, width)
}

pub fn dwt2_inverse(pyramid: &CoeffPyramid, basis: &WaveletBasis) -> Result<Vec<f64>> {
    let s = pyramid
        .shapes
        .first()
        .ok_or_else(|| Error::Pyramid("empty pyramid".into()))?;
    if s.len() != 2 {
        return Err(Error::Pyramid("not a 2-D pyramid".into()));
    }
    Dwt2::new(basis.clone(), s[0], s[1], pyramid.levels())?.inverse(pyramid)
}

/// Input to [`dwt_adjoint`]: a pyramid for `Forward`, a field for `Inverse`.
pub enum AdjointInput<'a> {
    Pyramid(&'a CoeffPyramid),
    Field(&'a [f64]),
}

/// Output of [`dwt_adjoint`].
#[derive(Debug)]
pub enum AdjointOutput {
    Field(Vec<f64>),
    Pyramid(CoeffPyramid),
}

/// Applies the transpose of `plan.forward` or `plan.inverse`.
pub fn dwt_adjoint(plan: &Dwt2, direction: Direction, input: AdjointInput<'_>, width: usize) -> Result<AdjointOutput> {
    match (direction, input) {
        (Direction::Forward, AdjointInput::Pyramid(p)) => Ok(AdjointOutput::Field(plan.forward_adjoint(p)?)),
        (Direction::Inverse, AdjointInput::Field(x)) => Ok(AdjointOutput::Pyramid(plan.inverse_adjoint(x, width)?)),
        _ => Err(Error::InvalidArgument(
            "forward adjoint takes a pyramid, inverse adjoint takes a field".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::wavelet::make_basis;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn haar_one_dimensional_step() {
        let plan = Dwt1::new(make_basis("db1").unwrap(), 2, 1).unwrap();
        let p = plan.forward(&[1.0, 3.0], 1).unwrap();
        let s2 = std::f64::consts::SQRT_2;
        assert!((p.approx[0] - 2.0 * s2).abs() < 1e-15);
        assert!((p.details[0][0][0] + s2).abs() < 1e-15);
        let back = plan.inverse(&p).unwrap();
        assert!(max_abs_diff(&back, &[1.0, 3.0]) < 1e-15);
    }

    #[test]
    fn haar_constant_field() {
        let plan = Dwt2::new(make_basis("db1").unwrap(), 8, 8, 1).unwrap();
        let p = plan.forward(&vec![1.5; 64], 1).unwrap();
        assert!(p.approx.iter().all(|&a| (a - 3.0).abs() < 1e-14));
        assert!(p.details[0].iter().flatten().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn round_trip_odd_and_even_sizes() {
        for name in ["db1", "db3", "db4", "db6"] {
            let b = make_basis(name).unwrap();
            for &(r, c) in &[(16, 16), (17, 20), (33, 33), (65, 81)] {
                for levels in 1..=3 {
                    let plan = Dwt2::new(b.clone(), r, c, levels).unwrap();
                    let x = random(r * c * 2, (r * 31 + c + levels) as u64);
                    let back = plan.inverse(&plan.forward(&x, 2).unwrap()).unwrap();
                    assert!(max_abs_diff(&x, &back) < 1e-10, "{name} {r}x{c} L{levels}");
                }
            }
        }
    }

    #[test]
    fn one_dimensional_round_trip() {
        let b = make_basis("db2").unwrap();
        for n in [5usize, 9, 64, 65] {
            let plan = Dwt1::new(b.clone(), n, 2).unwrap();
            let x = random(n, n as u64);
            let back = plan.inverse(&plan.forward(&x, 1).unwrap()).unwrap();
            assert!(max_abs_diff(&x, &back) < 1e-12);
        }
    }

    #[test]
    fn parseval_on_even_unpadded_sizes() {
        let plan = Dwt2::new(make_basis("db4").unwrap(), 64, 64, 3).unwrap();
        let x = random(64 * 64, 5);
        let e: f64 = x.iter().map(|v| v * v).sum();
        let p = plan.forward(&x, 1).unwrap();
        assert!((p.energy() - e).abs() / e < 1e-10);
    }

    #[test]
    fn adjoint_identities() {
        let plan = Dwt2::new(make_basis("db4").unwrap(), 33, 20, 2).unwrap();
        let x = random(33 * 20 * 3, 1);
        let y_field = random(33 * 20 * 3, 2);
        let y = plan.forward(&y_field, 3).unwrap().map_values(|v| v * 0.5 + 0.1);
        // ⟨Wx, y⟩ = ⟨x, Wᵀy⟩
        let wx = plan.forward(&x, 3).unwrap();
        let wty = plan.forward_adjoint(&y).unwrap();
        let lhs = wx.dot(&y);
        let rhs: f64 = x.iter().zip(&wty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        // ⟨W⁻¹y, x⟩ = ⟨y, W⁻ᵀx⟩
        let winv = plan.inverse(&y).unwrap();
        let wit = plan.inverse_adjoint(&x, 3).unwrap();
        let lhs: f64 = winv.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - y.dot(&wit)).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn adjoint_equals_inverse_when_orthogonal() {
        let plan = Dwt2::new(make_basis("db3").unwrap(), 32, 16, 2).unwrap();
        let p = plan.forward(&random(32 * 16, 9), 1).unwrap().map_values(|v| v * 1.3);
        let a = plan.forward_adjoint(&p).unwrap();
        let b = plan.inverse(&p).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn coarse_maps_match_pyramid_surgery() {
        let plan = Arc::new(Dwt2::new(make_basis("db4").unwrap(), 65, 65, 3).unwrap());
        let x = random(65 * 65 * 2, 4);
        let full = plan.forward(&x, 2).unwrap();
        let mut coarse = vec![0.0; 4 * plan.coarse_positions() * 2];
        CoarseAnalysis(plan.clone()).apply(&x, 2, &mut coarse);
        let last = full.levels() - 1;
        let stacked: Vec<f64> = full
            .approx
            .iter()
            .chain(full.details[last].iter().flatten())
            .copied()
            .collect();
        assert!(max_abs_diff(&coarse, &stacked) < 1e-12);

        let mut only_coarse = full.zeros_like();
        only_coarse.approx = full.approx.clone();
        only_coarse.details[last] = full.details[last].clone();
        let expect = plan.inverse(&only_coarse).unwrap();
        let mut got = vec![0.0; x.len()];
        CoarseSynthesis(plan.clone()).apply(&coarse, 2, &mut got);
        assert!(max_abs_diff(&got, &expect) < 1e-12);
    }

    #[test]
    fn coarse_map_adjoints() {
        let plan = Arc::new(Dwt2::new(make_basis("db2").unwrap(), 41, 27, 3).unwrap());
        let n = 41 * 27;
        let m = 4 * plan.coarse_positions();
        let x = random(n, 7);
        let y = random(m, 8);
        for map in [
            Box::new(CoarseAnalysis(plan.clone())) as Box<dyn LinearMap>,
            Box::new(CoarseSynthesis(plan.clone())),
        ] {
            let (i, o) = (map.input_len(), map.output_len());
            let xin = if i == n { &x } else { &y };
            let yout = if o == n { &x } else { &y };
            let mut ax = vec![0.0; o];
            map.apply(xin, 1, &mut ax);
            let mut aty = vec![0.0; i];
            map.apply_adjoint(yout, 1, &mut aty);
            let lhs: f64 = ax.iter().zip(yout).map(|(a, b)| a * b).sum();
            let rhs: f64 = xin.iter().zip(&aty).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn too_many_levels() {
        let err = Dwt2::new(make_basis("db1").unwrap(), 16, 16, 5).unwrap_err();
        assert!(matches!(err, Error::LevelsTooDeep { .. }));
    }

    #[test]
    fn inconsistent_pyramid_rejected() {
        let plan = Dwt2::new(make_basis("db1").unwrap(), 8, 8, 2).unwrap();
        let mut p = plan.forward(&random(64, 1), 1).unwrap();
        p.approx.pop();
        assert!(matches!(plan.inverse(&p), Err(Error::Pyramid(_))));
    }

    #[test]
    fn zero_adjoint_and_dispatch() {
        let plan = Dwt2::new(make_basis("db2").unwrap(), 12, 12, 2).unwrap();
        let z = plan.forward(&vec![0.0; 144], 1).unwrap();
        match dwt_adjoint(&plan, Direction::Forward, AdjointInput::Pyramid(&z), 1).unwrap() {
            AdjointOutput::Field(f) => assert!(f.iter().all(|&v| v == 0.0)),
            AdjointOutput::Pyramid(_) => panic!("expected field"),
        }
        assert!(dwt_adjoint(&plan, Direction::Forward, AdjointInput::Field(&[0.0; 144]), 1).is_err());
    }
}
