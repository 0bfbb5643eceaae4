//! Stochastic-projection derivative estimation on uniform grids.
//!
//! At a point `x̄` with neighbors `xᵢ`, the gradient estimate is
//! `g = M⁻¹ m` with `M = (1/N_b) Σ ΔxᵢΔxᵢᵀ` and
//! `m = (1/N_b) Σ (u(xᵢ) − u(x̄)) Δxᵢ`. On a fixed grid the neighborhoods are
//! fixed, so `g` is a linear function of the field values and each derivative
//! component becomes a sparse matrix.

use serde::{Deserialize, Serialize};

use crate::autodiff::SparseMatrix;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridField};

/// Neighborhood choice for points whose full disk leaves the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Keep only the neighbors that fall inside the grid.
    OneSided,
    /// Use the full disk of the nearest point whose disk fits.
    InteriorShifted,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-sided" => Ok(Self::OneSided),
            "interior-shifted" => Ok(Self::InteriorShifted),
            _ => Err(Error::Config(format!(
                "unknown boundary mode `{s}` (one-sided | interior-shifted)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilConfig {
    /// Neighborhood radius in grid-index units.
    pub radius: f64,
    pub boundary: BoundaryMode,
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self {
            radius: 2.0,
            boundary: BoundaryMode::OneSided,
        }
    }
}

impl StencilConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= 1.0) || !self.radius.is_finite() {
            return Err(Error::Config(format!(
                "stencil radius {} must be at least one grid spacing",
                self.radius
            )));
        }
        Ok(())
    }

    /// Widest integer reach of the neighborhood along one axis.
    pub fn reach(&self) -> usize {
        (self.radius + 1e-9).floor() as usize
    }
}

/// Neighborhood and derivative weights of one grid point.
#[derive(Clone, Debug)]
pub struct PointStencil {
    pub neighbors: Vec<usize>,
    /// `weights[d][k]` multiplies `u(neighbor k) − u(center)` for axis `d`.
    pub weights: Vec<Vec<f64>>,
    /// Row-major `d × d` moment matrix.
    pub moment: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StencilSet {
    grid: Grid,
    cfg: StencilConfig,
    points: Vec<PointStencil>,
    derivs: Vec<SparseMatrix>,
}

impl StencilSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &StencilConfig {
        &self.cfg
    }

    pub fn point(&self, p: usize) -> &PointStencil {
        &self.points[p]
    }

    /// First-derivative operator along `axis`.
    pub fn derivative(&self, axis: usize) -> &SparseMatrix {
        &self.derivs[axis]
    }

    /// Points whose stencil and every stencil it reaches through `order`
    /// compositions are centrally symmetric full disks.
    pub fn exact_interior(&self, order: usize) -> Vec<usize> {
        self.grid.interior(order * self.cfg.reach())
    }
}

fn disk_offsets(ndim: usize, radius: f64) -> Vec<Vec<i64>> {
    let reach = (radius + 1e-9).floor() as i64;
    let r2 = radius * radius + 1e-9;
    let mut out = Vec::new();
    let side = (2 * reach + 1) as usize;
    for flat in 0..side.pow(ndim as u32) {
        let mut rem = flat;
        let mut o = vec![0i64; ndim];
        for slot in o.iter_mut().rev() {
            *slot = (rem % side) as i64 - reach;
            rem /= side;
        }
        let n2: i64 = o.iter().map(|v| v * v).sum();
        if n2 > 0 && (n2 as f64) <= r2 {
            out.push(o);
        }
    }
    out
}

/// Cholesky factorization of a small SPD matrix; `None` when not SPD.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    let scale = (0..d).map(|i| a[i * d + i].abs()).fold(0.0, f64::max);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 1e-12 * scale) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            y[i] -= l[i * d + k] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            y[i] -= l[k * d + i] * y[k];
        }
        y[i] /= l[i * d + i];
    }
    y
}

/// Maps index `i + o` onto the axis, wrapping periodic axes with period `n-1`.
fn shift(i: usize, o: i64, n: usize, periodic: bool) -> Option<usize> {
    let t = i as i64 + o;
    if periodic {
        let period = (n - 1) as i64;
        Some(t.rem_euclid(period) as usize)
    } else if t < 0 || t >= n as i64 {
        None
    } else {
        Some(t as usize)
    }
}

pub fn build_stencil(grid: &Grid, cfg: &StencilConfig) -> Result<StencilSet> {
    cfg.validate()?;
    let d = grid.ndim();
    for a in grid.axes() {
        if a.n < 3 {
            return Err(Error::InvalidArgument(format!("axis {} needs at least 3 points", a.name)));
        }
    }
    let offsets = disk_offsets(d, cfg.radius);
    let reach = cfg.reach() as i64;
    let h: Vec<f64> = (0..d).map(|k| grid.spacing(k)).collect();
    let axes = grid.axes();
    let mut points = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let idx = grid.unravel(p);
        // Displacements (in index units) from the center to each neighbor.
        let mut nbrs: Vec<(usize, Vec<i64>)> = Vec::new();
        match cfg.boundary {
            BoundaryMode::OneSided => {
                'off: for o in &offsets {
                    let mut tgt = vec![0; d];
                    for k in 0..d {
                        match shift(idx[k], o[k], axes[k].n, axes[k].periodic) {
                            Some(t) => tgt[k] = t,
                            None => continue 'off,
                        }
                    }
                    nbrs.push((grid.index(&tgt), o.clone()));
                }
            }
            BoundaryMode::InteriorShifted => {
                let center: Vec<i64> = (0..d)
                    .map(|k| {
                        let i = idx[k] as i64;
                        if axes[k].periodic {
                            i
                        } else {
                            let hi = (axes[k].n as i64 - 1 - reach).max(0);
                            i.clamp(reach.min(hi), hi)
                        }
                    })
                    .collect();
                let zero = vec![0i64; d];
                'off2: for o in offsets.iter().chain(std::iter::once(&zero)) {
                    let rel: Vec<i64> = (0..d).map(|k| center[k] + o[k] - idx[k] as i64).collect();
                    if rel.iter().all(|&v| v == 0) {
                        continue;
                    }
                    let mut tgt = vec![0; d];
                    for k in 0..d {
                        match shift(idx[k], rel[k], axes[k].n, axes[k].periodic) {
                            Some(t) => tgt[k] = t,
                            None => continue 'off2,
                        }
                    }
                    nbrs.push((grid.index(&tgt), rel));
                }
            }
        }
        let nb = nbrs.len() as f64;
        let mut moment = vec![0.0; d * d];
        let dx: Vec<Vec<f64>> = nbrs
            .iter()
            .map(|(_, o)| (0..d).map(|k| o[k] as f64 * h[k]).collect())
            .collect();
        for x in &dx {
            for a in 0..d {
                for b in 0..d {
                    moment[a * d + b] += x[a] * x[b] / nb;
                }
            }
        }
        let l = cholesky(&moment, d).ok_or(Error::SingularMoment(p))?;
        let mut weights = vec![Vec::with_capacity(nbrs.len()); d];
        for x in &dx {
            let scaled: Vec<f64> = x.iter().map(|v| v / nb).collect();
            let w = cholesky_solve(&l, d, &scaled);
            for a in 0..d {
                weights[a].push(w[a]);
            }
        }
        points.push(PointStencil {
            neighbors: nbrs.into_iter().map(|(i, _)| i).collect(),
            weights,
            moment,
        });
    }
    let derivs = (0..d)
        .map(|axis| {
            let rows = points
                .iter()
                .enumerate()
                .map(|(p, st)| {
                    let mut row: Vec<(usize, f64)> = st
                        .neighbors
                        .iter()
                        .zip(&st.weights[axis])
                        .map(|(&j, &w)| (j, w))
                        .collect();
                    let center: f64 = -st.weights[axis].iter().sum::<f64>();
                    row.push((p, center));
                    row
                })
                .collect();
            SparseMatrix::from_rows(grid.len(), rows)
        })
        .collect();
    Ok(StencilSet {
        grid: grid.clone(),
        cfg: *cfg,
        points,
        derivs,
    })
}

fn check_field(field: &GridField, s: &StencilSet) -> Result<()> {
    if field.grid.shape() != s.grid.shape() {
        return Err(Error::shape("sp_gradient", &s.grid.shape(), &field.grid.shape()));
    }
    Ok(())
}

fn gradient_values(values: &[f64], s: &StencilSet) -> Vec<Vec<f64>> {
    let d = s.grid.ndim();
    let mut out = vec![vec![0.0; values.len()]; d];
    for (p, st) in s.points.iter().enumerate() {
        let u0 = values[p];
        for (a, o) in out.iter_mut().enumerate() {
            o[p] = st
                .neighbors
                .iter()
                .zip(&st.weights[a])
                .map(|(&j, &w)| w * (values[j] - u0))
                .sum();
        }
    }
    out
}

/// First derivative along every axis.
pub fn sp_gradient(field: &GridField, s: &StencilSet) -> Result<Vec<GridField>> {
    check_field(field, s)?;
    Ok(gradient_values(&field.values, s)
        .into_iter()
        .map(|values| GridField {
            grid: s.grid.clone(),
            values,
        })
        .collect())
}

/// Second derivatives `∂_b ∂_a u` for each requested `(a, b)` pair, by
/// applying the first-derivative estimator twice.
pub fn sp_second(field: &GridField, s: &StencilSet, components: &[(usize, usize)]) -> Result<Vec<GridField>> {
    check_field(field, s)?;
    let d = s.grid.ndim();
    if let Some(&(a, b)) = components.iter().find(|&&(a, b)| a >= d || b >= d) {
        return Err(Error::InvalidArgument(format!("component ({a}, {b}) outside {d} axes")));
    }
    let first = gradient_values(&field.values, s);
    Ok(components
        .iter()
        .map(|&(a, b)| GridField {
            grid: s.grid.clone(),
            values: gradient_values(&first[a], s).swap_remove(b),
        })
        .collect())
}

/// Sparse operator for `∂_{axes[k]} … ∂_{axes[0]}`; an empty list is the
/// identity.
pub fn as_linear_map(s: &StencilSet, axes: &[usize]) -> Result<SparseMatrix> {
    let mut op = SparseMatrix::identity(s.grid.len());
    for &a in axes {
        if a >= s.grid.ndim() {
            return Err(Error::InvalidArgument(format!("axis {a} outside grid")));
        }
        op = s.derivs[a].compose(&op)?;
    }
    Ok(op)
}

/// Rows of a derivative operator stored as increments from a center point,
/// `y_r = Σ_j w_j (x_j − x_{center(r)})`, so constant fields map to exactly
/// zero regardless of rounding.
#[derive(Clone, Debug)]
pub struct DifferenceOperator {
    input_len: usize,
    centers: Vec<usize>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl DifferenceOperator {
    /// Takes rows `rows` of `op`, each centered at the grid point of the same
    /// index. The diagonal entry is dropped; `op` must annihilate constants.
    pub fn from_rows(op: &SparseMatrix, rows: &[usize]) -> Result<Self> {
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        for &r in rows {
            if r >= op.rows() || r >= op.cols() {
                return Err(Error::InvalidArgument(format!("row {r} outside operator")));
            }
            for (c, w) in op.row(r) {
                if c != r {
                    indices.push(c);
                    weights.push(w);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            input_len: op.cols(),
            centers: rows.to_vec(),
            indptr,
            indices,
            weights,
        })
    }

    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl crate::autodiff::LinearMap for DifferenceOperator {
    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.centers.len()
    }

    fn apply(&self, x: &[f64], width: usize, y: &mut [f64]) {
        for (r, &c) in self.centers.iter().enumerate() {
            let dst = &mut y[r * width..(r + 1) * width];
            dst.fill(0.0);
            let xc = &x[c * width..(c + 1) * width];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let (j, w) = (self.indices[k], self.weights[k]);
                let xj = &x[j * width..(j + 1) * width];
                for ch in 0..width {
                    dst[ch] += w * (xj[ch] - xc[ch]);
                }
            }
        }
    }

    fn apply_adjoint(&self, y: &[f64], width: usize, x: &mut [f64]) {
        x.fill(0.0);
        for (r, &c) in self.centers.iter().enumerate() {
            let yr = &y[r * width..(r + 1) * width];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let (j, w) = (self.indices[k], self.weights[k]);
                for ch in 0..width {
                    x[j * width + ch] += w * yr[ch];
                    x[c * width + ch] -= w * yr[ch];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::autodiff::LinearMap;
    use crate::grid::Axis;

    fn rel_l2(a: &[f64], b: &[f64], idx: &[usize]) -> f64 {
        let num: f64 = idx.iter().map(|&i| (a[i] - b[i]).powi(2)).sum();
        let den: f64 = idx.iter().map(|&i| b[i].powi(2)).sum();
        (num / den).sqrt()
    }

    #[test]
    fn one_dimensional_moment() {
        let h = 0.1;
        let g = Grid::new(vec![Axis::new("x", 11, 0.0, 1.0)]).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let st = s.point(5);
        assert_eq!(st.neighbors.len(), 4);
        assert!((st.moment[0] - 2.5 * h * h).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_disk_has_twelve_neighbors() {
        let g = Grid::square(9, 0.0, 1.0).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        assert_eq!(s.point(g.index(&[4, 4])).neighbors.len(), 12);
        // Corner keeps the quarter disk.
        assert_eq!(s.point(0).neighbors.len(), 5);
    }

    #[test]
    fn affine_exact_everywhere() {
        for mode in [BoundaryMode::OneSided, BoundaryMode::InteriorShifted] {
            let g = Grid::square(17, -1.0, 1.0).unwrap();
            let cfg = StencilConfig { radius: 2.0, boundary: mode };
            let s = build_stencil(&g, &cfg).unwrap();
            let u = g.sample(|p| 1.5 + 3.0 * p[0] - 2.0 * p[1]);
            let grad = sp_gradient(&u, &s).unwrap();
            assert!(grad[0].values.iter().all(|v| (v - 3.0).abs() < 1e-12));
            assert!(grad[1].values.iter().all(|v| (v + 2.0).abs() < 1e-12));
        }
    }

    #[test]
    fn quadratic_exact_on_symmetric_interior() {
        let g = Grid::square(21, 0.0, 1.0).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let u = g.sample(|p| p[0] * p[0] + 0.5 * p[0] * p[1]);
        let grad = sp_gradient(&u, &s).unwrap();
        for p in s.exact_interior(1) {
            let x = g.point(p);
            assert!((grad[0].values[p] - (2.0 * x[0] + 0.5 * x[1])).abs() < 1e-12);
            assert!((grad[1].values[p] - 0.5 * x[0]).abs() < 1e-12);
        }
        let second = sp_second(&u, &s, &[(0, 0), (1, 1)]).unwrap();
        for p in s.exact_interior(2) {
            assert!((second[0].values[p] - 2.0).abs() < 1e-10);
            assert!(second[1].values[p].abs() < 1e-10);
        }
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let g = Grid::square(9, 0.0, 1.0).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let u = g.sample(|_| 4.2);
        for f in sp_gradient(&u, &s).unwrap() {
            assert!(f.values.iter().all(|&v| v == 0.0));
        }
        let d = as_linear_map(&s, &[0]).unwrap();
        assert!(d.matvec(&u.values).iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn second_derivative_of_sine() {
        let g = Grid::new(vec![Axis::new("x", 65, 0.0, 1.0)]).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let u = g.sample(|p| (PI * p[0]).sin());
        let uxx = sp_second(&u, &s, &[(0, 0)]).unwrap().remove(0);
        let exact = g.sample(|p| -PI * PI * (PI * p[0]).sin());
        let err = rel_l2(&uxx.values, &exact.values, &s.exact_interior(2));
        assert!(err <= 2e-2, "{err}");
    }

    #[test]
    fn interior_gradient_converges_second_order() {
        let err = |n: usize| {
            let g = Grid::square(n, 0.0, 1.0).unwrap();
            let s = build_stencil(&g, &StencilConfig::default()).unwrap();
            let u = g.sample(|p| (PI * p[0]).sin() * (PI * p[1]).sin());
            let ux = sp_gradient(&u, &s).unwrap().remove(0);
            let exact = g.sample(|p| PI * (PI * p[0]).cos() * (PI * p[1]).sin());
            rel_l2(&ux.values, &exact.values, &s.exact_interior(1))
        };
        let (coarse, fine) = (err(33), err(65));
        assert!(coarse / fine >= 3.5, "{coarse} / {fine}");
    }

    #[test]
    fn matrix_matches_pointwise_estimator() {
        let g = Grid::square(9, 0.0, 1.0).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let u = g.sample(|p| (3.0 * p[0]).sin() * p[1].exp());
        let grad = sp_gradient(&u, &s).unwrap();
        for (a, ga) in grad.iter().enumerate() {
            let d = as_linear_map(&s, &[a]).unwrap();
            let m = d.matvec(&u.values);
            for (x, y) in m.iter().zip(&ga.values) {
                assert!((x - y).abs() < 1e-12);
            }
            // Column j of the dense assembly is D e_j.
            let dense = d.to_dense();
            let n = g.len();
            for j in [0usize, 17, 40, 80] {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let col = d.matvec(&e);
                for r in 0..n {
                    assert_eq!(col[r], dense[r * n + j]);
                }
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let g = Grid::square(12, 0.0, 1.0).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let d = as_linear_map(&s, &[1, 1]).unwrap();
        let n = g.len();
        let u: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let w: Vec<f64> = (0..n).map(|i| ((i * 13) % 7) as f64 * 0.3).collect();
        let du = d.matvec(&u);
        let mut dtw = vec![0.0; n];
        d.apply_adjoint(&w, 1, &mut dtw);
        let lhs: f64 = du.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&dtw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn periodic_axes_are_translation_equivariant() {
        let ax = |n| Axis::new("x", n, 0.0, 1.0).periodic();
        let g = Grid::new(vec![ax(17), ax(17)]).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let f = |p: &[f64]| (2.0 * PI * p[0]).sin() + (2.0 * PI * p[1]).cos() * (2.0 * PI * p[0]).cos();
        let u = g.sample(f);
        let shifted = g.sample(|p| f(&[p[0] + 1.0 / 16.0, p[1]]));
        let gu = sp_gradient(&u, &s).unwrap();
        let gs = sp_gradient(&shifted, &s).unwrap();
        for i in 0..16 {
            for j in 0..17 {
                let a = gs[0].at(&[i, j]);
                let b = gu[0].at(&[(i + 1) % 16, j]);
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn boundary_points_reach_inward() {
        let g = Grid::new(vec![Axis::new("x", 9, 0.0, 1.0)]).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        assert_eq!(s.point(0).neighbors, vec![1, 2]);
        assert_eq!(s.point(8).neighbors, vec![6, 7]);
    }

    #[test]
    fn invalid_configs() {
        let g = Grid::square(9, 0.0, 1.0).unwrap();
        let cfg = StencilConfig {
            radius: 0.5,
            boundary: BoundaryMode::OneSided,
        };
        assert!(build_stencil(&g, &cfg).is_err());
        let tiny = Grid::new(vec![Axis::new("x", 2, 0.0, 1.0)]).unwrap();
        assert!(build_stencil(&tiny, &StencilConfig::default()).is_err());
    }

    #[test]
    fn difference_operator_matches_matrix_and_kills_constants() {
        let g = Grid::square(11, 0.0, 1.0).unwrap();
        let s = build_stencil(&g, &StencilConfig::default()).unwrap();
        let lap = as_linear_map(&s, &[0, 0])
            .unwrap()
            .linear_combination(1.0, &as_linear_map(&s, &[1, 1]).unwrap(), 1.0)
            .unwrap();
        let rows = g.interior(1);
        let op = DifferenceOperator::from_rows(&lap, &rows).unwrap();
        let u: Vec<f64> = (0..2 * g.len()).map(|i| ((i * 7) % 13) as f64 * 0.1).collect();
        let mut y = vec![0.0; 2 * rows.len()];
        op.apply(&u, 2, &mut y);
        let dense = lap.select_rows(&rows);
        let mut expect = vec![0.0; 2 * rows.len()];
        dense.apply(&u, 2, &mut expect);
        for (a, b) in y.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
        op.apply(&vec![0.7; 2 * g.len()], 2, &mut y);
        assert!(y.iter().all(|&v| v == 0.0));
        // Adjoint identity.
        let w: Vec<f64> = (0..2 * rows.len()).map(|i| ((i * 5) % 9) as f64 - 4.0).collect();
        let mut xt = vec![0.0; 2 * g.len()];
        op.apply_adjoint(&w, 2, &mut xt);
        op.apply(&u, 2, &mut y);
        let lhs: f64 = y.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&xt).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
