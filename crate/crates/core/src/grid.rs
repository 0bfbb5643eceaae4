//! Uniform rectangular grids and fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid axis with `n` points spanning `[lower, upper]` inclusive.
///
/// A periodic axis still lists both endpoints; the last point duplicates the
/// first, so the period in index units is `n - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub periodic: bool,
}

impl Axis {
    pub fn new(name: &str, n: usize, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            n,
            lower,
            upper,
            periodic: false,
        }
    }

    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.upper
        } else {
            self.lower + i as f64 * self.spacing()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

/// Tensor-product grid, row-major with axis 0 slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::InvalidArgument(format!("grids have 1 to 3 axes, got {}", axes.len())));
        }
        for a in &axes {
            if a.n < 2 || !(a.upper > a.lower) || !a.lower.is_finite() || !a.upper.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "axis {} needs n >= 2 and a finite increasing range",
                    a.name
                )));
            }
        }
        Ok(Self { axes })
    }

    /// `n × n` grid over the square `[lower, upper]²` with axes named `x`, `y`.
    pub fn square(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![Axis::new("x", n, lower, upper), Axis::new("y", n, lower, upper)])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.axes[d].spacing()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.ndim()];
        for d in (0..self.ndim() - 1).rev() {
            s[d] = s[d + 1] * self.axes[d + 1].n;
        }
        s
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.ndim()];
        for d in (0..self.ndim()).rev() {
            out[d] = flat % self.axes[d].n;
            flat /= self.axes[d].n;
        }
        out
    }

    /// Physical coordinates of a flat point index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.axes[d].coord(i))
            .collect()
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridField {
        let values = (0..self.len()).map(|p| f(&self.point(p))).collect();
        GridField {
            grid: self.clone(),
            values,
        }
    }

    /// Flat indices of points at least `inset` steps from every
    /// non-periodic edge.
    pub fn interior(&self, inset: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&p| {
                self.unravel(p)
                    .iter()
                    .zip(&self.axes)
                    .all(|(&i, a)| a.periodic || (i >= inset && i + inset < a.n))
            })
            .collect()
    }
}

/// Scalar field on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape("GridField::new", &grid.shape(), &[values.len()]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "GridField::new" });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.index(idx)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_coords() {
        let a = Axis::new("x", 65, -1.0, 1.0);
        assert_eq!(a.spacing(), 2.0 / 64.0);
        assert_eq!(a.coord(0), -1.0);
        assert_eq!(a.coord(64), 1.0);
        assert_eq!(a.coord(32), 0.0);
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![Axis::new("x", 4, 0.0, 1.0), Axis::new("t", 5, 0.0, 1.0)]).unwrap();
        for p in 0..g.len() {
            assert_eq!(g.index(&g.unravel(p)), p);
        }
        assert_eq!(g.index(&[1, 2]), 7);
    }

    #[test]
    fn interior_counts() {
        let g = Grid::square(9, 0.0, 1.0).unwrap();
        assert_eq!(g.interior(0).len(), 81);
        assert_eq!(g.interior(2).len(), 25);
        let p = Grid::new(vec![Axis::new("x", 9, 0.0, 1.0).periodic(), Axis::new("y", 9, 0.0, 1.0)]).unwrap();
        assert_eq!(p.interior(2).len(), 45);
    }

    #[test]
    fn rejects_bad_fields() {
        let g = Grid::square(3, 0.0, 1.0).unwrap();
        assert!(GridField::new(g.clone(), vec![0.0; 8]).is_err());
        let mut v = vec![0.0; 9];
        v[4] = f64::NAN;
        assert!(matches!(GridField::new(g, v), Err(Error::NonFinite { .. })));
        assert!(Grid::new(vec![Axis::new("x", 1, 0.0, 1.0)]).is_err());
    }
}
