//! Uniform node grids and the fields that live on them.
//!
//! Nodes sit at `x_i = a + i*dx`, `i = 0..n`, with both endpoints included.
//! Faces sit halfway between neighbouring nodes; there are `n - 1` of them.
//! Integrals over nodes use the composite trapezoid rule, integrals over
//! faces use the midpoint rule (every face carries weight `dx`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::Grid(format!(
                "domain [{a}, {b}] is empty or not finite"
            )));
        }
        if n < MIN_NODES {
            return Err(Error::Grid(format!("n = {n} < {MIN_NODES}")));
        }
        Ok(Self { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.b
        } else {
            self.a + i as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Position of face `f`, between nodes `f` and `f + 1`.
    pub fn face(&self, f: usize) -> f64 {
        0.5 * (self.x(f) + self.x(f + 1))
    }

    /// Trapezoid weight of node `i` (already multiplied by `dx`).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    /// Trapezoid integral of node values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.dx() * (inner + 0.5 * (values[0] + values[n - 1]))
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        self.integrate(values) / self.length()
    }
}

/// Real values attached to every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Self { grid, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.grid.mean(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Trapezoid L¹ norm.
    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        self.grid.integrate(&abs)
    }

    /// Squared trapezoid L² norm.
    pub fn l2_norm_sq(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        self.grid.integrate(&sq)
    }

    pub fn l1_distance(&self, other: &GridFunction) -> f64 {
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).abs())
            .collect();
        self.grid.integrate(&d)
    }

    pub fn l2_distance(&self, other: &GridFunction) -> f64 {
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y) * (x - y))
            .collect();
        self.grid.integrate(&d).sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }
}

/// Values on the `n - 1` interior faces of a [`Grid`] (staggered field).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len() - 1],
        }
    }

    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() + 1 != grid.len() {
            return Err(Error::Grid(format!(
                "{} face values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Squared midpoint-rule L² norm.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn integral(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_empty_grids() {
        assert!(Grid::new(0.0, 1.0, 7).is_err());
        assert!(Grid::new(1.0, 1.0, 16).is_err());
        assert!(Grid::new(0.0, 1.0, 8).is_ok());
    }

    #[test]
    fn endpoints_are_exact() {
        let g = Grid::new(0.1, 0.7, 13).unwrap();
        assert_eq!(g.x(0), 0.1);
        assert_eq!(g.x(12), 0.7);
        let spacing: Vec<f64> = (1..13).map(|i| g.x(i) - g.x(i - 1)).collect();
        for s in spacing {
            assert!((s - g.dx()).abs() < 1e-15);
        }
    }

    #[test]
    fn trapezoid_integrates_affine_exactly() {
        let g = Grid::new(0.0, 2.0, 9).unwrap();
        let f = GridFunction::from_fn(g, |x| 3.0 * x - 1.0);
        assert!((f.integral() - 4.0).abs() < 1e-14);
    }
}
