use std::sync::Arc;

use crate::geometry::{Grid, NodeClass};

/// Real values at every node of a grid.
///
/// Solver outputs are zero-extended: every non-interior node holds exactly 0.
/// Sampled fields built with [`ScalarField::sample`] may hold arbitrary values
/// off the interior; the discrete operators never read them.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.node_count()],
        }
    }

    /// Evaluates `f` at every node, including exterior ones.
    pub fn sample(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.node_count())
            .map(|node| f(&grid.coords(node)[..dim]))
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Evaluates `f` on interior nodes and sets 0 elsewhere.
    pub fn sample_interior(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let vals: Vec<f64> = grid
            .interior_nodes()
            .iter()
            .map(|&node| f(&grid.coords(node)[..dim]))
            .collect();
        Self::from_interior(grid, &vals)
    }

    /// Zero-extends values given in interior numbering.
    pub fn from_interior(grid: &Arc<Grid>, interior: &[f64]) -> Self {
        assert_eq!(interior.len(), grid.interior_count());
        let mut values = vec![0.0; grid.node_count()];
        for (&node, &v) in grid.interior_nodes().iter().zip(interior) {
            values[node] = v;
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.grid
            .interior_nodes()
            .iter()
            .map(|&node| self.values[node])
            .collect()
    }

    /// Value at interior node `i` (interior numbering).
    pub fn at_interior(&self, i: usize) -> f64 {
        self.values[self.grid.interior_nodes()[i]]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn interior_sup_norm(&self) -> f64 {
        self.grid
            .interior_nodes()
            .iter()
            .fold(0.0, |m, &node| m.max(self.values[node].abs()))
    }

    /// Minimum over interior nodes (the discrete infimum).
    pub fn interior_min(&self) -> f64 {
        self.grid
            .interior_nodes()
            .iter()
            .fold(f64::INFINITY, |m, &node| m.min(self.values[node]))
    }

    pub fn interior_max(&self) -> f64 {
        self.grid
            .interior_nodes()
            .iter()
            .fold(f64::NEG_INFINITY, |m, &node| m.max(self.values[node]))
    }

    /// Largest absolute value on non-interior nodes.
    pub fn boundary_defect(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|&(node, _)| self.grid.class(node) != NodeClass::Interior)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    pub fn zero_extended(&self) -> Self {
        Self::from_interior(&self.grid, &self.interior_values())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.values.len() == other.values.len());
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Maps interior values through `f(interior index, value)`, zero elsewhere.
    pub fn map_interior(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let vals: Vec<f64> = (0..self.grid.interior_count())
            .map(|i| f(i, self.at_interior(i)))
            .collect();
        Self::from_interior(&self.grid, &vals)
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}
