use crate::error::{Error, Result};
use crate::solver::grid::Grid;

/// Cell averages of `n` species densities, stored cell-major
/// (`data[c * n + i]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    n: usize,
    grid: Grid,
    data: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * grid.num_cells() {
            return Err(Error::invalid(format!(
                "field needs {} values, got {}",
                n * grid.num_cells(),
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid(format!(
                "field entry for cell {} species {} is {}",
                bad / n,
                bad % n,
                data[bad]
            )));
        }
        Ok(Field { n, grid, data })
    }

    pub fn constant(grid: Grid, values: &[f64]) -> Result<Self> {
        let data = values.repeat(grid.num_cells());
        Field::new(grid, values.len(), data)
    }

    /// Samples `f(x, out)` at cell centres.
    pub fn from_fn(grid: Grid, n: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut data = vec![0.0; n * grid.num_cells()];
        for c in 0..grid.num_cells() {
            f(&grid.center(c), &mut data[c * n..(c + 1) * n]);
        }
        Field::new(grid, n, data)
    }

    pub(crate) fn from_raw(grid: Grid, n: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * grid.num_cells());
        Field { n, grid, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn num_cells(&self) -> usize {
        self.grid.num_cells()
    }
    pub fn cell(&self, c: usize) -> &[f64] {
        &self.data[c * self.n..(c + 1) * self.n]
    }
    pub fn cells(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.cells().map(|u| u[i]).sum::<f64>() * self.grid.cell_measure()
    }
    pub fn masses(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.mass(i)).collect()
    }
    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn same_layout(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.n != other.n {
            return Err(Error::GridMismatch(format!(
                "fields live on {:?}/{} species and {:?}/{} species",
                self.grid.cells(),
                self.n,
                other.grid.cells(),
                other.n
            )));
        }
        Ok(())
    }

    /// `sqrt( sum_cells |cell| sum_i (u_i - v_i)^2 )`.
    pub fn l2_distance(&self, other: &Field) -> Result<f64> {
        self.same_layout(other)?;
        let s: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        Ok((s * self.grid.cell_measure()).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nonfinite() {
        let g = Grid::line(1.0, 2).unwrap();
        assert!(Field::new(g.clone(), 1, vec![1.0, -1.0]).is_err());
        assert!(Field::new(g.clone(), 1, vec![1.0, f64::NAN]).is_err());
        assert!(Field::new(g, 1, vec![1.0]).is_err());
    }

    #[test]
    fn mass_and_extrema() {
        let g = Grid::line(2.0, 4).unwrap();
        let f = Field::new(g, 2, vec![1.0, 0.5, 2.0, 0.5, 3.0, 0.5, 4.0, 0.5]).unwrap();
        assert_eq!(f.masses(), vec![5.0, 1.0]);
        assert_eq!((f.min(), f.max()), (0.5, 4.0));
    }
}
