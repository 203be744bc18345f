use crate::error::{Error, Result};

/// Uniform tensor grid of cells on `[0, L_1] x ... x [0, L_d]`, `d` in {1, 2}.
///
/// Cells are numbered with the first axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    extents: Vec<f64>,
    cells: Vec<usize>,
}

/// An interior face between two neighbouring cells along `axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub left: usize,
    pub right: usize,
}

impl Grid {
    pub fn new(extents: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if extents.is_empty() || extents.len() > 2 || extents.len() != cells.len() {
            return Err(Error::invalid(
                "grid needs 1 or 2 axes with matching extents and cell counts",
            ));
        }
        if extents.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::invalid("grid extents must be positive"));
        }
        if cells.iter().any(|&c| c < 2) {
            return Err(Error::invalid("every axis needs at least 2 cells"));
        }
        Ok(Grid { extents, cells })
    }

    pub fn line(length: f64, cells: usize) -> Result<Self> {
        Grid::new(vec![length], vec![cells])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }
    pub fn extents(&self) -> &[f64] {
        &self.extents
    }
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }
    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }
    pub fn dx(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }
    pub fn cell_measure(&self) -> f64 {
        (0..self.dim()).map(|a| self.dx(a)).product()
    }
    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }
    /// Smallest cell width.
    pub fn h(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.dx(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-axis indices of cell `c`.
    pub fn multi_index(&self, c: usize) -> [usize; 2] {
        match self.dim() {
            1 => [c, 0],
            _ => [c % self.cells[0], c / self.cells[0]],
        }
    }

    pub fn center(&self, c: usize) -> Vec<f64> {
        let idx = self.multi_index(c);
        (0..self.dim())
            .map(|a| (idx[a] as f64 + 0.5) * self.dx(a))
            .collect()
    }

    pub fn faces(&self) -> Vec<Face> {
        let mut out = Vec::new();
        let nx = self.cells[0];
        let ny = if self.dim() == 2 { self.cells[1] } else { 1 };
        for iy in 0..ny {
            for ix in 0..nx - 1 {
                let left = ix + nx * iy;
                out.push(Face {
                    axis: 0,
                    left,
                    right: left + 1,
                });
            }
        }
        if self.dim() == 2 {
            for iy in 0..ny - 1 {
                for ix in 0..nx {
                    let left = ix + nx * iy;
                    out.push(Face {
                        axis: 1,
                        left,
                        right: left + nx,
                    });
                }
            }
        }
        out
    }

    /// Distance in cell numbering between neighbours along the slowest axis;
    /// sets the Jacobian bandwidth.
    pub(crate) fn neighbour_stride(&self) -> usize {
        if self.dim() == 2 {
            self.cells[0]
        } else {
            1
        }
    }

    /// `self` refined by an integer factor on every axis.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        if factor == 0 {
            return Err(Error::invalid("refinement factor must be positive"));
        }
        Grid::new(
            self.extents.clone(),
            self.cells.iter().map(|c| c * factor).collect(),
        )
    }

    /// Integer ratio `fine / self` when `fine` nests inside `self`.
    pub fn nesting_ratio(&self, fine: &Grid) -> Option<usize> {
        if self.extents != fine.extents || self.dim() != fine.dim() {
            return None;
        }
        let r = fine.cells[0] / self.cells[0];
        let all = self
            .cells
            .iter()
            .zip(&fine.cells)
            .all(|(c, f)| f % c == 0 && f / c == r);
        (r >= 1 && all).then_some(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry() {
        let g = Grid::new(vec![2.0, 1.0], vec![4, 2]).unwrap();
        assert_eq!(g.num_cells(), 8);
        assert_eq!(g.dx(0), 0.5);
        assert_eq!(g.cell_measure(), 0.25);
        assert_eq!(g.measure(), 2.0);
        assert_eq!(g.center(5), vec![0.75, 0.75]);
        let faces = g.faces();
        assert_eq!(faces.len(), 3 * 2 + 4);
        assert!(faces.contains(&Face {
            axis: 1,
            left: 1,
            right: 5
        }));
    }

    #[test]
    fn invariants() {
        assert!(Grid::line(1.0, 1).is_err());
        assert!(Grid::line(0.0, 4).is_err());
        assert!(Grid::new(vec![1.0; 3], vec![2; 3]).is_err());
        let g = Grid::line(1.0, 4).unwrap();
        assert_eq!(g.nesting_ratio(&g.refined(3).unwrap()), Some(3));
        assert_eq!(g.nesting_ratio(&Grid::line(1.0, 6).unwrap()), None);
    }
}
