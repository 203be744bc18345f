//! Piecewise-constant transfer between nested grids.

use crate::error::{Error, Result};
use crate::solver::field::Field;
use crate::solver::grid::Grid;

fn ratio(coarse: &Grid, fine: &Grid) -> Result<usize> {
    coarse.nesting_ratio(fine).ok_or_else(|| {
        Error::GridMismatch(format!(
            "grid {:?} does not nest inside {:?}",
            fine.cells(),
            coarse.cells()
        ))
    })
}

fn coarse_parent(coarse: &Grid, fine: &Grid, r: usize, c: usize) -> usize {
    let idx = fine.multi_index(c);
    let (ix, iy) = (idx[0] / r, idx[1] / r);
    ix + coarse.cells()[0] * iy
}

/// Cell averaging onto `coarse`; conserves every species' mass. Blocks of
/// equal values restrict to that value exactly.
pub fn restrict(fine: &Field, coarse: &Grid) -> Result<Field> {
    let r = ratio(coarse, fine.grid())?;
    let n = fine.n();
    if r == 1 {
        return Ok(fine.clone());
    }
    let m = n * coarse.num_cells();
    let mut sum = vec![0.0; m];
    let mut first = vec![f64::NAN; m];
    let mut uniform = vec![true; m];
    for c in 0..fine.num_cells() {
        let p = coarse_parent(coarse, fine.grid(), r, c);
        for (i, v) in fine.cell(c).iter().enumerate() {
            let k = p * n + i;
            sum[k] += v;
            if first[k].is_nan() {
                first[k] = *v;
            } else if first[k] != *v {
                uniform[k] = false;
            }
        }
    }
    let count = r.pow(coarse.dim() as u32) as f64;
    let data = (0..m)
        .map(|k| if uniform[k] { first[k] } else { sum[k] / count })
        .collect();
    Field::new(coarse.clone(), n, data)
}

/// Piecewise-constant injection onto `fine`.
pub fn prolong(coarse: &Field, fine: &Grid) -> Result<Field> {
    let r = ratio(coarse.grid(), fine)?;
    let n = coarse.n();
    let mut data = Vec::with_capacity(n * fine.num_cells());
    for c in 0..fine.num_cells() {
        let p = coarse_parent(coarse.grid(), fine, r, c);
        data.extend_from_slice(coarse.cell(p));
    }
    Field::new(fine.clone(), n, data)
}

/// Restricts or prolongs depending on which grid is finer.
pub fn transfer(field: &Field, to: &Grid) -> Result<Field> {
    if to.nesting_ratio(field.grid()).is_some() {
        restrict(field, to)
    } else {
        prolong(field, to)
    }
}
