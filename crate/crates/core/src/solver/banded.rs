//! Banded LU with partial pivoting.
//!
//! Row `r` stores columns `r - kl ..= r + kl + ku`; the extra `kl` columns
//! on the right absorb fill-in from row interchanges.

#[derive(Clone, Debug)]
pub struct BandMatrix {
    dim: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(dim: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            dim,
            kl,
            ku,
            width,
            data: vec![0.0; dim * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(
            c + self.kl >= r && c <= r + self.kl + self.ku,
            "({r},{c}) outside band"
        );
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.kl + self.ku {
            0.0
        } else {
            self.data[self.slot(r, c)]
        }
    }

    /// Adds `v` at `(r, c)`; `c - r` must lie in `[-kl, ku]`.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(c + self.kl >= r && c <= r + self.ku);
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    /// Factorizes in place. Returns `None` on an exactly singular pivot.
    pub fn factorize(mut self) -> Option<BandLu> {
        let (n, kl, ku) = (self.dim, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            piv[k] = p;
            let right = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=right {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for r in k + 1..=last {
                let s = self.slot(r, k);
                let m = self.data[s] / pivot;
                self.data[s] = m;
                if m == 0.0 {
                    continue;
                }
                for c in k + 1..=right {
                    let t = self.data[self.slot(k, c)];
                    let s = self.slot(r, c);
                    self.data[s] -= m * t;
                }
            }
        }
        Some(BandLu { m: self, piv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let BandMatrix { dim: n, kl, ku, .. } = self.m;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.m.data[self.m.slot(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.m.data[self.m.slot(k, c)] * b[c];
            }
            b[k] = s / self.m.data[self.m.slot(k, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
                .unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for r in k + 1..n {
                let m = a[r][k] / a[k][k];
                for c in k..n {
                    a[r][c] -= m * a[k][c];
                }
                b[r] -= m * b[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|c| a[k][c] * b[c]).sum();
            b[k] = (b[k] - s) / a[k][k];
        }
        b
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (9, 1, 1), (20, 3, 2), (30, 5, 5), (12, 0, 3)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for r in 0..n {
                for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                    // weak diagonal forces pivoting
                    let v: f64 = rng.gen_range(-1.0..1.0) * if r == c { 0.01 } else { 1.0 };
                    band.add(r, c, v);
                    dense[r][c] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let want = dense_solve(dense, b.clone());
            let mut got = b;
            band.factorize().unwrap().solve_in_place(&mut got);
            for (g, w) in got.iter().zip(&want) {
                assert!(
                    (g - w).abs() < 1e-9 * (1.0 + w.abs()),
                    "{n} {kl} {ku}: {g} vs {w}"
                );
            }
        }
    }

    #[test]
    fn singular_is_reported() {
        let band = BandMatrix::zeros(3, 1, 1);
        assert!(band.factorize().is_none());
    }
}
