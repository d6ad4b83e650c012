//! Block tridiagonal systems with optional periodic corner blocks.

use nalgebra::{DMatrix, DVector};

/// Square block matrix with blocks coupling each cell to itself and its two
/// neighbours. With `periodic`, `lower[0]` couples to the last cell and
/// `upper[n - 1]` to the first.
#[derive(Debug, Clone)]
pub struct BlockTridiag {
    pub periodic: bool,
    pub lower: Vec<DMatrix<f64>>,
    pub diag: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
}

impl BlockTridiag {
    pub fn zeros(n: usize, bs: usize, periodic: bool) -> Self {
        let z = DMatrix::zeros(bs, bs);
        Self { periodic, lower: vec![z.clone(); n], diag: vec![z.clone(); n], upper: vec![z; n] }
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |b| b.nrows())
    }

    fn neighbours(&self, c: usize) -> (Option<usize>, Option<usize>) {
        let n = self.n_blocks();
        let left = if c > 0 {
            Some(c - 1)
        } else if self.periodic {
            Some(n - 1)
        } else {
            None
        };
        let right = if c + 1 < n {
            Some(c + 1)
        } else if self.periodic {
            Some(0)
        } else {
            None
        };
        (left, right)
    }

    /// Adds `mu` to every diagonal entry.
    pub fn shift_diagonal(&mut self, mu: f64) {
        for b in &mut self.diag {
            for k in 0..b.nrows() {
                b[(k, k)] += mu;
            }
        }
    }

    /// Largest magnitude on the main diagonal.
    pub fn max_abs_diagonal(&self) -> f64 {
        self.diag.iter().flat_map(|b| b.diagonal().iter().copied().collect::<Vec<_>>()).fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Dense copy of the operator.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_blocks();
        let bs = self.block_size();
        let mut m = DMatrix::zeros(n * bs, n * bs);
        for c in 0..n {
            let (l, r) = self.neighbours(c);
            let mut add = |col: usize, b: &DMatrix<f64>| {
                let mut view = m.view_mut((c * bs, col * bs), (bs, bs));
                view += b;
            };
            add(c, &self.diag[c]);
            if let Some(l) = l {
                add(l, &self.lower[c]);
            }
            if let Some(r) = r {
                add(r, &self.upper[c]);
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n_blocks();
        let bs = self.block_size();
        let mut y = vec![0.0; n * bs];
        let block = |c: usize| DVector::from_column_slice(&x[c * bs..(c + 1) * bs]);
        for c in 0..n {
            let (l, r) = self.neighbours(c);
            let mut acc = &self.diag[c] * block(c);
            if let Some(l) = l {
                acc += &self.lower[c] * block(l);
            }
            if let Some(r) = r {
                acc += &self.upper[c] * block(r);
            }
            y[c * bs..(c + 1) * bs].copy_from_slice(acc.as_slice());
        }
        y
    }

    /// Solves `A x = rhs`; `None` if the matrix is numerically singular.
    ///
    /// Block elimination with the last cell kept as a spike unknown, falling
    /// back to dense LU for tiny systems or singular pivot blocks.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n_blocks();
        if n < 3 {
            return self.solve_dense(rhs);
        }
        self.solve_blocks(rhs).or_else(|| self.solve_dense(rhs))
    }

    fn solve_dense(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let lu = self.to_dense().lu();
        let x = lu.solve(&DVector::from_column_slice(rhs))?;
        x.iter().all(|v| v.is_finite()).then(|| x.as_slice().to_vec())
    }

    fn solve_blocks(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n_blocks();
        let bs = self.block_size();
        let r = |c: usize| DVector::from_column_slice(&rhs[c * bs..(c + 1) * bs]);
        let zero = DMatrix::<f64>::zeros(bs, bs);
        let a0 = if self.periodic { &self.lower[0] } else { &zero };
        let cl = if self.periodic { &self.upper[n - 1] } else { &zero };

        // rows 0..n-2: x_c = y_c - G_c x_{c+1} - H_c x_{n-1}
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
        let mut g: Vec<DMatrix<f64>> = Vec::with_capacity(n - 1);
        let mut h: Vec<DMatrix<f64>> = Vec::with_capacity(n - 1);
        let lu0 = self.diag[0].clone().lu();
        y.push(lu0.solve(&r(0))?);
        g.push(lu0.solve(&self.upper[0])?);
        h.push(lu0.solve(a0)?);
        for c in 1..n - 1 {
            let a = &self.lower[c];
            let s = &self.diag[c] - a * &g[c - 1];
            let lu = s.lu();
            y.push(lu.solve(&(r(c) - a * &y[c - 1]))?);
            let ah = a * &h[c - 1];
            if c == n - 2 {
                g.push(DMatrix::zeros(bs, bs));
                h.push(lu.solve(&(&self.upper[c] - ah))?);
            } else {
                g.push(lu.solve(&self.upper[c])?);
                h.push(-lu.solve(&ah)?);
            }
        }
        // back substitution: x_c = yb_c - hb_c x_{n-1}
        let mut yb = y.clone();
        let mut hb = h.clone();
        for c in (0..n - 2).rev() {
            yb[c] = &y[c] - &g[c] * &yb[c + 1];
            hb[c] = &h[c] - &g[c] * &hb[c + 1];
        }
        let last = n - 1;
        let al = &self.lower[last];
        let s = &self.diag[last] - al * &hb[last - 1] - cl * &hb[0];
        let rhs_last = r(last) - al * &yb[last - 1] - cl * &yb[0];
        let xl = s.lu().solve(&rhs_last)?;
        let mut x = vec![0.0; n * bs];
        for c in 0..last {
            let xc = &yb[c] - &hb[c] * &xl;
            x[c * bs..(c + 1) * bs].copy_from_slice(xc.as_slice());
        }
        x[last * bs..].copy_from_slice(xl.as_slice());
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_system(n: usize, bs: usize, periodic: bool, seed: u64) -> BlockTridiag {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = BlockTridiag::zeros(n, bs, periodic);
        for c in 0..n {
            m.lower[c] = DMatrix::from_fn(bs, bs, |_, _| rng.gen_range(-1.0..1.0));
            m.upper[c] = DMatrix::from_fn(bs, bs, |_, _| rng.gen_range(-1.0..1.0));
            m.diag[c] = DMatrix::from_fn(bs, bs, |i, j| {
                rng.gen_range(-1.0..1.0) + if i == j { 4.0 * bs as f64 } else { 0.0 }
            });
        }
        if !periodic {
            m.lower[0].fill(0.0);
            m.upper[n - 1].fill(0.0);
        }
        m
    }

    #[test]
    fn block_solver_matches_dense_lu() {
        for &(n, bs, periodic) in &[(2, 3, true), (3, 2, true), (7, 4, true), (7, 4, false), (40, 16, true), (5, 1, false)] {
            let m = random_system(n, bs, periodic, 7 + n as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let rhs: Vec<f64> = (0..n * bs).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = m.solve(&rhs).unwrap();
            let oracle = m.to_dense().lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
            for (a, b) in x.iter().zip(oracle.iter()) {
                assert!((a - b).abs() < 1e-11, "n={n} bs={bs} periodic={periodic}");
            }
            let back = m.matvec(&x);
            for (a, b) in back.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let m = BlockTridiag::zeros(4, 2, true);
        assert!(m.solve(&[1.0; 8]).is_none());
    }
}
