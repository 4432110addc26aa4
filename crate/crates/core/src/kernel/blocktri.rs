use nalgebra::{Cholesky, DMatrix, DVector};

/// Symmetric matrix with nonzeros only on diagonal blocks and on the blocks
/// directly below and above them.
///
/// Only the lower half is stored: entries that would land in the block
/// strictly above the diagonal are dropped by [`BlockTridiagonal::add`] and
/// implied by symmetry.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    offsets: Vec<usize>,
    block_of: Vec<usize>,
    diag: Vec<DMatrix<f64>>,
    lower: Vec<DMatrix<f64>>,
}

impl BlockTridiagonal {
    pub fn new(block_sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(block_sizes.len() + 1);
        let mut block_of = Vec::new();
        offsets.push(0);
        for (b, &n) in block_sizes.iter().enumerate() {
            offsets.push(offsets[b] + n);
            block_of.extend(std::iter::repeat_n(b, n));
        }
        let diag = block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let lower = block_sizes.windows(2).map(|w| DMatrix::zeros(w[1], w[0])).collect();
        Self {
            offsets,
            block_of,
            diag,
            lower,
        }
    }

    pub fn dim(&self) -> usize {
        self.block_of.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn clear(&mut self) {
        self.diag.iter_mut().for_each(|m| m.fill(0.0));
        self.lower.iter_mut().for_each(|m| m.fill(0.0));
    }

    pub fn scale(&mut self, w: f64) {
        self.diag.iter_mut().for_each(|m| *m *= w);
        self.lower.iter_mut().for_each(|m| *m *= w);
    }

    /// Whether `r` and `c` may share a nonzero entry.
    pub fn couples(&self, r: usize, c: usize) -> bool {
        self.block_of[r].abs_diff(self.block_of[c]) <= 1
    }

    /// Adds `v` to entry `(r, c)`. Callers add both `(r, c)` and `(c, r)` for
    /// off-diagonal pairs, exactly as for a dense symmetric matrix.
    ///
    /// # Panics
    /// If `r` and `c` belong to blocks more than one apart.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (br, bc) = (self.block_of[r], self.block_of[c]);
        if br == bc {
            let o = self.offsets[br];
            self.diag[br][(r - o, c - o)] += v;
        } else if br == bc + 1 {
            self.lower[bc][(r - self.offsets[br], c - self.offsets[bc])] += v;
        } else if bc != br + 1 {
            panic!("entry ({r}, {c}) lies outside the block-tridiagonal band");
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (br, bc) = (self.block_of[r], self.block_of[c]);
        if br == bc {
            let o = self.offsets[br];
            self.diag[br][(r - o, c - o)]
        } else if br == bc + 1 {
            self.lower[bc][(r - self.offsets[br], c - self.offsets[bc])]
        } else if bc == br + 1 {
            self.lower[br][(c - self.offsets[bc], r - self.offsets[br])]
        } else {
            0.0
        }
    }

    /// Largest absolute diagonal entry.
    pub fn diag_scale(&self) -> f64 {
        self.diag
            .iter()
            .flat_map(|m| m.diagonal().iter().copied().collect::<Vec<_>>())
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (b, d) in self.diag.iter().enumerate() {
            let o = self.offsets[b];
            m.view_mut((o, o), d.shape()).copy_from(d);
        }
        for (b, l) in self.lower.iter().enumerate() {
            let (r0, c0) = (self.offsets[b + 1], self.offsets[b]);
            m.view_mut((r0, c0), l.shape()).copy_from(l);
            m.view_mut((c0, r0), (l.ncols(), l.nrows())).copy_from(&l.transpose());
        }
        m
    }

    /// Solves `(shift * I - H) x = rhs` by block Cholesky. Returns `None` when
    /// the shifted negated matrix is not positive definite.
    pub fn solve_negated(&self, rhs: &[f64], shift: f64) -> Option<Vec<f64>> {
        let nb = self.num_blocks();
        let mut factors: Vec<DMatrix<f64>> = Vec::with_capacity(nb);
        let mut couplings: Vec<DMatrix<f64>> = Vec::with_capacity(nb.saturating_sub(1));
        for b in 0..nb {
            let mut d = -&self.diag[b];
            for i in 0..d.nrows() {
                d[(i, i)] += shift;
            }
            if b > 0 {
                // Off-diagonal block of the negated matrix is -lower.
                let c = -&self.lower[b - 1];
                let prev = &factors[b - 1];
                let xt = prev.solve_lower_triangular(&c.transpose())?;
                let x = xt.transpose();
                d -= &x * x.transpose();
                couplings.push(x);
            }
            let chol = Cholesky::new(d)?;
            factors.push(chol.l());
        }
        // Forward substitution.
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(nb);
        for b in 0..nb {
            let (o, e) = (self.offsets[b], self.offsets[b + 1]);
            let mut r = DVector::from_column_slice(&rhs[o..e]);
            if b > 0 {
                r -= &couplings[b - 1] * &y[b - 1];
            }
            y.push(factors[b].solve_lower_triangular(&r)?);
        }
        // Backward substitution.
        let mut x = vec![0.0; self.dim()];
        let mut next: Option<DVector<f64>> = None;
        for b in (0..nb).rev() {
            let mut r = y[b].clone();
            if let Some(xn) = &next {
                r -= couplings[b].transpose() * xn;
            }
            let xb = factors[b].tr_solve_lower_triangular(&r)?;
            x[self.offsets[b]..self.offsets[b + 1]].copy_from_slice(xb.as_slice());
            next = Some(xb);
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}
