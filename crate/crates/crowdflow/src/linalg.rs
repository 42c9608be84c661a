//! Sparse and banded linear algebra for the discretized systems.
//!
//! The discontinuous Galerkin systems are assembled into compressed sparse
//! row matrices whose sparsity pattern is fixed by the mesh, so patterns are
//! built once and values are refilled every pseudo-time step. Interval meshes
//! produce narrow bands and are solved by a banded LU factorization with
//! partial pivoting; triangulated meshes are solved by BiCGStab with a
//! block-Jacobi preconditioner, warm-started from the previous step.

// The factorization loops co-index flat matrix storage and mutate entries
// that later iterations read; explicit indices keep that data flow visible.
#![allow(clippy::needless_range_loop)]

use thiserror::Error;

/// Errors raised by the direct and iterative solvers.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision at column {col}")]
    Singular { col: usize },
    #[error("iterative solver stalled: residual {residual:.3e} after {iters} iterations (target {target:.3e})")]
    NotConverged { residual: f64, target: f64, iters: usize },
    #[error("dimension mismatch: matrix is {n}x{n} but vector has length {len}")]
    DimensionMismatch { n: usize, len: usize },
    #[error("block size {block} does not divide matrix dimension {n}")]
    BadBlockSize { block: usize, n: usize },
}

/// Square sparse matrix in compressed sparse row form.
///
/// The pattern (`indptr`, `indices`) is immutable after construction; values
/// are updated in place through [`CsrMatrix::set_zero`] and
/// [`CsrMatrix::add_at`]. Column indices are strictly increasing within each
/// row, which makes per-entry lookup a binary search.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from the given coupling pattern, with all values zero.
    ///
    /// `pairs` lists the (row, col) positions that may ever be written;
    /// duplicates are merged.
    pub fn from_pattern(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in pairs {
            assert!(i < n && j < n, "pattern entry ({i},{j}) out of range for n={n}");
            per_row[i].push(j);
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for row in &mut per_row {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            indptr.push(indices.len());
        }
        let vals = vec![0.0; indices.len()];
        CsrMatrix { n, indptr, indices, vals }
    }

    /// Builds a matrix by summing triplets.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let pairs: Vec<(usize, usize)> = triplets.iter().map(|&(i, j, _)| (i, j)).collect();
        let mut m = Self::from_pattern(n, &pairs);
        for &(i, j, v) in triplets {
            m.add_at(i, j, v);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Resets all stored values to zero without touching the pattern.
    pub fn set_zero(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.indices[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    /// Adds `v` to entry (i, j). The position must exist in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) is not in the sparsity pattern"));
        self.vals[k] += v;
    }

    /// Reads entry (i, j), returning zero for positions outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    /// Iterates over `(row, col, value)` of all stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |k| (i, self.indices[k], self.vals[k]))
        })
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.vals[k] * x[self.indices[k]];
            }
            y[i] = acc;
        }
    }

    /// Maximum of |i - j| over the pattern.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k];
                bw = bw.max(i.abs_diff(j));
            }
        }
        bw
    }

    /// Residual norm ||A x - b||_2.
    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut r = vec![0.0; self.n];
        self.mul_vec(x, &mut r);
        r.iter().zip(b).map(|(ri, bi)| (ri - bi) * (ri - bi)).sum::<f64>().sqrt()
    }
}

/// Banded matrix in column-major band storage with room for pivoting fill.
///
/// Entry (i, j) with `-ku <= i - j <= kl` lives at band row `kl + ku + i - j`
/// of column `j`; the extra `kl` rows above absorb fill from row swaps during
/// factorization.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    rows: usize,
}

impl BandedMatrix {
    pub fn zero(n: usize, kl: usize, ku: usize) -> Self {
        let rows = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, ab: vec![0.0; rows * n], rows }
    }

    #[inline]
    fn idx(&self, band_row: usize, col: usize) -> usize {
        col * self.rows + band_row
    }

    /// Adds `v` at (i, j); the position must be inside the declared band.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(
            j + self.kl >= i && i + self.ku >= j,
            "entry ({i},{j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let r = self.kl + self.ku + i - j;
        let k = self.idx(r, j);
        self.ab[k] += v;
    }

    pub fn set_zero(&mut self) {
        self.ab.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Copies the band structure of a CSR matrix into banded storage.
    pub fn fill_from_csr(&mut self, a: &CsrMatrix) {
        self.set_zero();
        for (i, j, v) in a.iter() {
            self.add_at(i, j, v);
        }
    }

    /// Factors the matrix in place as P A = L U with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu, LinalgError> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let mut p = j;
            let mut pmax = self.ab[self.idx(kl + ku, j)].abs();
            for i in (j + 1)..=last_row {
                let v = self.ab[self.idx(kl + ku + i - j, j)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(LinalgError::Singular { col: j });
            }
            ipiv[j] = p;
            let last_col = (j + ku + kl).min(n - 1);
            if p != j {
                for col in j..=last_col {
                    let a = self.idx(kl + ku + j - col, col);
                    let b = self.idx(kl + ku + p - col, col);
                    self.ab.swap(a, b);
                }
            }
            let piv = self.ab[self.idx(kl + ku, j)];
            for i in (j + 1)..=last_row {
                let mk = self.idx(kl + ku + i - j, j);
                let m = self.ab[mk] / piv;
                self.ab[mk] = m;
                if m != 0.0 {
                    for col in (j + 1)..=last_col {
                        let src = self.ab[self.idx(kl + ku + j - col, col)];
                        if src != 0.0 {
                            let dst = self.idx(kl + ku + i - col, col);
                            self.ab[dst] -= m * src;
                        }
                    }
                }
            }
        }
        Ok(BandedLu { mat: self, ipiv })
    }
}

/// LU factors of a [`BandedMatrix`], ready for repeated solves.
#[derive(Debug, Clone)]
pub struct BandedLu {
    mat: BandedMatrix,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Solves A x = b, overwriting `b` with the solution.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), LinalgError> {
        let n = self.mat.n;
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch { n, len: b.len() });
        }
        let (kl, ku) = (self.mat.kl, self.mat.ku);
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let last = (j + kl).min(n - 1);
                for i in (j + 1)..=last {
                    b[i] -= self.mat.ab[self.mat.idx(kl + ku + i - j, j)] * bj;
                }
            }
        }
        for i in (0..n).rev() {
            let last = (i + ku + kl).min(n - 1);
            let mut acc = b[i];
            for col in (i + 1)..=last {
                acc -= self.mat.ab[self.mat.idx(kl + ku + i - col, col)] * b[col];
            }
            b[i] = acc / self.mat.ab[self.mat.idx(kl + ku, i)];
        }
        Ok(())
    }
}

/// Inverse of the block diagonal of a CSR matrix, used as a preconditioner.
///
/// The matrix dimension must be a multiple of `block`; block `k` covers the
/// contiguous index range `k*block..(k+1)*block`.
#[derive(Debug)]
pub struct BlockJacobi {
    block: usize,
    inv: Vec<f64>,
}

impl BlockJacobi {
    pub fn new(a: &CsrMatrix, block: usize) -> Result<Self, LinalgError> {
        let n = a.n();
        if block == 0 || !n.is_multiple_of(block) {
            return Err(LinalgError::BadBlockSize { block, n });
        }
        let nb = n / block;
        let mut inv = vec![0.0; nb * block * block];
        let mut dense = vec![0.0; block * block];
        for bi in 0..nb {
            let base = bi * block;
            dense.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..block {
                for c in 0..block {
                    dense[r * block + c] = a.get(base + r, base + c);
                }
            }
            invert_small(&mut dense, block).map_err(|_| LinalgError::Singular { col: base })?;
            inv[bi * block * block..(bi + 1) * block * block].copy_from_slice(&dense);
        }
        Ok(BlockJacobi { block, inv })
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let b = self.block;
        let nb = x.len() / b;
        for bi in 0..nb {
            let m = &self.inv[bi * b * b..(bi + 1) * b * b];
            for r in 0..b {
                let mut acc = 0.0;
                for c in 0..b {
                    acc += m[r * b + c] * x[bi * b + c];
                }
                y[bi * b + r] = acc;
            }
        }
    }
}

/// Inverts a small row-major matrix in place by Gauss-Jordan with pivoting.
fn invert_small(m: &mut [f64], n: usize) -> Result<(), ()> {
    let mut aug = vec![0.0; n * 2 * n];
    for r in 0..n {
        for c in 0..n {
            aug[r * 2 * n + c] = m[r * n + c];
        }
        aug[r * 2 * n + n + r] = 1.0;
    }
    for col in 0..n {
        let mut p = col;
        let mut pmax = aug[col * 2 * n + col].abs();
        for r in (col + 1)..n {
            let v = aug[r * 2 * n + col].abs();
            if v > pmax {
                pmax = v;
                p = r;
            }
        }
        if pmax == 0.0 || !pmax.is_finite() {
            return Err(());
        }
        if p != col {
            for c in 0..2 * n {
                aug.swap(col * 2 * n + c, p * 2 * n + c);
            }
        }
        let piv = aug[col * 2 * n + col];
        for c in 0..2 * n {
            aug[col * 2 * n + c] /= piv;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r * 2 * n + col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        aug[r * 2 * n + c] -= f * aug[col * 2 * n + c];
                    }
                }
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            m[r * n + c] = aug[r * 2 * n + n + c];
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned BiCGStab with periodic restarts.
///
/// Iterates until the true residual satisfies
/// `||A x - b|| <= tol_rel * max(||b||, 1)`; the floor of one keeps the
/// target reachable when `b` itself is tiny. The recurrence is restarted
/// from the freshly computed residual every `n` steps (and on breakdown),
/// which cures the stagnation the plain recurrence suffers once the shadow
/// residual loses orthogonality. Returns the solution and the total
/// iteration count.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    precond: &BlockJacobi,
    tol_rel: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), LinalgError> {
    let n = a.n();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { n, len: b.len() });
    }
    let bnorm = norm(b);
    let target = tol_rel * bnorm.max(1.0);

    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(LinalgError::DimensionMismatch { n, len: x0.len() });
            }
            x0.to_vec()
        }
        None => vec![0.0; n],
    };

    let mut r = vec![0.0; n];
    let mut r0 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best = x.clone();
    let mut best_res = f64::INFINITY;
    let mut total = 0usize;
    let cycle = n.clamp(32, 512);

    'outer: while total < max_iter {
        // Fresh true residual for this cycle.
        a.mul_vec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let rn = norm(&r);
        if rn < best_res {
            best_res = rn;
            best.copy_from_slice(&x);
        }
        if rn <= target {
            return Ok((x, total));
        }
        r0.copy_from_slice(&r);
        let mut rho_prev = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        v.iter_mut().for_each(|z| *z = 0.0);
        p.iter_mut().for_each(|z| *z = 0.0);

        for it in 1..=cycle.min(max_iter - total) {
            let rho = dot(&r0, &r);
            if rho.abs() < 1e-300 {
                continue 'outer; // breakdown: restart from the true residual
            }
            if it == 1 {
                p.copy_from_slice(&r);
            } else {
                let beta = (rho / rho_prev) * (alpha / omega);
                for i in 0..n {
                    p[i] = r[i] + beta * (p[i] - omega * v[i]);
                }
            }
            precond.apply(&p, &mut phat);
            a.mul_vec(&phat, &mut v);
            let denom = dot(&r0, &v);
            if denom.abs() < 1e-300 {
                continue 'outer;
            }
            alpha = rho / denom;
            // s = r - alpha v, stored back into r.
            for i in 0..n {
                r[i] -= alpha * v[i];
            }
            total += 1;
            if norm(&r) <= target {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                if a.residual_norm(&x, b) <= target {
                    return Ok((x, total));
                }
                for i in 0..n {
                    x[i] -= alpha * phat[i];
                }
            }
            precond.apply(&r, &mut shat);
            a.mul_vec(&shat, &mut t);
            let tt = dot(&t, &t);
            if tt.abs() < 1e-300 {
                continue 'outer;
            }
            omega = dot(&t, &r) / tt;
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
            }
            for i in 0..n {
                r[i] -= omega * t[i];
            }
            let res = norm(&r);
            if res < best_res {
                best_res = res;
                best.copy_from_slice(&x);
            }
            if res <= target {
                let true_res = a.residual_norm(&x, b);
                if true_res <= target {
                    return Ok((x, total));
                }
            }
            if omega.abs() < 1e-300 {
                continue 'outer;
            }
            rho_prev = rho;
        }
        // Cycle exhausted; restart from the current iterate.
        x.copy_from_slice(&best);
    }
    let true_res = a.residual_norm(&best, b);
    if true_res <= target {
        return Ok((best, total));
    }
    Err(LinalgError::NotConverged { residual: true_res, target, iters: total })
}

/// Upper bound on bandwidth below which a direct banded solve is used.
pub const DIRECT_BAND_LIMIT: usize = 48;

/// Solves `A x = b`, picking the strategy from the sparsity pattern.
///
/// Narrow-band matrices (interval meshes) are factored directly; wide
/// patterns fall back to BiCGStab preconditioned by the inverse of the
/// `block`-sized diagonal blocks, warm-started from `x0`. The returned
/// solution always satisfies `||A x - b|| <= 1e-12 * max(||b||, 1)`.
pub fn solve_sparse(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    block: usize,
) -> Result<Vec<f64>, LinalgError> {
    let bw = a.bandwidth();
    if bw <= DIRECT_BAND_LIMIT {
        let mut band = BandedMatrix::zero(a.n(), bw, bw);
        band.fill_from_csr(a);
        let lu = band.factor()?;
        let mut x = b.to_vec();
        lu.solve_in_place(&mut x)?;
        Ok(x)
    } else {
        let pre = BlockJacobi::new(a, block)?;
        let (x, _) = bicgstab(a, b, x0, &pre, 1e-13, 20 * a.n())?;
        Ok(x)
    }
}
