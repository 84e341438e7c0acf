//! Dense matrices over a small prime field F_l, with exact rank / kernel
//! computations by Gauss-Jordan elimination.
//!
//! Entries are stored row-major as `u8` (so l <= 251). Elimination pivots are
//! chosen deterministically (first nonzero in column order), which makes every
//! kernel basis reproducible across runs and platforms.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FpError {
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("modulus mismatch: {0} vs {1}")]
    Modulus(u16, u16),
    #[error("operator does not preserve cuspidal subspace")]
    NotCuspidalInvariant,
    #[error("empty matrix list")]
    EmptyList,
}

/// Reduction context: Barrett-style reduction of values < 2^16 modulo l.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FpCtx {
    pub l: u16,
    magic: u32,
}

impl FpCtx {
    pub fn new(l: u16) -> Self {
        assert!(l >= 2, "modulus must be at least 2");
        FpCtx {
            l,
            magic: (1u32 << 16) / l as u32,
        }
    }

    /// Reduce x < 2^16 modulo l.
    #[inline(always)]
    pub fn red(self, x: u32) -> u8 {
        debug_assert!(x < 1 << 16);
        let q = (x * self.magic) >> 16;
        let mut r = x - q * self.l as u32;
        if r >= self.l as u32 {
            r -= self.l as u32;
        }
        r as u8
    }

    /// Reduce an arbitrary u32 (used after long accumulations).
    #[inline(always)]
    pub fn red32(self, x: u32) -> u8 {
        (x % self.l as u32) as u8
    }

    #[inline(always)]
    pub fn neg(self, x: u8) -> u8 {
        if x == 0 {
            0
        } else {
            (self.l as u8) - x
        }
    }

    pub fn inv(self, x: u8) -> u8 {
        crate::arith::invmod(x as u64, self.l as u64) as u8
    }
}

/// Exact dense matrix over F_l. Vectors are column vectors: a matrix acts by
/// `m * v`, and `kernel_basis` returns `{x : m * x = 0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpMatrix {
    l: u16,
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl FpMatrix {
    pub fn zeros(l: u16, rows: usize, cols: usize) -> Self {
        assert!(l >= 2 && l <= 251 && crate::arith::is_prime(l as u64));
        FpMatrix {
            l,
            rows,
            cols,
            data: vec![0u8; rows * cols],
        }
    }

    pub fn identity(l: u16, n: usize) -> Self {
        let mut m = Self::zeros(l, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(l: u16, rows: Vec<Vec<u8>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(l, r, c);
        for (i, row) in rows.into_iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.into_iter().enumerate() {
                assert!((v as u16) < l);
                m.data[i * c + j] = v;
            }
        }
        m
    }

    pub fn modulus(&self) -> u16 {
        self.l
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    #[inline(always)]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        debug_assert!((v as u16) < self.l);
        self.data[r * self.cols + c] = v;
    }

    #[inline(always)]
    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline(always)]
    pub fn row_mut(&mut self, r: usize) -> &mut [u8] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn column(&self, j: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.get(r, j)).collect()
    }

    pub fn from_columns(l: u16, rows: usize, cols: &[Vec<u8>]) -> FpMatrix {
        let mut m = FpMatrix::zeros(l, rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (r, &v) in col.iter().enumerate() {
                m.set(r, j, v);
            }
        }
        m
    }

    pub fn transpose(&self) -> FpMatrix {
        let mut t = FpMatrix::zeros(self.l, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// self - e * I (square matrices only).
    pub fn sub_scalar_identity(&self, e: u8) -> FpMatrix {
        assert_eq!(self.rows, self.cols);
        let ctx = FpCtx::new(self.l);
        let mut m = self.clone();
        for i in 0..self.rows {
            let v = m.get(i, i) as u32 + ctx.neg(ctx.red32(e as u32)) as u32;
            m.data[i * self.cols + i] = ctx.red(v);
        }
        m
    }

    /// self - s * other, entrywise.
    pub fn sub_scaled(&self, other: &FpMatrix, s: u8) -> FpMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        assert_eq!(self.l, other.l);
        let ctx = FpCtx::new(self.l);
        let mult = ctx.neg(ctx.red32(s as u32)) as u32;
        let mut m = self.clone();
        for (a, &b) in m.data.iter_mut().zip(&other.data) {
            *a = ctx.red(*a as u32 + mult * b as u32);
        }
        m
    }

    /// Matrix product self * other.
    pub fn mul(&self, other: &FpMatrix) -> Result<FpMatrix, FpError> {
        if self.l != other.l {
            return Err(FpError::Modulus(self.l, other.l));
        }
        if self.cols != other.rows {
            return Err(FpError::Shape(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let ctx = FpCtx::new(self.l);
        let mut out = FpMatrix::zeros(self.l, self.rows, other.cols);
        let mut acc = vec![0u32; other.cols];
        for i in 0..self.rows {
            acc.fill(0);
            for t in 0..self.cols {
                let a = self.get(i, t) as u32;
                if a == 0 {
                    continue;
                }
                let orow = other.row(t);
                for (s, &b) in acc.iter_mut().zip(orow) {
                    *s += a * b as u32;
                }
            }
            let orow = out.row_mut(i);
            for (o, &s) in orow.iter_mut().zip(&acc) {
                *o = ctx.red32(s);
            }
        }
        Ok(out)
    }

    /// Matrix-vector product self * v.
    pub fn mul_vec(&self, v: &[u8]) -> Vec<u8> {
        assert_eq!(v.len(), self.cols);
        let ctx = FpCtx::new(self.l);
        (0..self.rows)
            .map(|i| {
                let mut s: u64 = 0;
                for (a, &b) in self.row(i).iter().zip(v) {
                    s += *a as u64 * b as u64;
                }
                (s % self.l as u64) as u8
            })
            .collect()
    }

    /// In-place reduced row echelon form; returns the pivot columns.
    fn rref(&mut self) -> Vec<usize> {
        let ctx = FpCtx::new(self.l);
        let mut pivots = Vec::new();
        let mut cur = 0usize;
        for c in 0..self.cols {
            if cur == self.rows {
                break;
            }
            let Some(pr) = (cur..self.rows).find(|&r| self.get(r, c) != 0) else {
                continue;
            };
            if pr != cur {
                let (a, b) = self.data.split_at_mut(pr * self.cols);
                a[cur * self.cols..(cur + 1) * self.cols].swap_with_slice(&mut b[..self.cols]);
            }
            let inv = ctx.inv(self.get(cur, c));
            if inv != 1 {
                let row = self.row_mut(cur);
                for x in row.iter_mut() {
                    *x = ctx.red(*x as u32 * inv as u32);
                }
            }
            // eliminate everywhere else in column c
            for r in 0..self.rows {
                if r == cur {
                    continue;
                }
                let f = self.get(r, c);
                if f == 0 {
                    continue;
                }
                let mult = ctx.neg(f) as u32;
                let (lo, hi) = if r < cur { (r, cur) } else { (cur, r) };
                let (head, tail) = self.data.split_at_mut(hi * self.cols);
                let prow: &[u8];
                let trow: &mut [u8];
                if r < cur {
                    trow = &mut head[lo * self.cols..(lo + 1) * self.cols];
                    prow = &tail[..self.cols];
                } else {
                    prow = &head[lo * self.cols..(lo + 1) * self.cols];
                    trow = &mut tail[..self.cols];
                }
                for (t, &p) in trow.iter_mut().zip(prow) {
                    *t = ctx.red(*t as u32 + mult * p as u32);
                }
            }
            pivots.push(c);
            cur += 1;
        }
        pivots
    }

    /// Exact rank over F_l.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Basis of the right kernel {x : self * x = 0}. Columns of the returned
    /// matrix are the basis vectors; also returns the pivot columns of the
    /// RREF (the "bound" coordinates).
    pub fn kernel_basis_with_pivots(&self) -> (Vec<usize>, FpMatrix) {
        let ctx = FpCtx::new(self.l);
        let mut m = self.clone();
        let pivots = m.rref();
        let pivot_set: Vec<bool> = {
            let mut s = vec![false; self.cols];
            for &p in &pivots {
                s[p] = true;
            }
            s
        };
        let free: Vec<usize> = (0..self.cols).filter(|&c| !pivot_set[c]).collect();
        let mut basis = FpMatrix::zeros(self.l, self.cols, free.len());
        for (j, &f) in free.iter().enumerate() {
            basis.set(f, j, 1);
            for (r, &p) in pivots.iter().enumerate() {
                let v = m.get(r, f);
                if v != 0 {
                    basis.set(p, j, ctx.neg(v));
                }
            }
        }
        (pivots, basis)
    }

    pub fn kernel_basis(&self) -> FpMatrix {
        self.kernel_basis_with_pivots().1
    }

    pub fn kernel_dim(&self) -> usize {
        self.cols - self.rank()
    }
}

/// Dimension and basis of the intersection of the kernels of `mats`
/// (equivalently, the kernel of the vertically stacked matrix).
pub fn stacked_kernel(mats: &[&FpMatrix]) -> Result<(usize, FpMatrix), FpError> {
    let first = mats.first().ok_or(FpError::EmptyList)?;
    let (l, cols) = (first.modulus(), first.cols());
    for m in mats {
        if m.modulus() != l {
            return Err(FpError::Modulus(l, m.modulus()));
        }
        if m.cols() != cols {
            return Err(FpError::Shape(format!(
                "stacked_kernel: {} cols vs {}",
                m.cols(),
                cols
            )));
        }
    }
    let total: usize = mats.iter().map(|m| m.rows()).sum();
    let mut stack = FpMatrix::zeros(l, total, cols);
    let mut at = 0usize;
    for m in mats {
        stack.data[at * cols..(at + m.rows()) * cols].copy_from_slice(&m.data);
        at += m.rows();
    }
    let basis = stack.kernel_basis();
    Ok((basis.cols(), basis))
}
