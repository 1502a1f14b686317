//! Dense matrix kernels: partial-pivot row selection, determinants and the
//! maxvol algorithm for locating a dominant `R x R` submatrix of an `N x R`
//! matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Relative pivot threshold used to declare a column numerically dependent.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Default dominance tolerance for [`maxvol`].
pub const DEFAULT_TAU: f64 = 0.01;

/// Default iteration cap for [`maxvol`].
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values supplied for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// Builds a matrix by evaluating `f(row, col)` for every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Gathers the given rows, in the given order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { rows: indices.len(), cols: self.cols, data }
    }

    /// Largest absolute entry, `0.0` for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Returns the position of the first non-finite entry.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / self.cols, p % self.cols))
    }

    fn ensure_finite(&self) -> Result<()> {
        match self.find_non_finite() {
            Some((row, col)) => Err(Error::NonFinite { row, col }),
            None => Ok(()),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }
}

/// Outcome of [`maxvol`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxvolResult {
    /// Selected rows, sorted ascending.
    pub row_indices: Vec<usize>,
    /// `C = A * inv(A[row_indices])`; its rows at `row_indices` are the identity.
    pub coefficients: DenseMatrix,
    /// Number of row swaps performed.
    pub iterations_used: usize,
    /// `true` when every `|C[i, j]| <= 1 + tau` on return.
    pub converged: bool,
}

/// One row exchange performed by [`maxvol_observed`].
#[derive(Debug, Clone)]
pub struct SwapEvent<'a> {
    pub iteration: usize,
    /// Row entering the selection.
    pub row: usize,
    /// Slot of the selection being replaced.
    pub slot: usize,
    /// Factor by which `|det|` of the selected submatrix grows (`|C[row, slot]|`).
    pub growth: f64,
    /// Selection after the swap, in slot order.
    pub row_indices: &'a [usize],
}

fn column_norm(a: &DenseMatrix, col: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows {
        let v = a.get(i, col);
        s += v * v;
    }
    libm::sqrt(s)
}

/// Returns the pivot rows of a partially pivoted LU factorization of the
/// `N x R` matrix `a`, in pivot order.
///
/// Fails with [`Error::RankDeficient`] naming the first column whose best
/// remaining pivot is below `1e-12` of that column's norm.
pub fn lu_pivot_init(a: &DenseMatrix) -> Result<Vec<usize>> {
    check_tall(a)?;
    a.ensure_finite()?;
    let (n, r) = (a.rows, a.cols);
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..r {
        let tol = PIVOT_RTOL * column_norm(a, j);
        let (mut best, mut best_abs) = (j, -1.0);
        for p in j..n {
            let v = work.get(perm[p], j).abs();
            if v > best_abs {
                best = p;
                best_abs = v;
            }
        }
        if best_abs <= tol {
            return Err(Error::RankDeficient { column: j });
        }
        perm.swap(j, best);
        eliminate(&mut work, &perm, j);
    }
    perm.truncate(r);
    Ok(perm)
}

/// Partial-pivot row selection that never fails.
///
/// Columns whose best remaining pivot is numerically zero are skipped, so the
/// result may hold fewer than `a.cols()` rows. Used as the fallback when
/// [`maxvol`] rejects a rank-deficient matrix.
pub fn greedy_pivot_rows(a: &DenseMatrix) -> Vec<usize> {
    let (n, r) = (a.rows, a.cols);
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut chosen = 0;
    for j in 0..r {
        if chosen == n {
            break;
        }
        let tol = PIVOT_RTOL * column_norm(a, j);
        let (mut best, mut best_abs) = (chosen, -1.0);
        for p in chosen..n {
            let v = work.get(perm[p], j).abs();
            if v > best_abs {
                best = p;
                best_abs = v;
            }
        }
        if !(best_abs > tol) {
            continue;
        }
        perm.swap(chosen, best);
        let pivot_row = perm[chosen];
        let pivot = work.get(pivot_row, j);
        for p in chosen + 1..n {
            let i = perm[p];
            let l = work.get(i, j) / pivot;
            if l != 0.0 {
                for c in j..r {
                    let v = work.get(i, c) - l * work.get(pivot_row, c);
                    work.set(i, c, v);
                }
            }
        }
        chosen += 1;
    }
    perm.truncate(chosen);
    perm
}

fn eliminate(work: &mut DenseMatrix, perm: &[usize], j: usize) {
    let pivot_row = perm[j];
    let pivot = work.get(pivot_row, j);
    for &i in &perm[j + 1..] {
        let l = work.get(i, j) / pivot;
        if l == 0.0 {
            continue;
        }
        for c in j..work.cols {
            let v = work.get(i, c) - l * work.get(pivot_row, c);
            work.set(i, c, v);
        }
    }
}

fn check_tall(a: &DenseMatrix) -> Result<()> {
    if a.cols == 0 || a.rows < a.cols {
        return Err(Error::Dimension(format!(
            "expected an N x R matrix with N >= R >= 1, got {}x{}",
            a.rows, a.cols
        )));
    }
    Ok(())
}

/// Absolute value of the determinant of a square matrix.
pub fn abs_det(square: &DenseMatrix) -> Result<f64> {
    if !square.is_square() {
        return Err(Error::Dimension(format!(
            "determinant of a non-square {}x{} matrix",
            square.rows, square.cols
        )));
    }
    square.ensure_finite()?;
    let n = square.rows;
    let mut work = square.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut det = 1.0;
    for j in 0..n {
        let (mut best, mut best_abs) = (j, -1.0);
        for p in j..n {
            let v = work.get(perm[p], j).abs();
            if v > best_abs {
                best = p;
                best_abs = v;
            }
        }
        if best_abs == 0.0 {
            return Ok(0.0);
        }
        perm.swap(j, best);
        det *= best_abs;
        eliminate(&mut work, &perm, j);
    }
    Ok(det)
}

/// Inverse through Gauss-Jordan elimination with partial pivoting.
fn invert(square: &DenseMatrix) -> Result<DenseMatrix> {
    let n = square.rows;
    let mut a = square.clone();
    let mut inv = DenseMatrix::identity(n);
    for j in 0..n {
        let mut best = j;
        for i in j + 1..n {
            if a.get(i, j).abs() > a.get(best, j).abs() {
                best = i;
            }
        }
        let pivot = a.get(best, j);
        if pivot == 0.0 {
            return Err(Error::RankDeficient { column: j });
        }
        if best != j {
            for c in 0..n {
                let (x, y) = (a.get(j, c), a.get(best, c));
                a.set(j, c, y);
                a.set(best, c, x);
                let (x, y) = (inv.get(j, c), inv.get(best, c));
                inv.set(j, c, y);
                inv.set(best, c, x);
            }
        }
        for c in 0..n {
            a.set(j, c, a.get(j, c) / pivot);
            inv.set(j, c, inv.get(j, c) / pivot);
        }
        for i in 0..n {
            if i == j {
                continue;
            }
            let l = a.get(i, j);
            if l == 0.0 {
                continue;
            }
            for c in 0..n {
                a.set(i, c, a.get(i, c) - l * a.get(j, c));
                inv.set(i, c, inv.get(i, c) - l * inv.get(j, c));
            }
        }
    }
    Ok(inv)
}

/// Finds a dominant `R x R` submatrix of the `N x R` matrix `a`.
///
/// Starts from the LU pivot rows and repeatedly swaps in the row holding the
/// largest `|C[i, j]|` (ties: smallest `i`, then `j`) until no coefficient
/// exceeds `1 + tau` or `max_iters` swaps were made.
pub fn maxvol(a: &DenseMatrix, tau: f64, max_iters: usize) -> Result<MaxvolResult> {
    maxvol_observed(a, tau, max_iters, &mut |_| {})
}

/// [`maxvol`] with a callback invoked after every swap.
pub fn maxvol_observed(
    a: &DenseMatrix,
    tau: f64,
    max_iters: usize,
    observer: &mut dyn FnMut(&SwapEvent<'_>),
) -> Result<MaxvolResult> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::InvalidInput(format!("maxvol tolerance must be >= 0, got {tau}")));
    }
    if max_iters == 0 {
        return Err(Error::InvalidInput("maxvol needs max_iters >= 1".into()));
    }
    let mut rows = lu_pivot_init(a)?;
    let (n, r) = (a.rows, a.cols);
    let inv = invert(&a.select_rows(&rows))?;
    let mut coef = a.matmul(&inv)?;
    for (slot, &i) in rows.iter().enumerate() {
        set_unit_row(&mut coef, i, slot);
    }

    let bound = 1.0 + tau;
    let mut iterations = 0;
    let mut col_j = vec![0.0; n];
    let mut row_i = vec![0.0; r];
    let converged = loop {
        let (mut bi, mut bj, mut big) = (0, 0, -1.0);
        for i in 0..n {
            for (j, v) in coef.row(i).iter().enumerate() {
                if v.abs() > big {
                    big = v.abs();
                    bi = i;
                    bj = j;
                }
            }
        }
        if big <= bound {
            break true;
        }
        if iterations == max_iters {
            break false;
        }
        let pivot = coef.get(bi, bj);
        for (k, c) in col_j.iter_mut().enumerate() {
            *c = coef.get(k, bj);
        }
        row_i.copy_from_slice(coef.row(bi));
        row_i[bj] -= 1.0;
        for (k, &ck) in col_j.iter().enumerate() {
            if ck == 0.0 {
                continue;
            }
            let scale = ck / pivot;
            for (dst, &src) in coef.row_mut(k).iter_mut().zip(&row_i) {
                *dst -= scale * src;
            }
        }
        rows[bj] = bi;
        set_unit_row(&mut coef, bi, bj);
        iterations += 1;
        observer(&SwapEvent {
            iteration: iterations,
            row: bi,
            slot: bj,
            growth: big,
            row_indices: &rows,
        });
    };

    // Report the selection sorted; permuting the slots permutes columns of C.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by_key(|&s| rows[s]);
    let coefficients = DenseMatrix::from_fn(n, r, |i, j| coef.get(i, order[j]));
    let row_indices = order.iter().map(|&s| rows[s]).collect();
    Ok(MaxvolResult { row_indices, coefficients, iterations_used: iterations, converged })
}

fn set_unit_row(m: &mut DenseMatrix, row: usize, slot: usize) {
    for (j, v) in m.row_mut(row).iter_mut().enumerate() {
        *v = if j == slot { 1.0 } else { 0.0 };
    }
}
