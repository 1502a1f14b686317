//! Exact fixed-point storage for QUBO coefficients.
//!
//! Every finite `f64` is `m * 2^e` with an odd integer `m`. When the exponents
//! of all entries fit a common window, the matrix is stored as integers
//! `K[i][j] = Q[i][j] / 2^scale` and quadratic forms are accumulated exactly in
//! `i128`. The exact sum is rounded to `f64` once, so any summation order or
//! decomposition yields bit-identical values.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Sub};

/// Coefficient storage of a QUBO matrix (full, symmetric, row-major).
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Storage {
    /// Integers below `2^62` in magnitude. Any `chunk` of them sum without
    /// overflowing `i64`.
    Narrow { scale: i32, chunk: usize, entries: Vec<i64> },
    /// Integers that need more than 63 bits but still leave headroom in `i128`.
    Wide { scale: i32, entries: Vec<i128> },
    /// Dynamic range too large for exact accumulation; plain `f64` sums.
    Float(Vec<f64>),
}

/// Accumulator arithmetic shared by the exact and floating storages.
pub(crate) trait Acc: Copy + PartialOrd + Add<Output = Self> + AddAssign + Sub<Output = Self> {
    const ZERO: Self;
    fn twice(self) -> Self {
        self + self
    }
}

impl Acc for i128 {
    const ZERO: Self = 0;
}

impl Acc for f64 {
    const ZERO: Self = 0.0;
}

pub(crate) trait Elem: Copy + Send + Sync {
    type A: Acc;
    fn acc(self) -> Self::A;

    /// `sum_{j in idx} row[j]`.
    #[inline]
    fn gather_sum(row: &[Self], idx: &[usize], _chunk: usize) -> Self::A {
        let mut t = Self::A::ZERO;
        for &j in idx {
            t += row[j].acc();
        }
        t
    }
}

impl Elem for i64 {
    type A = i128;
    #[inline(always)]
    fn acc(self) -> i128 {
        self as i128
    }

    #[inline]
    fn gather_sum(row: &[i64], idx: &[usize], chunk: usize) -> i128 {
        let mut t = 0i128;
        for part in idx.chunks(chunk) {
            let mut s = 0i64;
            for &j in part {
                s += row[j];
            }
            t += s as i128;
        }
        t
    }
}

impl Elem for i128 {
    type A = i128;
    #[inline(always)]
    fn acc(self) -> i128 {
        self
    }
}

impl Elem for f64 {
    type A = f64;
    #[inline(always)]
    fn acc(self) -> f64 {
        self
    }
}

/// Borrowed view of the coefficient matrix with a concrete element type.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, E> {
    pub n: usize,
    pub entries: &'a [E],
    /// Number of entries that may be summed in `E` before widening.
    pub chunk: usize,
}

impl<'a, E: Elem> View<'a, E> {
    #[inline(always)]
    pub fn row(&self, i: usize) -> &'a [E] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// `sum_{i,j in support} K[i][j]` for an ascending support list.
    pub fn energy(&self, support: &[usize]) -> E::A {
        let mut total = E::A::ZERO;
        for (a, &i) in support.iter().enumerate() {
            let row = self.row(i);
            total += row[i].acc() + E::gather_sum(row, &support[..a], self.chunk).twice();
        }
        total
    }

    /// Energy change of flipping variable `i`, given the local field
    /// `field[i] = sum_j K[i][j] x_j` and the current bit.
    #[inline]
    pub fn flip_delta(&self, field: E::A, i: usize, bit: bool) -> E::A {
        let kii = self.row(i)[i].acc();
        if bit {
            // 1 -> 0 removes K_ii + 2 * sum_{j != i} K_ij x_j
            E::A::ZERO - ((field - kii).twice() + kii)
        } else {
            field.twice() + kii
        }
    }
}

/// Splits a finite non-zero value into `(m, e)` with `v = m * 2^e` and `m` odd.
fn decompose(v: f64) -> (i64, i32) {
    let bits = v.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp_bits == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp_bits - 1075) };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i32;
    let m = m as i64;
    (if v < 0.0 { -m } else { m }, e)
}

fn fixed_i64((m, e): (i64, i32), scale: i32) -> i64 {
    if m == 0 {
        0
    } else {
        m << (e - scale)
    }
}

fn bit_len(m: i64) -> i32 {
    64 - m.unsigned_abs().leading_zeros() as i32
}

impl Storage {
    /// Chooses the narrowest exact representation that `values` allow.
    pub fn from_values(n: usize, values: Vec<f64>) -> Self {
        let nonzero = || values.iter().filter(|v| **v != 0.0).map(|&v| decompose(v));
        let scale = match nonzero().map(|p| p.1).min() {
            Some(s) => s,
            None => return Storage::Narrow { scale: 0, chunk: usize::MAX, entries: alloc::vec![0; values.len()] },
        };
        let width = nonzero().map(|(m, e)| bit_len(m) + (e - scale)).max().unwrap_or(0);
        let log_n = (usize::BITS - n.max(1).leading_zeros()) as i32;
        let fixed = |v: f64| if v == 0.0 { (0, 0) } else { decompose(v) };
        if width <= 62 {
            // Same size and alignment, so the allocation is reused.
            let entries = values.into_iter().map(|v| fixed_i64(fixed(v), scale)).collect();
            let chunk = 1usize.checked_shl((62 - width) as u32).unwrap_or(usize::MAX);
            Storage::Narrow { scale, chunk, entries }
        } else if width + 2 * log_n + 2 <= 126 {
            let entries = values
                .iter()
                .map(|&v| match fixed(v) {
                    (0, _) => 0,
                    (m, e) => (m as i128) << (e - scale),
                })
                .collect();
            Storage::Wide { scale, entries }
        } else {
            Storage::Float(values)
        }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self, Storage::Float(_))
    }

    pub fn entry(&self, idx: usize) -> f64 {
        match self {
            Storage::Narrow { scale, entries, .. } => libm::scalbn(entries[idx] as f64, *scale),
            Storage::Wide { scale, entries } => libm::scalbn(entries[idx] as f64, *scale),
            Storage::Float(v) => v[idx],
        }
    }
}

/// Rounds an exact accumulator back to `f64`.
#[inline]
pub(crate) fn exact_to_f64(acc: i128, scale: i32) -> f64 {
    libm::scalbn(acc as f64, scale)
}

/// Runs `$body` with `$view` bound to a typed [`View`] of the storage and
/// `$conv` to a closure turning its accumulator into `f64`.
macro_rules! with_view {
    ($storage:expr, $n:expr, |$view:ident, $conv:ident| $body:expr) => {
        match $storage {
            $crate::qubo::exact::Storage::Narrow { scale, chunk, entries } => {
                let s = *scale;
                let $view = $crate::qubo::exact::View { n: $n, entries: &entries[..], chunk: *chunk };
                let $conv = move |a: i128| $crate::qubo::exact::exact_to_f64(a, s);
                $body
            }
            $crate::qubo::exact::Storage::Wide { scale, entries } => {
                let s = *scale;
                let $view = $crate::qubo::exact::View { n: $n, entries: &entries[..], chunk: usize::MAX };
                let $conv = move |a: i128| $crate::qubo::exact::exact_to_f64(a, s);
                $body
            }
            $crate::qubo::exact::Storage::Float(entries) => {
                let $view = $crate::qubo::exact::View { n: $n, entries: &entries[..], chunk: usize::MAX };
                let $conv = |a: f64| a;
                $body
            }
        }
    };
}
pub(crate) use with_view;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_roundtrip() {
        for v in [1.0, -3.0, 0.1, 1e-300, -2.5e10, f64::MIN_POSITIVE / 8.0, f64::MAX] {
            let (m, e) = decompose(v);
            assert!(m % 2 != 0);
            assert_eq!(libm::scalbn(m as f64, e), v);
        }
    }

    #[test]
    fn chooses_representation() {
        assert!(matches!(Storage::from_values(2, alloc::vec![1.0, 0.5, 0.5, -2.0]), Storage::Narrow { scale: -1, .. }));
        assert!(matches!(Storage::from_values(1, alloc::vec![0.0]), Storage::Narrow { .. }));
        // 0.001 (53 significant bits, ulp 2^-62) next to 1e5 needs ~79 bits.
        assert!(matches!(Storage::from_values(2, alloc::vec![0.001, 1e5, 1e5, 3.0]), Storage::Wide { .. }));
        assert!(matches!(Storage::from_values(2, alloc::vec![1e-30, 1e30, 1e30, 0.0]), Storage::Float(_)));
        let vals = alloc::vec![0.001, 1e5, 1e5, 3.0];
        let s = Storage::from_values(2, vals.clone());
        for (i, v) in vals.iter().enumerate() {
            assert_eq!(s.entry(i), *v);
        }
    }
}
