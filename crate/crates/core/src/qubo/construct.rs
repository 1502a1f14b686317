//! Feature-selection QUBO construction.
//!
//! Two item-item similarity matrices (content-based and collaborative) are
//! compared entry by entry to form the item penalty matrix components, which
//! are projected onto features through the item content matrix:
//! `FPM = ICM^T (IPM_reward + beta * IPM_penalty) ICM`. A soft cardinality
//! constraint `s * (1^T x - p F)^2` turns the FPM into the final QUBO.

use alloc::format;
use alloc::vec::Vec;

use super::QuboProblem;
use crate::linalg::DenseMatrix;
use crate::{Error, Result};

/// Compressed sparse row matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Item-item similarity scores, `I x I`, non-negative.
pub type SimilarityMatrix = CsrMatrix;

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Explicit zeros are kept; repeated coordinates are an error.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut indptr = alloc::vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        for (k, &(i, j, v)) in sorted.iter().enumerate() {
            if i >= rows || j >= cols {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) outside a {rows}x{cols} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            if k > 0 && sorted[k - 1].0 == i && sorted[k - 1].1 == j {
                return Err(Error::InvalidInput(format!("duplicate entry ({i}, {j})")));
            }
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self { rows, cols, indptr, indices, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, indptr: alloc::vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(col, value)` pairs of row `i`, by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// Stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    /// Every stored value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m.set(i, j, v);
        }
        m
    }
}

/// A 0/1 matrix stored as the coordinates of its ones, e.g. the item content
/// matrix (`I x F`, entry 1 when item `i` has feature `f`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseBinaryMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl SparseBinaryMatrix {
    pub fn from_coords(rows: usize, cols: usize, coords: &[(usize, usize)]) -> Result<Self> {
        let mut sorted = coords.to_vec();
        sorted.sort_unstable();
        let mut indptr = alloc::vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        for (k, &(i, j)) in sorted.iter().enumerate() {
            if i >= rows || j >= cols {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) outside a {rows}x{cols} matrix")));
            }
            if k > 0 && sorted[k - 1] == (i, j) {
                return Err(Error::InvalidInput(format!("duplicate entry ({i}, {j})")));
            }
            indptr[i + 1] += 1;
            indices.push(j);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self { rows, cols, indptr, indices })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Columns holding a one in row `i`, ascending.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn coords(&self) -> Vec<(usize, usize)> {
        (0..self.rows).flat_map(|i| self.row(i).iter().map(move |&j| (i, j))).collect()
    }
}

/// Item penalty matrix split into its reward (`-1`) and penalty (`+1`) parts.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmComponents {
    pub reward: CsrMatrix,
    pub penalty: CsrMatrix,
}

/// Feature penalty matrix parts, `F x F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpmComponents {
    pub reward_part: DenseMatrix,
    pub penalty_part: DenseMatrix,
}

/// Soft constraint `s * (1^T x - p F)^2` steering the number of selected features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub strength: f64,
    pub target_fraction: f64,
}

impl ConstraintSpec {
    pub fn new(strength: f64, target_fraction: f64) -> Result<Self> {
        let c = Self { strength, target_fraction };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::InvalidInput(format!("strength must be finite and >= 0, got {}", self.strength)));
        }
        if !(0.0..=1.0).contains(&self.target_fraction) {
            return Err(Error::InvalidInput(format!(
                "target fraction must lie in [0, 1], got {}",
                self.target_fraction
            )));
        }
        Ok(())
    }
}

/// Compares the similarity matrices entry by entry. A pair similar under both
/// is rewarded, a pair similar only in content is penalized, and a pair whose
/// content similarity is at most `epsilon` is left alone.
pub fn build_ipm(s_cbf: &SimilarityMatrix, s_cf: &SimilarityMatrix, epsilon: f64) -> Result<IpmComponents> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let n = s_cbf.rows();
    for (name, m) in [("content", s_cbf), ("collaborative", s_cf)] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::Dimension(format!(
                "{name} similarity is {}x{}, expected {n}x{n}",
                m.rows(),
                m.cols()
            )));
        }
        if let Some((i, j, v)) = m.triplets().into_iter().find(|t| t.2 < 0.0) {
            return Err(Error::InvalidInput(format!("{name} similarity ({i}, {j}) is negative: {v}")));
        }
    }
    let mut reward = Vec::new();
    let mut penalty = Vec::new();
    for i in 0..n {
        // Only stored content entries can exceed epsilon.
        for (j, v) in s_cbf.row(i) {
            if v <= epsilon {
                continue;
            }
            if s_cf.get(i, j) > epsilon {
                reward.push((i, j, -1.0));
            } else {
                penalty.push((i, j, 1.0));
            }
        }
    }
    Ok(IpmComponents {
        reward: CsrMatrix::from_triplets(n, n, &reward)?,
        penalty: CsrMatrix::from_triplets(n, n, &penalty)?,
    })
}

/// `ICM^T * M * ICM` accumulated directly from the non-zeros of `M`.
fn project(icm: &SparseBinaryMatrix, m: &CsrMatrix) -> DenseMatrix {
    let f = icm.cols();
    let mut out = alloc::vec![0.0; f * f];
    for a in 0..m.rows() {
        let fa = icm.row(a);
        if fa.is_empty() {
            continue;
        }
        for (b, v) in m.row(a) {
            for &g in icm.row(b) {
                for &fi in fa {
                    out[fi * f + g] += v;
                }
            }
        }
    }
    DenseMatrix::new(f, f, out).expect("sizes match")
}

/// Projects both item penalty components onto features.
pub fn build_fpm(icm: &SparseBinaryMatrix, ipm: &IpmComponents) -> Result<FpmComponents> {
    let items = icm.rows();
    for (name, m) in [("reward", &ipm.reward), ("penalty", &ipm.penalty)] {
        if m.rows() != items || m.cols() != items {
            return Err(Error::Dimension(format!(
                "{name} component is {}x{} but the content matrix has {items} items",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok(FpmComponents { reward_part: project(icm, &ipm.reward), penalty_part: project(icm, &ipm.penalty) })
}

/// `reward_part + beta * penalty_part`.
pub fn assemble_fpm(parts: &FpmComponents, beta: f64) -> Result<DenseMatrix> {
    if !beta.is_finite() {
        return Err(Error::InvalidInput(format!("beta must be finite, got {beta}")));
    }
    let (r, p) = (&parts.reward_part, &parts.penalty_part);
    if r.rows() != p.rows() || r.cols() != p.cols() {
        return Err(Error::Dimension("reward and penalty parts differ in shape".into()));
    }
    let data = r.as_slice().iter().zip(p.as_slice()).map(|(a, b)| a + beta * b).collect();
    DenseMatrix::new(r.rows(), r.cols(), data)
}

/// `FPM + s * 1 1^T - 2 s p F * I`.
///
/// For every binary `x` the result evaluates to
/// `x^T FPM x + s (1^T x - p F)^2 + constraint_offset(..)`.
pub fn build_bqm(fpm: &DenseMatrix, constraint: &ConstraintSpec) -> Result<QuboProblem> {
    constraint.validate()?;
    if !fpm.is_square() {
        return Err(Error::Dimension(format!("FPM must be square, got {}x{}", fpm.rows(), fpm.cols())));
    }
    let f = fpm.rows();
    let s = constraint.strength;
    let diag = 2.0 * s * constraint.target_fraction * f as f64;
    let mut q = fpm.clone();
    for i in 0..f {
        for j in 0..f {
            let v = q.get(i, j) + s;
            q.set(i, j, if i == j { v - diag } else { v });
        }
    }
    QuboProblem::from_dense(&q)
}

/// The constant `-s p^2 F^2` dropped from the expanded constraint.
pub fn constraint_offset(constraint: &ConstraintSpec, features: usize) -> f64 {
    let pf = constraint.target_fraction * features as f64;
    -constraint.strength * pf * pf
}

/// Share of ones in `x`.
pub fn selected_fraction(x: &[u8]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidInput("empty assignment".into()));
    }
    Ok(x.iter().filter(|&&b| b != 0).count() as f64 / x.len() as f64)
}
