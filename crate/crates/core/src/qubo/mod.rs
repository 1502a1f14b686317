//! Quadratic unconstrained binary optimization problems.
//!
//! A [`QuboProblem`] holds a symmetric `F x F` matrix `Q` and the objective
//! `x -> x^T Q x` over `x in {0, 1}^F`. Values are computed exactly whenever
//! the coefficients share a bounded binary exponent range (see
//! [`QuboProblem::is_exact`]), which makes every evaluation path agree to
//! the bit.
//!
//! The [`construct`] submodule builds feature-selection problems from item
//! similarity matrices.

pub mod construct;
pub(crate) mod exact;
mod grid;

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::DenseMatrix;
use crate::ttopt::{Objective, OptResult, Optimizer, TtOptConfig};
use crate::unfolding::TensorShape;
use crate::{Error, Result};
use exact::{with_view, Storage};

pub use construct::{
    assemble_fpm, build_bqm, build_fpm, build_ipm, constraint_offset, selected_fraction, ConstraintSpec,
    CsrMatrix, FpmComponents, IpmComponents, SimilarityMatrix, SparseBinaryMatrix,
};
pub use grid::QuboGrid;

/// A QUBO instance `min x^T Q x`, `x` binary, with `Q` stored symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    size: usize,
    storage: Storage,
}

impl QuboProblem {
    /// Builds a problem from a row-major `size x size` matrix.
    ///
    /// An asymmetric matrix is replaced by `(Q + Q^T) / 2`, which leaves the
    /// objective unchanged.
    pub fn new(size: usize, mut values: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput("a QUBO needs at least one variable".into()));
        }
        if values.len() != size * size {
            return Err(Error::Dimension(format!(
                "{} coefficients supplied for a {size}x{size} QUBO",
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: p / size, col: p % size });
        }
        let mut asymmetric = false;
        for i in 0..size {
            for j in i + 1..size {
                let (a, b) = (values[i * size + j], values[j * size + i]);
                if a != b {
                    asymmetric = true;
                    let m = 0.5 * a + 0.5 * b;
                    values[i * size + j] = m;
                    values[j * size + i] = m;
                }
            }
        }
        if asymmetric {
            log::info!("QUBO matrix was not symmetric; using (Q + Q^T) / 2");
        }
        Ok(Self { size, storage: Storage::from_values(size, values) })
    }

    pub fn from_dense(matrix: &DenseMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "QUBO matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Self::new(matrix.rows(), matrix.as_slice().to_vec())
    }

    /// Builds a problem from upper-triangle entries `(i, j, Q[i][j])`, `i <= j`.
    /// The lower triangle mirrors the upper one. Repeated coordinates are rejected.
    pub fn from_upper_triplets(size: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut values = alloc::vec![0.0; size * size];
        let mut seen = alloc::vec![0u64; (size * size).div_ceil(64)];
        for &(i, j, v) in triplets {
            if i > j || j >= size {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) is not in the upper triangle of a {size}x{size} matrix"
                )));
            }
            let k = i * size + j;
            if seen[k / 64] >> (k % 64) & 1 == 1 {
                return Err(Error::InvalidInput(format!("duplicate entry ({i}, {j})")));
            }
            seen[k / 64] |= 1 << (k % 64);
            values[k] = v;
            values[j * size + i] = v;
        }
        Self::new(size, values)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut values = alloc::vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            values[i * n + i] = d;
        }
        Self::new(n, values)
    }

    /// Number of binary variables `F`.
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.storage.entry(i * self.size + j)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.size, self.size, |i, j| self.entry(i, j))
    }

    /// Non-zero entries of the upper triangle, row-major.
    pub fn upper_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.size {
            for j in i..self.size {
                let v = self.entry(i, j);
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.size * self.size).fold(0.0_f64, |m, k| m.max(self.storage.entry(k).abs()))
    }

    /// Whether objective values are computed with exact accumulation.
    pub fn is_exact(&self) -> bool {
        self.storage.is_exact()
    }

    pub fn shape(&self) -> TensorShape {
        TensorShape::binary(self.size).expect("size >= 1")
    }

    /// `x^T Q x` for a 0/1 vector of length `F`.
    pub fn evaluate(&self, x: &[u8]) -> Result<f64> {
        if x.len() != self.size {
            return Err(Error::Dimension(format!(
                "assignment has {} entries, problem has {} variables",
                x.len(),
                self.size
            )));
        }
        if let Some(p) = x.iter().position(|&b| b > 1) {
            return Err(Error::InvalidInput(format!("assignment entry {p} is {}, not 0 or 1", x[p])));
        }
        let support: Vec<usize> = x.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i).collect();
        Ok(self.evaluate_support(&support))
    }

    /// `x^T Q x` where `support` lists the positions of ones in ascending order.
    pub fn evaluate_support(&self, support: &[usize]) -> f64 {
        with_view!(&self.storage, self.size, |view, conv| conv(view.energy(support)))
    }

    pub fn as_objective(&self) -> QuboObjective<'_> {
        QuboObjective { problem: self }
    }

    /// Structured grid evaluator for the TTOpt engine.
    pub fn grid_evaluator(&self) -> QuboGrid<'_> {
        QuboGrid::new(self)
    }

    /// Runs TTOpt on this problem with the structured grid evaluator.
    pub fn minimize_ttopt(&self, config: &TtOptConfig) -> Result<OptResult> {
        let shape = self.shape();
        Optimizer::new(&shape, config).run(&mut self.grid_evaluator())
    }

    pub(crate) fn storage(&self) -> &Storage {
        &self.storage
    }
}

/// Point-wise objective over the binary tensor of a [`QuboProblem`].
///
/// Every non-zero mode value counts as a one.
#[derive(Debug, Clone, Copy)]
pub struct QuboObjective<'a> {
    problem: &'a QuboProblem,
}

impl Objective for QuboObjective<'_> {
    fn evaluate(&self, index: &[usize]) -> f64 {
        let support: Vec<usize> = index.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect();
        self.problem.evaluate_support(&support)
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Assignment as a 0/1 vector from a binary tensor index.
pub fn index_to_bits(index: &[usize]) -> Vec<u8> {
    index.iter().map(|&v| (v != 0) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ttopt::optimize;
    use proptest::prelude::*;

    fn all_bits(f: usize) -> impl Iterator<Item = Vec<u8>> {
        (0u32..1 << f).map(move |m| (0..f).map(|i| ((m >> i) & 1) as u8).collect())
    }

    #[test]
    fn evaluate_examples() {
        let q = QuboProblem::new(2, alloc::vec![1.0, 2.0, 2.0, -3.0]).unwrap();
        assert_eq!(q.evaluate(&[0, 0]).unwrap(), 0.0);
        assert_eq!(q.evaluate(&[1, 1]).unwrap(), 2.0);
        let id = QuboProblem::diagonal(&[1.0; 5]).unwrap();
        assert_eq!(id.evaluate(&[1; 5]).unwrap(), 5.0);
        assert!(matches!(id.evaluate(&[1; 4]), Err(Error::Dimension(_))));
        assert!(matches!(id.evaluate(&[1, 0, 2, 0, 0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn construction_errors() {
        assert!(QuboProblem::new(0, alloc::vec![]).is_err());
        assert!(QuboProblem::new(2, alloc::vec![1.0; 3]).is_err());
        assert_eq!(
            QuboProblem::new(2, alloc::vec![1.0, f64::NAN, 0.0, 0.0]),
            Err(Error::NonFinite { row: 0, col: 1 })
        );
        assert!(QuboProblem::from_upper_triplets(2, &[(1, 0, 1.0)]).is_err());
        assert!(QuboProblem::from_upper_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let q = QuboProblem::new(2, alloc::vec![1.0, 4.0, 0.0, -1.0]).unwrap();
        assert_eq!(q.entry(0, 1), 2.0);
        assert_eq!(q.entry(1, 0), 2.0);
        assert_eq!(q.evaluate(&[1, 1]).unwrap(), 4.0);
    }

    #[test]
    fn objective_matches_evaluate_exhaustively() {
        let q = QuboProblem::new(4, (0..16).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap();
        let obj = q.as_objective();
        for x in all_bits(4) {
            let idx: Vec<usize> = x.iter().map(|&b| b as usize).collect();
            assert_eq!(obj.evaluate(&idx).to_bits(), q.evaluate(&x).unwrap().to_bits());
            assert_eq!(obj.evaluate(&idx).to_bits(), obj.evaluate(&idx).to_bits());
        }
        assert!(obj.concurrent_safe());
        let d = QuboProblem::diagonal(&[-1.0, -1.0]).unwrap();
        assert_eq!(d.as_objective().evaluate(&[1, 1]), -2.0);
    }

    #[test]
    fn triplets_roundtrip() {
        let q = QuboProblem::new(3, alloc::vec![1.5, 0.0, -2.0, 0.0, 0.0, 0.25, -2.0, 0.25, 3.0]).unwrap();
        let t = q.upper_triplets();
        assert_eq!(t, [(0, 0, 1.5), (0, 2, -2.0), (1, 2, 0.25), (2, 2, 3.0)]);
        assert_eq!(QuboProblem::from_upper_triplets(3, &t).unwrap(), q);
    }

    #[test]
    fn float_storage_still_evaluates() {
        let q = QuboProblem::new(2, alloc::vec![1e-30, 1e30, 1e30, -1.0]).unwrap();
        assert!(!q.is_exact());
        assert_eq!(q.evaluate(&[1, 1]).unwrap(), 1e-30 + 2e30 - 1.0);
        assert_eq!(q.entry(0, 1), 1e30);
    }

    #[test]
    fn ttopt_on_diagonal_problems() {
        let q = QuboProblem::diagonal(&[-1.0, -1.0]).unwrap();
        let res = q.minimize_ttopt(&TtOptConfig::new(2, 100)).unwrap();
        assert_eq!(res.best_value, -2.0);
        assert_eq!(res.best_index.0, [1, 1]);
        let id = QuboProblem::diagonal(&[1.0; 5]).unwrap();
        let res = optimize(&id.as_objective(), &id.shape(), &TtOptConfig::new(4, 320)).unwrap();
        assert_eq!(res.best_value, 0.0);
    }

    proptest! {
        #[test]
        fn symmetrization_preserves_values(
            vals in proptest::collection::vec(-10.0f64..10.0, 25),
            bits in proptest::collection::vec(0u8..2, 5),
        ) {
            let q = QuboProblem::new(5, vals.clone()).unwrap();
            let sym: Vec<f64> = (0..25).map(|k| 0.5 * vals[k] + 0.5 * vals[(k % 5) * 5 + k / 5]).collect();
            let qs = QuboProblem::new(5, sym).unwrap();
            prop_assert_eq!(q.evaluate(&bits).unwrap().to_bits(), qs.evaluate(&bits).unwrap().to_bits());
            // Against a plain floating double sum.
            let mut naive = 0.0;
            for i in 0..5 { for j in 0..5 { naive += vals[i * 5 + j] * (bits[i] * bits[j]) as f64; } }
            prop_assert!((q.evaluate(&bits).unwrap() - naive).abs() <= 1e-12 * (1.0 + naive.abs()));
        }
    }
}
