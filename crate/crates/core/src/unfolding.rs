//! Index bookkeeping for the implicit unfolding matrices of a tensor.
//!
//! Unfoldings are never materialized. The k-th unfolding is navigated through
//! two lists of partial multi-indices: prefixes over modes `0..k` (rows) and
//! suffixes over modes `k..d` (columns).
//!
//! Ordering contract: expanding a set of `r` partial indices by a mode of size
//! `n` produces `r * n` members where member `p * n + v` is the `p`-th parent
//! extended by mode value `v` (parent-major). [`split_flat_row`] inverts it.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Value stored for one mode position inside partial index sets.
pub type ModeValue = u16;

/// Largest supported mode size.
pub const MAX_MODE_SIZE: usize = ModeValue::MAX as usize + 1;

/// Mode sizes `N_1..N_d` of a tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorShape {
    mode_sizes: Vec<usize>,
}

impl TensorShape {
    pub fn new(mode_sizes: Vec<usize>) -> Result<Self> {
        if mode_sizes.is_empty() {
            return Err(Error::InvalidInput("tensor must have at least one mode".into()));
        }
        if let Some((k, n)) = mode_sizes
            .iter()
            .enumerate()
            .find(|(_, &n)| !(2..=MAX_MODE_SIZE).contains(&n))
        {
            return Err(Error::InvalidInput(format!(
                "mode {k} has size {n}; sizes must lie in 2..={MAX_MODE_SIZE}"
            )));
        }
        Ok(Self { mode_sizes })
    }

    /// `d` binary modes, the shape of a QUBO with `d` variables.
    pub fn binary(d: usize) -> Result<Self> {
        Self::new(vec![2; d])
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.mode_sizes.len()
    }

    #[inline]
    pub fn mode_size(&self, k: usize) -> usize {
        self.mode_sizes[k]
    }

    pub fn mode_sizes(&self) -> &[usize] {
        &self.mode_sizes
    }

    pub fn max_mode(&self) -> usize {
        self.mode_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn is_binary(&self) -> bool {
        self.mode_sizes.iter().all(|&n| n == 2)
    }

    /// Number of distinct partial indices over `modes`, saturating at `usize::MAX`.
    pub fn span_cardinality(&self, modes: Range<usize>) -> usize {
        self.mode_sizes[modes].iter().fold(1usize, |acc, &n| acc.saturating_mul(n))
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        index.len() == self.dims() && index.iter().zip(&self.mode_sizes).all(|(&v, &n)| v < n)
    }
}

/// A full index `[n_1, ..., n_d]` into a tensor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>, shape: &TensorShape) -> Result<Self> {
        if !shape.contains(&entries) {
            return Err(Error::InvalidInput(format!(
                "index {entries:?} is not valid for mode sizes {:?}",
                shape.mode_sizes()
            )));
        }
        Ok(Self(entries))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl core::ops::Deref for MultiIndex {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Whether a partial index set holds row prefixes or column suffixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Prefix,
    Suffix,
}

/// A list of distinct partial multi-indices over a contiguous range of modes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialIndexSet {
    side: Side,
    modes: Range<usize>,
    count: usize,
    values: Vec<ModeValue>,
}

impl PartialIndexSet {
    /// The single empty prefix that precedes mode 0.
    pub fn empty_prefix() -> Self {
        Self { side: Side::Prefix, modes: 0..0, count: 1, values: Vec::new() }
    }

    /// The single empty suffix that follows the last of `d` modes.
    pub fn empty_suffix(d: usize) -> Self {
        Self { side: Side::Suffix, modes: d..d, count: 1, values: Vec::new() }
    }

    /// Validating constructor. Prefixes must start at mode 0, suffixes must end
    /// at the last mode.
    pub fn new(side: Side, modes: Range<usize>, members: &[Vec<usize>], shape: &TensorShape) -> Result<Self> {
        if modes.start > modes.end || modes.end > shape.dims() {
            return Err(Error::InvalidInput(format!("mode range {modes:?} outside the tensor")));
        }
        match side {
            Side::Prefix if modes.start != 0 => {
                return Err(Error::InvalidInput("prefix sets must start at mode 0".into()))
            }
            Side::Suffix if modes.end != shape.dims() => {
                return Err(Error::InvalidInput("suffix sets must end at the last mode".into()))
            }
            _ => {}
        }
        let width = modes.len();
        let mut values = Vec::with_capacity(members.len() * width);
        let mut seen = BTreeSet::new();
        for m in members {
            if m.len() != width {
                return Err(Error::InvalidInput(format!(
                    "partial index {m:?} does not span modes {modes:?}"
                )));
            }
            for (k, &v) in modes.clone().zip(m) {
                if v >= shape.mode_size(k) {
                    return Err(Error::InvalidInput(format!(
                        "value {v} out of range for mode {k} of size {}",
                        shape.mode_size(k)
                    )));
                }
            }
            if !seen.insert(m.as_slice()) {
                return Err(Error::InvalidInput(format!("duplicate partial index {m:?}")));
            }
            values.extend(m.iter().map(|&v| v as ModeValue));
        }
        Ok(Self { side, modes, count: members.len(), values })
    }

    #[inline]
    pub fn side(&self) -> Side {
        self.side
    }

    /// Modes covered by every member.
    #[inline]
    pub fn modes(&self) -> Range<usize> {
        self.modes.clone()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.modes.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn member(&self, i: usize) -> &[ModeValue] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[ModeValue]> + '_ {
        (0..self.count).map(move |i| self.member(i))
    }

    /// Keeps the members at `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> Self {
        let mut values = Vec::with_capacity(positions.len() * self.width());
        for &p in positions {
            values.extend_from_slice(self.member(p));
        }
        Self { side: self.side, modes: self.modes.clone(), count: positions.len(), values }
    }
}

/// Initial column sets: for every `k in 1..d`, a set of suffixes over modes
/// `k..d` with `min(rank, |suffix space|)` distinct members drawn uniformly
/// without replacement. The result is indexed by `k - 1`.
pub fn random_suffix_sets(shape: &TensorShape, rank: usize, seed: u64) -> Vec<PartialIndexSet> {
    let d = shape.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(d.saturating_sub(1));
    for k in 1..d {
        let modes = k..d;
        let card = shape.span_cardinality(modes.clone());
        let take = rank.min(card);
        let width = modes.len();
        let mut values = Vec::with_capacity(take * width);
        if card <= take.saturating_mul(64).max(1024) {
            // Small space: sample ordinals and decode them in mixed radix.
            for ordinal in index::sample(&mut rng, card, take).into_iter() {
                let start = values.len();
                values.resize(start + width, 0);
                let mut rest = ordinal;
                for (slot, k) in modes.clone().enumerate().rev() {
                    let n = shape.mode_size(k);
                    values[start + slot] = (rest % n) as ModeValue;
                    rest /= n;
                }
            }
        } else {
            let mut seen = BTreeSet::new();
            let mut candidate = vec![0 as ModeValue; width];
            while seen.len() < take {
                for (slot, k) in modes.clone().enumerate() {
                    candidate[slot] = rng.random_range(0..shape.mode_size(k)) as ModeValue;
                }
                if seen.insert(candidate.clone()) {
                    values.extend_from_slice(&candidate);
                }
            }
        }
        out.push(PartialIndexSet { side: Side::Suffix, modes, count: take, values });
    }
    out
}

/// Extends every prefix by each value of the next mode (parent-major order).
pub fn expand_rows(prefixes: &PartialIndexSet, mode_size: usize) -> PartialIndexSet {
    debug_assert_eq!(prefixes.side, Side::Prefix);
    let w = prefixes.width();
    let mut values = Vec::with_capacity(prefixes.count * mode_size * (w + 1));
    for p in prefixes.iter() {
        for v in 0..mode_size {
            values.extend_from_slice(p);
            values.push(v as ModeValue);
        }
    }
    PartialIndexSet {
        side: Side::Prefix,
        modes: 0..prefixes.modes.end + 1,
        count: prefixes.count * mode_size,
        values,
    }
}

/// Prepends each value of the preceding mode to every suffix (parent-major order).
pub fn expand_cols(mode_size: usize, suffixes: &PartialIndexSet) -> PartialIndexSet {
    debug_assert_eq!(suffixes.side, Side::Suffix);
    debug_assert!(suffixes.modes.start > 0);
    let w = suffixes.width();
    let mut values = Vec::with_capacity(suffixes.count * mode_size * (w + 1));
    for s in suffixes.iter() {
        for v in 0..mode_size {
            values.push(v as ModeValue);
            values.extend_from_slice(s);
        }
    }
    PartialIndexSet {
        side: Side::Suffix,
        modes: suffixes.modes.start - 1..suffixes.modes.end,
        count: suffixes.count * mode_size,
        values,
    }
}

fn check_adjacent(rows: &PartialIndexSet, cols: &PartialIndexSet) -> Result<()> {
    if rows.side != Side::Prefix || cols.side != Side::Suffix || rows.modes.start != 0 {
        return Err(Error::InvalidInput("expected a prefix set and a suffix set".into()));
    }
    if rows.modes.end != cols.modes.start {
        return Err(Error::InvalidInput(format!(
            "prefix modes {:?} and suffix modes {:?} leave a gap or overlap",
            rows.modes, cols.modes
        )));
    }
    Ok(())
}

/// Writes the full index for grid cell `(row, col)` into `out`.
pub fn write_full_index(rows: &PartialIndexSet, cols: &PartialIndexSet, row: usize, col: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend(rows.member(row).iter().map(|&v| v as usize));
    out.extend(cols.member(col).iter().map(|&v| v as usize));
}

/// All `|rows| * |cols|` full indices of the grid, row-major (row varies slowest).
pub fn assemble_full_indices(rows: &PartialIndexSet, cols: &PartialIndexSet) -> Result<Vec<MultiIndex>> {
    check_adjacent(rows, cols)?;
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    let mut buf = Vec::with_capacity(rows.width() + cols.width());
    for r in 0..rows.len() {
        for c in 0..cols.len() {
            write_full_index(rows, cols, r, c, &mut buf);
            out.push(MultiIndex(buf.clone()));
        }
    }
    Ok(out)
}

/// Checks that `rows` and `cols` tile the modes of a tensor with `d` modes.
pub(crate) fn check_grid(rows: &PartialIndexSet, cols: &PartialIndexSet, d: usize) -> Result<()> {
    check_adjacent(rows, cols)?;
    if cols.modes.end != d {
        return Err(Error::InvalidInput(format!("grid covers {} of {d} modes", cols.modes.end)));
    }
    Ok(())
}

/// Inverse of the expansion ordering: flat position `flat` among
/// `num_parents * mode_size` children maps to `(parent position, mode value)`.
pub fn split_flat_row(flat: usize, mode_size: usize, num_parents: usize) -> Result<(usize, usize)> {
    if mode_size == 0 || flat >= num_parents.saturating_mul(mode_size) {
        return Err(Error::InvalidInput(format!(
            "flat position {flat} outside {num_parents} x {mode_size} expansion"
        )));
    }
    Ok((flat / mode_size, flat % mode_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(side: Side, modes: Range<usize>, members: &[&[usize]], shape: &TensorShape) -> PartialIndexSet {
        let owned: Vec<Vec<usize>> = members.iter().map(|m| m.to_vec()).collect();
        PartialIndexSet::new(side, modes, &owned, shape).unwrap()
    }

    fn to_usize(m: &[ModeValue]) -> Vec<usize> {
        m.iter().map(|&v| v as usize).collect()
    }

    #[test]
    fn shape_validation() {
        assert!(TensorShape::new(vec![]).is_err());
        assert!(TensorShape::new(vec![2, 1]).is_err());
        let s = TensorShape::new(vec![2, 3, 4]).unwrap();
        assert_eq!(s.max_mode(), 4);
        assert_eq!(s.span_cardinality(1..3), 12);
        assert!(MultiIndex::new(vec![1, 2, 3], &s).is_ok());
        assert!(MultiIndex::new(vec![1, 3, 3], &s).is_err());
        assert!(MultiIndex::new(vec![1, 2], &s).is_err());
        assert_eq!(TensorShape::binary(100).unwrap().span_cardinality(0..100), usize::MAX);
    }

    #[test]
    fn suffix_sets_clamp_to_space() {
        let shape = TensorShape::binary(2).unwrap();
        let sets = random_suffix_sets(&shape, 4, 0);
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].len(), 2);
        assert_eq!(sets[0].modes(), 1..2);
    }

    #[test]
    fn suffix_sets_deterministic() {
        let shape = TensorShape::binary(5).unwrap();
        assert_eq!(random_suffix_sets(&shape, 2, 7), random_suffix_sets(&shape, 2, 7));
        assert_ne!(random_suffix_sets(&shape, 2, 7), random_suffix_sets(&shape, 2, 8));
    }

    #[test]
    fn suffix_sets_valid_and_distinct() {
        let shape = TensorShape::binary(10).unwrap();
        let sets = random_suffix_sets(&shape, 4, 3);
        assert_eq!(sets.len(), 9);
        for (i, s) in sets.iter().enumerate() {
            let k = i + 1;
            assert_eq!(s.modes(), k..10);
            assert_eq!(s.len(), 4usize.min(1 << (10 - k)));
            let members: BTreeSet<Vec<usize>> = s.iter().map(to_usize).collect();
            assert_eq!(members.len(), s.len());
            for m in &members {
                assert_eq!(m.len(), 10 - k);
                assert!(m.iter().all(|&b| b < 2));
            }
        }
    }

    #[test]
    fn suffix_sets_large_space_rejection_path() {
        let shape = TensorShape::new(vec![3; 40]).unwrap();
        let sets = random_suffix_sets(&shape, 5, 11);
        for s in &sets[..30] {
            assert_eq!(s.len(), 5);
            let members: BTreeSet<&[ModeValue]> = s.iter().collect();
            assert_eq!(members.len(), 5);
            assert!(s.iter().all(|m| m.iter().all(|&v| v < 3)));
        }
    }

    #[test]
    fn expand_first_mode() {
        let rows = expand_rows(&PartialIndexSet::empty_prefix(), 2);
        assert_eq!(rows.iter().map(to_usize).collect::<Vec<_>>(), [vec![0], vec![1]]);
        assert_eq!(rows.modes(), 0..1);
    }

    #[test]
    fn expand_full_second_mode() {
        let shape = TensorShape::binary(3).unwrap();
        let p = set(Side::Prefix, 0..1, &[&[0], &[1]], &shape);
        let rows = expand_rows(&p, 2);
        let got: Vec<Vec<usize>> = rows.iter().map(to_usize).collect();
        assert_eq!(got, [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn expand_four_prefixes() {
        let shape = TensorShape::binary(6).unwrap();
        let p = set(Side::Prefix, 0..3, &[&[0, 0, 1], &[1, 1, 0], &[0, 1, 0], &[1, 1, 1]], &shape);
        let rows = expand_rows(&p, 2);
        assert_eq!(rows.len(), 8);
        assert_eq!(rows.width(), 4);
        let distinct: BTreeSet<&[ModeValue]> = rows.iter().collect();
        assert_eq!(distinct.len(), 8);
    }

    #[test]
    fn expand_cols_prepends() {
        let shape = TensorShape::binary(3).unwrap();
        let s = set(Side::Suffix, 2..3, &[&[1], &[0]], &shape);
        let cols = expand_cols(2, &s);
        let got: Vec<Vec<usize>> = cols.iter().map(to_usize).collect();
        assert_eq!(got, [vec![0, 1], vec![1, 1], vec![0, 0], vec![1, 0]]);
        assert_eq!(cols.modes(), 1..3);
    }

    #[test]
    fn assemble_small_grids() {
        let shape = TensorShape::binary(2).unwrap();
        let rows = set(Side::Prefix, 0..1, &[&[0], &[1]], &shape);
        let cols = set(Side::Suffix, 1..2, &[&[1]], &shape);
        let idx = assemble_full_indices(&rows, &cols).unwrap();
        assert_eq!(idx, [MultiIndex(vec![0, 1]), MultiIndex(vec![1, 1])]);

        let shape3 = TensorShape::binary(3).unwrap();
        let rows = set(Side::Prefix, 0..1, &[&[0], &[1]], &shape3);
        let cols = set(Side::Suffix, 1..3, &[&[0, 0], &[1, 1]], &shape3);
        let idx: Vec<Vec<usize>> = assemble_full_indices(&rows, &cols).unwrap().into_iter().map(|m| m.0).collect();
        assert_eq!(idx, [vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 0], vec![1, 1, 1]]);
    }

    #[test]
    fn assemble_ordering_contract() {
        let shape = TensorShape::binary(5).unwrap();
        let rows = set(Side::Prefix, 0..3, &[&[0, 0, 0], &[0, 1, 0], &[1, 0, 1], &[1, 1, 1]], &shape);
        let cols = set(Side::Suffix, 3..5, &[&[0, 1], &[1, 0]], &shape);
        let idx = assemble_full_indices(&rows, &cols).unwrap();
        assert_eq!(idx.len(), 8);
        for i in 0..4 {
            for j in 0..2 {
                let mut want = to_usize(rows.member(i));
                want.extend(to_usize(cols.member(j)));
                assert_eq!(idx[i * 2 + j].0, want);
                assert!(shape.contains(&idx[i * 2 + j]));
            }
        }
    }

    #[test]
    fn assemble_rejects_gaps_and_overlaps() {
        let shape = TensorShape::binary(4).unwrap();
        let rows = set(Side::Prefix, 0..1, &[&[0]], &shape);
        let gap = set(Side::Suffix, 2..4, &[&[0, 0]], &shape);
        assert!(assemble_full_indices(&rows, &gap).is_err());
        let rows2 = set(Side::Prefix, 0..3, &[&[0, 0, 0]], &shape);
        let overlap = set(Side::Suffix, 2..4, &[&[1, 1]], &shape);
        assert!(assemble_full_indices(&rows2, &overlap).is_err());
        assert!(assemble_full_indices(&gap, &rows).is_err());
    }

    #[test]
    fn partial_set_validation() {
        let shape = TensorShape::binary(3).unwrap();
        assert!(PartialIndexSet::new(Side::Prefix, 0..1, &[vec![0], vec![0]], &shape).is_err());
        assert!(PartialIndexSet::new(Side::Prefix, 0..1, &[vec![2]], &shape).is_err());
        assert!(PartialIndexSet::new(Side::Prefix, 1..2, &[vec![0]], &shape).is_err());
        assert!(PartialIndexSet::new(Side::Suffix, 1..2, &[vec![0]], &shape).is_err());
        assert!(PartialIndexSet::new(Side::Suffix, 1..3, &[vec![0]], &shape).is_err());
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_flat_row(0, 2, 1).unwrap(), (0, 0));
        assert_eq!(split_flat_row(5, 2, 3).unwrap(), (2, 1));
        assert!(split_flat_row(6, 2, 3).is_err());
    }

    proptest! {
        #[test]
        fn split_inverts_expansion(
            members in proptest::collection::btree_set(proptest::collection::vec(0usize..3, 4), 1..10),
            mode in 2usize..5,
        ) {
            let shape = TensorShape::new(vec![3, 3, 3, 3, mode, 2]).unwrap();
            let members: Vec<Vec<usize>> = members.into_iter().collect();
            let parents = PartialIndexSet::new(Side::Prefix, 0..4, &members, &shape).unwrap();
            let rows = expand_rows(&parents, mode);
            for flat in 0..rows.len() {
                let (p, v) = split_flat_row(flat, mode, parents.len()).unwrap();
                let child = rows.member(flat);
                prop_assert_eq!(&child[..4], parents.member(p));
                prop_assert_eq!(child[4] as usize, v);
            }
        }
    }
}
