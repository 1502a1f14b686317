//! Structured grid evaluation of a QUBO objective.
//!
//! Each grid cell joins a prefix `p` and a suffix `s`, so
//! `x^T Q x = E(p) + E(s) + 2 * sum_{i in p, j in s} Q[i][j]`.
//! The side that was just extended by one mode is derived from its parents
//! (energy plus the field `sum_{i in parent} Q[i][:]`), and the energies of
//! the fixed side are remembered from the step that produced them. All sums
//! are exact integers, so the values equal point-wise evaluation bit for bit.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::exact::{exact_to_f64, Elem, Storage, View};
use super::QuboProblem;
use crate::ttopt::{GridEvaluator, GridRequest, Objective};
use crate::unfolding::{self, ModeValue, PartialIndexSet, Side};

type Key = Vec<u64>;

fn pack(values: &[ModeValue]) -> Key {
    let mut key = vec![0u64; values.len().div_ceil(64) + 1];
    // The leading word stores the width so keys of different lengths never collide.
    key[0] = values.len() as u64;
    for (i, &v) in values.iter().enumerate() {
        if v != 0 {
            key[1 + i / 64] |= 1 << (i % 64);
        }
    }
    key
}

fn support(values: &[ModeValue], offset: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend(values.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| offset + i));
}

struct Node {
    energy: i128,
    field: Vec<i128>,
}

/// The children of the most recent expansion, kept to seed the next one.
struct Frontier {
    side: Side,
    modes: core::ops::Range<usize>,
    nodes: BTreeMap<Key, Node>,
}

/// [`GridEvaluator`] for a [`QuboProblem`] that reuses work across sweep steps.
///
/// Problems without exact storage are evaluated point by point.
pub struct QuboGrid<'a> {
    problem: &'a QuboProblem,
    /// Energies of prefixes over `0..len`, indexed by `len`.
    prefix_energy: Vec<BTreeMap<Key, i128>>,
    /// Energies of suffixes over `start..d`, indexed by `start`.
    suffix_energy: Vec<BTreeMap<Key, i128>>,
    frontier: Option<Frontier>,
    buf: Vec<usize>,
}

impl<'a> QuboGrid<'a> {
    pub fn new(problem: &'a QuboProblem) -> Self {
        let d = problem.size();
        Self {
            problem,
            prefix_energy: (0..=d).map(|_| BTreeMap::new()).collect(),
            suffix_energy: (0..=d).map(|_| BTreeMap::new()).collect(),
            frontier: None,
            buf: Vec::new(),
        }
    }

    fn point_grid(&mut self, req: &GridRequest<'_>, out: &mut Vec<f64>) {
        let objective = self.problem.as_objective();
        for pos in 0..req.limit {
            let (r, c) = req.cell(pos);
            unfolding::write_full_index(req.rows, req.cols, r, c, &mut self.buf);
            out.push(objective.evaluate(&self.buf));
        }
    }

    fn structured<E: Elem<A = i128>>(&mut self, view: View<'_, E>, scale: i32, req: &GridRequest<'_>, out: &mut Vec<f64>) {
        let d = view.n;
        let (expanded, fixed) = match req.expanded {
            Side::Prefix => (req.rows, req.cols),
            Side::Suffix => (req.cols, req.rows),
        };
        let children = self.expand(view, expanded, req.expanded);

        // Energies and supports of the fixed side.
        let fixed_offset = fixed.modes().start;
        let cache = match req.expanded {
            Side::Prefix => &self.suffix_energy[fixed.modes().start],
            Side::Suffix => &self.prefix_energy[fixed.modes().end],
        };
        let mut fixed_energy = Vec::with_capacity(fixed.len());
        let mut fixed_support = Vec::with_capacity(fixed.len());
        let mut misses = 0usize;
        for member in fixed.iter() {
            let mut sup = Vec::new();
            support(member, fixed_offset, &mut sup);
            let e = match cache.get(&pack(member)) {
                Some(&e) => e,
                None => {
                    misses += 1;
                    view.energy(&sup)
                }
            };
            fixed_energy.push(e);
            fixed_support.push(sup);
        }
        if misses > 0 {
            log::trace!("{misses} of {} fixed-side energies computed from scratch", fixed.len());
        }

        for pos in 0..req.limit {
            let (r, c) = req.cell(pos);
            let (ci, fi) = match req.expanded {
                Side::Prefix => (r, c),
                Side::Suffix => (c, r),
            };
            let child = &children[ci];
            let mut cross = 0i128;
            for &j in &fixed_support[fi] {
                cross += child.1.field[j];
            }
            out.push(exact_to_f64(child.1.energy + fixed_energy[fi] + 2 * cross, scale));
        }

        // Remember the children: their energies for when they become the
        // fixed side, and their fields for the next expansion.
        let modes = expanded.modes();
        let energies: BTreeMap<Key, i128> = children.iter().map(|(k, n)| (k.clone(), n.energy)).collect();
        match req.expanded {
            Side::Prefix => self.prefix_energy[modes.end] = energies,
            Side::Suffix => self.suffix_energy[modes.start] = energies,
        }
        debug_assert!(children.iter().all(|(_, n)| n.field.len() == d));
        self.frontier = Some(Frontier { side: req.expanded, modes, nodes: children.into_iter().collect() });
    }

    /// Energies of all members of `sets`. Rows are visited once per block of
    /// sets so that each row is reused by every member of the block.
    fn precompute<E: Elem<A = i128>>(&mut self, view: View<'_, E>, sets: &[&PartialIndexSet]) {
        const BLOCK: usize = 8;
        for block in sets.chunks(BLOCK) {
            let mut members = Vec::new();
            for set in block {
                for m in set.iter() {
                    let mut sup = Vec::new();
                    support(m, set.modes().start, &mut sup);
                    members.push((set.modes().start, pack(m), sup, 0usize, 0i128));
                }
            }
            let first = block.iter().map(|s| s.modes().start).min().unwrap_or(view.n);
            for i in first..view.n {
                let row = view.row(i);
                for (_, _, sup, cursor, acc) in members.iter_mut() {
                    if sup.get(*cursor) == Some(&i) {
                        *acc += row[i].acc() + 2 * E::gather_sum(row, &sup[..*cursor], view.chunk);
                        *cursor += 1;
                    }
                }
            }
            for (start, key, _, _, acc) in members {
                self.suffix_energy[start].insert(key, acc);
            }
        }
    }

    /// Energy and field of every member of `set`, derived from its parent.
    fn expand<E: Elem<A = i128>>(&mut self, view: View<'_, E>, set: &PartialIndexSet, side: Side) -> Vec<(Key, Node)> {
        let d = view.n;
        let modes = set.modes();
        let (new_mode, parent_modes) = match side {
            Side::Prefix => (modes.end - 1, modes.start..modes.end - 1),
            Side::Suffix => (modes.start, modes.start + 1..modes.end),
        };
        let frontier = self
            .frontier
            .take()
            .filter(|f| f.side == side && f.modes == parent_modes)
            .map(|f| f.nodes)
            .unwrap_or_default();
        let mut scratch: BTreeMap<Key, Node> = BTreeMap::new();
        let kmm = view.row(new_mode)[new_mode].acc();
        let krow = view.row(new_mode);
        let mut out = Vec::with_capacity(set.len());
        for member in set.iter() {
            let (parent, bit) = match side {
                Side::Prefix => (&member[..member.len() - 1], member[member.len() - 1]),
                Side::Suffix => (&member[1..], member[0]),
            };
            let pkey = pack(parent);
            if !frontier.contains_key(&pkey) && !scratch.contains_key(&pkey) {
                support(parent, parent_modes.start, &mut self.buf);
                let mut field = vec![0i128; d];
                for &i in &self.buf {
                    for (f, k) in field.iter_mut().zip(view.row(i)) {
                        *f += k.acc();
                    }
                }
                scratch.insert(pkey.clone(), Node { energy: view.energy(&self.buf), field });
            }
            let p = frontier.get(&pkey).or_else(|| scratch.get(&pkey)).expect("parent present");
            let node = if bit != 0 {
                let mut field = p.field.clone();
                for (f, k) in field.iter_mut().zip(krow) {
                    *f += k.acc();
                }
                Node { energy: p.energy + kmm + 2 * p.field[new_mode], field }
            } else {
                Node { energy: p.energy, field: p.field.clone() }
            };
            out.push((pack(member), node));
        }
        out
    }
}

impl GridEvaluator for QuboGrid<'_> {
    fn evaluate_grid(&mut self, request: &GridRequest<'_>, out: &mut Vec<f64>) {
        let n = self.problem.size();
        match self.problem.storage() {
            Storage::Narrow { scale, chunk, entries } => {
                let view = View { n, entries: &entries[..], chunk: *chunk };
                self.structured(view, *scale, request, out)
            }
            Storage::Wide { scale, entries } => {
                let view = View { n, entries: &entries[..], chunk: usize::MAX };
                self.structured(view, *scale, request, out)
            }
            Storage::Float(_) => self.point_grid(request, out),
        }
    }

    fn evaluate_point(&self, index: &[usize]) -> f64 {
        self.problem.as_objective().evaluate(index)
    }

    fn prepare(&mut self, suffixes: &[&PartialIndexSet]) {
        let n = self.problem.size();
        match self.problem.storage() {
            Storage::Narrow { chunk, entries, .. } => {
                self.precompute(View { n, entries: &entries[..], chunk: *chunk }, suffixes)
            }
            Storage::Wide { entries, .. } => self.precompute(View { n, entries: &entries[..], chunk: usize::MAX }, suffixes),
            Storage::Float(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ttopt::{Optimizer, StepObserver, StepReport, TtOptConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(f: usize, seed: u64) -> QuboProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = vec![0.0; f * f];
        for i in 0..f {
            for j in i..f {
                let v: f64 = rng.random_range(-1.0..1.0);
                q[i * f + j] = v;
                q[j * f + i] = v;
            }
        }
        QuboProblem::new(f, q).unwrap()
    }

    /// Re-evaluates every reported grid cell point-wise.
    struct Check<'a> {
        problem: &'a QuboProblem,
        cells: usize,
    }

    impl StepObserver for Check<'_> {
        fn on_step(&mut self, r: &StepReport<'_>) {
            let mut idx = Vec::new();
            for (pos, &v) in r.values.iter().enumerate() {
                let (i, j) = (pos / r.cols.len(), pos % r.cols.len());
                unfolding::write_full_index(r.rows, r.cols, i, j, &mut idx);
                let bits: Vec<u8> = idx.iter().map(|&b| b as u8).collect();
                assert_eq!(v.to_bits(), self.problem.evaluate(&bits).unwrap().to_bits(), "cell {idx:?}");
                self.cells += 1;
            }
        }
    }

    #[test]
    fn grid_values_are_bit_identical_to_point_evaluation() {
        for (f, seed) in [(7, 1), (16, 2), (33, 3), (70, 4)] {
            let q = random_problem(f, seed);
            assert!(q.is_exact());
            let shape = q.shape();
            let config = TtOptConfig::new(3, 3 * 2 * f as u64 * 2 * 9).with_seed(seed);
            let mut check = Check { problem: &q, cells: 0 };
            let res = Optimizer::new(&shape, &config).with_observer(&mut check).run(&mut q.grid_evaluator()).unwrap();
            assert_eq!(check.cells as u64, res.evaluations_used);
            let bits: Vec<u8> = res.best_index.iter().map(|&b| b as u8).collect();
            assert_eq!(q.evaluate(&bits).unwrap(), res.best_value);
        }
    }

    #[test]
    fn structured_and_point_runs_agree() {
        let q = random_problem(25, 9);
        let shape = q.shape();
        let config = TtOptConfig::new(4, 4000).with_seed(5);
        let a = q.minimize_ttopt(&config).unwrap();
        let b = crate::ttopt::optimize(&q.as_objective(), &shape, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wide_storage_uses_the_structured_path() {
        let mut q = random_problem(12, 3).to_dense();
        q.set(0, 0, 1e5);
        q.set(1, 1, 0.001);
        let q = QuboProblem::from_dense(&q).unwrap();
        assert!(matches!(q.storage(), Storage::Wide { .. }));
        let mut check = Check { problem: &q, cells: 0 };
        let shape = q.shape();
        let config = TtOptConfig::new(2, 500);
        Optimizer::new(&shape, &config).with_observer(&mut check).run(&mut q.grid_evaluator()).unwrap();
        assert_eq!(check.cells, 500);
    }

    #[test]
    fn float_storage_falls_back_to_points() {
        let mut q = random_problem(6, 4).to_dense();
        q.set(0, 0, 1e-30);
        q.set(2, 2, 1e30);
        let q = QuboProblem::from_dense(&q).unwrap();
        assert!(!q.is_exact());
        let mut check = Check { problem: &q, cells: 0 };
        let shape = q.shape();
        let config = TtOptConfig::new(2, 300);
        Optimizer::new(&shape, &config).with_observer(&mut check).run(&mut q.grid_evaluator()).unwrap();
        assert_eq!(check.cells, 300);
    }
}
