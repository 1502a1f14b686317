//! TTOpt: gradient-free minimization of a black-box function on a tensor grid.
//!
//! The engine sweeps over the implicit unfolding matrices of the tensor
//! `Y[n_1, ..., n_d] = f(n_1, ..., n_d)`. At every step it evaluates `f` on a
//! small grid (current row prefixes times column suffixes), maps the values
//! through `g = pi/2 - atan(f - y_min)` so that small values become large, and
//! keeps the rows (forward) or columns (backward) of a maximal-volume
//! submatrix of the mapped grid as the next index set. A sweep is one forward
//! pass over modes `0..d` followed by one backward pass `d..0`; sweeps repeat
//! until the evaluation budget is spent.
//!
//! The minimum reported is the smallest raw value among all evaluated points.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt::Write;

use crate::linalg::{self, greedy_pivot_rows, maxvol, DenseMatrix};
use crate::unfolding::{
    self, check_grid, expand_cols, expand_rows, random_suffix_sets, MultiIndex, PartialIndexSet, Side,
    TensorShape,
};
use crate::{Error, Result};

/// A deterministic function on the points of a tensor grid.
pub trait Objective {
    fn evaluate(&self, index: &[usize]) -> f64;

    /// Whether `evaluate` may be called from several threads at once.
    fn concurrent_safe(&self) -> bool {
        false
    }
}

impl<F: Fn(&[usize]) -> f64> Objective for F {
    fn evaluate(&self, index: &[usize]) -> f64 {
        self(index)
    }
}

/// One batch of objective evaluations requested by a sweep step.
#[derive(Debug, Clone, Copy)]
pub struct GridRequest<'a> {
    /// Prefixes over modes `0..k`.
    pub rows: &'a PartialIndexSet,
    /// Suffixes over modes `k..d`.
    pub cols: &'a PartialIndexSet,
    /// Which side was just produced by extending the previous step's selection
    /// with one mode.
    pub expanded: Side,
    /// Only the first `limit` cells, in row-major order, are requested.
    pub limit: usize,
}

impl GridRequest<'_> {
    pub fn cell(&self, pos: usize) -> (usize, usize) {
        (pos / self.cols.len(), pos % self.cols.len())
    }
}

/// Evaluates objective values on grids of full indices.
///
/// Implementations must return exactly the values that point-wise evaluation
/// of the same indices would produce.
pub trait GridEvaluator {
    /// Appends `request.limit` values to `out`, one per grid cell in row-major order.
    fn evaluate_grid(&mut self, request: &GridRequest<'_>, out: &mut Vec<f64>);

    fn evaluate_point(&self, index: &[usize]) -> f64;

    /// Receives the initial column sets (suffixes over `k..d` for `k in 1..d`)
    /// before the first step.
    fn prepare(&mut self, _suffixes: &[&PartialIndexSet]) {}
}

/// Grid evaluation by calling the objective once per cell.
pub struct PointGrid<'a, O: ?Sized> {
    objective: &'a O,
    buf: Vec<usize>,
}

impl<'a, O: Objective + ?Sized> PointGrid<'a, O> {
    pub fn new(objective: &'a O) -> Self {
        Self { objective, buf: Vec::new() }
    }
}

impl<O: Objective + ?Sized> GridEvaluator for PointGrid<'_, O> {
    fn evaluate_grid(&mut self, request: &GridRequest<'_>, out: &mut Vec<f64>) {
        for pos in 0..request.limit {
            let (r, c) = request.cell(pos);
            unfolding::write_full_index(request.rows, request.cols, r, c, &mut self.buf);
            out.push(self.objective.evaluate(&self.buf));
        }
    }

    fn evaluate_point(&self, index: &[usize]) -> f64 {
        self.objective.evaluate(index)
    }
}

/// Source of elapsed wall-clock time for trace records.
pub trait Clock {
    fn elapsed_seconds(&self) -> f64;
}

/// A clock that always reads zero; used when no timer is available.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Everything a step did, for instrumentation.
#[derive(Debug)]
pub struct StepReport<'a> {
    pub mode: usize,
    pub direction: Direction,
    pub rows: &'a PartialIndexSet,
    pub cols: &'a PartialIndexSet,
    /// Raw objective values in row-major grid order.
    pub values: &'a [f64],
    /// `y_min` used by the mapping, `None` when the step was truncated.
    pub y_min: Option<f64>,
    /// Mapped values handed to the row selection: the grid itself for forward
    /// steps, its transpose for backward steps.
    pub selection_input: Option<&'a DenseMatrix>,
    /// Selected positions into `rows` (forward) or `cols` (backward), ascending.
    pub selected: &'a [usize],
    /// `true` when maxvol failed and pivoted LU selection was used instead.
    pub fallback: bool,
    /// Evaluations used after this step.
    pub evaluations: u64,
}

/// Receives a [`StepReport`] after every sweep step.
pub trait StepObserver {
    fn on_step(&mut self, report: &StepReport<'_>);
}

/// Optimizer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TtOptConfig {
    /// Maximal number of rows/columns kept per unfolding.
    pub rank: usize,
    /// Maximal number of objective evaluations.
    pub budget: u64,
    pub seed: u64,
    pub maxvol_tau: f64,
    pub maxvol_max_iters: usize,
    /// Reference used to map the very first grid. When `None` the first grid's
    /// own minimum is used. Afterwards the best value found is always used.
    pub initial_y_min: Option<f64>,
}

impl TtOptConfig {
    pub fn new(rank: usize, budget: u64) -> Self {
        Self {
            rank,
            budget,
            seed: 0,
            maxvol_tau: linalg::DEFAULT_TAU,
            maxvol_max_iters: linalg::DEFAULT_MAX_ITERS,
            initial_y_min: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidInput("rank must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidInput("budget must be at least 1".into()));
        }
        if !(self.maxvol_tau >= 0.0) || !self.maxvol_tau.is_finite() {
            return Err(Error::InvalidInput(format!("maxvol tolerance {} must be >= 0", self.maxvol_tau)));
        }
        if self.maxvol_max_iters == 0 {
            return Err(Error::InvalidInput("maxvol iteration cap must be at least 1".into()));
        }
        if let Some(y) = self.initial_y_min {
            if !y.is_finite() {
                return Err(Error::InvalidInput("initial y_min must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Number of evaluations made when the improvement was found, counting it.
    pub evaluations: u64,
    pub best_value: f64,
    pub seconds: f64,
}

/// Improvement history: one record per evaluation that lowered the best value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub const CSV_HEADER: &'static str = "evals,best_value,seconds";

    /// CSV text with header `evals,best_value,seconds`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(32 * (self.records.len() + 1));
        s.push_str(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(s, "{},{},{}", r.evaluations, r.best_value, r.seconds);
        }
        s
    }

    /// Evaluation counts strictly increase and best values never increase.
    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[0].evaluations < w[1].evaluations && w[1].best_value <= w[0].best_value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_index: MultiIndex,
    pub best_value: f64,
    pub evaluations_used: u64,
    pub sweeps_completed: usize,
    pub trace: Trace,
}

/// `g(v) = pi/2 - atan(v - y_min)`, kept strictly inside `(0, pi)`.
#[inline]
pub fn map_value(value: f64, y_min: f64) -> f64 {
    let x = value - y_min;
    let g = if x > 0.0 {
        libm::atan(1.0 / x)
    } else if x < 0.0 {
        PI - libm::atan(-1.0 / x)
    } else {
        FRAC_PI_2
    };
    // Saturation for huge |x| would otherwise reach the interval ends.
    g.clamp(f64::MIN_POSITIVE, PI_BELOW)
}

const PI_BELOW: f64 = 3.141_592_653_589_792_7;

/// Applies [`map_value`] elementwise.
pub fn map_values(values: &DenseMatrix, y_min: f64) -> DenseMatrix {
    DenseMatrix::from_fn(values.rows(), values.cols(), |i, j| map_value(values.get(i, j), y_min))
}

/// Number of evaluations made by `sweeps` full sweeps:
/// `2 * d * max_mode * rank^2 * sweeps`.
pub fn compute_budget(d: usize, max_mode: usize, rank: usize, sweeps: usize) -> Result<u64> {
    if d == 0 || max_mode == 0 || rank == 0 || sweeps == 0 {
        return Err(Error::InvalidInput("budget parameters must all be at least 1".into()));
    }
    [d, max_mode, rank, rank, sweeps]
        .iter()
        .try_fold(2u64, |acc, &x| acc.checked_mul(x as u64))
        .ok_or(Error::Overflow("the evaluation budget"))
}

/// Picks up to `target` rows of the tall mapped matrix `a`.
///
/// Returns ascending positions and whether the pivoted-LU fallback was used.
fn select_rows(a: &DenseMatrix, target: usize, tau: f64, max_iters: usize) -> (Vec<usize>, bool) {
    let n = a.rows();
    if n <= target {
        return ((0..n).collect(), false);
    }
    let sub;
    let basis = if a.cols() > target {
        sub = DenseMatrix::from_fn(n, target, |i, j| a.get(i, j));
        &sub
    } else {
        a
    };
    let (mut chosen, fallback) = match maxvol(basis, tau, max_iters) {
        Ok(res) => (res.row_indices, false),
        Err(err) => {
            log::debug!("maxvol failed on a {}x{} matrix ({err}); using pivoted LU rows", n, basis.cols());
            (greedy_pivot_rows(basis), true)
        }
    };
    if chosen.len() < target {
        // Fewer columns than the rank allows: top up with the rows holding the
        // largest mapped values, i.e. the smallest raw values.
        let mut taken = vec![false; n];
        for &i in &chosen {
            taken[i] = true;
        }
        let mut rest: Vec<(f64, usize)> = (0..n)
            .filter(|&i| !taken[i])
            .map(|i| (a.row(i).iter().fold(f64::MIN, |m, &v| m.max(v)), i))
            .collect();
        rest.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        chosen.extend(rest.iter().take(target - chosen.len()).map(|&(_, i)| i));
    }
    chosen.sort_unstable();
    (chosen, fallback)
}

/// Outcome of a single [`SweepState::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub evaluated: u64,
    pub improved: bool,
    /// No further steps can be made.
    pub terminal: bool,
}

/// Index sets and best point carried between sweep steps.
#[derive(Debug, Clone)]
pub struct SweepState {
    shape: TensorShape,
    config: TtOptConfig,
    /// `prefixes[k]` spans modes `0..k`; empty until produced by a forward step.
    prefixes: Vec<PartialIndexSet>,
    /// `suffixes[k]` spans modes `k..d`.
    suffixes: Vec<PartialIndexSet>,
    best: Option<(MultiIndex, f64)>,
    mapped_once: bool,
    evaluations: u64,
    sweeps_completed: usize,
    terminal: bool,
    trace: Trace,
    values: Vec<f64>,
    index_buf: Vec<usize>,
}

impl SweepState {
    /// Fresh state with random column sets drawn from `config.seed`.
    pub fn new(shape: &TensorShape, config: &TtOptConfig) -> Result<Self> {
        config.validate()?;
        let d = shape.dims();
        let heuristic = compute_budget(d, shape.max_mode(), config.rank, 1).unwrap_or(u64::MAX);
        if config.budget < heuristic {
            log::warn!(
                "budget {} is below one full sweep ({heuristic} evaluations for d={d}, rank={})",
                config.budget,
                config.rank
            );
        }
        let placeholder = |side, modes| PartialIndexSet::new(side, modes, &[], shape).expect("empty set");
        let mut prefixes = Vec::with_capacity(d + 1);
        prefixes.push(PartialIndexSet::empty_prefix());
        for k in 1..=d {
            prefixes.push(placeholder(Side::Prefix, 0..k));
        }
        let mut suffixes = Vec::with_capacity(d + 1);
        suffixes.push(placeholder(Side::Suffix, 0..d));
        suffixes.extend(random_suffix_sets(shape, config.rank, config.seed));
        suffixes.push(PartialIndexSet::empty_suffix(d));
        Ok(Self {
            shape: shape.clone(),
            config: config.clone(),
            prefixes,
            suffixes,
            best: None,
            mapped_once: false,
            evaluations: 0,
            sweeps_completed: 0,
            terminal: false,
            trace: Trace::default(),
            values: Vec::new(),
            index_buf: Vec::new(),
        })
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn best(&self) -> Option<(&MultiIndex, f64)> {
        self.best.as_ref().map(|(i, v)| (i, *v))
    }

    pub fn prefixes(&self, k: usize) -> &PartialIndexSet {
        &self.prefixes[k]
    }

    pub fn suffixes(&self, k: usize) -> &PartialIndexSet {
        &self.suffixes[k]
    }

    /// Processes the unfolding at `mode` in the given direction.
    ///
    /// Forward: rows are the prefixes over `0..mode` extended by `mode`,
    /// columns the suffixes over `mode+1..d`; the selected rows become the
    /// prefixes over `0..=mode`. Backward mirrors this for columns.
    pub fn step<G: GridEvaluator + ?Sized>(
        &mut self,
        grid: &mut G,
        mode: usize,
        direction: Direction,
        clock: &dyn Clock,
        mut observer: Option<&mut dyn StepObserver>,
    ) -> Result<StepOutcome> {
        let d = self.shape.dims();
        if mode >= d {
            return Err(Error::InvalidInput(format!("mode {mode} out of range for {d} modes")));
        }
        if self.terminal || self.evaluations >= self.config.budget {
            self.terminal = true;
            return Ok(StepOutcome { evaluated: 0, improved: false, terminal: true });
        }
        let n = self.shape.mode_size(mode);
        let expanded;
        let (rows, cols, side) = match direction {
            Direction::Forward => {
                expanded = expand_rows(&self.prefixes[mode], n);
                (&expanded, &self.suffixes[mode + 1], Side::Prefix)
            }
            Direction::Backward => {
                expanded = expand_cols(n, &self.suffixes[mode + 1]);
                (&self.prefixes[mode], &expanded, Side::Suffix)
            }
        };
        check_grid(rows, cols, d)?;
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{direction:?} step at mode {mode} has no index set to work from"
            )));
        }
        let size = (rows.len() * cols.len()) as u64;
        let remaining = self.config.budget - self.evaluations;
        let limit = size.min(remaining) as usize;
        let truncated = (limit as u64) < size;

        self.values.clear();
        grid.evaluate_grid(&GridRequest { rows, cols, expanded: side, limit }, &mut self.values);
        assert_eq!(self.values.len(), limit, "grid evaluator returned the wrong number of values");

        let mut improved = false;
        for (pos, &v) in self.values.iter().enumerate() {
            let (r, c) = (pos / cols.len(), pos % cols.len());
            if !v.is_finite() {
                unfolding::write_full_index(rows, cols, r, c, &mut self.index_buf);
                return Err(Error::NonFiniteObjective { index: self.index_buf.clone(), value: v });
            }
            if self.best.as_ref().is_none_or(|(_, b)| v < *b) {
                unfolding::write_full_index(rows, cols, r, c, &mut self.index_buf);
                self.best = Some((MultiIndex(self.index_buf.clone()), v));
                self.trace.records.push(TraceRecord {
                    evaluations: self.evaluations + pos as u64 + 1,
                    best_value: v,
                    seconds: clock.elapsed_seconds(),
                });
                improved = true;
            }
        }
        self.evaluations += limit as u64;

        if truncated {
            self.terminal = true;
            if let Some(obs) = observer.as_deref_mut() {
                obs.on_step(&StepReport {
                    mode,
                    direction,
                    rows,
                    cols,
                    values: &self.values,
                    y_min: None,
                    selection_input: None,
                    selected: &[],
                    fallback: false,
                    evaluations: self.evaluations,
                });
            }
            return Ok(StepOutcome { evaluated: limit as u64, improved, terminal: true });
        }

        let best = self.best.as_ref().map(|(_, v)| *v).expect("grid is non-empty");
        let y_min = match (self.mapped_once, self.config.initial_y_min) {
            (false, Some(y)) => y,
            _ => best,
        };
        self.mapped_once = true;
        let (nr, nc) = (rows.len(), cols.len());
        let mapped = match direction {
            Direction::Forward => DenseMatrix::from_fn(nr, nc, |i, j| map_value(self.values[i * nc + j], y_min)),
            Direction::Backward => DenseMatrix::from_fn(nc, nr, |j, i| map_value(self.values[i * nc + j], y_min)),
        };
        let (selected, fallback) =
            select_rows(&mapped, self.config.rank, self.config.maxvol_tau, self.config.maxvol_max_iters);

        if let Some(obs) = observer {
            obs.on_step(&StepReport {
                mode,
                direction,
                rows,
                cols,
                values: &self.values,
                y_min: Some(y_min),
                selection_input: Some(&mapped),
                selected: &selected,
                fallback,
                evaluations: self.evaluations,
            });
        }

        match direction {
            Direction::Forward => self.prefixes[mode + 1] = expanded.select(&selected),
            Direction::Backward => {
                self.suffixes[mode] = expanded.select(&selected);
                if mode == 0 {
                    self.sweeps_completed += 1;
                }
            }
        }
        if self.evaluations >= self.config.budget {
            self.terminal = true;
        }
        Ok(StepOutcome { evaluated: limit as u64, improved, terminal: self.terminal })
    }

    /// Final result; `None` if nothing was evaluated yet.
    pub fn into_result(self) -> Option<OptResult> {
        let (best_index, best_value) = self.best?;
        Some(OptResult {
            best_index,
            best_value,
            evaluations_used: self.evaluations,
            sweeps_completed: self.sweeps_completed,
            trace: self.trace,
        })
    }
}

/// Runs sweeps until the budget is exhausted.
pub struct Optimizer<'a> {
    shape: &'a TensorShape,
    config: &'a TtOptConfig,
    clock: &'a dyn Clock,
    observer: Option<&'a mut dyn StepObserver>,
}

impl<'a> Optimizer<'a> {
    pub fn new(shape: &'a TensorShape, config: &'a TtOptConfig) -> Self {
        Self { shape, config, clock: &NoClock, observer: None }
    }

    pub fn with_clock(mut self, clock: &'a dyn Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_observer(mut self, observer: &'a mut dyn StepObserver) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn run<G: GridEvaluator + ?Sized>(mut self, grid: &mut G) -> Result<OptResult> {
        let mut state = SweepState::new(self.shape, self.config)?;
        let d = self.shape.dims();
        let initial: Vec<&PartialIndexSet> = (1..d).map(|k| state.suffixes(k)).collect();
        grid.prepare(&initial);
        let forward = (0..d).map(|k| (k, Direction::Forward));
        let backward = (0..d).rev().map(|k| (k, Direction::Backward));
        let schedule: Vec<(usize, Direction)> = forward.chain(backward).collect();
        'sweeps: loop {
            for &(k, dir) in &schedule {
                let out = state.step(grid, k, dir, self.clock, self.observer.as_mut().map(|o| &mut **o as &mut dyn StepObserver))?;
                if out.terminal {
                    break 'sweeps;
                }
            }
        }
        Ok(state.into_result().expect("budget >= 1 guarantees an evaluation"))
    }
}

/// Minimizes `objective` over the grid `shape` with point-wise evaluation.
pub fn optimize<O: Objective + ?Sized>(objective: &O, shape: &TensorShape, config: &TtOptConfig) -> Result<OptResult> {
    Optimizer::new(shape, config).run(&mut PointGrid::new(objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use core::cell::Cell;
    use std::println;

    #[test]
    fn mapping_examples() {
        assert_eq!(map_value(3.5, 3.5), FRAC_PI_2);
        assert!((map_value(1.0, 0.0) - core::f64::consts::FRAC_PI_4).abs() < 1e-15);
        let v = DenseMatrix::from_rows(&[[-3.0, 0.0, 5.0]]).unwrap();
        let g = map_values(&v, 0.0);
        let oracle: Vec<f64> = [-3.0f64, 0.0, 5.0].iter().map(|x| FRAC_PI_2 - x.atan()).collect();
        for j in 0..3 {
            assert!((g.get(0, j) - oracle[j]).abs() < 1e-14);
            assert!(g.get(0, j) > 0.0 && g.get(0, j) < PI);
        }
        assert!(g.get(0, 0) > g.get(0, 1) && g.get(0, 1) > g.get(0, 2));
    }

    #[test]
    fn mapping_stays_inside_open_interval() {
        for x in [1e300, -1e300, f64::MAX, -f64::MAX, 1e-300, -1e-300] {
            let g = map_value(x, 0.0);
            assert!(g > 0.0 && g < PI, "g({x}) = {g}");
        }
        assert!(map_value(f64::MAX, -f64::MAX) > 0.0);
    }

    #[test]
    fn budget_formula() {
        assert_eq!(compute_budget(79, 2, 2, 1).unwrap(), 1264);
        assert_eq!(compute_budget(3058, 2, 4, 1).unwrap(), 195_712);
        assert_eq!(compute_budget(8000, 2, 4, 1).unwrap(), 512_000);
        assert_eq!(compute_budget(10, 3, 2, 5).unwrap(), 2 * 10 * 3 * 4 * 5);
        assert_eq!(compute_budget(usize::MAX, 2, 4, 1), Err(Error::Overflow("the evaluation budget")));
        assert!(compute_budget(0, 2, 4, 1).is_err());
    }

    #[test]
    fn config_validation() {
        let shape = TensorShape::binary(3).unwrap();
        let obj = |_: &[usize]| 0.0;
        assert!(optimize(&obj, &shape, &TtOptConfig::new(0, 10)).is_err());
        assert!(optimize(&obj, &shape, &TtOptConfig::new(2, 0)).is_err());
        let mut c = TtOptConfig::new(2, 10);
        c.maxvol_tau = -0.5;
        assert!(optimize(&obj, &shape, &c).is_err());
        c.maxvol_tau = 0.01;
        c.initial_y_min = Some(f64::NAN);
        assert!(optimize(&obj, &shape, &c).is_err());
    }

    #[test]
    fn two_by_two_first_step_is_exhaustive() {
        let shape = TensorShape::binary(2).unwrap();
        let vals = [[3.0, 1.0], [-2.0, 7.0]];
        let obj = |i: &[usize]| vals[i[0]][i[1]];
        let config = TtOptConfig::new(2, 1000);
        let mut state = SweepState::new(&shape, &config).unwrap();
        let out = state.step(&mut PointGrid::new(&obj), 0, Direction::Forward, &NoClock, None).unwrap();
        assert_eq!(out.evaluated, 4);
        assert_eq!(state.best().unwrap().1, -2.0);
        assert_eq!(state.best().unwrap().0 .0, [1, 0]);
    }

    struct Recorder {
        steps: Vec<(usize, Direction, u64, usize, usize)>,
        forward_prefix_sizes: BTreeMap<usize, usize>,
        checked: usize,
    }

    impl StepObserver for Recorder {
        fn on_step(&mut self, r: &StepReport<'_>) {
            let grid = r.values.len();
            self.steps.push((r.mode, r.direction, r.evaluations, grid, r.rows.len() * r.cols.len()));
            if r.direction == Direction::Forward && r.y_min.is_some() {
                self.forward_prefix_sizes.insert(r.mode, r.selected.len());
            }
            if let (Some(m), Some(y)) = (r.selection_input, r.y_min) {
                let nc = r.cols.len();
                for i in 0..r.rows.len() {
                    for j in 0..nc {
                        let want = map_value(r.values[i * nc + j], y);
                        let got = match r.direction {
                            Direction::Forward => m.get(i, j),
                            Direction::Backward => m.get(j, i),
                        };
                        assert_eq!(got.to_bits(), want.to_bits());
                        assert!(got > 0.0 && got < PI);
                    }
                }
                self.checked += 1;
            }
        }
    }

    fn quadratic(d: usize, seed: u64) -> impl Fn(&[usize]) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        move |x: &[usize]| {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += q[i * d + j] * (x[i] * x[j]) as f64;
                }
            }
            s
        }
    }

    #[test]
    fn prefix_sets_follow_clamping_rule() {
        let d = 12;
        let shape = TensorShape::binary(d).unwrap();
        let obj = quadratic(d, 5);
        let config = TtOptConfig::new(4, 64 * d as u64).with_seed(9);
        let mut rec = Recorder { steps: Vec::new(), forward_prefix_sizes: BTreeMap::new(), checked: 0 };
        let res = Optimizer::new(&shape, &config).with_observer(&mut rec).run(&mut PointGrid::new(&obj)).unwrap();
        for k in 0..d {
            assert_eq!(rec.forward_prefix_sizes[&k], 4usize.min(1 << (k + 1)), "mode {k}");
        }
        let mut total = 0;
        for &(_, _, evals, grid, full) in &rec.steps {
            total += grid as u64;
            assert_eq!(evals, total);
            assert!(grid <= full);
        }
        assert_eq!(res.evaluations_used, total);
        assert!(res.evaluations_used <= config.budget);
        assert!(rec.checked > 0);
    }

    #[test]
    fn budget_is_never_exceeded() {
        let shape = TensorShape::binary(9).unwrap();
        let obj = quadratic(9, 1);
        let calls = Cell::new(0u64);
        let counted = |x: &[usize]| {
            calls.set(calls.get() + 1);
            obj(x)
        };
        for budget in [1u64, 3, 17, 100, 333, 1000] {
            calls.set(0);
            let res = optimize(&counted, &shape, &TtOptConfig::new(3, budget)).unwrap();
            assert_eq!(calls.get(), budget);
            assert_eq!(res.evaluations_used, budget);
            assert!(res.trace.is_monotone());
            assert_eq!(obj(&res.best_index).to_bits(), res.best_value.to_bits());
        }
    }

    #[test]
    fn separable_diagonal_finds_optimum() {
        let shape = TensorShape::binary(2).unwrap();
        let obj = |x: &[usize]| -(x[0] as f64) - x[1] as f64;
        let res = optimize(&obj, &shape, &TtOptConfig::new(2, 100)).unwrap();
        assert_eq!(res.best_value, -2.0);
        assert_eq!(res.best_index.0, [1, 1]);

        let shape5 = TensorShape::binary(5).unwrap();
        let ident = |x: &[usize]| x.iter().sum::<usize>() as f64;
        let res = optimize(&ident, &shape5, &TtOptConfig::new(4, 64 * 5)).unwrap();
        assert_eq!(res.best_value, 0.0);
        assert_eq!(res.best_index.0, [0; 5]);
    }

    #[test]
    fn deterministic_per_seed() {
        let shape = TensorShape::binary(10).unwrap();
        let obj = quadratic(10, 77);
        let config = TtOptConfig::new(4, 2000).with_seed(3);
        let a = optimize(&obj, &shape, &config).unwrap();
        let b = optimize(&obj, &shape, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn general_mode_sizes_and_single_mode() {
        let shape = TensorShape::new(vec![5, 3, 7, 4]).unwrap();
        let obj = |x: &[usize]| {
            let t = [2.0, 1.0, 5.0, 0.0];
            x.iter().zip(t).map(|(&v, c)| (v as f64 - c).powi(2)).sum::<f64>()
        };
        let budget = compute_budget(4, 7, 3, 3).unwrap();
        let res = optimize(&obj, &shape, &TtOptConfig::new(3, budget)).unwrap();
        assert_eq!(res.best_index.0, [2, 1, 5, 0]);
        assert!(res.sweeps_completed >= 1);

        let line = TensorShape::new(vec![9]).unwrap();
        let f = |x: &[usize]| (x[0] as f64 - 6.0).abs();
        let res = optimize(&f, &line, &TtOptConfig::new(2, 50)).unwrap();
        assert_eq!(res.best_index.0, [6]);
    }

    #[test]
    fn non_finite_objective_names_index() {
        let shape = TensorShape::binary(3).unwrap();
        let obj = |x: &[usize]| if x == [1, 0, 1] { f64::NAN } else { 1.0 };
        let mut config = TtOptConfig::new(4, 10_000);
        config.seed = 0;
        match optimize(&obj, &shape, &config) {
            Err(Error::NonFiniteObjective { index, .. }) => assert_eq!(index, [1, 0, 1]),
            other => panic!("expected a non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn initial_y_min_only_affects_first_mapping() {
        let shape = TensorShape::binary(6).unwrap();
        let obj = quadratic(6, 4);
        let mut config = TtOptConfig::new(2, 200);
        config.initial_y_min = Some(0.0);
        struct FirstY(Vec<f64>);
        impl StepObserver for FirstY {
            fn on_step(&mut self, r: &StepReport<'_>) {
                if let Some(y) = r.y_min {
                    self.0.push(y);
                }
            }
        }
        let mut ys = FirstY(Vec::new());
        let res = Optimizer::new(&shape, &config).with_observer(&mut ys).run(&mut PointGrid::new(&obj)).unwrap();
        assert_eq!(ys.0[0], 0.0);
        assert_eq!(*ys.0.last().unwrap(), res.best_value);
        println!("y_min sequence: {:?}", &ys.0[..4]);
    }

    #[test]
    fn trace_csv_format() {
        let t = Trace {
            records: vec![
                TraceRecord { evaluations: 1, best_value: 2.5, seconds: 0.0 },
                TraceRecord { evaluations: 7, best_value: -1.0, seconds: 0.25 },
            ],
        };
        assert_eq!(t.to_csv(), "evals,best_value,seconds\n1,2.5,0\n7,-1,0.25\n");
        assert!(t.is_monotone());
    }
}
