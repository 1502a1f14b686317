//! Running solvers on loaded problems and reporting the outcome.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use ttopt_qubo::baselines::{exhaustive, random_search, simulated_annealing, SaSchedule};
use ttopt_qubo::qubo::{index_to_bits, selected_fraction};
use ttopt_qubo::ttopt::{Clock, GridEvaluator, GridRequest, Optimizer, PointGrid};
use ttopt_qubo::unfolding::write_full_index;
use ttopt_qubo::{Objective, QuboProblem, Trace, TtOptConfig};

use crate::error::{CliError, CliResult};

/// Wall-clock time since construction.
#[derive(Debug, Clone, Copy)]
pub struct InstantClock(Instant);

impl InstantClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for InstantClock {
    fn elapsed_seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Point-wise grid evaluation on the rayon thread pool.
///
/// Objectives that do not declare themselves safe for concurrent calls are
/// evaluated sequentially. Values are always returned in grid order.
pub struct ParallelGrid<'a, O: ?Sized> {
    objective: &'a O,
}

impl<'a, O: Objective + Sync + ?Sized> ParallelGrid<'a, O> {
    pub fn new(objective: &'a O) -> Self {
        Self { objective }
    }
}

impl<O: Objective + Sync + ?Sized> GridEvaluator for ParallelGrid<'_, O> {
    fn evaluate_grid(&mut self, req: &GridRequest<'_>, out: &mut Vec<f64>) {
        let eval = |pos: usize| {
            let (r, c) = req.cell(pos);
            let mut idx = Vec::with_capacity(req.rows.width() + req.cols.width());
            write_full_index(req.rows, req.cols, r, c, &mut idx);
            self.objective.evaluate(&idx)
        };
        if self.objective.concurrent_safe() {
            let mut values = Vec::new();
            (0..req.limit).into_par_iter().map(eval).collect_into_vec(&mut values);
            out.extend(values);
        } else {
            out.extend((0..req.limit).map(eval));
        }
    }

    fn evaluate_point(&self, index: &[usize]) -> f64 {
        self.objective.evaluate(index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Ttopt,
    Sa,
    Exhaustive,
    Random,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Ttopt => "ttopt",
            SolverKind::Sa => "sa",
            SolverKind::Exhaustive => "exhaustive",
            SolverKind::Random => "random",
        }
    }
}

/// How TTOpt obtains grid values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Evaluator {
    /// Incremental exact evaluation that reuses work between steps.
    #[default]
    Structured,
    /// One objective call per grid cell.
    Point,
    /// Objective calls spread over worker threads.
    Parallel,
}

/// Solver choice and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub rank: usize,
    /// Evaluation budget for TTOpt; also the default for SA steps and random samples.
    pub budget: u64,
    pub seed: u64,
    pub tau: f64,
    pub max_iters: usize,
    pub initial_y_min: Option<f64>,
    pub evaluator: Evaluator,
    pub sa_steps: Option<u64>,
    pub sa_initial_temperature: Option<f64>,
    pub sa_final_temperature: Option<f64>,
    pub samples: Option<u64>,
}

impl SolverConfig {
    pub fn new(kind: SolverKind, rank: usize, budget: u64, seed: u64) -> Self {
        Self {
            kind,
            rank,
            budget,
            seed,
            tau: ttopt_qubo::linalg::DEFAULT_TAU,
            max_iters: ttopt_qubo::linalg::DEFAULT_MAX_ITERS,
            initial_y_min: None,
            evaluator: Evaluator::Structured,
            sa_steps: None,
            sa_initial_temperature: None,
            sa_final_temperature: None,
            samples: None,
        }
    }

    fn ttopt_config(&self) -> TtOptConfig {
        let mut c = TtOptConfig::new(self.rank, self.budget).with_seed(self.seed);
        c.maxvol_tau = self.tau;
        c.maxvol_max_iters = self.max_iters;
        c.initial_y_min = self.initial_y_min;
        c
    }
}

/// What a solver returned, re-verified against the problem.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<u8>,
    pub value: f64,
    pub evaluations: u64,
    pub seconds: f64,
    pub sweeps: Option<usize>,
    pub trace: Option<Trace>,
}

/// Runs the configured solver and checks the reported value by re-evaluation.
pub fn run_solver(q: &QuboProblem, cfg: &SolverConfig) -> CliResult<Outcome> {
    let clock = InstantClock::start();
    let mut out = match cfg.kind {
        SolverKind::Ttopt => {
            let shape = q.shape();
            let config = cfg.ttopt_config();
            let opt = Optimizer::new(&shape, &config).with_clock(&clock);
            let res = match cfg.evaluator {
                Evaluator::Structured => opt.run(&mut q.grid_evaluator())?,
                Evaluator::Point => opt.run(&mut PointGrid::new(&q.as_objective()))?,
                Evaluator::Parallel => opt.run(&mut ParallelGrid::new(&q.as_objective()))?,
            };
            if res.evaluations_used > cfg.budget {
                return Err(CliError::Internal(format!(
                    "{} evaluations used with a budget of {}",
                    res.evaluations_used, cfg.budget
                )));
            }
            if !res.trace.is_monotone() {
                return Err(CliError::Internal("trace is not monotone".into()));
            }
            Outcome {
                x: index_to_bits(&res.best_index),
                value: res.best_value,
                evaluations: res.evaluations_used,
                seconds: 0.0,
                sweeps: Some(res.sweeps_completed),
                trace: Some(res.trace),
            }
        }
        SolverKind::Sa => {
            let mut sched = SaSchedule::for_problem(q, cfg.sa_steps.unwrap_or(cfg.budget), cfg.seed);
            if let Some(t) = cfg.sa_initial_temperature {
                sched.initial_temperature = t;
            }
            if let Some(t) = cfg.sa_final_temperature {
                sched.final_temperature = t;
            }
            from_solution(simulated_annealing(q, &sched)?)
        }
        SolverKind::Exhaustive => from_solution(exhaustive(q)?),
        SolverKind::Random => from_solution(random_search(q, cfg.samples.unwrap_or(cfg.budget), cfg.seed)?),
    };
    out.seconds = clock.elapsed_seconds();
    let check = q.evaluate(&out.x)?;
    if check.to_bits() != out.value.to_bits() {
        return Err(CliError::Internal(format!(
            "reported value {} but the assignment evaluates to {check}",
            out.value
        )));
    }
    Ok(out)
}

fn from_solution(s: ttopt_qubo::baselines::Solution) -> Outcome {
    Outcome { x: s.x, value: s.value, evaluations: s.evaluations, seconds: 0.0, sweeps: None, trace: None }
}

/// Summary of one solver run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub problem: String,
    pub features: usize,
    pub solver: SolverKind,
    pub best_value: f64,
    pub selected: usize,
    pub selected_fraction: f64,
    pub evaluations: u64,
    pub seconds: f64,
    pub sweeps: Option<usize>,
    pub config: SolverConfig,
    /// Comment lines of the problem file, e.g. generator parameters.
    pub source: Vec<String>,
}

impl RunReport {
    pub fn new(problem: &str, q: &QuboProblem, cfg: &SolverConfig, out: &Outcome, source: &[String]) -> CliResult<Self> {
        Ok(Self {
            problem: problem.to_string(),
            features: q.size(),
            solver: cfg.kind,
            best_value: out.value,
            selected: out.x.iter().filter(|&&b| b != 0).count(),
            selected_fraction: selected_fraction(&out.x)?,
            evaluations: out.evaluations,
            seconds: out.seconds,
            sweeps: out.sweeps,
            config: cfg.clone(),
            source: source.to_vec(),
        })
    }

    /// `key = value` lines.
    pub fn to_key_values(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| writeln!(s, "{k} = {v}").unwrap();
        kv("problem", &self.problem);
        kv("features", &self.features);
        kv("solver", &self.solver.name());
        kv("best_value", &format_args!("{:?}", self.best_value));
        kv("selected", &self.selected);
        kv("selected_fraction", &self.selected_fraction);
        kv("evaluations", &self.evaluations);
        kv("seconds", &format_args!("{:.6}", self.seconds));
        kv("seed", &c.seed);
        match c.kind {
            SolverKind::Ttopt => {
                kv("rank", &c.rank);
                kv("budget", &c.budget);
                kv("tau", &c.tau);
                kv("max_iters", &c.max_iters);
                kv("evaluator", &format_args!("{:?}", c.evaluator).to_string().to_lowercase());
                if let Some(y) = c.initial_y_min {
                    kv("initial_y_min", &y);
                }
                if let Some(t) = self.sweeps {
                    kv("sweeps", &t);
                }
            }
            SolverKind::Sa => kv("steps", &c.sa_steps.unwrap_or(c.budget)),
            SolverKind::Random => kv("samples", &c.samples.unwrap_or(c.budget)),
            SolverKind::Exhaustive => {}
        }
        for (k, line) in self.source.iter().enumerate() {
            kv(&format!("source_{k}"), line);
        }
        s
    }

    /// Short human-readable summary.
    pub fn to_text(&self) -> String {
        format!(
            "solver      {}\nfeatures    {}\nbest value  {}\nselected    {}/{} ({:.2}%)\nevaluations {}\ntime        {:.3} s\n",
            self.solver.name(),
            self.features,
            self.best_value,
            self.selected,
            self.features,
            100.0 * self.selected_fraction,
            self.evaluations,
            self.seconds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> QuboProblem {
        crate::synthetic::SyntheticSpec {
            size: 14,
            density: 1.0,
            distribution: crate::synthetic::Distribution::Uniform,
            seed: 2,
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn evaluators_agree_bit_for_bit() {
        let q = problem();
        let mut results = Vec::new();
        for evaluator in [Evaluator::Structured, Evaluator::Point, Evaluator::Parallel] {
            let mut cfg = SolverConfig::new(SolverKind::Ttopt, 3, 900, 7);
            cfg.evaluator = evaluator;
            let out = run_solver(&q, &cfg).unwrap();
            let t = out.trace.unwrap();
            results.push((out.x, out.value.to_bits(), out.evaluations, t.records.iter().map(|r| r.evaluations).collect::<Vec<_>>()));
        }
        assert_eq!(results[0], results[1]);
        assert_eq!(results[0], results[2]);
    }

    #[test]
    fn every_solver_reports_verified_values() {
        let q = problem();
        let exact = run_solver(&q, &SolverConfig::new(SolverKind::Exhaustive, 1, 1, 0)).unwrap();
        for kind in [SolverKind::Ttopt, SolverKind::Sa, SolverKind::Random] {
            let out = run_solver(&q, &SolverConfig::new(kind, 4, 64 * 14, 3)).unwrap();
            assert!(out.value >= exact.value);
            assert!(out.evaluations <= 64 * 14 + 1);
        }
    }

    #[test]
    fn report_lines() {
        let q = QuboProblem::diagonal(&[-1.0, -1.0]).unwrap();
        let cfg = SolverConfig::new(SolverKind::Ttopt, 2, 100, 0);
        let out = run_solver(&q, &cfg).unwrap();
        let r = RunReport::new("d.qubo", &q, &cfg, &out, &["generator size=2".into()]).unwrap();
        let kv = r.to_key_values();
        assert!(kv.contains("best_value = -2.0\n"));
        assert!(kv.contains("selected = 2\n"));
        assert!(kv.contains("selected_fraction = 1\n"));
        assert!(kv.contains("source_0 = generator size=2\n"));
        assert!(r.to_text().contains("selected    2/2"));
    }
}
