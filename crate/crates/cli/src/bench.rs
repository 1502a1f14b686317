//! Benchmark batches: every problem is solved by every solver for several
//! seeds, and the outcomes are written as CSV tables.
//!
//! A batch is described by a TOML file:
//!
//! ```toml
//! repeats = 3
//!
//! [[problems]]
//! name = "synthetic-79"
//! synthetic = { size = 79, distribution = "uniform", seed = 1 }
//!
//! [[problems]]
//! name = "external"
//! path = "bqm.qubo"        # relative to the spec file
//!
//! [[solvers]]
//! name = "ttopt-r2"
//! kind = "ttopt"
//! rank = 2
//! budget = 10000
//! ```
//!
//! Output files in the output directory:
//!
//! * `results.csv`: one row per cell with the final value and its relative
//!   error against the best value any cell of the batch found for the problem.
//! * `convergence.csv`: every improvement of every cell (value, relative error
//!   and elapsed time against the number of evaluations).
//! * `traces/<problem>__<solver>__seed<seed>.csv`: the trace of each cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use ttopt_qubo::{QuboProblem, Trace};

use crate::error::{CliError, CliResult};
use crate::formats::{read_problem, write_atomic};
use crate::run::{run_solver, Evaluator, Outcome, SolverConfig, SolverKind};
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "one")]
    pub repeats: u64,
    /// Seed of the first repeat; repeat `r` uses `seed + r`.
    #[serde(default)]
    pub seed: u64,
    pub problems: Vec<ProblemSpec>,
    pub solvers: Vec<SolverSpec>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub name: String,
    pub kind: SolverKind,
    #[serde(default = "default_rank")]
    pub rank: usize,
    pub budget: u64,
    pub tau: Option<f64>,
    pub max_iters: Option<usize>,
    pub initial_y_min: Option<f64>,
    #[serde(default)]
    pub evaluator: Evaluator,
    pub steps: Option<u64>,
    pub samples: Option<u64>,
}

fn default_rank() -> usize {
    4
}

impl SolverSpec {
    fn config(&self, seed: u64) -> SolverConfig {
        let mut c = SolverConfig::new(self.kind, self.rank, self.budget, seed);
        if let Some(t) = self.tau {
            c.tau = t;
        }
        if let Some(k) = self.max_iters {
            c.max_iters = k;
        }
        c.initial_y_min = self.initial_y_min;
        c.evaluator = self.evaluator;
        c.sa_steps = self.steps;
        c.samples = self.samples;
        c
    }
}

impl BenchSpec {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let spec: BenchSpec = toml::from_str(text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(1, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut spec = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut spec.problems {
            if let Some(file) = &p.path {
                if file.is_relative() {
                    p.path = Some(base.join(file));
                }
            }
        }
        Ok(spec)
    }

    fn validate(&self) -> CliResult<()> {
        let valid = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
        for p in &self.problems {
            if !valid(&p.name) {
                return Err(CliError::Usage(format!("problem name `{}` must use only [A-Za-z0-9._-]", p.name)));
            }
            if p.path.is_some() == p.synthetic.is_some() {
                return Err(CliError::Usage(format!("problem `{}` needs exactly one of `path` or `synthetic`", p.name)));
            }
        }
        for s in &self.solvers {
            if !valid(&s.name) {
                return Err(CliError::Usage(format!("solver name `{}` must use only [A-Za-z0-9._-]", s.name)));
            }
        }
        if self.problems.is_empty() || self.solvers.is_empty() {
            return Err(CliError::Usage("a benchmark needs at least one problem and one solver".into()));
        }
        if self.repeats == 0 {
            return Err(CliError::Usage("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one (problem, solver, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub problem: String,
    pub solver: String,
    pub seed: u64,
    pub features: usize,
    pub budget: u64,
    pub value: f64,
    pub evaluations: u64,
    pub seconds: f64,
    pub selected_fraction: f64,
    pub trace: Option<Trace>,
    /// `(value - best) / |best|` against the best value in the batch for the
    /// problem; the plain difference when that best value is zero.
    pub relative_error: f64,
}

fn relative_error(value: f64, best: f64) -> f64 {
    if best == 0.0 {
        value - best
    } else {
        (value - best) / best.abs()
    }
}

/// Runs all cells on `jobs` worker threads and writes the output files.
pub fn run_bench(spec: &BenchSpec, out_dir: &Path, jobs: usize) -> CliResult<Vec<CellResult>> {
    let problems: Vec<(String, QuboProblem)> = spec
        .problems
        .iter()
        .map(|p| {
            let q = match (&p.path, &p.synthetic) {
                (Some(path), _) => read_problem(path)?.problem,
                (_, Some(s)) => s.generate()?,
                _ => unreachable!("validated"),
            };
            Ok((p.name.clone(), q))
        })
        .collect::<CliResult<_>>()?;
    let traces = out_dir.join("traces");
    std::fs::create_dir_all(&traces).map_err(|e| CliError::io(&traces, e))?;

    let mut cells = Vec::new();
    for (pi, _) in problems.iter().enumerate() {
        for (si, _) in spec.solvers.iter().enumerate() {
            for r in 0..spec.repeats {
                cells.push((pi, si, spec.seed + r));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let mut results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(pi, si, seed)| {
                let (name, q) = &problems[pi];
                let solver = &spec.solvers[si];
                let cfg = solver.config(seed);
                let out: Outcome = run_solver(q, &cfg)?;
                log::info!("{name} / {} / seed {seed}: {} in {:.3} s", solver.name, out.value, out.seconds);
                if let Some(t) = &out.trace {
                    let file = traces.join(format!("{name}__{}__seed{seed}.csv", solver.name));
                    write_atomic(&file, t.to_csv().as_bytes())?;
                }
                Ok(CellResult {
                    problem: name.clone(),
                    solver: solver.name.clone(),
                    seed,
                    features: q.size(),
                    budget: cfg.budget,
                    value: out.value,
                    evaluations: out.evaluations,
                    seconds: out.seconds,
                    selected_fraction: ttopt_qubo::qubo::selected_fraction(&out.x)?,
                    trace: out.trace,
                    relative_error: 0.0,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for r in &results {
        let b = best.entry(&r.problem).or_insert(f64::INFINITY);
        *b = b.min(r.value);
    }
    let best: BTreeMap<String, f64> = best.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    for r in &mut results {
        r.relative_error = relative_error(r.value, best[&r.problem]);
    }
    write_atomic(&out_dir.join("results.csv"), results_csv(&results).as_bytes())?;
    write_atomic(&out_dir.join("convergence.csv"), convergence_csv(&results, &best).as_bytes())?;
    Ok(results)
}

pub const RESULTS_HEADER: &str =
    "problem,solver,seed,features,best_value,rel_error_vs_best_in_batch,evaluations,budget,seconds,selected_fraction";

pub const CONVERGENCE_HEADER: &str = "problem,solver,seed,evals,best_value,rel_error_vs_best_in_batch,seconds";

fn results_csv(results: &[CellResult]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in results {
        writeln!(
            s,
            "{},{},{},{},{:?},{:e},{},{},{:.6},{}",
            r.problem,
            r.solver,
            r.seed,
            r.features,
            r.value,
            r.relative_error,
            r.evaluations,
            r.budget,
            r.seconds,
            r.selected_fraction
        )
        .unwrap();
    }
    s
}

fn convergence_csv(results: &[CellResult], best: &BTreeMap<String, f64>) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for r in results {
        let b = best[&r.problem];
        let mut row = |evals: u64, value: f64, secs: f64| {
            writeln!(
                s,
                "{},{},{},{evals},{value:?},{:e},{secs:.6}",
                r.problem,
                r.solver,
                r.seed,
                relative_error(value, b)
            )
            .unwrap()
        };
        match &r.trace {
            Some(t) => t.records.iter().for_each(|rec| row(rec.evaluations, rec.best_value, rec.seconds)),
            None => row(r.evaluations, r.value, r.seconds),
        }
    }
    s
}
