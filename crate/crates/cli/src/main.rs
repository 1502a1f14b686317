use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ttopt_qubo::qubo::{assemble_fpm, build_bqm, build_fpm, build_ipm, constraint_offset, ConstraintSpec};
use ttopt_qubo_cli::bench::{run_bench, BenchSpec};
use ttopt_qubo_cli::formats::{
    format_solution, read_icm, read_problem, read_similarity, write_atomic, write_problem,
};
use ttopt_qubo_cli::run::{run_solver, Evaluator, RunReport, SolverConfig, SolverKind};
use ttopt_qubo_cli::synthetic::{Distribution, SyntheticSpec};
use ttopt_qubo_cli::{CliError, CliResult};

/// Feature selection QUBO toolkit: build problems, solve them with TTOpt or a
/// baseline, and run benchmark batches.
#[derive(Parser)]
#[command(name = "ttopt-qubo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a problem file (`.qubo` sparse or `.csv` dense).
    Solve(SolveArgs),
    /// Build the feature selection QUBO from item data.
    Build(BuildArgs),
    /// Run a benchmark batch described by a TOML file.
    Bench(BenchArgs),
    /// Write a seeded random problem.
    Generate(GenerateArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    problem: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverKind::Ttopt)]
    solver: SolverKind,
    #[arg(long, default_value_t = 4)]
    rank: usize,
    /// Evaluation budget; defaults to one full sweep at the given rank.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maxvol tolerance.
    #[arg(long)]
    tau: Option<f64>,
    /// Maxvol iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    initial_y_min: Option<f64>,
    #[arg(long, value_enum, default_value_t = Evaluator::Structured)]
    evaluator: Evaluator,
    /// Annealing steps (sa only).
    #[arg(long)]
    steps: Option<u64>,
    /// Sample count (random only).
    #[arg(long)]
    samples: Option<u64>,
    /// Convergence trace CSV (ttopt only).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Key-value report file.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Best assignment as a single 0/1 line.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(clap::Args)]
struct BuildArgs {
    /// Item-feature matrix.
    #[arg(long)]
    icm: PathBuf,
    /// Content-based item similarity.
    #[arg(long)]
    scbf: PathBuf,
    /// Collaborative item similarity.
    #[arg(long)]
    scf: PathBuf,
    /// Penalty weight. Several values give one output file each.
    #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    strength: f64,
    #[arg(long, default_value_t = 0.0)]
    fraction: f64,
    /// Similarities at or below this count as zero.
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides `repeats` in the spec.
    #[arg(long)]
    repeats: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, value_enum, default_value_t = Distribution::Uniform)]
    distribution: Distribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn solve(a: SolveArgs) -> CliResult<()> {
    if a.solver != SolverKind::Ttopt {
        let ttopt_only = [
            ("--trace", a.trace.is_some()),
            ("--tau", a.tau.is_some()),
            ("--max-iters", a.max_iters.is_some()),
            ("--initial-y-min", a.initial_y_min.is_some()),
        ];
        if let Some((flag, _)) = ttopt_only.iter().find(|f| f.1) {
            return Err(CliError::Usage(format!("{flag} needs --solver ttopt")));
        }
    }
    if a.steps.is_some() && a.solver != SolverKind::Sa {
        return Err(CliError::Usage("--steps needs --solver sa".into()));
    }
    if a.samples.is_some() && a.solver != SolverKind::Random {
        return Err(CliError::Usage("--samples needs --solver random".into()));
    }
    let loaded = read_problem(&a.problem)?;
    let q = &loaded.problem;
    let budget = match a.budget {
        Some(m) => m,
        None => ttopt_qubo::ttopt::compute_budget(q.size(), 2, a.rank, 1)?,
    };
    let mut cfg = SolverConfig::new(a.solver, a.rank, budget, a.seed);
    if let Some(t) = a.tau {
        cfg.tau = t;
    }
    if let Some(k) = a.max_iters {
        cfg.max_iters = k;
    }
    cfg.initial_y_min = a.initial_y_min;
    cfg.evaluator = a.evaluator;
    cfg.sa_steps = a.steps;
    cfg.samples = a.samples;

    let out = run_solver(q, &cfg)?;
    let report = RunReport::new(&a.problem.display().to_string(), q, &cfg, &out, &loaded.comments)?;
    print!("{}", report.to_text());
    if let Some(p) = &a.report {
        write_atomic(p, report.to_key_values().as_bytes())?;
    }
    if let Some(p) = &a.solution {
        write_atomic(p, format_solution(&out.x).as_bytes())?;
    }
    if let (Some(p), Some(t)) = (&a.trace, &out.trace) {
        write_atomic(p, t.to_csv().as_bytes())?;
    }
    Ok(())
}

/// `bqm.qubo` with beta 0.001 becomes `bqm_beta0.001.qubo`.
fn beta_path(out: &Path, beta: f64) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_beta{beta}.{}", ext.to_string_lossy()),
        None => format!("{stem}_beta{beta}"),
    };
    out.with_file_name(name)
}

fn build(a: BuildArgs) -> CliResult<()> {
    let icm = read_icm(&a.icm)?;
    let scbf = read_similarity(&a.scbf)?;
    let scf = read_similarity(&a.scf)?;
    let items = icm.rows();
    for (path, m) in [(&a.scbf, &scbf), (&a.scf, &scf)] {
        if m.rows() != items || m.cols() != items {
            return Err(CliError::Usage(format!(
                "{} is {}x{} but {} has {items} items",
                path.display(),
                m.rows(),
                m.cols(),
                a.icm.display()
            )));
        }
    }
    let constraint = ConstraintSpec::new(a.strength, a.fraction)?;
    let parts = build_fpm(&icm, &build_ipm(&scbf, &scf, a.epsilon)?)?;
    let f = icm.cols();
    let offset = constraint_offset(&constraint, f);
    for &beta in &a.beta {
        let q = build_bqm(&assemble_fpm(&parts, beta)?, &constraint)?;
        let path = if a.beta.len() == 1 { a.out.clone() } else { beta_path(&a.out, beta) };
        let comments = vec![
            format!(
                "bqm beta={beta} strength={} fraction={} epsilon={}",
                a.strength, a.fraction, a.epsilon
            ),
            format!("offset {offset:?}"),
        ];
        write_problem(&path, &q, &comments)?;
        let nnz = q.upper_triplets().len();
        let density = nnz as f64 / (f * (f + 1) / 2).max(1) as f64;
        println!(
            "{}: features {f}, density {density:.6}, offset {offset:?}",
            path.display()
        );
    }
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let mut spec = BenchSpec::load(&a.spec)?;
    if let Some(r) = a.repeats {
        if r == 0 {
            return Err(CliError::Usage("--repeats must be at least 1".into()));
        }
        spec.repeats = r;
    }
    let results = run_bench(&spec, &a.out_dir, a.jobs)?;
    println!("{:<20} {:<16} {:>6} {:>22} {:>12} {:>10}", "problem", "solver", "seed", "best value", "rel error", "seconds");
    for r in &results {
        println!(
            "{:<20} {:<16} {:>6} {:>22} {:>12.3e} {:>10.3}",
            r.problem, r.solver, r.seed, r.value, r.relative_error, r.seconds
        );
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> CliResult<()> {
    let spec = SyntheticSpec { size: a.size, density: a.density, distribution: a.distribution, seed: a.seed };
    let q = spec.generate()?;
    write_problem(&a.out, &q, &[spec.describe()])
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let res = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Build(a) => build(a),
        Command::Bench(a) => bench(a),
        Command::Generate(a) => generate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
