//! Seeded random QUBO instances for benchmarks.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use ttopt_qubo::QuboProblem;

use crate::error::{CliError, CliResult};

/// Entry distribution of a synthetic problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Uniform on `[-1, 1)`.
    Uniform,
    /// Standard normal.
    Normal,
    /// Uniform integers in `-10..=10`.
    Integer,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Uniform => "uniform",
            Distribution::Normal => "normal",
            Distribution::Integer => "integer",
        })
    }
}

/// Parameters of a synthetic dense or sparse symmetric QUBO.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub size: usize,
    #[serde(default = "one")]
    pub density: f64,
    #[serde(default = "uniform")]
    pub distribution: Distribution,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn uniform() -> Distribution {
    Distribution::Uniform
}

/// Real-valued entries are rounded to multiples of this step, which keeps
/// every generated problem on the exact integer evaluation path.
pub const VALUE_STEP: f64 = 1.0 / 4_294_967_296.0;

impl SyntheticSpec {
    /// One-line description stored as a comment in generated files.
    pub fn describe(&self) -> String {
        format!(
            "generator size={} density={} distribution={} seed={}",
            self.size, self.density, self.distribution, self.seed
        )
    }

    /// Builds the problem. Each upper-triangle entry (diagonal included) is
    /// non-zero with probability `density`.
    pub fn generate(&self) -> CliResult<QuboProblem> {
        if self.size == 0 {
            return Err(CliError::Usage("synthetic problems need at least one variable".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(CliError::Usage(format!("density must lie in (0, 1], got {}", self.density)));
        }
        let f = self.size;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut q = vec![0.0; f * f];
        for i in 0..f {
            for j in i..f {
                if self.density < 1.0 && !rng.random_bool(self.density) {
                    continue;
                }
                let v = match self.distribution {
                    Distribution::Uniform => quantize(rng.random_range(-1.0..1.0)),
                    Distribution::Normal => quantize(rng.sample(StandardNormal)),
                    Distribution::Integer => rng.random_range(-10i32..=10) as f64,
                };
                q[i * f + j] = v;
                q[j * f + i] = v;
            }
        }
        Ok(QuboProblem::new(f, q)?)
    }
}

fn quantize(v: f64) -> f64 {
    (v / VALUE_STEP).round() * VALUE_STEP
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_exact() {
        for distribution in [Distribution::Uniform, Distribution::Normal, Distribution::Integer] {
            let spec = SyntheticSpec { size: 30, density: 0.5, distribution, seed: 4 };
            let a = spec.generate().unwrap();
            assert_eq!(a, spec.generate().unwrap());
            assert!(a.is_exact());
            let nnz = a.upper_triplets().len();
            assert!(nnz > 150 && nnz < 320, "{nnz}");
        }
        let dense = SyntheticSpec { size: 10, density: 1.0, distribution: Distribution::Uniform, seed: 1 };
        let q = dense.generate().unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(q.entry(i, j), q.entry(j, i));
                assert!(q.entry(i, j).abs() <= 1.0);
            }
        }
        assert!(SyntheticSpec { density: 0.0, ..dense }.generate().is_err());
        assert!(SyntheticSpec { size: 0, ..dense }.generate().is_err());
    }
}
