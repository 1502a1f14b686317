use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttopt_qubo::baselines::{exhaustive, simulated_annealing, SaSchedule};
use ttopt_qubo::linalg::{maxvol, DEFAULT_MAX_ITERS, DEFAULT_TAU};
use ttopt_qubo::qubo::{build_bqm, constraint_offset, ConstraintSpec};
use ttopt_qubo::ttopt::compute_budget;
use ttopt_qubo::{optimize, DenseMatrix, Objective, QuboProblem, TensorShape, TtOptConfig};

fn random_qubo(seed: u64, f: usize) -> QuboProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![0.0; f * f];
    for i in 0..f {
        for j in i..f {
            let v = rng.random_range(-1.0..1.0);
            q[i * f + j] = v;
            q[j * f + i] = v;
        }
    }
    QuboProblem::new(f, q).unwrap()
}

#[test]
fn budget_table() {
    assert_eq!(compute_budget(79, 2, 2, 1).unwrap(), 1264);
    assert_eq!(compute_budget(3058, 2, 4, 1).unwrap(), 195_712);
    assert_eq!(compute_budget(8000, 2, 4, 1).unwrap(), 512_000);
}

#[test]
fn ttopt_stays_within_budget_and_reports_true_values() {
    for seed in 0..10 {
        let q = random_qubo(seed, 16);
        let budget = 500 + 37 * seed;
        let cfg = TtOptConfig::new(3, budget).with_seed(seed);
        let res = q.minimize_ttopt(&cfg).unwrap();
        assert!(res.evaluations_used <= budget);
        assert!(res.trace.is_monotone());
        let x = ttopt_qubo::qubo::index_to_bits(&res.best_index);
        assert_eq!(q.evaluate(&x).unwrap(), res.best_value);
        assert!(res.best_value >= exhaustive(&q).unwrap().value);
    }
}

#[test]
fn generic_objective_on_a_non_binary_grid() {
    // Separable objective on a 6-mode grid of size 5; optimum at index (3, 3, ...).
    struct Bowl;
    impl Objective for Bowl {
        fn evaluate(&self, index: &[usize]) -> f64 {
            index.iter().map(|&i| (i as f64 - 3.0).powi(2)).sum()
        }
    }
    let shape = TensorShape::new(vec![5; 6]).unwrap();
    let res = optimize(&Bowl, &shape, &TtOptConfig::new(3, 4000).with_seed(1)).unwrap();
    assert_eq!(res.best_value, 0.0);
    assert_eq!(res.best_index.as_slice(), &[3; 6]);
}

#[test]
fn sa_matches_exhaustive_on_small_problems() {
    for seed in 0..5 {
        let q = random_qubo(100 + seed, 10);
        let sa = simulated_annealing(&q, &SaSchedule::for_problem(&q, 20_000, seed)).unwrap();
        assert_eq!(sa.value, exhaustive(&q).unwrap().value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maxvol_rows_dominate(seed in any::<u64>(), n in 8usize..40, r in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DenseMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        let res = maxvol(&a, DEFAULT_TAU, DEFAULT_MAX_ITERS).unwrap();
        prop_assume!(res.converged);
        prop_assert!(res.coefficients.max_abs() <= 1.0 + DEFAULT_TAU);
        prop_assert!(a.select_rows(&res.row_indices).max_abs() >= a.max_abs() / (r * r) as f64);
    }

    #[test]
    fn bqm_offset_identity(seed in any::<u64>(), f in 1usize..20, s in 0.0f64..4.0, p in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fpm = DenseMatrix::zeros(f, f);
        for i in 0..f {
            for j in i..f {
                let v = rng.random_range(-3.0..3.0);
                fpm.set(i, j, v);
                fpm.set(j, i, v);
            }
        }
        let c = ConstraintSpec::new(s, p).unwrap();
        let bqm = build_bqm(&fpm, &c).unwrap();
        let x: Vec<u8> = (0..f).map(|_| rng.random_range(0..2)).collect();
        let mut quad = 0.0;
        for i in 0..f {
            for j in 0..f {
                quad += fpm.get(i, j) * f64::from(x[i] * x[j]);
            }
        }
        let dev = x.iter().map(|&b| f64::from(b)).sum::<f64>() - p * f as f64;
        let offset = constraint_offset(&c, f);
        let value = bqm.evaluate(&x).unwrap();
        let scale = value.abs().max(quad.abs()).max(offset.abs()).max(1.0);
        prop_assert!((value - quad - s * dev * dev - offset).abs() <= 1e-9 * scale);
    }
}
