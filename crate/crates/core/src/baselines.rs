//! Reference solvers for QUBO problems: exhaustive enumeration, simulated
//! annealing and random search.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qubo::exact::{with_view, Acc, Elem, Storage, View};
use crate::qubo::QuboProblem;
use crate::{Error, Result};

/// Largest problem [`exhaustive`] accepts.
pub const EXHAUSTIVE_MAX_VARS: usize = 24;

/// A binary assignment, its objective value and the number of objective
/// evaluations spent finding it.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<u8>,
    pub value: f64,
    pub evaluations: u64,
}

fn bits_of(mask: u32, f: usize) -> Vec<u8> {
    // x_0 is the most significant bit, so comparing masks compares x lexicographically.
    (0..f).map(|i| ((mask >> (f - 1 - i)) & 1) as u8).collect()
}

fn support_of(x: &[u8]) -> Vec<usize> {
    x.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect()
}

/// Global minimum over all `2^F` assignments; ties go to the lexicographically
/// smallest `x`. Refuses problems with more than [`EXHAUSTIVE_MAX_VARS`] variables.
pub fn exhaustive(q: &QuboProblem) -> Result<Solution> {
    let f = q.size();
    if f > EXHAUSTIVE_MAX_VARS {
        return Err(Error::TooLarge { size: f, limit: EXHAUSTIVE_MAX_VARS });
    }
    let mask = match q.storage() {
        Storage::Narrow { entries, chunk, .. } => gray_search(View { n: f, entries: &entries[..], chunk: *chunk }),
        Storage::Wide { entries, .. } => gray_search(View { n: f, entries: &entries[..], chunk: usize::MAX }),
        Storage::Float(_) => naive_search(q),
    };
    let x = bits_of(mask, f);
    let value = q.evaluate(&x)?;
    Ok(Solution { x, value, evaluations: 1u64 << f })
}

/// Gray-code walk with exact energy and field updates, one flip per state.
fn gray_search<E: Elem<A = i128>>(view: View<'_, E>) -> u32 {
    let f = view.n;
    let mut field = vec![0i128; f];
    let mut x = vec![false; f];
    let mut mask = 0u32;
    let mut energy = 0i128;
    let (mut best, mut best_mask) = (0i128, 0u32);
    for step in 1u64..1 << f {
        // Flip the variable whose mask bit is the lowest set bit of `step`.
        let bit = step.trailing_zeros() as usize;
        let i = f - 1 - bit;
        energy += view.flip_delta(field[i], i, x[i]);
        let row = view.row(i);
        if x[i] {
            for (fj, k) in field.iter_mut().zip(row) {
                *fj -= k.acc();
            }
        } else {
            for (fj, k) in field.iter_mut().zip(row) {
                *fj += k.acc();
            }
        }
        x[i] = !x[i];
        mask ^= 1 << bit;
        if energy < best || (energy == best && mask < best_mask) {
            best = energy;
            best_mask = mask;
        }
    }
    best_mask
}

/// Full re-evaluation of every assignment in lexicographic order.
fn naive_search(q: &QuboProblem) -> u32 {
    let f = q.size();
    let mut best = (f64::INFINITY, 0u32);
    for mask in 0u32..1 << f {
        let v = q.evaluate(&bits_of(mask, f)).expect("valid assignment");
        if v < best.0 {
            best = (v, mask);
        }
    }
    best.1
}

/// Geometric cooling schedule for [`simulated_annealing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaSchedule {
    pub initial_temperature: f64,
    pub final_temperature: f64,
    pub steps: u64,
    pub seed: u64,
}

impl SaSchedule {
    /// Starts at `max |Q_ij|` (1 for a zero matrix) and cools to a thousandth of it.
    pub fn for_problem(q: &QuboProblem, steps: u64, seed: u64) -> Self {
        let m = q.max_abs();
        let t0 = if m > 0.0 { m } else { 1.0 };
        Self { initial_temperature: t0, final_temperature: 1e-3 * t0, steps, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let (t0, t1) = (self.initial_temperature, self.final_temperature);
        if !(t1.is_finite() && t0.is_finite() && t1 > 0.0 && t0 >= t1) {
            return Err(Error::InvalidInput(format!(
                "temperatures must satisfy initial >= final > 0, got {t0} and {t1}"
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidInput("annealing needs at least one step".into()));
        }
        Ok(())
    }

    fn temperature(&self, step: u64) -> f64 {
        if self.steps <= 1 {
            return self.initial_temperature;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        self.initial_temperature * libm::pow(self.final_temperature / self.initial_temperature, t)
    }
}

/// Single-flip Metropolis annealing from a random start; returns the best
/// state visited. Each proposal counts as one evaluation, plus one for the start.
pub fn simulated_annealing(q: &QuboProblem, schedule: &SaSchedule) -> Result<Solution> {
    schedule.validate()?;
    let f = q.size();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let start: Vec<bool> = (0..f).map(|_| rng.random_bool(0.5)).collect();
    let best = with_view!(q.storage(), f, |view, conv| anneal(view, conv, start, schedule, &mut rng));
    let value = q.evaluate(&best)?;
    Ok(Solution { x: best, value, evaluations: schedule.steps + 1 })
}

fn anneal<E: Elem>(
    view: View<'_, E>,
    conv: impl Fn(E::A) -> f64,
    mut x: Vec<bool>,
    schedule: &SaSchedule,
    rng: &mut ChaCha8Rng,
) -> Vec<u8> {
    let f = view.n;
    let support: Vec<usize> = (0..f).filter(|&i| x[i]).collect();
    let mut field = vec![E::A::ZERO; f];
    for &i in &support {
        for (fj, k) in field.iter_mut().zip(view.row(i)) {
            *fj += k.acc();
        }
    }
    let mut energy = view.energy(&support);
    let mut best = (energy, x.clone());
    for step in 0..schedule.steps {
        let temp = schedule.temperature(step);
        let i = rng.random_range(0..f);
        let delta = view.flip_delta(field[i], i, x[i]);
        let d = conv(delta);
        let accept = d <= 0.0 || rng.random::<f64>() < libm::exp(-d / temp);
        if !accept {
            continue;
        }
        let row = view.row(i);
        if x[i] {
            for (fj, k) in field.iter_mut().zip(row) {
                *fj = *fj - k.acc();
            }
        } else {
            for (fj, k) in field.iter_mut().zip(row) {
                *fj += k.acc();
            }
        }
        x[i] = !x[i];
        energy += delta;
        if energy < best.0 {
            best = (energy, x.clone());
        }
    }
    best.1.iter().map(|&b| b as u8).collect()
}

/// Best of `samples` uniformly random assignments.
pub fn random_search(q: &QuboProblem, samples: u64, seed: u64) -> Result<Solution> {
    if samples == 0 {
        return Err(Error::InvalidInput("random search needs at least one sample".into()));
    }
    let f = q.size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<u8>)> = None;
    let mut x = vec![0u8; f];
    for _ in 0..samples {
        x.iter_mut().for_each(|b| *b = rng.random_range(0..2u8));
        let v = q.evaluate_support(&support_of(&x));
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, x.clone()));
        }
    }
    let (value, x) = best.expect("samples >= 1");
    Ok(Solution { x, value, evaluations: samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_problem(f: usize, rng: &mut ChaCha8Rng) -> QuboProblem {
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

    /// Plain floating double sum over all entries.
    fn naive_value(q: &QuboProblem, x: &[u8]) -> f64 {
        let f = q.size();
        let mut t = 0.0;
        for i in 0..f {
            for j in 0..f {
                t += q.entry(i, j) * (x[i] * x[j]) as f64;
            }
        }
        t
    }

    #[test]
    fn exhaustive_examples() {
        let q = QuboProblem::diagonal(&[-1.0, 1.0, -1.0]).unwrap();
        let s = exhaustive(&q).unwrap();
        assert_eq!((s.x, s.value, s.evaluations), (vec![1, 0, 1], -2.0, 8));
        let z = QuboProblem::new(4, vec![0.0; 16]).unwrap();
        let s = exhaustive(&z).unwrap();
        assert_eq!((s.x, s.value), (vec![0; 4], 0.0));
        // Two optima (1,0) and (0,1): the lexicographically smaller wins.
        let tie = QuboProblem::new(2, vec![-1.0, 1.0, 1.0, -1.0]).unwrap();
        assert_eq!(exhaustive(&tie).unwrap().x, [0, 1]);
        let big = QuboProblem::diagonal(&[1.0; 25]).unwrap();
        assert_eq!(exhaustive(&big), Err(Error::TooLarge { size: 25, limit: 24 }));
    }

    #[test]
    fn gray_code_matches_naive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let q = random_problem(10, &mut rng);
            let s = exhaustive(&q).unwrap();
            let mut best = (f64::INFINITY, Vec::new());
            for mask in 0u32..1 << 10 {
                let x = bits_of(mask, 10);
                let v = q.evaluate(&x).unwrap();
                if v < best.0 {
                    best = (v, x);
                }
            }
            assert_eq!(s.x, best.1);
            assert_eq!(s.value, best.0);
            assert!((s.value - naive_value(&q, &s.x)).abs() < 1e-12);
        }
    }

    #[test]
    fn float_storage_exhaustive() {
        let q = QuboProblem::new(3, vec![1e-30, 0.0, 0.0, 0.0, -1e30, 0.5, 0.0, 0.5, -1.0]).unwrap();
        assert!(!q.is_exact());
        // Rounding absorbs the small terms, so (0,1,0) and (0,1,1) tie.
        let s = exhaustive(&q).unwrap();
        assert_eq!(s.x, [0, 1, 0]);
    }

    #[test]
    fn annealing_examples() {
        let q = QuboProblem::diagonal(&[-1.0, -1.0]).unwrap();
        let s = simulated_annealing(&q, &SaSchedule::for_problem(&q, 1000, 1)).unwrap();
        assert_eq!((s.value, s.evaluations), (-2.0, 1001));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..10 {
            let q = random_problem(12, &mut rng);
            let sched = SaSchedule::for_problem(&q, 2000, seed);
            let a = simulated_annealing(&q, &sched).unwrap();
            assert_eq!(a, simulated_annealing(&q, &sched).unwrap());
            assert!(a.value >= exhaustive(&q).unwrap().value);
            assert_eq!(a.value, q.evaluate(&a.x).unwrap());
        }
    }

    #[test]
    fn schedule_validation_and_defaults() {
        let z = QuboProblem::new(2, vec![0.0; 4]).unwrap();
        let s = SaSchedule::for_problem(&z, 10, 0);
        assert_eq!((s.initial_temperature, s.final_temperature), (1.0, 1e-3));
        let q = QuboProblem::new(2, vec![0.5, -3.0, -3.0, 1.0]).unwrap();
        assert_eq!(SaSchedule::for_problem(&q, 10, 0).initial_temperature, 3.0);
        assert!(SaSchedule { steps: 0, ..s }.validate().is_err());
        assert!(SaSchedule { final_temperature: 2.0, ..s }.validate().is_err());
        assert!(SaSchedule { final_temperature: 0.0, ..s }.validate().is_err());
        assert!((s.temperature(9) - 1e-3).abs() < 1e-15);
        assert_eq!(s.temperature(0), 1.0);
    }

    #[test]
    fn random_search_examples() {
        let q = QuboProblem::diagonal(&[-1.0]).unwrap();
        for seed in 0..5 {
            let s = random_search(&q, 100, seed).unwrap();
            assert!(s.value == 0.0 || s.value == -1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = random_problem(12, &mut rng);
        let s = random_search(&q, 500, 3).unwrap();
        assert_eq!(s, random_search(&q, 500, 3).unwrap());
        assert!(s.value >= exhaustive(&q).unwrap().value);
        assert!(random_search(&q, 0, 3).is_err());
    }
}
