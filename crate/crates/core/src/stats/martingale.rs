//! Exact check of the martingale-difference decomposition of a variance
//! on a finite probability space.

use num_traits::Num;
use rand::Rng;
use serde::Serialize;

use crate::{Error, Result};

/// Finite outcome set with probabilities, a random variable and a chain of
/// partitions `P_0` (trivial) to `P_n` (discrete). Partition `i` is given
/// as a block label per outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteFiltrationSpace<F> {
    pub probabilities: Vec<F>,
    pub y: Vec<F>,
    pub partitions: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport<F> {
    pub variance: F,
    pub increment_sum: F,
    pub increments: Vec<F>,
}

impl<F: Num + Clone + PartialOrd> FiniteFiltrationSpace<F> {
    pub fn validate(&self) -> Result<()> {
        let n = self.probabilities.len();
        if n == 0 || self.y.len() != n {
            return Err(Error::InvalidFiltration(
                "outcomes, probabilities and values differ in length".into(),
            ));
        }
        let total = self
            .probabilities
            .iter()
            .cloned()
            .fold(F::zero(), |a, b| a + b);
        if total != F::one() && !tolerates(total - F::one()) {
            return Err(Error::InvalidFiltration(
                "probabilities do not sum to 1".into(),
            ));
        }
        if self.partitions.len() < 2 {
            return Err(Error::InvalidFiltration(
                "need at least the trivial and the discrete partition".into(),
            ));
        }
        if self.partitions.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidFiltration(
                "partition labels must cover every outcome".into(),
            ));
        }
        let first = &self.partitions[0];
        if first.iter().any(|&b| b != first[0]) {
            return Err(Error::InvalidFiltration(
                "first partition must be trivial".into(),
            ));
        }
        let last = &self.partitions[self.partitions.len() - 1];
        for a in 0..n {
            for b in (a + 1)..n {
                if last[a] == last[b] {
                    return Err(Error::InvalidFiltration(
                        "last partition must be discrete".into(),
                    ));
                }
            }
        }
        for w in self.partitions.windows(2) {
            // finer blocks must sit inside coarser ones
            for a in 0..n {
                for b in (a + 1)..n {
                    if w[1][a] == w[1][b] && w[0][a] != w[0][b] {
                        return Err(Error::InvalidFiltration(
                            "partition chain is not a refinement".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `E(Y | P)` evaluated at every outcome.
    fn conditional_expectation(&self, labels: &[usize]) -> Vec<F> {
        let mut blocks: Vec<(usize, F, F)> = Vec::new();
        for (k, &b) in labels.iter().enumerate() {
            let p = self.probabilities[k].clone();
            let py = p.clone() * self.y[k].clone();
            match blocks.iter_mut().find(|(l, _, _)| *l == b) {
                Some(entry) => {
                    entry.1 = entry.1.clone() + p;
                    entry.2 = entry.2.clone() + py;
                }
                None => blocks.push((b, p, py)),
            }
        }
        labels
            .iter()
            .map(|&b| {
                let (_, p, py) = blocks
                    .iter()
                    .find(|(l, _, _)| *l == b)
                    .expect("block present");
                if p.is_zero() {
                    F::zero()
                } else {
                    py.clone() / p.clone()
                }
            })
            .collect()
    }

    fn expectation(&self, values: &[F]) -> F {
        self.probabilities
            .iter()
            .zip(values)
            .fold(F::zero(), |acc, (p, v)| acc + p.clone() * v.clone())
    }

    /// Both sides of `Var Y = Σ_i E[(E(Y|F_i) - E(Y|F_{i-1}))²]`.
    pub fn martingale_identity(&self) -> Result<IdentityReport<F>> {
        self.validate()?;
        let mean = self.expectation(&self.y);
        let centered_sq: Vec<F> = self
            .y
            .iter()
            .map(|v| (v.clone() - mean.clone()) * (v.clone() - mean.clone()))
            .collect();
        let variance = self.expectation(&centered_sq);
        let levels: Vec<Vec<F>> = self
            .partitions
            .iter()
            .map(|p| self.conditional_expectation(p))
            .collect();
        let increments: Vec<F> = levels
            .windows(2)
            .map(|w| {
                let sq: Vec<F> = w[1]
                    .iter()
                    .zip(&w[0])
                    .map(|(a, b)| (a.clone() - b.clone()) * (a.clone() - b.clone()))
                    .collect();
                self.expectation(&sq)
            })
            .collect();
        let increment_sum = increments.iter().cloned().fold(F::zero(), |a, b| a + b);
        Ok(IdentityReport {
            variance,
            increment_sum,
            increments,
        })
    }
}

/// Round-off slack for inexact fields: `|diff| < 1e-12`, written with the
/// field's own unit so exact fields only ever compare against a rational.
fn tolerates<F: Num + Clone + PartialOrd>(diff: F) -> bool {
    let ten = (0..10).fold(F::zero(), |a, _| a + F::one());
    let tiny = (0..24).fold(F::one(), |a, _| a / ten.clone());
    diff.clone() * diff < tiny
}

/// Random space with at most `max_outcomes` outcomes and at most
/// `max_steps` refinements. Probabilities are positive integer weights
/// over their sum and `Y` takes integer values in `[-50, 50]`, so the
/// space is representable exactly in any field.
pub fn random_integer_space<R: Rng>(
    rng: &mut R,
    max_outcomes: usize,
    max_steps: usize,
) -> (Vec<u64>, Vec<i64>, Vec<Vec<usize>>) {
    let n = rng.random_range(1..=max_outcomes.max(1));
    let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..=1000)).collect();
    let y: Vec<i64> = (0..n).map(|_| rng.random_range(-50..=50)).collect();
    let steps = rng.random_range(1..=max_steps.max(1));
    let mut partitions = vec![vec![0usize; n]];
    let mut next_label = 1;
    for _ in 1..steps {
        let mut labels = partitions.last().expect("non-empty").clone();
        // split each block at a random cut with probability 1/2
        let mut blocks: Vec<usize> = labels.clone();
        blocks.sort_unstable();
        blocks.dedup();
        for b in blocks {
            let members: Vec<usize> = (0..n).filter(|&k| labels[k] == b).collect();
            if members.len() > 1 && rng.random_bool(0.5) {
                for &k in &members {
                    if rng.random_bool(0.5) {
                        labels[k] = next_label;
                    }
                }
                next_label += 1;
            }
        }
        partitions.push(labels);
    }
    partitions.push((0..n).collect());
    (weights, y, partitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exact(
        weights: &[u64],
        y: &[i64],
        parts: Vec<Vec<usize>>,
    ) -> FiniteFiltrationSpace<BigRational> {
        let total: u64 = weights.iter().sum();
        FiniteFiltrationSpace {
            probabilities: weights
                .iter()
                .map(|&w| BigRational::new((w as i64).into(), (total as i64).into()))
                .collect(),
            y: y.iter()
                .map(|&v| BigRational::from_integer(v.into()))
                .collect(),
            partitions: parts,
        }
    }

    #[test]
    fn discrete_first_step_equals_variance() {
        let s = exact(&[1, 2, 3], &[4, -1, 7], vec![vec![0, 0, 0], vec![0, 1, 2]]);
        let r = s.martingale_identity().unwrap();
        assert_eq!(r.variance, r.increment_sum);
        assert_eq!(r.increments.len(), 1);
    }

    #[test]
    fn constant_variable_gives_zero() {
        let s = exact(&[1, 1], &[5, 5], vec![vec![0, 0], vec![0, 1]]);
        let r = s.martingale_identity().unwrap();
        assert!(r.variance == BigRational::from_integer(0.into()));
        assert_eq!(r.variance, r.increment_sum);
    }

    #[test]
    fn random_spaces_exact_and_floating() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let (w, y, parts) = random_integer_space(&mut rng, 64, 6);
            let s = exact(&w, &y, parts.clone());
            let r = s.martingale_identity().unwrap();
            assert_eq!(r.variance, r.increment_sum);
            let total: u64 = w.iter().sum();
            let f = FiniteFiltrationSpace {
                probabilities: w.iter().map(|&v| v as f64 / total as f64).collect(),
                y: y.iter().map(|&v| v as f64).collect(),
                partitions: parts,
            };
            let r = f.martingale_identity().unwrap();
            assert!((r.variance - r.increment_sum).abs() < 1e-12 * r.variance.max(1.0));
        }
    }

    #[test]
    fn rejects_bad_chains() {
        let base = exact(&[1, 1, 1], &[1, 2, 3], vec![vec![0, 0, 0], vec![0, 1, 2]]);
        let mut s = base.clone();
        s.partitions = vec![vec![0, 1, 1], vec![0, 1, 2]];
        assert!(s.martingale_identity().is_err());
        let mut s = base.clone();
        s.partitions = vec![vec![0, 0, 0], vec![0, 0, 1]];
        assert!(s.martingale_identity().is_err());
        let mut s = base;
        s.partitions = vec![vec![0, 0, 0], vec![0, 1, 1], vec![1, 0, 2]];
        // relabelled but still a refinement
        assert!(s.martingale_identity().is_ok());
        s.partitions = vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 2], vec![0, 1, 2]];
        assert!(s.martingale_identity().is_ok());
        let mut s2 = s.clone();
        s2.partitions = vec![vec![0, 0, 0], vec![0, 1, 1], vec![0, 0, 1], vec![0, 1, 2]];
        assert!(s2.martingale_identity().is_err());
    }
}
