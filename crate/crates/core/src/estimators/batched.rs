//! Batched shadows: contiguous blocks of `L = T / N_B` shots are averaged and
//! the U-statistic is taken over the `N_B` block means. Trailing
//! `T mod N_B` shots are left out so every block has the same size.
//!
//! The sum over ordered block subsets is built with the same recursion as the
//! online accumulators, fed with block means instead of single snapshots.

use num_complex::Complex64;

use super::accumulator::AccumulatorSet;
use super::tuples::PtRecord;
use super::{check_order, check_snapshot, checkpoint, MomentEstimate, MomentEstimator, Strategy};
use crate::combin::binomial_f64;
use crate::error::{invalid, Error, Result};
use crate::sampler::Snapshot;
use crate::states::{check_dense_size, Bipartition, ComplexMatrix};

pub fn batched_estimate(
    snapshots: &[Snapshot],
    m: usize,
    part: &Bipartition,
    n_batches: usize,
) -> Result<MomentEstimate> {
    let mut est = BatchedEstimator::new(part.clone(), m, n_batches)?;
    for s in snapshots {
        est.observe(s)?;
    }
    if snapshots.len() < n_batches {
        return Err(Error::InsufficientData {
            needed: n_batches,
            shots: snapshots.len(),
        });
    }
    est.estimate(m)
}

#[derive(Clone, Debug)]
pub struct BatchedEstimator {
    part: Bipartition,
    max_order: usize,
    n_batches: usize,
    record: PtRecord,
}

impl BatchedEstimator {
    pub fn new(part: Bipartition, max_order: usize, n_batches: usize) -> Result<Self> {
        check_order(1, max_order)?;
        check_dense_size(part.n_qubits(), "batched estimator")?;
        if n_batches < max_order {
            return Err(invalid(format!(
                "{n_batches} batches cannot support order {max_order}"
            )));
        }
        let record = PtRecord::new(&part);
        Ok(BatchedEstimator {
            part,
            max_order,
            n_batches,
            record,
        })
    }

    pub(crate) fn from_parts(
        part: Bipartition,
        max_order: usize,
        n_batches: usize,
        record: PtRecord,
    ) -> Result<Self> {
        let mut est = Self::new(part, max_order, n_batches)?;
        est.record = record;
        Ok(est)
    }

    pub fn n_batches(&self) -> usize {
        self.n_batches
    }

    pub fn record(&self) -> &PtRecord {
        &self.record
    }

    /// PT block means, one per batch.
    pub fn batch_means(&self) -> Vec<ComplexMatrix> {
        let t = self.record.len();
        let size = t / self.n_batches;
        if size == 0 {
            return Vec::new();
        }
        (0..self.n_batches)
            .map(|b| {
                let mut acc = AccumulatorSet::new(&self.part, 1).expect("size checked");
                for t in b * size..(b + 1) * size {
                    acc.update_flipped(self.record.shot(t));
                }
                acc.matrix(0) / Complex64::new(size as f64, 0.0)
            })
            .collect()
    }

    fn estimate_all(&self, order: usize) -> MomentEstimate {
        let t = self.record.len();
        let dropped = t % self.n_batches;
        let means = self.batch_means();
        let dim = means[0].nrows();
        // a[k]: sum of ordered (k+1)-fold products of block means
        let mut a = vec![ComplexMatrix::zeros(dim, dim); order];
        for mean in &means {
            for k in (1..order).rev() {
                let prod = &a[k - 1] * mean;
                a[k] += prod;
            }
            a[0] += mean;
        }
        let value = a[order - 1].trace() / binomial_f64(self.n_batches as u64, order as u64);
        let mut e = MomentEstimate::defined(order, t, value);
        e.dropped_shots = dropped;
        e
    }
}

impl MomentEstimator for BatchedEstimator {
    fn strategy(&self) -> Strategy {
        Strategy::Batched
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn shots_seen(&self) -> usize {
        self.record.len()
    }

    fn bipartition(&self) -> &Bipartition {
        &self.part
    }

    fn observe(&mut self, snapshot: &Snapshot) -> Result<()> {
        check_snapshot(&self.part, snapshot)?;
        self.record.push(snapshot);
        Ok(())
    }

    /// Undefined until every batch holds at least one shot.
    fn estimate(&self, order: usize) -> Result<MomentEstimate> {
        check_order(order, self.max_order)?;
        let t = self.record.len();
        Ok(if t < self.n_batches {
            MomentEstimate::undefined(order, t)
        } else if order == 1 {
            let mut e = MomentEstimate::defined(1, t, Complex64::new(1.0, 0.0));
            e.dropped_shots = t % self.n_batches;
            e
        } else {
            self.estimate_all(order)
        })
    }

    fn checkpoint(&self) -> Vec<u8> {
        checkpoint::encode_batched(&self.part, self.max_order, self.n_batches, &self.record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ustat_offline;
    use crate::sampler::stream_shadows;
    use crate::states::werner_state;

    fn snaps(t: usize, seed: u64) -> Vec<Snapshot> {
        let rho = werner_state(2, 5.0 / 6.0).unwrap();
        stream_shadows(&rho, t, seed, "w").unwrap().snapshots
    }

    #[test]
    fn unit_batches_reproduce_ustat() {
        let part = Bipartition::balanced(2).unwrap();
        let s = snaps(24, 31);
        for m in 2..=4 {
            let b = batched_estimate(&s, m, &part, 24).unwrap().value;
            let u = ustat_offline(&s, m, &part).unwrap().value;
            assert!((b - u).norm() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn drops_trailing_shots() {
        let part = Bipartition::balanced(2).unwrap();
        let s = snaps(27, 32);
        let e = batched_estimate(&s, 3, &part, 12).unwrap();
        assert_eq!(e.dropped_shots, 3);
        let trimmed = batched_estimate(&s[..24], 3, &part, 12).unwrap();
        assert_eq!(e.value, trimmed.value);
        assert_eq!(trimmed.dropped_shots, 0);
    }

    #[test]
    fn two_batches_by_hand() {
        let part = Bipartition::balanced(2).unwrap();
        let s = snaps(6, 33);
        let est = {
            let mut e = BatchedEstimator::new(part.clone(), 2, 2).unwrap();
            for x in &s {
                e.observe(x).unwrap();
            }
            e
        };
        let means = est.batch_means();
        let expected = (&means[0] * &means[1]).trace();
        assert!((est.estimate(2).unwrap().value - expected).norm() < 1e-14);
        for mean in &means {
            assert!((mean.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn argument_checks() {
        let part = Bipartition::balanced(2).unwrap();
        assert!(BatchedEstimator::new(part.clone(), 3, 2).is_err());
        assert!(batched_estimate(&snaps(5, 1), 2, &part, 8).is_err());
        let e = batched_estimate(&snaps(10, 1), 1, &part, 4).unwrap();
        assert_eq!(e.value, Complex64::new(1.0, 0.0));
        assert_eq!(e.dropped_shots, 2);
    }
}
