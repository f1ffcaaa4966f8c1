use num_complex::Complex64;

use super::accumulator::AccumulatorSet;
use super::{check_order, check_snapshot, checkpoint, MomentEstimate, MomentEstimator, Strategy};
use crate::error::{invalid, Error, Result};
use crate::sampler::Snapshot;
use crate::states::{Bipartition, ComplexMatrix};

/// `Tr[(ρ̄^{T_B})^m]` with `ρ̄` the mean snapshot. Biased at finite `T`.
pub fn plugin_estimate(
    snapshots: &[Snapshot],
    m: usize,
    part: &Bipartition,
) -> Result<MomentEstimate> {
    if m == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    if snapshots.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            shots: 0,
        });
    }
    let mut est = PlugInEstimator::new(part.clone(), m)?;
    for s in snapshots {
        est.observe(s)?;
    }
    est.estimate(m)
}

pub(crate) fn power_trace(mean: &ComplexMatrix, m: usize) -> Complex64 {
    let mut power = mean.clone();
    for _ in 1..m {
        power = &power * mean;
    }
    power.trace()
}

/// Running sum of PT snapshots; one dense matrix regardless of `max_order`.
#[derive(Clone, Debug)]
pub struct PlugInEstimator {
    part: Bipartition,
    max_order: usize,
    sum: AccumulatorSet,
}

impl PlugInEstimator {
    pub fn new(part: Bipartition, max_order: usize) -> Result<Self> {
        check_order(1, max_order)?;
        let sum = AccumulatorSet::new(&part, 1)?;
        Ok(PlugInEstimator {
            part,
            max_order,
            sum,
        })
    }

    pub(crate) fn from_parts(part: Bipartition, max_order: usize, sum: AccumulatorSet) -> Self {
        PlugInEstimator {
            part,
            max_order,
            sum,
        }
    }

    /// `ρ̄^{T_B}`, or `None` before the first shot.
    pub fn mean_pt(&self) -> Option<ComplexMatrix> {
        let t = self.sum.shots_seen();
        (t > 0).then(|| self.sum.matrix(0) / Complex64::new(t as f64, 0.0))
    }
}

impl MomentEstimator for PlugInEstimator {
    fn strategy(&self) -> Strategy {
        Strategy::PlugIn
    }

    fn max_order(&self) -> usize {
        self.max_order
    }

    fn shots_seen(&self) -> usize {
        self.sum.shots_seen()
    }

    fn bipartition(&self) -> &Bipartition {
        &self.part
    }

    fn observe(&mut self, snapshot: &Snapshot) -> Result<()> {
        check_snapshot(&self.part, snapshot)?;
        self.sum.update(snapshot);
        Ok(())
    }

    fn estimate(&self, order: usize) -> Result<MomentEstimate> {
        check_order(order, self.max_order)?;
        let t = self.sum.shots_seen();
        Ok(match self.mean_pt() {
            None => MomentEstimate::undefined(order, t),
            Some(_) if order == 1 => MomentEstimate::defined(1, t, Complex64::new(1.0, 0.0)),
            Some(mean) => MomentEstimate::defined(order, t, power_trace(&mean, order)),
        })
    }

    fn checkpoint(&self) -> Vec<u8> {
        checkpoint::encode_accumulators(self.strategy(), &self.part, self.max_order, &self.sum)
    }
}
