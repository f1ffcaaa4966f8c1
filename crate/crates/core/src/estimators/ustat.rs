use num_complex::Complex64;

use super::tuples::{subset_trace_sum, PtRecord};
use super::{check_order, check_snapshot, checkpoint, MomentEstimate, MomentEstimator, Strategy};
use crate::combin::binomial_f64;
use crate::error::{invalid, Error, Result};
use crate::sampler::Snapshot;
use crate::states::Bipartition;

/// The U-statistic: average of the PT trace product over all `C(T, m)`
/// tuples of distinct shots `t_1 < .. < t_m`.
pub fn ustat_offline(
    snapshots: &[Snapshot],
    m: usize,
    part: &Bipartition,
) -> Result<MomentEstimate> {
    if m == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    if snapshots.len() < m {
        return Err(Error::InsufficientData {
            needed: m,
            shots: snapshots.len(),
        });
    }
    for s in snapshots {
        check_snapshot(part, s)?;
    }
    let rec = PtRecord::from_snapshots(part, snapshots);
    Ok(from_record(&rec, m))
}

pub(crate) fn from_record(rec: &PtRecord, m: usize) -> MomentEstimate {
    let t = rec.len();
    let sum = subset_trace_sum(rec, m);
    let value: Complex64 = sum / binomial_f64(t as u64, m as u64);
    MomentEstimate::defined(m, t, value)
}

/// Streaming wrapper around [`ustat_offline`]: keeps the record, evaluates
/// on demand.
#[derive(Clone, Debug)]
pub struct UStatEstimator {
    part: Bipartition,
    max_order: usize,
    record: PtRecord,
}

impl UStatEstimator {
    pub fn new(part: Bipartition, max_order: usize) -> Result<Self> {
        check_order(1, max_order)?;
        let record = PtRecord::new(&part);
        Ok(UStatEstimator {
            part,
            max_order,
            record,
        })
    }

    pub(crate) fn from_parts(part: Bipartition, max_order: usize, record: PtRecord) -> Self {
        UStatEstimator {
            part,
            max_order,
            record,
        }
    }

    pub fn record(&self) -> &PtRecord {
        &self.record
    }
}

impl MomentEstimator for UStatEstimator {
    fn strategy(&self) -> Strategy {
        Strategy::UStatistic
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

    fn estimate(&self, order: usize) -> Result<MomentEstimate> {
        check_order(order, self.max_order)?;
        let t = self.record.len();
        Ok(if t < order {
            MomentEstimate::undefined(order, t)
        } else if order == 1 {
            MomentEstimate::defined(1, t, Complex64::new(1.0, 0.0))
        } else {
            from_record(&self.record, order)
        })
    }

    fn checkpoint(&self) -> Vec<u8> {
        checkpoint::encode_record_state(
            self.strategy(),
            &self.part,
            self.max_order,
            &self.record,
            &[],
        )
    }
}
