//! Reconstruction-free online U-statistic.
//!
//! After shot `T + 1` the estimate is refreshed as
//!
//! ```text
//! P_{T+1} = (1 - m/(T+1)) P_T + m/(T+1) · S / C(T, m-1)
//! ```
//!
//! where `S` sums the trace products of the `C(T, m-1)` tuples that end at
//! the new shot. Only the measurement record is retained: no `2^N`
//! dimensional object is ever built.

use num_complex::Complex64;

use super::tuples::{fresh_sums, PtRecord};
use super::{check_order, check_snapshot, checkpoint, MomentEstimate, MomentEstimator, Strategy};
use crate::combin::binomial_f64;
use crate::error::{invalid, Result};
use crate::sampler::Snapshot;
use crate::states::Bipartition;

#[derive(Clone, Debug)]
pub struct OnlineNoRecon {
    part: Bipartition,
    max_order: usize,
    record: PtRecord,
    // estimates[k] for order k, NaN until defined
    estimates: Vec<Complex64>,
    last_counts: Vec<u64>,
}

impl OnlineNoRecon {
    pub fn new(part: Bipartition, max_order: usize) -> Result<Self> {
        check_order(1, max_order)?;
        let record = PtRecord::new(&part);
        Ok(OnlineNoRecon {
            part,
            max_order,
            record,
            estimates: vec![Complex64::new(f64::NAN, f64::NAN); max_order + 1],
            last_counts: vec![0; max_order + 1],
        })
    }

    /// Resumes from a stored record and the estimates for orders
    /// `1..=max_order` it produced (as written by a checkpoint).
    pub fn resume(
        part: Bipartition,
        max_order: usize,
        snapshots: &[Snapshot],
        estimates: &[Complex64],
    ) -> Result<Self> {
        for s in snapshots {
            check_snapshot(&part, s)?;
        }
        Self::from_parts(
            part.clone(),
            max_order,
            PtRecord::from_snapshots(&part, snapshots),
            estimates,
        )
    }

    pub(crate) fn from_parts(
        part: Bipartition,
        max_order: usize,
        record: PtRecord,
        estimates: &[Complex64],
    ) -> Result<Self> {
        check_order(1, max_order)?;
        if estimates.len() != max_order {
            return Err(invalid(format!(
                "expected {max_order} stored estimates, got {}",
                estimates.len()
            )));
        }
        let mut all = vec![Complex64::new(f64::NAN, f64::NAN)];
        all.extend_from_slice(estimates);
        Ok(OnlineNoRecon {
            part,
            max_order,
            record,
            estimates: all,
            last_counts: vec![0; max_order + 1],
        })
    }

    pub fn record(&self) -> &PtRecord {
        &self.record
    }

    /// Tuple traces evaluated by the last update, per order (index 0 unused).
    /// At shot `T + 1` order `k` needs exactly `C(T, k - 1)` of them.
    pub fn last_update_counts(&self) -> &[u64] {
        &self.last_counts
    }

    pub(crate) fn raw_estimates(&self) -> &[Complex64] {
        &self.estimates[1..]
    }
}

impl MomentEstimator for OnlineNoRecon {
    fn strategy(&self) -> Strategy {
        Strategy::OnlineNorecon
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
        let g = self.record.flip_codes(snapshot);
        let t = self.record.len();
        let fresh = fresh_sums(&self.record, &g, self.max_order);
        let t_next = (t + 1) as f64;
        self.estimates[1] = Complex64::new(1.0, 0.0);
        for k in 2..=self.max_order {
            if t + 1 < k {
                continue;
            }
            if t + 1 == k {
                // a single tuple: C(T, k-1) = 1
                self.estimates[k] = fresh.sums[k];
                continue;
            }
            let kf = k as f64;
            let fresh_mean = fresh.sums[k] / binomial_f64(t as u64, k as u64 - 1);
            self.estimates[k] =
                self.estimates[k] * (1.0 - kf / t_next) + fresh_mean * (kf / t_next);
        }
        self.last_counts = fresh.counts;
        self.record.push_codes(&g);
        Ok(())
    }

    fn estimate(&self, order: usize) -> Result<MomentEstimate> {
        check_order(order, self.max_order)?;
        let t = self.record.len();
        Ok(if t < order {
            MomentEstimate::undefined(order, t)
        } else {
            MomentEstimate::defined(order, t, self.estimates[order])
        })
    }

    fn checkpoint(&self) -> Vec<u8> {
        checkpoint::encode_record_state(
            self.strategy(),
            &self.part,
            self.max_order,
            &self.record,
            self.raw_estimates(),
        )
    }
}
