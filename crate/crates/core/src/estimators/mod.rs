//! PT-moment estimators behind a common streaming interface.
//!
//! | strategy          | state kept                   | per-shot cost        |
//! |-------------------|------------------------------|----------------------|
//! | `ustat`           | measurement record           | none (evaluated on demand, `Θ(T^m N)`) |
//! | `plugin`          | running snapshot sum (dense) | `Θ(4^N N)`           |
//! | `batched`         | measurement record           | none (evaluated on demand) |
//! | `online-norecon`  | measurement record           | `Θ(T^{m-1} N)`       |
//! | `online-recon`    | `m` dense accumulators       | `Θ(m 4^N N)`, independent of `T` |
//!
//! Every estimator handles orders `1..=max_order` in a single pass. Order 1
//! is identically 1 (every snapshot has unit trace) and is reported as such.
//! Values are complex; the moment estimate is the real part and the
//! imaginary part is kept as a diagnostic.

mod accumulator;
mod batched;
mod checkpoint;
mod online;
mod plugin;
pub(crate) mod tuples;
mod ustat;

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampler::Snapshot;
use crate::states::Bipartition;

pub use accumulator::{online_recon_estimate, AccumulatorSet, OnlineRecon};
pub use batched::{batched_estimate, BatchedEstimator};
pub use checkpoint::restore;
pub use online::OnlineNoRecon;
pub use plugin::{plugin_estimate, PlugInEstimator};
pub use tuples::PtRecord;
pub use ustat::{ustat_offline, UStatEstimator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[serde(rename = "ustat")]
    UStatistic,
    #[serde(rename = "plugin")]
    PlugIn,
    Batched,
    OnlineNorecon,
    OnlineRecon,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::UStatistic,
        Strategy::PlugIn,
        Strategy::Batched,
        Strategy::OnlineNorecon,
        Strategy::OnlineRecon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::UStatistic => "ustat",
            Strategy::PlugIn => "plugin",
            Strategy::Batched => "batched",
            Strategy::OnlineNorecon => "online-norecon",
            Strategy::OnlineRecon => "online-recon",
        }
    }

    /// Numeric tag used in binary checkpoints and CSV output.
    pub fn tag(self) -> u8 {
        match self {
            Strategy::UStatistic => 0,
            Strategy::PlugIn => 1,
            Strategy::Batched => 2,
            Strategy::OnlineNorecon => 3,
            Strategy::OnlineRecon => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Strategy> {
        Self::ALL.into_iter().find(|s| s.tag() == tag)
    }

    pub fn is_unbiased(self) -> bool {
        self != Strategy::PlugIn
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| invalid(format!("unknown strategy {s:?}")))
    }
}

/// Estimate of `Tr[(ρ^{T_B})^order]` after `shots_seen` shots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: usize,
    pub shots_seen: usize,
    /// NaN when not well defined.
    pub value: Complex64,
    pub well_defined: bool,
    /// Shots excluded from the estimate (batched estimator only).
    pub dropped_shots: usize,
}

impl MomentEstimate {
    pub(crate) fn defined(order: usize, shots_seen: usize, value: Complex64) -> Self {
        MomentEstimate {
            order,
            shots_seen,
            value,
            well_defined: true,
            dropped_shots: 0,
        }
    }

    pub(crate) fn undefined(order: usize, shots_seen: usize) -> Self {
        MomentEstimate {
            order,
            shots_seen,
            value: Complex64::new(f64::NAN, f64::NAN),
            well_defined: false,
            dropped_shots: 0,
        }
    }

    /// The reported moment estimate.
    pub fn real(&self) -> f64 {
        self.value.re
    }

    /// Diagnostic: zero in expectation.
    pub fn imag(&self) -> f64 {
        self.value.im
    }
}

/// A single-writer estimator fed one snapshot at a time, in shot order.
pub trait MomentEstimator: Send {
    fn strategy(&self) -> Strategy;

    fn max_order(&self) -> usize;

    fn shots_seen(&self) -> usize;

    fn bipartition(&self) -> &Bipartition;

    fn observe(&mut self, snapshot: &Snapshot) -> Result<()>;

    /// Current estimate for `order` in `1..=max_order`. Returns an estimate
    /// with `well_defined == false` while too few shots have been seen.
    fn estimate(&self, order: usize) -> Result<MomentEstimate>;

    /// Versioned binary checkpoint, see [`restore`].
    fn checkpoint(&self) -> Vec<u8>;
}

/// Builds an empty estimator. `n_batches` is used by the batched strategy only.
pub fn new_estimator(
    strategy: Strategy,
    part: &Bipartition,
    max_order: usize,
    n_batches: usize,
) -> Result<Box<dyn MomentEstimator>> {
    Ok(match strategy {
        Strategy::UStatistic => Box::new(UStatEstimator::new(part.clone(), max_order)?),
        Strategy::PlugIn => Box::new(PlugInEstimator::new(part.clone(), max_order)?),
        Strategy::Batched => Box::new(BatchedEstimator::new(part.clone(), max_order, n_batches)?),
        Strategy::OnlineNorecon => Box::new(OnlineNoRecon::new(part.clone(), max_order)?),
        Strategy::OnlineRecon => Box::new(OnlineRecon::new(part.clone(), max_order)?),
    })
}

pub(crate) fn check_order(order: usize, max_order: usize) -> Result<()> {
    if order == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    if order > max_order {
        return Err(Error::UnsupportedOrder {
            order,
            max: max_order,
        });
    }
    Ok(())
}

pub(crate) fn check_snapshot(part: &Bipartition, s: &Snapshot) -> Result<()> {
    if s.n_qubits() != part.n_qubits() {
        return Err(invalid(format!(
            "snapshot has {} qubits, estimator expects {}",
            s.n_qubits(),
            part.n_qubits()
        )));
    }
    Ok(())
}

/// Allocation counter for `2^N x 2^N` matrices made by estimators.
pub mod instrument {
    use super::*;

    thread_local! {
        static DENSE_ALLOCS: Cell<usize> = const { Cell::new(0) };
    }

    /// Dense matrices allocated on the current thread so far.
    pub fn dense_allocations() -> usize {
        DENSE_ALLOCS.with(Cell::get)
    }

    pub(crate) fn zeros(dim: usize) -> Vec<Complex64> {
        DENSE_ALLOCS.with(|c| c.set(c.get() + 1));
        vec![Complex64::new(0.0, 0.0); dim * dim]
    }
}
