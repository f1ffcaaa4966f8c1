//! Versioned binary estimator checkpoints.
//!
//! Layout, little endian:
//!
//! ```text
//! "PTES" | version u8 | strategy tag u8 | max_order u32 | n_batches u32
//!        | T u64 | N u8 | |B| u8 | B qubits (u8 each)
//!        | payload
//! ```
//!
//! Record-based strategies store the packed measurement record (3 bits per
//! qubit outcome, as in shadow files). The reconstruction-free estimator
//! appends its running estimates for orders `1..=max_order` as `(re, im)`
//! pairs of `f64`. Matrix-based strategies store a `u32` count followed by
//! the row-major accumulator matrices as `(re, im)` pairs.

use num_complex::Complex64;

use super::accumulator::{AccumulatorSet, OnlineRecon};
use super::batched::BatchedEstimator;
use super::online::OnlineNoRecon;
use super::plugin::PlugInEstimator;
use super::tuples::PtRecord;
use super::ustat::UStatEstimator;
use super::{MomentEstimator, Strategy};
use crate::error::{Error, Result};
use crate::sampler::{unpack_outcomes, ByteReader, Snapshot};
use crate::states::Bipartition;

const MAGIC: &[u8; 4] = b"PTES";
const VERSION: u8 = 1;

fn header(
    strategy: Strategy,
    part: &Bipartition,
    max_order: usize,
    n_batches: usize,
    shots: usize,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(strategy.tag());
    out.extend_from_slice(&(max_order as u32).to_le_bytes());
    out.extend_from_slice(&(n_batches as u32).to_le_bytes());
    out.extend_from_slice(&(shots as u64).to_le_bytes());
    out.push(part.n_qubits() as u8);
    out.push(part.subsystem_b().len() as u8);
    out.extend(part.subsystem_b().iter().map(|&q| q as u8));
    out
}

fn push_complex(out: &mut Vec<u8>, z: Complex64) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

pub(crate) fn encode_record_state(
    strategy: Strategy,
    part: &Bipartition,
    max_order: usize,
    record: &PtRecord,
    estimates: &[Complex64],
) -> Vec<u8> {
    let mut out = header(strategy, part, max_order, 0, record.len());
    out.extend(record.packed_raw());
    for &z in estimates {
        push_complex(&mut out, z);
    }
    out
}

pub(crate) fn encode_batched(
    part: &Bipartition,
    max_order: usize,
    n_batches: usize,
    record: &PtRecord,
) -> Vec<u8> {
    let mut out = header(Strategy::Batched, part, max_order, n_batches, record.len());
    out.extend(record.packed_raw());
    out
}

pub(crate) fn encode_accumulators(
    strategy: Strategy,
    part: &Bipartition,
    max_order: usize,
    acc: &AccumulatorSet,
) -> Vec<u8> {
    let mut out = header(strategy, part, max_order, 0, acc.shots_seen());
    out.extend_from_slice(&(acc.raw().len() as u32).to_le_bytes());
    for m in acc.raw() {
        for &z in m {
            push_complex(&mut out, z);
        }
    }
    out
}

fn read_complex(r: &mut ByteReader<'_>) -> Result<Complex64> {
    Ok(Complex64::new(r.f64()?, r.f64()?))
}

fn read_record(r: &mut ByteReader<'_>, part: &Bipartition, shots: usize) -> Result<PtRecord> {
    let n = part.n_qubits();
    let bits = shots
        .checked_mul(n * 3)
        .ok_or_else(|| Error::Format("record size overflows".into()))?;
    let bytes = r.take(bits.div_ceil(8))?;
    let outcomes = unpack_outcomes(bytes, shots * n)?;
    let mut rec = PtRecord::new(part);
    for chunk in outcomes.chunks(n) {
        rec.push(&Snapshot::new(chunk.to_vec())?);
    }
    Ok(rec)
}

fn read_matrices(r: &mut ByteReader<'_>, part: &Bipartition) -> Result<Vec<Vec<Complex64>>> {
    let count = r.u32()? as usize;
    let dim = 1usize << part.n_qubits();
    let mut out = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let mut m = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            m.push(read_complex(r)?);
        }
        out.push(m);
    }
    Ok(out)
}

/// Rebuilds an estimator from [`MomentEstimator::checkpoint`] output.
pub fn restore(bytes: &[u8]) -> Result<Box<dyn MomentEstimator>> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not an estimator checkpoint".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let tag = r.u8()?;
    let strategy = Strategy::from_tag(tag)
        .ok_or_else(|| Error::Format(format!("unknown strategy tag {tag}")))?;
    let max_order = r.u32()? as usize;
    let n_batches = r.u32()? as usize;
    let shots =
        usize::try_from(r.u64()?).map_err(|_| Error::Format("shot count too large".into()))?;
    let n = r.u8()? as usize;
    let nb = r.u8()? as usize;
    let b: Vec<usize> = r.take(nb)?.iter().map(|&q| q as usize).collect();
    let part = Bipartition::any_subset(n, b)?;

    let est: Box<dyn MomentEstimator> = match strategy {
        Strategy::UStatistic => {
            let rec = read_record(&mut r, &part, shots)?;
            Box::new(UStatEstimator::from_parts(part, max_order, rec))
        }
        Strategy::Batched => {
            let rec = read_record(&mut r, &part, shots)?;
            Box::new(BatchedEstimator::from_parts(
                part, max_order, n_batches, rec,
            )?)
        }
        Strategy::OnlineNorecon => {
            let rec = read_record(&mut r, &part, shots)?;
            let estimates = (0..max_order)
                .map(|_| read_complex(&mut r))
                .collect::<Result<Vec<_>>>()?;
            Box::new(OnlineNoRecon::from_parts(part, max_order, rec, &estimates)?)
        }
        Strategy::PlugIn | Strategy::OnlineRecon => {
            let mats = read_matrices(&mut r, &part)?;
            let expected = if strategy == Strategy::PlugIn {
                1
            } else {
                max_order
            };
            if mats.len() != expected {
                return Err(Error::Format(format!(
                    "expected {expected} matrices, found {}",
                    mats.len()
                )));
            }
            let acc = AccumulatorSet::from_parts(&part, mats, shots)?;
            if strategy == Strategy::PlugIn {
                Box::new(PlugInEstimator::from_parts(part, max_order, acc))
            } else {
                Box::new(OnlineRecon::from_parts(part, acc))
            }
        }
    };
    if !r.rest().is_empty() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::new_estimator;
    use crate::sampler::stream_shadows;
    use crate::states::werner_state;

    #[test]
    fn every_strategy_resumes_identically() {
        let rho = werner_state(2, 0.9).unwrap();
        let s = stream_shadows(&rho, 30, 41, "w").unwrap().snapshots;
        let part = Bipartition::new(2, [1]).unwrap();
        for strategy in Strategy::ALL {
            let mut a = new_estimator(strategy, &part, 3, 4).unwrap();
            for x in &s[..17] {
                a.observe(x).unwrap();
            }
            let bytes = a.checkpoint();
            let mut b = restore(&bytes).unwrap();
            assert_eq!(b.strategy(), strategy);
            assert_eq!(b.shots_seen(), 17);
            assert_eq!(b.checkpoint(), bytes, "{strategy}");
            for x in &s[17..] {
                a.observe(x).unwrap();
                b.observe(x).unwrap();
            }
            for m in 1..=3 {
                assert_eq!(
                    a.estimate(m).unwrap().value,
                    b.estimate(m).unwrap().value,
                    "{strategy} m={m}"
                );
            }
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let part = Bipartition::balanced(2).unwrap();
        let est = new_estimator(Strategy::OnlineRecon, &part, 2, 2).unwrap();
        let bytes = est.checkpoint();
        assert!(restore(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(restore(&extra).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(restore(&bad).is_err());
        bad = bytes;
        bad[5] = 77;
        assert!(restore(&bad).is_err());
        assert!(restore(b"nope").is_err());
    }
}
