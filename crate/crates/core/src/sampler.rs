//! In-silico classical shadows: random Pauli-basis measurements of a
//! density matrix sampled exactly from the Born rule.
//!
//! Each shot picks an axis in `{Z, X, Y}` per qubit uniformly at random,
//! rotates the state so that axis becomes the computational basis, and draws
//! the outcome bit string from the resulting diagonal. Outcome `0` on an axis
//! means the `+1` eigenstate of that Pauli (`|0>`, `|+>`, `|+i>`), so the
//! single-qubit snapshot factor is `I/2 + (3/2)(-1)^b P`.
//!
//! Randomness is counter-based: shot `i` of a stream with seed `s` draws from
//! a ChaCha8 generator keyed by `s` on stream `i`, so any shot can be
//! regenerated independently and parallel generation reproduces the
//! sequential record bit for bit.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::states::{check_dense_size, qubit_mask, ComplexMatrix, DensityMatrix};

/// Measured Pauli axis. The discriminant is the wire code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    Z = 0,
    X = 1,
    Y = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Z, Axis::X, Axis::Y];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Axis::Z => 'Z',
            Axis::X => 'X',
            Axis::Y => 'Y',
        }
    }

    /// Columns are the eigenvectors for outcomes 0 and 1.
    fn eigenbasis(self) -> [[Complex64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = |x: f64| Complex64::new(x, 0.0);
        match self {
            Axis::Z => [[r(1.0), r(0.0)], [r(0.0), r(1.0)]],
            Axis::X => [[r(h), r(h)], [r(h), r(-h)]],
            Axis::Y => [
                [r(h), r(h)],
                [Complex64::new(0.0, h), Complex64::new(0.0, -h)],
            ],
        }
    }
}

/// One qubit's measurement: axis and outcome bit (`true` = 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub axis: Axis,
    pub bit: bool,
}

impl Outcome {
    pub fn new(axis: Axis, bit: u8) -> Self {
        debug_assert!(bit <= 1);
        Outcome {
            axis,
            bit: bit != 0,
        }
    }

    /// `(-1)^bit`.
    pub fn sign(self) -> f64 {
        if self.bit {
            -1.0
        } else {
            1.0
        }
    }

    /// Dense index in `0..6`: `2 * axis + bit`.
    pub fn code(self) -> u8 {
        (self.axis.index() as u8) << 1 | self.bit as u8
    }

    pub fn from_code(code: u8) -> Option<Outcome> {
        Axis::from_index((code >> 1) as usize).map(|axis| Outcome {
            axis,
            bit: code & 1 == 1,
        })
    }
}

/// A single shot: one outcome per qubit, qubit 0 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Snapshot {
    outcomes: Vec<Outcome>,
}

impl Snapshot {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(invalid("a snapshot needs at least one qubit"));
        }
        Ok(Snapshot { outcomes })
    }

    pub fn n_qubits(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn outcome(&self, qubit: usize) -> Outcome {
        self.outcomes[qubit]
    }

    pub(crate) fn outcomes_mut(&mut self) -> &mut [Outcome] {
        &mut self.outcomes
    }

    /// Per-qubit outcome codes, see [`Outcome::code`].
    pub fn codes(&self) -> impl Iterator<Item = u8> + '_ {
        self.outcomes.iter().map(|o| o.code())
    }
}

impl fmt::Display for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            write!(f, "{}{}", o.axis.symbol(), o.bit as u8)?;
        }
        Ok(())
    }
}

impl FromStr for Snapshot {
    type Err = Error;

    /// Parses the compact form `"Z0X1Y0"`.
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if !chars.len().is_multiple_of(2) {
            return Err(Error::Format(format!("odd-length snapshot string {s:?}")));
        }
        let outcomes = chars
            .chunks(2)
            .map(|pair| {
                let axis = match pair[0] {
                    'Z' => Axis::Z,
                    'X' => Axis::X,
                    'Y' => Axis::Y,
                    c => return Err(Error::Format(format!("unknown axis {c:?}"))),
                };
                let bit = match pair[1] {
                    '0' => 0,
                    '1' => 1,
                    c => return Err(Error::Format(format!("unknown outcome {c:?}"))),
                };
                Ok(Outcome::new(axis, bit))
            })
            .collect::<Result<Vec<_>>>()?;
        Snapshot::new(outcomes).map_err(|e| Error::Format(e.to_string()))
    }
}

impl From<Snapshot> for String {
    fn from(s: Snapshot) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for Snapshot {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// `I/2 + (3/2) s P` for one qubit, row-major.
pub fn factor_matrix(o: Outcome) -> [[Complex64; 2]; 2] {
    let s = o.sign();
    let half = Complex64::new(0.5, 0.0);
    let a = 1.5 * s;
    let z = Complex64::new(0.0, 0.0);
    match o.axis {
        Axis::Z => [[half + a, z], [z, half - a]],
        Axis::X => [
            [half, Complex64::new(a, 0.0)],
            [Complex64::new(a, 0.0), half],
        ],
        Axis::Y => [
            [half, Complex64::new(0.0, -a)],
            [Complex64::new(0.0, a), half],
        ],
    }
}

/// Dense `2^N x 2^N` snapshot matrix `⊗_n (3 U_n^† |b_n><b_n| U_n - I)`.
pub fn snapshot_matrix(s: &Snapshot) -> Result<ComplexMatrix> {
    let n = s.n_qubits();
    check_dense_size(n, "snapshot matrix")?;
    let factors: Vec<_> = s.outcomes.iter().map(|&o| factor_matrix(o)).collect();
    let dim = 1usize << n;
    Ok(ComplexMatrix::from_fn(dim, dim, |i, j| {
        factors
            .iter()
            .enumerate()
            .map(|(q, f)| {
                let bi = (i >> (n - 1 - q)) & 1;
                let bj = (j >> (n - 1 - q)) & 1;
                f[bi][bj]
            })
            .product()
    }))
}

/// Counter-based generator for shot `index` of the stream keyed by `seed`.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

// precompute every axis assignment when 3^N * 2^N stays below this
const CACHE_LIMIT: usize = 1 << 16;

/// Exact Born-rule sampler for a fixed density matrix.
#[derive(Clone, Debug)]
pub struct BornSampler {
    rho: DensityMatrix,
    // outcome distributions indexed by base-3 axis assignment (qubit 0 most significant)
    cache: Option<Vec<Vec<f64>>>,
}

impl BornSampler {
    /// Validates `rho` (Hermitian, unit trace, PSD) before sampling from it.
    pub fn new(rho: DensityMatrix) -> Result<Self> {
        rho.check_physical()?;
        let n = rho.n_qubits();
        let configs = 3usize.pow(n as u32);
        let cache = (configs.saturating_mul(1 << n) <= CACHE_LIMIT).then(|| {
            (0..configs)
                .map(|c| born_distribution(&rho, &axes_from_config(n, c)))
                .collect()
        });
        Ok(BornSampler { rho, cache })
    }

    pub fn n_qubits(&self) -> usize {
        self.rho.n_qubits()
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    /// Outcome distribution over `2^N` bit strings for the given axes.
    pub fn distribution(&self, axes: &[Axis]) -> Vec<f64> {
        match &self.cache {
            Some(cache) => cache[config_from_axes(axes)].clone(),
            None => born_distribution(&self.rho, axes),
        }
    }

    /// Draws one snapshot: uniform axes, then a Born-rule outcome.
    pub fn sample_snapshot<R: Rng + ?Sized>(&self, rng: &mut R) -> Snapshot {
        let n = self.n_qubits();
        let axes: Vec<Axis> = (0..n)
            .map(|_| Axis::ALL[rng.gen_range(0..3usize)])
            .collect();
        let u: f64 = rng.gen();
        let b = match &self.cache {
            Some(cache) => pick(&cache[config_from_axes(&axes)], u),
            None => pick(&born_distribution(&self.rho, &axes), u),
        };
        let outcomes = axes
            .iter()
            .enumerate()
            .map(|(q, &axis)| Outcome {
                axis,
                bit: b & qubit_mask(n, q) != 0,
            })
            .collect();
        Snapshot { outcomes }
    }

    /// Shot `index` of the stream keyed by `seed`.
    pub fn sample_shot(&self, seed: u64, index: u64) -> Snapshot {
        self.sample_snapshot(&mut shot_rng(seed, index))
    }

    /// Lazily pulls shots `0, 1, 2, ...` in order.
    pub fn stream(&self, seed: u64) -> ShadowStream<'_> {
        ShadowStream {
            sampler: self,
            seed,
            next: 0,
        }
    }
}

fn axes_from_config(n: usize, mut config: usize) -> Vec<Axis> {
    let mut axes = vec![Axis::Z; n];
    for q in (0..n).rev() {
        axes[q] = Axis::ALL[config % 3];
        config /= 3;
    }
    axes
}

fn config_from_axes(axes: &[Axis]) -> usize {
    axes.iter().fold(0, |acc, a| acc * 3 + a.index())
}

fn pick(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return i;
        }
    }
    // rounding at the top of the range: last outcome with nonzero weight
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Diagonal of `W^† rho W` with `W = ⊗_n V_n`, `V_n` the eigenbasis of each axis.
fn born_distribution(rho: &DensityMatrix, axes: &[Axis]) -> Vec<f64> {
    let n = rho.n_qubits();
    let dim = rho.dim();
    let src = rho.matrix();
    let mut m: Vec<Complex64> = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            m.push(src[(i, j)]);
        }
    }
    for (q, &axis) in axes.iter().enumerate() {
        if axis == Axis::Z {
            continue;
        }
        let v = axis.eigenbasis();
        let mask = qubit_mask(n, q);
        // rows: M <- V^† M on qubit q
        for r0 in (0..dim).filter(|r| r & mask == 0) {
            let r1 = r0 | mask;
            for c in 0..dim {
                let a = m[r0 * dim + c];
                let b = m[r1 * dim + c];
                m[r0 * dim + c] = v[0][0].conj() * a + v[1][0].conj() * b;
                m[r1 * dim + c] = v[0][1].conj() * a + v[1][1].conj() * b;
            }
        }
        // columns: M <- M V on qubit q
        for r in 0..dim {
            let row = &mut m[r * dim..(r + 1) * dim];
            for c0 in (0..dim).filter(|c| c & mask == 0) {
                let c1 = c0 | mask;
                let a = row[c0];
                let b = row[c1];
                row[c0] = a * v[0][0] + b * v[1][0];
                row[c1] = a * v[0][1] + b * v[1][1];
            }
        }
    }
    (0..dim).map(|i| m[i * dim + i].re.max(0.0)).collect()
}

/// Iterator over the shots of one seeded stream, in index order.
pub struct ShadowStream<'a> {
    sampler: &'a BornSampler,
    seed: u64,
    next: u64,
}

impl ShadowStream<'_> {
    pub fn shots_drawn(&self) -> u64 {
        self.next
    }
}

impl Iterator for ShadowStream<'_> {
    type Item = Snapshot;

    fn next(&mut self) -> Option<Snapshot> {
        let s = self.sampler.sample_shot(self.seed, self.next);
        self.next += 1;
        Some(s)
    }
}

/// An ordered collection of snapshots with enough provenance to replay it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowRecord {
    pub n_qubits: usize,
    pub seed: u64,
    pub descriptor: String,
    pub snapshots: Vec<Snapshot>,
}

/// `T` snapshots of `rho`, generated in parallel and assembled in shot order.
pub fn stream_shadows(
    rho: &DensityMatrix,
    count: usize,
    seed: u64,
    descriptor: impl Into<String>,
) -> Result<ShadowRecord> {
    let sampler = BornSampler::new(rho.clone())?;
    sample_record(&sampler, count, seed, descriptor)
}

/// Like [`stream_shadows`] for an already-validated sampler.
pub fn sample_record(
    sampler: &BornSampler,
    count: usize,
    seed: u64,
    descriptor: impl Into<String>,
) -> Result<ShadowRecord> {
    if count == 0 {
        return Err(invalid("a shadow record needs at least one shot"));
    }
    let snapshots = (0..count as u64)
        .into_par_iter()
        .map(|i| sampler.sample_shot(seed, i))
        .collect();
    Ok(ShadowRecord {
        n_qubits: sampler.n_qubits(),
        seed,
        descriptor: descriptor.into(),
        snapshots,
    })
}

const RECORD_MAGIC: &[u8; 4] = b"PTSH";
const RECORD_VERSION: u8 = 1;

impl ShadowRecord {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Binary form.
    ///
    /// Header (little endian): `b"PTSH"`, version `u8`, `N` as `u8`, two
    /// reserved zero bytes, `T: u64`, `seed: u64`, descriptor length `u32`
    /// followed by its UTF-8 bytes. Body: `3 * N * T` bits, LSB first, each
    /// qubit record being the 2-bit axis code (`Z=0, X=1, Y=2`) followed by
    /// the outcome bit, shots in order, qubit 0 first within a shot.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(RECORD_MAGIC);
        out.push(RECORD_VERSION);
        out.push(self.n_qubits as u8);
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&(self.snapshots.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.descriptor.len() as u32).to_le_bytes());
        out.extend_from_slice(self.descriptor.as_bytes());
        out.extend(pack_outcomes(
            self.snapshots
                .iter()
                .flat_map(|s| s.outcomes.iter().copied()),
        ));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != RECORD_MAGIC {
            return Err(Error::Format("not a shadow record".into()));
        }
        let version = r.u8()?;
        if version != RECORD_VERSION {
            return Err(Error::Format(format!(
                "unsupported record version {version}"
            )));
        }
        let n_qubits = r.u8()? as usize;
        r.take(2)?;
        let count = r.u64()? as usize;
        let seed = r.u64()?;
        let desc_len = r.u32()? as usize;
        let descriptor = String::from_utf8(r.take(desc_len)?.to_vec())
            .map_err(|e| Error::Format(e.to_string()))?;
        if n_qubits == 0 {
            return Err(Error::Format("zero-qubit record".into()));
        }
        let outcomes = unpack_outcomes(r.rest(), n_qubits * count)?;
        let snapshots = outcomes
            .chunks(n_qubits)
            .map(|c| Snapshot {
                outcomes: c.to_vec(),
            })
            .collect();
        Ok(ShadowRecord {
            n_qubits,
            seed,
            descriptor,
            snapshots,
        })
    }

    /// Human-readable debug form, snapshots as `"Z0X1"` strings.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ShadowRecord = serde_json::from_str(text)?;
        if record
            .snapshots
            .iter()
            .any(|s| s.n_qubits() != record.n_qubits)
        {
            return Err(Error::Format(
                "snapshot width does not match n_qubits".into(),
            ));
        }
        Ok(record)
    }
}

pub(crate) fn pack_outcomes(outcomes: impl Iterator<Item = Outcome>) -> Vec<u8> {
    let mut out = Vec::new();
    let mut acc: u32 = 0;
    let mut nbits = 0;
    for o in outcomes {
        let bits = (o.axis.index() as u32) | (o.bit as u32) << 2;
        acc |= bits << nbits;
        nbits += 3;
        while nbits >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            nbits -= 8;
        }
    }
    if nbits > 0 {
        out.push(acc as u8);
    }
    out
}

pub(crate) fn unpack_outcomes(bytes: &[u8], count: usize) -> Result<Vec<Outcome>> {
    let needed = (count * 3).div_ceil(8);
    if bytes.len() != needed {
        return Err(Error::Format(format!(
            "expected {needed} body bytes for {count} records, found {}",
            bytes.len()
        )));
    }
    let bit = |i: usize| (bytes[i / 8] >> (i % 8)) & 1;
    (0..count)
        .map(|k| {
            let base = 3 * k;
            let axis_code = bit(base) | bit(base + 1) << 1;
            let axis = Axis::from_index(axis_code as usize)
                .ok_or_else(|| Error::Format(format!("invalid axis code {axis_code}")))?;
            Ok(Outcome::new(axis, bit(base + 2)))
        })
        .collect()
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn rest(&mut self) -> &'a [u8] {
        let s = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::werner_state;

    fn ket0() -> DensityMatrix {
        DensityMatrix::from_pure(1, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn eigenstate_is_deterministic_on_its_axis() {
        let s = BornSampler::new(ket0()).unwrap();
        assert_eq!(s.distribution(&[Axis::Z]), vec![1.0, 0.0]);
        let x = s.distribution(&[Axis::X]);
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        let y = s.distribution(&[Axis::Y]);
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15);
        for i in 0..2000 {
            let snap = s.sample_shot(7, i);
            if snap.outcome(0).axis == Axis::Z {
                assert!(!snap.outcome(0).bit);
            }
        }
    }

    #[test]
    fn y_outcome_zero_is_plus_i() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus_i =
            DensityMatrix::from_pure(1, &[Complex64::new(h, 0.0), Complex64::new(0.0, h)]).unwrap();
        let s = BornSampler::new(plus_i).unwrap();
        let y = s.distribution(&[Axis::Y]);
        assert!((y[0] - 1.0).abs() < 1e-15 && y[1].abs() < 1e-15);
    }

    #[test]
    fn maximally_mixed_is_uniform() {
        let s = BornSampler::new(DensityMatrix::maximally_mixed(2).unwrap()).unwrap();
        for c in 0..9 {
            let axes = axes_from_config(2, c);
            for p in s.distribution(&axes) {
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cached_and_direct_distributions_agree() {
        let rho = werner_state(2, 0.6).unwrap();
        let s = BornSampler::new(rho.clone()).unwrap();
        for c in 0..9 {
            let axes = axes_from_config(2, c);
            let a = s.distribution(&axes);
            let b = born_distribution(&rho, &axes);
            assert_eq!(a, b);
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn born_rule_matches_projector_expectation() {
        // p(b) = Tr(rho ⊗_n (I + s_n P_n)/2), checked against the snapshot factors
        let rho = werner_state(2, -0.4).unwrap();
        let s = BornSampler::new(rho.clone()).unwrap();
        for c in 0..9 {
            let axes = axes_from_config(2, c);
            let probs = s.distribution(&axes);
            for (b, p) in probs.iter().enumerate() {
                let snap = Snapshot::new(
                    (0..2)
                        .map(|q| Outcome::new(axes[q], ((b >> (1 - q)) & 1) as u8))
                        .collect(),
                )
                .unwrap();
                // projector = (snapshot factor + I) / 3 per qubit
                let m = snapshot_matrix(&snap).unwrap();
                let dim = 4;
                let mut proj = ComplexMatrix::identity(1, 1);
                for q in 0..2 {
                    let f = factor_matrix(snap.outcome(q));
                    let pq = ComplexMatrix::from_fn(2, 2, |i, j| {
                        (f[i][j]
                            + if i == j {
                                Complex64::new(1.0, 0.0)
                            } else {
                                Complex64::new(0.0, 0.0)
                            })
                            / 3.0
                    });
                    proj = proj.kronecker(&pq);
                }
                assert_eq!(m.nrows(), dim);
                let expected = (rho.matrix() * proj).trace().re;
                assert!((p - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn snapshot_matrix_examples() {
        let z0 = snapshot_matrix(&"Z0".parse().unwrap()).unwrap();
        assert_eq!(z0[(0, 0)], Complex64::new(2.0, 0.0));
        assert_eq!(z0[(1, 1)], Complex64::new(-1.0, 0.0));
        assert_eq!(z0[(0, 1)], Complex64::new(0.0, 0.0));
        let x0 = snapshot_matrix(&"X0".parse().unwrap()).unwrap();
        assert_eq!(x0[(0, 0)], Complex64::new(0.5, 0.0));
        assert_eq!(x0[(1, 1)], Complex64::new(0.5, 0.0));
        assert_eq!(x0[(0, 1)], Complex64::new(1.5, 0.0));
        assert_eq!(x0[(1, 0)], Complex64::new(1.5, 0.0));
        let snap: Snapshot = "Y1X0Z1".parse().unwrap();
        let m = snapshot_matrix(&snap).unwrap();
        assert!((m.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((&m - m.adjoint()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn snapshot_string_round_trip() {
        let s: Snapshot = "Z0X1Y0Y1".parse().unwrap();
        assert_eq!(s.to_string(), "Z0X1Y0Y1");
        assert!("Z2".parse::<Snapshot>().is_err());
        assert!("Q0".parse::<Snapshot>().is_err());
        assert!("Z".parse::<Snapshot>().is_err());
        assert!("".parse::<Snapshot>().is_err());
    }

    #[test]
    fn replay_is_deterministic() {
        let rho = werner_state(2, 5.0 / 6.0).unwrap();
        let a = stream_shadows(&rho, 500, 42, "w").unwrap();
        let b = stream_shadows(&rho, 500, 42, "w").unwrap();
        assert_eq!(a, b);
        let sampler = BornSampler::new(rho).unwrap();
        let seq: Vec<_> = sampler.stream(42).take(500).collect();
        assert_eq!(seq, a.snapshots);
        let c = sample_record(&sampler, 500, 43, "w").unwrap();
        assert_ne!(a.snapshots, c.snapshots);
    }

    #[test]
    fn zero_shots_rejected() {
        let rho = werner_state(2, 0.5).unwrap();
        assert!(stream_shadows(&rho, 0, 1, "w").is_err());
    }

    #[test]
    fn non_physical_state_rejected() {
        let mut m = werner_state(2, 0.5).unwrap().matrix().clone();
        m[(0, 0)] += Complex64::new(0.1, 0.0);
        let bad = DensityMatrix::unchecked(2, m);
        assert!(matches!(BornSampler::new(bad), Err(Error::InvalidState(_))));
    }

    #[test]
    fn binary_and_json_round_trip() {
        let rho = werner_state(2, 0.7).unwrap();
        let rec = stream_shadows(&rho, 37, 9, "werner(n=2,t=0.7)").unwrap();
        let bytes = rec.to_bytes();
        // 37 shots * 2 qubits * 3 bits = 222 bits -> 28 bytes
        assert_eq!(bytes.len(), 4 + 4 + 8 + 8 + 4 + rec.descriptor.len() + 28);
        assert_eq!(ShadowRecord::from_bytes(&bytes).unwrap(), rec);
        assert_eq!(
            ShadowRecord::from_json(&rec.to_json().unwrap()).unwrap(),
            rec
        );
        assert!(ShadowRecord::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(ShadowRecord::from_bytes(&corrupt).is_err());
    }
}
