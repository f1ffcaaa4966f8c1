//! Reconstruction-based online estimator.
//!
//! `A_k` (for `k = 0..m-1`) holds the sum over ordered index sets
//! `i_1 < .. < i_{k+1} <= T` of `ρ̂_{i_1}^{T_B} ⋯ ρ̂_{i_{k+1}}^{T_B}`. A new
//! snapshot `S` updates
//!
//! ```text
//! A_k <- A_k + A_{k-1} S   for k = m-1 down to 1
//! A_0 <- A_0 + S
//! ```
//!
//! and then `P_T^{(k+1)} = Tr(A_k) / C(T, k+1)`. Descending `k` means every
//! `A_{k-1}` is read before it is changed. The snapshot is a tensor product of
//! `2x2` factors, so `A S` is applied row by row, one qubit at a time, with a
//! single `2^N` scratch vector: `O(m 4^N N)` per shot regardless of `T`, and
//! the snapshot is never stored.

use num_complex::Complex64;

use super::{
    check_order, check_snapshot, checkpoint, instrument, MomentEstimate, MomentEstimator, Strategy,
};
use crate::combin::binomial_f64;
use crate::error::{Error, Result};
use crate::kernel::{factor_table, pt_code};
use crate::sampler::Snapshot;
use crate::states::{check_dense_size, qubit_mask, Bipartition, ComplexMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The running product sums `A_0 .. A_{m-1}`, row-major `2^N x 2^N`.
#[derive(Clone, Debug)]
pub struct AccumulatorSet {
    n_qubits: usize,
    dim: usize,
    in_b: Vec<bool>,
    matrices: Vec<Vec<Complex64>>,
    shots: usize,
    row: Vec<Complex64>,
}

impl AccumulatorSet {
    /// `order` zero matrices.
    pub fn new(part: &Bipartition, order: usize) -> Result<Self> {
        check_order(1, order)?;
        let n = part.n_qubits();
        check_dense_size(n, "accumulator set")?;
        let dim = 1usize << n;
        Ok(AccumulatorSet {
            n_qubits: n,
            dim,
            in_b: (0..n).map(|q| part.contains(q)).collect(),
            matrices: (0..order).map(|_| instrument::zeros(dim)).collect(),
            shots: 0,
            row: vec![ZERO; dim],
        })
    }

    pub(crate) fn from_parts(
        part: &Bipartition,
        matrices: Vec<Vec<Complex64>>,
        shots: usize,
    ) -> Result<Self> {
        let n = part.n_qubits();
        let dim = 1usize << n;
        if matrices.is_empty() || matrices.iter().any(|m| m.len() != dim * dim) {
            return Err(Error::Format(
                "accumulator matrices have the wrong shape".into(),
            ));
        }
        Ok(AccumulatorSet {
            n_qubits: n,
            dim,
            in_b: (0..n).map(|q| part.contains(q)).collect(),
            matrices,
            shots,
            row: vec![ZERO; dim],
        })
    }

    pub fn order(&self) -> usize {
        self.matrices.len()
    }

    pub fn shots_seen(&self) -> usize {
        self.shots
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of `2^N x 2^N` matrices held.
    pub fn dense_matrices_held(&self) -> usize {
        self.matrices.len()
    }

    pub(crate) fn raw(&self) -> &[Vec<Complex64>] {
        &self.matrices
    }

    pub fn trace(&self, k: usize) -> Complex64 {
        let a = &self.matrices[k];
        (0..self.dim).map(|i| a[i * self.dim + i]).sum()
    }

    /// Copy of `A_k` as a matrix.
    pub fn matrix(&self, k: usize) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(self.dim, self.dim, &self.matrices[k])
    }

    /// Folds in one snapshot; the snapshot is not retained.
    pub fn update(&mut self, s: &Snapshot) {
        let codes: Vec<u8> = s
            .codes()
            .zip(&self.in_b)
            .map(|(c, &b)| pt_code(c, b))
            .collect();
        self.update_flipped(&codes);
    }

    /// Same as [`update`](Self::update) for codes already PT-flipped.
    pub(crate) fn update_flipped(&mut self, codes: &[u8]) {
        let dim = self.dim;
        for k in (1..self.matrices.len()).rev() {
            let (lower, upper) = self.matrices.split_at_mut(k);
            let (src, dst) = (&lower[k - 1], &mut upper[0]);
            for r in 0..dim {
                self.row.copy_from_slice(&src[r * dim..(r + 1) * dim]);
                apply_factors(&mut self.row, codes, self.n_qubits);
                for (d, v) in dst[r * dim..(r + 1) * dim].iter_mut().zip(&self.row) {
                    *d += v;
                }
            }
        }
        let a0 = &mut self.matrices[0];
        for r in 0..dim {
            self.row.fill(ZERO);
            self.row[r] = Complex64::new(1.0, 0.0);
            apply_factors(&mut self.row, codes, self.n_qubits);
            for (d, v) in a0[r * dim..(r + 1) * dim].iter_mut().zip(&self.row) {
                *d += v;
            }
        }
        self.shots += 1;
    }
}

/// `row <- row · (⊗_q F_q)` for the factors with the given codes.
fn apply_factors(row: &mut [Complex64], codes: &[u8], n: usize) {
    let table = factor_table();
    let dim = row.len();
    for (q, &code) in codes.iter().enumerate() {
        let f = &table[code as usize];
        let mask = qubit_mask(n, q);
        for base in (0..dim).step_by(2 * mask) {
            for c0 in base..base + mask {
                let c1 = c0 | mask;
                let (a, b) = (row[c0], row[c1]);
                row[c0] = a * f[0] + b * f[2];
                row[c1] = a * f[1] + b * f[3];
            }
        }
    }
}

/// `Tr(A_{m-1}) / C(T, m)`.
pub fn online_recon_estimate(acc: &AccumulatorSet, m: usize) -> Result<MomentEstimate> {
    check_order(m, acc.order())?;
    let t = acc.shots_seen();
    if t < m {
        return Err(Error::InsufficientData {
            needed: m,
            shots: t,
        });
    }
    let value = acc.trace(m - 1) / binomial_f64(t as u64, m as u64);
    Ok(MomentEstimate::defined(m, t, value))
}

/// [`AccumulatorSet`] behind the streaming interface.
#[derive(Clone, Debug)]
pub struct OnlineRecon {
    part: Bipartition,
    acc: AccumulatorSet,
}

impl OnlineRecon {
    pub fn new(part: Bipartition, max_order: usize) -> Result<Self> {
        let acc = AccumulatorSet::new(&part, max_order)?;
        Ok(OnlineRecon { part, acc })
    }

    pub(crate) fn from_parts(part: Bipartition, acc: AccumulatorSet) -> Self {
        OnlineRecon { part, acc }
    }

    pub fn accumulators(&self) -> &AccumulatorSet {
        &self.acc
    }
}

impl MomentEstimator for OnlineRecon {
    fn strategy(&self) -> Strategy {
        Strategy::OnlineRecon
    }

    fn max_order(&self) -> usize {
        self.acc.order()
    }

    fn shots_seen(&self) -> usize {
        self.acc.shots_seen()
    }

    fn bipartition(&self) -> &Bipartition {
        &self.part
    }

    fn observe(&mut self, snapshot: &Snapshot) -> Result<()> {
        check_snapshot(&self.part, snapshot)?;
        self.acc.update(snapshot);
        Ok(())
    }

    fn estimate(&self, order: usize) -> Result<MomentEstimate> {
        check_order(order, self.acc.order())?;
        let t = self.acc.shots_seen();
        if t < order {
            return Ok(MomentEstimate::undefined(order, t));
        }
        if order == 1 {
            return Ok(MomentEstimate::defined(1, t, Complex64::new(1.0, 0.0)));
        }
        online_recon_estimate(&self.acc, order)
    }

    fn checkpoint(&self) -> Vec<u8> {
        checkpoint::encode_accumulators(self.strategy(), &self.part, self.acc.order(), &self.acc)
    }
}
