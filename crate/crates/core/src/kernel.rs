//! Trace products of partially transposed snapshots.
//!
//! A snapshot is a tensor product of single-qubit factors
//! `I/2 + (3/2) s P`, so `Tr(ρ̂_1^{T_B} ⋯ ρ̂_m^{T_B})` factorizes into a
//! product over qubits of `2x2` traces. The partial transpose only touches
//! `Y` factors on `B` (`Y^T = -Y`), which is the same as flipping the
//! recorded outcome bit. Three evaluation routes are provided:
//!
//! * [`tuple_trace_direct`]: multiply the `m` explicit `2x2` factors per
//!   qubit. `O(N m)`; this is what the estimators use.
//! * [`tuple_trace_expansion`]: expand each product over subsets of Pauli
//!   terms and keep those whose Pauli product is `±I` or `±iI` (looked up in a
//!   [`PauliTraceTable`]). `O(N 2^m)`; validation only.
//! * [`tuple_trace_dense`]: build the `2^N`-dimensional matrices and
//!   multiply them. Reference only.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::sampler::{factor_matrix, snapshot_matrix, Axis, Outcome, Snapshot};
use crate::states::{partial_transpose, Bipartition, ComplexMatrix};

/// Row-major `2x2` complex matrix `[a00, a01, a10, a11]`.
pub type Mat2 = [Complex64; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Longest Pauli sequence held by the expansion table.
pub const PAULI_TABLE_MAX_LEN: usize = 8;

/// `I/2 + (3/2)(-1)^bit P_axis` indexed by [`Outcome::code`].
pub fn factor_table() -> &'static [Mat2; 6] {
    static TABLE: OnceLock<[Mat2; 6]> = OnceLock::new();
    TABLE.get_or_init(|| {
        std::array::from_fn(|code| {
            let f = factor_matrix(Outcome::from_code(code as u8).unwrap());
            [f[0][0], f[0][1], f[1][0], f[1][1]]
        })
    })
}

#[inline]
pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

#[inline]
pub fn trace2(a: &Mat2) -> Complex64 {
    a[0] + a[3]
}

/// `tr(F_code · x)` for all six single-qubit factors at once.
#[inline]
pub fn factor_traces(x: &Mat2) -> [Complex64; 6] {
    let half_tr = (x[0] + x[3]) * 0.5;
    // tr(Z x), tr(X x), tr(Y x)
    let pz = x[0] - x[3];
    let px = x[1] + x[2];
    let py = I * (x[1] - x[2]);
    [
        half_tr + pz * 1.5,
        half_tr - pz * 1.5,
        half_tr + px * 1.5,
        half_tr - px * 1.5,
        half_tr + py * 1.5,
        half_tr - py * 1.5,
    ]
}

/// Outcome code after the partial transpose on `B`.
#[inline]
pub fn pt_code(code: u8, qubit_in_b: bool) -> u8 {
    // Y codes are 4 and 5
    if qubit_in_b && code >= 4 {
        code ^ 1
    } else {
        code
    }
}

fn check_part(n_qubits: usize, part: &Bipartition) -> Result<()> {
    if part.n_qubits() != n_qubits {
        return Err(invalid(format!(
            "bipartition is over {} qubits, snapshot has {n_qubits}",
            part.n_qubits()
        )));
    }
    Ok(())
}

/// Flips the outcome bit of every `Y` measurement on a qubit in `B`.
pub fn pt_flip(s: &Snapshot, part: &Bipartition) -> Result<Snapshot> {
    check_part(s.n_qubits(), part)?;
    let mut out = s.clone();
    for (q, o) in out.outcomes_mut().iter_mut().enumerate() {
        if o.axis == Axis::Y && part.contains(q) {
            o.bit = !o.bit;
        }
    }
    Ok(out)
}

fn check_tuple(snapshots: &[Snapshot], part: &Bipartition) -> Result<usize> {
    let first = snapshots
        .first()
        .ok_or_else(|| invalid("a trace product needs at least one snapshot"))?;
    let n = first.n_qubits();
    if snapshots.iter().any(|s| s.n_qubits() != n) {
        return Err(invalid("snapshots in a tuple must share the qubit count"));
    }
    check_part(n, part)?;
    Ok(n)
}

/// `Tr(ρ̂_1^{T_B} ⋯ ρ̂_m^{T_B})` as a product of per-qubit `2x2` traces.
pub fn tuple_trace_direct(snapshots: &[Snapshot], part: &Bipartition) -> Result<Complex64> {
    let n = check_tuple(snapshots, part)?;
    let flipped = snapshots
        .iter()
        .map(|s| pt_flip(s, part))
        .collect::<Result<Vec<_>>>()?;
    let table = factor_table();
    let mut total = ONE;
    for q in 0..n {
        let mut prod = table[flipped[0].outcome(q).code() as usize];
        for s in &flipped[1..] {
            prod = mul2(&prod, &table[s.outcome(q).code() as usize]);
        }
        total *= trace2(&prod);
    }
    Ok(total)
}

/// Traces of single-qubit Pauli products, keyed by the axis sequence.
///
/// The entry for a sequence is `2·phase` when the ordered product equals
/// `phase·I` (`phase ∈ {±1, ±i}`) and exactly zero otherwise.
#[derive(Clone, Debug)]
pub struct PauliTraceTable {
    max_len: usize,
    // values[len][base-3 index of the sequence, first axis most significant]
    values: Vec<Vec<Complex64>>,
}

fn pauli(axis: Axis) -> Mat2 {
    match axis {
        Axis::Z => [ONE, ZERO, ZERO, -ONE],
        Axis::X => [ZERO, ONE, ONE, ZERO],
        Axis::Y => [ZERO, -I, I, ZERO],
    }
}

impl PauliTraceTable {
    pub fn new(max_len: usize) -> Self {
        let mut values = Vec::with_capacity(max_len + 1);
        // products of Paulis keep entries in {0, ±1, ±i}: exact in floating point
        let mut products: Vec<Mat2> = vec![[ONE, ZERO, ZERO, ONE]];
        values.push(vec![Complex64::new(2.0, 0.0)]);
        for _ in 1..=max_len {
            let next: Vec<Mat2> = products
                .iter()
                .flat_map(|p| Axis::ALL.iter().map(move |&a| mul2(p, &pauli(a))))
                .collect();
            values.push(next.iter().map(trace2).collect());
            products = next;
        }
        PauliTraceTable { max_len, values }
    }

    /// Shared table of depth [`PAULI_TABLE_MAX_LEN`].
    pub fn global() -> &'static PauliTraceTable {
        static TABLE: OnceLock<PauliTraceTable> = OnceLock::new();
        TABLE.get_or_init(|| PauliTraceTable::new(PAULI_TABLE_MAX_LEN))
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn get(&self, axes: &[Axis]) -> Option<Complex64> {
        let row = self.values.get(axes.len())?;
        Some(row[axes.iter().fold(0, |acc, a| acc * 3 + a.index())])
    }
}

/// Same quantity as [`tuple_trace_direct`] via the subset expansion
/// `Σ_S (1/2)^{m-|S|} (3/2)^{|S|} (Π_{j∈S} s_j) tr(Π_{j∈S} P_j)` per qubit.
pub fn tuple_trace_expansion(snapshots: &[Snapshot], part: &Bipartition) -> Result<Complex64> {
    let table = PauliTraceTable::global();
    let m = snapshots.len();
    if m > table.max_len() {
        return Err(Error::UnsupportedOrder {
            order: m,
            max: table.max_len(),
        });
    }
    let n = check_tuple(snapshots, part)?;
    let flipped = snapshots
        .iter()
        .map(|s| pt_flip(s, part))
        .collect::<Result<Vec<_>>>()?;
    let mut total = ONE;
    let mut axes = Vec::with_capacity(m);
    for q in 0..n {
        let mut qubit_sum = ZERO;
        for subset in 0u32..(1 << m) {
            axes.clear();
            let mut sign = 1.0;
            for (j, s) in flipped.iter().enumerate() {
                if subset >> j & 1 == 1 {
                    let o = s.outcome(q);
                    axes.push(o.axis);
                    sign *= o.sign();
                }
            }
            let tr = table
                .get(&axes)
                .expect("length checked against table depth");
            if tr == ZERO {
                continue;
            }
            let k = axes.len() as i32;
            let weight = 0.5f64.powi(m as i32 - k) * 1.5f64.powi(k) * sign;
            qubit_sum += tr * weight;
        }
        total *= qubit_sum;
    }
    Ok(total)
}

/// Largest qubit count accepted by [`tuple_trace_dense`].
pub const DENSE_ORACLE_MAX_QUBITS: usize = 6;

/// Reference route: dense snapshot matrices, dense partial transpose,
/// full matrix products.
pub fn tuple_trace_dense(snapshots: &[Snapshot], part: &Bipartition) -> Result<Complex64> {
    let n = check_tuple(snapshots, part)?;
    if n > DENSE_ORACLE_MAX_QUBITS {
        return Err(Error::Capacity {
            what: "dense trace oracle",
            n_qubits: n,
            limit: DENSE_ORACLE_MAX_QUBITS,
        });
    }
    let mut prod: Option<ComplexMatrix> = None;
    for s in snapshots {
        let pt = partial_transpose(&snapshot_matrix(s)?, part)?;
        prod = Some(match prod {
            None => pt,
            Some(p) => p * pt,
        });
    }
    Ok(prod.expect("nonempty tuple").trace())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snaps(list: &[&str]) -> Vec<Snapshot> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn flip_rule() {
        let part = Bipartition::new(2, [1]).unwrap();
        let s: Snapshot = "Y0Y0".parse().unwrap();
        assert_eq!(pt_flip(&s, &part).unwrap().to_string(), "Y0Y1");
        let s: Snapshot = "Z0X1".parse().unwrap();
        assert_eq!(pt_flip(&s, &part).unwrap(), s);
        let twice = pt_flip(&pt_flip(&"X1Y1".parse().unwrap(), &part).unwrap(), &part).unwrap();
        assert_eq!(twice.to_string(), "X1Y1");
        let wrong = Bipartition::new(3, [1]).unwrap();
        assert!(pt_flip(&s, &wrong).is_err());
    }

    #[test]
    fn pt_code_matches_flip() {
        for code in 0..6u8 {
            let o = Outcome::from_code(code).unwrap();
            let flipped = if o.axis == Axis::Y {
                Outcome { bit: !o.bit, ..o }
            } else {
                o
            };
            assert_eq!(pt_code(code, true), flipped.code());
            assert_eq!(pt_code(code, false), code);
        }
    }

    #[test]
    fn direct_kernel_examples() {
        let empty = Bipartition::any_subset(1, []).unwrap();
        let t = tuple_trace_direct(&snaps(&["Z0"]), &empty).unwrap();
        assert!(close(t, ONE, 1e-15));
        let t = tuple_trace_direct(&snaps(&["Z0", "Z0"]), &empty).unwrap();
        assert!(close(t, Complex64::new(5.0, 0.0), 1e-15));
        let t = tuple_trace_direct(&snaps(&["Z0", "X0"]), &empty).unwrap();
        assert!(close(t, Complex64::new(0.5, 0.0), 1e-15));
    }

    #[test]
    fn kernels_reject_bad_tuples() {
        let part = Bipartition::new(2, [0]).unwrap();
        assert!(tuple_trace_direct(&[], &part).is_err());
        assert!(tuple_trace_direct(&snaps(&["Z0Z0", "Z0"]), &part).is_err());
        let nine = vec!["Z0Z0".parse::<Snapshot>().unwrap(); 9];
        assert!(matches!(
            tuple_trace_expansion(&nine, &part),
            Err(Error::UnsupportedOrder { order: 9, max: 8 })
        ));
        let big = vec!["Z0Z0Z0Z0Z0Z0Z0".parse::<Snapshot>().unwrap()];
        let part7 = Bipartition::new(7, [0]).unwrap();
        assert!(matches!(
            tuple_trace_dense(&big, &part7),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn pauli_table_selection_rule() {
        let t = PauliTraceTable::new(4);
        assert_eq!(t.get(&[]), Some(Complex64::new(2.0, 0.0)));
        assert_eq!(t.get(&[Axis::X]), Some(ZERO));
        assert_eq!(t.get(&[Axis::X, Axis::Y]), Some(ZERO));
        assert_eq!(t.get(&[Axis::X, Axis::X]), Some(Complex64::new(2.0, 0.0)));
        // XYZ = i I
        assert_eq!(
            t.get(&[Axis::X, Axis::Y, Axis::Z]),
            Some(Complex64::new(0.0, 2.0))
        );
        assert_eq!(
            t.get(&[Axis::Z, Axis::Y, Axis::X]),
            Some(Complex64::new(0.0, -2.0))
        );
        assert_eq!(t.get(&[Axis::X; 5]), None);
        for row in &t.values {
            for v in row {
                assert!([ZERO, 2.0 * ONE, -2.0 * ONE, 2.0 * I, -2.0 * I].contains(v));
            }
        }
        assert_eq!(PauliTraceTable::global().values[8].len(), 6561);
    }

    #[test]
    fn factor_traces_match_products() {
        let x: Mat2 = [
            Complex64::new(0.3, -0.2),
            Complex64::new(1.1, 0.4),
            Complex64::new(-0.7, 0.9),
            Complex64::new(0.25, 0.5),
        ];
        let fast = factor_traces(&x);
        for (code, f) in factor_table().iter().enumerate() {
            assert!(close(fast[code], trace2(&mul2(f, &x)), 1e-14));
        }
    }

    #[test]
    fn three_routes_agree_on_fixed_tuple() {
        let part = Bipartition::new(2, [1]).unwrap();
        let tuple = snaps(&["Y0X1", "Z1Y1", "Y1Y0"]);
        let a = tuple_trace_direct(&tuple, &part).unwrap();
        let b = tuple_trace_expansion(&tuple, &part).unwrap();
        let c = tuple_trace_dense(&tuple, &part).unwrap();
        assert!(close(a, b, 1e-12) && close(a, c, 1e-12), "{a} {b} {c}");
    }
}
