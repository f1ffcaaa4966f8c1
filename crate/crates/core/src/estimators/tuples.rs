//! Enumeration of ordered shot tuples and their PT trace products.
//!
//! Shots are stored as per-qubit outcome codes after the partial-transpose
//! bit flip, one byte per qubit, contiguous per shot. Tuples `t_1 < .. < t_m`
//! are walked depth first so every prefix product of `2x2` factors is built
//! once and shared by all of its extensions. At the last level the traces
//! against all six possible factors are tabulated per qubit, so each leaf
//! costs `N` table lookups.
//!
//! Work is split by the first index of the tuple. Each first index yields a
//! partial sum computed in a fixed order, and the partials are added in
//! index order, so the result does not depend on how many workers ran.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::kernel::{factor_table, factor_traces, mul2, pt_code, Mat2};
use crate::sampler::{pack_outcomes, Outcome, Snapshot};
use crate::states::Bipartition;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// below this many first indices the partials are computed on the calling thread
const PAR_THRESHOLD: usize = 64;

/// Measurement record in PT-flipped code form. Memory is `T·N` bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PtRecord {
    n_qubits: usize,
    in_b: Vec<bool>,
    codes: Vec<u8>,
}

impl PtRecord {
    pub fn new(part: &Bipartition) -> Self {
        let n = part.n_qubits();
        PtRecord {
            n_qubits: n,
            in_b: (0..n).map(|q| part.contains(q)).collect(),
            codes: Vec::new(),
        }
    }

    pub fn from_snapshots(part: &Bipartition, snapshots: &[Snapshot]) -> Self {
        let mut rec = Self::new(part);
        for s in snapshots {
            rec.push(s);
        }
        rec
    }

    /// Flipped codes of `s`, without storing it.
    pub fn flip_codes(&self, s: &Snapshot) -> Vec<u8> {
        debug_assert_eq!(s.n_qubits(), self.n_qubits);
        s.codes()
            .zip(&self.in_b)
            .map(|(c, &b)| pt_code(c, b))
            .collect()
    }

    pub fn push(&mut self, s: &Snapshot) {
        let codes = self.flip_codes(s);
        self.codes.extend(codes);
    }

    pub(crate) fn push_codes(&mut self, codes: &[u8]) {
        debug_assert_eq!(codes.len(), self.n_qubits);
        self.codes.extend_from_slice(codes);
    }

    pub fn len(&self) -> usize {
        self.codes.len() / self.n_qubits
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Flipped codes of shot `t`.
    pub fn shot(&self, t: usize) -> &[u8] {
        &self.codes[t * self.n_qubits..(t + 1) * self.n_qubits]
    }

    /// Heap bytes held by the record.
    pub fn memory_bytes(&self) -> usize {
        self.codes.capacity()
    }

    /// Original (unflipped) outcomes, packed in the shadow-record body format.
    pub(crate) fn packed_raw(&self) -> Vec<u8> {
        let in_b = &self.in_b;
        let n = self.n_qubits;
        pack_outcomes(
            self.codes
                .iter()
                .enumerate()
                .map(|(i, &c)| Outcome::from_code(pt_code(c, in_b[i % n])).expect("valid code")),
        )
    }
}

fn leaf_tables(prefix: &[Mat2], tables: &mut [[Complex64; 6]]) {
    for (t, p) in tables.iter_mut().zip(prefix) {
        *t = factor_traces(p);
    }
}

#[inline]
fn leaf_value(tables: &[[Complex64; 6]], codes: &[u8]) -> Complex64 {
    let mut v = tables[0][codes[0] as usize];
    for (t, &c) in tables[1..].iter().zip(&codes[1..]) {
        v *= t[c as usize];
    }
    v
}

/// `Σ_{t_1<..<t_m} Π_q tr(F_{t_1,q} ⋯ F_{t_m,q})` over the whole record.
pub(crate) fn subset_trace_sum(rec: &PtRecord, m: usize) -> Complex64 {
    assert!(m >= 1);
    let t_count = rec.len();
    if t_count < m {
        return ZERO;
    }
    let firsts = 0..=t_count - m;
    let partial = |t1: usize| subset_partial(rec, m, t1);
    let partials: Vec<Complex64> = if firsts.clone().count() >= PAR_THRESHOLD {
        firsts.into_par_iter().map(partial).collect()
    } else {
        firsts.map(partial).collect()
    };
    partials.into_iter().fold(ZERO, |a, b| a + b)
}

fn subset_partial(rec: &PtRecord, m: usize, t1: usize) -> Complex64 {
    let n = rec.n_qubits;
    let table = factor_table();
    let first: Vec<Mat2> = rec.shot(t1).iter().map(|&c| table[c as usize]).collect();
    if m == 1 {
        return first.iter().map(|f| f[0] + f[3]).product();
    }
    let mut prefixes = vec![first];
    prefixes.resize(m - 1, vec![[ZERO; 4]; n]);
    let mut tables = vec![[ZERO; 6]; n];
    let mut acc = ZERO;
    walk_subsets(rec, m, 1, t1, &mut prefixes, &mut tables, &mut acc);
    acc
}

// prefixes[depth - 1] holds the product of the `depth` shots chosen so far
fn walk_subsets(
    rec: &PtRecord,
    m: usize,
    depth: usize,
    last: usize,
    prefixes: &mut [Vec<Mat2>],
    tables: &mut [[Complex64; 6]],
    acc: &mut Complex64,
) {
    let t_count = rec.len();
    let remaining = m - depth;
    if remaining == 1 {
        leaf_tables(&prefixes[depth - 1], tables);
        for leaf in last + 1..t_count {
            *acc += leaf_value(tables, rec.shot(leaf));
        }
        return;
    }
    let table = factor_table();
    // leave room for the remaining indices
    for next in last + 1..=t_count - remaining {
        let (done, rest) = prefixes.split_at_mut(depth);
        let (prev, cur) = (&done[depth - 1], &mut rest[0]);
        for ((c, p), &code) in cur.iter_mut().zip(prev).zip(rec.shot(next)) {
            *c = mul2(p, &table[code as usize]);
        }
        walk_subsets(rec, m, depth + 1, next, prefixes, tables, acc);
    }
}

/// Trace sums of all tuples that end with a new shot `g`, for every order.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct FreshSums {
    /// `sums[k]`: `Σ_{t_1<..<t_{k-1}<=T} Tr(ρ̂_{t_1} ⋯ ρ̂_{t_{k-1}} ρ̂_g)`, index 0 unused.
    pub sums: Vec<Complex64>,
    /// Number of tuple traces behind each `sums[k]`.
    pub counts: Vec<u64>,
}

/// Fresh tuple traces for orders `1..=max_order` against the existing record.
pub(crate) fn fresh_sums(rec: &PtRecord, g: &[u8], max_order: usize) -> FreshSums {
    let mut out = FreshSums {
        sums: vec![ZERO; max_order + 1],
        counts: vec![0; max_order + 1],
    };
    let table = factor_table();
    // order 1: the empty prefix, Π_q tr(G_q)
    out.sums[1] = g.iter().map(|&c| trace_of(&table[c as usize])).product();
    out.counts[1] = 1;
    let t_count = rec.len();
    if max_order < 2 || t_count == 0 {
        return out;
    }
    let partial = |t1: usize| fresh_partial(rec, g, max_order, t1);
    let partials: Vec<FreshSums> = if t_count >= PAR_THRESHOLD {
        (0..t_count).into_par_iter().map(partial).collect()
    } else {
        (0..t_count).map(partial).collect()
    };
    for p in partials {
        for k in 2..=max_order {
            out.sums[k] += p.sums[k];
            out.counts[k] += p.counts[k];
        }
    }
    out
}

fn trace_of(m: &Mat2) -> Complex64 {
    m[0] + m[3]
}

fn fresh_partial(rec: &PtRecord, g: &[u8], max_order: usize, t1: usize) -> FreshSums {
    let n = rec.n_qubits;
    let table = factor_table();
    let g_factors: Vec<Mat2> = g.iter().map(|&c| table[c as usize]).collect();
    let mut prefixes = vec![rec
        .shot(t1)
        .iter()
        .map(|&c| table[c as usize])
        .collect::<Vec<_>>()];
    prefixes.resize(max_order.max(2) - 1, vec![[ZERO; 4]; n]);
    let mut tables = vec![[ZERO; 6]; n];
    let mut out = FreshSums {
        sums: vec![ZERO; max_order + 1],
        counts: vec![0; max_order + 1],
    };
    walk_fresh(
        rec,
        g,
        &g_factors,
        max_order,
        1,
        t1,
        &mut prefixes,
        &mut tables,
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn walk_fresh(
    rec: &PtRecord,
    g: &[u8],
    g_factors: &[Mat2],
    max_order: usize,
    depth: usize,
    last: usize,
    prefixes: &mut [Vec<Mat2>],
    tables: &mut [[Complex64; 6]],
    out: &mut FreshSums,
) {
    // this node closes a tuple of order depth + 1
    let prefix = &prefixes[depth - 1];
    let mut v = Complex64::new(1.0, 0.0);
    for (p, &c) in prefix.iter().zip(g) {
        v *= factor_traces(p)[c as usize];
    }
    out.sums[depth + 1] += v;
    out.counts[depth + 1] += 1;

    let next_depth = depth + 1;
    if next_depth + 1 > max_order {
        return;
    }
    let t_count = rec.len();
    if next_depth + 1 == max_order {
        // leaves: tr(P F_leaf G) = tr(F_leaf (G P))
        for ((t, p), gf) in tables.iter_mut().zip(prefix).zip(g_factors) {
            *t = factor_traces(&mul2(gf, p));
        }
        let mut leaf_sum = ZERO;
        for leaf in last + 1..t_count {
            leaf_sum += leaf_value(tables, rec.shot(leaf));
        }
        out.sums[max_order] += leaf_sum;
        out.counts[max_order] += (t_count - last - 1) as u64;
        return;
    }
    let table = factor_table();
    for next in last + 1..t_count {
        let (done, rest) = prefixes.split_at_mut(depth);
        let (prev, cur) = (&done[depth - 1], &mut rest[0]);
        for ((c, p), &code) in cur.iter_mut().zip(prev).zip(rec.shot(next)) {
            *c = mul2(p, &table[code as usize]);
        }
        walk_fresh(
            rec, g, g_factors, max_order, next_depth, next, prefixes, tables, out,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combin::binomial;
    use crate::kernel::tuple_trace_direct;
    use crate::sampler::stream_shadows;
    use crate::states::werner_state;

    fn record(t: usize, seed: u64) -> (Bipartition, Vec<Snapshot>) {
        let rho = werner_state(2, 0.7).unwrap();
        let rec = stream_shadows(&rho, t, seed, "w").unwrap();
        (Bipartition::balanced(2).unwrap(), rec.snapshots)
    }

    // plain nested enumeration through the per-tuple kernel
    fn brute_subsets(snaps: &[Snapshot], part: &Bipartition, m: usize) -> Complex64 {
        fn rec(
            snaps: &[Snapshot],
            part: &Bipartition,
            m: usize,
            start: usize,
            chosen: &mut Vec<Snapshot>,
            acc: &mut Complex64,
        ) {
            if chosen.len() == m {
                *acc += tuple_trace_direct(chosen, part).unwrap();
                return;
            }
            for i in start..snaps.len() {
                chosen.push(snaps[i].clone());
                rec(snaps, part, m, i + 1, chosen, acc);
                chosen.pop();
            }
        }
        let mut acc = ZERO;
        rec(snaps, part, m, 0, &mut Vec::new(), &mut acc);
        acc
    }

    #[test]
    fn subset_sums_match_brute_force() {
        let (part, snaps) = record(12, 3);
        let rec = PtRecord::from_snapshots(&part, &snaps);
        for m in 1..=5 {
            let fast = subset_trace_sum(&rec, m);
            let slow = brute_subsets(&snaps, &part, m);
            assert!(
                (fast - slow).norm() <= 1e-10 * slow.norm().max(1.0),
                "m={m}"
            );
        }
    }

    #[test]
    fn fresh_sums_match_brute_force() {
        let (part, snaps) = record(10, 5);
        let (old, new) = snaps.split_at(9);
        let rec = PtRecord::from_snapshots(&part, old);
        let g = rec.flip_codes(&new[0]);
        let fresh = fresh_sums(&rec, &g, 5);
        for k in 1..=5 {
            let all = brute_subsets(&snaps, &part, k);
            let without = brute_subsets(old, &part, k);
            let expected = all - without;
            assert!(
                (fresh.sums[k] - expected).norm() <= 1e-10 * expected.norm().max(1.0),
                "k={k}"
            );
            assert_eq!(fresh.counts[k] as u128, binomial(9, k as u64 - 1).unwrap());
        }
    }

    #[test]
    fn parallel_and_sequential_partials_agree_bitwise() {
        let (part, snaps) = record(150, 8);
        let rec = PtRecord::from_snapshots(&part, &snaps);
        let par = subset_trace_sum(&rec, 3);
        let seq = (0..=rec.len() - 3)
            .map(|t1| subset_partial(&rec, 3, t1))
            .fold(ZERO, |a, b| a + b);
        assert_eq!(par, seq);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let pooled = pool.install(|| subset_trace_sum(&rec, 3));
        assert_eq!(par, pooled);
    }

    #[test]
    fn raw_packing_undoes_the_flip() {
        let (part, snaps) = record(7, 1);
        let rec = PtRecord::from_snapshots(&part, &snaps);
        let expected = pack_outcomes(snaps.iter().flat_map(|s| s.outcomes().to_vec()));
        assert_eq!(rec.packed_raw(), expected);
    }
}
