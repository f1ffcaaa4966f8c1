//! Benchmark density matrices and their exact partial-transpose spectra.
//!
//! Basis convention used throughout the crate: qubit 0 is the most
//! significant bit of a computational-basis index. For an `N`-qubit index
//! `i`, qubit `q` is bit `N - 1 - q` of `i`.
//!
//! The functions here are the ground truth that every estimator is checked
//! against: Werner states with their closed-form PT spectrum, a generic
//! partial transpose, and dense Hermitian eigendecomposition for arbitrary
//! imported states.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combin::binomial_f64;
use crate::error::{invalid, Error, Result};

/// Largest qubit count for which dense `2^N x 2^N` matrices are built.
pub const MAX_DENSE_QUBITS: usize = 12;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

pub type ComplexMatrix = DMatrix<Complex64>;

/// Bit mask of qubit `q` inside an `n`-qubit basis index.
#[inline]
pub fn qubit_mask(n_qubits: usize, q: usize) -> usize {
    1 << (n_qubits - 1 - q)
}

/// A Hermitian, unit-trace, positive semidefinite matrix on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates `entries` as a physical state on `n_qubits` qubits.
    pub fn new(n_qubits: usize, entries: ComplexMatrix) -> Result<Self> {
        check_dense_size(n_qubits, "density matrix")?;
        let dim = 1usize << n_qubits;
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(invalid(format!(
                "expected a {dim}x{dim} matrix for {n_qubits} qubits, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let rho = DensityMatrix { n_qubits, entries };
        rho.check_physical()?;
        Ok(rho)
    }

    /// `I / 2^N`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_dense_size(n_qubits, "density matrix")?;
        let dim = 1usize << n_qubits;
        let entries = ComplexMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
        Ok(DensityMatrix { n_qubits, entries })
    }

    /// Projector onto a normalized pure state.
    pub fn from_pure(n_qubits: usize, amplitudes: &[Complex64]) -> Result<Self> {
        check_dense_size(n_qubits, "density matrix")?;
        let dim = 1usize << n_qubits;
        if amplitudes.len() != dim {
            return Err(invalid(format!(
                "expected {dim} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("state norm is {norm}, not 1")));
        }
        let entries = ComplexMatrix::from_fn(dim, dim, |i, j| amplitudes[i] * amplitudes[j].conj());
        Ok(DensityMatrix { n_qubits, entries })
    }

    #[cfg(test)]
    pub(crate) fn unchecked(n_qubits: usize, entries: ComplexMatrix) -> Self {
        DensityMatrix { n_qubits, entries }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn partial_transpose(&self, part: &Bipartition) -> Result<ComplexMatrix> {
        partial_transpose(&self.entries, part)
    }

    /// Hermiticity, unit trace and positivity, at the crate-wide tolerances.
    pub fn check_physical(&self) -> Result<()> {
        let m = &self.entries;
        let dim = m.nrows();
        for i in 0..dim {
            for j in i..dim {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!("not Hermitian at ({i}, {j})")));
                }
            }
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, not 1")));
        }
        let min_eig = hermitian_eigenvalues(m)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (minimum eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    /// Reads the JSON matrix interchange format, see [`MatrixFile`].
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text)?;
        file.into_density_matrix()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MatrixFile::from(self))?)
    }
}

/// On-disk form of an arbitrary density matrix.
///
/// ```json
/// { "n_qubits": 1, "entries": [[0.5, 0.0], [0.5, 0.0], [0.5, 0.0], [0.5, 0.0]] }
/// ```
///
/// `entries` lists the `4^N` matrix elements in row-major order, each as a
/// `[real, imaginary]` pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n_qubits: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn into_density_matrix(self) -> Result<DensityMatrix> {
        check_dense_size(self.n_qubits, "imported state")?;
        let dim = 1usize << self.n_qubits;
        if self.entries.len() != dim * dim {
            return Err(Error::Format(format!(
                "expected {} entries for {} qubits, found {}",
                dim * dim,
                self.n_qubits,
                self.entries.len()
            )));
        }
        let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
            let [re, im] = self.entries[i * dim + j];
            Complex64::new(re, im)
        });
        DensityMatrix::new(self.n_qubits, m)
    }
}

impl From<&DensityMatrix> for MatrixFile {
    fn from(rho: &DensityMatrix) -> Self {
        let dim = rho.dim();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = rho.entries[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        MatrixFile {
            n_qubits: rho.n_qubits,
            entries,
        }
    }
}

pub(crate) fn check_dense_size(n_qubits: usize, what: &'static str) -> Result<()> {
    if n_qubits == 0 {
        return Err(invalid("need at least one qubit"));
    }
    if n_qubits > MAX_DENSE_QUBITS {
        return Err(Error::Capacity {
            what,
            n_qubits,
            limit: MAX_DENSE_QUBITS,
        });
    }
    Ok(())
}

/// The set of qubits `B` whose indices are transposed by `T_B`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    n_qubits: usize,
    subsystem_b: Vec<usize>,
}

impl Bipartition {
    /// A proper bipartition: `subsystem_b` must be nonempty and must not
    /// contain every qubit.
    pub fn new(n_qubits: usize, subsystem_b: impl IntoIterator<Item = usize>) -> Result<Self> {
        let part = Self::any_subset(n_qubits, subsystem_b)?;
        if part.subsystem_b.is_empty() || part.subsystem_b.len() == n_qubits {
            return Err(invalid(
                "subsystem B must be a nonempty proper subset of the qubits",
            ));
        }
        Ok(part)
    }

    /// Any subset, including the empty set (no transpose) and the full set
    /// (full transpose). Used where the transpose is applied generically.
    pub fn any_subset(
        n_qubits: usize,
        subsystem_b: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 63 {
            return Err(invalid(format!("unsupported qubit count {n_qubits}")));
        }
        let mut qubits: Vec<usize> = subsystem_b.into_iter().collect();
        qubits.sort_unstable();
        qubits.dedup();
        if let Some(&q) = qubits.iter().find(|&&q| q >= n_qubits) {
            return Err(invalid(format!(
                "qubit {q} out of range for {n_qubits} qubits"
            )));
        }
        Ok(Bipartition {
            n_qubits,
            subsystem_b: qubits,
        })
    }

    /// Last `N/2` qubits; requires even `N`.
    pub fn balanced(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || !n_qubits.is_multiple_of(2) {
            return Err(invalid(format!(
                "balanced bipartition needs an even qubit count, got {n_qubits}"
            )));
        }
        Self::new(n_qubits, n_qubits / 2..n_qubits)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn subsystem_b(&self) -> &[usize] {
        &self.subsystem_b
    }

    pub fn contains(&self, qubit: usize) -> bool {
        self.subsystem_b.binary_search(&qubit).is_ok()
    }

    /// Basis-index bits belonging to `B`.
    pub fn index_mask(&self) -> usize {
        self.subsystem_b
            .iter()
            .fold(0, |acc, &q| acc | qubit_mask(self.n_qubits, q))
    }
}

/// Partial transpose on `B`: swaps the `B` bits of the row and column index.
pub fn partial_transpose(m: &ComplexMatrix, part: &Bipartition) -> Result<ComplexMatrix> {
    let dim = 1usize << part.n_qubits();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(invalid(format!(
            "matrix is {}x{}, bipartition expects {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mask = part.index_mask();
    Ok(ComplexMatrix::from_fn(dim, dim, |i, j| {
        let src_i = (i & !mask) | (j & mask);
        let src_j = (j & !mask) | (i & mask);
        m[(src_i, src_j)]
    }))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut eig: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Spectrum of `rho^{T_B}` by dense eigendecomposition.
pub fn dense_pt_spectrum(rho: &DensityMatrix, part: &Bipartition) -> Result<Vec<f64>> {
    Ok(hermitian_eigenvalues(&rho.partial_transpose(part)?))
}

/// `sum_i lambda_i^m`.
pub fn power_sum(eigenvalues: &[f64], m: u32) -> f64 {
    eigenvalues.iter().map(|l| l.powi(m as i32)).sum()
}

/// `e_0 .. e_d` of the given values, via the coefficients of `prod (1 + lambda_i x)`.
pub fn esp_from_eigenvalues(eigenvalues: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; eigenvalues.len() + 1];
    e[0] = 1.0;
    for (n, &l) in eigenvalues.iter().enumerate() {
        for k in (1..=n + 1).rev() {
            e[k] += l * e[k - 1];
        }
    }
    e
}

fn check_werner_args(n_qubits: usize, t: f64) -> Result<()> {
    if n_qubits == 0 || !n_qubits.is_multiple_of(2) {
        return Err(invalid(format!(
            "Werner states need an even qubit count, got {n_qubits}"
        )));
    }
    if !(-1.0..=1.0).contains(&t) {
        return Err(invalid(format!("Werner parameter t={t} outside [-1, 1]")));
    }
    Ok(())
}

fn werner_local_dim(n_qubits: usize) -> usize {
    1 << (n_qubits / 2)
}

/// `(I - t F) / (d^2 - d t)` with `F` the swap of the two `N/2`-qubit halves.
pub fn werner_state(n_qubits: usize, t: f64) -> Result<DensityMatrix> {
    check_werner_args(n_qubits, t)?;
    check_dense_size(n_qubits, "Werner state")?;
    let d = werner_local_dim(n_qubits);
    let dim = d * d;
    let norm = (d * d) as f64 - d as f64 * t;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for a in 0..d {
        for b in 0..d {
            let i = a * d + b;
            // F |a, b> = |b, a>
            let swapped = b * d + a;
            m[(i, i)] += Complex64::new(1.0 / norm, 0.0);
            m[(swapped, i)] -= Complex64::new(t / norm, 0.0);
        }
    }
    Ok(DensityMatrix {
        n_qubits,
        entries: m,
    })
}

/// Two-level spectrum of a Werner state's partial transpose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtSpectrum {
    /// Eigenvalue along the maximally entangled direction (multiplicity 1).
    pub lambda_minus: f64,
    /// Eigenvalue on the orthogonal complement (multiplicity `d^2 - 1`).
    pub lambda_plus: f64,
    pub local_dim: usize,
}

impl PtSpectrum {
    pub fn multiplicity_plus(&self) -> usize {
        self.local_dim * self.local_dim - 1
    }

    /// All `d^2` eigenvalues, ascending when `lambda_minus <= lambda_plus`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = vec![self.lambda_minus];
        v.extend(std::iter::repeat_n(
            self.lambda_plus,
            self.multiplicity_plus(),
        ));
        v
    }
}

pub fn werner_pt_spectrum(n_qubits: usize, t: f64) -> Result<PtSpectrum> {
    check_werner_args(n_qubits, t)?;
    let d = werner_local_dim(n_qubits) as f64;
    let norm = d * d - d * t;
    Ok(PtSpectrum {
        lambda_minus: (1.0 - d * t) / norm,
        lambda_plus: 1.0 / norm,
        local_dim: werner_local_dim(n_qubits),
    })
}

/// `Tr[(rho_W^{T_B})^m]`.
pub fn exact_pt_moment(spec: &PtSpectrum, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    Ok(spec.lambda_minus.powi(m as i32)
        + spec.multiplicity_plus() as f64 * spec.lambda_plus.powi(m as i32))
}

/// `e_k` of the two-level spectrum; zero beyond `k = d^2`.
pub fn exact_esp(spec: &PtSpectrum, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(invalid("ESP order must be at least 1"));
    }
    let n = spec.multiplicity_plus() as u64;
    let k64 = k as u64;
    if k64 > n + 1 {
        return Ok(0.0);
    }
    let lp = spec.lambda_plus;
    Ok(binomial_f64(n, k64) * lp.powi(k as i32)
        + binomial_f64(n, k64 - 1) * spec.lambda_minus * lp.powi(k as i32 - 1))
}

/// Smallest `k` with `e_k < 0` for `rho_W(t)`, i.e. the smallest integer
/// `k > d / t`. `None` for PPT states (`t <= 1/d`).
pub fn first_violated_order(n_qubits: usize, t: f64) -> Result<Option<u32>> {
    check_werner_args(n_qubits, t)?;
    let d = werner_local_dim(n_qubits) as f64;
    if t * d <= 1.0 {
        return Ok(None);
    }
    Ok(Some((d / t).floor() as u32 + 1))
}

/// Werner instance label used in provenance strings.
pub fn werner_descriptor(n_qubits: usize, t: f64) -> String {
    format!("werner(n={n_qubits},t={t})")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn werner_t0_is_maximally_mixed() {
        let rho = werner_state(2, 0.0).unwrap();
        let mm = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(max_abs_diff(rho.matrix(), mm.matrix()) < 1e-15);
    }

    #[test]
    fn werner_t1_is_singlet_projector() {
        let rho = werner_state(2, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // singlet (|01> - |10>)/sqrt(2)
        let singlet = DensityMatrix::from_pure(2, &[c(0.0), c(s), c(-s), c(0.0)]).unwrap();
        assert!(max_abs_diff(rho.matrix(), singlet.matrix()) < 1e-15);
    }

    #[test]
    fn werner_is_physical() {
        for n in [2, 4] {
            for i in 0..=20 {
                let t = -1.0 + 0.1 * i as f64;
                werner_state(n, t.clamp(-1.0, 1.0))
                    .unwrap()
                    .check_physical()
                    .unwrap();
            }
        }
    }

    #[test]
    fn werner_rejects_bad_arguments() {
        assert!(werner_state(3, 0.5).is_err());
        assert!(werner_state(2, 1.5).is_err());
        assert!(werner_state(0, 0.5).is_err());
        assert!(werner_pt_spectrum(2, -1.01).is_err());
    }

    #[test]
    fn werner_five_sixths_spectrum() {
        let spec = werner_pt_spectrum(2, 5.0 / 6.0).unwrap();
        assert!((spec.lambda_minus + 2.0 / 7.0).abs() < 1e-15);
        assert!((spec.lambda_plus - 3.0 / 7.0).abs() < 1e-15);

        let rho = werner_state(2, 5.0 / 6.0).unwrap();
        let eig = dense_pt_spectrum(&rho, &Bipartition::balanced(2).unwrap()).unwrap();
        let expected = [-2.0 / 7.0, 3.0 / 7.0, 3.0 / 7.0, 3.0 / 7.0];
        for (a, b) in eig.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{eig:?}");
        }
    }

    #[test]
    fn ppt_boundary_and_mixed() {
        let spec = werner_pt_spectrum(2, 0.5).unwrap();
        assert_eq!(spec.lambda_minus, 0.0);
        let spec = werner_pt_spectrum(4, 0.0).unwrap();
        assert_eq!(spec.lambda_minus, 1.0 / 16.0);
        assert_eq!(spec.lambda_plus, 1.0 / 16.0);
    }

    #[test]
    fn spectrum_is_trace_preserving() {
        for n in [2, 4, 6, 8] {
            for i in 0..=40 {
                let t = -1.0 + 0.05 * i as f64;
                let spec = werner_pt_spectrum(n, t.clamp(-1.0, 1.0)).unwrap();
                assert!(spec.lambda_plus > 0.0);
                let tr = spec.lambda_minus + spec.multiplicity_plus() as f64 * spec.lambda_plus;
                assert!((tr - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_moments_and_esps() {
        let spec = werner_pt_spectrum(2, 5.0 / 6.0).unwrap();
        assert!((exact_pt_moment(&spec, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((exact_pt_moment(&spec, 2).unwrap() - 31.0 / 49.0).abs() < 1e-15);
        assert!((exact_pt_moment(&spec, 3).unwrap() - 73.0 / 343.0).abs() < 1e-15);
        assert!((exact_esp(&spec, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((exact_esp(&spec, 2).unwrap() - 9.0 / 49.0).abs() < 1e-15);
        assert!((exact_esp(&spec, 3).unwrap() + 27.0 / 343.0).abs() < 1e-15);
        assert!((exact_esp(&spec, 4).unwrap() + 54.0 / 2401.0).abs() < 1e-15);
        assert_eq!(exact_esp(&spec, 5).unwrap(), 0.0);
        assert!(exact_pt_moment(&spec, 0).is_err());
        assert!(exact_esp(&spec, 0).is_err());
    }

    #[test]
    fn first_violated_examples() {
        assert_eq!(first_violated_order(2, 0.8333).unwrap(), Some(3));
        assert_eq!(first_violated_order(4, 0.7333).unwrap(), Some(6));
        assert_eq!(first_violated_order(8, 0.9150).unwrap(), Some(18));
        assert_eq!(first_violated_order(2, 0.5).unwrap(), None);
        assert_eq!(first_violated_order(2, -0.7).unwrap(), None);
    }

    #[test]
    fn partial_transpose_is_involutive_and_trace_preserving() {
        let rho = werner_state(4, 0.37).unwrap();
        for b in [vec![0], vec![1, 3], vec![2, 3], vec![0, 1, 2]] {
            let part = Bipartition::new(4, b).unwrap();
            let pt = rho.partial_transpose(&part).unwrap();
            assert!((pt.trace() - c(1.0)).norm() < 1e-14);
            let back = partial_transpose(&pt, &part).unwrap();
            assert_eq!(&back, rho.matrix());
        }
    }

    #[test]
    fn full_transpose_and_identity_subsets() {
        let m = ComplexMatrix::from_fn(4, 4, |i, j| Complex64::new(i as f64, j as f64));
        let none = Bipartition::any_subset(2, []).unwrap();
        assert_eq!(partial_transpose(&m, &none).unwrap(), m);
        let all = Bipartition::any_subset(2, [0, 1]).unwrap();
        assert_eq!(partial_transpose(&m, &all).unwrap(), m.transpose());
    }

    #[test]
    fn bipartition_validation() {
        assert!(Bipartition::new(2, []).is_err());
        assert!(Bipartition::new(2, [0, 1]).is_err());
        assert!(Bipartition::new(2, [2]).is_err());
        assert!(Bipartition::balanced(3).is_err());
        let p = Bipartition::balanced(4).unwrap();
        assert_eq!(p.subsystem_b(), &[2, 3]);
        assert_eq!(p.index_mask(), 0b0011);
    }

    #[test]
    fn physicality_checks() {
        let bad_trace = ComplexMatrix::identity(2, 2);
        assert!(matches!(
            DensityMatrix::new(1, bad_trace),
            Err(Error::InvalidState(_))
        ));
        let not_psd = ComplexMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(DensityMatrix::new(1, not_psd).is_err());
        let non_herm = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5),
                Complex64::new(0.0, 0.1),
                Complex64::new(0.0, 0.1),
                c(0.5),
            ],
        );
        assert!(DensityMatrix::new(1, non_herm).is_err());
        assert!(matches!(
            DensityMatrix::maximally_mixed(13),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let rho = werner_state(2, 0.3).unwrap();
        let back = DensityMatrix::from_json(&rho.to_json().unwrap()).unwrap();
        assert_eq!(back, rho);
        assert!(DensityMatrix::from_json(r#"{"n_qubits": 1, "entries": [[1,0]]}"#).is_err());
    }

    #[test]
    fn esp_polynomial_expansion() {
        let e = esp_from_eigenvalues(&[1.0, 2.0, 3.0]);
        assert_eq!(e, vec![1.0, 6.0, 11.0, 6.0]);
    }
}
