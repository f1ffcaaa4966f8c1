//! From power sums to an entanglement certificate.
//!
//! Given `p_k = Tr[(ρ^{T_B})^k]`, the Newton–Girard recurrence yields the
//! elementary symmetric polynomials `e_k` of the PT spectrum. A PSD matrix
//! has every `e_k >= 0`, so any negative `e_k` certifies a negative
//! eigenvalue (NPT entanglement). The sign pattern of `(1, e_1, .., e_d)`
//! also bounds the number of negative eigenvalues (Descartes' rule applied to
//! `det(xI + ρ^{T_B})`).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Entries with magnitude below this count as zero in a sign sequence.
pub const ZERO_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EspSource {
    ExactOracle,
    Estimated,
}

/// `e_0 = 1, e_1, .., e_kmax`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EspVector {
    values: Vec<f64>,
    pub source: EspSource,
}

impl EspVector {
    /// `values` must start with `e_0 = 1`.
    pub fn new(values: Vec<f64>, source: EspSource) -> Result<Self> {
        if values.first() != Some(&1.0) {
            return Err(invalid("an ESP vector starts with e_0 = 1"));
        }
        Ok(EspVector { values, source })
    }

    /// `e_k`, or `None` beyond the stored order.
    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    /// `[e_0, e_1, ..]`.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// `k e_k = Σ_{j=1}^k (-1)^{j-1} p_j e_{k-j}` for `k = 1..len`.
///
/// `power_sums[0]` is `p_1`; PT-moment callers pass the analytic value 1.
pub fn newton_girard(power_sums: &[f64]) -> Result<EspVector> {
    if power_sums.is_empty() {
        return Err(invalid("Newton–Girard needs at least p_1"));
    }
    let mut e = Vec::with_capacity(power_sums.len() + 1);
    e.push(1.0);
    for k in 1..=power_sums.len() {
        let mut acc = 0.0;
        for j in 1..=k {
            let term = power_sums[j - 1] * e[k - j];
            if j % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e.push(acc / k as f64);
    }
    Ok(EspVector {
        values: e,
        source: EspSource::Estimated,
    })
}

/// Smallest `k >= 1` with `e_k < -tolerance`.
pub fn hierarchy_check(esp: &EspVector, tolerance: f64) -> Option<usize> {
    (1..esp.values.len()).find(|&k| esp.values[k] < -tolerance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Parity {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Sign changes of `(1, e_1, .., e_kmax)` after dropping zero entries.
///
/// When the vector runs through `e_d`, `sign_variations` bounds the number of
/// negative PT eigenvalues and shares its parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescartesBound {
    pub sign_variations: usize,
    pub parity: Parity,
}

pub fn descartes_bound(esp: &EspVector) -> DescartesBound {
    let mut prev_positive: Option<bool> = None;
    let mut changes = 0;
    for &e in &esp.values {
        if e.abs() < ZERO_TOL {
            continue;
        }
        let positive = e > 0.0;
        if prev_positive.is_some_and(|p| p != positive) {
            changes += 1;
        }
        prev_positive = Some(positive);
    }
    DescartesBound {
        sign_variations: changes,
        parity: Parity::of(changes),
    }
}

/// Combined outcome of the hierarchy and the Descartes count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificationVerdict {
    pub first_negative_k: Option<usize>,
    pub descartes_upper_bound: usize,
    pub descartes_parity: Parity,
    pub sign_variation_count: usize,
}

impl CertificationVerdict {
    pub fn entangled(&self) -> bool {
        self.first_negative_k.is_some()
    }
}

pub fn certify(esp: &EspVector, tolerance: f64) -> CertificationVerdict {
    let bound = descartes_bound(esp);
    CertificationVerdict {
        first_negative_k: hierarchy_check(esp, tolerance),
        descartes_upper_bound: bound.sign_variations,
        descartes_parity: bound.parity,
        sign_variation_count: bound.sign_variations,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// `p_k <= bound` (even `k`).
    Upper,
    /// `p_k >= bound` (odd `k`).
    Lower,
}

/// `e_k >= 0` written as an affine condition on `p_k` given `p_1 = 1` and
/// the lower moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub order: usize,
    pub kind: BoundKind,
    pub bound: f64,
    pub value: f64,
}

impl MomentConstraint {
    /// Distance to the bound, positive when satisfied. Equals `k · e_k`.
    pub fn margin(&self) -> f64 {
        match self.kind {
            BoundKind::Upper => self.bound - self.value,
            BoundKind::Lower => self.value - self.bound,
        }
    }

    /// Violation on the `e_k` scale: `margin / k < -tolerance`.
    pub fn violated(&self, tolerance: f64) -> bool {
        self.margin() / (self.order as f64) < -tolerance
    }

    pub fn satisfied(&self) -> bool {
        !self.violated(0.0)
    }
}

/// The closed-form conditions for orders 2 through 5.
///
/// `moments[0]` is `p_2`; between one and four moments may be supplied.
pub fn low_order_constraints(moments: &[f64]) -> Result<Vec<MomentConstraint>> {
    if moments.is_empty() || moments.len() > 4 {
        return Err(invalid(
            "supply between one and four moments starting at p_2",
        ));
    }
    let p2 = moments[0];
    let p = |k: usize| moments[k - 2];
    let mut out = vec![MomentConstraint {
        order: 2,
        kind: BoundKind::Upper,
        bound: 1.0,
        value: p2,
    }];
    if moments.len() >= 2 {
        out.push(MomentConstraint {
            order: 3,
            kind: BoundKind::Lower,
            bound: (3.0 * p2 - 1.0) / 2.0,
            value: p(3),
        });
    }
    if moments.len() >= 3 {
        let p3 = p(3);
        out.push(MomentConstraint {
            order: 4,
            kind: BoundKind::Upper,
            bound: (1.0 - 6.0 * p2 + 3.0 * p2 * p2 + 8.0 * p3) / 6.0,
            value: p(4),
        });
    }
    if moments.len() >= 4 {
        let (p3, p4) = (p(3), p(4));
        out.push(MomentConstraint {
            order: 5,
            kind: BoundKind::Lower,
            bound: (-1.0 + 10.0 * p2 - 15.0 * p2 * p2 - 20.0 * p3 + 20.0 * p2 * p3 + 30.0 * p4)
                / 24.0,
            value: p(5),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-14
    }

    #[test]
    fn unit_spectrum() {
        let e = newton_girard(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(e.as_slice(), &[1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn werner_five_sixths() {
        let e = newton_girard(&[1.0, 31.0 / 49.0, 73.0 / 343.0]).unwrap();
        assert!(close(e.get(1).unwrap(), 1.0));
        assert!(close(e.get(2).unwrap(), 9.0 / 49.0));
        assert!(close(e.get(3).unwrap(), -27.0 / 343.0));
        assert_eq!(hierarchy_check(&e, 0.0), Some(3));
    }

    #[test]
    fn two_halves() {
        let e = newton_girard(&[1.0, 0.5]).unwrap();
        assert!(close(e.get(2).unwrap(), 0.25));
        assert!(newton_girard(&[]).is_err());
    }

    #[test]
    fn hierarchy_tolerance() {
        let e = EspVector::new(vec![1.0, 1.0, 0.2, -1e-6], EspSource::Estimated).unwrap();
        assert_eq!(hierarchy_check(&e, 0.0), Some(3));
        assert_eq!(hierarchy_check(&e, 1e-5), None);
        assert!(EspVector::new(vec![0.5], EspSource::Estimated).is_err());
    }

    #[test]
    fn descartes_examples() {
        let e = EspVector::new(vec![1.0, 1.0, 0.3, 0.01], EspSource::ExactOracle).unwrap();
        assert_eq!(
            descartes_bound(&e),
            DescartesBound {
                sign_variations: 0,
                parity: Parity::Even
            }
        );
        let w = EspVector::new(
            vec![1.0, 1.0, 9.0 / 49.0, -27.0 / 343.0, -54.0 / 2401.0],
            EspSource::ExactOracle,
        )
        .unwrap();
        let b = descartes_bound(&w);
        assert_eq!(b.sign_variations, 1);
        assert_eq!(b.parity, Parity::Odd);
        let v = certify(&w, 0.0);
        assert_eq!(v.first_negative_k, Some(3));
        assert!(v.entangled());
        // zeros are skipped, tiny values count as zero
        let z = EspVector::new(vec![1.0, 0.0, -1.0, 1e-16, 2.0], EspSource::Estimated).unwrap();
        assert_eq!(descartes_bound(&z).sign_variations, 2);
    }

    #[test]
    fn low_order_examples() {
        for c in low_order_constraints(&[0.25, 1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0]).unwrap() {
            assert!(c.satisfied(), "{c:?}");
        }
        let w = low_order_constraints(&[31.0 / 49.0, 73.0 / 343.0]).unwrap();
        assert!(w[0].satisfied());
        assert!(close(w[1].bound, 22.0 / 49.0));
        assert!(!w[1].satisfied());
        let pure = low_order_constraints(&[1.0, 1.0]).unwrap();
        assert!(pure.iter().all(MomentConstraint::satisfied));
        assert_eq!(pure[1].margin(), 0.0);
        assert!(low_order_constraints(&[]).is_err());
        assert!(low_order_constraints(&[0.1; 5]).is_err());
    }

    #[test]
    fn margins_equal_scaled_esps() {
        let eig = [0.4, 0.35, 0.3, -0.05];
        let p: Vec<f64> = (1..=5)
            .map(|k| eig.iter().map(|l: &f64| l.powi(k)).sum())
            .collect();
        let e = newton_girard(&p).unwrap();
        for c in low_order_constraints(&p[1..]).unwrap() {
            let k = c.order;
            assert!(
                (c.margin() / k as f64 - e.get(k).unwrap()).abs() < 1e-14,
                "order {k}"
            );
        }
    }
}
