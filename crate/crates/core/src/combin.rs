//! Binomial coefficients used for U-statistic normalizations.

/// `n choose k` as an exact integer; `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `n choose k` in floating point, valid far beyond the range of `binomial`.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    // integers below 2^53 come back exact
    if acc < 9.0e15 {
        acc.round()
    } else {
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial_f64(50, 3), 19600.0);
        assert_eq!(binomial_f64(2, 3), 0.0);
    }

    #[test]
    fn pascal_rule() {
        for n in 1..60u64 {
            for k in 1..=n {
                assert_eq!(
                    binomial(n, k).unwrap(),
                    binomial(n - 1, k).unwrap() + binomial(n - 1, k - 1).unwrap()
                );
            }
        }
    }

    #[test]
    fn float_matches_integer() {
        for n in 0..80u64 {
            for k in 0..=n.min(12) {
                assert_eq!(binomial_f64(n, k), binomial(n, k).unwrap() as f64);
            }
        }
    }
}
