//! Convergence of a stream of estimates: stop once `window` consecutive
//! successive pairs satisfy `|a - b| < tol · max(|a|, |b|)`.

use serde::{Deserialize, Serialize};

/// The pairwise criterion. Two exact zeros count as converged.
pub fn successive_close(prev: f64, next: f64, tolerance: f64) -> bool {
    if prev == 0.0 && next == 0.0 {
        return true;
    }
    (next - prev).abs() < tolerance * prev.abs().max(next.abs())
}

/// Whether the last `window` successive pairs of `history` all pass.
/// Histories with fewer than `window + 1` entries never stop.
pub fn stopping_rule_step(history: &[f64], tolerance: f64, window: usize) -> bool {
    if history.len() < 2 || window == 0 || history.len() < window + 1 {
        return false;
    }
    history[history.len() - window - 1..]
        .windows(2)
        .all(|w| successive_close(w[0], w[1], tolerance))
}

/// Streaming form of [`stopping_rule_step`]. Latches at the first stop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    tolerance: f64,
    window: usize,
    last: Option<f64>,
    streak: usize,
    stopped_at: Option<usize>,
}

impl StoppingRule {
    pub fn new(tolerance: f64, window: usize) -> Self {
        StoppingRule {
            tolerance,
            window,
            last: None,
            streak: 0,
            stopped_at: None,
        }
    }

    /// Feeds the estimate available after `shot` shots. Returns whether the
    /// rule has stopped (now or earlier).
    pub fn push(&mut self, shot: usize, value: f64) -> bool {
        if self.stopped_at.is_some() {
            return true;
        }
        if let Some(prev) = self.last {
            if successive_close(prev, value, self.tolerance) {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
        }
        self.last = Some(value);
        if self.streak >= self.window {
            self.stopped_at = Some(shot);
        }
        self.stopped_at.is_some()
    }

    pub fn stopped_at(&self) -> Option<usize> {
        self.stopped_at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sequence_stops() {
        assert!(stopping_rule_step(&[0.5; 11], 1e-3, 10));
        assert!(!stopping_rule_step(&[0.5; 10], 1e-3, 10));
        assert!(stopping_rule_step(&[0.0; 3], 1e-3, 2));
    }

    #[test]
    fn alternating_never_stops() {
        let h: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { 1.01 })
            .collect();
        for end in 2..=h.len() {
            assert!(!stopping_rule_step(&h[..end], 1e-3, 10));
        }
    }

    #[test]
    fn inequality_is_strict() {
        // relative change exactly 0.5 against tolerance 0.5
        assert!(!successive_close(1.0, 2.0, 0.5));
        assert!(successive_close(1.0, 2.0, 0.5000001));
        assert!(!successive_close(0.0, 1e-300, 1e-3));
    }

    #[test]
    fn streaming_matches_batch() {
        let h: Vec<f64> = (0..60)
            .map(|i| 1.0 + 1.0 / (1.0 + (i * i * i) as f64))
            .collect();
        let mut rule = StoppingRule::new(1e-3, 5);
        let mut first = None;
        for (i, &v) in h.iter().enumerate() {
            let streamed = rule.push(i + 1, v);
            let batch = stopping_rule_step(&h[..=i], 1e-3, 5);
            if first.is_none() {
                assert_eq!(streamed, batch, "i={i}");
                if batch {
                    first = Some(i + 1);
                }
            }
        }
        assert_eq!(rule.stopped_at(), first);
        assert!(first.is_some());
    }
}
