use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::Strategy;
use crate::states::{werner_state, Bipartition, DensityMatrix};

/// Which state to sample from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StateSpec {
    Werner {
        n_qubits: usize,
        t: f64,
    },
    /// JSON matrix file (see [`DensityMatrix::load`]).
    MatrixFile {
        path: PathBuf,
    },
}

impl StateSpec {
    pub fn load(&self) -> Result<DensityMatrix> {
        match self {
            StateSpec::Werner { n_qubits, t } => werner_state(*n_qubits, *t),
            StateSpec::MatrixFile { path } => DensityMatrix::load(path),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingConfig {
    pub tolerance: f64,
    pub window: usize,
    /// Order whose estimate drives the rule; the highest order when absent.
    pub target_order: Option<usize>,
    /// End each run as soon as every estimator has stopped.
    pub stop_early: bool,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        StoppingConfig {
            tolerance: 1e-3,
            window: 10,
            target_order: None,
            stop_early: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub state: StateSpec,
    /// Qubits of subsystem `B`; the last half when absent.
    pub bipartition: Option<Vec<usize>>,
    /// Moment orders to record. Estimators run up to the largest one.
    pub orders: Vec<usize>,
    pub strategies: Vec<Strategy>,
    /// Shot budget per run.
    pub shots: usize,
    pub runs: usize,
    pub seed: u64,
    pub stopping: StoppingConfig,
    /// Record every `stride`-th shot. When absent: every shot up to 10^4,
    /// then every tenth.
    pub stride: Option<usize>,
    /// Batch count for the batched estimator.
    pub batches: usize,
    /// Output directory for `traces.csv` and `results.json`.
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            state: StateSpec::Werner {
                n_qubits: 2,
                t: 5.0 / 6.0,
            },
            bipartition: None,
            orders: vec![2, 3],
            strategies: vec![Strategy::OnlineRecon],
            shots: 20_000,
            runs: 1,
            seed: 0,
            stopping: StoppingConfig::default(),
            stride: None,
            batches: 10,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n_qubits_hint(&self) -> Option<usize> {
        match &self.state {
            StateSpec::Werner { n_qubits, .. } => Some(*n_qubits),
            StateSpec::MatrixFile { .. } => None,
        }
    }

    /// Orders sorted, deduplicated, with order 1 removed (it is always 1).
    pub fn recorded_orders(&self) -> Vec<usize> {
        let mut o: Vec<usize> = self.orders.iter().copied().filter(|&k| k >= 2).collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    pub fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(0)
    }

    pub fn target_order(&self) -> usize {
        self.stopping
            .target_order
            .unwrap_or_else(|| self.max_order())
    }

    /// Whether shot `t` (1-based) is recorded.
    pub fn records(&self, t: usize) -> bool {
        match self.stride {
            Some(s) => t.is_multiple_of(s) || t == self.shots,
            None => t <= 10_000 || t.is_multiple_of(10) || t == self.shots,
        }
    }

    pub fn bipartition_for(&self, n_qubits: usize) -> Result<Bipartition> {
        match &self.bipartition {
            Some(b) => Bipartition::new(n_qubits, b.iter().copied()),
            None => Bipartition::balanced(n_qubits),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(invalid(
                "orders must be a nonempty set of positive integers",
            ));
        }
        if self.recorded_orders().is_empty() {
            return Err(invalid("request at least one order of 2 or more"));
        }
        if self.strategies.is_empty() {
            return Err(invalid("select at least one estimator strategy"));
        }
        if self.shots < self.max_order() {
            return Err(invalid(format!(
                "shot budget {} is below the largest order {}",
                self.shots,
                self.max_order()
            )));
        }
        if self.runs == 0 {
            return Err(invalid("runs must be at least 1"));
        }
        let tol = self.stopping.tolerance;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("stopping tolerance must be positive"));
        }
        if self.stopping.window == 0 {
            return Err(invalid("stopping window must be at least 1"));
        }
        if !self.recorded_orders().contains(&self.target_order()) {
            return Err(invalid(format!(
                "target order {} is not among the recorded orders",
                self.target_order()
            )));
        }
        if self.stride == Some(0) {
            return Err(invalid("stride must be at least 1"));
        }
        if self.strategies.contains(&Strategy::Batched) && self.batches < self.max_order() {
            return Err(invalid(format!(
                "{} batches cannot support order {}",
                self.batches,
                self.max_order()
            )));
        }
        if let StateSpec::Werner { n_qubits, t } = self.state {
            // surface state errors before any sampling starts
            crate::states::werner_pt_spectrum(n_qubits, t)?;
        }
        Ok(())
    }
}
