use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StateSpec};
use super::stopping::StoppingRule;
use super::SOFTWARE;
use crate::certify::{
    certify, hierarchy_check, newton_girard, CertificationVerdict, EspSource, EspVector,
};
use crate::error::Result;
use crate::estimators::{new_estimator, MomentEstimate, MomentEstimator, Strategy};
use crate::sampler::BornSampler;
use crate::states::{
    dense_pt_spectrum, esp_from_eigenvalues, exact_esp, exact_pt_moment, power_sum,
    werner_pt_spectrum, Bipartition, DensityMatrix,
};

// exact references of imported states come from a dense eigendecomposition
const EXACT_DENSE_MAX_QUBITS: usize = 10;
// exact ESPs below this magnitude are treated as zero when locating the first negative one
const EXACT_ZERO_TOL: f64 = 1e-12;

/// One recorded checkpoint of one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub shot: usize,
    /// Real parts, aligned with [`MomentTrace::orders`]; `None` while undefined.
    pub moments: Vec<Option<f64>>,
    pub moments_imag: Vec<Option<f64>>,
    /// `e_1, e_2, ..` as far as every needed moment is defined.
    pub esp: Vec<f64>,
    /// Stopping-rule state per order.
    pub stopped: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTrace {
    pub run_id: usize,
    pub run_seed: u64,
    pub strategy: Strategy,
    pub orders: Vec<usize>,
    pub points: Vec<TracePoint>,
    /// First shot at which each order's rule fired.
    pub stop_shots: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: usize,
    pub strategy: Strategy,
    pub target_order: usize,
    pub stopping_shot: Option<usize>,
    /// The stopping shot, or the last shot when the rule never fired.
    pub evaluated_at: usize,
    pub moments_at_evaluation: Vec<Option<f64>>,
    pub esp_at_evaluation: Vec<f64>,
    pub verdict: CertificationVerdict,
    pub detected: bool,
    pub final_shot: usize,
    pub final_moments: Vec<Option<f64>>,
    pub dropped_shots: usize,
    pub exact_moments: Option<Vec<f64>>,
    pub exact_esp: Option<Vec<f64>>,
    pub exact_first_negative_k: Option<usize>,
}

/// Everything one experiment produces; this is the JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub software: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub traces: Vec<MomentTrace>,
    pub summaries: Vec<RunSummary>,
}

#[derive(Clone, Debug)]
struct ExactReference {
    moments: Vec<f64>,
    esp: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_id`. Distinct runs of one base seed never collide.
pub fn run_seed(base_seed: u64, run_id: usize) -> u64 {
    splitmix64(splitmix64(base_seed) ^ run_id as u64)
}

/// Largest `K` such that every order `2..=K` is recorded (at least 1).
pub(crate) fn esp_depth(orders: &[usize]) -> usize {
    let mut k = 1;
    while orders.contains(&(k + 1)) {
        k += 1;
    }
    k
}

/// `e_1..e_K` from the recorded moments with `p_1 = 1`.
fn esp_from_moments(orders: &[usize], moments: &[Option<f64>]) -> Vec<f64> {
    let depth = esp_depth(orders);
    let mut p = vec![1.0];
    for k in 2..=depth {
        let idx = orders.iter().position(|&o| o == k).expect("contiguous");
        match moments[idx] {
            Some(v) => p.push(v),
            None => break,
        }
    }
    newton_girard(&p).expect("p_1 present").as_slice()[1..].to_vec()
}

fn exact_reference(
    config: &ExperimentConfig,
    rho: &DensityMatrix,
    part: &Bipartition,
) -> Result<Option<ExactReference>> {
    let orders = config.recorded_orders();
    let depth = esp_depth(&orders);
    if let (StateSpec::Werner { n_qubits, t }, None) = (&config.state, &config.bipartition) {
        let spec = werner_pt_spectrum(*n_qubits, *t)?;
        return Ok(Some(ExactReference {
            moments: orders
                .iter()
                .map(|&k| exact_pt_moment(&spec, k as u32))
                .collect::<Result<_>>()?,
            esp: (1..=depth)
                .map(|k| exact_esp(&spec, k as u32))
                .collect::<Result<_>>()?,
        }));
    }
    if rho.n_qubits() > EXACT_DENSE_MAX_QUBITS {
        return Ok(None);
    }
    let eig = dense_pt_spectrum(rho, part)?;
    let all = esp_from_eigenvalues(&eig);
    Ok(Some(ExactReference {
        moments: orders.iter().map(|&k| power_sum(&eig, k as u32)).collect(),
        esp: (1..=depth)
            .map(|k| all.get(k).copied().unwrap_or(0.0))
            .collect(),
    }))
}

fn verdict_of(esp: &[f64]) -> CertificationVerdict {
    let mut v = vec![1.0];
    v.extend_from_slice(esp);
    certify(
        &EspVector::new(v, EspSource::Estimated).expect("e_0 = 1"),
        0.0,
    )
}

/// Runs every configured strategy over all runs, in parallel across runs.
/// The result depends only on the configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let rho = config.state.load()?;
    let part = config.bipartition_for(rho.n_qubits())?;
    let exact = exact_reference(config, &rho, &part)?;
    let sampler = BornSampler::new(rho)?;
    let per_run: Vec<Result<(Vec<MomentTrace>, Vec<RunSummary>)>> = (0..config.runs)
        .into_par_iter()
        .map(|run_id| {
            let estimators = config
                .strategies
                .iter()
                .map(|&s| new_estimator(s, &part, config.max_order(), config.batches))
                .collect::<Result<Vec<_>>>()?;
            run_with(config, run_id, &sampler, estimators, exact.as_ref())
        })
        .collect();
    let mut traces = Vec::new();
    let mut summaries = Vec::new();
    for r in per_run {
        let (t, s) = r?;
        traces.extend(t);
        summaries.extend(s);
    }
    Ok(ExperimentOutput {
        software: SOFTWARE.to_string(),
        seed: config.seed,
        config: config.clone(),
        traces,
        summaries,
    })
}

/// One run with caller-supplied estimators, fed from the stream of
/// `run_seed(config.seed, run_id)`. Exposed so tests can observe the feed.
pub fn run_single(
    config: &ExperimentConfig,
    run_id: usize,
    sampler: &BornSampler,
    estimators: Vec<Box<dyn MomentEstimator>>,
) -> Result<(Vec<MomentTrace>, Vec<RunSummary>)> {
    config.validate()?;
    run_with(config, run_id, sampler, estimators, None)
}

struct Lane {
    est: Box<dyn MomentEstimator>,
    rules: Vec<StoppingRule>,
    trace: MomentTrace,
    eval: Option<(usize, Vec<Option<f64>>, Vec<f64>)>,
    last: Vec<MomentEstimate>,
}

fn run_with(
    config: &ExperimentConfig,
    run_id: usize,
    sampler: &BornSampler,
    estimators: Vec<Box<dyn MomentEstimator>>,
    exact: Option<&ExactReference>,
) -> Result<(Vec<MomentTrace>, Vec<RunSummary>)> {
    let orders = config.recorded_orders();
    let target_idx = orders
        .iter()
        .position(|&k| k == config.target_order())
        .expect("validated");
    let seed = run_seed(config.seed, run_id);
    let mut lanes: Vec<Lane> = estimators
        .into_iter()
        .map(|est| Lane {
            rules: orders
                .iter()
                .map(|_| StoppingRule::new(config.stopping.tolerance, config.stopping.window))
                .collect(),
            trace: MomentTrace {
                run_id,
                run_seed: seed,
                strategy: est.strategy(),
                orders: orders.clone(),
                points: Vec::new(),
                stop_shots: vec![None; orders.len()],
            },
            est,
            eval: None,
            last: Vec::new(),
        })
        .collect();

    let mut final_shot = 0;
    for (i, snap) in sampler.stream(seed).take(config.shots).enumerate() {
        let t = i + 1;
        final_shot = t;
        for lane in &mut lanes {
            lane.est.observe(&snap)?;
            lane.last = orders
                .iter()
                .map(|&k| lane.est.estimate(k))
                .collect::<Result<_>>()?;
            for (j, e) in lane.last.iter().enumerate() {
                if e.well_defined
                    && lane.rules[j].stopped_at().is_none()
                    && lane.rules[j].push(t, e.real())
                {
                    lane.trace.stop_shots[j] = Some(t);
                }
            }
        }
        let finished = config.stopping.stop_early
            && lanes
                .iter()
                .all(|l| l.rules[target_idx].stopped_at().is_some());
        for lane in &mut lanes {
            let moments: Vec<Option<f64>> = lane
                .last
                .iter()
                .map(|e| e.well_defined.then(|| e.real()))
                .collect();
            let stops_here = lane.trace.stop_shots[target_idx] == Some(t);
            if !(stops_here || finished || config.records(t)) {
                continue;
            }
            let esp = esp_from_moments(&orders, &moments);
            if stops_here {
                lane.eval = Some((t, moments.clone(), esp.clone()));
            }
            if finished || config.records(t) {
                lane.trace.points.push(TracePoint {
                    shot: t,
                    moments_imag: lane
                        .last
                        .iter()
                        .map(|e| e.well_defined.then(|| e.imag()))
                        .collect(),
                    moments,
                    esp,
                    stopped: lane
                        .rules
                        .iter()
                        .map(|r| r.stopped_at().is_some())
                        .collect(),
                });
            }
        }
        if finished {
            break;
        }
    }

    let mut traces = Vec::with_capacity(lanes.len());
    let mut summaries = Vec::with_capacity(lanes.len());
    for lane in lanes {
        let final_moments: Vec<Option<f64>> = lane
            .last
            .iter()
            .map(|e| e.well_defined.then(|| e.real()))
            .collect();
        let (evaluated_at, moments_at, esp_at) = lane.eval.clone().unwrap_or_else(|| {
            (
                final_shot,
                final_moments.clone(),
                esp_from_moments(&orders, &final_moments),
            )
        });
        let verdict = verdict_of(&esp_at);
        let exact_first = exact.and_then(|x| {
            let mut v = vec![1.0];
            v.extend_from_slice(&x.esp);
            hierarchy_check(
                &EspVector::new(v, EspSource::ExactOracle).expect("e_0 = 1"),
                EXACT_ZERO_TOL,
            )
        });
        summaries.push(RunSummary {
            run_id,
            strategy: lane.trace.strategy,
            target_order: config.target_order(),
            stopping_shot: lane.trace.stop_shots[target_idx],
            evaluated_at,
            moments_at_evaluation: moments_at,
            esp_at_evaluation: esp_at,
            detected: verdict.entangled(),
            verdict,
            final_shot,
            final_moments,
            dropped_shots: lane.last.get(target_idx).map_or(0, |e| e.dropped_shots),
            exact_moments: exact.map(|x| x.moments.clone()),
            exact_esp: exact.map(|x| x.esp.clone()),
            exact_first_negative_k: exact_first,
        });
        traces.push(lane.trace);
    }
    Ok((traces, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            shots: 400,
            runs: 3,
            seed: 9,
            strategies: vec![Strategy::OnlineRecon, Strategy::OnlineNorecon],
            ..Default::default()
        }
    }

    #[test]
    fn run_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| run_seed(5, r)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(run_seed(5, 0), run_seed(6, 0));
    }

    #[test]
    fn esp_depth_needs_contiguous_orders() {
        assert_eq!(esp_depth(&[2, 3, 5]), 3);
        assert_eq!(esp_depth(&[3, 4]), 1);
        let e = esp_from_moments(&[2, 3], &[Some(31.0 / 49.0), None]);
        assert_eq!(e.len(), 2);
        assert_eq!(e[0], 1.0);
    }

    #[test]
    fn online_strategies_agree_in_the_runner() {
        let out = run_experiment(&small()).unwrap();
        assert_eq!(out.traces.len(), 6);
        for r in 0..3 {
            let a = &out.traces[2 * r];
            let b = &out.traces[2 * r + 1];
            assert_eq!(a.points.len(), 400);
            for (pa, pb) in a.points.iter().zip(&b.points) {
                for (x, y) in pa.moments.iter().zip(&pb.moments) {
                    match (x, y) {
                        (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-3)),
                        (None, None) => {}
                        _ => panic!("definedness differs"),
                    }
                }
            }
        }
        let s = &out.summaries[0];
        assert_eq!(s.exact_first_negative_k, Some(3));
        assert!((s.exact_moments.as_ref().unwrap()[0] - 31.0 / 49.0).abs() < 1e-15);
    }

    #[test]
    fn recorded_esps_follow_from_recorded_moments() {
        let out = run_experiment(&small()).unwrap();
        for tr in &out.traces {
            let mut prev = 0;
            for p in &tr.points {
                assert!(p.shot > prev);
                prev = p.shot;
                assert_eq!(p.esp, esp_from_moments(&tr.orders, &p.moments));
            }
        }
    }

    #[test]
    fn stop_early_truncates() {
        let cfg = ExperimentConfig {
            shots: 20_000,
            runs: 1,
            stopping: super::super::StoppingConfig {
                stop_early: true,
                window: 3,
                tolerance: 1e-2,
                target_order: None,
            },
            ..Default::default()
        };
        let out = run_experiment(&cfg).unwrap();
        let s = &out.summaries[0];
        let stop = s.stopping_shot.expect("loose rule fires");
        assert_eq!(s.final_shot, stop);
        assert_eq!(s.evaluated_at, stop);
        assert_eq!(out.traces[0].points.last().unwrap().shot, stop);
    }

    #[test]
    fn zero_shot_budget_is_rejected() {
        let cfg = ExperimentConfig {
            shots: 0,
            ..Default::default()
        };
        assert!(run_experiment(&cfg).is_err());
    }
}
