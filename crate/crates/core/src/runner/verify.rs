//! A quick self-check battery behind the `verify` subcommand. Each check
//! compares two independent routes to the same quantity.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::newton_girard;
use crate::error::Result;
use crate::estimators::{new_estimator, restore, ustat_offline, Strategy};
use crate::kernel::{pt_flip, tuple_trace_dense, tuple_trace_direct, tuple_trace_expansion};
use crate::sampler::{snapshot_matrix, stream_shadows, Outcome, Snapshot};
use crate::states::{
    dense_pt_spectrum, esp_from_eigenvalues, exact_esp, exact_pt_moment, partial_transpose,
    power_sum, werner_pt_spectrum, werner_state, Bipartition,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("max deviation {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn random_snapshot(rng: &mut ChaCha8Rng, n: usize) -> Snapshot {
    let outcomes = (0..n)
        .map(|_| Outcome::from_code(rng.gen_range(0..6u8)).expect("code < 6"))
        .collect();
    Snapshot::new(outcomes).expect("n >= 1")
}

fn online_matches_offline() -> Result<Check> {
    let rho = werner_state(2, 5.0 / 6.0)?;
    let part = Bipartition::balanced(2)?;
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let s = stream_shadows(&rho, 25, seed, "verify")?.snapshots;
        for strategy in [Strategy::OnlineNorecon, Strategy::OnlineRecon] {
            let mut est = new_estimator(strategy, &part, 4, 4)?;
            for t in 1..=s.len() {
                est.observe(&s[t - 1])?;
                for m in 2..=4.min(t) {
                    let off = ustat_offline(&s[..t], m, &part)?.value;
                    let on = est.estimate(m)?.value;
                    worst = worst.max((on - off).norm() / off.norm().max(1e-300));
                }
            }
        }
    }
    Ok(check(
        "online estimators equal the offline U-statistic",
        worst,
        1e-9,
    ))
}

fn werner_oracle_matches_dense() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in [2, 4] {
        let part = Bipartition::balanced(n)?;
        for i in 0..=10 {
            let t = -1.0 + 0.2 * i as f64;
            let spec = werner_pt_spectrum(n, t)?;
            let eig = dense_pt_spectrum(&werner_state(n, t)?, &part)?;
            let e = esp_from_eigenvalues(&eig);
            for k in 1..=6u32 {
                worst = worst.max((exact_pt_moment(&spec, k)? - power_sum(&eig, k)).abs());
                worst = worst
                    .max((exact_esp(&spec, k)? - e.get(k as usize).copied().unwrap_or(0.0)).abs());
            }
        }
    }
    Ok(check(
        "Werner PT oracle equals dense diagonalisation",
        worst,
        1e-10,
    ))
}

fn flip_matches_dense_transpose() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in 1..=2usize {
        for code in 0..6usize.pow(n as u32) {
            let outcomes = (0..n)
                .map(|q| {
                    Outcome::from_code(((code / 6usize.pow(q as u32)) % 6) as u8).expect("code")
                })
                .collect();
            let s = Snapshot::new(outcomes)?;
            let dense = snapshot_matrix(&s)?;
            for mask in 0..1usize << n {
                let part = Bipartition::any_subset(n, (0..n).filter(|q| mask >> q & 1 == 1))?;
                let flipped = snapshot_matrix(&pt_flip(&s, &part)?)?;
                let reference = partial_transpose(&dense, &part)?;
                worst = worst.max(
                    (flipped - reference)
                        .iter()
                        .map(|z| z.norm())
                        .fold(0.0, f64::max),
                );
            }
        }
    }
    Ok(check(
        "snapshot bit flip equals dense partial transpose",
        worst,
        0.0,
    ))
}

fn kernels_agree() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=3usize);
        let m = rng.gen_range(1..=5usize);
        let tuple: Vec<Snapshot> = (0..m).map(|_| random_snapshot(&mut rng, n)).collect();
        let part = Bipartition::any_subset(n, (0..n).filter(|_| rng.gen_bool(0.5)))?;
        let a = tuple_trace_direct(&tuple, &part)?;
        let b = tuple_trace_expansion(&tuple, &part)?;
        let c = tuple_trace_dense(&tuple, &part)?;
        let scale = a.norm().max(1.0);
        worst = worst
            .max((a - b).norm() / scale)
            .max((a - c).norm() / scale);
    }
    Ok(check(
        "trace kernels agree (factorised, Pauli, dense)",
        worst,
        1e-10,
    ))
}

fn newton_girard_matches_expansion() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.gen_range(1..=16usize);
        let eig: Vec<f64> = (0..d)
            .map(|_| rng.gen_range(-0.3..1.0) / d as f64)
            .collect();
        let p: Vec<f64> = (1..=d as u32).map(|k| power_sum(&eig, k)).collect();
        let ng = newton_girard(&p)?;
        for (a, b) in ng.as_slice().iter().zip(esp_from_eigenvalues(&eig)) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(check(
        "Newton–Girard equals direct ESP expansion",
        worst,
        1e-10,
    ))
}

fn checkpoints_resume() -> Result<Check> {
    let rho = werner_state(2, 0.9)?;
    let part = Bipartition::balanced(2)?;
    let s = stream_shadows(&rho, 20, 3, "verify")?.snapshots;
    let mut worst: f64 = 0.0;
    for strategy in Strategy::ALL {
        let mut a = new_estimator(strategy, &part, 3, 3)?;
        for x in &s[..10] {
            a.observe(x)?;
        }
        let mut b = restore(&a.checkpoint())?;
        for x in &s[10..] {
            a.observe(x)?;
            b.observe(x)?;
        }
        let d: Complex64 = a.estimate(3)?.value - b.estimate(3)?.value;
        worst = worst.max(d.norm());
    }
    Ok(check(
        "checkpoint and restore continue identically",
        worst,
        0.0,
    ))
}

/// Runs every check. Errors inside a check are reported as failures.
pub fn run_battery() -> Vec<Check> {
    type Job = (&'static str, fn() -> Result<Check>);
    let jobs: [Job; 6] = [
        (
            "online estimators equal the offline U-statistic",
            online_matches_offline,
        ),
        (
            "Werner PT oracle equals dense diagonalisation",
            werner_oracle_matches_dense,
        ),
        (
            "snapshot bit flip equals dense partial transpose",
            flip_matches_dense_transpose,
        ),
        (
            "trace kernels agree (factorised, Pauli, dense)",
            kernels_agree,
        ),
        (
            "Newton–Girard equals direct ESP expansion",
            newton_girard_matches_expansion,
        ),
        (
            "checkpoint and restore continue identically",
            checkpoints_resume,
        ),
    ];
    jobs.iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| Check {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
