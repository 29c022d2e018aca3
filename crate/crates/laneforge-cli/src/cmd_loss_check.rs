//! Loss verification: finite-difference gradient suite plus randomized
//! range and degeneration invariants, with one summary line per check.

use laneforge::config::RunConfig;
use laneforge::geometry::Lane;
use laneforge::losses::gradcheck::run_grad_suite;
use laneforge::losses::{gliou, liou, GliouParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::CliError;

const FD_TOL: f64 = 1e-5;

/// Ground truth on a random contiguous run, prediction everywhere.
fn random_pair<R: Rng>(rng: &mut R, dx: impl Fn(&mut R) -> f64) -> (Lane, Lane) {
    let k = rng.random_range(4..=24usize);
    let run_start = rng.random_range(0..k - 1);
    let run_end = rng.random_range(run_start + 2..=k);
    let mut gt_xs = vec![None; k];
    let mut pred_xs = Vec::with_capacity(k);
    for (i, slot) in gt_xs.iter_mut().enumerate() {
        let base = rng.random_range(0.0..800.0);
        if i >= run_start && i < run_end {
            *slot = Some(base);
        }
        pred_xs.push(base + dx(rng));
    }
    (Lane::full(pred_xs), Lane::new(gt_xs))
}

fn range_check(seed: u64, trials: usize, p: &GliouParams) -> (f64, f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales = [0.1, 1.0, 10.0, 1000.0];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut violations = 0usize;
    for i in 0..trials {
        let scale = scales[i % scales.len()] * p.e;
        let (pred, gt) = random_pair(&mut rng, |r| r.random_range(-1.0..1.0) * scale);
        let g = gliou(&pred, &gt, p).expect("joint run is nonempty by construction");
        if !(g > -2.0 && g <= 1.0) {
            violations += 1;
        }
        lo = lo.min(g);
        hi = hi.max(g);
    }
    (lo, hi, violations)
}

fn degeneration_check(seed: u64, trials: usize, p: &GliouParams) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    for _ in 0..trials {
        let (pred, gt) = random_pair(&mut rng, |r| r.random_range(-2.0..=2.0) * p.e);
        let g = gliou(&pred, &gt, p).expect("joint run is nonempty by construction");
        let l = liou(&pred, &gt, p).expect("joint run is nonempty by construction");
        if g.to_bits() != l.to_bits() {
            mismatches += 1;
        }
    }
    mismatches
}

pub fn run(trials: usize, break_grad: bool, cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.gliou_params();
    if trials == 0 {
        println!("loss-check: 0 trials, nothing checked");
        return Ok(());
    }

    let perturbation = if break_grad { 1e-3 } else { 0.0 };
    let report = run_grad_suite(cfg.seed, trials, &p, perturbation);
    let fd_ok = report.max_rel_err < FD_TOL;
    println!(
        "gradient:     {} trials, max relative error {:.3e} (tolerance {FD_TOL:.0e}) {}",
        report.trials,
        report.max_rel_err,
        if fd_ok { "ok" } else { "FAIL" }
    );

    let (lo, hi, violations) = range_check(cfg.seed.wrapping_add(1), trials, &p);
    let range_ok = violations == 0;
    println!(
        "range:        {trials} pairs in [{lo:.6}, {hi:.6}], {violations} outside (-2, 1] {}",
        if range_ok { "ok" } else { "FAIL" }
    );

    let mismatches = degeneration_check(cfg.seed.wrapping_add(2), trials, &p);
    let degen_ok = mismatches == 0;
    println!(
        "degeneration: {trials} overlapping pairs, {mismatches} bit mismatches {}",
        if degen_ok { "ok" } else { "FAIL" }
    );

    if fd_ok && range_ok && degen_ok {
        Ok(())
    } else {
        Err(CliError::Data("loss checks failed".into()))
    }
}
