//! Finite-difference verification for the regression-loss gradient.
//!
//! Random lane pairs are drawn away from the loss kinks (`|dx| = 0` and
//! `|dx| = 2e`) so central differences see a smooth function; the suite
//! reports the worst relative deviation between analytic and numerical
//! gradients. The CLI exposes this as its loss self-check.

use super::{gliou_loss_and_grad, GliouParams, LossError};
use crate::geometry::Lane;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central-difference step in pixels.
pub const FD_STEP: f64 = 1e-4;

/// Denominator floor when forming relative errors, so near-zero gradient
/// components compare by absolute difference instead of blowing up.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Kink exclusion half-width as a fraction of `e`.
pub const KINK_MARGIN: f64 = 1e-3;

/// Outcome of a gradient-check run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    pub max_rel_err: f64,
}

/// Central finite-difference gradient of the regression loss w.r.t. each
/// predicted x, step `h` in pixels. Slices absent in either lane get 0,
/// mirroring the analytic gradient's support.
pub fn fd_gradient(pred: &Lane, gt: &Lane, p: &GliouParams, h: f64) -> Result<Vec<f64>, LossError> {
    let mut grad = vec![0.0; pred.len()];
    for i in 0..pred.len() {
        let Some(x) = pred.get(i) else { continue };
        if gt.get(i).is_none() {
            continue;
        }
        let loss_at = |v: f64| -> Result<f64, LossError> {
            let mut xs = pred.xs().to_vec();
            xs[i] = Some(v);
            Ok(gliou_loss_and_grad(&Lane::new(xs), gt, p)?.0)
        };
        grad[i] = (loss_at(x + h)? - loss_at(x - h)?) / (2.0 * h);
    }
    Ok(grad)
}

/// Worst per-component relative deviation between two gradients.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(REL_ERR_FLOOR))
        .fold(0.0, f64::max)
}

/// Offset magnitude clear of both kinks: at least `KINK_MARGIN * e` away
/// from 0 and from `2e`.
fn sample_offset<R: Rng>(rng: &mut R, e: f64) -> f64 {
    loop {
        let d = rng.random_range(-10.0 * e..10.0 * e);
        if d.abs() > KINK_MARGIN * e && (d.abs() - 2.0 * e).abs() > KINK_MARGIN * e {
            return d;
        }
    }
}

/// Runs `trials` random gradient checks. `grad_perturbation` is added to
/// every analytic component before comparison; 0.0 for a genuine check, a
/// nonzero value to confirm the suite catches a broken gradient.
pub fn run_grad_suite(
    seed: u64,
    trials: usize,
    p: &GliouParams,
    grad_perturbation: f64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err: f64 = 0.0;
    for _ in 0..trials {
        let k = rng.random_range(4..=24usize);
        // Ground truth on a random contiguous run, prediction everywhere:
        // exercises the zero-gradient region outside the joint run too.
        let run_start = rng.random_range(0..k / 2);
        let run_end = rng.random_range(run_start + 2..=k);
        let mut gt_xs = vec![None; k];
        let mut pred_xs = Vec::with_capacity(k);
        for (i, slot) in gt_xs.iter_mut().enumerate() {
            let x = rng.random_range(100.0..700.0);
            if i >= run_start && i < run_end {
                *slot = Some(x);
                pred_xs.push(x + sample_offset(&mut rng, p.e));
            } else {
                pred_xs.push(x);
            }
        }
        let gt = Lane::new(gt_xs);
        let pred = Lane::full(pred_xs);

        let (_, mut analytic) = gliou_loss_and_grad(&pred, &gt, p).expect("joint run exists");
        let numeric = fd_gradient(&pred, &gt, p, FD_STEP).expect("joint run exists");
        for (i, g) in analytic.iter_mut().enumerate() {
            if i >= run_start && i < run_end {
                *g += grad_perturbation;
            }
        }
        max_rel_err = max_rel_err.max(max_relative_error(&analytic, &numeric));
    }
    GradCheckReport {
        trials,
        max_rel_err,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: GliouParams = GliouParams { e: 15.0 };

    #[test]
    fn analytic_matches_central_differences() {
        let report = run_grad_suite(7, 50, &E, 0.0);
        assert_eq!(report.trials, 50);
        assert!(
            report.max_rel_err < 1e-5,
            "max relative error {} too large",
            report.max_rel_err
        );
    }

    #[test]
    fn broken_gradient_is_detected() {
        let report = run_grad_suite(7, 50, &E, 1e-3);
        assert!(report.max_rel_err > 1e-5);
    }

    #[test]
    fn fd_gradient_zero_outside_joint_run() {
        let pred = Lane::full(vec![100.0, 120.0, 140.0, 160.0]);
        let gt = Lane::new(vec![None, Some(118.0), Some(141.0), None]);
        let g = fd_gradient(&pred, &gt, &E, FD_STEP).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.0);
        assert!(g[1] != 0.0 && g[2] != 0.0);
    }

    #[test]
    fn zero_trials_report_is_clean() {
        let report = run_grad_suite(1, 0, &E, 0.0);
        assert_eq!(report.trials, 0);
        assert_eq!(report.max_rel_err, 0.0);
    }
}
