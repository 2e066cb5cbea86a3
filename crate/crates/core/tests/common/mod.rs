//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use vcm::rd::{Overheads, TaskSpec};

/// Exhaustive search over every choice vector, in lexicographic order.
/// Returns `(choices, objective, rate)` of the best feasible selection:
/// highest objective, then lowest rate, then first in enumeration order.
pub fn brute_force_allocation(tasks: &[TaskSpec], budget: f64, overheads: Overheads) -> Option<(Vec<usize>, f64, f64)> {
    let sizes: Vec<usize> = tasks.iter().map(|t| t.curve.len()).collect();
    let mut idx = vec![0usize; tasks.len()];
    let mut best: Option<(Vec<usize>, f64, f64)> = None;
    loop {
        let mut rate = 0.0;
        let mut objective = 0.0;
        for (t, &j) in tasks.iter().zip(&idx) {
            let p = t.curve.points()[j];
            rate += p.rate_kbps;
            objective += t.weight * p.quality;
        }
        if rate + overheads.model + overheads.theta <= budget {
            let wins = match &best {
                None => true,
                Some((_, o, r)) => objective > *o || (objective == *o && rate < *r),
            };
            if wins {
                best = Some((idx.clone(), objective, rate));
            }
        }
        // odometer increment, last task fastest
        let mut k = tasks.len();
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Ground-truth BD-rate for curves given as analytic `ln(rate)` functions
/// of quality, by trapezoid integration on `samples` intervals.
pub fn trapezoid_bd_rate(
    ln_rate_ref: impl Fn(f64) -> f64,
    ln_rate_test: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    samples: usize,
) -> f64 {
    let h = (hi - lo) / samples as f64;
    let mut integral = 0.0;
    for i in 0..=samples {
        let q = lo + h * i as f64;
        let w = if i == 0 || i == samples { 0.5 } else { 1.0 };
        integral += w * (ln_rate_test(q) - ln_rate_ref(q));
    }
    let mean = integral * h / (hi - lo);
    100.0 * (mean.exp() - 1.0)
}

/// SSIM of two constant frames: only the luminance term survives.
pub fn constant_ssim(m1: f64, m2: f64) -> f64 {
    let c1 = (0.01f64 * 255.0).powi(2);
    (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    10.0 * (255.0f64 * 255.0 / mse).log10()
}
