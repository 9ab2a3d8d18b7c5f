use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::FrequencyVector;
use crate::oracles::residual;
use crate::potential::AnalyticPotential;
use crate::spectral::FourierSeries;

/// Real-space residual of the translate `X(theta + beta) + beta`.
pub fn translation_family_check(
    x: &FourierSeries,
    beta: &[f64],
    v: &AnalyticPotential,
    lambda: f64,
    omega: &FrequencyVector,
    grid_size: usize,
) -> Result<f64> {
    Ok(residual(v, lambda, omega, &x.translate(beta), grid_size)?.sup_residual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub beta: Vec<f64>,
    pub distance: f64,
}

/// Minimizes `||a - T_beta b||_1` over `beta in T^d`: a coarse grid search
/// followed by compass refinement.
pub fn align_translation(a: &FourierSeries, b: &FourierSeries) -> Alignment {
    let d = a.dim();
    let dist = |beta: &[f64]| a.l1_distance(&b.translate(beta));
    let coarse = 16usize;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut best = vec![0.0; d];
    let mut best_val = dist(&best);
    for flat in 0..coarse.pow(d as u32) {
        let mut rem = flat;
        let beta: Vec<f64> = (0..d)
            .map(|_| {
                let k = rem % coarse;
                rem /= coarse;
                two_pi * k as f64 / coarse as f64 - std::f64::consts::PI
            })
            .collect();
        let val = dist(&beta);
        if val < best_val {
            best_val = val;
            best = beta;
        }
    }
    let mut step = two_pi / coarse as f64;
    while step > 1e-15 {
        let mut moved = false;
        for axis in 0..d {
            for sign in [1.0, -1.0] {
                let mut trial = best.clone();
                trial[axis] += sign * step;
                let val = dist(&trial);
                if val < best_val {
                    best_val = val;
                    best = trial;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Alignment { beta: best, distance: best_val }
}
