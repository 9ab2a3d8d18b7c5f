//! Independent checks of a computed torus: Lindstedt series, a dense Newton
//! solver, direct residual evaluation and the translation family.

mod lindstedt;
mod newton;
mod translation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FrequencyVector, Mode};
use crate::potential::AnalyticPotential;
use crate::spectral::{check_dims, CompositionEngine, FourierSeries};
use crate::C64;
pub use lindstedt::{lindstedt, LindstedtExpansion};
pub use newton::{newton_solve, NewtonIterate, NewtonReport};
pub use translation::{align_translation, translation_family_check, Alignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual {
    pub q: Mode,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `sup_theta |(omega.d)^2 X + lambda grad v(theta + X)|` on the grid.
    pub sup_residual: f64,
    /// `|(omega.q)^2 x(q) - u(q,x)|` for every box mode.
    pub per_mode: Vec<ModeResidual>,
    /// Largest per-mode residual over nonzero modes.
    pub mode_residual_max: f64,
    pub worst_mode: Option<Mode>,
    /// `|u(0,x)|`.
    pub zero_mode: f64,
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Evaluates the real-space and per-mode residuals of `x` on an `N^d` grid.
pub fn residual(
    v: &AnalyticPotential,
    lambda: f64,
    omega: &FrequencyVector,
    x: &FourierSeries,
    grid_size: usize,
) -> Result<ResidualReport> {
    check_dims(x, v)?;
    if grid_size < 4 * x.basis.radius() {
        return Err(Error::InvalidArgument(format!("grid size {grid_size} below 4Q = {}", 4 * x.basis.radius())));
    }
    let engine = CompositionEngine::new(v, lambda, grid_size);
    let g = engine.grid();
    let d = x.dim();
    let bx = &x.basis;
    let xv = engine.values(x);
    let uv = engine.force_values(&xv);
    let div2: Vec<f64> = (0..bx.len()).map(|i| omega.dot(bx.coords(i)).powi(2)).collect();
    let lhs: Vec<Vec<C64>> = (0..d).map(|a| g.synthesize(bx, |i| x.get(i)[a] * div2[i])).collect();
    let mut sup: f64 = 0.0;
    for p in 0..g.points() {
        let r: f64 = (0..d).map(|a| (uv[a][p] - lhs[a][p]).norm_sqr()).sum::<f64>().sqrt();
        sup = sup.max(r);
    }
    let spectra: Vec<Vec<C64>> = uv.into_iter().map(|u| g.analyze(u)).collect();
    let mut per_mode = Vec::with_capacity(bx.len());
    let mut worst: Option<(f64, usize)> = None;
    let mut zero_mode = 0.0;
    for i in 0..bx.len() {
        let b = g.bin(bx.coords(i));
        let u: Vec<C64> = spectra.iter().map(|s| s[b]).collect();
        let r: Vec<C64> = x.get(i).iter().zip(&u).map(|(xi, ui)| xi * div2[i] - ui).collect();
        let val = vnorm(&r);
        if i == bx.zero_index() {
            zero_mode = vnorm(&u);
        } else if worst.is_none_or(|(w, _)| val > w) {
            worst = Some((val, i));
        }
        per_mode.push(ModeResidual { q: bx.mode(i), value: val });
    }
    Ok(ResidualReport {
        sup_residual: sup,
        per_mode,
        mode_residual_max: worst.map_or(0.0, |w| w.0),
        worst_mode: worst.map(|w| bx.mode(w.1)),
        zero_mode,
    })
}

/// Verification summary written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lindstedt_radius_estimate: Option<f64>,
    pub newton_converged: bool,
    pub sup_residual: f64,
    pub mode_residual_max: f64,
    pub zero_mode: f64,
    pub translation_distance: Option<f64>,
    pub worst_mode: Option<Mode>,
    pub passed: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TruncationBox;

    #[test]
    fn zero_torus_without_coupling_has_no_residual() {
        let v = AnalyticPotential::cosine_sum(2);
        let bx = TruncationBox::new(2, 2).unwrap();
        let r = residual(&v, 0.0, &FrequencyVector::golden(), &FourierSeries::zeros(&bx), 16).unwrap();
        assert_eq!(r.sup_residual, 0.0);
        assert_eq!(r.mode_residual_max, 0.0);
        assert_eq!(r.zero_mode, 0.0);
    }
}
