//! The conjugacy hierarchy `f`, torus extraction `x = f_0(t_end)`, and the
//! direct continuation solver for the cutoff fixed point `x = gamma_t u(x)`.

use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::cutoff::{min_divisor, CutoffSchedule};
use crate::error::{Error, Result};
use crate::flow::rhs::{product_plain, ModeWeights};
use crate::kernels::{KernelHierarchy, Layout};
use crate::lattice::{FrequencyVector, TruncationBox};
use crate::oracles::ResidualReport;
use crate::potential::AnalyticPotential;
use crate::spectral::{lu_solve, CompositionEngine, FourierSeries};
use crate::C64;

/// Taylor coefficients `f_n` of the flowing solution map.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyHierarchy {
    pub f: KernelHierarchy,
    pub a_param: f64,
}

impl ConjugacyHierarchy {
    /// `f_n = a delta_{n1} delta_{qp} I` (identity on `C^d`).
    pub fn initial(layout: Arc<Layout>, a_param: f64) -> Self {
        let mut f = KernelHierarchy::with_layout(layout.clone());
        if layout.n_max() >= 1 && a_param != 0.0 {
            let d = layout.dim();
            for q in 0..layout.modes() {
                let off = layout.plain_offset(1, q, q);
                for a in 0..d {
                    f.plain[1][off + a * d + a] = C64::new(a_param, 0.0);
                }
            }
        }
        ConjugacyHierarchy { f, a_param }
    }

    pub fn n_max(&self) -> usize {
        self.f.n_max()
    }

    /// `f_0(q)` as a Fourier series.
    pub fn f0(&self) -> FourierSeries {
        FourierSeries { basis: self.f.truncation_box().clone(), coeffs: self.f.plain[0].clone() }
    }
}

/// `df_n/dt = sum_k k/C(n,k-1) sum_S sum_{q'} gamma_dot_t(omega.q') f_k(q; q', p_S) . w_{n+1-k}(q'; p_{S^c})`.
pub fn f_rhs(
    f: &ConjugacyHierarchy,
    w: &KernelHierarchy,
    t: f64,
    schedule: &CutoffSchedule,
    omega: &FrequencyVector,
) -> Result<KernelHierarchy> {
    if f.f.truncation_box() != w.truncation_box() || f.n_max() != w.n_max() {
        return Err(Error::InvalidArgument("conjugacy and kernel hierarchies differ in shape".into()));
    }
    let weights = ModeWeights::at_time(t, schedule, &w.divisors(omega), None);
    let mut out = KernelHierarchy::with_layout(f.f.layout().clone());
    product_plain(f.f.layout(), &f.f.plain, &w.plain, &weights.plain, &mut out.plain);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSolution {
    pub x: FourierSeries,
    pub t_end: f64,
    pub lambda: f64,
    pub omega: Vec<f64>,
    /// `sup ||f_0(t_end) - f_0(s)||_1` over the last quarter of the run.
    pub tail_certificate: Option<f64>,
    pub residual_report: Option<ResidualReport>,
}

/// Reads `x = f_0(t_end)` and certifies convergence from the `f_0` history.
///
/// `zero_tol` bounds `|x(0)|` relative to the largest coefficient.
pub fn extract_torus(
    f: &ConjugacyHierarchy,
    history: &[(f64, Vec<C64>)],
    lambda: f64,
    omega: &FrequencyVector,
    zero_tol: f64,
) -> Result<TorusSolution> {
    let x = f.f0();
    let d = x.dim();
    let scale = x.max_abs();
    let z = x.get(x.basis.zero_index()).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if z > zero_tol * scale && z > 0.0 {
        return Err(Error::ZeroModeDrift(z));
    }
    let real = x.reality_residual();
    if real > 1e-12 * scale.max(f64::MIN_POSITIVE) && real > 0.0 {
        return Err(Error::InvariantDrift { t: f64::NAN, what: "torus reality".into(), value: real, limit: 1e-12 * scale });
    }
    let t_end = history.last().map_or(0.0, |h| h.0);
    let tail = if history.len() >= 2 {
        let t0 = history[0].0;
        let cut = t_end - 0.25 * (t_end - t0);
        let last = &history.last().expect("nonempty").1;
        let dist = |v: &[C64]| -> f64 {
            v.chunks(d)
                .zip(last.chunks(d))
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt())
                .sum()
        };
        Some(history.iter().filter(|h| h.0 >= cut).map(|h| dist(&h.1)).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(TorusSolution {
        x,
        t_end,
        lambda,
        omega: omega.components().to_vec(),
        tail_certificate: tail,
        residual_report: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    /// Step in `t` between corrector solves.
    pub h: f64,
    /// Corrector stops when `||x - Gamma u(x)||_1` falls below this (absolute).
    pub tol: f64,
    pub max_newton: usize,
    /// Largest accepted relative residual of a linear solve.
    pub solve_tol: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions { h: 0.1, tol: 1e-15, max_newton: 30, solve_tol: 1e-10 }
    }
}

/// Spectral radius of `Gamma Du` by power iteration.
fn spectral_radius(gamma: &[f64], du: &Mat<C64>, d: usize) -> f64 {
    let n = du.nrows();
    let mut v: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05)).collect();
    let mut est = 0.0;
    for _ in 0..40 {
        let mut w = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let g = gamma[i / d];
            if g == 0.0 {
                continue;
            }
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                s += du[(i, j)] * v[j];
            }
            w[i] = s * g;
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let prev = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        est = norm / prev;
        v = w.into_iter().map(|z| z / norm).collect();
    }
    est
}

/// Newton corrector for `x = Gamma u(x)`; returns the final residual.
fn correct(
    x: &mut FourierSeries,
    gamma: &[f64],
    engine: &CompositionEngine,
    opts: &ContinuationOptions,
    check_contraction: bool,
) -> Result<f64> {
    let d = x.dim();
    let n = x.coeffs.len();
    let mut res = f64::INFINITY;
    for it in 0..=opts.max_newton {
        let (u, du) = engine.force_and_jacobian(x);
        if it == 0 && check_contraction {
            let rho = spectral_radius(gamma, &du, d);
            if rho >= 1.0 {
                return Err(Error::NotContracting(rho));
            }
        }
        let g: Vec<C64> = (0..n).map(|i| x.coeffs[i] - u.coeffs[i] * gamma[i / d]).collect();
        let prev = res;
        res = g.chunks(d).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).sum();
        // stop at tolerance, or once roundoff stalls the quadratic decrease
        if res <= opts.tol || it == opts.max_newton || (it >= 3 && res > 0.5 * prev) {
            break;
        }
        let jac = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            id - du[(i, j)] * gamma[i / d]
        });
        let (delta, rel) = lu_solve(&jac, &g);
        if rel > opts.solve_tol {
            return Err(Error::LinearSolve(rel));
        }
        for (xi, di) in x.coeffs.iter_mut().zip(&delta) {
            *xi -= di;
        }
    }
    // enforce exact reality by symmetrizing roundoff
    let bx = x.basis.clone();
    for i in 0..bx.len() {
        let j = bx.neg_index(i);
        if j < i {
            continue;
        }
        for a in 0..d {
            let p = x.get(i)[a];
            let q = x.get(j)[a];
            let avg = (p + q.conj()) * 0.5;
            x.get_mut(i)[a] = avg;
            x.get_mut(j)[a] = avg.conj();
        }
    }
    Ok(res)
}

/// Follows `x(t) = gamma_t u(x(t))` from `x(0) = 0` to the frozen limit.
///
/// Each step predicts along the tangent `(I - gamma Du)^{-1} gamma_dot u` and
/// corrects with Newton's method on the cutoff fixed point.
pub fn continuation_solve(
    v: &AnalyticPotential,
    lambda: f64,
    omega: &FrequencyVector,
    bx: &TruncationBox,
    schedule: &CutoffSchedule,
    opts: &ContinuationOptions,
) -> Result<TorusSolution> {
    schedule.validate()?;
    let min = min_divisor(omega, bx)?;
    let engine = CompositionEngine::for_box(v, lambda, bx);
    let d = bx.dim();
    let div: Vec<f64> = (0..bx.len()).map(|i| omega.dot(bx.coords(i))).collect();
    let max = div.iter().fold(0.0, |m: f64, w| m.max(w.abs()));
    let t_start = schedule.eta_inverse(1.0 / max);
    let t_freeze = schedule.eta_inverse(2.0 / min);
    let t_end = schedule.resolve_end(omega, bx, opts.h)?;
    let mut x = FourierSeries::zeros(bx);
    if lambda == 0.0 {
        return Ok(TorusSolution { x, t_end, lambda, omega: omega.components().to_vec(), tail_certificate: Some(0.0), residual_report: None });
    }
    let gammas = |t: f64| -> Vec<f64> { div.iter().map(|&w| schedule.gamma(t, w)).collect() };
    let mut nodes = Vec::new();
    let mut t = t_start;
    while t < t_freeze.min(t_end) {
        t += opts.h;
        nodes.push(t.min(t_freeze).min(t_end));
    }
    nodes.push(t_end);
    nodes.dedup();
    let mut t_prev = t_start;
    for &tn in &nodes {
        // tangent predictor
        let g_prev = gammas(t_prev);
        if g_prev.iter().any(|&g| g != 0.0) || t_prev > t_start {
            let (u, du) = engine.force_and_jacobian(&x);
            let n = x.coeffs.len();
            let gd: Vec<f64> = div.iter().map(|&w| schedule.gamma_dot(t_prev, w)).collect();
            let jac = Mat::from_fn(n, n, |i, j| {
                let id = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                id - du[(i, j)] * g_prev[i / d]
            });
            let rhs: Vec<C64> = (0..n).map(|i| u.coeffs[i] * gd[i / d]).collect();
            let (xdot, rel) = lu_solve(&jac, &rhs);
            if rel > opts.solve_tol {
                return Err(Error::LinearSolve(rel));
            }
            for (xi, di) in x.coeffs.iter_mut().zip(&xdot) {
                *xi += di * (tn - t_prev);
            }
        }
        correct(&mut x, &gammas(tn), &engine, opts, true)?;
        t_prev = tn;
    }
    Ok(TorusSolution { x, t_end, lambda, omega: omega.components().to_vec(), tail_certificate: None, residual_report: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_conjugacy_is_identity_at_level_one() {
        let bx = TruncationBox::new(2, 1).unwrap();
        let layout = Arc::new(Layout::new(bx.clone(), 2));
        let c = ConjugacyHierarchy::initial(layout, 1.0);
        let t = c.f.plain_tensor(1, 3, &[3]).unwrap();
        assert_eq!(t, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(c.f.plain_tensor(1, 3, &[4]).unwrap().iter().all(|z| z.norm() == 0.0));
        assert!(c.f.level(0).iter().all(|z| z.norm() == 0.0));
    }
}
