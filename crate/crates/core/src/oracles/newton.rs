use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FrequencyVector, TruncationBox};
use crate::oracles::lindstedt;
use crate::potential::AnalyticPotential;
use crate::spectral::{lu_solve, CompositionEngine, FourierSeries};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonIterate {
    /// `||F(x_k)||_1` before the update.
    pub residual: f64,
    /// `||x_{k+1} - x_k||_1`.
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub x: FourierSeries,
    pub log: Vec<NewtonIterate>,
    pub converged: bool,
    pub final_residual: f64,
}

const TOL: f64 = 1e-13;
const MAX_ITER: usize = 25;

fn l1(v: &[C64], d: usize) -> f64 {
    v.chunks(d).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).sum()
}

/// Newton's method on `F(x) = x - Gamma u(x)`, `Gamma = diag (omega.q)^{-2}`,
/// with the `q = 0` row pinning `x(0) = 0`. The default start is the
/// second-order Lindstedt sum.
pub fn newton_solve(
    v: &AnalyticPotential,
    lambda: f64,
    omega: &FrequencyVector,
    bx: &TruncationBox,
    x0: Option<&FourierSeries>,
) -> Result<NewtonReport> {
    let d = bx.dim();
    let zero = bx.zero_index();
    let mut gamma = vec![0.0; bx.len()];
    for (i, g) in gamma.iter_mut().enumerate() {
        if i == zero {
            continue;
        }
        let w = omega.dot(bx.coords(i));
        if w == 0.0 {
            return Err(Error::Resonance(bx.coords(i).to_vec()));
        }
        *g = 1.0 / (w * w);
    }
    let mut x = match x0 {
        Some(x) => x.resample(bx),
        None if lambda == 0.0 => FourierSeries::zeros(bx),
        None => lindstedt(v, omega, bx, 2)?.partial_sum(lambda, 2),
    };
    let engine = CompositionEngine::for_box(v, lambda, bx);
    let n = x.coeffs.len();
    let mut log = Vec::new();
    let mut increases = 0;
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let (u, du) = engine.force_and_jacobian(&x);
        let f: Vec<C64> = (0..n).map(|i| if i / d == zero { x.coeffs[i] } else { x.coeffs[i] - u.coeffs[i] * gamma[i / d] }).collect();
        let res = l1(&f, d);
        if res > prev {
            increases += 1;
            if increases >= 2 {
                return Err(Error::NewtonDiverged { iterations: log.len(), residual: res });
            }
        } else {
            increases = 0;
        }
        prev = res;
        if res < TOL {
            log.push(NewtonIterate { residual: res, step: 0.0 });
            return Ok(NewtonReport { x, log, converged: true, final_residual: res });
        }
        let jac = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            id - du[(i, j)] * gamma[i / d]
        });
        let (delta, _) = lu_solve(&jac, &f);
        for (xi, di) in x.coeffs.iter_mut().zip(&delta) {
            *xi -= di;
        }
        log.push(NewtonIterate { residual: res, step: l1(&delta, d) });
    }
    Ok(NewtonReport { x, log, converged: false, final_residual: prev })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_converges_immediately() {
        let v = AnalyticPotential::cosine_sum(2);
        let bx = TruncationBox::new(2, 2).unwrap();
        let r = newton_solve(&v, 0.0, &FrequencyVector::golden(), &bx, None).unwrap();
        assert!(r.converged);
        assert_eq!(r.x.max_abs(), 0.0);
        assert!(r.log.len() <= 1);
    }
}
