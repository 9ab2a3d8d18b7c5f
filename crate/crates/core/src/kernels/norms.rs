//! Weighted sup/ell-1 norms of kernel levels on the shrinking sets `Lambda_t`.

use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffSchedule;
use crate::error::{Error, Result};
use crate::kernels::KernelHierarchy;
use crate::lattice::{euclid, lambda_indices, FrequencyVector};

/// Norm weights: decay rate `beta` and level weight `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub beta: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub t: f64,
    pub per_n_norm: Vec<f64>,
    pub composite: f64,
    pub beta_t: f64,
    pub rho: f64,
}

impl NormReport {
    /// `max_{n>1} n^2 rho^n e^{(3/2-n)t} |w_n|_t`.
    pub fn high_term(&self) -> f64 {
        high_term(&self.per_n_norm, self.rho, self.t)
    }
}

fn high_term(norms: &[f64], rho: f64, t: f64) -> f64 {
    norms
        .iter()
        .enumerate()
        .skip(2)
        .map(|(n, &w)| (n * n) as f64 * rho.powi(n as i32) * ((1.5 - n as f64) * t).exp() * w)
        .fold(0.0, f64::max)
}

/// `beta_t = (1 + 1/(1+t)) beta / 2`.
pub fn beta_t(beta: f64, t: f64) -> f64 {
    0.5 * (1.0 + 1.0 / (1.0 + t)) * beta
}

fn frob(t: &[crate::C64]) -> f64 {
    t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|w_n|_t`: sup over argument tuples in `Lambda_t^n` of
/// `sum_{q in Lambda_t} e^{beta_t |q - sum p|} |w_n(q,p)|`. For kappa-extended
/// hierarchies and `n >= 1` the pointwise modulus is the `C^2` kappa norm
/// `sup_{eta|kappa|<=1} sum_i eta^{-i} |d^i f / dkappa^i|`.
pub fn norm_t(
    h: &KernelHierarchy,
    n: usize,
    t: f64,
    beta: f64,
    schedule: &CutoffSchedule,
    omega: &FrequencyVector,
) -> Result<f64> {
    if n > h.n_max() {
        return Err(Error::MissingLevel { n, needed: n, n_max: h.n_max() });
    }
    let eta = schedule.eta(t);
    let bx = h.truncation_box();
    let lam = lambda_indices(omega, bx, eta);
    if lam.is_empty() {
        log::warn!("Lambda_t is empty at t = {t}");
        return Ok(0.0);
    }
    let mut in_lam = vec![false; bx.len()];
    for &i in &lam {
        in_lam[i] = true;
    }
    let bt = beta_t(beta, t);
    let l = h.layout().clone();
    let len = l.dpow(n + 1);
    let weight = |q: usize, args: &mut dyn Iterator<Item = usize>| {
        let mut r: Vec<i64> = bx.coords(q).to_vec();
        for a in args {
            for (ri, ai) in r.iter_mut().zip(bx.coords(a)) {
                *ri -= ai;
            }
        }
        (bt * euclid(&r)).exp()
    };
    let mut best: f64 = 0.0;
    match (&h.kappa, n) {
        (Some(fam), n) if n >= 1 => {
            let grid = fam.grid;
            let usable: Vec<usize> = (1..grid.len() - 1).filter(|&j| eta * grid.kappa(j).abs() <= 1.0).collect();
            let dk = grid.spacing;
            let inv = |i: i32| if eta == 0.0 { f64::INFINITY } else { eta.powi(-i) };
            for qp in lam.iter().copied() {
                for rank in 0..l.multisets(n - 1) {
                    let tup = l.tuple(n - 1, rank);
                    if !tup.iter().all(|&p| in_lam[p as usize]) {
                        continue;
                    }
                    let mut sum = 0.0;
                    for &q in &lam {
                        let off = l.ext_offset(n, q, qp, rank);
                        let mut sup: f64 = 0.0;
                        for &j in &usable {
                            let f0 = &fam.levels[j][n - 1][off..off + len];
                            let fm = &fam.levels[j - 1][n - 1][off..off + len];
                            let fp = &fam.levels[j + 1][n - 1][off..off + len];
                            let d1: Vec<_> = fp.iter().zip(fm).map(|(a, b)| (a - b) / (2.0 * dk)).collect();
                            let d2: Vec<_> = fp.iter().zip(fm).zip(f0).map(|((a, b), c)| (a + b - c * 2.0) / (dk * dk)).collect();
                            let mut v = frob(f0);
                            for (i, der) in [(1, frob(&d1)), (2, frob(&d2))] {
                                if der > 0.0 {
                                    v += inv(i) * der;
                                }
                            }
                            sup = sup.max(v);
                        }
                        let mut args = std::iter::once(qp).chain(tup.iter().map(|&p| p as usize));
                        sum += weight(q, &mut args) * sup;
                    }
                    best = best.max(sum);
                }
            }
        }
        _ => {
            for rank in 0..l.multisets(n) {
                let tup = l.tuple(n, rank);
                if !tup.iter().all(|&p| in_lam[p as usize]) {
                    continue;
                }
                let mut sum = 0.0;
                for &q in &lam {
                    let t = &h.plain[n][l.plain_offset(n, q, rank)..][..len];
                    let mut args = tup.iter().map(|&p| p as usize);
                    sum += weight(q, &mut args) * frob(t);
                }
                best = best.max(sum);
            }
        }
    }
    Ok(best)
}

/// Per-level norms and the composite
/// `e^{2t}|w_0|_t + eta^2 |w_1|_t + max_{n>1} n^2 rho^n e^{(3/2-n)t} |w_n|_t`.
pub fn norm_report(
    h: &KernelHierarchy,
    t: f64,
    params: NormParams,
    schedule: &CutoffSchedule,
    omega: &FrequencyVector,
) -> Result<NormReport> {
    let per_n_norm = (0..=h.n_max())
        .map(|n| norm_t(h, n, t, params.beta, schedule, omega))
        .collect::<Result<Vec<_>>>()?;
    let eta = schedule.eta(t);
    let mut composite = (2.0 * t).exp() * per_n_norm[0];
    if per_n_norm.len() > 1 && eta > 0.0 {
        composite += eta * eta * per_n_norm[1];
    }
    composite += high_term(&per_n_norm, params.rho, t);
    Ok(NormReport { t, per_n_norm, composite, beta_t: beta_t(params.beta, t), rho: params.rho })
}

/// Supremum of the composite norm over a run.
pub fn composite_norm(reports: &[NormReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("composite norm needs at least one report".into()));
    }
    Ok(reports.iter().map(|r| r.composite).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_t_interpolates() {
        assert_eq!(beta_t(0.4, 0.0), 0.4);
        assert!((beta_t(0.4, 1e9) - 0.2).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let b = beta_t(0.4, i as f64 * 0.3);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn composite_needs_reports() {
        assert!(composite_norm(&[]).is_err());
    }
}
