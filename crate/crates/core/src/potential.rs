//! Real-analytic potentials given by finitely many Fourier modes, and the
//! initial kernels `u_n(q,p) = lambda v(r)/n! (i r)^{(n+1)}`, `r = q - sum p`.
//!
//! Fourier convention: `V(theta) = sum_r v(r) e^{i r.theta}` with the
//! normalized transform, so `cos theta_1` has `v(+-e_1) = 1/2`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelHierarchy;
use crate::lattice::{Mode, TruncationBox};
use crate::C64;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModeRecord {
    r: Vec<i64>,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PotentialDoc {
    d: usize,
    modes: Vec<ModeRecord>,
}

/// Decay constants fitted from the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Analyticity width proxy: `|v(r)| <= c e^{-2 b |r|}`.
    pub width_b: f64,
    pub c: f64,
    /// Growth rate of the initial kernels: `|u_n| <= C |lambda| R^n e^{-b|r|}`.
    pub radius_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPotential {
    d: usize,
    coeffs: BTreeMap<Mode, C64>,
}

impl AnalyticPotential {
    /// Builds a potential, completing missing reality partners `v(-r) = conj v(r)`.
    pub fn new(d: usize, modes: impl IntoIterator<Item = (Mode, C64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut coeffs: BTreeMap<Mode, C64> = BTreeMap::new();
        for (r, v) in modes {
            if r.dim() != d {
                return Err(Error::InvalidArgument(format!("mode {:?} has wrong dimension", r.0)));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidArgument(format!("coefficient at {:?} is not finite", r.0)));
            }
            if coeffs.insert(r.clone(), v).is_some() {
                return Err(Error::InvalidArgument(format!("mode {:?} listed twice", r.0)));
            }
        }
        let l1: f64 = coeffs.values().map(|v| v.norm()).sum();
        let keys: Vec<Mode> = coeffs.keys().cloned().collect();
        for r in keys {
            let v = coeffs[&r];
            let nr = r.neg();
            match coeffs.get(&nr) {
                Some(w) => {
                    if (w - v.conj()).norm() > 1e-12 * l1.max(f64::MIN_POSITIVE) {
                        return Err(Error::Reality(format!("v({:?}) is not the conjugate of v({:?})", nr.0, r.0)));
                    }
                }
                None => {
                    coeffs.insert(nr, v.conj());
                }
            }
        }
        Ok(AnalyticPotential { d, coeffs })
    }

    /// `sum_i cos theta_i`.
    pub fn cosine_sum(d: usize) -> Self {
        let modes = (0..d).map(|i| (Mode::unit(d, i), C64::new(0.5, 0.0)));
        Self::new(d, modes).expect("cosine sum is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: PotentialDoc = serde_json::from_str(s)?;
        Self::new(doc.d, doc.modes.into_iter().map(|m| (Mode(m.r), C64::new(m.re, m.im))))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let doc = PotentialDoc {
            d: self.d,
            modes: self.coeffs.iter().map(|(r, v)| ModeRecord { r: r.0.clone(), re: v.re, im: v.im }).collect(),
        };
        serde_json::to_value(doc).expect("potential serializes")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coefficient(&self, r: &[i64]) -> C64 {
        self.coeffs.get(&Mode(r.to_vec())).copied().unwrap_or_default()
    }

    /// Nonzero-frequency support with coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (&Mode, &C64)> {
        self.coeffs.iter().filter(|(r, v)| !r.is_zero() && v.norm() > 0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|v| v.norm()).sum()
    }

    /// Largest sup-norm of a supported frequency.
    pub fn max_frequency(&self) -> i64 {
        self.terms().map(|(r, _)| r.sup_norm()).max().unwrap_or(0)
    }

    /// Fits `b` from `sum |v(r)| e^{2b|r|} = 2 sum |v(r)|`, then `c` and `R`.
    pub fn fit_decay(&self) -> DecayFit {
        let terms: Vec<(f64, f64)> = self.terms().map(|(r, v)| (r.norm(), v.norm())).collect();
        if terms.is_empty() {
            return DecayFit { width_b: 1.0, c: 0.0, radius_r: 1.0 };
        }
        let total: f64 = terms.iter().map(|t| t.1).sum();
        let f = |b: f64| terms.iter().map(|&(r, a)| a * (2.0 * b * r).exp()).sum::<f64>() - 2.0 * total;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        let c = terms.iter().map(|&(r, a)| a * (2.0 * b * r).exp()).fold(0.0, f64::max);
        let k = |n: i32| {
            let fact: f64 = (1..=n).map(|i| i as f64).product();
            terms.iter().map(|&(r, a)| a * r.powi(n + 1) * (b * r).exp()).fold(0.0, f64::max) / fact
        };
        let k0 = k(0);
        let radius_r = (1..=8).map(|n| (k(n) / k0).powf(1.0 / n as f64)).fold(0.0, f64::max);
        DecayFit { width_b: b, c, radius_r }
    }

    /// `V(theta)`.
    pub fn eval_v(&self, theta: &[f64]) -> Result<f64> {
        let mut s = C64::new(0.0, 0.0);
        for (r, v) in &self.coeffs {
            let ph: f64 = r.0.iter().zip(theta).map(|(&a, &b)| a as f64 * b).sum();
            s += v * C64::from_polar(1.0, ph);
        }
        self.check_real(s.im)?;
        Ok(s.re)
    }

    fn check_real(&self, im: f64) -> Result<()> {
        if im.abs() > 1e-12 * self.l1_norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Reality(format!("imaginary residue {im:e}")));
        }
        Ok(())
    }

    /// `grad V(theta) = sum_r i r v(r) e^{i r.theta}` at each point.
    pub fn eval_grad_v(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points
            .iter()
            .map(|theta| {
                if theta.len() != self.d {
                    return Err(Error::InvalidArgument("grid point has wrong dimension".into()));
                }
                let mut g = vec![C64::new(0.0, 0.0); self.d];
                for (r, v) in self.terms() {
                    let ph: f64 = r.0.iter().zip(theta).map(|(&a, &b)| a as f64 * b).sum();
                    let e = v * C64::from_polar(1.0, ph) * C64::i();
                    for (gi, &ri) in g.iter_mut().zip(&r.0) {
                        *gi += e * ri as f64;
                    }
                }
                g.iter().map(|z| self.check_real(z.im).map(|_| z.re)).collect()
            })
            .collect()
    }
}

/// Initial kernels `u_0..u_{n_max}` on `bx`. Every multiset of arguments in the
/// box is populated; `r = q - sum p` ranges over all of `supp v`.
pub fn build_initial_kernels(v: &AnalyticPotential, lambda: f64, n_max: usize, bx: &TruncationBox) -> Result<KernelHierarchy> {
    if v.dim() != bx.dim() {
        return Err(Error::InvalidArgument("potential and box dimensions differ".into()));
    }
    let mut h = KernelHierarchy::zeros(bx, n_max);
    fill_initial(&mut h, v, lambda);
    Ok(h)
}

pub(crate) fn fill_initial(h: &mut KernelHierarchy, v: &AnalyticPotential, lambda: f64) {
    let l = h.layout().clone();
    let bx = l.truncation_box().clone();
    let d = bx.dim();
    let mut r = vec![0i64; d];
    let mut digits = Vec::new();
    for n in 0..=l.n_max() {
        let fact: f64 = (1..=n).map(|i| i as f64).product();
        let len = l.dpow(n + 1);
        let phase = C64::i().powu(n as u32 + 1);
        for q in 0..l.modes() {
            for rank in 0..l.multisets(n) {
                r.copy_from_slice(bx.coords(q));
                for &p in l.tuple(n, rank) {
                    for (ri, pi) in r.iter_mut().zip(bx.coords(p as usize)) {
                        *ri -= pi;
                    }
                }
                if r.iter().all(|&c| c == 0) {
                    continue;
                }
                let c = v.coefficient(&r);
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let pre = c * phase * (lambda / fact);
                let out = &mut h.plain[n][l.plain_offset(n, q, rank)..][..len];
                digits.resize(n + 1, 0);
                for (o, val) in out.iter_mut().enumerate() {
                    let mut rem = o;
                    let mut prod = 1.0;
                    for _ in 0..=n {
                        prod *= r[rem % d] as f64;
                        rem /= d;
                    }
                    *val = pre * prod;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reality_partners_are_completed() {
        let v = AnalyticPotential::new(2, [(Mode(vec![1, 0]), C64::new(0.5, 0.25))]).unwrap();
        assert_eq!(v.coefficient(&[-1, 0]), C64::new(0.5, -0.25));
        let bad = AnalyticPotential::new(
            2,
            [(Mode(vec![1, 0]), C64::new(0.5, 0.0)), (Mode(vec![-1, 0]), C64::new(0.4, 0.0))],
        );
        assert!(matches!(bad, Err(Error::Reality(_))));
    }

    #[test]
    fn gradient_of_cosines() {
        let v = AnalyticPotential::new(2, [(Mode(vec![1, 0]), C64::new(0.5, 0.0))]).unwrap();
        let g = v.eval_grad_v(&[vec![std::f64::consts::FRAC_PI_2, 0.0]]).unwrap();
        assert_relative_eq!(g[0][0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(g[0][1], 0.0, epsilon = 1e-15);
        let v = AnalyticPotential::cosine_sum(2);
        let g = v.eval_grad_v(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(g[0], vec![0.0, 0.0]);
    }

    #[test]
    fn decay_fit_for_cosines() {
        let fit = AnalyticPotential::cosine_sum(2).fit_decay();
        assert_relative_eq!(fit.width_b, std::f64::consts::LN_2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn first_kernel_matches_direct_substitution() {
        let v = AnalyticPotential::new(2, [(Mode(vec![1, 0]), C64::new(0.5, 0.0))]).unwrap();
        let bx = TruncationBox::new(2, 1).unwrap();
        let h = build_initial_kernels(&v, 0.1, 1, &bx).unwrap();
        let e1 = bx.index_of(&[1, 0]).unwrap();
        let u = h.plain_tensor(0, e1, &[]).unwrap();
        assert_relative_eq!(u[0].im, 0.05, epsilon = 1e-17);
        assert_eq!(u[0].re, 0.0);
        assert_eq!(u[1], C64::new(0.0, 0.0));
        assert_eq!(h.w0_at_zero(), 0.0);
        for q in 0..bx.len() {
            assert!(h.plain_tensor(1, q, &[q]).unwrap().iter().all(|z| *z == C64::new(0.0, 0.0)));
        }
    }
}
