use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FrequencyVector, TruncationBox};
use crate::potential::AnalyticPotential;
use crate::spectral::{grid_size_for, FourierSeries, SpectralGrid};
use crate::C64;

/// Order-by-order coefficients `x = sum_k lambda^k x^(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindstedtExpansion {
    pub order: usize,
    /// `terms[k-1] = x^(k)`.
    pub terms: Vec<FourierSeries>,
    /// `|[lambda^k] u(0, x)|`, which must vanish order by order.
    pub zero_mode_forces: Vec<f64>,
}

impl LindstedtExpansion {
    /// `sum_{k <= order} lambda^k x^(k)`.
    pub fn partial_sum(&self, lambda: f64, order: usize) -> FourierSeries {
        let mut out = FourierSeries::zeros(&self.terms[0].basis);
        let mut pw = 1.0;
        for term in self.terms.iter().take(order) {
            pw *= lambda;
            for (o, c) in out.coeffs.iter_mut().zip(&term.coeffs) {
                *o += c * pw;
            }
        }
        out
    }

    /// Root-test estimate `|x^(k)|_1^{-1/k}` from the highest nonzero order.
    pub fn radius_estimate(&self) -> Option<f64> {
        self.terms
            .iter()
            .enumerate()
            .rev()
            .map(|(i, t)| (i + 1, t.l1_norm()))
            .find(|&(_, n)| n > 0.0)
            .filter(|&(k, _)| k >= 2)
            .map(|(k, n)| n.powf(-1.0 / k as f64))
    }

    /// Successive ratios `|x^(k+1)|_1 / |x^(k)|_1`.
    pub fn ratios(&self) -> Vec<f64> {
        self.terms.windows(2).map(|w| w[1].l1_norm() / w[0].l1_norm()).collect()
    }
}

/// Solves `(omega.q)^2 x^(k)(q) = [lambda^k] u(q, sum_j lambda^j x^(j))` for
/// `k = 1..=order` with exact power-series arithmetic on a grid.
pub fn lindstedt(v: &AnalyticPotential, omega: &FrequencyVector, bx: &TruncationBox, order: usize) -> Result<LindstedtExpansion> {
    if order == 0 {
        return Err(Error::InvalidArgument("Lindstedt order must be at least 1".into()));
    }
    if v.dim() != bx.dim() || omega.dim() != bx.dim() {
        return Err(Error::InvalidArgument("dimensions of potential, omega and box differ".into()));
    }
    let d = bx.dim();
    let grid = SpectralGrid::new(d, grid_size_for(bx.radius().max(order * v.max_frequency() as usize)));
    let pts = grid.points();
    let terms_v: Vec<(Vec<f64>, C64)> = v.terms().map(|(r, c)| (r.0.iter().map(|&x| x as f64).collect(), *c)).collect();
    let base: Vec<Vec<C64>> = terms_v
        .iter()
        .map(|(r, _)| {
            (0..pts)
                .map(|p| {
                    let th = grid.theta(p);
                    C64::from_polar(1.0, r.iter().zip(&th).map(|(a, b)| a * b).sum())
                })
                .collect()
        })
        .collect();
    let div2: Vec<f64> = (0..bx.len()).map(|i| omega.dot(bx.coords(i)).powi(2)).collect();
    // s[r][j-1][p] = i r.X^(j)(theta_p); e[r][m][p] = [lambda^m] exp(sum_j lambda^j s_j)
    let mut s: Vec<Vec<Vec<C64>>> = vec![Vec::new(); terms_v.len()];
    let mut e: Vec<Vec<Vec<C64>>> = vec![vec![vec![C64::new(1.0, 0.0); pts]]; terms_v.len()];
    let mut terms = Vec::with_capacity(order);
    let mut zero_mode_forces = Vec::with_capacity(order);
    for k in 1..=order {
        let m = k - 1;
        if m >= 1 {
            for (ri, _) in terms_v.iter().enumerate() {
                let mut em = vec![C64::new(0.0, 0.0); pts];
                for j in 1..=m {
                    let (sj, ej) = (&s[ri][j - 1], &e[ri][m - j]);
                    for p in 0..pts {
                        em[p] += sj[p] * ej[p] * j as f64;
                    }
                }
                for z in &mut em {
                    *z /= m as f64;
                }
                e[ri].push(em);
            }
        }
        let mut x = FourierSeries::zeros(bx);
        let mut zero = 0.0;
        for a in 0..d {
            let mut field = vec![C64::new(0.0, 0.0); pts];
            for (ri, (r, c)) in terms_v.iter().enumerate() {
                let coef = c * C64::new(0.0, r[a]);
                for p in 0..pts {
                    field[p] += coef * base[ri][p] * e[ri][m][p];
                }
            }
            let spec = grid.analyze(field);
            for i in 0..bx.len() {
                let u = spec[grid.bin(bx.coords(i))];
                if i == bx.zero_index() {
                    zero += u.norm_sqr();
                    continue;
                }
                if div2[i] == 0.0 {
                    return Err(Error::Resonance(bx.coords(i).to_vec()));
                }
                x.get_mut(i)[a] = u / div2[i];
            }
        }
        zero_mode_forces.push(zero.sqrt());
        let xv: Vec<Vec<C64>> = (0..d).map(|a| grid.synthesize(bx, |i| x.get(i)[a])).collect();
        for (ri, (r, _)) in terms_v.iter().enumerate() {
            let sk: Vec<C64> = (0..pts)
                .map(|p| C64::i() * (0..d).map(|a| xv[a][p] * r[a]).sum::<C64>())
                .collect();
            s[ri].push(sk);
        }
        terms.push(x);
    }
    Ok(LindstedtExpansion { order, terms, zero_mode_forces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Mode;

    #[test]
    fn first_order_for_single_cosine() {
        let v = AnalyticPotential::new(2, [(Mode(vec![1, 0]), C64::new(0.5, 0.0))]).unwrap();
        let bx = TruncationBox::new(2, 3).unwrap();
        let ex = lindstedt(&v, &FrequencyVector::golden(), &bx, 1).unwrap();
        let x1 = &ex.terms[0];
        let e1 = bx.index_of(&[1, 0]).unwrap();
        assert!((x1.get(e1)[0] - C64::new(0.0, 0.5)).norm() < 1e-15);
        for i in 0..bx.len() {
            if i != e1 && i != bx.neg_index(e1) {
                assert!(x1.get(i).iter().all(|z| z.norm() < 1e-16));
            }
        }
    }

    #[test]
    fn resonant_frequency_is_reported() {
        let v = AnalyticPotential::cosine_sum(2);
        let bx = TruncationBox::new(2, 2).unwrap();
        let w = FrequencyVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(lindstedt(&v, &w, &bx, 3), Err(Error::Resonance(_))));
    }
}
