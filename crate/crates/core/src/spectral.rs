//! Truncated Fourier series with values in `C^d` and the pseudo-spectral
//! composition engine `x -> u(x) = FT[lambda grad v(theta + X(theta))]`.

use std::sync::Arc;

use faer::Mat;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Mode, TruncationBox};
use crate::potential::AnalyticPotential;
use crate::C64;

/// `x(q) in C^d` for every mode of a box, stored `[q * d + alpha]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub basis: TruncationBox,
    pub coeffs: Vec<C64>,
}

impl FourierSeries {
    pub fn zeros(basis: &TruncationBox) -> Self {
        FourierSeries { coeffs: vec![C64::new(0.0, 0.0); basis.len() * basis.dim()], basis: basis.clone() }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn get(&self, idx: usize) -> &[C64] {
        let d = self.dim();
        &self.coeffs[idx * d..(idx + 1) * d]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut [C64] {
        let d = self.dim();
        &mut self.coeffs[idx * d..(idx + 1) * d]
    }

    /// Coefficient at `q`, zero outside the box.
    pub fn at(&self, q: &[i64]) -> Vec<C64> {
        self.basis.index_of(q).map_or_else(|| vec![C64::new(0.0, 0.0); self.dim()], |i| self.get(i).to_vec())
    }

    /// Copies the overlapping modes into a series on `target`.
    pub fn resample(&self, target: &TruncationBox) -> FourierSeries {
        let mut out = FourierSeries::zeros(target);
        for i in 0..target.len() {
            if let Some(j) = self.basis.index_of(target.coords(i)) {
                out.get_mut(i).copy_from_slice(self.get(j));
            }
        }
        out
    }

    /// `max |x(-q) - conj x(q)|`.
    pub fn reality_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.basis.len() {
            let j = self.basis.neg_index(i);
            for (a, b) in self.get(i).iter().zip(self.get(j)) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    /// Sum over modes of the Euclidean norm of `x(q)`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.chunks(self.dim()).map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `sum_q |x(q) - y(q)|` over the union of both boxes.
    pub fn l1_distance(&self, other: &FourierSeries) -> f64 {
        let big = if self.basis.radius() >= other.basis.radius() { &self.basis } else { &other.basis };
        (0..big.len())
            .map(|i| {
                let q = big.coords(i);
                let a = self.at(q);
                let b = other.at(q);
                a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
            })
            .sum()
    }

    /// `x_beta(q) = e^{i q.beta} x(q) + beta delta_{q0}`, the coefficients of `X(theta+beta) + beta`.
    pub fn translate(&self, beta: &[f64]) -> FourierSeries {
        let mut out = self.clone();
        for i in 0..self.basis.len() {
            let ph: f64 = self.basis.coords(i).iter().zip(beta).map(|(&q, &b)| q as f64 * b).sum();
            let e = C64::from_polar(1.0, ph);
            for z in out.get_mut(i) {
                *z *= e;
            }
        }
        let z = self.basis.zero_index();
        for (c, &b) in out.get_mut(z).iter_mut().zip(beta) {
            *c += b;
        }
        out
    }

    /// `X(theta)` at one point.
    pub fn eval(&self, theta: &[f64]) -> Vec<C64> {
        let d = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); d];
        for i in 0..self.basis.len() {
            let ph: f64 = self.basis.coords(i).iter().zip(theta).map(|(&q, &t)| q as f64 * t).sum();
            let e = C64::from_polar(1.0, ph);
            for (o, c) in out.iter_mut().zip(self.get(i)) {
                *o += c * e;
            }
        }
        out
    }

    pub fn modes(&self) -> impl Iterator<Item = (Mode, &[C64])> + '_ {
        (0..self.basis.len()).map(|i| (self.basis.mode(i), self.get(i)))
    }
}

/// Smallest power of two `>= 4Q + 1` (at least 8).
pub fn grid_size_for(radius: usize) -> usize {
    (4 * radius + 1).next_power_of_two().max(8)
}

/// Uniform grid `theta_j = 2 pi j / N` on `T^d` with FFTs along every axis.
pub struct SpectralGrid {
    d: usize,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("d", &self.d).field("n", &self.n).finish()
    }
}

impl SpectralGrid {
    pub fn new(d: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        SpectralGrid { d, n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn theta(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        let mut rem = p;
        for a in (0..self.d).rev() {
            out[a] = 2.0 * std::f64::consts::PI * (rem % self.n) as f64 / self.n as f64;
            rem /= self.n;
        }
        out
    }

    /// Grid point index of the frequency `q` (taken mod `N`).
    pub fn bin(&self, q: &[i64]) -> usize {
        let n = self.n as i64;
        q.iter().fold(0, |acc, &c| acc * self.n + c.rem_euclid(n) as usize)
    }

    fn transform(&self, data: &mut [C64], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let n = self.n;
        let mut line = vec![C64::new(0.0, 0.0); n];
        for axis in 0..self.d {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let outer = self.points() / (n * stride);
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for k in 0..n {
                        line[k] = data[base + k * stride];
                    }
                    plan.process(&mut line);
                    for k in 0..n {
                        data[base + k * stride] = line[k];
                    }
                }
            }
        }
    }

    /// Grid values `sum_q c(q) e^{i q.theta_j}` of one component.
    pub fn synthesize(&self, bx: &TruncationBox, coeff: impl Fn(usize) -> C64) -> Vec<C64> {
        let mut data = vec![C64::new(0.0, 0.0); self.points()];
        for i in 0..bx.len() {
            data[self.bin(bx.coords(i))] += coeff(i);
        }
        self.transform(&mut data, false);
        data
    }

    /// Normalized Fourier coefficients of grid values (all bins).
    pub fn analyze(&self, mut values: Vec<C64>) -> Vec<C64> {
        self.transform(&mut values, true);
        let s = 1.0 / self.points() as f64;
        for v in &mut values {
            *v *= s;
        }
        values
    }
}

/// Evaluates `u(x)` and its Jacobian pseudo-spectrally.
#[derive(Debug)]
pub struct CompositionEngine {
    grid: SpectralGrid,
    lambda: f64,
    terms: Vec<(Vec<f64>, C64)>,
    d: usize,
}

impl CompositionEngine {
    pub fn new(v: &AnalyticPotential, lambda: f64, grid_n: usize) -> Self {
        let terms = v.terms().map(|(r, c)| (r.0.iter().map(|&x| x as f64).collect(), *c)).collect();
        CompositionEngine { grid: SpectralGrid::new(v.dim(), grid_n), lambda, terms, d: v.dim() }
    }

    /// Engine sized for series on `bx`.
    pub fn for_box(v: &AnalyticPotential, lambda: f64, bx: &TruncationBox) -> Self {
        Self::new(v, lambda, grid_size_for(bx.radius().max(v.max_frequency() as usize)))
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `X(theta_j)` per component.
    pub fn values(&self, x: &FourierSeries) -> Vec<Vec<C64>> {
        (0..self.d).map(|a| self.grid.synthesize(&x.basis, |i| x.get(i)[a])).collect()
    }

    /// `e^{i r.(theta_j + X(theta_j))}` for each potential term.
    fn phases(&self, xv: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let pts = self.grid.points();
        self.terms
            .iter()
            .map(|(r, _)| {
                (0..pts)
                    .map(|p| {
                        let th = self.grid.theta(p);
                        let mut arg = C64::new(0.0, 0.0);
                        for a in 0..self.d {
                            arg += (xv[a][p] + th[a]) * r[a];
                        }
                        (arg * C64::i()).exp()
                    })
                    .collect()
            })
            .collect()
    }

    /// `U(theta_j) = lambda grad v(theta_j + X(theta_j))` per component.
    pub fn force_values(&self, xv: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let ph = self.phases(xv);
        let pts = self.grid.points();
        (0..self.d)
            .map(|a| {
                (0..pts)
                    .map(|p| {
                        self.terms.iter().zip(&ph).fold(C64::new(0.0, 0.0), |acc, ((r, c), e)| {
                            acc + c * e[p] * C64::new(0.0, r[a]) * self.lambda
                        })
                    })
                    .collect()
            })
            .collect()
    }

    fn restrict(&self, spectra: &[Vec<C64>], bx: &TruncationBox) -> FourierSeries {
        let mut out = FourierSeries::zeros(bx);
        for i in 0..bx.len() {
            let b = self.grid.bin(bx.coords(i));
            for (a, s) in spectra.iter().enumerate() {
                out.get_mut(i)[a] = s[b];
            }
        }
        out
    }

    /// `u(q, x)` for every mode of `bx`.
    pub fn force_on(&self, x: &FourierSeries, bx: &TruncationBox) -> FourierSeries {
        let uv = self.force_values(&self.values(x));
        let spectra: Vec<Vec<C64>> = uv.into_iter().map(|v| self.grid.analyze(v)).collect();
        self.restrict(&spectra, bx)
    }

    pub fn force(&self, x: &FourierSeries) -> FourierSeries {
        self.force_on(x, &x.basis)
    }

    /// `u(x)` and `Du(x)` on the box of `x`; unknowns ordered `q * d + alpha`.
    pub fn force_and_jacobian(&self, x: &FourierSeries) -> (FourierSeries, Mat<C64>) {
        let bx = &x.basis;
        let xv = self.values(x);
        let ph = self.phases(&xv);
        let pts = self.grid.points();
        let d = self.d;
        let mut hess = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let vals: Vec<C64> = (0..pts)
                    .map(|p| {
                        self.terms
                            .iter()
                            .zip(&ph)
                            .fold(C64::new(0.0, 0.0), |acc, ((r, c), e)| acc - c * e[p] * (r[a] * r[b] * self.lambda))
                    })
                    .collect();
                hess.push(self.grid.analyze(vals));
            }
        }
        let uv = self.force_values(&xv);
        let spectra: Vec<Vec<C64>> = uv.into_iter().map(|v| self.grid.analyze(v)).collect();
        let u = self.restrict(&spectra, bx);
        let m = bx.len();
        let mut diff = vec![0i64; d];
        let jac = Mat::from_fn(m * d, m * d, |row, col| {
            let (q, a) = (row / d, row % d);
            let (p, b) = (col / d, col % d);
            for ((o, x), y) in diff.iter_mut().zip(bx.coords(q)).zip(bx.coords(p)) {
                *o = x - y;
            }
            hess[a * d + b][self.grid.bin(&diff)]
        });
        (u, jac)
    }

    /// Largest imaginary part of `U` on the grid relative to its size; nonzero
    /// only when `x` breaks reality.
    pub fn reality_defect(&self, x: &FourierSeries) -> f64 {
        let uv = self.force_values(&self.values(x));
        uv.iter().flatten().fold(0.0, |m: f64, z| m.max(z.im.abs()))
    }
}

/// Solves `A z = b` by LU with partial pivoting; returns `z` and the relative residual.
pub(crate) fn lu_solve(a: &Mat<C64>, b: &[C64]) -> (Vec<C64>, f64) {
    use faer::linalg::solvers::Solve;
    let n = b.len();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let lu = a.partial_piv_lu();
    let z = lu.solve(&rhs);
    let sol: Vec<C64> = (0..n).map(|i| z[(i, 0)]).collect();
    let mut res: f64 = 0.0;
    let mut scale: f64 = b.iter().fold(0.0, |m, v| m.max(v.norm()));
    for i in 0..n {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..n {
            s += a[(i, j)] * sol[j];
        }
        res = res.max((s - b[i]).norm());
        scale = scale.max(s.norm());
    }
    (sol, if scale == 0.0 { 0.0 } else { res / scale })
}

pub(crate) fn check_dims(x: &FourierSeries, v: &AnalyticPotential) -> Result<()> {
    if x.dim() != v.dim() {
        return Err(Error::InvalidArgument("series and potential dimensions differ".into()));
    }
    Ok(())
}
