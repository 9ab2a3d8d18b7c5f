//! Mode lattice, frequency arithmetic and small divisors.
//!
//! Modes live in a sup-norm box `|q_i| <= Q` enumerated lexicographically on
//! centered coordinates, so the index of `-q` is `len - 1 - index(q)`.

use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffSchedule;
use crate::error::{Error, Result};

/// An integer frequency vector `q` in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mode(pub Vec<i64>);

impl Mode {
    pub fn new(q: Vec<i64>) -> Self {
        Mode(q)
    }

    pub fn zero(d: usize) -> Self {
        Mode(vec![0; d])
    }

    /// Unit vector along axis `axis`.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut q = vec![0; d];
        q[axis] = 1;
        Mode(q)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Euclidean length `|q|`.
    pub fn norm(&self) -> f64 {
        euclid(&self.0)
    }

    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn neg(&self) -> Mode {
        Mode(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Mode) -> Mode {
        Mode(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Mode) -> Mode {
        Mode(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

pub(crate) fn euclid(q: &[i64]) -> f64 {
    q.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()
}

/// The sup-norm ball `{q : |q_i| <= Q}` in `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BoxSpec", into = "BoxSpec")]
pub struct TruncationBox {
    d: usize,
    radius: usize,
    coords: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct BoxSpec {
    d: usize,
    #[serde(rename = "Q")]
    radius: usize,
}

impl TryFrom<BoxSpec> for TruncationBox {
    type Error = Error;
    fn try_from(s: BoxSpec) -> Result<Self> {
        TruncationBox::new(s.d, s.radius)
    }
}

impl From<TruncationBox> for BoxSpec {
    fn from(b: TruncationBox) -> Self {
        BoxSpec { d: b.d, radius: b.radius }
    }
}

impl TruncationBox {
    pub fn new(d: usize, radius: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let side = 2 * radius + 1;
        let len = side
            .checked_pow(d as u32)
            .filter(|&l| l <= u16::MAX as usize)
            .ok_or_else(|| Error::InvalidArgument(format!("box Q={radius} in d={d} is too large")))?;
        let mut coords = Vec::with_capacity(len * d);
        for idx in 0..len {
            let mut rem = idx;
            let start = coords.len();
            coords.resize(start + d, 0);
            for axis in (0..d).rev() {
                coords[start + axis] = (rem % side) as i64 - radius as i64;
                rem /= side;
            }
        }
        Ok(TruncationBox { d, radius, coords })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Number of modes, `(2Q+1)^d`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self, idx: usize) -> &[i64] {
        &self.coords[idx * self.d..(idx + 1) * self.d]
    }

    pub fn mode(&self, idx: usize) -> Mode {
        Mode(self.coords(idx).to_vec())
    }

    pub fn zero_index(&self) -> usize {
        self.len() / 2
    }

    /// Index of `-q` given the index of `q`.
    pub fn neg_index(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    pub fn contains(&self, q: &[i64]) -> bool {
        q.len() == self.d && q.iter().all(|c| c.unsigned_abs() as usize <= self.radius)
    }

    pub fn index_of(&self, q: &[i64]) -> Option<usize> {
        if !self.contains(q) {
            return None;
        }
        let side = (2 * self.radius + 1) as i64;
        Some(q.iter().fold(0i64, |acc, &c| acc * side + c + self.radius as i64) as usize)
    }

    /// Index of `q_a + q_b`, if it lies in the box.
    pub fn sum_index(&self, a: usize, b: usize) -> Option<usize> {
        let side = (2 * self.radius + 1) as i64;
        let r = self.radius as i64;
        let mut acc = 0i64;
        for (x, y) in self.coords(a).iter().zip(self.coords(b)) {
            let c = x + y;
            if c.abs() > r {
                return None;
            }
            acc = acc * side + c + r;
        }
        Some(acc as usize)
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.len()).map(|i| self.mode(i))
    }
}

/// Frequency vector with a double-double representation of its components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    omega: Vec<f64>,
    omega_lo: Vec<f64>,
    pub dio_a: Option<f64>,
    pub dio_nu: Option<f64>,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl FrequencyVector {
    /// Builds `omega` from plain doubles (treated as exact).
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        let lo = vec![0.0; omega.len()];
        Self::from_parts(omega, lo)
    }

    fn from_parts(omega: Vec<f64>, omega_lo: Vec<f64>) -> Result<Self> {
        if omega.len() < 2 {
            return Err(Error::InvalidArgument("omega needs at least two components".into()));
        }
        if omega.iter().any(|w| !w.is_finite() || *w == 0.0) {
            return Err(Error::InvalidArgument("omega components must be finite and nonzero".into()));
        }
        for i in 0..omega.len() {
            for j in 0..i {
                if omega[i] == omega[j] && omega_lo[i] == omega_lo[j] {
                    return Err(Error::InvalidArgument("omega components must be distinct".into()));
                }
            }
        }
        Ok(FrequencyVector { omega, omega_lo, dio_a: None, dio_nu: None })
    }

    /// `(1, (1+sqrt 5)/2)`, with the golden mean carried to about 32 digits.
    pub fn golden() -> Self {
        let s = 5f64.sqrt();
        let s_lo = (-s).mul_add(s, 5.0) / (2.0 * s);
        let (hi, lo) = two_sum(1.0, s);
        let (hi, lo) = two_sum(hi, lo + s_lo);
        Self::from_parts(vec![1.0, hi / 2.0], vec![0.0, lo / 2.0]).expect("golden frequency is valid")
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.omega
    }

    /// `omega . q` with compensated summation over the double-double components.
    pub fn dot(&self, q: &[i64]) -> f64 {
        let mut s = 0.0;
        let mut c = 0.0;
        for ((&hi, &lo), &qi) in self.omega.iter().zip(&self.omega_lo).zip(q) {
            let qf = qi as f64;
            let p = hi * qf;
            let e = hi.mul_add(qf, -p);
            let (t, err) = two_sum(s, p);
            s = t;
            c += err + e + lo * qf;
        }
        s + c
    }
}

/// `omega . q` as computed with compensated summation.
pub fn small_divisor(omega: &FrequencyVector, q: &Mode) -> f64 {
    omega.dot(q.as_slice())
}

/// `(omega . q)^{-2}`; an error at `q = 0`.
pub fn inverse_square_divisor(omega: &FrequencyVector, q: &Mode) -> Result<f64> {
    if q.is_zero() {
        return Err(Error::ZeroMode);
    }
    let w = omega.dot(q.as_slice());
    if w == 0.0 {
        return Err(Error::Resonance(q.0.clone()));
    }
    Ok(1.0 / (w * w))
}

/// Box-exact Diophantine constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineEstimate {
    pub a: f64,
    pub nu: f64,
    pub minimizer: Mode,
    /// Nonzero box modes with `omega . q = 0`.
    pub resonances: Vec<Mode>,
}

/// Computes `a = min |omega . q| |q|^nu` over nonzero box modes and stores it in `omega`.
pub fn estimate_diophantine(
    omega: &mut FrequencyVector,
    bx: &TruncationBox,
    nu: f64,
) -> Result<DiophantineEstimate> {
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument("nu must be positive".into()));
    }
    if bx.dim() != omega.dim() {
        return Err(Error::InvalidArgument("box and omega dimensions differ".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    let mut resonances = Vec::new();
    for i in (0..bx.len()).filter(|&i| i != bx.zero_index()) {
        let q = bx.coords(i);
        let w = omega.dot(q).abs();
        if w == 0.0 {
            resonances.push(bx.mode(i));
        }
        let val = w * euclid(q).powf(nu);
        if best.is_none_or(|(b, _)| val < b) {
            best = Some((val, i));
        }
    }
    let (a, arg) = best.ok_or(Error::EmptyBox)?;
    if !resonances.is_empty() {
        log::warn!("omega is resonant inside the box at {:?}", resonances);
    }
    omega.dio_a = Some(a);
    omega.dio_nu = Some(nu);
    Ok(DiophantineEstimate { a, nu, minimizer: bx.mode(arg), resonances })
}

/// Nonzero box modes with `omega . q = 0`.
pub fn resonant_modes(omega: &FrequencyVector, bx: &TruncationBox) -> Vec<Mode> {
    (0..bx.len())
        .filter(|&i| i != bx.zero_index() && omega.dot(bx.coords(i)) == 0.0)
        .map(|i| bx.mode(i))
        .collect()
}

/// `Lambda_t = {q in box : eta(t) |omega . q| <= 3}`.
pub fn lambda_set(
    omega: &FrequencyVector,
    bx: &TruncationBox,
    t: f64,
    schedule: &CutoffSchedule,
) -> Vec<Mode> {
    lambda_indices(omega, bx, schedule.eta(t)).into_iter().map(|i| bx.mode(i)).collect()
}

pub(crate) fn lambda_indices(omega: &FrequencyVector, bx: &TruncationBox, eta: f64) -> Vec<usize> {
    (0..bx.len()).filter(|&i| eta * omega.dot(bx.coords(i)).abs() <= 3.0).collect()
}
