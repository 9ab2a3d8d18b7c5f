//! Kernel hierarchies `{w_n}` over a truncation box, their symmetries and norms.

pub mod dump;
pub mod layout;
pub mod norms;
pub mod symmetry;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FrequencyVector, TruncationBox};
use crate::C64;
pub use layout::Layout;
use layout::{argsort, permuted_read, permuted_write};

/// Uniform symmetric grid `kappa_j = j * spacing`, `j = -half..=half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaGrid {
    pub half: usize,
    pub spacing: f64,
}

impl KappaGrid {
    pub fn new(points: usize, spacing: f64) -> Result<Self> {
        if points < 5 || points % 2 == 0 {
            return Err(Error::InvalidArgument("kappa grid needs an odd number (>= 5) of points".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument("kappa spacing must be positive".into()));
        }
        Ok(KappaGrid { half: points / 2, spacing })
    }

    /// Grid spanning `[-range, range]` with `points` nodes.
    pub fn spanning(points: usize, range: f64) -> Result<Self> {
        Self::new(points, 2.0 * range / (points.max(2) - 1) as f64)
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kappa(&self, j: usize) -> f64 {
        (j as f64 - self.half as f64) * self.spacing
    }

    pub fn kappas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|j| self.kappa(j))
    }

    pub fn max(&self) -> f64 {
        self.half as f64 * self.spacing
    }

    /// Index of `-kappa_j`.
    pub fn mirror(&self, j: usize) -> usize {
        self.len() - 1 - j
    }
}

/// Per-kappa copies of the levels `n >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaFamily {
    pub grid: KappaGrid,
    /// `levels[j][n - 1]` for kappa index `j`.
    pub levels: Vec<Vec<Vec<C64>>>,
}

/// The family `{w_n}`, `n = 0..=n_max`, optionally kappa-extended.
#[derive(Debug, Clone)]
pub struct KernelHierarchy {
    layout: Arc<Layout>,
    pub(crate) plain: Vec<Vec<C64>>,
    pub(crate) kappa: Option<KappaFamily>,
}

impl PartialEq for KernelHierarchy {
    fn eq(&self, other: &Self) -> bool {
        self.layout.truncation_box() == other.layout.truncation_box()
            && self.plain == other.plain
            && self.kappa == other.kappa
    }
}

impl KernelHierarchy {
    pub fn zeros(bx: &TruncationBox, n_max: usize) -> Self {
        Self::with_layout(Arc::new(Layout::new(bx.clone(), n_max)))
    }

    pub fn with_layout(layout: Arc<Layout>) -> Self {
        let plain = (0..=layout.n_max()).map(|n| vec![C64::new(0.0, 0.0); layout.plain_len(n)]).collect();
        KernelHierarchy { layout, plain, kappa: None }
    }

    /// Zero hierarchy with the same shape (including any kappa family).
    pub fn zeros_like(&self) -> Self {
        let mut z = Self::with_layout(self.layout.clone());
        if let Some(f) = &self.kappa {
            z.kappa = Some(KappaFamily {
                grid: f.grid,
                levels: f.levels.iter().map(|ls| ls.iter().map(|l| vec![C64::new(0.0, 0.0); l.len()]).collect()).collect(),
            });
        }
        z
    }

    /// Adds a kappa family whose every slice is a copy of the plain levels.
    pub fn extend_kappa(&mut self, grid: KappaGrid) {
        let l = &self.layout;
        let slice: Vec<Vec<C64>> = (1..=l.n_max())
            .map(|n| {
                let mut ext = vec![C64::new(0.0, 0.0); l.ext_len(n)];
                for q in 0..l.modes() {
                    for rank in 0..l.multisets(n) {
                        let tup = l.tuple(n, rank);
                        let src = &self.plain[n][l.plain_offset(n, q, rank)..][..l.dpow(n + 1)];
                        // each distinct entry of the multiset can play the role of q'
                        for i in 0..n {
                            if i > 0 && tup[i] == tup[i - 1] {
                                continue;
                            }
                            let rest: Vec<u16> = tup.iter().enumerate().filter(|&(s, _)| s != i).map(|(_, &a)| a).collect();
                            let off = l.ext_offset(n, q, tup[i] as usize, l.rank(&rest));
                            // stored [out, sorted...] with q' at sorted position i+1 -> [out, q', rest...]
                            let mut from = vec![0, i + 1];
                            from.extend((1..=n).filter(|&s| s != i + 1));
                            let mut slot_of = vec![0; n + 1];
                            for (req, &st) in from.iter().enumerate() {
                                slot_of[st] = req;
                            }
                            ext[off..off + src.len()].copy_from_slice(&permuted_read(src, l.dim(), &slot_of));
                        }
                    }
                }
                ext
            })
            .collect();
        self.kappa = Some(KappaFamily { grid, levels: vec![slice; grid.len()] });
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn truncation_box(&self) -> &TruncationBox {
        self.layout.truncation_box()
    }

    pub fn n_max(&self) -> usize {
        self.layout.n_max()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn is_extended(&self) -> bool {
        self.kappa.is_some()
    }

    pub fn kappa_family(&self) -> Option<&KappaFamily> {
        self.kappa.as_ref()
    }

    pub fn kappa_grid(&self) -> Option<KappaGrid> {
        self.kappa.as_ref().map(|f| f.grid)
    }

    /// Raw storage of plain level `n`.
    pub fn level(&self, n: usize) -> &[C64] {
        &self.plain[n]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [C64] {
        &mut self.plain[n]
    }

    /// Raw storage of extended level `n >= 1` at kappa index `j`.
    pub fn ext_level(&self, j: usize, n: usize) -> Result<&[C64]> {
        let f = self.kappa.as_ref().ok_or(Error::NotExtended)?;
        Ok(&f.levels[j][n - 1])
    }

    fn check_level(&self, n: usize, nargs: usize) -> Result<()> {
        if n > self.n_max() {
            return Err(Error::MissingLevel { n, needed: n, n_max: self.n_max() });
        }
        if nargs != n {
            return Err(Error::InvalidArgument(format!("level {n} takes {n} arguments, got {nargs}")));
        }
        Ok(())
    }

    fn plain_slot_map(&self, n: usize, q: usize, args: &[usize]) -> (usize, Vec<usize>) {
        let l = &self.layout;
        let perm = argsort(args);
        let sorted: Vec<usize> = perm.iter().map(|&i| args[i]).collect();
        let off = l.plain_offset(n, q, l.rank(&sorted));
        let mut slot_of = vec![0];
        slot_of.extend(perm.iter().map(|&i| i + 1));
        (off, slot_of)
    }

    /// `w_n(q; p_1..p_n)` by mode indices, slots ordered `[out, p_1, .., p_n]`.
    pub fn plain_tensor(&self, n: usize, q: usize, args: &[usize]) -> Result<Vec<C64>> {
        self.check_level(n, args.len())?;
        let (off, slot_of) = self.plain_slot_map(n, q, args);
        Ok(permuted_read(&self.plain[n][off..off + self.layout.dpow(n + 1)], self.dim(), &slot_of))
    }

    /// Overwrites the stored entry for `(q; sorted(args))` with `tensor` given in argument order.
    pub fn set_plain_tensor(&mut self, n: usize, q: usize, args: &[usize], tensor: &[C64]) -> Result<()> {
        self.check_level(n, args.len())?;
        let (off, slot_of) = self.plain_slot_map(n, q, args);
        let d = self.dim();
        let len = self.layout.dpow(n + 1);
        permuted_write(&mut self.plain[n][off..off + len], d, &slot_of, tensor);
        Ok(())
    }

    fn ext_slot_map(&self, n: usize, q: usize, qp: usize, rest: &[usize]) -> (usize, Vec<usize>) {
        let l = &self.layout;
        let perm = argsort(rest);
        let sorted: Vec<usize> = perm.iter().map(|&i| rest[i]).collect();
        let off = l.ext_offset(n, q, qp, l.rank(&sorted));
        let mut slot_of = vec![0, 1];
        slot_of.extend(perm.iter().map(|&i| i + 2));
        (off, slot_of)
    }

    /// `w_n(q; q', p_2..p_n; kappa_j)`, slots `[out, q', p_2, ..]`.
    pub fn ext_tensor(&self, j: usize, n: usize, q: usize, qp: usize, rest: &[usize]) -> Result<Vec<C64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("extended kernels start at n = 1".into()));
        }
        self.check_level(n, rest.len() + 1)?;
        let fam = self.kappa.as_ref().ok_or(Error::NotExtended)?;
        let (off, slot_of) = self.ext_slot_map(n, q, qp, rest);
        Ok(permuted_read(&fam.levels[j][n - 1][off..off + self.layout.dpow(n + 1)], self.dim(), &slot_of))
    }

    pub fn set_ext_tensor(&mut self, j: usize, n: usize, q: usize, qp: usize, rest: &[usize], tensor: &[C64]) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("extended kernels start at n = 1".into()));
        }
        self.check_level(n, rest.len() + 1)?;
        let (off, slot_of) = self.ext_slot_map(n, q, qp, rest);
        let d = self.dim();
        let len = self.layout.dpow(n + 1);
        let fam = self.kappa.as_mut().ok_or(Error::NotExtended)?;
        permuted_write(&mut fam.levels[j][n - 1][off..off + len], d, &slot_of, tensor);
        Ok(())
    }

    /// Iterates over every storage vector mutably (plain levels, then kappa slices).
    pub(crate) fn buffers_mut(&mut self) -> impl Iterator<Item = &mut Vec<C64>> {
        let fam = self.kappa.iter_mut().flat_map(|f| f.levels.iter_mut().flat_map(|ls| ls.iter_mut()));
        self.plain.iter_mut().chain(fam)
    }

    pub(crate) fn buffers(&self) -> impl Iterator<Item = &Vec<C64>> {
        let fam = self.kappa.iter().flat_map(|f| f.levels.iter().flat_map(|ls| ls.iter()));
        self.plain.iter().chain(fam)
    }

    /// `self += a * other` (shapes must agree).
    pub fn axpy(&mut self, a: f64, other: &KernelHierarchy) {
        for (x, y) in self.buffers_mut().zip(other.buffers()) {
            for (xi, yi) in x.iter_mut().zip(y) {
                *xi += yi * a;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for x in self.buffers_mut() {
            for xi in x.iter_mut() {
                *xi *= a;
            }
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.buffers().flat_map(|b| b.iter()).fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &KernelHierarchy) -> f64 {
        self.buffers()
            .zip(other.buffers())
            .flat_map(|(a, b)| a.iter().zip(b))
            .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
    }

    /// `w_0(q)` for every box mode, as `d`-vectors.
    pub fn w0(&self) -> Vec<Vec<C64>> {
        let d = self.dim();
        self.plain[0].chunks(d).map(|c| c.to_vec()).collect()
    }

    /// `|w_0(0)|`.
    pub fn w0_at_zero(&self) -> f64 {
        let d = self.dim();
        let z = self.truncation_box().zero_index();
        self.plain[0][z * d..(z + 1) * d].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `omega . q` for every box mode.
    pub fn divisors(&self, omega: &FrequencyVector) -> Vec<f64> {
        let bx = self.truncation_box();
        (0..bx.len()).map(|i| omega.dot(bx.coords(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_access_is_permutation_covariant() {
        let bx = TruncationBox::new(2, 1).unwrap();
        let mut h = KernelHierarchy::zeros(&bx, 2);
        let t: Vec<C64> = (0..8).map(|i| C64::new(i as f64, -(i as f64))).collect();
        h.set_plain_tensor(2, 4, &[7, 2], &t).unwrap();
        let back = h.plain_tensor(2, 4, &[7, 2]).unwrap();
        assert_eq!(back, t);
        let swapped = h.plain_tensor(2, 4, &[2, 7]).unwrap();
        // slot (a0, a1, a2) for args (2,7) equals slot (a0, a2, a1) for args (7,2)
        for a in 0..8usize {
            let (a0, a1, a2) = (a >> 2, (a >> 1) & 1, a & 1);
            assert_eq!(swapped[a], t[(a0 << 2) | (a2 << 1) | a1]);
        }
    }

    #[test]
    fn extension_copies_plain_values() {
        let bx = TruncationBox::new(2, 1).unwrap();
        let mut h = KernelHierarchy::zeros(&bx, 2);
        let t: Vec<C64> = (0..8).map(|i| C64::new(i as f64 + 1.0, 0.5)).collect();
        h.set_plain_tensor(2, 1, &[3, 5], &t).unwrap();
        h.extend_kappa(KappaGrid::new(5, 0.1).unwrap());
        for j in 0..5 {
            assert_eq!(h.ext_tensor(j, 2, 1, 3, &[5]).unwrap(), h.plain_tensor(2, 1, &[3, 5]).unwrap());
            assert_eq!(h.ext_tensor(j, 2, 1, 5, &[3]).unwrap(), h.plain_tensor(2, 1, &[5, 3]).unwrap());
        }
    }
}
