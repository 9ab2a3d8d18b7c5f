//! Symmetrization and symmetry residuals: reality, Ward identities,
//! transpose symmetry, the `Z^d` translation action and evenness in kappa.

use crate::error::{Error, Result};
use crate::kernels::KernelHierarchy;
use crate::lattice::{FrequencyVector, Mode};
use crate::C64;

/// A kernel level stored over *all* ordered argument tuples, for testing
/// symmetry operations independently of the compressed layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FullKernel {
    pub d: usize,
    pub modes: usize,
    pub n: usize,
    pub data: Vec<C64>,
}

impl FullKernel {
    pub fn zeros(d: usize, modes: usize, n: usize) -> Self {
        let len = modes.pow(n as u32 + 1) * d.pow(n as u32 + 1);
        FullKernel { d, modes, n, data: vec![C64::new(0.0, 0.0); len] }
    }

    fn block(&self) -> usize {
        self.d.pow(self.n as u32 + 1)
    }

    /// Flat offset of the tensor at `(q; args)`.
    pub fn offset(&self, q: usize, args: &[usize]) -> usize {
        args.iter().fold(q, |acc, &a| acc * self.modes + a) * self.block()
    }

    pub fn tensor(&self, q: usize, args: &[usize]) -> &[C64] {
        let off = self.offset(q, args);
        &self.data[off..off + self.block()]
    }

    pub fn tensor_mut(&mut self, q: usize, args: &[usize]) -> &mut [C64] {
        let off = self.offset(q, args);
        let b = self.block();
        &mut self.data[off..off + b]
    }

    /// Expands plain level `n` of a hierarchy.
    pub fn from_hierarchy(h: &KernelHierarchy, n: usize) -> Result<Self> {
        let m = h.truncation_box().len();
        let mut f = FullKernel::zeros(h.dim(), m, n);
        let mut args = vec![0usize; n];
        for q in 0..m {
            for flat in 0..m.pow(n as u32) {
                let mut rem = flat;
                for a in args.iter_mut().rev() {
                    *a = rem % m;
                    rem /= m;
                }
                let t = h.plain_tensor(n, q, &args)?;
                f.tensor_mut(q, &args).copy_from_slice(&t);
            }
        }
        Ok(f)
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Averages over permutations of the arguments and their tensor slots. With
/// `kappa_extended` the first argument is held fixed.
pub fn symmetrize(w: &FullKernel, kappa_extended: bool) -> FullKernel {
    let n = w.n;
    let d = w.d;
    let fixed = usize::from(kappa_extended && n > 0);
    let perms = permutations(n - fixed);
    let mut out = FullKernel::zeros(d, w.modes, n);
    let block = w.block();
    let scale = 1.0 / perms.len() as f64;
    let mut args = vec![0usize; n];
    let mut src_args = vec![0usize; n];
    let mut digits = vec![0usize; n + 1];
    for q in 0..w.modes {
        for flat in 0..w.modes.pow(n as u32) {
            let mut rem = flat;
            for a in args.iter_mut().rev() {
                *a = rem % w.modes;
                rem /= w.modes;
            }
            let off = out.offset(q, &args);
            for perm in &perms {
                // position i of the source tuple holds argument pi(i)
                let pi = |i: usize| if i < fixed { i } else { fixed + perm[i - fixed] };
                for i in 0..n {
                    src_args[i] = args[pi(i)];
                }
                let src = w.tensor(q, &src_args);
                for o in 0..block {
                    let mut rem = o;
                    for s in (0..=n).rev() {
                        digits[s] = rem % d;
                        rem /= d;
                    }
                    let mut idx = digits[0];
                    for i in 0..n {
                        idx = idx * d + digits[1 + pi(i)];
                    }
                    out.data[off + o] += src[idx] * scale;
                }
            }
        }
    }
    out
}

/// `max |w_n(-q,-p) - conj w_n(q,p)|` over all stored tuples, every level and kappa slice.
pub fn reality_residual(h: &KernelHierarchy) -> f64 {
    let l = h.layout().clone();
    let bx = h.truncation_box();
    let mut worst: f64 = 0.0;
    let mut neg = Vec::new();
    for n in 0..=h.n_max() {
        let len = l.dpow(n + 1);
        for q in 0..l.modes() {
            let nq = bx.neg_index(q);
            for rank in 0..l.multisets(n) {
                let tup = l.tuple(n, rank);
                neg.clear();
                neg.extend(tup.iter().map(|&a| bx.neg_index(a as usize)));
                let a = &h.plain[n][l.plain_offset(n, q, rank)..][..len];
                let b = h.plain_tensor(n, nq, &neg).expect("level in range");
                for (x, y) in a.iter().zip(&b) {
                    worst = worst.max((y - x.conj()).norm());
                }
            }
        }
    }
    if let Some(fam) = &h.kappa {
        for j in 0..fam.grid.len() {
            let jm = fam.grid.mirror(j);
            for n in 1..=h.n_max() {
                let len = l.dpow(n + 1);
                for q in 0..l.modes() {
                    for qp in 0..l.modes() {
                        for rank in 0..l.multisets(n - 1) {
                            let tup = l.tuple(n - 1, rank);
                            neg.clear();
                            neg.extend(tup.iter().map(|&a| bx.neg_index(a as usize)));
                            let a = &fam.levels[j][n - 1][l.ext_offset(n, q, qp, rank)..][..len];
                            let b = h
                                .ext_tensor(jm, n, bx.neg_index(q), bx.neg_index(qp), &neg)
                                .expect("level in range");
                            for (x, y) in a.iter().zip(&b) {
                                worst = worst.max((y - x.conj()).norm());
                            }
                        }
                    }
                }
            }
        }
    }
    worst
}

/// Ward identity residual at level `n` along coordinate axis `axis`:
/// `max |i(a.q) w_n(q,p) - (n+1) w_{n+1}(q,0,p) a - i sum(a.p_i) w_n(q,p)|`.
pub fn ward_residual(h: &KernelHierarchy, n: usize, axis: usize) -> Result<f64> {
    if n + 1 > h.n_max() {
        return Err(Error::MissingLevel { n, needed: n + 1, n_max: h.n_max() });
    }
    if axis >= h.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let l = h.layout().clone();
    let bx = h.truncation_box();
    let d = h.dim();
    let zero = bx.zero_index();
    let len = l.dpow(n + 1);
    let mut worst: f64 = 0.0;
    let mut args = Vec::with_capacity(n + 1);
    for q in 0..l.modes() {
        let aq = bx.coords(q)[axis] as f64;
        for rank in 0..l.multisets(n) {
            let tup = l.tuple(n, rank);
            let ap: f64 = tup.iter().map(|&p| bx.coords(p as usize)[axis] as f64).sum();
            args.clear();
            args.push(zero);
            args.extend(tup.iter().map(|&p| p as usize));
            let w = &h.plain[n][l.plain_offset(n, q, rank)..][..len];
            let up = h.plain_tensor(n + 1, q, &args)?;
            let k = C64::new(0.0, aq - ap);
            for (o, &x) in w.iter().enumerate() {
                // contract slot 1 of w_{n+1} with the unit vector: slot digits [o_0, axis, o_1..]
                let o0 = o / (len / d);
                let tail = o % (len / d);
                let contracted = up[(o0 * d + axis) * (len / d) + tail];
                let r = k * x - contracted * (n as f64 + 1.0);
                worst = worst.max(r.norm());
            }
        }
    }
    Ok(worst)
}

fn swap_first_two(t: &[C64], d: usize) -> Vec<C64> {
    let rest = t.len() / (d * d);
    let mut out = vec![C64::new(0.0, 0.0); t.len()];
    for a in 0..d {
        for b in 0..d {
            out[(a * d + b) * rest..(a * d + b + 1) * rest].copy_from_slice(&t[(b * d + a) * rest..(b * d + a + 1) * rest]);
        }
    }
    out
}

/// `max |w_n(q,q',p,kappa) - w_n(-q',-q,p,-kappa)^T|` over plain tuples and,
/// if present, every kappa slice.
pub fn transpose_residual(h: &KernelHierarchy, n: usize) -> Result<f64> {
    if n == 0 || n > h.n_max() {
        return Err(Error::InvalidArgument(format!("transpose residual needs 1 <= n <= {}", h.n_max())));
    }
    let l = h.layout().clone();
    let bx = h.truncation_box();
    let d = h.dim();
    let mut worst: f64 = 0.0;
    let mut rest = Vec::with_capacity(n);
    let mut args = Vec::with_capacity(n);
    for q in 0..l.modes() {
        for rank in 0..l.multisets(n) {
            let tup = l.tuple(n, rank);
            for i in 0..n {
                if i > 0 && tup[i] == tup[i - 1] {
                    continue;
                }
                rest.clear();
                rest.extend(tup.iter().enumerate().filter(|&(s, _)| s != i).map(|(_, &a)| a as usize));
                args.clear();
                args.push(tup[i] as usize);
                args.extend_from_slice(&rest);
                let a = h.plain_tensor(n, q, &args)?;
                args[0] = bx.neg_index(q);
                let b = swap_first_two(&h.plain_tensor(n, bx.neg_index(tup[i] as usize), &args)?, d);
                for (x, y) in a.iter().zip(&b) {
                    worst = worst.max((x - y).norm());
                }
            }
        }
    }
    if let Some(fam) = &h.kappa {
        for j in 0..fam.grid.len() {
            let jm = fam.grid.mirror(j);
            for q in 0..l.modes() {
                for qp in 0..l.modes() {
                    for rank in 0..l.multisets(n - 1) {
                        rest.clear();
                        rest.extend(l.tuple(n - 1, rank).iter().map(|&a| a as usize));
                        let a = h.ext_tensor(j, n, q, qp, &rest)?;
                        let b = swap_first_two(&h.ext_tensor(jm, n, bx.neg_index(qp), bx.neg_index(q), &rest)?, d);
                        for (x, y) in a.iter().zip(&b) {
                            worst = worst.max((x - y).norm());
                        }
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Cubic Lagrange interpolation of `values` (one per kappa node) at `x`.
fn lagrange4(nodes: [f64; 4], x: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (x - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
    }
    w
}

/// `max |w_n(q+r, q'+r, p, kappa) - w_n(q, q', p, kappa + omega.r)|` over
/// tuples with shifted arguments in the box and kappa nodes whose shift stays
/// inside the grid. Off-node values use cubic interpolation.
pub fn translation_residual(h: &KernelHierarchy, n: usize, shift: &Mode, omega: &FrequencyVector) -> Result<f64> {
    let fam = h.kappa.as_ref().ok_or(Error::NotExtended)?;
    if n == 0 || n > h.n_max() {
        return Err(Error::InvalidArgument(format!("translation residual needs 1 <= n <= {}", h.n_max())));
    }
    let bx = h.truncation_box();
    let l = h.layout().clone();
    if shift.is_zero() {
        return Ok(0.0);
    }
    let wr = omega.dot(shift.as_slice());
    let grid = fam.grid;
    let kmax = grid.max();
    let shift_idx = |q: usize| {
        let c: Vec<i64> = bx.coords(q).iter().zip(shift.as_slice()).map(|(a, b)| a + b).collect();
        bx.index_of(&c)
    };
    let len = l.dpow(n + 1);
    let mut worst: f64 = 0.0;
    let mut any = false;
    for j in 0..grid.len() {
        let x = grid.kappa(j) + wr;
        if x.abs() > kmax * (1.0 + 1e-12) {
            continue;
        }
        any = true;
        let pos = (x + kmax) / grid.spacing;
        let near = pos.round();
        let stencil: Vec<(usize, f64)> = if (pos - near).abs() < 1e-9 {
            vec![(near as usize, 1.0)]
        } else {
            let i0 = (pos.floor() as isize - 1).clamp(0, grid.len() as isize - 4) as usize;
            let nodes = [0, 1, 2, 3].map(|k| grid.kappa(i0 + k));
            lagrange4(nodes, x).iter().enumerate().map(|(k, &w)| (i0 + k, w)).collect()
        };
        for q in 0..l.modes() {
            let Some(qs) = shift_idx(q) else { continue };
            for qp in 0..l.modes() {
                let Some(qps) = shift_idx(qp) else { continue };
                for rank in 0..l.multisets(n - 1) {
                    let lhs = &fam.levels[j][n - 1][l.ext_offset(n, qs, qps, rank)..][..len];
                    let off = l.ext_offset(n, q, qp, rank);
                    for o in 0..len {
                        let mut v = C64::new(0.0, 0.0);
                        for &(node, w) in &stencil {
                            v += fam.levels[node][n - 1][off + o] * w;
                        }
                        worst = worst.max((lhs[o] - v).norm());
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::KappaOutOfRange { kappa: wr, min: -kmax, max: kmax });
    }
    Ok(worst)
}

fn w1_zero(h: &KernelHierarchy, j: usize) -> Result<Vec<C64>> {
    let z = h.truncation_box().zero_index();
    h.ext_tensor(j, 1, z, z, &[])
}

/// `max_j |w_1(0,0,kappa_j) - w_1(0,0,-kappa_j)|`.
pub fn evenness_residual(h: &KernelHierarchy) -> Result<f64> {
    let grid = h.kappa_grid().ok_or(Error::NotExtended)?;
    let mut worst: f64 = 0.0;
    for j in 0..grid.len() {
        let a = w1_zero(h, j)?;
        let b = w1_zero(h, grid.mirror(j))?;
        worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).norm()));
    }
    Ok(worst)
}

/// Centered difference `|d/dkappa w_1(0,0,kappa)|` at `kappa = 0` (max entry).
pub fn kappa_slope_at_zero(h: &KernelHierarchy) -> Result<f64> {
    let grid = h.kappa_grid().ok_or(Error::NotExtended)?;
    let a = w1_zero(h, grid.half + 1)?;
    let b = w1_zero(h, grid.half - 1)?;
    Ok(a.iter().zip(&b).fold(0.0, |m: f64, (x, y)| m.max((x - y).norm() / (2.0 * grid.spacing))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TruncationBox;

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(0).len(), 1);
    }

    #[test]
    fn symmetrize_averages_a_swapped_pair() {
        let mut w = FullKernel::zeros(1, 2, 2);
        w.tensor_mut(0, &[0, 1])[0] = C64::new(1.0, 0.0);
        w.tensor_mut(0, &[1, 0])[0] = C64::new(3.0, 0.0);
        let s = symmetrize(&w, false);
        assert_eq!(s.tensor(0, &[0, 1])[0], C64::new(2.0, 0.0));
        assert_eq!(s.tensor(0, &[1, 0])[0], C64::new(2.0, 0.0));
    }

    #[test]
    fn zero_hierarchy_has_no_residuals() {
        let bx = TruncationBox::new(2, 1).unwrap();
        let h = KernelHierarchy::zeros(&bx, 2);
        assert_eq!(reality_residual(&h), 0.0);
        assert_eq!(ward_residual(&h, 1, 0).unwrap(), 0.0);
        assert_eq!(transpose_residual(&h, 2).unwrap(), 0.0);
        assert!(ward_residual(&h, 2, 0).is_err());
    }
}
