//! Index arithmetic for symmetric-compressed kernel storage.
//!
//! A plain level `n` stores one `d^{n+1}` tensor per output mode `q` and per
//! *sorted* argument multiset `p_1 <= ... <= p_n` (mode indices). Multisets are
//! ranked in colex order: with `b_i = a_i + i`, `rank = sum_i C(b_i, i+1)`.
//! The tensor slots follow the sorted argument order, slot 0 being the output.
//!
//! A kappa-extended level `n >= 1` additionally carries the distinguished
//! argument `q'` unsorted in slot 1, followed by the sorted remaining `n-1`.

use std::sync::OnceLock;

use crate::lattice::TruncationBox;

#[derive(Debug)]
pub struct Layout {
    bx: TruncationBox,
    d: usize,
    m: usize,
    n_max: usize,
    binom_cols: usize,
    binom: Vec<usize>,
    tuples: Vec<Vec<u16>>,
    dpow: Vec<usize>,
    pub(crate) plans: OnceLock<crate::flow::rhs::ProductPlans>,
}

impl Layout {
    pub fn new(bx: TruncationBox, n_max: usize) -> Self {
        let d = bx.dim();
        let m = bx.len();
        let binom_cols = n_max + 3;
        let rows = m + n_max + 2;
        let mut binom = vec![0usize; rows * binom_cols];
        for a in 0..rows {
            binom[a * binom_cols] = 1;
            for b in 1..binom_cols.min(a + 1) {
                let left = binom[(a - 1) * binom_cols + b - 1];
                let up = if b < a { binom[(a - 1) * binom_cols + b] } else { 0 };
                binom[a * binom_cols + b] = left + up;
            }
        }
        let dpow = (0..=n_max + 2).map(|k| d.pow(k as u32)).collect();
        let mut layout = Layout {
            bx,
            d,
            m,
            n_max,
            binom_cols,
            binom,
            tuples: Vec::new(),
            dpow,
            plans: OnceLock::new(),
        };
        layout.tuples = (0..=n_max).map(|k| layout.enumerate(k)).collect();
        layout
    }

    fn enumerate(&self, k: usize) -> Vec<u16> {
        let count = self.multisets(k);
        let mut out = vec![0u16; count * k];
        if k == 0 {
            return out;
        }
        let mut cur = vec![0usize; k];
        loop {
            let r = self.rank(&cur);
            for (slot, &a) in out[r * k..(r + 1) * k].iter_mut().zip(&cur) {
                *slot = a as u16;
            }
            // lexicographic successor among nondecreasing tuples
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if cur[i] + 1 < self.m {
                    let v = cur[i] + 1;
                    for c in &mut cur[i..] {
                        *c = v;
                    }
                    break;
                }
            }
        }
    }

    pub fn truncation_box(&self) -> &TruncationBox {
        &self.bx
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    #[inline]
    pub fn binom(&self, a: usize, b: usize) -> usize {
        if b > a {
            0
        } else {
            self.binom[a * self.binom_cols + b]
        }
    }

    /// Number of sorted `k`-multisets of modes.
    #[inline]
    pub fn multisets(&self, k: usize) -> usize {
        if k == 0 {
            1
        } else {
            self.binom(self.m + k - 1, k)
        }
    }

    /// Rank of a sorted multiset.
    #[inline]
    pub fn rank<T: Copy + Into<usize>>(&self, sorted: &[T]) -> usize {
        sorted
            .iter()
            .enumerate()
            .map(|(i, &a)| self.binom(a.into() + i, i + 1))
            .sum()
    }

    #[inline]
    pub fn tuple(&self, k: usize, rank: usize) -> &[u16] {
        &self.tuples[k][rank * k..(rank + 1) * k]
    }

    /// `d^k`.
    #[inline]
    pub fn dpow(&self, k: usize) -> usize {
        self.dpow[k]
    }

    /// Stored size of plain level `n`.
    pub fn plain_len(&self, n: usize) -> usize {
        self.m * self.multisets(n) * self.dpow(n + 1)
    }

    /// Stored size of one kappa slice of extended level `n >= 1`.
    pub fn ext_len(&self, n: usize) -> usize {
        self.m * self.m * self.multisets(n - 1) * self.dpow(n + 1)
    }

    #[inline]
    pub fn plain_offset(&self, n: usize, q: usize, rank: usize) -> usize {
        (q * self.multisets(n) + rank) * self.dpow(n + 1)
    }

    #[inline]
    pub fn ext_offset(&self, n: usize, q: usize, qp: usize, rank: usize) -> usize {
        ((q * self.m + qp) * self.multisets(n - 1) + rank) * self.dpow(n + 1)
    }
}

/// Permutation sorting `args`: `perm[s]` is the position in `args` of the
/// `s`-th smallest entry (stable).
pub(crate) fn argsort(args: &[usize]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..args.len()).collect();
    perm.sort_by_key(|&i| args[i]);
    perm
}

/// Reads a tensor whose stored slot `s` holds requested slot `slot_of[s]`.
pub(crate) fn permuted_read(stored: &[crate::C64], d: usize, slot_of: &[usize]) -> Vec<crate::C64> {
    let k = slot_of.len();
    let len = stored.len();
    let mut out = vec![crate::C64::new(0.0, 0.0); len];
    let mut digits = vec![0usize; k];
    for (o, val) in out.iter_mut().enumerate() {
        let mut rem = o;
        for s in (0..k).rev() {
            digits[s] = rem % d;
            rem /= d;
        }
        let idx = slot_of.iter().fold(0, |acc, &src| acc * d + digits[src]);
        *val = stored[idx];
    }
    out
}

/// Inverse of [`permuted_read`]: writes a requested-order tensor into storage order.
pub(crate) fn permuted_write(stored: &mut [crate::C64], d: usize, slot_of: &[usize], tensor: &[crate::C64]) {
    let k = slot_of.len();
    let mut digits = vec![0usize; k];
    for (o, &val) in tensor.iter().enumerate() {
        let mut rem = o;
        for s in (0..k).rev() {
            digits[s] = rem % d;
            rem /= d;
        }
        let idx = slot_of.iter().fold(0, |acc, &src| acc * d + digits[src]);
        stored[idx] = val;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_are_dense_and_colex() {
        let l = Layout::new(TruncationBox::new(2, 1).unwrap(), 3);
        for k in 0..=3 {
            let n = l.multisets(k);
            for r in 0..n {
                let t = l.tuple(k, r);
                assert!(t.windows(2).all(|w| w[0] <= w[1]));
                assert_eq!(l.rank(t), r);
            }
        }
        assert_eq!(l.multisets(2), 45);
        assert_eq!(l.multisets(3), 165);
    }

    #[test]
    fn permutation_round_trip() {
        let d = 2;
        let stored: Vec<crate::C64> = (0..8).map(|i| crate::C64::new(i as f64, 0.0)).collect();
        let slot_of = [0, 2, 1];
        let t = permuted_read(&stored, d, &slot_of);
        let mut back = vec![crate::C64::new(0.0, 0.0); 8];
        permuted_write(&mut back, d, &slot_of, &t);
        assert_eq!(back, stored);
        // requested (a0,a1,a2) reads stored (a0,a2,a1)
        assert_eq!(t[0b001], stored[0b010]);
    }
}
