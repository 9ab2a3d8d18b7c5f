//! Right-hand sides of the kernel flow.
//!
//! Plain levels:
//! `v_n(q,p) = sum_k k/C(n,k-1) sum_{|S|=k-1} sum_r g_r w_k(q; r, p_S) . w_{n+1-k}(r; p_{S^c})`,
//! where the slot of `w_k` holding `r` contracts against the output slot of
//! `w_{n+1-k}` and terms with `k > n_max` are dropped.
//!
//! Extended levels (`n >= 1`, one kappa at a time):
//! `v_n(q,q',p) = sum_k k/n [ (k-1) A_k + l B_k ]`, `l = n+1-k`, with
//! `A_k = avg_{|S|=k-2} sum_r g_r w_k(q; q', r, p_S; kappa) . w_l(r; p_{S^c})` and
//! `B_k = avg_{|S|=k-1} sum_r g_{r,kappa} w_k(q; r, p_S; kappa) . w_l(r; q', p_{S^c}; kappa)`.

use crate::cutoff::CutoffSchedule;
use crate::kernels::{KappaGrid, KernelHierarchy, Layout};
use crate::lattice::FrequencyVector;
use crate::C64;

/// Output-slot to operand-slot tables for one contraction pattern.
#[derive(Debug, Clone)]
pub struct SlotPlan {
    a_off: Vec<u32>,
    b_off: Vec<u32>,
    a_stride: usize,
    b_stride: usize,
}

#[derive(Clone, Copy)]
enum Src {
    A(usize),
    B(usize),
}

impl SlotPlan {
    fn build(d: usize, map: &[Src], n_a: usize, ca: usize, n_b: usize, cb: usize) -> Self {
        let n_out = map.len();
        let total = d.pow(n_out as u32);
        let pw = |k: usize| d.pow(k as u32);
        let mut a_off = Vec::with_capacity(total);
        let mut b_off = Vec::with_capacity(total);
        for o in 0..total {
            let (mut ao, mut bo) = (0usize, 0usize);
            for (s, src) in map.iter().enumerate() {
                let digit = (o / pw(n_out - 1 - s)) % d;
                match *src {
                    Src::A(slot) => ao += digit * pw(n_a - 1 - slot),
                    Src::B(slot) => bo += digit * pw(n_b - 1 - slot),
                }
            }
            a_off.push(ao as u32);
            b_off.push(bo as u32);
        }
        SlotPlan { a_off, b_off, a_stride: pw(n_a - 1 - ca), b_stride: pw(n_b - 1 - cb) }
    }

    #[inline]
    fn accumulate(&self, out: &mut [C64], a: &[C64], b: &[C64], factor: f64, d: usize) {
        if d == 2 {
            for ((o, &ao), &bo) in out.iter_mut().zip(&self.a_off).zip(&self.b_off) {
                let (ao, bo) = (ao as usize, bo as usize);
                let s = a[ao] * b[bo] + a[ao + self.a_stride] * b[bo + self.b_stride];
                *o += s * factor;
            }
        } else {
            for ((o, &ao), &bo) in out.iter_mut().zip(&self.a_off).zip(&self.b_off) {
                let mut s = C64::new(0.0, 0.0);
                for beta in 0..d {
                    s += a[ao as usize + beta * self.a_stride] * b[bo as usize + beta * self.b_stride];
                }
                *o += s * factor;
            }
        }
    }
}

/// Contraction tables for every level, subset mask and insertion position.
#[derive(Debug)]
pub struct ProductPlans {
    /// `[n][mask][j]`
    plain: Vec<Vec<Vec<SlotPlan>>>,
    /// `[n][mask over n-1 positions][j]`, `n >= 1`
    ext_a: Vec<Vec<Vec<SlotPlan>>>,
    /// `[n][mask over n-1 positions]`, `n >= 1`
    ext_b: Vec<Vec<SlotPlan>>,
}

fn split(mask: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|&i| mask >> i & 1 == 1)
}

impl ProductPlans {
    fn new(d: usize, n_max: usize) -> Self {
        let mut plain = Vec::new();
        for n in 0..=n_max {
            let mut per_mask = Vec::new();
            for mask in 0..1usize << n {
                let s = mask.count_ones() as usize;
                let (_, sc) = split(mask, n);
                let per_j = (0..=s)
                    .map(|j| {
                        let mut map = vec![Src::A(0)];
                        let (mut t, mut u) = (0, 0);
                        for i in 0..n {
                            if mask >> i & 1 == 1 {
                                map.push(Src::A(1 + if t < j { t } else { t + 1 }));
                                t += 1;
                            } else {
                                map.push(Src::B(1 + u));
                                u += 1;
                            }
                        }
                        SlotPlan::build(d, &map, s + 2, 1 + j, sc.len() + 1, 0)
                    })
                    .collect();
                per_mask.push(per_j);
            }
            plain.push(per_mask);
        }
        let mut ext_a = vec![Vec::new()];
        let mut ext_b = vec![Vec::new()];
        for n in 1..=n_max {
            let m = n - 1;
            let mut per_mask_a = Vec::new();
            let mut per_mask_b = Vec::new();
            for mask in 0..1usize << m {
                let s = mask.count_ones() as usize;
                let nsc = m - s;
                let per_j = (0..=s)
                    .map(|j| {
                        let mut map = vec![Src::A(0), Src::A(1)];
                        let (mut t, mut u) = (0, 0);
                        for i in 0..m {
                            if mask >> i & 1 == 1 {
                                map.push(Src::A(2 + if t < j { t } else { t + 1 }));
                                t += 1;
                            } else {
                                map.push(Src::B(1 + u));
                                u += 1;
                            }
                        }
                        SlotPlan::build(d, &map, s + 3, 2 + j, nsc + 1, 0)
                    })
                    .collect();
                per_mask_a.push(per_j);
                let mut map = vec![Src::A(0), Src::B(1)];
                let (mut t, mut u) = (0, 0);
                for i in 0..m {
                    if mask >> i & 1 == 1 {
                        map.push(Src::A(2 + t));
                        t += 1;
                    } else {
                        map.push(Src::B(2 + u));
                        u += 1;
                    }
                }
                per_mask_b.push(SlotPlan::build(d, &map, s + 2, 1, nsc + 2, 0));
            }
            ext_a.push(per_mask_a);
            ext_b.push(per_mask_b);
        }
        ProductPlans { plain, ext_a, ext_b }
    }

    pub(crate) fn get(layout: &Layout) -> &ProductPlans {
        layout.plans.get_or_init(|| ProductPlans::new(layout.dim(), layout.n_max()))
    }
}

/// Cutoff-derivative weights per box mode `r`: `g_r` for the plain products and
/// `g_{r,kappa_j}` for the extended ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeWeights {
    pub plain: Vec<f64>,
    pub kappa: Vec<Vec<f64>>,
}

impl ModeWeights {
    /// `gamma_dot_t(omega.r)` and `gamma_dot_t(omega.r + kappa_j)`.
    pub fn at_time(t: f64, schedule: &CutoffSchedule, divisors: &[f64], grid: Option<KappaGrid>) -> Self {
        Self::build(divisors, grid, |k| schedule.gamma_dot(t, k))
    }

    /// `d gamma / d eta` at scale `eta`.
    pub fn at_eta(eta: f64, divisors: &[f64], grid: Option<KappaGrid>) -> Self {
        Self::build(divisors, grid, |k| CutoffSchedule::gamma_dot_eta(eta, k))
    }

    fn build(divisors: &[f64], grid: Option<KappaGrid>, g: impl Fn(f64) -> f64) -> Self {
        let plain = divisors.iter().map(|&w| g(w)).collect();
        let kappa = grid
            .map(|gr| gr.kappas().map(|k| divisors.iter().map(|&w| g(w + k)).collect()).collect())
            .unwrap_or_default();
        ModeWeights { plain, kappa }
    }

    pub fn is_zero(&self) -> bool {
        self.plain.iter().chain(self.kappa.iter().flatten()).all(|&g| g == 0.0)
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for g in self.plain.iter_mut().chain(self.kappa.iter_mut().flatten()) {
            *g *= s;
        }
        self
    }
}

fn active(weights: &[f64]) -> Vec<(usize, f64)> {
    weights.iter().enumerate().filter(|(_, &g)| g != 0.0).map(|(r, &g)| (r, g)).collect()
}

/// Rank pieces of a sorted multiset for inserting one extra element.
struct Insertion {
    pre: Vec<usize>,
    suf: Vec<usize>,
}

impl Insertion {
    fn new(layout: &Layout, s: &[usize]) -> Self {
        let k = s.len();
        let mut pre = vec![0; k + 1];
        for i in 0..k {
            pre[i + 1] = pre[i] + layout.binom(s[i] + i, i + 1);
        }
        let mut suf = vec![0; k + 1];
        for i in (0..k).rev() {
            suf[i] = suf[i + 1] + layout.binom(s[i] + i + 1, i + 2);
        }
        Insertion { pre, suf }
    }

    /// `(position, rank)` of `s` with `r` inserted.
    #[inline]
    fn insert(&self, layout: &Layout, s: &[usize], r: usize) -> (usize, usize) {
        let j = s.iter().take_while(|&&x| x < r).count();
        (j, self.pre[j] + layout.binom(r + j, j + 1) + self.suf[j])
    }
}

/// Adds the bilinear product `L . g . R` of two plain hierarchies into `out`.
pub(crate) fn product_plain(layout: &Layout, left: &[Vec<C64>], right: &[Vec<C64>], weights: &[f64], out: &mut [Vec<C64>]) {
    let act = active(weights);
    if act.is_empty() {
        return;
    }
    let plans = ProductPlans::get(layout);
    let n_max = layout.n_max();
    let d = layout.dim();
    let mut ps = Vec::with_capacity(n_max);
    let mut psc = Vec::with_capacity(n_max);
    for n in 0..=n_max {
        let len = layout.dpow(n + 1);
        for q in 0..layout.modes() {
            for rank in 0..layout.multisets(n) {
                let tup = layout.tuple(n, rank);
                let off = layout.plain_offset(n, q, rank);
                let block = &mut out[n][off..off + len];
                for mask in 0..1usize << n {
                    let k = mask.count_ones() as usize + 1;
                    if k > n_max {
                        continue;
                    }
                    let l = n + 1 - k;
                    ps.clear();
                    psc.clear();
                    for (i, &p) in tup.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            ps.push(p as usize);
                        } else {
                            psc.push(p as usize);
                        }
                    }
                    let coef = k as f64 / layout.binom(n, k - 1) as f64;
                    let rank_r = layout.rank(&psc);
                    let ins = Insertion::new(layout, &ps);
                    let lk = layout.dpow(k + 1);
                    let ll = layout.dpow(l + 1);
                    for &(r, g) in &act {
                        let (j, rank_l) = ins.insert(layout, &ps, r);
                        let a = &left[k][layout.plain_offset(k, q, rank_l)..][..lk];
                        let b = &right[l][layout.plain_offset(l, r, rank_r)..][..ll];
                        plans.plain[n][mask][j].accumulate(block, a, b, coef * g, d);
                    }
                }
            }
        }
    }
}

/// Adds the extended-level increment at one kappa into `out` (indexed `n - 1`).
pub(crate) fn product_kappa(
    layout: &Layout,
    plain: &[Vec<C64>],
    ext: &[Vec<C64>],
    g_plain: &[f64],
    g_kappa: &[f64],
    out: &mut [Vec<C64>],
) {
    let act_a = active(g_plain);
    let act_b = active(g_kappa);
    if act_a.is_empty() && act_b.is_empty() {
        return;
    }
    let plans = ProductPlans::get(layout);
    let n_max = layout.n_max();
    let d = layout.dim();
    let m = layout.modes();
    let mut ps = Vec::with_capacity(n_max);
    let mut psc = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let len = layout.dpow(n + 1);
        for q in 0..m {
            for qp in 0..m {
                for rank in 0..layout.multisets(n - 1) {
                    let tup = layout.tuple(n - 1, rank);
                    let off = layout.ext_offset(n, q, qp, rank);
                    let block = &mut out[n - 1][off..off + len];
                    for mask in 0..1usize << (n - 1) {
                        let s = mask.count_ones() as usize;
                        ps.clear();
                        psc.clear();
                        for (i, &p) in tup.iter().enumerate() {
                            if mask >> i & 1 == 1 {
                                ps.push(p as usize);
                            } else {
                                psc.push(p as usize);
                            }
                        }
                        // A-term: k = s + 2, B-term: k = s + 1
                        let k = s + 2;
                        if k <= n_max && k <= n + 1 && !act_a.is_empty() {
                            let l = n + 1 - k;
                            let coef = (k * (k - 1)) as f64 / (n as f64 * layout.binom(n - 1, k - 2) as f64);
                            let rank_r = layout.rank(&psc);
                            let ins = Insertion::new(layout, &ps);
                            let lk = layout.dpow(k + 1);
                            let ll = layout.dpow(l + 1);
                            for &(r, g) in &act_a {
                                let (j, rank_l) = ins.insert(layout, &ps, r);
                                let a = &ext[k - 1][layout.ext_offset(k, q, qp, rank_l)..][..lk];
                                let b = &plain[l][layout.plain_offset(l, r, rank_r)..][..ll];
                                plans.ext_a[n][mask][j].accumulate(block, a, b, coef * g, d);
                            }
                        }
                        let k = s + 1;
                        let l = n + 1 - k;
                        if k <= n_max && l >= 1 && !act_b.is_empty() {
                            let coef = (k * l) as f64 / (n as f64 * layout.binom(n - 1, k - 1) as f64);
                            let rank_s = layout.rank(&ps);
                            let rank_sc = layout.rank(&psc);
                            let lk = layout.dpow(k + 1);
                            let ll = layout.dpow(l + 1);
                            for &(r, g) in &act_b {
                                let a = &ext[k - 1][layout.ext_offset(k, q, r, rank_s)..][..lk];
                                let b = &ext[l - 1][layout.ext_offset(l, r, qp, rank_sc)..][..ll];
                                plans.ext_b[n][mask].accumulate(block, a, b, coef * g, d);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Increment of a hierarchy (plain levels and any kappa family) for given weights.
pub fn rhs_with_weights(h: &KernelHierarchy, weights: &ModeWeights) -> KernelHierarchy {
    let mut out = h.zeros_like();
    let layout = h.layout().clone();
    product_plain(&layout, &h.plain, &h.plain, &weights.plain, &mut out.plain);
    if let (Some(fam), Some(ofam)) = (&h.kappa, &mut out.kappa) {
        for (j, (ext, oext)) in fam.levels.iter().zip(ofam.levels.iter_mut()).enumerate() {
            product_kappa(&layout, &h.plain, ext, &weights.plain, &weights.kappa[j], oext);
        }
    }
    out
}

/// Plain-level increment `dw/dt` at time `t` (kappa family ignored).
pub fn rhs_plain(h: &KernelHierarchy, t: f64, schedule: &CutoffSchedule, omega: &FrequencyVector) -> KernelHierarchy {
    let weights = ModeWeights::at_time(t, schedule, &h.divisors(omega), None);
    let mut out = KernelHierarchy::with_layout(h.layout().clone());
    product_plain(h.layout(), &h.plain, &h.plain, &weights.plain, &mut out.plain);
    out
}

/// Extended-level increment at time `t`, `[j][n - 1]`.
pub fn rhs_kappa(
    h: &KernelHierarchy,
    t: f64,
    schedule: &CutoffSchedule,
    omega: &FrequencyVector,
) -> crate::Result<Vec<Vec<Vec<C64>>>> {
    let fam = h.kappa.as_ref().ok_or(crate::Error::NotExtended)?;
    let weights = ModeWeights::at_time(t, schedule, &h.divisors(omega), Some(fam.grid));
    let layout = h.layout().clone();
    Ok(fam
        .levels
        .iter()
        .enumerate()
        .map(|(j, ext)| {
            let mut o: Vec<Vec<C64>> = ext.iter().map(|l| vec![C64::new(0.0, 0.0); l.len()]).collect();
            product_kappa(&layout, &h.plain, ext, &weights.plain, &weights.kappa[j], &mut o);
            o
        })
        .collect())
}
