//! Time integration of the kernel flow and, optionally, the conjugacy flow.

pub mod quadrature;
pub mod rhs;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::conjugacy::ConjugacyHierarchy;
use crate::cutoff::{eta_breakpoints, min_divisor, CutoffSchedule};
use crate::error::{Error, Result};
use crate::kernels::norms::{norm_report, NormParams, NormReport};
use crate::kernels::symmetry::{reality_residual, transpose_residual, ward_residual};
use crate::kernels::KernelHierarchy;
use crate::lattice::FrequencyVector;
use crate::C64;
use quadrature::GaussTableau;
pub use rhs::{rhs_kappa, rhs_plain, rhs_with_weights, ModeWeights};
pub use trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta in `t`, steps split at cutoff breakpoints.
    #[default]
    Rk4,
    /// Gauss-Legendre collocation in `eta`, solved by Picard iteration.
    Collocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub method: Method,
    /// Nominal step in `t`.
    pub h: f64,
    pub stages: usize,
    /// Picard stopping threshold, relative to the largest state entry.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Record a trace line every this many steps (0 disables tracing).
    pub trace_every: usize,
    /// Abort when reality or `w_0(0)` drift beyond this fraction of the state scale.
    pub invariant_tol: f64,
    pub norms: Option<NormParams>,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            method: Method::Rk4,
            h: 0.05,
            stages: 5,
            picard_tol: 1e-15,
            picard_max_iter: 60,
            trace_every: 1,
            invariant_tol: 1e-9,
            norms: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub hierarchy: KernelHierarchy,
    pub conjugacy: Option<ConjugacyHierarchy>,
    pub trace: Vec<TraceRecord>,
    pub norms: Vec<NormReport>,
    /// `(t, f_0(t))` after every accepted step.
    pub f0_history: Vec<(f64, Vec<C64>)>,
    pub steps: usize,
}

impl FlowState {
    pub fn new(hierarchy: KernelHierarchy, conjugacy: Option<ConjugacyHierarchy>) -> Self {
        FlowState { t: 0.0, hierarchy, conjugacy, trace: Vec::new(), norms: Vec::new(), f0_history: Vec::new(), steps: 0 }
    }
}

#[derive(Clone)]
struct Fields {
    w: KernelHierarchy,
    f: Option<KernelHierarchy>,
}

impl Fields {
    fn rhs(&self, weights: &ModeWeights) -> Fields {
        let w = rhs_with_weights(&self.w, weights);
        let f = self.f.as_ref().map(|f| {
            let mut o = f.zeros_like();
            rhs::product_plain(f.layout(), &f.plain, &self.w.plain, &weights.plain, &mut o.plain);
            o
        });
        Fields { w, f }
    }

    fn axpy(&mut self, a: f64, other: &Fields) {
        self.w.axpy(a, &other.w);
        if let (Some(x), Some(y)) = (&mut self.f, &other.f) {
            x.axpy(a, y);
        }
    }

    fn max_abs(&self) -> f64 {
        self.w.max_abs().max(self.f.as_ref().map_or(0.0, |f| f.max_abs()))
    }

    fn max_abs_diff(&self, other: &Fields) -> f64 {
        let fw = self.w.max_abs_diff(&other.w);
        match (&self.f, &other.f) {
            (Some(a), Some(b)) => fw.max(a.max_abs_diff(b)),
            _ => fw,
        }
    }
}

fn all_divisors(h: &KernelHierarchy, omega: &FrequencyVector) -> Vec<f64> {
    let div = h.divisors(omega);
    let mut all = div.clone();
    if let Some(grid) = h.kappa_grid() {
        for k in grid.kappas() {
            all.extend(div.iter().map(|w| w + k));
        }
    }
    all
}

fn rk4_step(y: &Fields, t: f64, dt: f64, schedule: &CutoffSchedule, div: &[f64], h: &KernelHierarchy) -> Fields {
    let grid = h.kappa_grid();
    let wt = |s: f64| ModeWeights::at_time(s, schedule, div, grid);
    let k1 = y.rhs(&wt(t));
    let mut y2 = y.clone();
    y2.axpy(0.5 * dt, &k1);
    let k2 = y2.rhs(&wt(t + 0.5 * dt));
    let mut y3 = y.clone();
    y3.axpy(0.5 * dt, &k2);
    let k3 = y3.rhs(&wt(t + 0.5 * dt));
    let mut y4 = y.clone();
    y4.axpy(dt, &k3);
    let k4 = y4.rhs(&wt(t + dt));
    let mut out = y.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out
}

#[allow(clippy::too_many_arguments)]
fn collocation_step(
    y: &Fields,
    eta_a: f64,
    eta_b: f64,
    tab: &GaussTableau,
    div: &[f64],
    h: &KernelHierarchy,
    cfg: &StepperConfig,
) -> Result<Fields> {
    let grid = h.kappa_grid();
    let hh = eta_b - eta_a;
    let s = tab.c.len();
    let weights: Vec<ModeWeights> = tab.c.iter().map(|&c| ModeWeights::at_eta(eta_a + c * hh, div, grid)).collect();
    let mut stages: Vec<Fields> = vec![y.clone(); s];
    let mut change = f64::INFINITY;
    for _ in 0..cfg.picard_max_iter {
        let f: Vec<Fields> = stages.iter().zip(&weights).map(|(st, w)| st.rhs(w)).collect();
        let mut next = Vec::with_capacity(s);
        for i in 0..s {
            let mut yi = y.clone();
            for (j, fj) in f.iter().enumerate() {
                if tab.a[i][j] != 0.0 {
                    yi.axpy(hh * tab.a[i][j], fj);
                }
            }
            next.push(yi);
        }
        change = next.iter().zip(&stages).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
        stages = next;
        let scale = stages.iter().map(|st| st.max_abs()).fold(0.0, f64::max);
        if change <= cfg.picard_tol * scale {
            let mut out = y.clone();
            for (j, fj) in f.iter().enumerate() {
                out.axpy(hh * tab.b[j], fj);
            }
            return Ok(out);
        }
    }
    Err(Error::PicardStalled { from: eta_a, to: eta_b, change })
}

fn check_invariants(y: &Fields, t: f64, tol: f64) -> Result<()> {
    for (name, h) in std::iter::once(("w", &y.w)).chain(y.f.iter().map(|f| ("f", f))) {
        let scale = h.max_abs();
        if scale == 0.0 {
            continue;
        }
        let limit = tol * scale;
        let real = reality_residual(h);
        if real > limit {
            return Err(Error::InvariantDrift { t, what: format!("reality residual of {name}"), value: real, limit });
        }
    }
    let scale = y.w.plain[0].iter().fold(0.0, |m: f64, z| m.max(z.norm()));
    let z = y.w.w0_at_zero();
    if z > tol * scale && z > 0.0 {
        return Err(Error::InvariantDrift { t, what: "|w_0(0)|".into(), value: z, limit: tol * scale });
    }
    Ok(())
}

/// Residual snapshot of the current state.
pub fn snapshot(
    t: f64,
    h: &KernelHierarchy,
    schedule: &CutoffSchedule,
    omega: &FrequencyVector,
    norms: Option<NormParams>,
) -> Result<(TraceRecord, Option<NormReport>)> {
    let n_max = h.n_max();
    let d = h.dim();
    let ward_level = |n: usize| -> Result<f64> {
        (0..d).map(|a| ward_residual(h, n, a)).try_fold(0.0, |m: f64, r| Ok(m.max(r?)))
    };
    let ward = if n_max >= 2 {
        (0..=n_max - 2).map(ward_level).try_fold(0.0, |m: f64, r| Ok::<f64, Error>(m.max(r?)))?
    } else {
        f64::NAN
    };
    let ward_top = if n_max >= 1 { ward_level(n_max - 1)? } else { f64::NAN };
    let transpose = (1..=n_max).map(|n| transpose_residual(h, n)).try_fold(0.0, |m: f64, r| Ok::<f64, Error>(m.max(r?)))?;
    let report = norms.map(|p| norm_report(h, t, p, schedule, omega)).transpose()?;
    let rec = TraceRecord {
        t,
        w0_norm: report.as_ref().map_or(f64::NAN, |r| r.per_n_norm[0]),
        w1_norm: report.as_ref().map_or(f64::NAN, |r| r.per_n_norm.get(1).copied().unwrap_or(0.0)),
        high_norm: report.as_ref().map_or(f64::NAN, |r| r.high_term()),
        composite: report.as_ref().map_or(f64::NAN, |r| r.composite),
        ward_residual: ward,
        ward_residual_top: ward_top,
        transpose_residual: transpose,
        w0_at_zero: h.w0_at_zero(),
        reality_residual: reality_residual(h),
    };
    Ok((rec, report))
}

fn record(state: &mut FlowState, y: &Fields, schedule: &CutoffSchedule, omega: &FrequencyVector, cfg: &StepperConfig, force: bool) -> Result<()> {
    let seen = state.f0_history.last().map(|r| r.0).or(state.trace.last().map(|r| r.t));
    if force && seen == Some(state.t) {
        return Ok(());
    }
    if let Some(f) = &y.f {
        let d = f.dim();
        state.f0_history.push((state.t, f.plain[0].chunks(d).flatten().copied().collect()));
    }
    if cfg.trace_every > 0 && (force || state.steps % cfg.trace_every == 0) {
        let (rec, rep) = snapshot(state.t, &y.w, schedule, omega, cfg.norms)?;
        state.trace.push(rec);
        if let Some(r) = rep {
            state.norms.push(r);
        }
    }
    Ok(())
}

/// Advances `state` to `t_end`.
///
/// Intervals on which the cutoff derivative vanishes on every mode are skipped,
/// so integrating past the freeze time leaves the state bit-identical.
pub fn integrate(
    mut state: FlowState,
    schedule: &CutoffSchedule,
    omega: &FrequencyVector,
    cfg: &StepperConfig,
    t_end: f64,
) -> Result<FlowState> {
    schedule.validate()?;
    if !(cfg.h > 0.0) {
        return Err(Error::Config("step h must be positive".into()));
    }
    min_divisor(omega, state.hierarchy.truncation_box())?;
    if let Some(c) = &state.conjugacy {
        if c.f.truncation_box() != state.hierarchy.truncation_box() || c.f.n_max() != state.hierarchy.n_max() {
            return Err(Error::InvalidArgument("conjugacy and kernel hierarchies differ in shape".into()));
        }
    }
    let div = state.hierarchy.divisors(omega);
    let all = all_divisors(&state.hierarchy, omega);
    let breaks_eta = eta_breakpoints(all.iter().copied());
    let mut y = Fields { w: state.hierarchy.clone(), f: state.conjugacy.as_ref().map(|c| c.f.clone()) };
    let proto = state.hierarchy.clone();
    if state.trace.is_empty() && state.f0_history.is_empty() {
        record(&mut state, &y, schedule, omega, cfg, true)?;
    }
    let active = |eta: f64| !ModeWeights::at_eta(eta, &div, proto.kappa_grid()).is_zero();

    match cfg.method {
        Method::Rk4 => {
            let mut nodes: Vec<f64> = breaks_eta.iter().map(|&e| schedule.eta_inverse(e)).collect();
            let mut k = (state.t / cfg.h).floor() as i64 + 1;
            while (k as f64) * cfg.h < t_end {
                nodes.push(k as f64 * cfg.h);
                k += 1;
            }
            nodes.push(t_end);
            nodes.retain(|&t| t > state.t && t <= t_end);
            nodes.sort_by(f64::total_cmp);
            nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
            for &tb in &nodes {
                let ta = state.t;
                let mid = 0.5 * (ta + tb);
                if active(schedule.eta(mid)) {
                    y = rk4_step(&y, ta, tb - ta, schedule, &div, &proto);
                    check_invariants(&y, tb, cfg.invariant_tol)?;
                }
                state.t = tb;
                state.steps += 1;
                record(&mut state, &y, schedule, omega, cfg, tb == t_end)?;
            }
        }
        Method::Collocation => {
            let tab = GaussTableau::new(cfg.stages);
            let eta_s = schedule.eta(state.t);
            let eta_e = schedule.eta(t_end);
            let mut seg: Vec<f64> = breaks_eta.iter().copied().filter(|&e| e > eta_s && e < eta_e).collect();
            seg.insert(0, eta_s);
            seg.push(eta_e);
            for w in seg.windows(2) {
                let (ea, eb) = (w[0], w[1]);
                if eb <= ea {
                    continue;
                }
                if !active(0.5 * (ea + eb)) {
                    state.t = if eb == eta_e { t_end } else { schedule.eta_inverse(eb) };
                    continue;
                }
                let span = schedule.eta_inverse(eb) - schedule.eta_inverse(ea);
                let pieces = (span / cfg.h).ceil().max(1.0) as usize;
                for p in 0..pieces {
                    let a = ea + (eb - ea) * p as f64 / pieces as f64;
                    let b = if p + 1 == pieces { eb } else { ea + (eb - ea) * (p + 1) as f64 / pieces as f64 };
                    y = collocation_step(&y, a, b, &tab, &div, &proto, cfg)?;
                    state.t = if b == eta_e { t_end } else { schedule.eta_inverse(b) };
                    check_invariants(&y, state.t, cfg.invariant_tol)?;
                    state.steps += 1;
                    record(&mut state, &y, schedule, omega, cfg, false)?;
                }
            }
            state.t = t_end;
            record(&mut state, &y, schedule, omega, cfg, true)?;
        }
    }
    state.t = t_end;
    state.hierarchy = y.w;
    if let (Some(c), Some(f)) = (&mut state.conjugacy, y.f) {
        c.f = f;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TruncationBox;

    #[test]
    fn zero_hierarchy_stays_zero() {
        let bx = TruncationBox::new(2, 1).unwrap();
        let h = KernelHierarchy::zeros(&bx, 2);
        let s = CutoffSchedule::default();
        let w = FrequencyVector::golden();
        let out = integrate(FlowState::new(h.clone(), None), &s, &w, &StepperConfig::default(), 4.0).unwrap();
        assert_eq!(out.hierarchy, h);
    }
}
