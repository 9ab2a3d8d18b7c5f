//! Desk-scale acceptance run: one PASS/FAIL line per criterion.
//!
//! Setting throughout: d = 2, golden omega, v = cos theta_1 + cos theta_2,
//! hierarchy box Q = 2, solver box Q = 8.

use std::process::ExitCode;
use std::time::Instant;

use kam_rg::config::RunConfig;
use kam_rg::conjugacy::{continuation_solve, ConjugacyHierarchy, ContinuationOptions};
use kam_rg::cutoff::CutoffSchedule;
use kam_rg::flow::{integrate, FlowState, Method, StepperConfig};
use kam_rg::kernels::norms::composite_norm;
use kam_rg::kernels::symmetry::{evenness_residual, kappa_slope_at_zero, transpose_residual, translation_residual, ward_residual};
use kam_rg::kernels::KappaGrid;
use kam_rg::lattice::{FrequencyVector, Mode, TruncationBox};
use kam_rg::oracles::{align_translation, lindstedt, newton_solve, residual, translation_family_check};
use kam_rg::pipeline::{run_flow, FlowRun};
use kam_rg::potential::{build_initial_kernels, AnalyticPotential};
use kam_rg::spectral::{grid_size_for, FourierSeries};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 1e-3;

struct Ledger {
    rows: Vec<bool>,
}

impl Ledger {
    fn record(&mut self, id: &str, what: &str, value: f64, ok: bool, bound: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag}  {id:<4} {what:<52} {value:>11.3e}  {bound}");
        self.rows.push(ok);
    }

    fn at_most(&mut self, id: &str, what: &str, value: f64, limit: f64) {
        self.record(id, what, value, value <= limit, format!("<= {limit:.3e}"));
    }

    fn within(&mut self, id: &str, what: &str, value: f64, lo: f64, hi: f64) {
        self.record(id, what, value, (lo..=hi).contains(&value), format!("in [{lo:.4e}, {hi:.4e}]"));
    }
}

fn setting(q: usize) -> (AnalyticPotential, FrequencyVector, TruncationBox, CutoffSchedule) {
    (AnalyticPotential::cosine_sum(2), FrequencyVector::golden(), TruncationBox::new(2, q).unwrap(), CutoffSchedule::default())
}

fn main_config() -> RunConfig {
    RunConfig { lambda: LAMBDA, box_q_kernel: 2, n_max: 3, ..Default::default() }
}

fn criterion_1(l: &mut Ledger) {
    let (v, _, bx, _) = setting(2);
    let h = build_initial_kernels(&v, LAMBDA, 3, &bx).unwrap();
    let ward = (0..3).flat_map(|n| (0..2).map(move |a| (n, a))).map(|(n, a)| ward_residual(&h, n, a).unwrap()).fold(0.0, f64::max);
    let tr = (1..=3).map(|n| transpose_residual(&h, n).unwrap()).fold(0.0, f64::max);
    l.at_most("1", "initial kernels: Ward residual, n < n_max", ward, 1e-14);
    l.at_most("1", "initial kernels: transpose residual, n <= n_max", tr, 1e-14);
}

fn criterion_2(l: &mut Ledger, run: &FlowRun) {
    let s = &run.summary;
    l.at_most("2", "flow: max |w_0(0)| / max |w_0|", s.w0_at_zero / s.w0_scale, 1e-12);
    l.at_most("2", "flow: reality residual", s.reality_residual, 1e-12);
    l.at_most("2", "flow: interior Ward residual", s.ward_residual.unwrap(), 1e-8);
    l.at_most("2", "flow: transpose residual", s.transpose_residual, 1e-8);

    let (v, w, bx, sched) = setting(2);
    let t_end = sched.resolve_end(&w, &bx, 0.05).unwrap();
    let runs: Vec<_> = [0.0125, 0.00625, 0.003125]
        .iter()
        .map(|&h| {
            let k = build_initial_kernels(&v, LAMBDA, 2, &bx).unwrap();
            let cfg = StepperConfig { h, trace_every: 0, ..Default::default() };
            integrate(FlowState::new(k, None), &sched, &w, &cfg, t_end).unwrap().hierarchy
        })
        .collect();
    let e1 = runs[0].max_abs_diff(&runs[1]);
    let e2 = runs[1].max_abs_diff(&runs[2]);
    l.within("2", "RK4 step-halving slope log2(e_h / e_h/2)", (e1 / e2).log2(), 3.5, 4.5);
}

fn criterion_3(l: &mut Ledger) {
    let (v, w, bx, sched) = setting(1);
    let cfg = StepperConfig { trace_every: 0, ..Default::default() };
    let t_end = sched.resolve_end(&w, &bx, cfg.h).unwrap();
    let (mut tr, mut even, mut slope) = (0.0f64, 0.0f64, 0.0f64);
    for axis in 0..2 {
        let e = Mode::unit(2, axis);
        let mut h = build_initial_kernels(&v, LAMBDA, 2, &bx).unwrap();
        h.extend_kappa(KappaGrid::new(9, w.dot(e.as_slice()) / 4.0).unwrap());
        let h = integrate(FlowState::new(h, None), &sched, &w, &cfg, t_end).unwrap().hierarchy;
        for shift in [e.clone(), e.neg()] {
            for n in 1..=2 {
                tr = tr.max(translation_residual(&h, n, &shift, &w).unwrap());
            }
        }
        let w1 = h.level(1).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        even = even.max(evenness_residual(&h).unwrap());
        slope = slope.max(kappa_slope_at_zero(&h).unwrap() / w1);
    }
    l.at_most("3", "kappa family: translation residual, unit shifts", tr, 1e-6);
    l.at_most("3", "kappa family: evenness of w_1(0,0,kappa)", even, 1e-6);
    l.at_most("3", "kappa family: |d_kappa w_1(0,0,0)| / ||w_1||", slope, 1e-6);
}

fn criterion_4(l: &mut Ledger, run: &FlowRun) {
    let r = &run.resolved;
    let cfg = StepperConfig { trace_every: 0, ..r.stepper };
    let later = integrate(run.state.clone(), &r.schedule, &r.omega, &cfg, 2.0 * r.t_end).unwrap();
    let moved = later.hierarchy.max_abs_diff(&run.state.hierarchy);
    l.record("4", "hierarchy change from t_end to 2 t_end", moved, moved == 0.0, "== 0".into());
    l.at_most("4", "tail certificate of the extracted torus", run.torus.tail_certificate.unwrap(), 1e-10);
}

fn criterion_5(l: &mut Ledger) {
    let (v, w, _, sched) = setting(2);
    let sb = TruncationBox::new(2, 8).unwrap();
    let cont = continuation_solve(&v, LAMBDA, &w, &sb, &sched, &ContinuationOptions::default()).unwrap();
    let res = residual(&v, LAMBDA, &w, &cont.x, grid_size_for(8)).unwrap();
    l.at_most("5", "continuation: per-mode residual", res.mode_residual_max, 1e-10 * LAMBDA);
    l.at_most("5", "continuation: zero-mode force |u(0,x)|", res.zero_mode, 1e-10 * LAMBDA);
}

fn rg_torus(v: &AnalyticPotential, w: &FrequencyVector, bx: &TruncationBox, sched: &CutoffSchedule, lambda: f64, n_max: usize) -> FourierSeries {
    let k = build_initial_kernels(v, lambda, n_max, bx).unwrap();
    let c = ConjugacyHierarchy::initial(k.layout().clone(), 1.0);
    let cfg = StepperConfig { method: Method::Collocation, h: 0.4, trace_every: 0, ..Default::default() };
    let t_end = sched.resolve_end(w, bx, cfg.h).unwrap();
    integrate(FlowState::new(k, Some(c)), sched, w, &cfg, t_end).unwrap().conjugacy.unwrap().f0()
}

fn criterion_6(l: &mut Ledger) {
    let (v, w, _, _) = setting(2);
    let sb = TruncationBox::new(2, 8).unwrap();
    let newton = newton_solve(&v, LAMBDA, &w, &sb, None).unwrap();
    let lin = lindstedt(&v, &w, &sb, 8).unwrap().partial_sum(LAMBDA, 8);
    l.at_most("6", "Newton vs Lindstedt order 8 (l1, lambda = 1e-3)", newton.x.l1_distance(&lin), 1e-12);

    let lambda = 1e-2;
    let (v, w, bx, sched) = setting(2);
    let reference = newton_solve(&v, lambda, &w, &bx, None).unwrap().x;
    let tori: Vec<FourierSeries> = (1..=3).map(|n| rg_torus(&v, &w, &bx, &sched, lambda, n)).collect();
    let delta: Vec<f64> = tori.windows(2).map(|p| align_translation(&p[1], &p[0]).distance).collect();
    let shrink = delta[1] / delta[0];
    l.within("6", "truncation delta shrink (n_max 2->3) / (1->2)", shrink, lambda / 3.0, 3.0 * lambda);
    let dist = align_translation(&reference, &tori[1]).distance;
    let envelope = delta[1] / (1.0 - 3.0 * lambda);
    l.at_most("6", "RG (n_max = 2) vs Newton, aligned l1", dist, envelope);
}

fn criterion_7(l: &mut Ledger, run: &FlowRun) {
    let r = &run.resolved;
    let (v, _, bx, _) = setting(2);
    let k = build_initial_kernels(&v, LAMBDA / 2.0, 3, &bx).unwrap();
    let half = integrate(FlowState::new(k, None), &r.schedule, &r.omega, &r.stepper, r.t_end).unwrap();
    let ratio = composite_norm(&run.state.norms).unwrap() / composite_norm(&half.norms).unwrap();
    l.within("7", "composite norm ratio, lambda vs lambda/2", ratio, 1.8, 2.2);

    let e0: Vec<f64> = run.state.norms.iter().map(|n| (2.0 * n.t).exp() * n.per_n_norm[0]).collect();
    let growth = e0.iter().copied().fold(0.0, f64::max) / e0[0];
    l.at_most("7", "max_t e^{2t} ||w_0||_t relative to t = 0", growth, 10.0);
}

fn criterion_8(l: &mut Ledger, run: &FlowRun, seed: u64) {
    let r = &run.resolved;
    let grid = grid_size_for(r.kernel_box.radius());
    let base = translation_family_check(&run.torus.x, &[0.0, 0.0], &r.potential, LAMBDA, &r.omega, grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = 2.0 * std::f64::consts::PI;
    let worst = (0..5)
        .map(|_| {
            let beta = [rng.random_range(0.0..tau), rng.random_range(0.0..tau)];
            translation_family_check(&run.torus.x, &beta, &r.potential, LAMBDA, &r.omega, grid).unwrap()
        })
        .fold(0.0, f64::max);
    l.at_most("8", "translated sup residual / untranslated, 5 shifts", worst / base, 2.0);
}

fn criterion_9(l: &mut Ledger) {
    let cfg = RunConfig { lambda: LAMBDA, box_q_kernel: 2, n_max: 2, ..Default::default() };
    let a = run_flow(&cfg, None).unwrap().artifacts(&cfg).unwrap();
    let b = run_flow(&cfg, None).unwrap().artifacts(&cfg).unwrap();
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    l.record("9", "artifacts differing between identical runs", differing as f64, differing == 0, "== 0".into());
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    eprintln!("  [{label}: {:.1} s]", start.elapsed().as_secs_f64());
    out
}

fn main() -> ExitCode {
    let mut l = Ledger { rows: Vec::new() };
    let cfg = main_config();
    timed("criterion 1", || criterion_1(&mut l));
    let run = timed("main flow", || run_flow(&cfg, None).unwrap());
    timed("criterion 2", || criterion_2(&mut l, &run));
    timed("criterion 3", || criterion_3(&mut l));
    timed("criterion 4", || criterion_4(&mut l, &run));
    timed("criterion 5", || criterion_5(&mut l));
    timed("criterion 6", || criterion_6(&mut l));
    timed("criterion 7", || criterion_7(&mut l, &run));
    timed("criterion 8", || criterion_8(&mut l, &run, cfg.seed));
    timed("criterion 9", || criterion_9(&mut l));
    let failed = l.rows.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} checks, {} failed", l.rows.len(), failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
