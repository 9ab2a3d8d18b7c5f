use kam_rg::cutoff::{CutoffSchedule, EndTime};
use kam_rg::flow::{integrate, FlowState, Method, StepperConfig};
use kam_rg::kernels::symmetry::{symmetrize, transpose_residual, ward_residual, FullKernel};
use kam_rg::kernels::KappaGrid;
use kam_rg::lattice::{FrequencyVector, TruncationBox};
use kam_rg::potential::{build_initial_kernels, AnalyticPotential};
use kam_rg::C64;
use proptest::prelude::*;

fn quiet() -> StepperConfig {
    StepperConfig { trace_every: 0, ..Default::default() }
}

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn cutoff_derivative_integrates_to_the_full_multiplier() {
    let s = CutoffSchedule::default();
    for kappa in [0.09, 0.38, 0.618, 1.0, -1.618, 2.618, 4.2] {
        let t_top = s.eta_inverse(2.0 / f64::abs(kappa)) + 0.1;
        let integral = simpson(|t| s.gamma_dot(t, kappa), 0.0, t_top, 200_000);
        let target = 1.0 / (kappa * kappa);
        assert!((integral - target).abs() <= 1e-10 * target, "kappa {kappa}: {integral} vs {target}");
        assert_eq!(s.gamma(t_top, kappa), target);
    }
}

#[test]
fn gamma_vanishes_before_the_window_opens() {
    let s = CutoffSchedule::default();
    let kappa = 0.5;
    let t_open = s.eta_inverse(1.0 / kappa);
    assert_eq!(s.gamma(0.9 * t_open, kappa), 0.0);
    assert_eq!(s.gamma_dot(0.9 * t_open, kappa), 0.0);
    assert!(s.gamma_dot(1.1 * t_open, kappa) > 0.0);
}

fn random_kernel(d: usize, modes: usize, n: usize, seed: &[f64]) -> FullKernel {
    let mut w = FullKernel::zeros(d, modes, n);
    for (i, z) in w.data.iter_mut().enumerate() {
        let a = seed[i % seed.len()];
        *z = C64::new((a * (i as f64 + 1.0)).sin(), (a * (2 * i + 1) as f64).cos());
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetrization_is_idempotent(seed in prop::collection::vec(-3.0f64..3.0, 1..7), n in 1usize..=3) {
        let w = random_kernel(2, 3, n, &seed);
        let once = symmetrize(&w, false);
        let twice = symmetrize(&once, false);
        let gap = once.data.iter().zip(&twice.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-15, "gap {gap}");
    }

    #[test]
    fn initial_kernels_satisfy_the_identities_exactly(lambda in -1e-2f64..1e-2, q in 1usize..=2, n_max in 1usize..=2) {
        let v = AnalyticPotential::cosine_sum(2);
        let bx = TruncationBox::new(2, q).unwrap();
        let h = build_initial_kernels(&v, lambda, n_max, &bx).unwrap();
        for n in 0..n_max {
            for a in 0..2 {
                prop_assert!(ward_residual(&h, n, a).unwrap() <= 1e-14 * lambda.abs().max(1e-300));
            }
        }
        for n in 1..=n_max {
            prop_assert!(transpose_residual(&h, n).unwrap() <= 1e-14 * lambda.abs().max(1e-300));
        }
    }
}

#[test]
fn kappa_zero_slice_follows_the_plain_flow() {
    let v = AnalyticPotential::cosine_sum(2);
    let w = FrequencyVector::golden();
    let bx = TruncationBox::new(2, 1).unwrap();
    let s = CutoffSchedule::default();
    let mut h = build_initial_kernels(&v, 1e-2, 2, &bx).unwrap();
    let grid = KappaGrid::new(5, 0.3).unwrap();
    h.extend_kappa(grid);
    let t_end = s.resolve_end(&w, &bx, 0.05).unwrap();
    let h = integrate(FlowState::new(h, None), &s, &w, &quiet(), t_end).unwrap().hierarchy;
    let j0 = (0..grid.len()).find(|&j| grid.kappa(j) == 0.0).unwrap();
    let scale = h.max_abs();
    for q in 0..bx.len() {
        for qp in 0..bx.len() {
            let ext = h.ext_tensor(j0, 1, q, qp, &[]).unwrap();
            let plain = h.plain_tensor(1, q, &[qp]).unwrap();
            let gap = ext.iter().zip(&plain).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(gap <= 1e-14 * scale, "q {q} q' {qp}: {gap}");
        }
    }
}

#[test]
fn both_integrators_agree() {
    let v = AnalyticPotential::cosine_sum(2);
    let w = FrequencyVector::golden();
    let bx = TruncationBox::new(2, 1).unwrap();
    let s = CutoffSchedule::default();
    let t_end = s.resolve_end(&w, &bx, 0.4).unwrap();
    let run = |cfg: StepperConfig| {
        let h = build_initial_kernels(&v, 1e-3, 2, &bx).unwrap();
        integrate(FlowState::new(h, None), &s, &w, &cfg, t_end).unwrap().hierarchy
    };
    let rk = run(StepperConfig { h: 0.0125, ..quiet() });
    let gl = run(StepperConfig { method: Method::Collocation, h: 0.4, ..quiet() });
    let gap = rk.max_abs_diff(&gl);
    assert!(gap <= 1e-9 * gl.max_abs(), "gap {gap:e} vs scale {:e}", gl.max_abs());
}

#[test]
fn flow_is_frozen_after_the_freeze_time() {
    let v = AnalyticPotential::cosine_sum(2);
    let w = FrequencyVector::golden();
    let bx = TruncationBox::new(2, 1).unwrap();
    let s = CutoffSchedule::default();
    let freeze = s.freeze_time(&w, &bx).unwrap();
    let h = build_initial_kernels(&v, 1e-2, 2, &bx).unwrap();
    let a = integrate(FlowState::new(h, None), &s, &w, &quiet(), freeze).unwrap();
    let b = integrate(a.clone(), &s, &w, &quiet(), 3.0 * freeze).unwrap();
    assert_eq!(a.hierarchy, b.hierarchy);
    assert_eq!(b.t, 3.0 * freeze);
}

#[test]
fn end_time_auto_is_past_the_freeze_time() {
    let w = FrequencyVector::golden();
    let bx = TruncationBox::new(2, 2).unwrap();
    let s = CutoffSchedule::default().with_end(EndTime::Auto);
    let freeze = s.freeze_time(&w, &bx).unwrap();
    let end = s.resolve_end(&w, &bx, 0.05).unwrap();
    assert!(end > freeze && end <= freeze + 0.05 + 1e-12);
}

#[test]
fn leading_kernel_is_odd_in_the_coupling() {
    let v = AnalyticPotential::cosine_sum(2);
    let w = FrequencyVector::golden();
    let bx = TruncationBox::new(2, 1).unwrap();
    let s = CutoffSchedule::default();
    let t_end = s.resolve_end(&w, &bx, 0.05).unwrap();
    let run = |lambda: f64| {
        let h = build_initial_kernels(&v, lambda, 2, &bx).unwrap();
        integrate(FlowState::new(h, None), &s, &w, &quiet(), t_end).unwrap().hierarchy
    };
    let lambda = 1e-4;
    let (p, m) = (run(lambda), run(-lambda));
    let even = p.level(0).iter().zip(m.level(0)).map(|(a, b)| (a + b).norm()).fold(0.0, f64::max);
    let odd = p.level(0).iter().zip(m.level(0)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(even <= 10.0 * lambda * odd, "even part {even:e}, odd part {odd:e}");
}
