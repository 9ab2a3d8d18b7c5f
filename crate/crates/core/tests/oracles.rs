use std::f64::consts::TAU;
use std::sync::OnceLock;

use kam_rg::conjugacy::{continuation_solve, ContinuationOptions};
use kam_rg::cutoff::CutoffSchedule;
use kam_rg::kernels::norms::norm_t;
use kam_rg::lattice::{FrequencyVector, TruncationBox};
use kam_rg::oracles::{align_translation, lindstedt, newton_solve, residual, translation_family_check};
use kam_rg::potential::{build_initial_kernels, AnalyticPotential};
use kam_rg::spectral::{grid_size_for, FourierSeries};
use proptest::prelude::*;

fn golden() -> (AnalyticPotential, FrequencyVector) {
    (AnalyticPotential::cosine_sum(2), FrequencyVector::golden())
}

#[test]
fn first_order_torus_matches_the_closed_form() {
    // Linearizing about X = 0 gives X_a = -lambda sin(psi_a) / omega_a^2,
    // whose coefficient at +e_a is i lambda / (2 omega_a^2).
    let (v, w) = golden();
    let bx = TruncationBox::new(2, 3).unwrap();
    let lambda = 1e-7;
    let x = newton_solve(&v, lambda, &w, &bx, None).unwrap().x;
    for a in 0..2 {
        let mut q = [0i64; 2];
        q[a] = 1;
        let got = x.at(&q)[a];
        let om = w.components()[a];
        let want = lambda / (2.0 * om * om);
        assert!(got.re.abs() <= 1e-12 * want);
        assert!((got.im - want).abs() <= 1e-5 * want, "axis {a}: {got} vs i{want}");
    }
}

#[test]
fn zero_torus_residual_is_the_bare_force() {
    let (v, w) = golden();
    let bx = TruncationBox::new(2, 2).unwrap();
    let lambda = 3e-3;
    let r = residual(&v, lambda, &w, &FourierSeries::zeros(&bx), grid_size_for(2)).unwrap();
    // |lambda d_a v(e_a)| = lambda / 2, and lambda sin is bounded by lambda.
    assert!((r.mode_residual_max - lambda / 2.0).abs() <= 1e-15);
    assert!((r.sup_residual - lambda * 2f64.sqrt()).abs() <= 1e-3 * lambda);
    assert!(r.zero_mode <= 1e-15 * lambda);
}

#[test]
fn three_solvers_agree() {
    let (v, w) = golden();
    let bx = TruncationBox::new(2, 6).unwrap();
    let lambda = 1e-3;
    let newton = newton_solve(&v, lambda, &w, &bx, None).unwrap();
    assert!(newton.converged);
    let cont = continuation_solve(&v, lambda, &w, &bx, &CutoffSchedule::default(), &ContinuationOptions::default()).unwrap();
    let lin = lindstedt(&v, &w, &bx, 8).unwrap().partial_sum(lambda, 8);
    assert!(newton.x.l1_distance(&cont.x) <= 1e-13);
    assert!(newton.x.l1_distance(&lin) <= 1e-13);
}

#[test]
fn lindstedt_residual_scales_with_the_next_order() {
    let (v, w) = golden();
    let bx = TruncationBox::new(2, 6).unwrap();
    let ex = lindstedt(&v, &w, &bx, 3).unwrap();
    for k in 1..=2 {
        let r = |l: f64| residual(&v, l, &w, &ex.partial_sum(l, k), grid_size_for(6)).unwrap().sup_residual;
        let slope = (r(1e-3) / r(5e-4)).log2();
        assert!((slope - (k + 1) as f64).abs() < 0.05, "order {k}: slope {slope}");
    }
}

#[test]
fn level_zero_norm_by_hand() {
    // At t = 0 every mode is in Lambda_t and w_0, the coupled gradient of v, is
    // supported on the four unit modes with Frobenius norm lambda / 2 each.
    let (v, w) = golden();
    let bx = TruncationBox::new(2, 2).unwrap();
    let lambda = 1e-2;
    let beta = 0.3;
    let h = build_initial_kernels(&v, lambda, 1, &bx).unwrap();
    let got = norm_t(&h, 0, 0.0, beta, &CutoffSchedule::default(), &w).unwrap();
    let want = 4.0 * beta.exp() * lambda / 2.0;
    assert!((got - want).abs() <= 1e-15 * want, "{got} vs {want}");
}

fn reference_torus() -> &'static FourierSeries {
    static X: OnceLock<FourierSeries> = OnceLock::new();
    X.get_or_init(|| {
        let (v, w) = golden();
        newton_solve(&v, 1e-2, &w, &TruncationBox::new(2, 4).unwrap(), None).unwrap().x
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn alignment_undoes_a_translation(b0 in 0.0..TAU, b1 in 0.0..TAU) {
        let x = reference_torus();
        let moved = x.translate(&[b0, b1]);
        let al = align_translation(x, &moved);
        prop_assert!(al.distance <= 1e-9, "distance {}", al.distance);
    }

    #[test]
    fn translates_solve_the_same_equation(b0 in 0.0..TAU, b1 in 0.0..TAU) {
        let (v, w) = golden();
        let x = reference_torus();
        let grid = grid_size_for(4);
        let base = translation_family_check(x, &[0.0, 0.0], &v, 1e-2, &w, grid).unwrap();
        let moved = translation_family_check(x, &[b0, b1], &v, 1e-2, &w, grid).unwrap();
        prop_assert!(moved <= 2.0 * base + 1e-15, "{moved:e} vs {base:e}");
    }
}
