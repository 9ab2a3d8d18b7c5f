//! End-to-end runs behind the command-line driver. Each function returns its
//! results together with the artifacts it would write, as named byte buffers,
//! so that callers decide where (and whether) they land on disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Resolved, RunConfig};
use crate::conjugacy::{continuation_solve, extract_torus, ConjugacyHierarchy, ContinuationOptions, TorusSolution};
use crate::cutoff::min_divisor;
use crate::error::Result;
use crate::flow::trace::write_trace_csv;
use crate::flow::{integrate, FlowState, StepperConfig};
use crate::io::{theta_grid_csv, TorusFile};
use crate::kernels::dump::write_kernel_dump;
use crate::kernels::symmetry::{transpose_residual, ward_residual};
use crate::lattice::{estimate_diophantine, DiophantineEstimate};
use crate::oracles::{
    align_translation, lindstedt, newton_solve, residual, NewtonIterate, ResidualReport, VerificationReport,
};
use crate::potential::{build_initial_kernels, DecayFit};
use crate::spectral::{grid_size_for, FourierSeries};

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn json<T: Serialize>(name: &str, value: &T) -> Result<Self> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        Ok(Artifact { name: name.into(), bytes: s.into_bytes() })
    }

    fn text(name: &str, s: String) -> Self {
        Artifact { name: name.into(), bytes: s.into_bytes() }
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        crate::io::write_atomic(&dir.join(&self.name), &self.bytes)
    }
}

/// Thresholds for the in-run invariant summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantTolerances {
    pub ward: f64,
    pub transpose: f64,
    pub reality: f64,
    /// Relative to the largest `|w_0(q)|`.
    pub w0_at_zero: f64,
    pub tail_certificate: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        InvariantTolerances { ward: 1e-8, transpose: 1e-8, reality: 1e-12, w0_at_zero: 1e-12, tail_certificate: 1e-10 }
    }
}

/// Maxima over the flow trace. `None` marks a check that does not apply
/// (the interior Ward identity needs `n_max >= 2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub t_end: f64,
    pub steps: usize,
    pub beta: f64,
    pub rho: f64,
    pub ward_residual: Option<f64>,
    pub ward_residual_top: Option<f64>,
    pub transpose_residual: f64,
    pub reality_residual: f64,
    pub w0_at_zero: f64,
    pub w0_scale: f64,
    pub tail_certificate: Option<f64>,
    pub tolerances: InvariantTolerances,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub resolved: Resolved,
    /// State at `t_end`.
    pub state: FlowState,
    pub torus: TorusSolution,
    pub summary: InvariantSummary,
}

fn finite_max(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.filter(|x| !x.is_nan()).fold(None, |m, x| Some(m.map_or(x, |m: f64| m.max(x))))
}

/// Flows the kernel and conjugacy hierarchies to `t_end` and reads off the torus.
///
/// The run is continued (for free, the flow being frozen) to `4/3 t_end` so
/// that the last quarter of the recorded `f_0` history certifies convergence.
pub fn run_flow(cfg: &RunConfig, base: Option<&Path>) -> Result<FlowRun> {
    let r = cfg.resolve(base)?;
    let mut h = build_initial_kernels(&r.potential, cfg.lambda, cfg.n_max, &r.kernel_box)?;
    if let Some(g) = r.kappa_grid {
        h.extend_kappa(g);
    }
    let c = ConjugacyHierarchy::initial(h.layout().clone(), 1.0);
    let state = integrate(FlowState::new(h, Some(c)), &r.schedule, &r.omega, &r.stepper, r.t_end)?;
    let quiet = StepperConfig { trace_every: 0, ..r.stepper };
    let tail = integrate(state.clone(), &r.schedule, &r.omega, &quiet, r.t_end * 4.0 / 3.0)?;
    let conj = tail.conjugacy.as_ref().expect("conjugacy is flowed");
    let mut torus = extract_torus(conj, &tail.f0_history, cfg.lambda, &r.omega, 1e-12)?;
    torus.t_end = r.t_end;
    torus.residual_report =
        Some(residual(&r.potential, cfg.lambda, &r.omega, &torus.x, grid_size_for(r.kernel_box.radius()))?);

    let tol = InvariantTolerances::default();
    let tr = &state.trace;
    let ward = finite_max(tr.iter().map(|x| x.ward_residual));
    let ward_top = finite_max(tr.iter().map(|x| x.ward_residual_top));
    let transpose = finite_max(tr.iter().map(|x| x.transpose_residual)).unwrap_or(0.0);
    let reality = finite_max(tr.iter().map(|x| x.reality_residual)).unwrap_or(0.0);
    let w0z = finite_max(tr.iter().map(|x| x.w0_at_zero)).unwrap_or(0.0);
    let w0_scale = state.hierarchy.level(0).iter().fold(0.0, |m: f64, z| m.max(z.norm()));
    let passed = ward.is_none_or(|w| w <= tol.ward)
        && transpose <= tol.transpose
        && reality <= tol.reality
        && w0z <= tol.w0_at_zero * w0_scale
        && torus.tail_certificate.is_none_or(|c| c <= tol.tail_certificate);
    let norms = r.stepper.norms.unwrap_or(crate::kernels::norms::NormParams { beta: f64::NAN, rho: f64::NAN });
    let summary = InvariantSummary {
        t_end: r.t_end,
        steps: state.steps,
        beta: norms.beta,
        rho: norms.rho,
        ward_residual: ward,
        ward_residual_top: ward_top,
        transpose_residual: transpose,
        reality_residual: reality,
        w0_at_zero: w0z,
        w0_scale,
        tail_certificate: torus.tail_certificate,
        tolerances: tol,
        passed,
    };
    Ok(FlowRun { resolved: r, state, torus, summary })
}

impl FlowRun {
    /// `config.json`, `torus.json`, `torus_grid.csv`, `trace.csv`, `invariants.json`.
    pub fn artifacts(&self, cfg: &RunConfig) -> Result<Vec<Artifact>> {
        let file = TorusFile::from_series(&self.torus.x, &self.torus.omega, self.torus.lambda, self.torus.residual_report.clone());
        let mut trace = Vec::new();
        write_trace_csv(&self.state.trace, &mut trace)?;
        Ok(vec![
            Artifact::json("config.json", cfg)?,
            Artifact::json("torus.json", &file)?,
            Artifact::text("torus_grid.csv", theta_grid_csv(&self.torus.x, 32)),
            Artifact { name: "trace.csv".into(), bytes: trace },
            Artifact::json("invariants.json", &self.summary)?,
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub report: VerificationReport,
    pub residuals: ResidualReport,
    pub tolerance: f64,
}

/// Residual and translation checks of a stored torus against the configured
/// potential. Passes when the per-mode and zero-mode residuals are at most
/// `verify_tol * |lambda|`.
pub fn verify(cfg: &RunConfig, torus: &TorusFile, base: Option<&Path>) -> Result<Verification> {
    cfg.validate()?;
    let v = cfg.load_potential(base)?;
    let omega = crate::lattice::FrequencyVector::new(torus.omega.clone())?;
    let x = torus.to_series()?;
    let lambda = torus.lambda;
    let bx = x.basis.clone();
    let res = residual(&v, lambda, &omega, &x, grid_size_for(bx.radius()))?;
    let radius = lindstedt(&v, &omega, &bx, cfg.lindstedt_order).ok().and_then(|e| e.radius_estimate());
    let newton = newton_solve(&v, lambda, &omega, &bx, None);
    let (newton_converged, translation_distance) = match &newton {
        Ok(n) if n.converged => (true, Some(align_translation(&x, &n.x).distance)),
        _ => (false, None),
    };
    let tolerance = cfg.verify_tol * lambda.abs();
    let passed = res.mode_residual_max <= tolerance && res.zero_mode <= tolerance;
    let report = VerificationReport {
        lindstedt_radius_estimate: radius,
        newton_converged,
        sup_residual: res.sup_residual,
        mode_residual_max: res.mode_residual_max,
        zero_mode: res.zero_mode,
        translation_distance,
        worst_mode: res.worst_mode.clone(),
        passed,
    };
    Ok(Verification { report, residuals: res, tolerance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindstedtOutput {
    pub order: usize,
    pub lambda: f64,
    pub radius_estimate: Option<f64>,
    pub ratios: Vec<f64>,
    pub zero_mode_forces: Vec<f64>,
    pub partial_sum: TorusFile,
}

/// Lindstedt series to `lindstedt_order` on the solver box.
pub fn run_lindstedt(cfg: &RunConfig, base: Option<&Path>) -> Result<LindstedtOutput> {
    let r = cfg.resolve(base)?;
    let ex = lindstedt(&r.potential, &r.omega, &r.solver_box, cfg.lindstedt_order)?;
    let sum = ex.partial_sum(cfg.lambda, cfg.lindstedt_order);
    let res = residual(&r.potential, cfg.lambda, &r.omega, &sum, grid_size_for(r.solver_box.radius()))?;
    Ok(LindstedtOutput {
        order: ex.order,
        lambda: cfg.lambda,
        radius_estimate: ex.radius_estimate(),
        ratios: ex.ratios(),
        zero_mode_forces: ex.zero_mode_forces.clone(),
        partial_sum: TorusFile::from_series(&sum, r.omega.components(), cfg.lambda, Some(res)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutput {
    pub converged: bool,
    pub final_residual: f64,
    pub log: Vec<NewtonIterate>,
    pub torus: TorusFile,
}

/// Dense Newton solve on the solver box.
pub fn run_newton(cfg: &RunConfig, base: Option<&Path>) -> Result<NewtonOutput> {
    let r = cfg.resolve(base)?;
    let rep = newton_solve(&r.potential, cfg.lambda, &r.omega, &r.solver_box, None)?;
    let res = residual(&r.potential, cfg.lambda, &r.omega, &rep.x, grid_size_for(r.solver_box.radius()))?;
    Ok(NewtonOutput {
        converged: rep.converged,
        final_residual: rep.final_residual,
        log: rep.log,
        torus: TorusFile::from_series(&rep.x, r.omega.components(), cfg.lambda, Some(res)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// Real-space sup residual of the Lindstedt sum truncated at orders `1..`.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub solvers: Vec<String>,
    /// Pairwise `min_beta ||a - T_beta b||_1` on the solver box.
    pub distances: Vec<Vec<f64>>,
    pub sweep: Vec<SweepRow>,
    /// Least-squares slope of `log residual` against `log lambda`, per order.
    pub slopes: Vec<f64>,
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Cross-validates the flow torus, the continuation torus, the Lindstedt sum
/// and the Newton torus, and measures the Lindstedt residual slopes.
pub fn compare(cfg: &RunConfig, base: Option<&Path>) -> Result<Comparison> {
    let flow = run_flow(cfg, base)?;
    let r = &flow.resolved;
    let sb = &r.solver_box;
    let cont = continuation_solve(&r.potential, cfg.lambda, &r.omega, sb, &r.schedule, &ContinuationOptions::default())?;
    let ex = lindstedt(&r.potential, &r.omega, sb, cfg.lindstedt_order)?;
    let newton = newton_solve(&r.potential, cfg.lambda, &r.omega, sb, None)?;
    let tori: Vec<FourierSeries> =
        vec![flow.torus.x.resample(sb), cont.x, ex.partial_sum(cfg.lambda, cfg.lindstedt_order), newton.x];
    let distances = tori
        .iter()
        .map(|a| tori.iter().map(|b| if a == b { 0.0 } else { align_translation(a, b).distance }).collect())
        .collect();
    let orders = cfg.lindstedt_order.min(3);
    let sweep_ex = lindstedt(&r.potential, &r.omega, sb, orders)?;
    let grid = grid_size_for(sb.radius());
    let sweep = cfg
        .lambda_sweep
        .iter()
        .map(|&l| {
            let residuals = (1..=orders)
                .map(|k| Ok(residual(&r.potential, l, &r.omega, &sweep_ex.partial_sum(l, k), grid)?.sup_residual))
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepRow { lambda: l, residuals })
        })
        .collect::<Result<Vec<_>>>()?;
    let lams: Vec<f64> = sweep.iter().map(|s| s.lambda).collect();
    let slopes = (0..orders)
        .map(|k| fit_slope(&lams, &sweep.iter().map(|s| s.residuals[k]).collect::<Vec<_>>()))
        .collect();
    Ok(Comparison {
        solvers: ["rg_flow", "continuation", "lindstedt", "newton"].map(String::from).to_vec(),
        distances,
        sweep,
        slopes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResiduals {
    pub n: usize,
    pub ward: Option<f64>,
    pub transpose: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub diophantine: DiophantineEstimate,
    pub min_divisor: f64,
    pub freeze_time: f64,
    pub t_end: f64,
    pub decay: DecayFit,
    pub initial_levels: Vec<LevelResiduals>,
}

/// Small-divisor, decay and initial-kernel diagnostics; the second value is
/// the JSON-lines dump of the initial kernels.
pub fn diagnose(cfg: &RunConfig, base: Option<&Path>) -> Result<(Diagnosis, Vec<u8>)> {
    let r = cfg.resolve(base)?;
    let mut omega = r.omega.clone();
    let diophantine = estimate_diophantine(&mut omega, &r.kernel_box, 1.0)?;
    let h = build_initial_kernels(&r.potential, cfg.lambda, cfg.n_max, &r.kernel_box)?;
    let d = h.dim();
    let initial_levels = (0..=cfg.n_max)
        .map(|n| {
            let ward = if n < cfg.n_max {
                Some((0..d).map(|a| ward_residual(&h, n, a)).try_fold(0.0, |m: f64, x| x.map(|x| m.max(x)))?)
            } else {
                None
            };
            let transpose = if n >= 1 { Some(transpose_residual(&h, n)?) } else { None };
            Ok(LevelResiduals { n, ward, transpose })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dump = Vec::new();
    write_kernel_dump(&h, &mut dump)?;
    let diag = Diagnosis {
        diophantine,
        min_divisor: min_divisor(&r.omega, &r.kernel_box)?,
        freeze_time: r.schedule.freeze_time(&r.omega, &r.kernel_box)?,
        t_end: r.t_end,
        decay: r.potential.fit_decay(),
        initial_levels,
    };
    Ok((diag, dump))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::EndTime;

    fn small() -> RunConfig {
        RunConfig { box_q_kernel: 1, box_q_solver: 3, n_max: 2, ..Default::default() }
    }

    #[test]
    fn zero_coupling_gives_zero_torus() {
        let cfg = RunConfig { lambda: 0.0, ..small() };
        let run = run_flow(&cfg, None).unwrap();
        assert_eq!(run.torus.x.max_abs(), 0.0);
        assert!(run.summary.passed);
        assert_eq!(run.summary.tail_certificate, Some(0.0));
    }

    #[test]
    fn flow_artifacts_are_reproducible() {
        let cfg = small();
        let a = run_flow(&cfg, None).unwrap().artifacts(&cfg).unwrap();
        let b = run_flow(&cfg, None).unwrap().artifacts(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn fixed_end_time_is_honoured() {
        let cfg = RunConfig { t_end: EndTime::Fixed(0.5), ..small() };
        let run = run_flow(&cfg, None).unwrap();
        assert_eq!(run.state.t, 0.5);
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1e-4, 1e-3, 1e-2];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
